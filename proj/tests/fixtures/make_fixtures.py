"""Regenerates the committed test fixtures.

NIfTI files are written by nibabel, an implementation independent of
sahnet's reader. Expected voxel values and affines go to nifti_expected.json.
"""
import json
import math
import os

import nibabel as nib
import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))


def nifti_fixtures():
    expected = {}

    # int16 with a slope/intercept, sform only.
    a = (np.arange(4 * 3 * 2, dtype=np.int16).reshape(4, 3, 2) * 7 - 50)
    aff = np.array([[0.9, 0, 0, -10.5], [0, 1.1, 0, 20.0], [0, 0, 2.5, -3.0], [0, 0, 0, 1]])
    img = nib.Nifti1Image(a, aff)
    img.header.set_data_dtype(np.int16)
    img.header.set_slope_inter(2.0, -1024.0)
    img.set_qform(None, code=0)
    img.set_sform(aff, code=1)
    nib.save(img, os.path.join(HERE, "int16_scaled.nii"))

    # float32, big-endian, qform only with a rotation about z.
    b = np.linspace(-1000, 2000, 5 * 4 * 3, dtype=np.float32).reshape(5, 4, 3)
    t = math.radians(30)
    rot = np.array([[math.cos(t) * 2, -math.sin(t) * 2, 0, 5.0],
                    [math.sin(t) * 2, math.cos(t) * 2, 0, -7.0],
                    [0, 0, 3.0, 1.5], [0, 0, 0, 1]])
    img = nib.Nifti1Image(b.astype(">f4"), rot)
    img.set_qform(rot, code=1)
    img.set_sform(None, code=0)
    nib.save(img, os.path.join(HERE, "float32_be_qform.nii"))

    # uint8, gzip.
    c = (np.arange(6 * 5 * 4) % 251).astype(np.uint8).reshape(6, 5, 4)
    aff3 = np.diag([1.5, 1.5, 1.5, 1.0])
    img = nib.Nifti1Image(c, aff3)
    img.set_sform(aff3, code=1)
    nib.save(img, os.path.join(HERE, "uint8.nii.gz"))

    for name in ["int16_scaled.nii", "float32_be_qform.nii", "uint8.nii.gz"]:
        im = nib.load(os.path.join(HERE, name))
        data = np.asarray(im.get_fdata(dtype=np.float64))
        expected[name] = {
            "shape": list(data.shape),
            # x fastest, matching sahnet's voxel order
            "values": [float(v) for v in data.flatten(order="F")],
            "affine": [[float(v) for v in row] for row in im.affine],
        }
    with open(os.path.join(HERE, "nifti_expected.json"), "w") as f:
        json.dump(expected, f, indent=1)


def predictions_fixture():
    # 43 test subjects: 30 alive, 13 dead. With threshold 0.5 the alive class
    # has tp 22, fn 8 and the dead class tp 10, fn 3.
    rng = np.random.default_rng(43)
    alive_lo = np.round(rng.uniform(0.02, 0.35, 22), 3)   # correct
    alive_hi = np.round(rng.uniform(0.52, 0.82, 8), 3)    # wrong
    dead_hi = np.round(rng.uniform(0.58, 0.95, 10), 3)    # correct
    dead_lo = np.array([0.12, 0.36, 0.44])               # wrong
    rows = [(s, 0) for s in alive_lo] + [(s, 0) for s in alive_hi]
    rows += [(s, 1) for s in dead_hi] + [(s, 1) for s in dead_lo]
    order = rng.permutation(len(rows))
    with open(os.path.join(HERE, "predictions_43.csv"), "w") as f:
        f.write("subject_id,score_dead,label\n")
        for k, i in enumerate(order):
            s, y = rows[i]
            f.write(f"test-{k + 1:03d},{s:.3f},{y}\n")
    scores = np.array([r[0] for r in rows])
    labels = np.array([r[1] for r in rows])
    pos, neg = scores[labels == 1], scores[labels == 0]
    auc = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg) / (len(pos) * len(neg))
    return auc


def cohort_fixture():
    # 219 patients. Deaths 65. Hypertension 39/57 vs 26/97, sex (1 = male)
    # 24/80 vs 41/74. Age means 61.2 (dead) and 56.5 (alive) with a pooled
    # sd giving Student t = 2.48.
    dead = [1] * 65 + [0] * 154
    sex = [1] * 24 + [0] * 41 + [1] * 80 + [0] * 74
    # interleave hypertension so it is not aligned with sex
    htn_dead = [1 if (i * 39) // 65 != ((i + 1) * 39) // 65 else 0 for i in range(65)]
    htn_alive = [1 if (i * 57) // 154 != ((i + 1) * 57) // 154 else 0 for i in range(154)]
    htn = htn_dead + htn_alive
    assert sum(htn_dead) == 39 and sum(htn_alive) == 57

    se = math.sqrt(1 / 65 + 1 / 154)
    sp = (61.2 - 56.5) / (2.48 * se)
    rng = np.random.default_rng(219)

    def ages(n, mean):
        z = rng.standard_normal(n)
        z = (z - z.mean()) / z.std(ddof=1)
        return mean + sp * z

    age = list(ages(65, 61.2)) + list(ages(154, 56.5))
    with open(os.path.join(HERE, "cohort_219.csv"), "w") as f:
        f.write("subject_id,dead,age,sex,hypertension\n")
        for i in range(219):
            f.write(f"pt-{i + 1:03d},{dead[i]},{age[i]:.6f},{sex[i]},{htn[i]}\n")


if __name__ == "__main__":
    nifti_fixtures()
    print("predictions AUC", predictions_fixture())
    cohort_fixture()
