#pragma once
// Randomized NIfTI roundtrip and corruption cases, shared by the unit suite
// and the acceptance binary.

#include <algorithm>
#include <cstring>
#include <string>

#include "sahnet/error.hpp"
#include "sahnet/random.hpp"
#include "sahnet/volio/nifti.hpp"

namespace sahnet::testing {

inline volio::Volume random_volume(Rng& rng) {
  const volio::Shape3 s{1 + uniform_index(rng, 9), 1 + uniform_index(rng, 9), 1 + uniform_index(rng, 6)};
  volio::Mat4 a = volio::Mat4::identity();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) a(r, c) = float(uniform(rng, -2, 2));
  for (int r = 0; r < 3; ++r) a(r, r) = float(uniform(rng, 0.5, 3.0));
  std::vector<float> data(s.size());
  for (auto& v : data) v = float(uniform(rng, -1024, 3071));
  return volio::Volume(s, a, std::move(data), volio::IntensityUnit::HU);
}

inline bool roundtrip_identical(const volio::Volume& v) {
  const auto bytes = volio::write_nifti(v);
  for (const auto& b : {bytes, volio::gzip_compress(bytes)}) {
    const auto back = volio::read_nifti(b);
    if (!(back.shape() == v.shape()) || !(back.affine() == v.affine())) return false;
    if (!std::equal(v.data().begin(), v.data().end(), back.data().begin(), back.data().end())) return false;
  }
  return true;
}

/// Code thrown by read_nifti, or "none" when it accepted the bytes.
inline std::string read_outcome(const std::vector<std::uint8_t>& b) {
  try {
    volio::read_nifti(b);
  } catch (const Error& e) {
    return std::string(to_string(e.code()));
  }
  return "none";
}

struct FuzzTally {
  std::size_t cases = 0, wrong = 0;
};

/// Flipped magic bytes must raise BadMagic or UnsupportedFormat; every
/// shortened payload or header must raise Truncated.
inline FuzzTally fuzz_nifti(std::uint64_t seed, std::size_t magic_cases) {
  Rng rng(seed);
  FuzzTally t;
  const auto good = volio::write_nifti(random_volume(rng));
  for (std::size_t i = 0; i < magic_cases; ++i) {
    auto b = good;
    b[344 + uniform_index(rng, 4)] ^= std::uint8_t(1 + uniform_index(rng, 255));
    if (std::memcmp(b.data() + 344, "n+1\0", 4) == 0) continue;
    const auto o = read_outcome(b);
    ++t.cases;
    t.wrong += o != "BadMagic" && o != "UnsupportedFormat";
  }
  for (std::size_t keep = 0; keep < good.size(); keep += 1 + uniform_index(rng, 13)) {
    ++t.cases;
    t.wrong += read_outcome({good.begin(), good.begin() + static_cast<std::ptrdiff_t>(keep)}) != "Truncated";
  }
  return t;
}

}  // namespace sahnet::testing
