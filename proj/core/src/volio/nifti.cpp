#include "sahnet/volio/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

#include "sahnet/error.hpp"

namespace sahnet::volio {
namespace {

constexpr std::string_view kUnitTag = "sahnet unit=";

// Explicit-endian field access so parsing does not depend on the host order.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, bool big_endian)
      : bytes_(bytes), big_(big_endian) {}

  template <typename T>
  T get(std::size_t offset) const {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + offset, sizeof(T));
    if (big_ != (std::endian::native == std::endian::big))
      std::reverse(raw.begin(), raw.end());
    T out;
    std::memcpy(&out, raw.data(), sizeof(T));
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  bool big_;
};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, std::size_t offset, T value) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(raw.begin(), raw.end());
  std::memcpy(out.data() + offset, raw.data(), sizeof(T));
}

std::int16_t expected_bitpix(std::int16_t datatype) {
  switch (static_cast<NiftiDatatype>(datatype)) {
    case NiftiDatatype::Uint8: return 8;
    case NiftiDatatype::Int16: return 16;
    case NiftiDatatype::Int32: return 32;
    case NiftiDatatype::Float32: return 32;
    case NiftiDatatype::Float64: return 64;
  }
  return 0;
}

IntensityUnit unit_from_descrip(const std::array<char, 80>& descrip) {
  const std::string_view text(descrip.data(),
                              strnlen(descrip.data(), descrip.size()));
  IntensityUnit unit = IntensityUnit::HU;
  if (text.starts_with(kUnitTag)) parse_unit(text.substr(kUnitTag.size()), unit);
  return unit;
}

Mat4 quaternion_affine(const NiftiHeader& h) {
  const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
  double a = 1.0 - (b * b + c * c + d * d);
  a = a < 1e-7 ? 0.0 : std::sqrt(a);
  const double dx = h.pixdim[1] > 0 ? h.pixdim[1] : 1.0;
  const double dy = h.pixdim[2] > 0 ? h.pixdim[2] : 1.0;
  double dz = h.pixdim[3] > 0 ? h.pixdim[3] : 1.0;
  if (h.pixdim[0] < 0) dz = -dz;  // qfac

  Mat4 r = Mat4::identity();
  r(0, 0) = (a * a + b * b - c * c - d * d) * dx;
  r(0, 1) = 2.0 * (b * c - a * d) * dy;
  r(0, 2) = 2.0 * (b * d + a * c) * dz;
  r(1, 0) = 2.0 * (b * c + a * d) * dx;
  r(1, 1) = (a * a + c * c - b * b - d * d) * dy;
  r(1, 2) = 2.0 * (c * d - a * b) * dz;
  r(2, 0) = 2.0 * (b * d - a * c) * dx;
  r(2, 1) = 2.0 * (c * d + a * b) * dy;
  r(2, 2) = (a * a + d * d - c * c - b * b) * dz;
  r(0, 3) = h.qoffset_x;
  r(1, 3) = h.qoffset_y;
  r(2, 3) = h.qoffset_z;
  return r;
}

}  // namespace

NiftiHeader parse_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) fail(Errc::Truncated, "input shorter than sizeof_hdr");

  NiftiHeader h;
  const ByteReader le(bytes, false);
  const ByteReader be(bytes, true);
  const auto size_le = le.get<std::int32_t>(0);
  const auto size_be = be.get<std::int32_t>(0);
  if (size_le == 540 || size_be == 540)
    fail(Errc::UnsupportedFormat, "NIfTI-2 images are not supported");
  if (size_le == 348) {
    h.big_endian = false;
  } else if (size_be == 348) {
    h.big_endian = true;
  } else {
    fail(Errc::BadMagic, "sizeof_hdr is not 348; not a NIfTI-1 header");
  }
  if (bytes.size() < kNiftiHeaderSize)
    fail(Errc::Truncated, "input shorter than the 348-byte header");

  std::memcpy(h.magic.data(), bytes.data() + 344, 4);
  const std::string_view magic(h.magic.data(), 4);
  if (magic == std::string_view("ni1\0", 4))
    fail(Errc::UnsupportedFormat, "header/image pairs (ni1) are not supported");
  if (magic != std::string_view("n+1\0", 4))
    fail(Errc::BadMagic, "magic is not \"n+1\"");

  const ByteReader r(bytes, h.big_endian);
  for (std::size_t i = 0; i < 8; ++i) {
    h.dim[i] = r.get<std::int16_t>(40 + 2 * i);
    h.pixdim[i] = r.get<float>(76 + 4 * i);
  }
  h.datatype = r.get<std::int16_t>(70);
  h.bitpix = r.get<std::int16_t>(72);
  h.vox_offset = r.get<float>(108);
  h.scl_slope = r.get<float>(112);
  h.scl_inter = r.get<float>(116);
  std::memcpy(h.descrip.data(), bytes.data() + 148, 80);
  h.qform_code = r.get<std::int16_t>(252);
  h.sform_code = r.get<std::int16_t>(254);
  h.quatern_b = r.get<float>(256);
  h.quatern_c = r.get<float>(260);
  h.quatern_d = r.get<float>(264);
  h.qoffset_x = r.get<float>(268);
  h.qoffset_y = r.get<float>(272);
  h.qoffset_z = r.get<float>(276);
  for (std::size_t i = 0; i < 4; ++i) {
    h.srow_x[i] = r.get<float>(280 + 4 * i);
    h.srow_y[i] = r.get<float>(296 + 4 * i);
    h.srow_z[i] = r.get<float>(312 + 4 * i);
  }

  if (h.dim[0] != 2 && h.dim[0] != 3) {
    // Trailing singleton dimensions (e.g. a 4D header with one frame) are
    // accepted as 3D.
    bool singleton_tail = h.dim[0] > 3 && h.dim[0] <= 7;
    for (int i = 4; singleton_tail && i <= h.dim[0]; ++i)
      singleton_tail = h.dim[i] == 1;
    if (!singleton_tail)
      fail(Errc::BadHeader, "dim[0] must be 2 or 3, got " + std::to_string(h.dim[0]));
  }
  const int rank = std::min<int>(h.dim[0], 3);
  for (int i = 1; i <= rank; ++i)
    if (h.dim[i] < 1) fail(Errc::BadHeader, "dim entries must be >= 1");

  if (expected_bitpix(h.datatype) == 0)
    fail(Errc::UnsupportedDatatype,
         "datatype code " + std::to_string(h.datatype) + " is not supported");
  if (h.bitpix != expected_bitpix(h.datatype))
    fail(Errc::BadHeader, "bitpix does not match datatype");
  if (!(h.vox_offset >= static_cast<float>(kNiftiSingleFileOffset)))
    fail(Errc::BadHeader, "vox_offset must be >= 352 for single-file images");
  return h;
}

Mat4 header_affine(const NiftiHeader& h) {
  if (h.sform_code > 0) {
    Mat4 a = Mat4::identity();
    for (std::size_t c = 0; c < 4; ++c) {
      a(0, c) = h.srow_x[c];
      a(1, c) = h.srow_y[c];
      a(2, c) = h.srow_z[c];
    }
    return a;
  }
  if (h.qform_code > 0) return quaternion_affine(h);
  return Mat4::diagonal(h.pixdim[1] > 0 ? h.pixdim[1] : 1.0,
                        h.pixdim[2] > 0 ? h.pixdim[2] : 1.0,
                        h.pixdim[3] > 0 ? h.pixdim[3] : 1.0);
}

Volume read_nifti(std::span<const std::uint8_t> bytes,
                  const ReadOptions& options) {
  if (is_gzip(bytes)) {
    const auto inflated = gzip_decompress(bytes);
    return read_nifti(inflated, options);
  }
  const NiftiHeader h = parse_header(bytes);

  Shape3 shape{static_cast<std::size_t>(h.dim[1]),
               static_cast<std::size_t>(h.dim[2]),
               h.dim[0] >= 3 ? static_cast<std::size_t>(h.dim[3]) : 1};
  const std::size_t count = shape.size();
  const std::size_t elem = static_cast<std::size_t>(h.bitpix) / 8;
  if (!(static_cast<double>(h.vox_offset) <= static_cast<double>(bytes.size())))
    fail(Errc::Truncated, "vox_offset lies beyond the end of the input");
  const auto offset = static_cast<std::size_t>(h.vox_offset);
  if (bytes.size() < offset || (bytes.size() - offset) / elem < count)
    fail(Errc::Truncated, "payload shorter than the header promises (" +
                              std::to_string(count * elem) + " bytes needed)");

  const ByteReader r(bytes, h.big_endian);
  const bool scaled = h.scl_slope != 0.0f && std::isfinite(h.scl_slope) &&
                      std::isfinite(h.scl_inter);
  const bool identity_scale = !scaled || (h.scl_slope == 1.0f && h.scl_inter == 0.0f);
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = offset + i * elem;
    double raw = 0.0;
    float direct = 0.0f;
    bool is_direct = false;
    switch (static_cast<NiftiDatatype>(h.datatype)) {
      case NiftiDatatype::Uint8: raw = bytes[at]; break;
      case NiftiDatatype::Int16: raw = r.get<std::int16_t>(at); break;
      case NiftiDatatype::Int32: raw = r.get<std::int32_t>(at); break;
      case NiftiDatatype::Float32:
        direct = r.get<float>(at);
        is_direct = true;
        break;
      case NiftiDatatype::Float64: raw = r.get<double>(at); break;
    }
    if (is_direct && identity_scale) {
      data[i] = direct;
    } else {
      if (is_direct) raw = direct;
      data[i] = static_cast<float>(identity_scale ? raw : raw * h.scl_slope + h.scl_inter);
    }
    if (!options.allow_non_finite && !std::isfinite(data[i]))
      fail(Errc::NonFinite, "voxel " + std::to_string(i) + " is not finite");
  }

  std::vector<std::uint8_t> extensions;
  if (bytes[348] != 0 && offset > kNiftiSingleFileOffset)
    extensions.assign(bytes.begin() + kNiftiSingleFileOffset, bytes.begin() + offset);

  Mat4 affine = header_affine(h);
  try {
    return Volume(shape, affine, std::move(data), unit_from_descrip(h.descrip),
                  std::move(extensions));
  } catch (const Error& e) {
    fail(Errc::BadHeader, std::string("header affine invalid: ") + e.what());
  }
}

std::vector<std::uint8_t> write_nifti(const Volume& v) {
  validate(v.shape(), v.affine(), v.data().size());
  const auto ext = v.extensions();
  const std::size_t offset = kNiftiSingleFileOffset + ext.size();
  std::vector<std::uint8_t> out(offset + v.data().size() * sizeof(float), 0);

  const Shape3 s = v.shape();
  for (auto n : {s.nx, s.ny, s.nz})
    if (n > 32767) fail(Errc::InvariantViolation, "dimension exceeds NIfTI-1 int16 range");

  put_le<std::int32_t>(out, 0, 348);
  out[38] = 'r';  // regular
  const std::int16_t rank = s.nz == 1 ? 2 : 3;
  const std::array<std::int16_t, 8> dim{rank,
                                        static_cast<std::int16_t>(s.nx),
                                        static_cast<std::int16_t>(s.ny),
                                        static_cast<std::int16_t>(s.nz),
                                        1, 1, 1, 1};
  const Vec3 spacing = column_norms(v.affine());
  const std::array<float, 8> pixdim{1.0f,
                                    static_cast<float>(spacing[0]),
                                    static_cast<float>(spacing[1]),
                                    static_cast<float>(spacing[2]),
                                    0.0f, 0.0f, 0.0f, 0.0f};
  for (std::size_t i = 0; i < 8; ++i) {
    put_le<std::int16_t>(out, 40 + 2 * i, dim[i]);
    put_le<float>(out, 76 + 4 * i, pixdim[i]);
  }
  put_le<std::int16_t>(out, 70, static_cast<std::int16_t>(NiftiDatatype::Float32));
  put_le<std::int16_t>(out, 72, 32);
  put_le<float>(out, 108, static_cast<float>(offset));
  put_le<float>(out, 112, 0.0f);
  put_le<float>(out, 116, 0.0f);
  out[123] = 2 | 8;  // mm, seconds

  const std::string descrip = std::string(kUnitTag) + std::string(to_string(v.unit()));
  std::memcpy(out.data() + 148, descrip.data(), std::min<std::size_t>(descrip.size(), 79));

  put_le<std::int16_t>(out, 252, 0);
  put_le<std::int16_t>(out, 254, 1);
  const Mat4& a = v.affine();
  for (std::size_t c = 0; c < 4; ++c) {
    put_le<float>(out, 280 + 4 * c, static_cast<float>(a(0, c)));
    put_le<float>(out, 296 + 4 * c, static_cast<float>(a(1, c)));
    put_le<float>(out, 312 + 4 * c, static_cast<float>(a(2, c)));
  }
  std::memcpy(out.data() + 344, "n+1\0", 4);

  if (!ext.empty()) {
    std::copy(ext.begin(), ext.end(), out.begin() + kNiftiSingleFileOffset);
    out[348] = 1;
  }
  const auto data = v.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    put_le<float>(out, offset + i * sizeof(float), data[i]);
  return out;
}

bool is_gzip(std::span<const std::uint8_t> bytes) noexcept {
  return bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b;
}

std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    fail(Errc::IoFailure, "deflateInit2 failed");
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) fail(Errc::IoFailure, "gzip compression failed");
  out.resize(produced);
  return out;
}

std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) fail(Errc::IoFailure, "inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      fail(Errc::Truncated, "gzip stream is corrupt or truncated");
    }
    out.insert(out.end(), chunk.begin(), chunk.begin() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      fail(Errc::Truncated, "gzip stream ended early");
    }
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::IoFailure, "write failed for " + path.string());
}

Volume read_nifti_file(const std::filesystem::path& path, const ReadOptions& options) {
  return read_nifti(read_file(path), options);
}

void write_nifti_file(const std::filesystem::path& path, const Volume& volume) {
  auto bytes = write_nifti(volume);
  if (path.extension() == ".gz") bytes = gzip_compress(bytes);
  write_file(path, bytes);
}

}  // namespace sahnet::volio
