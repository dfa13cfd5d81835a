#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sahnet/volio/volume.hpp"

namespace sahnet::volio {

enum class NiftiDatatype : std::int16_t {
  Uint8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
};

/// The subset of the 348-byte NIfTI-1 header this toolkit reads and writes.
struct NiftiHeader {
  std::int32_t sizeof_hdr = 348;
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 352.0f;
  float scl_slope = 0.0f;
  float scl_inter = 0.0f;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quatern_b = 0.0f, quatern_c = 0.0f, quatern_d = 0.0f;
  float qoffset_x = 0.0f, qoffset_y = 0.0f, qoffset_z = 0.0f;
  std::array<float, 4> srow_x{}, srow_y{}, srow_z{};
  std::array<char, 80> descrip{};
  std::array<char, 4> magic{};
  bool big_endian = false;
};

inline constexpr std::size_t kNiftiHeaderSize = 348;
inline constexpr std::size_t kNiftiSingleFileOffset = 352;

struct ReadOptions {
  /// Accept NaN/Inf voxels instead of raising NonFinite.
  bool allow_non_finite = false;
};

/// Parses and validates the header. Byte order is detected from sizeof_hdr.
NiftiHeader parse_header(std::span<const std::uint8_t> bytes);

/// Decodes a single-file NIfTI-1 image. gzip-compressed input is inflated
/// transparently.
Volume read_nifti(std::span<const std::uint8_t> bytes,
                  const ReadOptions& options = {});

/// Encodes a volume as little-endian single-file NIfTI-1, float32 payload,
/// sform_code 1.
std::vector<std::uint8_t> write_nifti(const Volume& volume);

/// Affine derived from the header: sform, else qform, else diagonal pixdim.
Mat4 header_affine(const NiftiHeader& header);

bool is_gzip(std::span<const std::uint8_t> bytes) noexcept;
std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

Volume read_nifti_file(const std::filesystem::path& path,
                       const ReadOptions& options = {});
/// Writes `path`; compresses when the name ends in ".gz".
void write_nifti_file(const std::filesystem::path& path, const Volume& volume);

}  // namespace sahnet::volio
