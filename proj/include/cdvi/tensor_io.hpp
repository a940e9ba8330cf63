#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cdvi/video.hpp"

namespace cdvi {

// On-disk layout, all integers little-endian:
//
//   offset  size      field
//   0       4         magic "FFT1"
//   4       4         u32 version (1)
//   8       1         u8 dtype tag (1 = f32)
//   9       1         u8 rank
//   10      4*rank    u32 dims
//   ...     4*prod    f32 payload, row-major
inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const noexcept;
};

std::vector<std::byte> encode_tensor(const Tensor& tensor);
/// Throws FormatError naming the byte offset of the first problem.
Tensor decode_tensor(std::span<const std::byte> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

Tensor to_tensor(const Video& video);
Tensor to_tensor(const PixelMask& mask);
/// Rank-4 tensor (N, C, H, W).
Video video_from_tensor(const Tensor& tensor);
/// Rank-3 tensor (N, H, W) with values in {0, 1}.
PixelMask mask_from_tensor(const Tensor& tensor);

void write_video(const std::filesystem::path& path, const Video& video);
Video read_video(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const PixelMask& mask);
PixelMask read_mask(const std::filesystem::path& path);

}  // namespace cdvi
