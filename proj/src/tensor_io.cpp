#include "cdvi/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <fmt/format.h>

#include "cdvi/error.hpp"

namespace cdvi {

namespace {

constexpr std::array<char, 4> kMagic = {'F', 'F', 'T', '1'};
constexpr std::size_t kFixedHeader = 10;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::span<const std::byte> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(bytes[offset + i])) << (8 * i);
  return v;
}

}  // namespace

std::size_t Tensor::element_count() const noexcept {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::byte> encode_tensor(const Tensor& tensor) {
  if (tensor.dims.size() > 255) throw FormatError("data", "tensor rank exceeds 255");
  if (tensor.values.size() != tensor.element_count())
    throw FormatError("data", "tensor payload does not match its dims");
  std::vector<std::byte> out;
  out.reserve(kFixedHeader + 4 * tensor.dims.size() + 4 * tensor.values.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_u32(out, kTensorFormatVersion);
  out.push_back(static_cast<std::byte>(kDtypeF32));
  out.push_back(static_cast<std::byte>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  for (float v : tensor.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
  if (bytes.size() < kFixedHeader)
    throw FormatError("data", fmt::format("truncated header at byte offset {} (need {} bytes)",
                                          bytes.size(), kFixedHeader));
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (static_cast<char>(bytes[i]) != kMagic[i])
      throw FormatError("data", fmt::format("bad magic at byte offset {}", i));
  }
  const auto version = get_u32(bytes, 4);
  if (version != kTensorFormatVersion)
    throw FormatError("data", fmt::format("unsupported version {} at byte offset 4", version));
  const auto dtype = std::to_integer<std::uint8_t>(bytes[8]);
  if (dtype != kDtypeF32)
    throw FormatError("data", fmt::format("unsupported dtype tag {} at byte offset 8", dtype));
  const auto rank = std::to_integer<std::uint8_t>(bytes[9]);
  const std::size_t dims_end = kFixedHeader + 4 * static_cast<std::size_t>(rank);
  if (bytes.size() < dims_end)
    throw FormatError("data", fmt::format("truncated dims at byte offset {} (need {} bytes)",
                                          bytes.size(), dims_end));
  Tensor tensor;
  tensor.dims.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) tensor.dims[i] = get_u32(bytes, kFixedHeader + 4 * i);
  const std::size_t count = tensor.element_count();
  const std::size_t expected = dims_end + 4 * count;
  if (bytes.size() < expected)
    throw FormatError("data", fmt::format("truncated payload at byte offset {} (expected {} bytes)",
                                          bytes.size(), expected));
  if (bytes.size() > expected)
    throw FormatError("data", fmt::format("trailing bytes after payload at byte offset {}", expected));
  tensor.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    tensor.values[i] = std::bit_cast<float>(get_u32(bytes, dims_end + 4 * i));
  return tensor;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  const auto bytes = encode_tensor(tensor);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("data", "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("data", "write failed for " + path.string());
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("data", "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  try {
    return decode_tensor(bytes);
  } catch (const FormatError& e) {
    throw FormatError("data", path.string() + ": " + e.what());
  }
}

Tensor to_tensor(const Video& video) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(video.frames()), static_cast<std::uint32_t>(video.channels()),
            static_cast<std::uint32_t>(video.height()), static_cast<std::uint32_t>(video.width())};
  t.values.assign(video.values().begin(), video.values().end());
  return t;
}

Tensor to_tensor(const PixelMask& mask) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(mask.frames()), static_cast<std::uint32_t>(mask.height()),
            static_cast<std::uint32_t>(mask.width())};
  t.values.reserve(mask.size());
  for (auto b : mask.bits()) t.values.push_back(b ? 1.0f : 0.0f);
  return t;
}

Video video_from_tensor(const Tensor& tensor) {
  if (tensor.dims.size() != 4)
    throw FormatError("data", fmt::format("video tensor must have rank 4, got {}", tensor.dims.size()));
  Video v(tensor.dims[0], tensor.dims[1], tensor.dims[2], tensor.dims[3]);
  std::copy(tensor.values.begin(), tensor.values.end(), v.values().begin());
  return v;
}

PixelMask mask_from_tensor(const Tensor& tensor) {
  if (tensor.dims.size() != 3)
    throw FormatError("data", fmt::format("mask tensor must have rank 3, got {}", tensor.dims.size()));
  PixelMask m(tensor.dims[0], tensor.dims[1], tensor.dims[2]);
  auto bits = m.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const float v = tensor.values[i];
    if (v != 0.0f && v != 1.0f)
      throw FormatError("data", fmt::format("mask value {} at element {} is not 0 or 1", v, i));
    bits[i] = v == 1.0f ? 1 : 0;
  }
  return m;
}

void write_video(const std::filesystem::path& path, const Video& video) {
  write_tensor(path, to_tensor(video));
}
Video read_video(const std::filesystem::path& path) { return video_from_tensor(read_tensor(path)); }
void write_mask(const std::filesystem::path& path, const PixelMask& mask) {
  write_tensor(path, to_tensor(mask));
}
PixelMask read_mask(const std::filesystem::path& path) { return mask_from_tensor(read_tensor(path)); }

}  // namespace cdvi
