#include "cdvi/video.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdvi/error.hpp"

namespace cdvi {

Video::Video(std::size_t frames, std::size_t channels, std::size_t height, std::size_t width,
             double fill)
    : frames_(frames),
      channels_(channels),
      height_(height),
      width_(width),
      values_(frames * channels * height * width, fill) {}

std::span<double> Video::frame(std::size_t f) {
  if (f >= frames_) throw IndexError("video", "frame " + std::to_string(f) + " out of range");
  return std::span<double>(values_).subspan(f * frame_size(), frame_size());
}

std::span<const double> Video::frame(std::size_t f) const {
  if (f >= frames_) throw IndexError("video", "frame " + std::to_string(f) + " out of range");
  return std::span<const double>(values_).subspan(f * frame_size(), frame_size());
}

Video Video::select(std::span<const int> indices) const {
  Video out(indices.size(), channels_, height_, width_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0) throw IndexError("video", "negative frame index");
    out.set_frame(i, frame(static_cast<std::size_t>(indices[i])));
  }
  return out;
}

void Video::set_frame(std::size_t f, std::span<const double> values) {
  auto dst = frame(f);
  if (values.size() != dst.size()) throw IndexError("video", "frame size mismatch");
  std::copy(values.begin(), values.end(), dst.begin());
}

bool Video::same_shape(const Video& other) const noexcept {
  return frames_ == other.frames_ && channels_ == other.channels_ && height_ == other.height_ &&
         width_ == other.width_;
}

bool Video::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

PixelMask::PixelMask(std::size_t frames, std::size_t height, std::size_t width, std::uint8_t fill)
    : frames_(frames), height_(height), width_(width), bits_(frames * height * width, fill) {}

std::span<std::uint8_t> PixelMask::frame(std::size_t f) {
  if (f >= frames_) throw IndexError("masks", "frame " + std::to_string(f) + " out of range");
  return std::span<std::uint8_t>(bits_).subspan(f * plane_size(), plane_size());
}

std::span<const std::uint8_t> PixelMask::frame(std::size_t f) const {
  if (f >= frames_) throw IndexError("masks", "frame " + std::to_string(f) + " out of range");
  return std::span<const std::uint8_t>(bits_).subspan(f * plane_size(), plane_size());
}

PixelMask PixelMask::select(std::span<const int> indices) const {
  PixelMask out(indices.size(), height_, width_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0) throw IndexError("masks", "negative frame index");
    auto src = frame(static_cast<std::size_t>(indices[i]));
    std::copy(src.begin(), src.end(), out.frame(i).begin());
  }
  return out;
}

void PixelMask::set_frame_known(std::size_t f) {
  auto dst = frame(f);
  std::fill(dst.begin(), dst.end(), std::uint8_t{1});
}

bool PixelMask::all_known() const noexcept {
  return std::all_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
}

bool PixelMask::frame_complete(std::size_t f) const {
  auto bits = frame(f);
  return std::all_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; });
}

std::size_t PixelMask::missing_count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{0}));
}

double PixelMask::missing_fraction(std::size_t f) const {
  auto bits = frame(f);
  const auto missing = std::count(bits.begin(), bits.end(), std::uint8_t{0});
  return static_cast<double>(missing) / static_cast<double>(bits.size());
}

bool PixelMask::matches(const Video& video) const noexcept {
  return frames_ == video.frames() && height_ == video.height() && width_ == video.width();
}

FrameIndexSet::FrameIndexSet(std::vector<int> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (!indices_.empty() && indices_.front() < 0)
    throw IndexError("schemes", "negative frame index " + std::to_string(indices_.front()));
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
    throw IndexError("schemes", "duplicate frame index in set");
}

FrameIndexSet FrameIndexSet::range(int first, int last_exclusive) {
  std::vector<int> v;
  for (int i = first; i < last_exclusive; ++i) v.push_back(i);
  return FrameIndexSet(std::move(v));
}

bool FrameIndexSet::contains(int index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

bool FrameIndexSet::disjoint(const FrameIndexSet& other) const {
  auto a = indices_.begin();
  auto b = other.indices_.begin();
  while (a != indices_.end() && b != other.indices_.end()) {
    if (*a == *b) return false;
    if (*a < *b)
      ++a;
    else
      ++b;
  }
  return true;
}

std::vector<int> concat(const FrameIndexSet& latents, const FrameIndexSet& observed) {
  std::vector<int> out(latents.begin(), latents.end());
  out.insert(out.end(), observed.begin(), observed.end());
  return out;
}

}  // namespace cdvi
