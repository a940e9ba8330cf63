#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace cdvi {

/// Real-valued video tensor of shape (frames, channels, height, width),
/// stored frame-major and row-major inside each channel plane.
class Video {
 public:
  Video() = default;
  Video(std::size_t frames, std::size_t channels, std::size_t height, std::size_t width,
        double fill = 0.0);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }
  std::size_t frame_size() const noexcept { return channels_ * height_ * width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(std::size_t f, std::size_t c, std::size_t y, std::size_t x) {
    return values_[((f * channels_ + c) * height_ + y) * width_ + x];
  }
  double operator()(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const {
    return values_[((f * channels_ + c) * height_ + y) * width_ + x];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> frame(std::size_t f);
  std::span<const double> frame(std::size_t f) const;

  /// Frames at `indices`, in the given order.
  Video select(std::span<const int> indices) const;
  void set_frame(std::size_t f, std::span<const double> values);

  bool same_shape(const Video& other) const noexcept;
  bool all_finite() const noexcept;

  friend bool operator==(const Video&, const Video&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// Optical flow between consecutive frames: shape (frames-1, 2, H, W).
/// Channel 0 is the x displacement and channel 1 the y displacement of the
/// pixel in frame k+1 relative to its source in frame k, so that
/// frame_{k+1}(p) = frame_k(p - flow_k(p)). Pixels without a source
/// (occluded or uncovered) hold NaN in both channels.
using FlowField = Video;

/// Binary pixel mask of shape (frames, height, width), broadcast across
/// channels. 1 marks a known pixel, 0 a missing one.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(std::size_t frames, std::size_t height, std::size_t width, std::uint8_t fill = 1);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  std::uint8_t& operator()(std::size_t f, std::size_t y, std::size_t x) {
    return bits_[(f * height_ + y) * width_ + x];
  }
  std::uint8_t operator()(std::size_t f, std::size_t y, std::size_t x) const {
    return bits_[(f * height_ + y) * width_ + x];
  }

  std::span<std::uint8_t> bits() noexcept { return bits_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> frame(std::size_t f);
  std::span<const std::uint8_t> frame(std::size_t f) const;

  PixelMask select(std::span<const int> indices) const;
  void set_frame_known(std::size_t f);

  bool all_known() const noexcept;
  bool frame_complete(std::size_t f) const;
  std::size_t missing_count() const noexcept;
  double missing_fraction(std::size_t f) const;
  bool matches(const Video& video) const noexcept;

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Sorted set of distinct, non-negative frame positions.
class FrameIndexSet {
 public:
  FrameIndexSet() = default;
  /// Sorts the input; throws IndexError on negatives or duplicates.
  FrameIndexSet(std::vector<int> indices);
  FrameIndexSet(std::initializer_list<int> indices)
      : FrameIndexSet(std::vector<int>(indices)) {}

  static FrameIndexSet range(int first, int last_exclusive);

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  int operator[](std::size_t i) const { return indices_[i]; }
  auto begin() const noexcept { return indices_.begin(); }
  auto end() const noexcept { return indices_.end(); }
  int front() const { return indices_.front(); }
  int back() const { return indices_.back(); }
  const std::vector<int>& values() const noexcept { return indices_; }

  bool contains(int index) const;
  bool disjoint(const FrameIndexSet& other) const;
  /// True when every index is below n.
  bool within(int n) const noexcept { return indices_.empty() || indices_.back() < n; }

  friend bool operator==(const FrameIndexSet&, const FrameIndexSet&) = default;

 private:
  std::vector<int> indices_;
};

/// X followed by Y: the frame order used for every denoiser call.
std::vector<int> concat(const FrameIndexSet& latents, const FrameIndexSet& observed);

}  // namespace cdvi
