#pragma once

#include <limits>

#include "cdvi/video.hpp"

namespace cdvi {

/// Peak-to-peak range of the [-1, 1] pixel convention.
inline constexpr double kPixelRange = 2.0;

/// Value reported for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(range^2 / MSE) over all pixels and channels. Returns
/// kPsnrIdentical when MSE is 0. Throws ParameterError on shape mismatch.
double psnr(const Video& a, const Video& b);

/// PSNR restricted to the pixels where `region` is 0 (the missing region).
/// Returns NaN when the region is empty.
double psnr(const Video& a, const Video& b, const PixelMask& region);

/// Mean structural similarity over all 8x8 windows (stride 1) of every
/// channel of every frame, with uniform weights, C1 = (0.01 L)^2,
/// C2 = (0.03 L)^2 and L = kPixelRange. Window sums use integral images.
/// Throws ParameterError on shape mismatch or frames smaller than 8x8.
double ssim(const Video& a, const Video& b);

inline constexpr int kSsimWindow = 8;

/// Mean |frame_k(p - flow_k(p)) - frame_{k+1}(p)| over all channels and
/// pixels with a finite flow whose (rounded) source lies in the frame.
/// Returns NaN when no pixel qualifies. Throws ParameterError unless the
/// flow has shape (N - 1, 2, H, W).
double warp_error(const Video& video, const FlowField& flow);

/// Copy-nearest-known-frame baseline. Each missing pixel takes its value
/// from the temporally closest frame where the same pixel is known (the
/// earlier frame wins ties). Pixels never known anywhere take the mean of
/// the known pixels of their frame and channel, or of the whole video when
/// the frame has none, or 0.
Video copy_nearest_known(const Video& video, const PixelMask& mask);

}  // namespace cdvi
