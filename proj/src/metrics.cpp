#include "cdvi/metrics.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "cdvi/error.hpp"

namespace cdvi {

namespace {

void require_same_shape(const Video& a, const Video& b) {
  if (!a.same_shape(b)) throw ParameterError("metrics", "videos differ in shape");
}

double psnr_from_mse(double mse) {
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(kPixelRange * kPixelRange / mse);
}

// (h + 1) x (w + 1) table of prefix sums.
std::vector<double> integral(const double* plane, std::size_t h, std::size_t w) {
  std::vector<double> s((h + 1) * (w + 1), 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    double row = 0.0;
    for (std::size_t x = 0; x < w; ++x) {
      row += plane[y * w + x];
      s[(y + 1) * (w + 1) + x + 1] = s[y * (w + 1) + x + 1] + row;
    }
  }
  return s;
}

double box(const std::vector<double>& s, std::size_t w, std::size_t y, std::size_t x, std::size_t k) {
  const std::size_t stride = w + 1;
  return s[(y + k) * stride + x + k] - s[y * stride + x + k] - s[(y + k) * stride + x] + s[y * stride + x];
}

}  // namespace

double psnr(const Video& a, const Video& b) {
  require_same_shape(a, b);
  if (a.empty()) throw ParameterError("metrics", "empty video");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    sum += d * d;
  }
  return psnr_from_mse(sum / static_cast<double>(a.size()));
}

double psnr(const Video& a, const Video& b, const PixelMask& region) {
  require_same_shape(a, b);
  if (!region.matches(a)) throw ParameterError("metrics", "region mask does not match the video");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < a.frames(); ++f)
    for (std::size_t c = 0; c < a.channels(); ++c)
      for (std::size_t y = 0; y < a.height(); ++y)
        for (std::size_t x = 0; x < a.width(); ++x) {
          if (region(f, y, x)) continue;
          const double d = a(f, c, y, x) - b(f, c, y, x);
          sum += d * d;
          ++count;
        }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return psnr_from_mse(sum / static_cast<double>(count));
}

double ssim(const Video& a, const Video& b) {
  require_same_shape(a, b);
  const std::size_t h = a.height(), w = a.width(), k = kSsimWindow;
  if (h < k || w < k)
    throw ParameterError("metrics", fmt::format("SSIM needs frames of at least {0}x{0}, got {1}x{2}", k, w, h));
  if (a.frames() == 0 || a.channels() == 0) throw ParameterError("metrics", "empty video");
  const double c1 = (0.01 * kPixelRange) * (0.01 * kPixelRange);
  const double c2 = (0.03 * kPixelRange) * (0.03 * kPixelRange);
  const double n = static_cast<double>(k * k);
  const std::size_t plane = h * w;
  std::vector<double> aa(plane), bb(plane), ab(plane);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t f = 0; f < a.frames(); ++f) {
    for (std::size_t c = 0; c < a.channels(); ++c) {
      const double* pa = &a.values()[(f * a.channels() + c) * plane];
      const double* pb = &b.values()[(f * b.channels() + c) * plane];
      for (std::size_t i = 0; i < plane; ++i) {
        aa[i] = pa[i] * pa[i];
        bb[i] = pb[i] * pb[i];
        ab[i] = pa[i] * pb[i];
      }
      const auto sa = integral(pa, h, w), sb = integral(pb, h, w);
      const auto saa = integral(aa.data(), h, w), sbb = integral(bb.data(), h, w), sab = integral(ab.data(), h, w);
      for (std::size_t y = 0; y + k <= h; ++y) {
        for (std::size_t x = 0; x + k <= w; ++x) {
          const double mu_a = box(sa, w, y, x, k) / n, mu_b = box(sb, w, y, x, k) / n;
          const double var_a = box(saa, w, y, x, k) / n - mu_a * mu_a;
          const double var_b = box(sbb, w, y, x, k) / n - mu_b * mu_b;
          const double cov = box(sab, w, y, x, k) / n - mu_a * mu_b;
          total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                   ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
          ++windows;
        }
      }
    }
  }
  return total / static_cast<double>(windows);
}

double warp_error(const Video& video, const FlowField& flow) {
  if (video.frames() < 2 || flow.frames() != video.frames() - 1 || flow.channels() != 2 ||
      flow.height() != video.height() || flow.width() != video.width())
    throw ParameterError("metrics", "flow must have shape (N-1, 2, H, W) for an N-frame video");
  const auto h = static_cast<long>(video.height()), w = static_cast<long>(video.width());
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k + 1 < video.frames(); ++k) {
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        const double dx = flow(k, 0, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        const double dy = flow(k, 1, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
        if (!std::isfinite(dx) || !std::isfinite(dy)) continue;
        const long sx = x - std::lround(dx), sy = y - std::lround(dy);
        if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
        for (std::size_t c = 0; c < video.channels(); ++c) {
          sum += std::abs(video(k, c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx)) -
                          video(k + 1, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
          ++count;
        }
      }
    }
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(count);
}

}  // namespace cdvi

namespace cdvi {

Video copy_nearest_known(const Video& video, const PixelMask& mask) {
  if (!mask.matches(video)) throw ParameterError("metrics", "mask shape does not match the video");
  const std::size_t n = video.frames(), ch = video.channels(), h = video.height(), w = video.width();
  std::vector<double> global_mean(ch, 0.0);
  std::vector<std::size_t> global_count(ch, 0);
  for (std::size_t f = 0; f < n; ++f)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          if (mask(f, y, x)) {
            global_mean[c] += video(f, c, y, x);
            ++global_count[c];
          }
  for (std::size_t c = 0; c < ch; ++c) global_mean[c] = global_count[c] ? global_mean[c] / global_count[c] : 0.0;

  Video out = video;
  for (std::size_t f = 0; f < n; ++f) {
    std::vector<double> frame_mean(ch, 0.0);
    std::size_t known = 0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        if (mask(f, y, x)) {
          ++known;
          for (std::size_t c = 0; c < ch; ++c) frame_mean[c] += video(f, c, y, x);
        }
    for (std::size_t c = 0; c < ch; ++c) frame_mean[c] = known ? frame_mean[c] / known : global_mean[c];
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (mask(f, y, x)) continue;
        long source = -1;
        for (std::size_t d = 1; d < n && source < 0; ++d) {
          if (d <= f && mask(f - d, y, x)) source = static_cast<long>(f - d);
          else if (f + d < n && mask(f + d, y, x)) source = static_cast<long>(f + d);
        }
        for (std::size_t c = 0; c < ch; ++c)
          out(f, c, y, x) = source >= 0 ? video(static_cast<std::size_t>(source), c, y, x) : frame_mean[c];
      }
    }
  }
  return out;
}

}  // namespace cdvi
