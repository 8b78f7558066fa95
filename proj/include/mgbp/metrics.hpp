#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <utility>

#include "mgbp/tensor.hpp"

namespace mgbp {

/// Samples in [0, 1] are compared on the 0-255 scale.
inline constexpr double kPeak = 255.0;
inline constexpr double kSsimC1 = 6.5025;
inline constexpr double kSsimC2 = 58.5225;
inline constexpr std::size_t kSsimWindow = 8;

/// 10 log10(255^2 / MSE) over all channels; +infinity when MSE == 0.
double psnr(const Tensor& x, const Tensor& y);

enum class SsimMode { global, windowed };

/// Single-channel SSIM with population statistics. Windowed mode averages
/// over every w x w window (stride 1); images smaller than the window fall
/// back to global statistics.
double ssim(const Tensor& x, const Tensor& y, SsimMode mode = SsimMode::global, std::size_t window = kSsimWindow);

/// BT.601 luma of an RGB tensor; single-channel tensors pass through.
Tensor luminance(const Tensor& t);

/// Mean absolute difference over all samples.
double mean_abs_diff(const Tensor& a, const Tensor& b);

using LevelKey = std::pair<int, int>;  // (L, k)

/// Sum over L = 1..max_level, k = 1..L of mean |outputs(L, k) - targets(k)|.
double multiscale_l1(const std::map<LevelKey, Tensor>& outputs, const std::map<int, Tensor>& targets,
                     int max_level = 3);

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::optional<double> msl1;
};

/// psnr over all channels, ssim on the luminance, msl1 as the single (1, 1) term.
MetricReport compare_images(const Tensor& x, const Tensor& y, SsimMode mode = SsimMode::global);

/// Comment header, then "psnr_db=<value|inf>", "ssim=<value>", "msl1=<value>".
void write_report(const MetricReport& report, std::ostream& out, SsimMode mode = SsimMode::global);

}  // namespace mgbp
