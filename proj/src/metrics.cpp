#include "mgbp/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mgbp {

namespace {

void check_same_dims(const Tensor& x, const Tensor& y, const char* what) {
  if (x.dims() != y.dims()) {
    throw std::invalid_argument(std::string(what) + ": dims " + to_string(x.dims()) + " vs " + to_string(y.dims()));
  }
}

struct Moments {
  double mx = 0, my = 0, vx = 0, vy = 0, cxy = 0;
};

Moments window_moments(const Tensor& x, const Tensor& y, std::size_t r0, std::size_t c0, std::size_t h,
                       std::size_t w) {
  Moments m;
  const double n = static_cast<double>(h * w);
  for (std::size_t r = r0; r < r0 + h; ++r)
    for (std::size_t c = c0; c < c0 + w; ++c) {
      m.mx += kPeak * x(r, c);
      m.my += kPeak * y(r, c);
    }
  m.mx /= n;
  m.my /= n;
  for (std::size_t r = r0; r < r0 + h; ++r)
    for (std::size_t c = c0; c < c0 + w; ++c) {
      const double dx = kPeak * x(r, c) - m.mx;
      const double dy = kPeak * y(r, c) - m.my;
      m.vx += dx * dx;
      m.vy += dy * dy;
      m.cxy += dx * dy;
    }
  m.vx /= n;
  m.vy /= n;
  m.cxy /= n;
  return m;
}

double ssim_formula(const Moments& m) {
  return ((2 * m.mx * m.my + kSsimC1) * (2 * m.cxy + kSsimC2)) /
         ((m.mx * m.mx + m.my * m.my + kSsimC1) * (m.vx + m.vy + kSsimC2));
}

}  // namespace

double psnr(const Tensor& x, const Tensor& y) {
  check_same_dims(x, y, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = kPeak * (x.data()[i] - y.data()[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak / mse);
}

double ssim(const Tensor& x, const Tensor& y, SsimMode mode, std::size_t window) {
  check_same_dims(x, y, "ssim");
  if (x.channels() != 1) {
    throw std::invalid_argument("ssim needs a single channel, got " + std::to_string(x.channels()) +
                                " (reduce with luminance first)");
  }
  if (mode == SsimMode::global || window == 0 || x.height() < window || x.width() < window) {
    return ssim_formula(window_moments(x, y, 0, 0, x.height(), x.width()));
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + window <= x.height(); ++r)
    for (std::size_t c = 0; c + window <= x.width(); ++c) {
      total += ssim_formula(window_moments(x, y, r, c, window, window));
      ++count;
    }
  return total / static_cast<double>(count);
}

Tensor luminance(const Tensor& t) {
  if (t.channels() == 1) return t;
  if (t.channels() != 3) {
    throw std::invalid_argument("luminance needs 1 or 3 channels, got " + std::to_string(t.channels()));
  }
  Tensor out({t.height(), t.width(), 1});
  for (std::size_t r = 0; r < t.height(); ++r)
    for (std::size_t c = 0; c < t.width(); ++c)
      out(r, c) = 0.299 * t(r, c, 0) + 0.587 * t(r, c, 1) + 0.114 * t(r, c, 2);
  return out;
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_dims(a, b, "mean_abs_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.size());
}

double multiscale_l1(const std::map<LevelKey, Tensor>& outputs, const std::map<int, Tensor>& targets,
                     int max_level) {
  double total = 0.0;
  for (int level = 1; level <= max_level; ++level) {
    for (int k = 1; k <= level; ++k) {
      const auto out = outputs.find({level, k});
      if (out == outputs.end()) {
        throw std::invalid_argument("multiscale_l1: missing output term (L=" + std::to_string(level) +
                                    ", k=" + std::to_string(k) + ")");
      }
      const auto target = targets.find(k);
      if (target == targets.end()) {
        throw std::invalid_argument("multiscale_l1: missing target for (L=" + std::to_string(level) +
                                    ", k=" + std::to_string(k) + ")");
      }
      total += mean_abs_diff(out->second, target->second);
    }
  }
  return total;
}

MetricReport compare_images(const Tensor& x, const Tensor& y, SsimMode mode) {
  MetricReport r;
  r.psnr_db = psnr(x, y);
  r.ssim = ssim(luminance(x), luminance(y), mode);
  r.msl1 = mean_abs_diff(x, y);
  return r;
}

void write_report(const MetricReport& report, std::ostream& out, SsimMode mode) {
  out << "# psnr: all channels jointly, 0-255 scale\n"
      << "# ssim: BT.601 luminance, " << (mode == SsimMode::global ? "global statistics" : "8x8 windows")
      << ", c1=6.5025 c2=58.5225\n"
      << std::setprecision(17);
  out << "psnr_db=";
  if (std::isinf(report.psnr_db)) out << "inf";
  else out << report.psnr_db;
  out << "\nssim=" << report.ssim << "\n";
  if (report.msl1) out << "msl1=" << *report.msl1 << "\n";
}

}  // namespace mgbp
