#include "mgbp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mgbp {

std::string to_string(const Dims& d) {
  std::ostringstream os;
  os << d.height << "x" << d.width << "x" << d.channels;
  return os.str();
}

Tensor::Tensor(Dims dims, double fill) : dims_(dims), data_(dims.size(), fill) {
  if (dims.height == 0 || dims.width == 0 || dims.channels == 0) {
    throw std::invalid_argument("tensor dims must be positive, got " + to_string(dims));
  }
}

Tensor::Tensor(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
  if (dims.height == 0 || dims.width == 0 || dims.channels == 0) {
    throw std::invalid_argument("tensor dims must be positive, got " + to_string(dims));
  }
  if (data_.size() != dims.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match dims " + to_string(dims));
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

void require_same_dims(const Tensor& a, const Tensor& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw std::invalid_argument(std::string(what) + ": dims mismatch " + to_string(a.dims()) +
                                " vs " + to_string(b.dims()));
  }
}

}  // namespace

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_dims(*this, other, "tensor +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_dims(*this, other, "tensor -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }

std::vector<double> vectorize(const Tensor& x) { return {x.data().begin(), x.data().end()}; }

Tensor devectorize(std::span<const double> v, Dims dims) {
  if (v.size() != dims.size()) {
    throw std::invalid_argument("devectorize: vector length " + std::to_string(v.size()) +
                                " does not match dims " + to_string(dims));
  }
  return Tensor(dims, std::vector<double>(v.begin(), v.end()));
}

Tensor delta(Dims dims, Index3 at) {
  if (at.row >= dims.height || at.col >= dims.width || at.ch >= dims.channels) {
    std::ostringstream os;
    os << "delta position (" << at.row << "," << at.col << "," << at.ch << ") outside "
       << to_string(dims);
    throw std::out_of_range(os.str());
  }
  Tensor t(dims);
  t(at.row, at.col, at.ch) = 1.0;
  return t;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw std::invalid_argument("concat_channels: spatial dims mismatch " + to_string(a.dims()) +
                                " vs " + to_string(b.dims()));
  }
  Tensor out({a.height(), a.width(), a.channels() + b.channels()});
  for (std::size_t r = 0; r < a.height(); ++r) {
    for (std::size_t c = 0; c < a.width(); ++c) {
      for (std::size_t k = 0; k < a.channels(); ++k) out(r, c, k) = a(r, c, k);
      for (std::size_t k = 0; k < b.channels(); ++k) out(r, c, a.channels() + k) = b(r, c, k);
    }
  }
  return out;
}

Tensor extract_channel(const Tensor& x, std::size_t ch) {
  if (ch >= x.channels()) {
    throw std::out_of_range("extract_channel: channel " + std::to_string(ch) + " outside " +
                            to_string(x.dims()));
  }
  Tensor out({x.height(), x.width(), 1});
  for (std::size_t r = 0; r < x.height(); ++r)
    for (std::size_t c = 0; c < x.width(); ++c) out(r, c) = x(r, c, ch);
  return out;
}

double l1_norm(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += std::abs(v);
  return s;
}

double max_abs(const Tensor& x) {
  double m = 0.0;
  for (double v : x.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_dims(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

BoundaryRule parse_boundary(std::string_view name) {
  if (name == "replicate-edge" || name == "replicate") return BoundaryRule::replicate_edge;
  if (name == "reflect") return BoundaryRule::reflect;
  if (name == "zero-pad" || name == "zero") return BoundaryRule::zero_pad;
  throw std::invalid_argument("unknown boundary rule '" + std::string(name) +
                              "' (expected replicate-edge, reflect or zero-pad)");
}

std::string_view to_string(BoundaryRule rule) {
  switch (rule) {
    case BoundaryRule::replicate_edge: return "replicate-edge";
    case BoundaryRule::reflect: return "reflect";
    case BoundaryRule::zero_pad: return "zero-pad";
  }
  return "?";
}

std::ptrdiff_t map_boundary(std::ptrdiff_t i, std::size_t n, BoundaryRule rule) {
  const auto len = static_cast<std::ptrdiff_t>(n);
  if (i >= 0 && i < len) return i;
  switch (rule) {
    case BoundaryRule::zero_pad:
      return -1;
    case BoundaryRule::replicate_edge:
      return i < 0 ? 0 : len - 1;
    case BoundaryRule::reflect: {
      // mirror about the edge samples: d c b | a b c d | c b a
      if (len == 1) return 0;
      const std::ptrdiff_t period = 2 * (len - 1);
      std::ptrdiff_t m = i % period;
      if (m < 0) m += period;
      return m < len ? m : period - m;
    }
  }
  return -1;
}

Kernel::Kernel(std::size_t rows, std::size_t cols, std::vector<double> taps,
               std::ptrdiff_t anchor_row, std::ptrdiff_t anchor_col, bool normalized)
    : rows_(rows),
      cols_(cols),
      taps_(std::move(taps)),
      anchor_row_(anchor_row),
      anchor_col_(anchor_col),
      normalized_(normalized) {
  if (rows_ == 0 || cols_ == 0 || taps_.size() != rows_ * cols_) {
    throw std::invalid_argument("kernel taps must be a non-empty rows x cols array");
  }
  if (!std::all_of(taps_.begin(), taps_.end(), [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("kernel taps must be finite");
  }
}

Kernel Kernel::identity() { return Kernel(1, 1, {1.0}, 0, 0, true); }

Kernel Kernel::separable(std::span<const double> vertical, std::span<const double> horizontal,
                         std::ptrdiff_t anchor_row, std::ptrdiff_t anchor_col, bool normalized) {
  std::vector<double> taps;
  taps.reserve(vertical.size() * horizontal.size());
  for (double v : vertical)
    for (double h : horizontal) taps.push_back(v * h);
  return Kernel(vertical.size(), horizontal.size(), std::move(taps), anchor_row, anchor_col,
                normalized);
}

double Kernel::sum() const { return std::accumulate(taps_.begin(), taps_.end(), 0.0); }

std::vector<double> Kernel::polyphase_sums(std::size_t sy, std::size_t sx) const {
  std::vector<double> sums(sy * sx, 0.0);
  const auto py = static_cast<std::ptrdiff_t>(sy);
  const auto px = static_cast<std::ptrdiff_t>(sx);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      std::ptrdiff_t ry = (static_cast<std::ptrdiff_t>(r) - anchor_row_) % py;
      std::ptrdiff_t rx = (static_cast<std::ptrdiff_t>(c) - anchor_col_) % px;
      if (ry < 0) ry += py;
      if (rx < 0) rx += px;
      sums[static_cast<std::size_t>(ry * px + rx)] += (*this)(r, c);
    }
  }
  return sums;
}

Tensor convolve(const Tensor& x, const Kernel& k, BoundaryRule rule) {
  if (rule == BoundaryRule::reflect && (k.rows() > 2 * x.height() || k.cols() > 2 * x.width())) {
    throw std::invalid_argument("kernel exceeds reflectable extent");
  }
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  const std::size_t nc = x.channels();
  Tensor out(x.dims());
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t i = 0; i < k.rows(); ++i) {
        const std::ptrdiff_t sr = map_boundary(
            static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(i) + k.anchor_row(), h, rule);
        if (sr < 0) continue;
        for (std::size_t j = 0; j < k.cols(); ++j) {
          const std::ptrdiff_t sc = map_boundary(
              static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(j) + k.anchor_col(), w, rule);
          if (sc < 0) continue;
          const double tap = k(i, j);
          for (std::size_t ch = 0; ch < nc; ++ch) {
            out(r, c, ch) += tap * x(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc), ch);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace mgbp
