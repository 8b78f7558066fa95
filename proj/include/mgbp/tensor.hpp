#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mgbp {

/// Raised when an operation's numeric contract cannot be met (uncertified
/// operators, size caps, non-finite samples).
class ContractViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dims {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

struct Index3 {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t ch = 0;

  bool operator==(const Index3&) const = default;
};

/// H x W x C array of doubles stored row-major in (row, column, channel) order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims, double fill = 0.0);
  Tensor(Dims dims, std::vector<double> data);

  const Dims& dims() const { return dims_; }
  std::size_t height() const { return dims_.height; }
  std::size_t width() const { return dims_.width; }
  std::size_t channels() const { return dims_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t offset(std::size_t r, std::size_t c, std::size_t ch) const {
    return (r * dims_.width + c) * dims_.channels + ch;
  }
  double operator()(std::size_t r, std::size_t c, std::size_t ch = 0) const {
    return data_[offset(r, c, ch)];
  }
  double& operator()(std::size_t r, std::size_t c, std::size_t ch = 0) {
    return data_[offset(r, c, ch)];
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool all_finite() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double scale);

  bool operator==(const Tensor&) const = default;

 private:
  Dims dims_{};
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);

std::vector<double> vectorize(const Tensor& x);
Tensor devectorize(std::span<const double> v, Dims dims);

/// All zeros except 1.0 at `at`.
Tensor delta(Dims dims, Index3 at);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor extract_channel(const Tensor& x, std::size_t ch);

double l1_norm(const Tensor& x);
double max_abs(const Tensor& x);
double max_abs_diff(const Tensor& a, const Tensor& b);

enum class BoundaryRule { replicate_edge, reflect, zero_pad };

BoundaryRule parse_boundary(std::string_view name);
std::string_view to_string(BoundaryRule rule);

/// Maps a possibly out-of-range coordinate onto [0, n). Returns -1 when the
/// rule is zero_pad and i falls outside.
std::ptrdiff_t map_boundary(std::ptrdiff_t i, std::size_t n, BoundaryRule rule);

/// 2D filter taps with the anchor tap aligned to the output pixel.
class Kernel {
 public:
  Kernel() = default;
  Kernel(std::size_t rows, std::size_t cols, std::vector<double> taps, std::ptrdiff_t anchor_row,
         std::ptrdiff_t anchor_col, bool normalized = false);

  static Kernel identity();
  /// Outer product of two 1D tap vectors.
  static Kernel separable(std::span<const double> vertical, std::span<const double> horizontal,
                          std::ptrdiff_t anchor_row, std::ptrdiff_t anchor_col, bool normalized = false);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::ptrdiff_t anchor_row() const { return anchor_row_; }
  std::ptrdiff_t anchor_col() const { return anchor_col_; }
  bool normalized() const { return normalized_; }
  double operator()(std::size_t r, std::size_t c) const { return taps_[r * cols_ + c]; }
  std::span<const double> taps() const { return taps_; }
  double sum() const;

  /// Sums of taps over each residue class of (tap - anchor) mod (sy, sx),
  /// ordered by (row residue, col residue).
  std::vector<double> polyphase_sums(std::size_t sy, std::size_t sx) const;

  bool operator==(const Kernel&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> taps_;
  std::ptrdiff_t anchor_row_ = 0;
  std::ptrdiff_t anchor_col_ = 0;
  bool normalized_ = false;
};

/// Per-channel 2D convolution:
///   out(r, c) = sum_{i,j} k(i, j) * x(r - i + anchor_row, c - j + anchor_col)
/// with out-of-range samples resolved by `rule`. Output has the dims of x.
Tensor convolve(const Tensor& x, const Kernel& k, BoundaryRule rule);

}  // namespace mgbp
