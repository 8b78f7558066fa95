#pragma once

#include <array>
#include <string_view>

#include "mgbp/sparse_operator.hpp"
#include "mgbp/tensor.hpp"

namespace mgbp {

/// Blur g, interpolation filter p and integer factor s of the resampling
/// model X = (Y * g) downsampled by s, and Y = (X upsampled by s) * p.
struct ResampleSpec {
  int scale = 2;
  Kernel blur = Kernel::identity();
  Kernel interp = Kernel::identity();
  BoundaryRule boundary = BoundaryRule::replicate_edge;
  /// Resample along the width only (1D view on height-1 signals).
  bool horizontal_only = false;

  std::size_t scale_y() const { return horizontal_only ? 1 : static_cast<std::size_t>(scale); }
  std::size_t scale_x() const { return static_cast<std::size_t>(scale); }

  /// Throws std::invalid_argument on scale < 1 or a normalized kernel whose
  /// taps (blur) or polyphase components (interp) do not sum to 1.
  void validate() const;
};

/// Gaussian sigma used by default_spec, relative to the scale factor.
inline constexpr double kDefaultBlurSigmaPerScale = 0.25;
inline constexpr double kDefaultBicubicA = -0.5;

/// Gaussian blur (sigma = 0.25 s), bicubic interpolation (a = -0.5), replicate-edge.
ResampleSpec default_spec(int scale, bool horizontal_only = false);

/// Cubic convolution weight W(t) with parameter a.
double cubic_weight(double t, double a = kDefaultBicubicA);

/// Weights of the four neighbours (i-1, i, i+1, i+2) when interpolating at i + phase.
std::array<double, 4> cubic_phase_taps(double phase, double a = kDefaultBicubicA);

/// Separable Gaussian, truncated at 4 sigma, taps summing to 1, centred anchor.
Kernel gaussian_kernel(double sigma, bool one_dimensional = false);
/// Cubic convolution upscaling filter sampled at offsets k/s; polyphase-normalized.
Kernel bicubic_kernel(int scale, double a = kDefaultBicubicA, bool one_dimensional = false);
/// Triangle (linear interpolation) upscaling filter.
Kernel bilinear_kernel(int scale, bool one_dimensional = false);
/// s x s block average aligned so the sample at phase 0 averages its own block.
Kernel box_kernel(int scale, bool one_dimensional = false);
/// s x s ones anchored at (0, 0): sample duplication after zero insertion.
Kernel nearest_kernel(int scale, bool one_dimensional = false);
/// Single zero tap.
Kernel zero_kernel();

/// Parses "gaussian", "gaussian:<sigma>", "box" or "identity".
Kernel parse_blur_kernel(std::string_view name, int scale, bool one_dimensional = false);
/// Parses "bicubic", "bicubic:<a>", "bilinear", "nearest" or "zero".
Kernel parse_interp_kernel(std::string_view name, int scale, bool one_dimensional = false);

/// Blur then keep samples at phase (0, 0) with stride s. Height and width
/// must be divisible by the per-axis scale.
Tensor downscale(const Tensor& y, const ResampleSpec& spec);
/// Zero insertion at stride s, then convolution with the interpolation
/// filter. The boundary rule extends the coarse grid before insertion.
Tensor upscale(const Tensor& x, const ResampleSpec& spec);
/// L-fold composition of downscale; dims must be divisible by s^L.
Tensor multi_level_downscale(const Tensor& y, const ResampleSpec& spec, int levels);

/// Extends height and width up to the next multiple using the boundary rule.
Tensor pad_to_multiple(const Tensor& y, std::size_t multiple_y, std::size_t multiple_x, BoundaryRule rule);

enum class Direction { down, up };

/// Matrix whose action on vectorize(t) equals downscale / upscale of t.
SparseOperator operator_matrix(const ResampleSpec& spec, Direction direction, Dims in_dims,
                               std::size_t cap = kDefaultOperatorCap);

/// ||I - D U||_1, the maximum absolute column sum.
double contraction_norm(const SparseOperator& down, const SparseOperator& up);

/// Contraction norm of `spec` on a high-resolution grid of `fine_dims`.
double certify(const ResampleSpec& spec, Dims fine_dims, std::size_t cap = kDefaultOperatorCap);

}  // namespace mgbp
