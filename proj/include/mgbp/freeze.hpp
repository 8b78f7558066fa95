#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgbp/convnet.hpp"
#include "mgbp/tensor.hpp"

namespace mgbp {

/// Elementwise sigma(z) / z with gain 1 where z == 0.
Tensor activation_gain(const Activation& activation, const Tensor& z);

/// Gains recorded at every activation layer; empty for linear layers.
struct GainRecord {
  std::vector<std::optional<Tensor>> gains;
};

/// A network with its nonlinearities replaced by the gains recorded on one
/// input. The result is the affine map u -> F vec(u) + R.
class FrozenSystem {
 public:
  FrozenSystem(ConvNet net, GainRecord gains, Dims input_dims);

  const ConvNet& net() const { return net_; }
  const GainRecord& gains() const { return gains_; }
  const Dims& input_dims() const { return input_dims_; }
  Dims output_dims() const { return residual_.dims(); }

  /// Forward pass with each activation replaced by multiplication by its gain.
  Tensor apply(const Tensor& u) const;
  const Tensor& residual() const { return residual_; }

 private:
  ConvNet net_;
  GainRecord gains_;
  Dims input_dims_;
  Tensor residual_;
};

FrozenSystem freeze(const ConvNet& net, const Tensor& x);

/// Frozen response to the zero input.
Tensor effective_residual(const FrozenSystem& sys);

/// Impulse response at an input pixel: apply(delta) - R, in output coordinates.
Tensor effective_filter(const FrozenSystem& sys, Index3 pixel);

/// Dense F and R built from layer matrices and recorded gains.
struct ExplicitFR {
  Eigen::MatrixXd filter;
  Eigen::VectorXd residual;
  Dims input_dims;
  Dims output_dims;
};

/// Default cap on the input and output vector lengths of explicit_fr.
inline constexpr std::size_t kExplicitFrCap = 4096;

ExplicitFR explicit_fr(const ConvNet& net, const Tensor& x, std::size_t cap = kExplicitFrCap);
/// Same, from the gains already recorded in `sys`.
ExplicitFR explicit_fr(const FrozenSystem& sys, std::size_t cap = kExplicitFrCap);

/// Weights of every input sample contributing to one output pixel (a row of F),
/// shaped like the input.
Tensor effective_filter_row(const ExplicitFR& fr, Index3 output_pixel);

/// max |forward(net, x) - frozen(x)|.
double freeze_equivalence(const ConvNet& net, const Tensor& x);

/// Centered 2D DFT magnitude (DC at (H/2, W/2)) of a single-channel map.
Tensor filter_spectrum(const Tensor& filter);

enum class AtlasNormalization { min_max, symmetric };

struct AtlasEntry {
  std::optional<Index3> pixel;  // empty for the residual
  std::filesystem::path image;
  double min = 0.0;             // value mapped to 0
  double max = 0.0;             // value mapped to 1
};

struct AtlasOptions {
  AtlasNormalization normalization = AtlasNormalization::min_max;
  bool spectrum = false;
  /// Compute filters on this many threads (0 = hardware concurrency).
  unsigned threads = 1;
  /// Treat pixels as output positions and write rows of F (weights of every
  /// input sample) instead of impulse responses. Needs F within the size cap.
  bool row_view = false;
};

/// Writes one PNG per pixel filter, residual.png and the atlas.txt sidecar
/// ("row col ch min max" per filter, "residual min max" last) into `dir`.
std::vector<AtlasEntry> filter_atlas(const FrozenSystem& sys, std::span<const Index3> pixels,
                                     const std::filesystem::path& dir, const AtlasOptions& options = {});

/// Affine map of a filter to [0, 1]; `min`/`max` receive the mapped range.
Tensor normalize_for_display(const Tensor& t, AtlasNormalization mode, double& min, double& max);

}  // namespace mgbp
