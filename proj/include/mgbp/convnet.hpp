#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgbp/sparse_operator.hpp"
#include "mgbp/tensor.hpp"

namespace mgbp {

enum class LayerKind { conv, strided_conv, transposed_conv, activation };
enum class ActivationKind { identity, relu, leaky_relu, prelu };

std::string_view to_string(LayerKind kind);
std::string_view to_string(ActivationKind kind);
LayerKind parse_layer_kind(std::string_view name);
ActivationKind parse_activation_kind(std::string_view name);

/// Pointwise nonlinearity with sigma(0) = 0.
struct Activation {
  ActivationKind kind = ActivationKind::identity;
  double alpha = 0.0;           // leaky-relu slope
  std::vector<double> alphas;   // prelu slope per channel

  double apply(double z, std::size_t ch) const;
  /// sigma(z) / z, with 1 at z == 0.
  double gain(double z, std::size_t ch) const;

  bool operator==(const Activation&) const = default;
};

/// One layer of a sequential network. Linear kinds hold weights in
/// (out-channel, in-channel, row, col) order and one bias per out-channel.
///
/// Geometry (cross-correlation, pad_top = (kernel_h - 1) / 2, likewise for width):
///   conv / strided-conv:  out(i) = b + sum w(a) * in(stride * i + a - pad), out size ceil(in / stride)
///   transposed-conv:      out(stride * i + a - pad) += w(a) * in(i),        out size in * stride
/// so a transposed layer is the exact adjoint of the strided layer with the same taps.
struct LayerSpec {
  LayerKind kind = LayerKind::activation;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  BoundaryRule boundary = BoundaryRule::zero_pad;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation;

  static LayerSpec conv(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                        std::vector<double> weights, std::vector<double> bias, std::size_t stride = 1);
  static LayerSpec transposed(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                              std::size_t stride, std::vector<double> weights, std::vector<double> bias);
  static LayerSpec act(Activation a);

  bool is_linear() const { return kind != LayerKind::activation; }
  double weight(std::size_t o, std::size_t i, std::size_t r, std::size_t c) const {
    return weights[((o * in_channels + i) * kernel_h + r) * kernel_w + c];
  }
  std::ptrdiff_t pad_h() const { return static_cast<std::ptrdiff_t>((kernel_h - 1) / 2); }
  std::ptrdiff_t pad_w() const { return static_cast<std::ptrdiff_t>((kernel_w - 1) / 2); }

  /// Output dims for an input of `in` dims; throws on channel mismatch.
  Dims output_dims(Dims in) const;
  void validate() const;

  bool operator==(const LayerSpec&) const = default;
};

/// Ordered sequence of linear and activation layers.
class ConvNet {
 public:
  ConvNet() = default;
  ConvNet(std::size_t input_channels, std::vector<LayerSpec> layers);

  /// Zero-layer network: the identity map on `channels` channels.
  static ConvNet identity(std::size_t channels) { return ConvNet(channels, {}); }

  std::size_t input_channels() const { return input_channels_; }
  std::size_t output_channels() const;
  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }

  Dims output_dims(Dims in) const;

  bool operator==(const ConvNet&) const = default;

 private:
  std::size_t input_channels_ = 0;
  std::vector<LayerSpec> layers_;
};

/// Input and output of every layer of one forward pass. For an activation
/// layer the input is the pre-activation z_n and the output x_n.
struct ForwardRecord {
  std::vector<Tensor> inputs;
  std::vector<Tensor> outputs;
};

Tensor apply_layer(const LayerSpec& layer, const Tensor& x, std::size_t layer_index = 0);
Tensor forward(const ConvNet& net, const Tensor& x, ForwardRecord* record = nullptr);

struct LayerMatrix {
  SparseOperator weights;
  std::vector<double> bias;  // broadcast to output length
};

/// Matrix form of a linear layer on inputs of `in_dims`:
/// vectorize(apply_layer(x)) == weights * vectorize(x) + bias.
LayerMatrix layer_matrix(const LayerSpec& layer, Dims in_dims, std::size_t cap = kDefaultOperatorCap);

/// Manifest is JSON; weights go to a sibling blob (manifest stem + ".bin") of
/// little-endian float64, per layer weights then biases.
ConvNet load_network(const std::filesystem::path& manifest);
void save_network(const ConvNet& net, const std::filesystem::path& manifest);

struct RandomNetOptions {
  std::size_t input_channels = 1;
  std::size_t output_channels = 1;
  std::size_t hidden_channels = 4;
  std::size_t linear_layers = 3;
  bool mix_strided = true;    // insert a strided/transposed pair when possible
  bool leaky = false;         // leaky-relu instead of relu
  double weight_scale = 0.5;
  double bias_scale = 0.1;
};

/// Deterministic toy network for demos and tests.
ConvNet random_network(std::uint64_t seed, const RandomNetOptions& options = {});

/// Copy of `net` with every bias set to zero.
ConvNet zero_biases(ConvNet net);

}  // namespace mgbp
