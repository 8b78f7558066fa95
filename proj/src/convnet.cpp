#include "mgbp/convnet.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mgbp/image_io.hpp"

namespace mgbp {

namespace {

std::string layer_name(std::size_t index) { return "layer " + std::to_string(index); }

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::strided_conv: return "strided-conv";
    case LayerKind::transposed_conv: return "transposed-conv";
    case LayerKind::activation: return "activation";
  }
  return "?";
}

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::identity: return "identity";
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky-relu";
    case ActivationKind::prelu: return "prelu";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "conv") return LayerKind::conv;
  if (name == "strided-conv") return LayerKind::strided_conv;
  if (name == "transposed-conv") return LayerKind::transposed_conv;
  if (name == "activation") return LayerKind::activation;
  throw std::invalid_argument("unknown layer kind '" + std::string(name) + "'");
}

ActivationKind parse_activation_kind(std::string_view name) {
  if (name == "identity") return ActivationKind::identity;
  if (name == "relu") return ActivationKind::relu;
  if (name == "leaky-relu") return ActivationKind::leaky_relu;
  if (name == "prelu") return ActivationKind::prelu;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

double Activation::apply(double z, std::size_t ch) const {
  switch (kind) {
    case ActivationKind::identity: return z;
    case ActivationKind::relu: return z > 0.0 ? z : 0.0;
    case ActivationKind::leaky_relu: return z < 0.0 ? alpha * z : z;
    case ActivationKind::prelu: return z < 0.0 ? alphas.at(ch) * z : z;
  }
  return z;
}

double Activation::gain(double z, std::size_t ch) const {
  switch (kind) {
    case ActivationKind::identity: return 1.0;
    case ActivationKind::relu: return z < 0.0 ? 0.0 : 1.0;
    case ActivationKind::leaky_relu: return z < 0.0 ? alpha : 1.0;
    case ActivationKind::prelu: return z < 0.0 ? alphas.at(ch) : 1.0;
  }
  return 1.0;
}

LayerSpec LayerSpec::conv(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                          std::vector<double> weights, std::vector<double> bias, std::size_t stride) {
  LayerSpec l;
  l.kind = stride == 1 ? LayerKind::conv : LayerKind::strided_conv;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel_h = kh;
  l.kernel_w = kw;
  l.stride = stride;
  l.weights = std::move(weights);
  l.bias = std::move(bias);
  l.validate();
  return l;
}

LayerSpec LayerSpec::transposed(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
                                std::size_t stride, std::vector<double> weights, std::vector<double> bias) {
  LayerSpec l;
  l.kind = LayerKind::transposed_conv;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel_h = kh;
  l.kernel_w = kw;
  l.stride = stride;
  l.weights = std::move(weights);
  l.bias = std::move(bias);
  l.validate();
  return l;
}

LayerSpec LayerSpec::act(Activation a) {
  LayerSpec l;
  l.kind = LayerKind::activation;
  l.activation = std::move(a);
  l.validate();
  return l;
}

void LayerSpec::validate() const {
  if (kind == LayerKind::activation) {
    if (activation.kind == ActivationKind::leaky_relu && !std::isfinite(activation.alpha)) {
      throw std::invalid_argument("leaky-relu alpha must be finite");
    }
    if (activation.kind == ActivationKind::prelu) {
      if (activation.alphas.empty()) throw std::invalid_argument("prelu needs one alpha per channel");
      for (double a : activation.alphas)
        if (!std::isfinite(a)) throw std::invalid_argument("prelu alphas must be finite");
    }
    return;
  }
  if (in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0) {
    throw std::invalid_argument(std::string(to_string(kind)) + " layer needs positive channels and kernel dims");
  }
  if (stride == 0) throw std::invalid_argument("stride must be >= 1");
  if (kind == LayerKind::conv && stride != 1) throw std::invalid_argument("conv layer must have stride 1");
  if (kind != LayerKind::conv && stride < 2) {
    throw std::invalid_argument(std::string(to_string(kind)) + " layer needs stride >= 2");
  }
  if (kind == LayerKind::transposed_conv && boundary != BoundaryRule::zero_pad) {
    throw std::invalid_argument("transposed-conv supports only the zero-pad boundary");
  }
  if (weights.size() != out_channels * in_channels * kernel_h * kernel_w) {
    throw std::invalid_argument("weight count " + std::to_string(weights.size()) + " != " +
                                std::to_string(out_channels * in_channels * kernel_h * kernel_w));
  }
  if (bias.size() != out_channels) {
    throw std::invalid_argument("bias count " + std::to_string(bias.size()) + " != out_channels " +
                                std::to_string(out_channels));
  }
  for (double w : weights)
    if (!std::isfinite(w)) throw std::invalid_argument("weights must be finite");
  for (double b : bias)
    if (!std::isfinite(b)) throw std::invalid_argument("biases must be finite");
}

Dims LayerSpec::output_dims(Dims in) const {
  switch (kind) {
    case LayerKind::activation:
      if (activation.kind == ActivationKind::prelu && activation.alphas.size() != in.channels) {
        throw std::invalid_argument("prelu has " + std::to_string(activation.alphas.size()) +
                                    " alphas for " + std::to_string(in.channels) + " channels");
      }
      return in;
    case LayerKind::conv:
    case LayerKind::strided_conv:
      if (in.channels != in_channels) break;
      return {(in.height + stride - 1) / stride, (in.width + stride - 1) / stride, out_channels};
    case LayerKind::transposed_conv:
      if (in.channels != in_channels) break;
      return {in.height * stride, in.width * stride, out_channels};
  }
  throw std::invalid_argument("channel mismatch: layer expects " + std::to_string(in_channels) +
                              " input channels, got " + std::to_string(in.channels));
}

ConvNet::ConvNet(std::size_t input_channels, std::vector<LayerSpec> layers)
    : input_channels_(input_channels), layers_(std::move(layers)) {
  if (input_channels_ == 0) throw std::invalid_argument("network input channels must be positive");
  std::size_t ch = input_channels_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    try {
      l.validate();
      ch = l.output_dims({1, 1, ch}).channels;
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(layer_name(i) + ": " + e.what());
    }
  }
}

std::size_t ConvNet::output_channels() const {
  std::size_t ch = input_channels_;
  for (const LayerSpec& l : layers_)
    if (l.is_linear()) ch = l.out_channels;
  return ch;
}

Dims ConvNet::output_dims(Dims in) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      in = layers_[i].output_dims(in);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(layer_name(i) + ": " + e.what());
    }
  }
  return in;
}

Tensor apply_layer(const LayerSpec& l, const Tensor& x, std::size_t layer_index) {
  Dims od;
  try {
    od = l.output_dims(x.dims());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(layer_name(layer_index) + ": " + e.what());
  }

  if (l.kind == LayerKind::activation) {
    Tensor out(od);
    for (std::size_t r = 0; r < od.height; ++r)
      for (std::size_t c = 0; c < od.width; ++c)
        for (std::size_t ch = 0; ch < od.channels; ++ch) out(r, c, ch) = l.activation.apply(x(r, c, ch), ch);
    return out;
  }

  Tensor out(od);
  const auto s = static_cast<std::ptrdiff_t>(l.stride);
  const std::ptrdiff_t ph = l.pad_h();
  const std::ptrdiff_t pw = l.pad_w();

  if (l.kind == LayerKind::transposed_conv) {
    for (std::size_t y = 0; y < od.height; ++y) {
      for (std::size_t xo = 0; xo < od.width; ++xo) {
        for (std::size_t o = 0; o < l.out_channels; ++o) {
          double acc = l.bias[o];
          for (std::size_t ci = 0; ci < l.in_channels; ++ci) {
            for (std::size_t a = 0; a < l.kernel_h; ++a) {
              const std::ptrdiff_t ty = static_cast<std::ptrdiff_t>(y) + ph - static_cast<std::ptrdiff_t>(a);
              if (ty < 0 || ty % s != 0 || ty / s >= static_cast<std::ptrdiff_t>(x.height())) continue;
              for (std::size_t b = 0; b < l.kernel_w; ++b) {
                const std::ptrdiff_t tx = static_cast<std::ptrdiff_t>(xo) + pw - static_cast<std::ptrdiff_t>(b);
                if (tx < 0 || tx % s != 0 || tx / s >= static_cast<std::ptrdiff_t>(x.width())) continue;
                acc += l.weight(o, ci, a, b) *
                       x(static_cast<std::size_t>(ty / s), static_cast<std::size_t>(tx / s), ci);
              }
            }
          }
          out(y, xo, o) = acc;
        }
      }
    }
    return out;
  }

  for (std::size_t i = 0; i < od.height; ++i) {
    for (std::size_t j = 0; j < od.width; ++j) {
      for (std::size_t o = 0; o < l.out_channels; ++o) {
        double acc = l.bias[o];
        for (std::size_t ci = 0; ci < l.in_channels; ++ci) {
          for (std::size_t a = 0; a < l.kernel_h; ++a) {
            const std::ptrdiff_t r = map_boundary(static_cast<std::ptrdiff_t>(i) * s + static_cast<std::ptrdiff_t>(a) - ph,
                                                  x.height(), l.boundary);
            if (r < 0) continue;
            for (std::size_t b = 0; b < l.kernel_w; ++b) {
              const std::ptrdiff_t c = map_boundary(static_cast<std::ptrdiff_t>(j) * s + static_cast<std::ptrdiff_t>(b) - pw,
                                                    x.width(), l.boundary);
              if (c < 0) continue;
              acc += l.weight(o, ci, a, b) * x(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ci);
            }
          }
        }
        out(i, j, o) = acc;
      }
    }
  }
  return out;
}

Tensor forward(const ConvNet& net, const Tensor& x, ForwardRecord* record) {
  if (x.channels() != net.input_channels()) {
    throw std::invalid_argument("layer 0: channel mismatch: network expects " + std::to_string(net.input_channels()) +
                                " input channels, got " + std::to_string(x.channels()));
  }
  if (record) {
    record->inputs.clear();
    record->outputs.clear();
  }
  Tensor cur = x;
  for (std::size_t i = 0; i < net.size(); ++i) {
    Tensor next = apply_layer(net.layer(i), cur, i);
    if (record) {
      record->inputs.push_back(std::move(cur));
      record->outputs.push_back(next);
    }
    cur = std::move(next);
  }
  return cur;
}

LayerMatrix layer_matrix(const LayerSpec& l, Dims in, std::size_t cap) {
  if (!l.is_linear()) throw std::invalid_argument("no matrix for nonlinear layer");
  const Dims od = l.output_dims(in);
  if (in.size() != 0 && od.size() > cap / in.size()) {
    throw ContractViolation("layer matrix of " + std::to_string(od.size()) + "x" + std::to_string(in.size()) +
                            " exceeds cap " + std::to_string(cap) + "; requires cap >= " +
                            std::to_string(od.size() * in.size()));
  }
  const auto s = static_cast<std::ptrdiff_t>(l.stride);
  const std::ptrdiff_t ph = l.pad_h();
  const std::ptrdiff_t pw = l.pad_w();
  auto in_index = [&](std::size_t r, std::size_t c, std::size_t ch) { return (r * in.width + c) * in.channels + ch; };
  auto out_index = [&](std::size_t r, std::size_t c, std::size_t ch) { return (r * od.width + c) * od.channels + ch; };

  std::vector<Triplet> entries;
  if (l.kind == LayerKind::transposed_conv) {
    // scatter each input sample through the taps
    for (std::size_t i = 0; i < in.height; ++i)
      for (std::size_t j = 0; j < in.width; ++j)
        for (std::size_t ci = 0; ci < l.in_channels; ++ci)
          for (std::size_t a = 0; a < l.kernel_h; ++a) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i) * s + static_cast<std::ptrdiff_t>(a) - ph;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(od.height)) continue;
            for (std::size_t b = 0; b < l.kernel_w; ++b) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j) * s + static_cast<std::ptrdiff_t>(b) - pw;
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(od.width)) continue;
              for (std::size_t o = 0; o < l.out_channels; ++o) {
                entries.push_back({out_index(static_cast<std::size_t>(y), static_cast<std::size_t>(x), o),
                                   in_index(i, j, ci), l.weight(o, ci, a, b)});
              }
            }
          }
  } else {
    for (std::size_t i = 0; i < od.height; ++i)
      for (std::size_t j = 0; j < od.width; ++j)
        for (std::size_t o = 0; o < l.out_channels; ++o)
          for (std::size_t ci = 0; ci < l.in_channels; ++ci)
            for (std::size_t a = 0; a < l.kernel_h; ++a) {
              const std::ptrdiff_t r =
                  map_boundary(static_cast<std::ptrdiff_t>(i) * s + static_cast<std::ptrdiff_t>(a) - ph, in.height, l.boundary);
              if (r < 0) continue;
              for (std::size_t b = 0; b < l.kernel_w; ++b) {
                const std::ptrdiff_t c =
                    map_boundary(static_cast<std::ptrdiff_t>(j) * s + static_cast<std::ptrdiff_t>(b) - pw, in.width, l.boundary);
                if (c < 0) continue;
                entries.push_back({out_index(i, j, o),
                                   in_index(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ci),
                                   l.weight(o, ci, a, b)});
              }
            }
  }

  LayerMatrix lm{SparseOperator(od.size(), in.size(), entries), std::vector<double>(od.size())};
  for (std::size_t p = 0; p < od.height * od.width; ++p)
    for (std::size_t o = 0; o < od.channels; ++o) lm.bias[p * od.channels + o] = l.bias[o];
  return lm;
}

// ---- manifest --------------------------------------------------------------

namespace {

using nlohmann::json;

std::filesystem::path blob_path_for(const std::filesystem::path& manifest) {
  std::filesystem::path p = manifest;
  p.replace_extension(".bin");
  return p;
}

void append_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double read_f64(const std::string& blob, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[offset + i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

template <class T>
T require_field(const json& j, const char* key, std::size_t index) {
  if (!j.contains(key)) throw std::runtime_error("manifest " + layer_name(index) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::runtime_error("manifest " + layer_name(index) + ": bad type for field '" + key + "'");
  }
}

}  // namespace

void save_network(const ConvNet& net, const std::filesystem::path& manifest) {
  const std::filesystem::path blob_path = blob_path_for(manifest);
  std::string blob;
  json layers = json::array();
  for (const LayerSpec& l : net.layers()) {
    json jl;
    jl["kind"] = std::string(to_string(l.kind));
    if (l.is_linear()) {
      jl["in_channels"] = l.in_channels;
      jl["out_channels"] = l.out_channels;
      jl["kernel_h"] = l.kernel_h;
      jl["kernel_w"] = l.kernel_w;
      jl["stride"] = l.stride;
      jl["boundary"] = std::string(to_string(l.boundary));
      jl["weight_offset"] = blob.size();
      for (double w : l.weights) append_f64(blob, w);
      jl["bias_offset"] = blob.size();
      for (double b : l.bias) append_f64(blob, b);
    } else {
      jl["activation"] = std::string(to_string(l.activation.kind));
      if (l.activation.kind == ActivationKind::leaky_relu) jl["alpha"] = l.activation.alpha;
      if (l.activation.kind == ActivationKind::prelu) jl["alphas"] = l.activation.alphas;
    }
    layers.push_back(std::move(jl));
  }
  json doc;
  doc["format"] = "mgbp-net-1";
  doc["input_channels"] = net.input_channels();
  doc["weights_file"] = blob_path.filename().string();
  doc["weights_bytes"] = blob.size();
  doc["layers"] = std::move(layers);
  write_file_atomic(blob_path, blob);
  write_file_atomic(manifest, doc.dump(2) + "\n");
}

ConvNet load_network(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open manifest '" + manifest.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("manifest '" + manifest.string() + "' is not valid JSON: " + e.what());
  }
  if (!doc.contains("input_channels") || !doc.contains("layers")) {
    throw std::runtime_error("manifest '" + manifest.string() + "' needs 'input_channels' and 'layers'");
  }
  const std::filesystem::path blob_path =
      doc.contains("weights_file") ? manifest.parent_path() / doc["weights_file"].get<std::string>()
                                   : blob_path_for(manifest);
  std::string blob;
  {
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open weights blob '" + blob_path.string() + "'");
    std::ostringstream ss;
    ss << bin.rdbuf();
    blob = ss.str();
  }

  std::vector<LayerSpec> layers;
  std::size_t expected_bytes = 0;
  const json& jlayers = doc["layers"];
  for (std::size_t i = 0; i < jlayers.size(); ++i) {
    const json& jl = jlayers[i];
    LayerSpec l;
    l.kind = parse_layer_kind(require_field<std::string>(jl, "kind", i));
    if (l.is_linear()) {
      l.in_channels = require_field<std::size_t>(jl, "in_channels", i);
      l.out_channels = require_field<std::size_t>(jl, "out_channels", i);
      l.kernel_h = require_field<std::size_t>(jl, "kernel_h", i);
      l.kernel_w = require_field<std::size_t>(jl, "kernel_w", i);
      l.stride = require_field<std::size_t>(jl, "stride", i);
      if (jl.contains("boundary")) l.boundary = parse_boundary(jl["boundary"].get<std::string>());
      const auto w_off = require_field<std::size_t>(jl, "weight_offset", i);
      const auto b_off = require_field<std::size_t>(jl, "bias_offset", i);
      const std::size_t nw = l.out_channels * l.in_channels * l.kernel_h * l.kernel_w;
      const std::size_t w_end = w_off + 8 * nw;
      const std::size_t b_end = b_off + 8 * l.out_channels;
      expected_bytes = std::max({expected_bytes, w_end, b_end});
      if (w_end > blob.size() || b_end > blob.size()) {
        throw std::runtime_error("weights blob '" + blob_path.string() + "' too short for " + layer_name(i) +
                                 ": expected at least " + std::to_string(std::max(w_end, b_end)) +
                                 " bytes, actual " + std::to_string(blob.size()));
      }
      l.weights.resize(nw);
      for (std::size_t k = 0; k < nw; ++k) l.weights[k] = read_f64(blob, w_off + 8 * k);
      l.bias.resize(l.out_channels);
      for (std::size_t k = 0; k < l.out_channels; ++k) l.bias[k] = read_f64(blob, b_off + 8 * k);
    } else {
      l.activation.kind = parse_activation_kind(require_field<std::string>(jl, "activation", i));
      if (l.activation.kind == ActivationKind::leaky_relu) l.activation.alpha = require_field<double>(jl, "alpha", i);
      if (l.activation.kind == ActivationKind::prelu)
        l.activation.alphas = require_field<std::vector<double>>(jl, "alphas", i);
    }
    layers.push_back(std::move(l));
  }
  if (blob.size() != expected_bytes) {
    throw std::runtime_error("weights blob '" + blob_path.string() + "' size mismatch: expected " +
                             std::to_string(expected_bytes) + " bytes, actual " + std::to_string(blob.size()));
  }
  return ConvNet(doc["input_channels"].get<std::size_t>(), std::move(layers));
}

// ---- toy networks -----------------------------------------------------------

ConvNet random_network(std::uint64_t seed, const RandomNetOptions& opt) {
  if (opt.linear_layers == 0) return ConvNet::identity(opt.input_channels);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);

  // pick the kinds: optionally a strided/transposed pair so dims come back
  std::vector<LayerKind> kinds(opt.linear_layers, LayerKind::conv);
  if (opt.mix_strided && opt.linear_layers >= 2) {
    const std::size_t first = opt.linear_layers >= 3 ? 1 : 0;
    kinds[first] = LayerKind::strided_conv;
    kinds[first + 1] = LayerKind::transposed_conv;
  }

  std::vector<LayerSpec> layers;
  std::size_t ch = opt.input_channels;
  for (std::size_t n = 0; n < opt.linear_layers; ++n) {
    const bool last = n + 1 == opt.linear_layers;
    const std::size_t out_ch = last ? opt.output_channels : opt.hidden_channels;
    std::size_t k = 0;
    if (kinds[n] == LayerKind::conv) {
      k = coin(rng) ? 3 : 1;
    } else {
      k = 2 + static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 2)(rng));
    }
    std::vector<double> w(out_ch * ch * k * k);
    const double scale = opt.weight_scale / std::sqrt(static_cast<double>(ch * k * k)) * 2.0;
    for (double& v : w) v = scale * unit(rng);
    std::vector<double> b(out_ch);
    for (double& v : b) v = opt.bias_scale * unit(rng);
    if (kinds[n] == LayerKind::transposed_conv) {
      layers.push_back(LayerSpec::transposed(ch, out_ch, k, k, 2, std::move(w), std::move(b)));
    } else {
      layers.push_back(LayerSpec::conv(ch, out_ch, k, k, std::move(w), std::move(b), kinds[n] == LayerKind::conv ? 1 : 2));
    }
    if (!last) {
      Activation a;
      a.kind = opt.leaky ? ActivationKind::leaky_relu : ActivationKind::relu;
      a.alpha = opt.leaky ? 0.1 : 0.0;
      layers.push_back(LayerSpec::act(a));
    }
    ch = out_ch;
  }
  return ConvNet(opt.input_channels, std::move(layers));
}

ConvNet zero_biases(ConvNet net) {
  std::vector<LayerSpec> layers = net.layers();
  for (LayerSpec& l : layers) std::fill(l.bias.begin(), l.bias.end(), 0.0);
  return ConvNet(net.input_channels(), std::move(layers));
}

}  // namespace mgbp
