#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mgbp/convnet.hpp"
#include "support/oracles.hpp"

using namespace mgbp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mgbp_unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("identity conv and relu on negatives") {
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor({5, 5, 1}, rng);
  const ConvNet id(1, {LayerSpec::conv(1, 1, 1, 1, {1.0}, {0.0})});
  CHECK(forward(id, x) == x);
  Activation relu{ActivationKind::relu};
  const ConvNet r(1, {LayerSpec::act(relu)});
  CHECK(max_abs(forward(r, oracle::random_tensor({4, 4, 1}, rng, -2.0, -0.1))) == 0.0);
}

TEST_CASE("forward matches the naive evaluator") {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    RandomNetOptions opt;
    opt.linear_layers = 2 + seed % 3;
    opt.leaky = seed % 2 == 1;
    opt.input_channels = 1 + seed % 2;
    const ConvNet net = random_network(seed, opt);
    const Tensor x = oracle::random_tensor({8 + seed % 3, 8, opt.input_channels}, rng, -1.0, 1.0);
    CHECK(max_abs_diff(forward(net, x), oracle::naive_forward(net, x)) <= 1e-12);
  }
}

TEST_CASE("forward names the layer on channel mismatch") {
  const ConvNet net(2, {LayerSpec::conv(2, 1, 1, 1, {1.0, 1.0}, {0.0})});
  CHECK_THROWS_WITH(forward(net, Tensor({3, 3, 1})), doctest::Contains("layer 0"));
  CHECK_THROWS_WITH(ConvNet(1, {LayerSpec::conv(1, 2, 1, 1, {1, 1}, {0, 0}), LayerSpec::conv(3, 1, 1, 1, {1, 1, 1}, {0})}),
                    doctest::Contains("layer 1"));
}

TEST_CASE("forward record keeps every layer's input and output") {
  const ConvNet net = random_network(3);
  ForwardRecord rec;
  const Tensor y = forward(net, Tensor({8, 8, 1}, 0.5), &rec);
  REQUIRE(rec.inputs.size() == net.size());
  CHECK(rec.outputs.back() == y);
  for (std::size_t i = 1; i < net.size(); ++i) CHECK(rec.inputs[i] == rec.outputs[i - 1]);
}

TEST_CASE("1x1 layer matrix") {
  const LayerMatrix m = layer_matrix(LayerSpec::conv(1, 1, 1, 1, {2.0}, {0.5}), {2, 2, 1});
  CHECK(m.weights.nnz() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(m.weights.coeff(i, i) == 2.0);
  CHECK(m.bias == std::vector<double>(4, 0.5));
  CHECK_THROWS_WITH(layer_matrix(LayerSpec::act({ActivationKind::relu}), {2, 2, 1}), "no matrix for nonlinear layer");
}

TEST_CASE("transposed layer matrix is the transpose of the strided one") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-1, 1);
  for (std::size_t k : {2u, 3u, 4u}) {
    std::vector<double> w(2 * 3 * k * k);
    for (double& v : w) v = d(rng);
    const LayerSpec strided = LayerSpec::conv(2, 3, k, k, w, {0, 0, 0}, 2);
    // transposed maps 3 -> 2 channels with the same taps, reordered (in, out) -> (out, in)
    std::vector<double> wt(w.size());
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t t = 0; t < k * k; ++t) wt[(i * 3 + o) * k * k + t] = w[(o * 2 + i) * k * k + t];
    const LayerSpec transposed = LayerSpec::transposed(3, 2, k, k, 2, wt, {0, 0});
    const SparseOperator s = layer_matrix(strided, {6, 8, 2}).weights;
    const SparseOperator t = layer_matrix(transposed, {3, 4, 3}).weights;
    REQUIRE(t.rows() == s.cols());
    REQUIRE(t.cols() == s.rows());
    const auto st = s.transpose().entries(), te = t.entries();
    REQUIRE(st.size() == te.size());
    for (std::size_t i = 0; i < st.size(); ++i) {
      CHECK(st[i].row == te[i].row);
      CHECK(st[i].col == te[i].col);
      CHECK(st[i].value == doctest::Approx(te[i].value).epsilon(1e-15));
    }
  }
}

TEST_CASE("layer matrices act like the layers") {
  std::mt19937_64 rng(5);
  const ConvNet net = random_network(6, {2, 2, 3, 4, true, false, 0.5, 0.1});
  Dims dims{7, 6, 2};
  for (const LayerSpec& l : net.layers()) {
    if (l.is_linear()) {
      const LayerMatrix m = layer_matrix(l, dims);
      for (int t = 0; t < 5; ++t) {
        const Tensor x = oracle::random_tensor(dims, rng, -1, 1);
        auto y = m.weights.apply(vectorize(x));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += m.bias[i];
        CHECK(max_abs_diff(devectorize(y, l.output_dims(dims)), apply_layer(l, x)) <= 1e-12);
      }
    }
    dims = l.output_dims(dims);
  }
}

TEST_CASE("identity-activation nets are affine") {
  std::mt19937_64 rng(6);
  ConvNet net = random_network(7);
  std::vector<LayerSpec> layers = net.layers();
  for (LayerSpec& l : layers)
    if (!l.is_linear()) l.activation = Activation{};
  net = ConvNet(1, layers);
  const Tensor x = oracle::random_tensor({8, 8, 1}, rng), y = oracle::random_tensor({8, 8, 1}, rng);
  const Tensor f0 = forward(net, Tensor({8, 8, 1}));
  const Tensor lhs = forward(net, 2.0 * x + (-0.5) * y) - f0;
  const Tensor rhs = 2.0 * (forward(net, x) - f0) + (-0.5) * (forward(net, y) - f0);
  CHECK(max_abs_diff(lhs, rhs) <= 1e-10 * std::max(1.0, max_abs(lhs)));
}

TEST_CASE("layer validation") {
  CHECK_THROWS_AS(LayerSpec::conv(1, 1, 3, 3, std::vector<double>(8), {0.0}).validate(), std::invalid_argument);
  LayerSpec t = LayerSpec::transposed(1, 1, 2, 2, 2, std::vector<double>(4), {0.0});
  t.boundary = BoundaryRule::reflect;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("network manifests round-trip bit-exactly") {
  RandomNetOptions opt;
  opt.linear_layers = 4;
  opt.leaky = true;
  const ConvNet net = random_network(11, opt);
  const fs::path m = scratch("net4.json");
  save_network(net, m);
  CHECK(load_network(m) == net);

  Activation pre{ActivationKind::prelu, 0.0, {0.1, 0.2}};
  const ConvNet small(1, {LayerSpec::conv(1, 2, 1, 1, {0.5, -0.25}, {0.125, 1.0 / 3.0}), LayerSpec::act(pre)});
  const fs::path m1 = scratch("net1.json");
  save_network(small, m1);
  CHECK(load_network(m1) == small);
}

TEST_CASE("manifest errors") {
  const ConvNet net = random_network(12);
  const fs::path m = scratch("trunc.json");
  save_network(net, m);
  const fs::path blob = scratch("trunc.bin");
  const auto size = fs::file_size(blob);
  fs::resize_file(blob, size - 8);
  CHECK_THROWS_WITH(load_network(m), doctest::Contains("expected"));
  CHECK_THROWS_WITH(load_network(m), doctest::Contains(("actual " + std::to_string(size - 8)).c_str()));

  const fs::path bad = scratch("badact.json");
  {
    std::ofstream out(bad);
    out << R"({"format":"mgbp-net-1","input_channels":1,"weights_file":"badact.bin","weights_bytes":0,)"
        << R"("layers":[{"kind":"activation","activation":"swish"}]})";
  }
  { std::ofstream out(scratch("badact.bin"), std::ios::binary); }
  CHECK_THROWS_WITH(load_network(bad), doctest::Contains("swish"));
}

TEST_CASE("random networks are deterministic") {
  CHECK(random_network(5) == random_network(5));
  CHECK(!(random_network(5) == random_network(6)));
  const ConvNet z = zero_biases(random_network(5));
  for (const LayerSpec& l : z.layers())
    for (double b : l.bias) CHECK(b == 0.0);
}
