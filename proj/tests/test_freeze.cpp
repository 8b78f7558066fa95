#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "mgbp/freeze.hpp"
#include "mgbp/image_io.hpp"
#include "support/oracles.hpp"

using namespace mgbp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mgbp_unit" / name;
  fs::remove_all(dir);
  return dir;
}

Tensor vec_to_tensor(const Eigen::VectorXd& v, Dims d) { return Tensor(d, std::vector<double>(v.data(), v.data() + v.size())); }

}  // namespace

TEST_CASE("relu gains") {
  const Activation relu{ActivationKind::relu};
  const Tensor g = activation_gain(relu, Tensor({1, 3, 1}, {3.0, -2.0, 0.0}));
  CHECK(g == Tensor({1, 3, 1}, {1.0, 0.0, 1.0}));
  const Activation leaky{ActivationKind::leaky_relu, 0.1};
  CHECK(activation_gain(leaky, Tensor({1, 2, 1}, {-4.0, 4.0})) == Tensor({1, 2, 1}, {0.1, 1.0}));
}

TEST_CASE("frozen forward reproduces the network on the freezing input") {
  std::mt19937_64 rng(1);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    RandomNetOptions opt;
    opt.linear_layers = 2 + seed % 3;
    opt.leaky = seed % 2;
    const ConvNet net = random_network(seed, opt);
    const Tensor x = oracle::random_tensor({10, 12, 1}, rng, -1, 1);
    const Tensor y = forward(net, x);
    CHECK(freeze_equivalence(net, x) <= 1e-10 * std::max(1.0, max_abs(y)));
  }
}

TEST_CASE("inputs with exact zero pre-activations") {
  // first layer is the identity, so zero input samples give z == 0 at the relu
  const ConvNet net(1, {LayerSpec::conv(1, 1, 1, 1, {1.0}, {0.0}), LayerSpec::act({ActivationKind::relu}),
                        LayerSpec::conv(1, 1, 3, 3, std::vector<double>(9, 0.3), {0.2})});
  Tensor x({6, 6, 1});
  for (std::size_t i = 0; i < x.size(); i += 2) x.data()[i] = (i % 4 == 0) ? 1.0 : -1.0;
  const FrozenSystem sys = freeze(net, x);
  for (double g : sys.gains().gains[1]->data()) CHECK((g == 0.0 || g == 1.0));
  CHECK(freeze_equivalence(net, x) <= 1e-12);
}

TEST_CASE("frozen system is affine") {
  std::mt19937_64 rng(2);
  const ConvNet net = random_network(3);
  const FrozenSystem sys = freeze(net, oracle::random_tensor({8, 8, 1}, rng));
  const Tensor u = oracle::random_tensor({8, 8, 1}, rng), v = oracle::random_tensor({8, 8, 1}, rng);
  const double a = 0.7, b = -1.3;
  const Tensor lhs = sys.apply(a * u + b * v);
  const Tensor rhs = a * sys.apply(u) + b * sys.apply(v) + (1.0 - a - b) * sys.residual();
  CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
}

TEST_CASE("identity activations freeze to the original network") {
  std::mt19937_64 rng(3);
  std::vector<LayerSpec> layers = random_network(4).layers();
  for (LayerSpec& l : layers)
    if (!l.is_linear()) l.activation = Activation{};
  const ConvNet net(1, layers);
  const FrozenSystem sys = freeze(net, oracle::random_tensor({8, 8, 1}, rng));
  for (int t = 0; t < 3; ++t) {
    const Tensor u = oracle::random_tensor({8, 8, 1}, rng, -1, 1);
    CHECK(max_abs_diff(sys.apply(u), forward(net, u)) <= 1e-12);
  }
  CHECK(freeze_equivalence(net, oracle::random_tensor({8, 8, 1}, rng)) == 0.0);
}

TEST_CASE("residual examples") {
  std::mt19937_64 rng(4);
  const Tensor x = oracle::random_tensor({8, 8, 1}, rng);
  CHECK(max_abs(effective_residual(freeze(zero_biases(random_network(5)), x))) == 0.0);
  const ConvNet one(1, {LayerSpec::conv(1, 1, 1, 1, {0.9}, {0.5})});
  CHECK(effective_residual(freeze(one, x)) == Tensor({8, 8, 1}, 0.5));
}

TEST_CASE("effective filter examples") {
  std::mt19937_64 rng(6);
  const Tensor x = oracle::random_tensor({7, 7, 1}, rng);
  CHECK(effective_filter(freeze(ConvNet::identity(1), x), {3, 2, 0}) == delta({7, 7, 1}, {3, 2, 0}));
  const std::vector<double> taps{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const ConvNet conv(1, {LayerSpec::conv(1, 1, 3, 3, taps, {0.0})});
  const Tensor f = effective_filter(freeze(conv, x), {3, 3, 0});
  // cross-correlation: out(3 + 1 - a, 3 + 1 - b) picks tap (a, b)
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) CHECK(f(4 - a, 4 - b) == taps[a * 3 + b]);
  CHECK_THROWS_AS(effective_filter(freeze(conv, x), {7, 0, 0}), std::out_of_range);
}

TEST_CASE("explicit F and R agree with the frozen system") {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    RandomNetOptions opt;
    opt.linear_layers = 3;
    opt.leaky = seed % 2;
    const ConvNet net = random_network(seed + 20, opt);
    const Tensor x = oracle::random_tensor({6, 6, 1}, rng, -1, 1);
    const FrozenSystem sys = freeze(net, x);
    const ExplicitFR fr = explicit_fr(net, x);
    CHECK(max_abs_diff(vec_to_tensor(fr.residual, fr.output_dims), sys.residual()) <= 1e-10);
    for (int t = 0; t < 10; ++t) {
      const Tensor u = oracle::random_tensor({6, 6, 1}, rng, -1, 1);
      const auto uv = vectorize(u);
      const Eigen::VectorXd y = fr.filter * Eigen::Map<const Eigen::VectorXd>(uv.data(), static_cast<Eigen::Index>(uv.size())) + fr.residual;
      CHECK(max_abs_diff(vec_to_tensor(y, fr.output_dims), sys.apply(u)) <= 1e-10);
    }
    const Tensor col = effective_filter(sys, {2, 3, 0});
    for (std::size_t i = 0; i < col.size(); ++i)
      CHECK(std::abs(col.data()[i] - fr.filter(static_cast<Eigen::Index>(i), 2 * 6 + 3)) <= 1e-10);
  }
}

TEST_CASE("explicit F/R degenerate nets") {
  std::mt19937_64 rng(8);
  const Tensor x = oracle::random_tensor({3, 3, 1}, rng);
  const ExplicitFR id = explicit_fr(ConvNet::identity(1), x);
  CHECK(id.filter.isIdentity());
  CHECK(id.residual.isZero());
  const LayerSpec l = LayerSpec::conv(1, 1, 3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9}, {0.25});
  const ExplicitFR one = explicit_fr(ConvNet(1, {l}), x);
  const LayerMatrix lm = layer_matrix(l, {3, 3, 1});
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(one.residual(static_cast<Eigen::Index>(i)) == 0.25);
    for (std::size_t j = 0; j < 9; ++j) CHECK(one.filter(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == lm.weights.coeff(i, j));
  }
  CHECK_THROWS_AS(explicit_fr(ConvNet::identity(1), Tensor({70, 70, 1})), ContractViolation);
}

TEST_CASE("filter spectrum examples") {
  const Tensor flat = filter_spectrum(delta({8, 8, 1}, {3, 5, 0}));
  for (double v : flat.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
  const Tensor dc = filter_spectrum(Tensor({6, 5, 1}, 0.5));
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      if (r == 3 && c == 2) CHECK(dc(r, c) == doctest::Approx(15.0).epsilon(1e-14));
      else CHECK(dc(r, c) <= 1e-13);
    }
  CHECK_THROWS_AS(filter_spectrum(Tensor({4, 4, 2})), std::invalid_argument);
}

TEST_CASE("filter spectrum matches the direct DFT and Parseval") {
  std::mt19937_64 rng(9);
  for (Dims d : {Dims{8, 8, 1}, Dims{5, 7, 1}}) {
    const Tensor f = oracle::random_tensor(d, rng, -1, 1);
    const Tensor m = filter_spectrum(f);
    CHECK(max_abs_diff(m, oracle::naive_dft_magnitude(f)) <= 1e-10);
    double e_freq = 0.0, e_space = 0.0;
    for (double v : m.data()) e_freq += v * v;
    for (double v : f.data()) e_space += v * v;
    CHECK(std::abs(e_freq - static_cast<double>(f.size()) * e_space) <= 1e-8 * e_freq);
  }
}

TEST_CASE("atlas images invert through the sidecar normalization") {
  std::mt19937_64 rng(10);
  const ConvNet net = random_network(30);
  const FrozenSystem sys = freeze(net, oracle::random_tensor({12, 12, 1}, rng));
  const std::vector<Index3> pixels{{1, 1, 0}, {5, 6, 0}, {11, 0, 0}, {6, 6, 0}};
  const fs::path dir = scratch_dir("atlas");
  AtlasOptions opts;
  opts.threads = 3;
  opts.spectrum = true;
  const auto entries = filter_atlas(sys, pixels, dir, opts);
  REQUIRE(entries.size() == 5);
  std::ifstream side(dir / "atlas.txt");
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    std::size_t r, c, ch;
    double lo, hi;
    side >> r >> c >> ch >> lo >> hi;
    CHECK(Index3{r, c, ch} == pixels[i]);
    const Tensor f = effective_filter(sys, pixels[i]);
    const Tensor img = read_image(dir / ("filter_r" + std::to_string(r) + "_c" + std::to_string(c) + "_ch0.png"));
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(std::abs(lo + img.data()[k] * (hi - lo) - f.data()[k]) <= (hi - lo) / 510.0 + 1e-12);
    CHECK(fs::exists(dir / ("spectrum_r" + std::to_string(r) + "_c" + std::to_string(c) + "_ch0.png")));
  }
  std::string tag;
  side >> tag;
  CHECK(tag == "residual");
}

TEST_CASE("atlas edge cases") {
  std::mt19937_64 rng(11);
  const Tensor x = oracle::random_tensor({5, 5, 1}, rng);
  const fs::path empty = scratch_dir("empty");
  CHECK(filter_atlas(freeze(random_network(1), x), {}, empty).size() == 1);
  CHECK(fs::exists(empty / "residual.png"));

  const fs::path id = scratch_dir("identity");
  const Index3 p{2, 3, 0};
  const auto e = filter_atlas(freeze(ConvNet::identity(1), x), std::span<const Index3>(&p, 1), id);
  const Tensor img = read_image(e[0].image);
  CHECK(img == delta({5, 5, 1}, p));
  const Tensor res = read_image(id / "residual.png");
  CHECK(max_abs(res) == 0.0);
  CHECK(e[1].min == 0.0);
  CHECK(e[1].max == 0.0);
}

TEST_CASE("row view returns rows of F") {
  std::mt19937_64 rng(12);
  const ConvNet net = random_network(13);
  const Tensor x = oracle::random_tensor({6, 6, 1}, rng);
  const ExplicitFR fr = explicit_fr(net, x);
  const Tensor row = effective_filter_row(fr, {2, 4, 0});
  for (std::size_t j = 0; j < row.size(); ++j) CHECK(row.data()[j] == fr.filter(2 * 6 + 4, static_cast<Eigen::Index>(j)));
  AtlasOptions opts;
  opts.row_view = true;
  const Index3 p{2, 4, 0};
  const auto e = filter_atlas(freeze(net, x), std::span<const Index3>(&p, 1), scratch_dir("rows"), opts);
  double lo = 0, hi = 0;
  normalize_for_display(row, AtlasNormalization::min_max, lo, hi);
  CHECK(e[0].min == lo);
  CHECK(e[0].max == hi);
}
