#include "mgbp/freeze.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "mgbp/image_io.hpp"

namespace mgbp {

Tensor activation_gain(const Activation& activation, const Tensor& z) {
  Tensor g(z.dims());
  for (std::size_t r = 0; r < z.height(); ++r)
    for (std::size_t c = 0; c < z.width(); ++c)
      for (std::size_t ch = 0; ch < z.channels(); ++ch) g(r, c, ch) = activation.gain(z(r, c, ch), ch);
  return g;
}

FrozenSystem::FrozenSystem(ConvNet net, GainRecord gains, Dims input_dims)
    : net_(std::move(net)), gains_(std::move(gains)), input_dims_(input_dims) {
  if (gains_.gains.size() != net_.size()) {
    throw std::invalid_argument("gain record has " + std::to_string(gains_.gains.size()) + " entries for " +
                                std::to_string(net_.size()) + " layers");
  }
  residual_ = apply(Tensor(input_dims_));
}

Tensor FrozenSystem::apply(const Tensor& u) const {
  if (u.dims() != input_dims_) {
    throw std::invalid_argument("frozen system built for " + to_string(input_dims_) + ", got " + to_string(u.dims()));
  }
  Tensor cur = u;
  for (std::size_t i = 0; i < net_.size(); ++i) {
    const LayerSpec& l = net_.layer(i);
    if (l.is_linear()) {
      cur = apply_layer(l, cur, i);
      continue;
    }
    const Tensor& g = *gains_.gains[i];
    for (std::size_t k = 0; k < cur.size(); ++k) cur.data()[k] *= g.data()[k];
  }
  return cur;
}

FrozenSystem freeze(const ConvNet& net, const Tensor& x) {
  ForwardRecord rec;
  forward(net, x, &rec);
  GainRecord gains;
  gains.gains.resize(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!net.layer(i).is_linear()) gains.gains[i] = activation_gain(net.layer(i).activation, rec.inputs[i]);
  }
  return FrozenSystem(net, std::move(gains), x.dims());
}

Tensor effective_residual(const FrozenSystem& sys) { return sys.residual(); }

Tensor effective_filter(const FrozenSystem& sys, Index3 pixel) {
  return sys.apply(delta(sys.input_dims(), pixel)) - sys.residual();
}

ExplicitFR explicit_fr(const FrozenSystem& sys, std::size_t cap) {
  const ConvNet& net = sys.net();
  const std::size_t n_in = sys.input_dims().size();
  const std::size_t n_out = sys.output_dims().size();
  if (n_in > cap || n_out > cap) {
    throw ContractViolation("explicit F/R needs input " + std::to_string(n_in) + " and output " +
                            std::to_string(n_out) + " entries within cap " + std::to_string(cap));
  }
  std::vector<Dims> in_dims{sys.input_dims()};
  for (const LayerSpec& l : net.layers()) {
    const Dims d = l.is_linear() ? l.output_dims(in_dims.back()) : in_dims.back();
    if (d.size() > 4 * cap) {
      throw ContractViolation("explicit F/R: intermediate of " + std::to_string(d.size()) +
                              " entries exceeds 4 x cap");
    }
    in_dims.push_back(d);
  }
  // Walk the layers from the output side:
  //   Q accumulates the product of the layer factors after the current one,
  //   R sums Q times each linear layer's bias.
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_out), static_cast<Eigen::Index>(n_out));
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_out));
  for (std::size_t idx = net.size(); idx-- > 0;) {
    const LayerSpec& l = net.layer(idx);
    if (l.is_linear()) {
      const LayerMatrix lm = layer_matrix(l, in_dims[idx]);
      const Eigen::Map<const Eigen::VectorXd> b(lm.bias.data(), static_cast<Eigen::Index>(lm.bias.size()));
      r.noalias() += q * b;
      Eigen::MatrixXd next = q * lm.weights.matrix();
      q = std::move(next);
    } else {
      const Tensor& g = *sys.gains().gains[idx];
      for (Eigen::Index c = 0; c < q.cols(); ++c) q.col(c) *= g.data()[static_cast<std::size_t>(c)];
    }
  }
  return {std::move(q), std::move(r), sys.input_dims(), sys.output_dims()};
}

ExplicitFR explicit_fr(const ConvNet& net, const Tensor& x, std::size_t cap) { return explicit_fr(freeze(net, x), cap); }

Tensor effective_filter_row(const ExplicitFR& fr, Index3 output_pixel) {
  const Dims& od = fr.output_dims;
  if (output_pixel.row >= od.height || output_pixel.col >= od.width || output_pixel.ch >= od.channels) {
    throw std::out_of_range("output pixel outside " + to_string(od));
  }
  const auto row = static_cast<Eigen::Index>((output_pixel.row * od.width + output_pixel.col) * od.channels + output_pixel.ch);
  std::vector<double> v(fr.input_dims.size());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = fr.filter(row, static_cast<Eigen::Index>(j));
  return Tensor(fr.input_dims, std::move(v));
}

double freeze_equivalence(const ConvNet& net, const Tensor& x) {
  const FrozenSystem sys = freeze(net, x);
  return max_abs_diff(forward(net, x), sys.apply(x));
}

namespace {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Tensor filter_spectrum(const Tensor& filter) {
  if (filter.channels() != 1) {
    throw std::invalid_argument("filter_spectrum needs a single-channel map, got " + std::to_string(filter.channels()) +
                                " channels (select one with extract_channel)");
  }
  const int h = static_cast<int>(filter.height());
  const int w = static_cast<int>(filter.width());
  const std::size_t n = filter.size();
  fftw_complex* buf = fftw_alloc_complex(n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(h, w, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < n; ++i) {
    buf[i][0] = filter.data()[i];
    buf[i][1] = 0.0;
  }
  fftw_execute(plan);
  Tensor mag(filter.dims());
  for (std::size_t u = 0; u < filter.height(); ++u) {
    for (std::size_t v = 0; v < filter.width(); ++v) {
      const fftw_complex& z = buf[u * filter.width() + v];
      mag((u + filter.height() / 2) % filter.height(), (v + filter.width() / 2) % filter.width()) = std::hypot(z[0], z[1]);
    }
  }
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return mag;
}

Tensor normalize_for_display(const Tensor& t, AtlasNormalization mode, double& min, double& max) {
  if (mode == AtlasNormalization::symmetric) {
    max = max_abs(t);
    min = -max;
  } else {
    const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
    min = *lo;
    max = *hi;
  }
  Tensor out(t.dims());
  if (max > min) {
    const double span = max - min;
    for (std::size_t i = 0; i < t.size(); ++i) out.data()[i] = (t.data()[i] - min) / span;
  }
  return out;
}

namespace {

// Channel counts other than 1 and 3 are tiled side by side as grayscale.
Tensor displayable(const Tensor& t) {
  if (t.channels() == 1 || t.channels() == 3) return t;
  Tensor out({t.height(), t.width() * t.channels(), 1});
  for (std::size_t r = 0; r < t.height(); ++r)
    for (std::size_t c = 0; c < t.width(); ++c)
      for (std::size_t ch = 0; ch < t.channels(); ++ch) out(r, ch * t.width() + c) = t(r, c, ch);
  return out;
}

std::string pixel_stem(const Index3& p) {
  return "r" + std::to_string(p.row) + "_c" + std::to_string(p.col) + "_ch" + std::to_string(p.ch);
}

}  // namespace

std::vector<AtlasEntry> filter_atlas(const FrozenSystem& sys, std::span<const Index3> pixels,
                                     const std::filesystem::path& dir, const AtlasOptions& options) {
  for (const Index3& p : pixels) {
    const Dims d = options.row_view ? sys.output_dims() : sys.input_dims();
    if (p.row >= d.height || p.col >= d.width || p.ch >= d.channels) {
      throw std::out_of_range("atlas pixel (" + std::to_string(p.row) + "," + std::to_string(p.col) + "," +
                              std::to_string(p.ch) + ") outside " + to_string(d));
    }
  }
  std::filesystem::create_directories(dir);

  std::vector<Tensor> filters(pixels.size());
  std::optional<ExplicitFR> fr;
  if (options.row_view) fr = explicit_fr(sys);
  const auto filter_at = [&](std::size_t i) {
    return fr ? effective_filter_row(*fr, pixels[i]) : effective_filter(sys, pixels[i]);
  };
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, pixels.size())));
  if (threads <= 1) {
    for (std::size_t i = 0; i < pixels.size(); ++i) filters[i] = filter_at(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < pixels.size(); i += threads) filters[i] = filter_at(i);
      });
    }
    for (std::thread& th : pool) th.join();
  }

  std::vector<AtlasEntry> entries;
  std::ostringstream sidecar;
  std::ostringstream spectra;
  sidecar << std::setprecision(17);
  spectra << std::setprecision(17);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    AtlasEntry e;
    e.pixel = pixels[i];
    e.image = dir / ("filter_" + pixel_stem(pixels[i]) + ".png");
    write_image(displayable(normalize_for_display(filters[i], options.normalization, e.min, e.max)), e.image);
    sidecar << pixels[i].row << " " << pixels[i].col << " " << pixels[i].ch << " " << e.min << " " << e.max << "\n";
    if (options.spectrum) {
      const Tensor mag = filter_spectrum(extract_channel(filters[i], 0));
      double lo = 0.0, hi = 0.0;
      const Tensor shown = normalize_for_display(mag, AtlasNormalization::min_max, lo, hi);
      write_image(shown, dir / ("spectrum_" + pixel_stem(pixels[i]) + ".png"));
      spectra << pixels[i].row << " " << pixels[i].col << " " << pixels[i].ch << " " << lo << " " << hi << "\n";
    }
    entries.push_back(std::move(e));
  }

  AtlasEntry res;
  res.image = dir / "residual.png";
  write_image(displayable(normalize_for_display(sys.residual(), options.normalization, res.min, res.max)), res.image);
  sidecar << "residual " << res.min << " " << res.max << "\n";
  entries.push_back(std::move(res));

  write_file_atomic(dir / "atlas.txt", sidecar.str());
  if (options.spectrum) write_file_atomic(dir / "spectra.txt", spectra.str());
  return entries;
}

}  // namespace mgbp
