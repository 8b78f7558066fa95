#include "oracles.hpp"

#include <cmath>
#include <numbers>

namespace oracle {

Tensor random_tensor(Dims dims, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(dims);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

namespace {

// Resolves index i on [0, n) or returns false for a zero sample.
bool resolve(long i, long n, mgbp::BoundaryRule rule, long& out) {
  if (i >= 0 && i < n) {
    out = i;
    return true;
  }
  switch (rule) {
    case mgbp::BoundaryRule::zero_pad:
      return false;
    case mgbp::BoundaryRule::replicate_edge:
      out = i < 0 ? 0 : n - 1;
      return true;
    case mgbp::BoundaryRule::reflect:
      if (n == 1) {
        out = 0;
        return true;
      }
      while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
      out = i;
      return true;
  }
  return false;
}

}  // namespace

Tensor direct_convolve(const Tensor& x, const mgbp::Kernel& k, mgbp::BoundaryRule rule) {
  Tensor out(x.dims());
  const long h = static_cast<long>(x.height()), w = static_cast<long>(x.width());
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c)
      for (std::size_t ch = 0; ch < x.channels(); ++ch) {
        double acc = 0.0;
        for (long i = 0; i < static_cast<long>(k.rows()); ++i)
          for (long j = 0; j < static_cast<long>(k.cols()); ++j) {
            long rr = 0, cc = 0;
            if (!resolve(r - i + k.anchor_row(), h, rule, rr)) continue;
            if (!resolve(c - j + k.anchor_col(), w, rule, cc)) continue;
            acc += k(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *
                   x(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), ch);
          }
        out(static_cast<std::size_t>(r), static_cast<std::size_t>(c), ch) = acc;
      }
  return out;
}

Dense dense_from_tensor_path(const mgbp::ResampleSpec& spec, mgbp::Direction dir, Dims in_dims) {
  const std::size_t n = in_dims.size();
  Dense cols;
  std::size_t rows = 0;
  for (std::size_t j = 0; j < n; ++j) {
    Tensor e(in_dims);
    e.data()[j] = 1.0;
    const Tensor y = dir == mgbp::Direction::down ? mgbp::downscale(e, spec) : mgbp::upscale(e, spec);
    rows = y.size();
    cols.emplace_back(y.data().begin(), y.data().end());
  }
  Dense m(rows, std::vector<double>(n));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = cols[j][i];
  return m;
}

Dense multiply(const Dense& a, const Dense& b) {
  Dense out(a.size(), std::vector<double>(b.empty() ? 0 : b[0].size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k) {
      if (a[i][k] == 0.0) continue;
      for (std::size_t j = 0; j < b[k].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    }
  return out;
}

std::vector<double> multiply(const Dense& a, const std::vector<double>& x) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) out[i] += a[i][j] * x[j];
  return out;
}

double identity_minus_norm1(const Dense& a) {
  double best = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) col += std::abs((i == j ? 1.0 : 0.0) - a[i][j]);
    best = std::max(best, col);
  }
  return best;
}

namespace {

double activate(const mgbp::Activation& a, double z, std::size_t ch) {
  switch (a.kind) {
    case mgbp::ActivationKind::identity: return z;
    case mgbp::ActivationKind::relu: return z > 0 ? z : 0.0;
    case mgbp::ActivationKind::leaky_relu: return z > 0 ? z : a.alpha * z;
    case mgbp::ActivationKind::prelu: return z > 0 ? z : a.alphas[ch] * z;
  }
  return z;
}

Tensor naive_layer(const mgbp::LayerSpec& l, const Tensor& x) {
  if (!l.is_linear()) {
    Tensor out(x.dims());
    for (std::size_t r = 0; r < x.height(); ++r)
      for (std::size_t c = 0; c < x.width(); ++c)
        for (std::size_t ch = 0; ch < x.channels(); ++ch) out(r, c, ch) = activate(l.activation, x(r, c, ch), ch);
    return out;
  }
  const long s = static_cast<long>(l.stride);
  const long ph = static_cast<long>((l.kernel_h - 1) / 2), pw = static_cast<long>((l.kernel_w - 1) / 2);
  const long h = static_cast<long>(x.height()), w = static_cast<long>(x.width());
  if (l.kind == mgbp::LayerKind::transposed_conv) {
    Tensor out({x.height() * l.stride, x.width() * l.stride, l.out_channels});
    for (std::size_t r = 0; r < out.height(); ++r)
      for (std::size_t c = 0; c < out.width(); ++c)
        for (std::size_t o = 0; o < l.out_channels; ++o) out(r, c, o) = l.bias[o];
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j)
        for (std::size_t in = 0; in < l.in_channels; ++in)
          for (std::size_t o = 0; o < l.out_channels; ++o)
            for (long a = 0; a < static_cast<long>(l.kernel_h); ++a)
              for (long b = 0; b < static_cast<long>(l.kernel_w); ++b) {
                const long rr = s * i + a - ph, cc = s * j + b - pw;
                if (rr < 0 || cc < 0 || rr >= h * s || cc >= w * s) continue;
                out(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), o) +=
                    l.weight(o, in, static_cast<std::size_t>(a), static_cast<std::size_t>(b)) *
                    x(static_cast<std::size_t>(i), static_cast<std::size_t>(j), in);
              }
    return out;
  }
  const long oh = (h + s - 1) / s, ow = (w + s - 1) / s;
  Tensor out({static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), l.out_channels});
  for (long i = 0; i < oh; ++i)
    for (long j = 0; j < ow; ++j)
      for (std::size_t o = 0; o < l.out_channels; ++o) {
        double acc = l.bias[o];
        for (std::size_t in = 0; in < l.in_channels; ++in)
          for (long a = 0; a < static_cast<long>(l.kernel_h); ++a)
            for (long b = 0; b < static_cast<long>(l.kernel_w); ++b) {
              const long rr = s * i + a - ph, cc = s * j + b - pw;
              if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
              acc += l.weight(o, in, static_cast<std::size_t>(a), static_cast<std::size_t>(b)) *
                     x(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc), in);
            }
        out(static_cast<std::size_t>(i), static_cast<std::size_t>(j), o) = acc;
      }
  return out;
}

}  // namespace

Tensor naive_forward(const mgbp::ConvNet& net, const Tensor& x) {
  Tensor cur = x;
  for (const mgbp::LayerSpec& l : net.layers()) cur = naive_layer(l, cur);
  return cur;
}

Tensor naive_dft_magnitude(const Tensor& f) {
  const std::size_t h = f.height(), w = f.width();
  Tensor out(f.dims());
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) {
          const double angle = -2.0 * std::numbers::pi *
                               (static_cast<double>(u * r) / static_cast<double>(h) +
                                static_cast<double>(v * c) / static_cast<double>(w));
          acc += f(r, c) * std::polar(1.0, angle);
        }
      out((u + h / 2) % h, (v + w / 2) % w) = std::abs(acc);
    }
  return out;
}

double psnr(const Tensor& x, const Tensor& y) {
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += std::pow(255.0 * x.data()[i] - 255.0 * y.data()[i], 2);
  mse /= static_cast<double>(x.size());
  return mse == 0.0 ? INFINITY : 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim_global(const Tensor& x, const Tensor& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += 255.0 * x.data()[i];
    my += 255.0 * y.data()[i];
  }
  mx /= n;
  my /= n;
  double sx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = 255.0 * x.data()[i] - mx, b = 255.0 * y.data()[i] - my;
    sx += a * a;
    sy += b * b;
    sxy += a * b;
  }
  sx /= n;
  sy /= n;
  sxy /= n;
  const double c1 = 6.5025, c2 = 58.5225;
  return (2 * mx * my + c1) * (2 * sxy + c2) / ((mx * mx + my * my + c1) * (sx + sy + c2));
}

double mean_abs(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.size());
}

}  // namespace oracle
