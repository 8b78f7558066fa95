#include "mgbp/resample.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mgbp {

namespace {

std::size_t checked_scale(int scale) {
  if (scale < 1) throw std::invalid_argument("scale must be >= 1, got " + std::to_string(scale));
  return static_cast<std::size_t>(scale);
}

Kernel from_1d(const std::vector<double>& taps, std::ptrdiff_t anchor, bool one_dimensional, bool normalized) {
  if (one_dimensional) return Kernel(1, taps.size(), taps, 0, anchor, normalized);
  return Kernel::separable(taps, taps, anchor, anchor, normalized);
}

void require_divisible(const Tensor& y, const ResampleSpec& spec, const char* what) {
  const std::size_t sy = spec.scale_y();
  const std::size_t sx = spec.scale_x();
  if (y.height() % sy != 0 || y.width() % sx != 0) {
    const std::size_t pad_h = (sy - y.height() % sy) % sy;
    const std::size_t pad_w = (sx - y.width() % sx) % sx;
    throw std::invalid_argument(std::string(what) + ": dims " + to_string(y.dims()) +
                                " not divisible by scale; pad by " + std::to_string(pad_h) + " rows and " +
                                std::to_string(pad_w) + " cols (see pad_to_multiple)");
  }
}

void check_cap(std::size_t rows, std::size_t cols, std::size_t cap) {
  if (cols != 0 && rows > cap / cols) {
    throw ContractViolation("operator of " + std::to_string(rows) + "x" + std::to_string(cols) +
                            " exceeds cap " + std::to_string(cap) + "; requires cap >= " +
                            std::to_string(rows * cols));
  }
}

std::ptrdiff_t floor_div(std::ptrdiff_t a, std::ptrdiff_t b) {
  std::ptrdiff_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

void ResampleSpec::validate() const {
  if (scale < 1) throw std::invalid_argument("scale must be >= 1, got " + std::to_string(scale));
  if (blur.normalized() && std::abs(blur.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("blur kernel flagged normalized but taps sum to " + std::to_string(blur.sum()));
  }
  if (interp.normalized()) {
    const auto sums = interp.polyphase_sums(scale_y(), scale_x());
    for (std::size_t i = 0; i < sums.size(); ++i) {
      if (std::abs(sums[i] - 1.0) > 1e-12) {
        throw std::invalid_argument("interpolation kernel flagged normalized but polyphase component " +
                                    std::to_string(i) + " sums to " + std::to_string(sums[i]));
      }
    }
  }
}

ResampleSpec default_spec(int scale, bool horizontal_only) {
  ResampleSpec spec;
  spec.scale = scale;
  spec.blur = gaussian_kernel(kDefaultBlurSigmaPerScale * scale, horizontal_only);
  spec.interp = bicubic_kernel(scale, kDefaultBicubicA, horizontal_only);
  spec.boundary = BoundaryRule::replicate_edge;
  spec.horizontal_only = horizontal_only;
  return spec;
}

double cubic_weight(double t, double a) {
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

std::array<double, 4> cubic_phase_taps(double phase, double a) {
  return {cubic_weight(phase + 1.0, a), cubic_weight(phase, a), cubic_weight(1.0 - phase, a),
          cubic_weight(2.0 - phase, a)};
}

Kernel gaussian_kernel(double sigma, bool one_dimensional) {
  if (!(sigma > 0.0)) return one_dimensional ? Kernel(1, 1, {1.0}, 0, 0, true) : Kernel::identity();
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> taps;
  double total = 0.0;
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    taps.push_back(v);
    total += v;
  }
  for (double& v : taps) v /= total;
  return from_1d(taps, radius, one_dimensional, true);
}

Kernel bicubic_kernel(int scale, double a, bool one_dimensional) {
  const auto s = static_cast<std::ptrdiff_t>(checked_scale(scale));
  std::vector<double> taps;
  for (std::ptrdiff_t d = -(2 * s - 1); d <= 2 * s - 1; ++d) {
    taps.push_back(cubic_weight(static_cast<double>(d) / static_cast<double>(s), a));
  }
  return from_1d(taps, 2 * s - 1, one_dimensional, true);
}

Kernel bilinear_kernel(int scale, bool one_dimensional) {
  const auto s = static_cast<std::ptrdiff_t>(checked_scale(scale));
  std::vector<double> taps;
  for (std::ptrdiff_t d = -(s - 1); d <= s - 1; ++d) {
    taps.push_back(1.0 - std::abs(static_cast<double>(d)) / static_cast<double>(s));
  }
  return from_1d(taps, s - 1, one_dimensional, true);
}

Kernel box_kernel(int scale, bool one_dimensional) {
  const std::size_t s = checked_scale(scale);
  std::vector<double> taps(s, 1.0 / static_cast<double>(s));
  return from_1d(taps, static_cast<std::ptrdiff_t>(s) - 1, one_dimensional, true);
}

Kernel nearest_kernel(int scale, bool one_dimensional) {
  const std::size_t s = checked_scale(scale);
  std::vector<double> taps(s, 1.0);
  return from_1d(taps, 0, one_dimensional, true);
}

Kernel zero_kernel() { return Kernel(1, 1, {0.0}, 0, 0, false); }

namespace {

bool split_param(std::string_view name, std::string_view base, double& value) {
  if (name.substr(0, base.size()) != base) return false;
  if (name.size() == base.size()) return true;
  if (name[base.size()] != ':') return false;
  const std::string arg(name.substr(base.size() + 1));
  std::size_t used = 0;
  try {
    value = std::stod(arg, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != arg.size() || arg.empty()) {
    throw std::invalid_argument("bad numeric parameter in kernel name '" + std::string(name) + "'");
  }
  return true;
}

}  // namespace

Kernel parse_blur_kernel(std::string_view name, int scale, bool one_dimensional) {
  double sigma = kDefaultBlurSigmaPerScale * scale;
  if (split_param(name, "gaussian", sigma)) return gaussian_kernel(sigma, one_dimensional);
  if (name == "box") return box_kernel(scale, one_dimensional);
  if (name == "identity") return one_dimensional ? Kernel(1, 1, {1.0}, 0, 0, true) : Kernel::identity();
  throw std::invalid_argument("unknown blur kernel '" + std::string(name) +
                              "' (expected gaussian[:sigma], box or identity)");
}

Kernel parse_interp_kernel(std::string_view name, int scale, bool one_dimensional) {
  double a = kDefaultBicubicA;
  if (split_param(name, "bicubic", a)) return bicubic_kernel(scale, a, one_dimensional);
  if (name == "bilinear") return bilinear_kernel(scale, one_dimensional);
  if (name == "nearest") return nearest_kernel(scale, one_dimensional);
  if (name == "zero") return zero_kernel();
  throw std::invalid_argument("unknown interpolation kernel '" + std::string(name) +
                              "' (expected bicubic[:a], bilinear, nearest or zero)");
}

Tensor downscale(const Tensor& y, const ResampleSpec& spec) {
  spec.validate();
  require_divisible(y, spec, "downscale");
  const std::size_t sy = spec.scale_y();
  const std::size_t sx = spec.scale_x();
  const Tensor blurred = convolve(y, spec.blur, spec.boundary);
  Tensor out({y.height() / sy, y.width() / sx, y.channels()});
  for (std::size_t r = 0; r < out.height(); ++r)
    for (std::size_t c = 0; c < out.width(); ++c)
      for (std::size_t ch = 0; ch < out.channels(); ++ch) out(r, c, ch) = blurred(r * sy, c * sx, ch);
  return out;
}

Tensor upscale(const Tensor& x, const ResampleSpec& spec) {
  spec.validate();
  const std::size_t sy = spec.scale_y();
  const std::size_t sx = spec.scale_x();
  const Kernel& p = spec.interp;
  // Extend the coarse grid far enough that every tap lands on the canvas.
  const std::size_t my = (p.rows() + static_cast<std::size_t>(std::abs(p.anchor_row()))) / sy + 2;
  const std::size_t mx = (p.cols() + static_cast<std::size_t>(std::abs(p.anchor_col()))) / sx + 2;
  const std::size_t eh = x.height() + 2 * my;
  const std::size_t ew = x.width() + 2 * mx;
  Tensor canvas({eh * sy, ew * sx, x.channels()});
  for (std::size_t i = 0; i < eh; ++i) {
    const std::ptrdiff_t si = map_boundary(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(my),
                                           x.height(), spec.boundary);
    if (si < 0) continue;
    for (std::size_t j = 0; j < ew; ++j) {
      const std::ptrdiff_t sj = map_boundary(static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(mx),
                                             x.width(), spec.boundary);
      if (sj < 0) continue;
      for (std::size_t ch = 0; ch < x.channels(); ++ch) {
        canvas(i * sy, j * sx, ch) = x(static_cast<std::size_t>(si), static_cast<std::size_t>(sj), ch);
      }
    }
  }
  const Tensor filtered = convolve(canvas, p, BoundaryRule::zero_pad);
  Tensor out({x.height() * sy, x.width() * sx, x.channels()});
  for (std::size_t r = 0; r < out.height(); ++r)
    for (std::size_t c = 0; c < out.width(); ++c)
      for (std::size_t ch = 0; ch < out.channels(); ++ch)
        out(r, c, ch) = filtered(r + my * sy, c + mx * sx, ch);
  return out;
}

Tensor multi_level_downscale(const Tensor& y, const ResampleSpec& spec, int levels) {
  if (levels < 1) throw std::invalid_argument("levels must be >= 1, got " + std::to_string(levels));
  std::size_t fy = 1, fx = 1;
  for (int l = 0; l < levels; ++l) {
    fy *= spec.scale_y();
    fx *= spec.scale_x();
  }
  if (y.height() % fy != 0 || y.width() % fx != 0) {
    throw std::invalid_argument("multi_level_downscale: dims " + to_string(y.dims()) + " not divisible by " +
                                std::to_string(fy) + "x" + std::to_string(fx) + " for " +
                                std::to_string(levels) + " levels");
  }
  Tensor out = downscale(y, spec);
  for (int l = 1; l < levels; ++l) out = downscale(out, spec);
  return out;
}

Tensor pad_to_multiple(const Tensor& y, std::size_t multiple_y, std::size_t multiple_x, BoundaryRule rule) {
  if (multiple_y == 0 || multiple_x == 0) throw std::invalid_argument("pad multiple must be positive");
  const std::size_t h = (y.height() + multiple_y - 1) / multiple_y * multiple_y;
  const std::size_t w = (y.width() + multiple_x - 1) / multiple_x * multiple_x;
  Tensor out({h, w, y.channels()});
  for (std::size_t r = 0; r < h; ++r) {
    const std::ptrdiff_t sr = map_boundary(static_cast<std::ptrdiff_t>(r), y.height(), rule);
    if (sr < 0) continue;
    for (std::size_t c = 0; c < w; ++c) {
      const std::ptrdiff_t sc = map_boundary(static_cast<std::ptrdiff_t>(c), y.width(), rule);
      if (sc < 0) continue;
      for (std::size_t ch = 0; ch < y.channels(); ++ch)
        out(r, c, ch) = y(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc), ch);
    }
  }
  return out;
}

SparseOperator operator_matrix(const ResampleSpec& spec, Direction direction, Dims in_dims, std::size_t cap) {
  spec.validate();
  const std::size_t sy = spec.scale_y();
  const std::size_t sx = spec.scale_x();
  const std::size_t nc = in_dims.channels;
  std::vector<Triplet> entries;

  if (direction == Direction::down) {
    if (in_dims.height % sy != 0 || in_dims.width % sx != 0) {
      throw std::invalid_argument("operator_matrix: dims " + to_string(in_dims) + " not divisible by scale");
    }
    const Dims out_dims{in_dims.height / sy, in_dims.width / sx, nc};
    check_cap(out_dims.size(), in_dims.size(), cap);
    const Kernel& g = spec.blur;
    for (std::size_t i = 0; i < out_dims.height; ++i) {
      for (std::size_t j = 0; j < out_dims.width; ++j) {
        for (std::size_t a = 0; a < g.rows(); ++a) {
          const std::ptrdiff_t r = map_boundary(static_cast<std::ptrdiff_t>(i * sy) - static_cast<std::ptrdiff_t>(a) +
                                                    g.anchor_row(), in_dims.height, spec.boundary);
          if (r < 0) continue;
          for (std::size_t b = 0; b < g.cols(); ++b) {
            const std::ptrdiff_t c = map_boundary(static_cast<std::ptrdiff_t>(j * sx) - static_cast<std::ptrdiff_t>(b) +
                                                      g.anchor_col(), in_dims.width, spec.boundary);
            if (c < 0) continue;
            for (std::size_t ch = 0; ch < nc; ++ch) {
              entries.push_back({(i * out_dims.width + j) * nc + ch,
                                 (static_cast<std::size_t>(r) * in_dims.width + static_cast<std::size_t>(c)) * nc + ch,
                                 g(a, b)});
            }
          }
        }
      }
    }
    return SparseOperator(out_dims.size(), in_dims.size(), entries);
  }

  const Dims out_dims{in_dims.height * sy, in_dims.width * sx, nc};
  check_cap(out_dims.size(), in_dims.size(), cap);
  const Kernel& p = spec.interp;
  const auto psy = static_cast<std::ptrdiff_t>(sy);
  const auto psx = static_cast<std::ptrdiff_t>(sx);
  for (std::size_t y = 0; y < out_dims.height; ++y) {
    for (std::size_t x = 0; x < out_dims.width; ++x) {
      for (std::size_t a = 0; a < p.rows(); ++a) {
        const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(a) + p.anchor_row();
        if (m % psy != 0) continue;
        const std::ptrdiff_t i = map_boundary(floor_div(m, psy), in_dims.height, spec.boundary);
        if (i < 0) continue;
        for (std::size_t b = 0; b < p.cols(); ++b) {
          const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x) - static_cast<std::ptrdiff_t>(b) + p.anchor_col();
          if (n % psx != 0) continue;
          const std::ptrdiff_t j = map_boundary(floor_div(n, psx), in_dims.width, spec.boundary);
          if (j < 0) continue;
          for (std::size_t ch = 0; ch < nc; ++ch) {
            entries.push_back({(y * out_dims.width + x) * nc + ch,
                               (static_cast<std::size_t>(i) * in_dims.width + static_cast<std::size_t>(j)) * nc + ch,
                               p(a, b)});
          }
        }
      }
    }
  }
  return SparseOperator(out_dims.size(), in_dims.size(), entries);
}

double contraction_norm(const SparseOperator& down, const SparseOperator& up) {
  if (down.rows() != up.cols() || down.cols() != up.rows()) {
    throw std::invalid_argument("contraction_norm: D is " + std::to_string(down.rows()) + "x" +
                                std::to_string(down.cols()) + " but U is " + std::to_string(up.rows()) + "x" +
                                std::to_string(up.cols()) + "; DU must be square");
  }
  const SparseOperator du = down.compose(up);
  const std::size_t n = du.rows();
  std::vector<double> col_sum(n, 0.0);
  std::vector<bool> diag_seen(n, false);
  for (const Triplet& t : du.entries()) {
    if (t.row == t.col) {
      col_sum[t.col] += std::abs(1.0 - t.value);
      diag_seen[t.col] = true;
    } else {
      col_sum[t.col] += std::abs(t.value);
    }
  }
  double norm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!diag_seen[j]) col_sum[j] += 1.0;
    norm = std::max(norm, col_sum[j]);
  }
  return norm;
}

double certify(const ResampleSpec& spec, Dims fine_dims, std::size_t cap) {
  const SparseOperator d = operator_matrix(spec, Direction::down, fine_dims, cap);
  const Dims coarse{fine_dims.height / spec.scale_y(), fine_dims.width / spec.scale_x(), fine_dims.channels};
  const SparseOperator u = operator_matrix(spec, Direction::up, coarse, cap);
  return contraction_norm(d, u);
}

}  // namespace mgbp
