#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "mgbp/backprojection.hpp"
#include "mgbp/convnet.hpp"
#include "mgbp/freeze.hpp"
#include "mgbp/metrics.hpp"
#include "mgbp/resample.hpp"

namespace py = pybind11;
using namespace mgbp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// 2D arrays are single-channel images; 3D arrays are H x W x C.
Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw std::invalid_argument("expected a 2D or 3D array");
  const Dims d{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
               a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1};
  return Tensor(d, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out({t.height(), t.width(), t.channels()});
  std::memcpy(out.mutable_data(), t.data().data(), t.size() * sizeof(double));
  return out;
}

ResampleSpec make_spec(int scale, const std::string& kernel_g, const std::string& kernel_p,
                       const std::string& boundary, bool horizontal_only) {
  ResampleSpec spec;
  spec.scale = scale;
  spec.horizontal_only = horizontal_only;
  spec.blur = parse_blur_kernel(kernel_g, scale, horizontal_only);
  spec.interp = parse_interp_kernel(kernel_p, scale, horizontal_only);
  spec.boundary = parse_boundary(boundary);
  spec.validate();
  return spec;
}

#define SPEC_ARGS                                                                                        \
  py::arg("scale") = 2, py::arg("kernel_g") = "gaussian", py::arg("kernel_p") = "bicubic",              \
  py::arg("boundary") = "replicate-edge", py::arg("horizontal_only") = false

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-grid back-projection and activation-freeze filter analysis";

  py::register_exception<ContractViolation>(m, "ContractViolation");

  m.def(
      "downscale",
      [](const Array& y, int scale, const std::string& g, const std::string& p, const std::string& b, bool h,
         int levels) { return to_array(multi_level_downscale(to_tensor(y), make_spec(scale, g, p, b, h), levels)); },
      py::arg("y"), SPEC_ARGS, py::arg("levels") = 1);
  m.def(
      "upscale",
      [](const Array& x, int scale, const std::string& g, const std::string& p, const std::string& b, bool h) {
        return to_array(upscale(to_tensor(x), make_spec(scale, g, p, b, h)));
      },
      py::arg("x"), SPEC_ARGS);
  m.def(
      "ibp",
      [](const Array& x, int iters, int scale, const std::string& g, const std::string& p, const std::string& b,
         bool h) {
        const ResampleSpec spec = make_spec(scale, g, p, b, h);
        const Tensor xt = to_tensor(x);
        IbpResult r = ibp(xt, upscale(xt, spec), spec, iters);
        std::vector<double> errors;
        for (const auto& rec : r.trace.records) errors.push_back(rec.error_l1);
        return py::make_tuple(to_array(r.image), errors);
      },
      py::arg("x"), py::arg("iters"), SPEC_ARGS);
  m.def(
      "mgbp",
      [](const Array& x, int mu, int levels, int scale, const std::string& g, const std::string& p,
         const std::string& b, bool h) {
        const MgbpResult r = ::mgbp::mgbp(to_tensor(x), make_spec(scale, g, p, b, h), mu, levels);
        py::list stack;
        for (std::size_t k = 1; k <= r.stack.depth(); ++k) stack.append(to_array(r.stack.level(k)));
        return stack;
      },
      py::arg("x"), py::arg("mu"), py::arg("levels"), SPEC_ARGS);
  m.def(
      "contraction_norm",
      [](std::size_t height, std::size_t width, int scale, const std::string& g, const std::string& p,
         const std::string& b, bool h) { return certify(make_spec(scale, g, p, b, h), {height, width, 1}); },
      py::arg("height"), py::arg("width"), SPEC_ARGS);
  m.def(
      "analyze",
      [](std::size_t height, std::size_t width, int scale, const std::string& g, const std::string& p,
         const std::string& b, bool h) {
        const double c = certify(make_spec(scale, g, p, b, h), {height, width, 1});
        return py::make_tuple(c, c < 1.0);
      },
      py::arg("height"), py::arg("width"), SPEC_ARGS);
  m.def(
      "unfold_schedule",
      [](int mu, int levels) {
        std::vector<std::pair<int, std::string>> out;
        for (const auto& e : unfold_schedule(mu, levels)) out.emplace_back(e.level, std::string(to_string(e.action)));
        return out;
      },
      py::arg("mu"), py::arg("levels"));

  py::class_<ConvNet>(m, "ConvNet")
      .def_property_readonly("input_channels", &ConvNet::input_channels)
      .def_property_readonly("output_channels", &ConvNet::output_channels)
      .def("__len__", &ConvNet::size)
      .def("save", [](const ConvNet& n, const std::string& path) { save_network(n, path); })
      .def_static("load", [](const std::string& path) { return load_network(path); });

  m.def(
      "random_network",
      [](std::uint64_t seed, std::size_t linear_layers, bool leaky, bool mix_strided) {
        RandomNetOptions opt;
        opt.linear_layers = linear_layers;
        opt.leaky = leaky;
        opt.mix_strided = mix_strided;
        return random_network(seed, opt);
      },
      py::arg("seed") = 0, py::arg("linear_layers") = 3, py::arg("leaky") = false, py::arg("mix_strided") = true);
  m.def("zero_biases", &zero_biases, py::arg("net"));
  m.def(
      "forward", [](const ConvNet& n, const Array& x) { return to_array(forward(n, to_tensor(x))); }, py::arg("net"),
      py::arg("x"));
  m.def(
      "effective_filter",
      [](const ConvNet& n, const Array& x, std::size_t row, std::size_t col, std::size_t ch) {
        return to_array(effective_filter(freeze(n, to_tensor(x)), {row, col, ch}));
      },
      py::arg("net"), py::arg("x"), py::arg("row"), py::arg("col"), py::arg("ch") = 0);
  m.def(
      "effective_residual",
      [](const ConvNet& n, const Array& x) { return to_array(effective_residual(freeze(n, to_tensor(x)))); },
      py::arg("net"), py::arg("x"));
  m.def(
      "explicit_fr",
      [](const ConvNet& n, const Array& x) {
        const ExplicitFR fr = explicit_fr(n, to_tensor(x));
        py::array_t<double> f({fr.filter.rows(), fr.filter.cols()});
        auto fm = f.mutable_unchecked<2>();
        for (Eigen::Index i = 0; i < fr.filter.rows(); ++i)
          for (Eigen::Index j = 0; j < fr.filter.cols(); ++j) fm(i, j) = fr.filter(i, j);
        std::vector<double> r(fr.residual.data(), fr.residual.data() + fr.residual.size());
        return py::make_tuple(f, py::array_t<double>(r.size(), r.data()));
      },
      py::arg("net"), py::arg("x"));
  m.def(
      "filter_spectrum", [](const Array& f) { return to_array(filter_spectrum(to_tensor(f))); }, py::arg("filter"));
  m.def(
      "psnr", [](const Array& x, const Array& y) { return psnr(to_tensor(x), to_tensor(y)); }, py::arg("x"),
      py::arg("y"));
  m.def(
      "ssim",
      [](const Array& x, const Array& y, bool windowed) {
        return ssim(to_tensor(x), to_tensor(y), windowed ? SsimMode::windowed : SsimMode::global);
      },
      py::arg("x"), py::arg("y"), py::arg("windowed") = false);
}
