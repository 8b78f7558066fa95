#include "mgbp/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "mgbp/backprojection.hpp"
#include "mgbp/convnet.hpp"
#include "mgbp/freeze.hpp"
#include "mgbp/image_io.hpp"
#include "mgbp/metrics.hpp"
#include "mgbp/resample.hpp"

namespace mgbp::cli {

namespace {

std::size_t parse_size(std::string_view s, const std::string& context) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw UsageError("bad integer '" + std::string(s) + "' in " + context);
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

ResampleSpec build_spec(const RunConfig& cfg, bool horizontal_only) {
  ResampleSpec spec;
  spec.scale = cfg.scale;
  spec.horizontal_only = horizontal_only;
  spec.blur = parse_blur_kernel(cfg.kernel_g, cfg.scale, horizontal_only);
  spec.interp = parse_interp_kernel(cfg.kernel_p, cfg.scale, horizontal_only);
  spec.boundary = parse_boundary(cfg.boundary);
  spec.validate();
  return spec;
}

std::filesystem::path level_path(const std::filesystem::path& output, int k) {
  std::filesystem::path p = output;
  p.replace_filename(output.stem().string() + "_y" + std::to_string(k) + output.extension().string());
  return p;
}

void require_input(const RunConfig& cfg, std::size_t count) {
  if (cfg.inputs.size() != count) {
    throw UsageError(cfg.command + " needs " + std::to_string(count) + " --input path(s), got " +
                     std::to_string(cfg.inputs.size()));
  }
}

void require_output(const RunConfig& cfg) {
  if (cfg.output.empty()) throw UsageError(cfg.command + " needs --output");
}

void emit(const std::string& text, const RunConfig& cfg, std::ostream& out) {
  out << text;
  if (!cfg.output.empty()) write_file_atomic(cfg.output, text);
}

Tensor random_tensor(Dims dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Tensor t(dims);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

std::vector<Index3> parse_pixels(const std::string& text) {
  std::vector<Index3> pixels;
  for (std::string_view item : split(text, ';')) {
    if (item.empty()) continue;
    const auto parts = split(item, ',');
    if (parts.size() < 2 || parts.size() > 3) {
      throw UsageError("pixel '" + std::string(item) + "' must be r,c or r,c,ch");
    }
    Index3 p;
    p.row = parse_size(parts[0], "--pixels");
    p.col = parse_size(parts[1], "--pixels");
    if (parts.size() == 3) p.ch = parse_size(parts[2], "--pixels");
    pixels.push_back(p);
  }
  if (pixels.empty()) throw UsageError("--pixels lists no pixels");
  return pixels;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto parts = split(text, 'x');
  if (parts.size() != 2) throw UsageError("grid '" + text + "' must be HxW");
  const std::size_t h = parse_size(parts[0], "--grid");
  const std::size_t w = parse_size(parts[1], "--grid");
  if (h == 0 || w == 0) throw UsageError("grid '" + text + "' has a zero extent");
  return {h, w};
}

void validate(const RunConfig& cfg) {
  if (cfg.scale < 2) throw UsageError("--scale must be >= 2, got " + std::to_string(cfg.scale));
  if (cfg.levels < 1) throw UsageError("--levels must be >= 1, got " + std::to_string(cfg.levels));
  if (cfg.mu < 0) throw UsageError("--mu must be >= 0, got " + std::to_string(cfg.mu));
  for (const auto& p : cfg.inputs) {
    if (!std::filesystem::is_regular_file(p)) throw UsageError("input '" + p.string() + "' does not exist");
  }
  if (!cfg.net.empty() && !std::filesystem::is_regular_file(cfg.net)) {
    throw UsageError("network manifest '" + cfg.net.string() + "' does not exist");
  }
  for (const auto* p : {&cfg.output, &cfg.trace}) {
    if (p->empty() || cfg.command == "visualize") continue;
    const auto parent = p->parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
      throw UsageError("directory '" + parent.string() + "' does not exist");
    }
  }
  try {
    parse_boundary(cfg.boundary);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int cmd_downscale(const RunConfig& cfg, std::ostream& out) {
  require_input(cfg, 1);
  require_output(cfg);
  const Tensor y = read_image(cfg.inputs[0]);
  const ResampleSpec spec = build_spec(cfg, y.height() == 1);
  const Tensor x = multi_level_downscale(y, spec, cfg.levels);
  write_image(x, cfg.output);
  out << to_string(y.dims()) << " -> " << to_string(x.dims()) << "\n";
  return kExitOk;
}

int cmd_upscale(const RunConfig& cfg, std::ostream& out) {
  require_input(cfg, 1);
  require_output(cfg);
  if (cfg.method != "bicubic" && cfg.method != "ibp" && cfg.method != "mgbp") {
    throw UsageError("--method must be bicubic, ibp or mgbp, got '" + cfg.method + "'");
  }
  const Tensor x = read_image(cfg.inputs[0]);
  const ResampleSpec spec = build_spec(cfg, x.height() == 1);
  out << std::setprecision(17);

  if (cfg.method != "bicubic") {
    const Dims fine{x.height() * spec.scale_y(), x.width() * spec.scale_x(), 1};
    try {
      const double c = certify(spec, fine);
      out << "contraction_norm=" << c << "\n";
      if (cfg.require_certified && !(c < 1.0)) {
        throw ContractViolation("operators not certified: ||I - DU||_1 = " + std::to_string(c));
      }
    } catch (const ContractViolation& e) {
      if (cfg.require_certified) throw;
      out << "contraction_norm=unavailable (" << e.what() << ")\n";
    }
  }

  LevelStack stack(x);
  ConvergenceTrace trace;
  if (cfg.method == "mgbp") {
    MgbpResult res = mgbp(x, spec, cfg.mu, cfg.levels);
    stack = std::move(res.stack);
    trace = std::move(res.trace);
  } else {
    for (int k = 2; k <= cfg.levels; ++k) {
      const Tensor& prev = stack.back();
      if (cfg.method == "bicubic") {
        stack.push(upscale(prev, spec));
        continue;
      }
      IbpResult res = ibp(prev, upscale(prev, spec), spec, cfg.mu);
      for (const TraceRecord& r : res.trace.records) trace.add(r.iteration, k, r.error_l1);
      stack.push(std::move(res.image));
    }
  }

  for (std::size_t k = 2; k <= stack.depth(); ++k) {
    const auto path = level_path(cfg.output, static_cast<int>(k));
    write_image(stack.level(k), path);
    out << "Y" << k << " " << to_string(stack.level(k).dims()) << " " << path.string() << "\n";
  }
  write_image(stack.back(), cfg.output);
  if (!cfg.trace.empty()) {
    std::ostringstream csv;
    trace.write_csv(csv);
    write_file_atomic(cfg.trace, csv.str());
  }
  return kExitOk;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out) {
  const auto [h, w] = parse_grid(cfg.grid);
  const ResampleSpec spec = build_spec(cfg, h == 1);
  const double c = certify(spec, {h, w, 1});
  std::ostringstream text;
  text << std::setprecision(17) << "grid=" << h << "x" << w << "\n"
       << "contraction_norm=" << c << "\n"
       << "certified=" << (c < 1.0 ? "yes" : "no") << "\n";
  emit(text.str(), cfg, out);
  if (cfg.require_certified && !(c < 1.0)) {
    throw ContractViolation("operators not certified: ||I - DU||_1 = " + std::to_string(c) + " >= 1");
  }
  return kExitOk;
}

int cmd_visualize(const RunConfig& cfg, std::ostream& out) {
  require_output(cfg);
  if (cfg.inputs.size() > 1) throw UsageError("visualize takes at most one --input");
  const ConvNet net = cfg.net.empty() ? random_network(cfg.seed) : load_network(cfg.net);
  Tensor x;
  if (cfg.inputs.empty()) {
    const auto [h, w] = parse_grid(cfg.grid);
    x = random_tensor({h, w, net.input_channels()}, cfg.seed);
  } else {
    x = read_image(cfg.inputs[0]);
  }
  const std::vector<Index3> pixels =
      cfg.pixels.empty() ? std::vector<Index3>{{x.height() / 2, x.width() / 2, 0}} : parse_pixels(cfg.pixels);
  const FrozenSystem sys = freeze(net, x);
  AtlasOptions opts;
  opts.spectrum = cfg.spectrum;
  opts.threads = 0;
  opts.row_view = cfg.row_view;
  const auto entries = filter_atlas(sys, pixels, cfg.output, opts);
  out << std::setprecision(17) << "input=" << to_string(x.dims()) << "\n"
      << "output=" << to_string(sys.output_dims()) << "\n"
      << "freeze_equivalence=" << max_abs_diff(forward(net, x), sys.apply(x)) << "\n";
  for (const AtlasEntry& e : entries) out << e.image.filename().string() << " " << e.min << " " << e.max << "\n";
  return kExitOk;
}

int cmd_metrics(const RunConfig& cfg, std::ostream& out) {
  require_input(cfg, 2);
  const Tensor a = read_image(cfg.inputs[0]);
  const Tensor b = read_image(cfg.inputs[1]);
  std::ostringstream text;
  write_report(compare_images(a, b), text);
  emit(text.str(), cfg, out);
  return kExitOk;
}

int cmd_unfold(const RunConfig& cfg, std::ostream& out) {
  const auto schedule = unfold_schedule(cfg.mu, cfg.levels);
  // Instrumented run on a 1x1 signal with trivial operators to count calls.
  OperatorPair trivial;
  trivial.down = [](const Tensor& u) { return u; };
  trivial.up = [](const Tensor& y, const Tensor& d) { return y - d; };
  const OperatorPair ops[] = {trivial};
  RecursionLog log;
  LevelStack stack(Tensor({1, 1, 1}));
  for (int k = 2; k <= cfg.levels; ++k) {
    log.level_starts.push_back(log.bp_calls.size());
    log.actions.push_back({k, ScheduleAction::upscale});
    stack.push(bp_step(stack.back(), k, cfg.mu, stack, ops, &log));
  }
  std::ostringstream text;
  text << "mu=" << cfg.mu << " levels=" << cfg.levels << "\n";
  write_schedule(schedule, text);
  text << "matches_recursion=" << (schedule == log.actions ? "yes" : "no") << "\n";
  for (int k = 2; k <= cfg.levels; ++k) {
    const std::size_t begin = log.level_starts[static_cast<std::size_t>(k - 2)];
    const std::size_t end = k == cfg.levels ? log.bp_calls.size() : log.level_starts[static_cast<std::size_t>(k - 1)];
    for (int j = k; j >= 1; --j) {
      std::size_t count = 0;
      for (std::size_t i = begin; i < end; ++i) count += log.bp_calls[i] == j ? 1 : 0;
      text << "bp_calls k=" << k << " j=" << j << " count=" << count << " expected=" << expected_bp_calls(cfg.mu, k, j)
           << "\n";
    }
  }
  emit(text.str(), cfg, out);
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Multi-grid back-projection super-resolution and deep filter visualization"};
  app.require_subcommand(1);

  auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("--output", cfg.output, "Output path (directory for visualize)");
    sub->add_option("--scale", cfg.scale, "Integer scale factor s >= 2");
    sub->add_option("--boundary", cfg.boundary, "replicate-edge, reflect or zero-pad");
    sub->add_option("--kernel-g", cfg.kernel_g, "Blur: gaussian[:sigma], box, identity");
    sub->add_option("--kernel-p", cfg.kernel_p, "Interpolation: bicubic[:a], bilinear, nearest, zero");
  };

  auto* down = app.add_subcommand("downscale", "Apply the downscaling model L times");
  down->add_option("--input", cfg.inputs, "Input image")->expected(1);
  auto* down_levels = down->add_option("--levels", cfg.levels, "Number of downscaling steps (default 1)");
  add_common(down);

  auto* up = app.add_subcommand("upscale", "Upscale by s^(L-1) with bicubic, ibp or mgbp");
  up->add_option("--input", cfg.inputs, "Low-resolution image")->expected(1);
  up->add_option("--levels", cfg.levels, "Number of levels L (output is s^(L-1) larger)");
  up->add_option("--mu", cfg.mu, "Back-projection steps per level");
  up->add_option("--method", cfg.method, "bicubic, ibp or mgbp");
  up->add_option("--trace", cfg.trace, "Write the convergence trace CSV here");
  up->add_flag("--require-certified", cfg.require_certified, "Exit 3 unless ||I - DU||_1 < 1");
  add_common(up);

  auto* analyze = app.add_subcommand("analyze", "Contraction norm of the down/up pair on a small grid");
  analyze->add_option("--grid", cfg.grid, "High-resolution grid HxW (H = 1 for 1D)");
  analyze->add_flag("--require-certified", cfg.require_certified, "Exit 3 unless ||I - DU||_1 < 1");
  add_common(analyze);

  auto* vis = app.add_subcommand("visualize", "Freeze a network on an input and write filter images");
  vis->add_option("--input", cfg.inputs, "Input image (random when omitted)")->expected(1);
  vis->add_option("--net", cfg.net, "Network manifest (random toy net when omitted)");
  vis->add_option("--pixels", cfg.pixels, "Input pixels \"r,c,ch;...\"");
  vis->add_option("--grid", cfg.grid, "Random input size HxW");
  vis->add_flag("--spectrum", cfg.spectrum, "Also write filter frequency responses");
  vis->add_flag("--row-view", cfg.row_view, "Pixels are output positions; write rows of F");
  vis->add_option("--seed", cfg.seed, "Seed for the random net and input");
  vis->add_option("--output", cfg.output, "Output directory");

  auto* met = app.add_subcommand("metrics", "PSNR, SSIM and L1 between two images");
  met->add_option("--input", cfg.inputs, "Two images")->expected(2);
  met->add_option("--output", cfg.output, "Also write the report here");

  auto* unf = app.add_subcommand("unfold", "Print the MGBP action schedule");
  unf->add_option("--mu", cfg.mu, "Back-projection steps per level");
  unf->add_option("--levels", cfg.levels, "Number of levels");
  unf->add_option("--output", cfg.output, "Also write the schedule here");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  for (CLI::App* sub : {down, up, analyze, vis, met, unf}) {
    if (sub->parsed()) cfg.command = sub->get_name();
  }
  if (down->parsed() && down_levels->count() == 0) cfg.levels = 1;
  try {
    validate(cfg);
    if (cfg.command == "downscale") return cmd_downscale(cfg, out);
    if (cfg.command == "upscale") return cmd_upscale(cfg, out);
    if (cfg.command == "analyze") return cmd_analyze(cfg, out);
    if (cfg.command == "visualize") return cmd_visualize(cfg, out);
    if (cfg.command == "metrics") return cmd_metrics(cfg, out);
    return cmd_unfold(cfg, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "contract violation: " << e.what() << "\n";
    return kExitContract;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace mgbp::cli
