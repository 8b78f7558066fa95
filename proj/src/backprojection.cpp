#include "mgbp/backprojection.hpp"

#include <iomanip>
#include <ostream>
#include <string>

namespace mgbp {

void ConvergenceTrace::add(int iteration, int level, double error_l1) {
  TraceRecord rec{iteration, level, error_l1, std::nullopt};
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->level != level) continue;
    if (it->error_l1 > 1e-300) rec.ratio = error_l1 / it->error_l1;
    break;
  }
  records.push_back(rec);
}

std::vector<TraceRecord> ConvergenceTrace::level_records(int level) const {
  std::vector<TraceRecord> out;
  for (const TraceRecord& r : records)
    if (r.level == level) out.push_back(r);
  return out;
}

void ConvergenceTrace::write_csv(std::ostream& out) const {
  out << "iter,level,error_l1,ratio\n" << std::setprecision(17);
  for (const TraceRecord& r : records) {
    out << r.iteration << "," << r.level << "," << r.error_l1 << ",";
    if (r.ratio) out << *r.ratio;
    out << "\n";
  }
}

const Tensor& LevelStack::level(std::size_t k) const {
  if (k < 1 || k > levels_.size()) {
    throw std::out_of_range("level stack holds " + std::to_string(levels_.size()) + " levels, requested " +
                            std::to_string(k));
  }
  return levels_[k - 1];
}

OperatorPair OperatorPair::classic(const ResampleSpec& spec) {
  OperatorPair ops;
  ops.down = [spec](const Tensor& u) { return downscale(u, spec); };
  ops.up = [spec](const Tensor& y, const Tensor& d) { return upscale(y - d, spec); };
  ops.tag = OperatorTag::classic_subtract;
  return ops;
}

OperatorPair OperatorPair::network(ConvNet down_net, ConvNet up_net) {
  OperatorPair ops;
  ops.down = [net = std::move(down_net)](const Tensor& u) { return forward(net, u); };
  ops.up = [net = std::move(up_net)](const Tensor& y, const Tensor& d) {
    if (net.input_channels() != y.channels() + d.channels()) {
      throw std::invalid_argument("concatenation feeds " + std::to_string(y.channels() + d.channels()) +
                                  " features but upscale network layer 0 expects " +
                                  std::to_string(net.input_channels()));
    }
    return forward(net, concat_channels(y, d));
  };
  ops.tag = OperatorTag::network_concat;
  return ops;
}

std::string_view to_string(ScheduleAction action) {
  switch (action) {
    case ScheduleAction::upscale: return "upscale";
    case ScheduleAction::downscale: return "downscale";
    case ScheduleAction::correct: return "correct";
  }
  return "?";
}

namespace {

const OperatorPair& pick(std::span<const OperatorPair> ops, int k) {
  if (ops.empty()) throw std::invalid_argument("no operator pairs supplied");
  if (ops.size() == 1) return ops[0];
  const auto idx = static_cast<std::size_t>(k - 2);
  if (k < 2 || idx >= ops.size()) {
    throw std::out_of_range("no operator pair for level " + std::to_string(k) + " (have " +
                            std::to_string(ops.size()) + ")");
  }
  return ops[idx];
}

void check_mu_levels(int mu, int levels) {
  if (mu < 0) throw std::invalid_argument("mu must be >= 0, got " + std::to_string(mu));
  if (levels < 1) throw std::invalid_argument("levels must be >= 1, got " + std::to_string(levels));
}

}  // namespace

Tensor bp_step(Tensor u, int k, int mu, const LevelStack& stack, std::span<const OperatorPair> ops,
               RecursionLog* log, const StepObserver* observer) {
  if (k < 1) throw std::invalid_argument("bp_step level must be >= 1, got " + std::to_string(k));
  if (log) log->bp_calls.push_back(k);
  if (k == 1) return u;
  if (stack.depth() < static_cast<std::size_t>(k - 1)) {
    throw std::invalid_argument("bp_step at level " + std::to_string(k) + " needs " + std::to_string(k - 1) +
                                " stacked levels, have " + std::to_string(stack.depth()));
  }
  const OperatorPair& op = pick(ops, k);
  const Tensor& target = stack.level(static_cast<std::size_t>(k - 1));
  for (int step = 1; step <= mu; ++step) {
    if (log) log->actions.push_back({k - 1, ScheduleAction::downscale});
    const Tensor d = bp_step(op.down(u), k - 1, mu, stack, ops, log, observer);
    u += op.up(target, d);
    if (log) log->actions.push_back({k, ScheduleAction::correct});
    if (observer && *observer) (*observer)(k, step, u);
  }
  return u;
}

IbpResult ibp(const Tensor& x, const Tensor& y0, const ResampleSpec& spec, int iters) {
  if (iters < 0) throw std::invalid_argument("iters must be >= 0, got " + std::to_string(iters));
  if (y0.height() != x.height() * spec.scale_y() || y0.width() != x.width() * spec.scale_x() ||
      y0.channels() != x.channels()) {
    throw std::invalid_argument("ibp: initial estimate " + to_string(y0.dims()) + " is not " + to_string(x.dims()) +
                                " scaled by " + std::to_string(spec.scale));
  }
  IbpResult res{y0, {}};
  Tensor e = x - downscale(res.image, spec);
  res.trace.add(0, 2, l1_norm(e));
  for (int t = 1; t <= iters; ++t) {
    res.image += upscale(e, spec);
    e = x - downscale(res.image, spec);
    res.trace.add(t, 2, l1_norm(e));
  }
  return res;
}

MgbpResult mgbp(const Tensor& x, const ResampleSpec& spec, int mu, int levels, RecursionLog* log) {
  check_mu_levels(mu, levels);
  const OperatorPair ops[] = {OperatorPair::classic(spec)};
  MgbpResult res{LevelStack(x), {}};
  int outer = 0;
  const StepObserver observer = [&](int k, int step, const Tensor& u) {
    if (k == outer) res.trace.add(step, k, mismatch_error(x, u, spec, k - 1));
  };
  for (int k = 2; k <= levels; ++k) {
    outer = k;
    if (log) {
      log->level_starts.push_back(log->bp_calls.size());
      log->actions.push_back({k, ScheduleAction::upscale});
    }
    Tensor u = upscale(res.stack.back(), spec);
    res.trace.add(0, k, mismatch_error(x, u, spec, k - 1));
    res.stack.push(bp_step(std::move(u), k, mu, res.stack, ops, log, &observer));
  }
  return res;
}

double mismatch_error(const Tensor& x, const Tensor& y, const ResampleSpec& spec, int levels) {
  const Tensor down = multi_level_downscale(y, spec, levels);
  if (down.dims() != x.dims()) {
    throw std::invalid_argument("mismatch_error: D^L y has dims " + to_string(down.dims()) + " but x has " +
                                to_string(x.dims()));
  }
  return l1_norm(x - down);
}

namespace {

void unfold_bp(int k, int mu, std::vector<ScheduleEntry>& out) {
  if (k <= 1) return;
  for (int step = 0; step < mu; ++step) {
    out.push_back({k - 1, ScheduleAction::downscale});
    unfold_bp(k - 1, mu, out);
    out.push_back({k, ScheduleAction::correct});
  }
}

}  // namespace

std::vector<ScheduleEntry> unfold_schedule(int mu, int levels) {
  check_mu_levels(mu, levels);
  std::vector<ScheduleEntry> out;
  for (int k = 2; k <= levels; ++k) {
    out.push_back({k, ScheduleAction::upscale});
    unfold_bp(k, mu, out);
  }
  return out;
}

std::size_t expected_bp_calls(int mu, int k, int j) {
  if (j < 1 || j > k) return 0;
  std::size_t n = 1;
  for (int i = 0; i < k - j; ++i) n *= static_cast<std::size_t>(mu);
  return n;
}

void write_schedule(std::span<const ScheduleEntry> schedule, std::ostream& out) {
  for (const ScheduleEntry& e : schedule) out << e.level << " " << to_string(e.action) << "\n";
}

LevelStack mgbp_generic(const Tensor& x, std::span<const OperatorPair> ops, const ConvNet& analysis,
                        const ConvNet& synthesis, int mu, int levels, RecursionLog* log) {
  check_mu_levels(mu, levels);
  LevelStack latent(forward(analysis, x));
  for (int k = 2; k <= levels; ++k) {
    if (log) {
      log->level_starts.push_back(log->bp_calls.size());
      log->actions.push_back({k, ScheduleAction::upscale});
    }
    const Tensor& prev = latent.back();
    Tensor u = pick(ops, k).up(prev, Tensor(prev.dims()));
    latent.push(bp_step(std::move(u), k, mu, latent, ops, log));
  }
  LevelStack out(forward(synthesis, latent.level(1)));
  for (std::size_t k = 2; k <= latent.depth(); ++k) out.push(forward(synthesis, latent.level(k)));
  return out;
}

}  // namespace mgbp
