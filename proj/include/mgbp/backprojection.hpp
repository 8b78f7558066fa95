#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mgbp/convnet.hpp"
#include "mgbp/resample.hpp"
#include "mgbp/tensor.hpp"

namespace mgbp {

struct TraceRecord {
  int iteration = 0;
  int level = 0;
  double error_l1 = 0.0;
  std::optional<double> ratio;  // set only when the previous norm exceeds 1e-300
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
  std::optional<double> contraction_norm;

  /// Appends a record, deriving the ratio from the previous record of the same level.
  void add(int iteration, int level, double error_l1);
  std::vector<TraceRecord> level_records(int level) const;

  /// CSV with header "iter,level,error_l1,ratio"; an empty ratio field when unset.
  void write_csv(std::ostream& out) const;
};

/// Images Y_1 ... Y_L, one per resolution level (1-based access).
class LevelStack {
 public:
  LevelStack() = default;
  explicit LevelStack(Tensor first) { levels_.push_back(std::move(first)); }

  void push(Tensor y) { levels_.push_back(std::move(y)); }
  std::size_t depth() const { return levels_.size(); }
  const Tensor& level(std::size_t k) const;
  const Tensor& back() const { return levels_.back(); }

 private:
  std::vector<Tensor> levels_;
};

enum class OperatorTag { classic_subtract, network_concat };

/// Down/up pair used by the recursion. `up(Y, d)` returns the correction to
/// add at the finer level.
struct OperatorPair {
  std::function<Tensor(const Tensor&)> down;
  std::function<Tensor(const Tensor&, const Tensor&)> up;
  OperatorTag tag = OperatorTag::classic_subtract;

  /// down = downscale, up(Y, d) = upscale(Y - d).
  static OperatorPair classic(const ResampleSpec& spec);
  /// down = forward(down_net, u), up(Y, d) = forward(up_net, [Y, d]).
  static OperatorPair network(ConvNet down_net, ConvNet up_net);
};

enum class ScheduleAction { upscale, downscale, correct };
std::string_view to_string(ScheduleAction action);

struct ScheduleEntry {
  int level = 0;
  ScheduleAction action = ScheduleAction::upscale;
  bool operator==(const ScheduleEntry&) const = default;
};

/// Instrumentation filled by an actual recursion run.
struct RecursionLog {
  std::vector<ScheduleEntry> actions;
  /// Level of every bp_step invocation, in call order.
  std::vector<int> bp_calls;
  /// Index into `bp_calls` where computing Y_k started, for k = 2..L.
  std::vector<std::size_t> level_starts;
};

/// Called after every correction step: (level, step, updated image).
using StepObserver = std::function<void(int, int, const Tensor&)>;

/// One BP^mu_k call. `ops` holds either a single shared pair or one pair per
/// level transition (entry k - 2 links level k - 1 and level k).
Tensor bp_step(Tensor u, int k, int mu, const LevelStack& stack, std::span<const OperatorPair> ops,
               RecursionLog* log = nullptr, const StepObserver* observer = nullptr);

struct IbpResult {
  Tensor image;
  ConvergenceTrace trace;
};

/// Classic iterative back-projection from y0 against the low-resolution x.
IbpResult ibp(const Tensor& x, const Tensor& y0, const ResampleSpec& spec, int iters);

struct MgbpResult {
  LevelStack stack;
  ConvergenceTrace trace;
};

/// Multi-grid back-projection. The trace records ||x - D^(k-1) u||_1 at each
/// outer level k after the initial upscale (iteration 0) and after each of
/// the mu top-level steps.
MgbpResult mgbp(const Tensor& x, const ResampleSpec& spec, int mu, int levels, RecursionLog* log = nullptr);

/// ||x - D^L y||_1.
double mismatch_error(const Tensor& x, const Tensor& y, const ResampleSpec& spec, int levels);

/// Action sequence of the recursion, produced without running it.
std::vector<ScheduleEntry> unfold_schedule(int mu, int levels);

/// bp_step invocations at level j while computing Y_k (mu^(k - j)).
std::size_t expected_bp_calls(int mu, int k, int j);

void write_schedule(std::span<const ScheduleEntry> schedule, std::ostream& out);

/// Recursion with pluggable operators in the latent space of `analysis`:
/// Z_1 = analysis(x), Z_k = BP_k(up(Z_{k-1}, 0)), output level k is synthesis(Z_k).
LevelStack mgbp_generic(const Tensor& x, std::span<const OperatorPair> ops, const ConvNet& analysis,
                        const ConvNet& synthesis, int mu, int levels, RecursionLog* log = nullptr);

}  // namespace mgbp
