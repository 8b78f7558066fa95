#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mgbp/tensor.hpp"

namespace mgbp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitContract = 3;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  std::string command;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output;
  int scale = 2;
  int levels = 2;
  int mu = 2;
  std::string method = "mgbp";
  std::string boundary = "replicate-edge";
  std::string kernel_g = "gaussian";
  std::string kernel_p = "bicubic";
  std::string grid = "16x16";
  std::filesystem::path net;
  std::string pixels;
  std::filesystem::path trace;
  bool spectrum = false;
  bool row_view = false;
  std::uint64_t seed = 0;
  bool require_certified = false;
};

/// "r,c,ch;r,c,ch;..." (ch may be omitted, defaulting to 0).
std::vector<Index3> parse_pixels(const std::string& text);
/// "HxW".
std::pair<std::size_t, std::size_t> parse_grid(const std::string& text);

/// Range checks and path checks; throws UsageError.
void validate(const RunConfig& cfg);

int cmd_downscale(const RunConfig& cfg, std::ostream& out);
int cmd_upscale(const RunConfig& cfg, std::ostream& out);
int cmd_analyze(const RunConfig& cfg, std::ostream& out);
int cmd_visualize(const RunConfig& cfg, std::ostream& out);
int cmd_metrics(const RunConfig& cfg, std::ostream& out);
int cmd_unfold(const RunConfig& cfg, std::ostream& out);

/// Parses argv-style arguments (args[0] is the program name), dispatches and
/// maps failures to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mgbp::cli
