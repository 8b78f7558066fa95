#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "mgbp/backprojection.hpp"
#include "mgbp/cli.hpp"
#include "mgbp/image_io.hpp"
#include "support/oracles.hpp"

using namespace mgbp;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mgbp");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mgbp_cli_unit";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double field(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + "=");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 1));
}

fs::path random_input(const std::string& name, Dims d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const fs::path p = scratch(name);
  write_image(oracle::random_tensor(d, rng), p);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"analyze", "--scale", "1"}).code == cli::kExitUsage);
  CHECK(run({"unfold", "--mu", "-1"}).code == cli::kExitUsage);
  CHECK(run({"downscale", "--input", "/nonexistent.png", "--output", scratch("o.png").string()}).code == cli::kExitUsage);
  CHECK(run({"analyze", "--bogus"}).code == cli::kExitUsage);
  CHECK(run({"visualize", "--output", scratch("v").string(), "--pixels", "1;2"}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("downscale writes the library result") {
  const fs::path in = random_input("d_in.mgt", {16, 16, 1}, 1);
  for (int levels : {1, 2}) {
    const fs::path out = scratch("d_out" + std::to_string(levels) + ".mgt");
    const Run r = run({"downscale", "--input", in.string(), "--output", out.string(), "--levels", std::to_string(levels)});
    REQUIRE(r.code == 0);
    const Tensor lib = multi_level_downscale(read_image(in), default_spec(2), levels);
    CHECK(read_image(out).dims() == Dims{16u >> levels, 16u >> levels, 1});
    std::ostringstream bytes;
    write_tensor(lib, bytes);
    CHECK(slurp(out) == bytes.str());
  }
}

TEST_CASE("upscale methods") {
  const fs::path in = random_input("u_in.mgt", {8, 8, 1}, 2);
  const Tensor x = read_image(in);
  const ResampleSpec spec = default_spec(2);

  const fs::path bic = scratch("bic.mgt");
  REQUIRE(run({"upscale", "--input", in.string(), "--output", bic.string(), "--method", "bicubic", "--mu", "5"}).code == 0);
  CHECK(read_image(bic) == upscale(x, spec));

  const fs::path m = scratch("m.mgt"), i = scratch("i.mgt");
  REQUIRE(run({"upscale", "--input", in.string(), "--output", m.string(), "--method", "mgbp", "--levels", "2", "--mu", "3"}).code == 0);
  REQUIRE(run({"upscale", "--input", in.string(), "--output", i.string(), "--method", "ibp", "--levels", "2", "--mu", "3"}).code == 0);
  CHECK(max_abs_diff(read_image(m), read_image(i)) <= 1e-13);

  const fs::path deep = scratch("deep.mgt");
  REQUIRE(run({"upscale", "--input", in.string(), "--output", deep.string(), "--levels", "3"}).code == 0);
  CHECK(fs::exists(scratch("deep_y2.mgt")));
  CHECK(read_image(scratch("deep_y3.mgt")) == read_image(deep));
  CHECK(read_image(deep) == mgbp::mgbp(x, spec, 2, 3).stack.level(3));

  CHECK(run({"upscale", "--input", in.string(), "--output", m.string(), "--method", "lanczos"}).code == cli::kExitUsage);
}

TEST_CASE("upscale trace ratios stay below the analyzed norm") {
  const fs::path in = random_input("t_in.mgt", {8, 8, 1}, 3);
  const Run a = run({"analyze", "--grid", "16x16"});
  const double c = field(a.out, "contraction_norm");
  const fs::path trace = scratch("trace.csv");
  const Run u = run({"upscale", "--input", in.string(), "--output", scratch("t_out.mgt").string(), "--method", "ibp",
                     "--mu", "10", "--trace", trace.string()});
  REQUIRE(u.code == 0);
  CHECK(field(u.out, "contraction_norm") == c);
  std::istringstream csv(slurp(trace));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "iter,level,error_l1,ratio");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    const auto last = line.rfind(',');
    if (last + 1 < line.size()) CHECK(std::stod(line.substr(last + 1)) <= c + 1e-9);
  }
  CHECK(rows == 11);
}

TEST_CASE("analyze examples") {
  const Run exact = run({"analyze", "--grid", "1x16", "--kernel-g", "box", "--kernel-p", "nearest"});
  CHECK(field(exact.out, "contraction_norm") == 0.0);
  CHECK(exact.out.find("certified=yes") != std::string::npos);
  const Run zero = run({"analyze", "--kernel-p", "zero"});
  CHECK(field(zero.out, "contraction_norm") == 1.0);
  CHECK(zero.out.find("certified=no") != std::string::npos);
  CHECK(zero.code == 0);
  CHECK(run({"analyze", "--kernel-p", "zero", "--require-certified"}).code == cli::kExitContract);

  const Run def = run({"analyze"});
  const auto d = oracle::dense_from_tensor_path(default_spec(2), Direction::down, {16, 16, 1});
  const auto u = oracle::dense_from_tensor_path(default_spec(2), Direction::up, {8, 8, 1});
  CHECK(std::abs(field(def.out, "contraction_norm") - oracle::identity_minus_norm1(oracle::multiply(d, u))) <= 1e-12);
}

TEST_CASE("visualize an identity net and a zero-bias net") {
  const fs::path manifest = scratch("idnet.json");
  save_network(ConvNet(1, {LayerSpec::conv(1, 1, 1, 1, {1.0}, {0.0})}), manifest);
  const fs::path out = scratch("vis_id");
  fs::remove_all(out);
  const Run r = run({"visualize", "--net", manifest.string(), "--grid", "6x6", "--pixels", "2,3,0", "--output", out.string()});
  REQUIRE(r.code == 0);
  CHECK(read_image(out / "filter_r2_c3_ch0.png") == delta({6, 6, 1}, {2, 3, 0}));
  CHECK(max_abs(read_image(out / "residual.png")) == 0.0);
  CHECK(slurp(out / "atlas.txt").find("residual 0 0\n") != std::string::npos);
}

TEST_CASE("metrics and unfold") {
  const fs::path in = random_input("met.png", {8, 8, 3}, 4);
  const Run m = run({"metrics", "--input", in.string(), "--input", in.string()});
  REQUIRE(m.code == 0);
  CHECK(m.out.find("psnr_db=inf") != std::string::npos);
  CHECK(m.out.find("ssim=1\n") != std::string::npos);

  const Run v = run({"unfold", "--mu", "1", "--levels", "3"});
  CHECK(v.out.find("2 upscale\n1 downscale\n2 correct\n3 upscale\n2 downscale\n1 downscale\n2 correct\n3 correct\n") !=
        std::string::npos);
  const Run w = run({"unfold", "--mu", "2", "--levels", "4"});
  CHECK(w.out.find("matches_recursion=yes") != std::string::npos);
  CHECK(w.out.find("bp_calls k=4 j=1 count=8 expected=8") != std::string::npos);
}

TEST_CASE("repeated runs write identical files") {
  const fs::path in = random_input("det.png", {8, 8, 1}, 5);
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = scratch("det" + std::to_string(rep));
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run({"upscale", "--input", in.string(), "--output", (dir / "y.png").string(), "--levels", "3", "--trace",
                 (dir / "t.csv").string()}).code == 0);
    REQUIRE(run({"visualize", "--seed", "3", "--spectrum", "--pixels", "1,1;4,4", "--output", (dir / "vis").string()}).code == 0);
  }
  for (const auto& e : fs::recursive_directory_iterator(scratch("det0"))) {
    if (!e.is_regular_file()) continue;
    const fs::path twin = scratch("det1") / fs::relative(e.path(), scratch("det0"));
    CHECK(slurp(e.path()) == slurp(twin));
  }
}
