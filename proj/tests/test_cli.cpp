#include <doctest.h>

#include "approx.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "wealthdyn/io.hpp"
#include "wealthdyn/synthetic.hpp"
#include "wealthdyn/tax.hpp"

using namespace wealthdyn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "wealthdyn_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Run {
  int code;
  std::string err;
};

Run cli(const std::string& args) {
  const fs::path err = workdir() / "stderr.txt";
  const std::string cmd = std::string(WEALTHDYN_CLI) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_file(err)};
}

fs::path outdir(const std::string& name) {
  const fs::path d = workdir() / name;
  fs::create_directories(d);
  return d;
}

const char* kZeroConfig = R"(# zero dynamics
[grid]
lower_asinh = 0
bin_width = 0.25
n_bins = 40
[simulation]
dt = 0.1
horizon = 2
output_every = 1
n_particles = 20000
n_runs = 1
[model]
kind = "linear"
)";

const char* kSmallConfig = R"([grid]
lower_asinh = 0
bin_width = 0.25
n_bins = 24
[simulation]
dt = 0.05
horizon = 30
start_time = 1960
[estimate]
break_year = 1975
n_draws = 20
)";

// time -> masses
std::map<double, std::vector<double>> snapshots_by_time(const fs::path& p) {
  const CsvTable t = load_csv(p.string());
  std::map<double, std::vector<double>> out;
  for (const auto& r : t.rows) out[r[t.column("time")]].push_back(r[t.column("mass")]);
  return out;
}

}  // namespace

TEST_CASE("exit codes and error reporting") {
  const fs::path bad = workdir() / "bad.toml";
  write_file(bad, "[grid]\nbin_width = 0.5\ncolour = 1\n");
  const fs::path zero = workdir() / "zero.toml";
  write_file(zero, kZeroConfig);

  Run r = cli("");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err).at("error") == "usage");
  CHECK(cli("--bogus synth").code == 2);
  CHECK(cli("tax").code == 2);
  CHECK(cli("tax laffer --rate-grid 0:x:1").code == 2);
  CHECK(cli("estimate --panel /nonexistent/panel.csv").code == 2);

  r = cli("--config " + bad.string() + " tax laffer");
  CHECK(r.code == 2);
  CHECK(json::parse(r.err).at("detail").get<std::string>().find("line 3") != std::string::npos);

  r = cli("--config " + zero.string() + " --out " + outdir("noseed").string() + " simulate");
  CHECK(r.code == 2);
  CHECK(r.err.find("--seed") != std::string::npos);

  // No behavioural response: a module error, not a usage error.
  r = cli("--out " + outdir("mech").string() + " tax optimum");
  CHECK(r.code == 1);
  CHECK(json::parse(r.err).at("error") == "computation");
}

TEST_CASE("simulate with zero dynamics reproduces the input") {
  const fs::path zero = workdir() / "zero.toml";
  write_file(zero, kZeroConfig);
  for (const std::string solver : {"particle", "pde"}) {
    const fs::path out = outdir("zero_" + solver);
    REQUIRE(cli("--config " + zero.string() + " --seed 3 --out " + out.string() + " simulate --solver " + solver).code == 0);
    const auto snaps = snapshots_by_time(out / "snapshots.csv");
    REQUIRE(snaps.size() == 3);
    for (const auto& [t, m] : snaps) CHECK(m == snaps.begin()->second);
    const json manifest = json::parse(read_file(out / "manifest.json"));
    CHECK(manifest.at("config_hash") == fnv1a_hex(read_file(zero)));
    CHECK(manifest.at("seed") == 3);
  }
}

TEST_CASE("tax commands delegate to the library") {
  const fs::path out = outdir("laffer");
  REQUIRE(cli("--out " + out.string() + " tax laffer --rate-grid 0:0.3:0.1 --epsilon 1 --eta 1").code == 0);
  const CsvTable t = load_csv((out / "laffer.csv").string());
  REQUIRE(t.rows.size() == 4);
  const ParetoBaseline b;
  TaxPolicy p = TaxPolicy::linear(0.0, 600.0, 1.0, 1.0);
  const auto curve = laffer_curve(p, b.snapshot(), b.environment(), {0.0, 0.1, 0.2, 0.30000000000000004});
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(t.rows[k][t.column("rate")] == curve[k].rate);
    CHECK(t.rows[k][t.column("revenue_static")] == curve[k].revenue_static);
    CHECK(t.rows[k][t.column("revenue_long_run")] == curve[k].revenue_long_run);
  }
  CHECK(t.rows[0][1] == 0.0);

  const fs::path est = outdir("estate");
  REQUIRE(cli("--out " + est.string() + " tax estate-compare --rates 0:1:0.5").code == 0);
  const CsvTable e = load_csv((est / "estate_compare.csv").string());
  CHECK(e.rows[0][e.column("alpha_estate")] == rel(1.5).epsilon(1e-10));
  CHECK(std::abs(e.rows[2][e.column("alpha_estate")] - 1.6514) < 1e-3);
}

TEST_CASE("synth, estimate, decompose and phase pipeline") {
  const fs::path cfg = workdir() / "small.toml";
  write_file(cfg, kSmallConfig);
  const fs::path out = outdir("pipeline");
  const std::string common = "--config " + cfg.string() + " --seed 11 --out " + out.string();
  REQUIRE(cli(common + " synth --horizon 30").code == 0);
  REQUIRE(cli(common + " estimate --panel " + (out / "panel_exact.csv").string()).code == 0);

  const CsvTable truth = load_csv((out / "truth.csv").string());
  const CsvTable prof = load_csv((out / "profile.csv").string());
  REQUIRE(truth.rows.size() == prof.rows.size());
  for (std::size_t i = 2; i < 14; ++i) {
    const auto& pr = prof.rows[i];
    CHECK(pr[prof.column("c_pre")] == rel(truth.rows[i][truth.column("c")]).epsilon(0.01));
    CHECK(pr[prof.column("c_pre_lo")] <= pr[prof.column("c_pre")]);
    CHECK(pr[prof.column("c_pre_hi")] >= pr[prof.column("c_pre")]);
  }
  const std::string first = read_file(out / "profile.csv");
  REQUIRE(cli(common + " estimate --panel " + (out / "panel_exact.csv").string()).code == 0);
  CHECK(read_file(out / "profile.csv") == first);

  REQUIRE(cli(common + " decompose --panel " + (out / "panel_exact.csv").string() + " --profile " +
              (out / "profile.csv").string() + " --p 0.9")
              .code == 0);
  const json d = json::parse(read_file(out / "decomposition.json"));
  double sum = 0.0;
  for (const char* k : {"drift", "mobility", "mobility_gradient", "events"})
    for (const auto& [label, v] : d.at(k).items()) sum += v.get<double>();
  CHECK(std::abs(sum - d.at("total").get<double>()) < 1e-9);

  REQUIRE(cli(common + " phase --panel " + (out / "panel_exact.csv").string()).code == 0);
  CHECK(load_csv((out / "lines.csv").string()).rows.size() > 10);

  const fs::path cf = outdir("counterfactual");
  REQUIRE(cli("--config " + cfg.string() + " --seed 4 --out " + cf.string() + " counterfactual --panel " +
              (out / "panel_exact.csv").string() + " --profile " + (out / "profile.csv").string() +
              " --freeze consumption --reference 1960:1974 --start 1975 --particles 5000 --runs 1")
              .code == 0);
  const CsvTable shares = load_csv((cf / "shares.csv").string());
  CHECK(shares.rows.size() == 31);
  CHECK(shares.rows[0][shares.column("benchmark_top1")] == shares.rows[0][shares.column("counterfactual_top1")]);
}
