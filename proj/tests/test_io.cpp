#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "poreflow/io.hpp"

using namespace poreflow;
using namespace poreflow::io;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "poreflow_io_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, const json& doc) {
  auto path = dir / "config.json";
  std::ofstream(path) << doc.dump();
  return path.string();
}

int run(Command c, const std::string& config, const fs::path& out, bool profile = false) {
  CliOptions o;
  o.command = c;
  o.config = config;
  o.out_dir = out.string();
  o.emit_profile = profile;
  std::ostringstream diag;
  return run_command(o, diag);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json two_species_feed() { return {{"xi", {0.5, 0.5}}, {"beta", {1.0, 0.1}}}; }

}  // namespace

TEST_CASE("numbers survive a CSV round trip") {
  for (double v : {0.123456789012, 1e-9, 12345.678901, -0.5, 0.0}) {
    double back = std::stod(format_number(v));
    CHECK(std::abs(back - v) <= 1e-8 * std::max(1.0, std::abs(v)));
  }
  CHECK(format_number(1.0 / 0.0) == "inf");
}

TEST_CASE("timeseries columns") {
  CHECK(timeseries_header(1).size() == 8);
  CHECK(timeseries_header(3).size() == 16);
  CHECK(timeseries_header(2)[5] == "c_ins_2");

  auto rec = poreflow::run(ShapeFunction::linear(1.0, -0.5), FeedSpec::two_species(0.5, 0.1), SimConfig{});
  std::stringstream ss;
  write_timeseries_csv(ss, rec);
  auto t = read_numeric_csv(ss);
  CHECK(t.header == timeseries_header(2));
  REQUIRE(t.rows.size() == rec.steps());
  CHECK(t.rows.back()[2] == Approx(rec.j_final()).epsilon(1e-8));
  CHECK(t.rows.back()[7] == Approx(rec.c_acm[1].back()).epsilon(1e-8));
}

TEST_CASE("malformed CSV is rejected") {
  std::stringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_numeric_csv(ragged), Error);
  std::stringstream text("a,b\n1,x\n");
  CHECK_THROWS_AS(read_numeric_csv(text), Error);
}

TEST_CASE("config parsing") {
  json doc = {{"feed", two_species_feed()}, {"shape", {1.0, -0.5}}, {"sim", {{"dt", 2e-3}}}};
  auto cfg = parse_config(doc, Command::Simulate);
  CHECK(cfg.feed.size() == 2);
  CHECK(cfg.sim.dt == 2e-3);
  CHECK(cfg.shape->coefficients == std::vector<double>{1.0, -0.5});

  json p3 = {{"feed", {{"xi", {0.5, 0.5}}, {"beta", {1.0, 0.1}}, {"lambda1", 10.0}}},
             {"problem", {{"kind", "P3"}, {"R", 0.99}}}};
  auto opt = parse_config(p3, Command::Optimize);
  CHECK(opt.sim.mode == Mode::ConstantFlux);
  CHECK(opt.feed.species[1].lambda == Approx(1.0));
  CHECK(opt.problem->target == 1);

  auto expect_config_error = [](const json& d, Command c) {
    try {
      parse_config(d, c);
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidConfig);
    }
  };
  json unknown = doc;
  unknown["sim"]["dtt"] = 1.0;
  expect_config_error(unknown, Command::Simulate);
  expect_config_error(json{{"shape", {1.0, 0.0}}}, Command::Simulate);
  json bad_sum = doc;
  bad_sum["feed"]["xi"] = {0.5, 0.6};
  expect_config_error(bad_sum, Command::Simulate);
  json plan = doc;
  plan["plan"] = {{"stages", "1,1"}};
  expect_config_error(plan, Command::Simulate);
}

TEST_CASE("unknown key and missing file exit with a config error") {
  auto dir = scratch("config_errors");
  json doc = {{"feed", two_species_feed()}, {"shape", {1.0, 0.0}}, {"bogus", 1}};
  CHECK(run(Command::Simulate, write_config(dir, doc), dir) == kConfigError);
  CHECK(run(Command::Simulate, (dir / "nope.json").string(), dir) == kConfigError);
  std::ofstream(dir / "broken.json") << "{\"feed\": ";
  CHECK(run(Command::Simulate, (dir / "broken.json").string(), dir) == kConfigError);
}

TEST_CASE("simulate writes timeseries, summary and profile") {
  auto dir = scratch("simulate");
  auto cfg = write_config(dir, {{"feed", two_species_feed()}, {"shape", {1.0, -0.5}}});
  REQUIRE(run(Command::Simulate, cfg, dir, true) == kOk);
  std::ifstream ts(dir / "timeseries.csv");
  auto t = read_numeric_csv(ts);
  auto summary = json::parse(slurp(dir / "summary.json"));
  CHECK(summary["j"].get<double>() == Approx(t.rows.back()[2]).epsilon(1e-8));
  CHECK(summary["termination"] == "flux-threshold");

  std::ifstream pf(dir / "profile.csv");
  auto prof = read_numeric_csv(pf);
  CHECK(prof.header == std::vector<std::string>{"x", "a_t0", "a_thalf", "a_tf"});
  REQUIRE(prof.rows.size() == 201);
  CHECK(prof.rows[0][1] == Approx(1.0));
  CHECK(prof.rows[200][1] == Approx(0.5));
  for (const auto& r : prof.rows) {
    CHECK(r[2] <= r[1]);
    CHECK(r[3] <= r[2]);
  }
}

TEST_CASE("zero-step constant flux writes a single row") {
  auto dir = scratch("zero_steps");
  auto cfg = write_config(dir, {{"mode", "constant-flux"},
                                {"feed", two_species_feed()},
                                {"shape", {1.0, 0.0}},
                                {"sim", {{"n_steps", 0}}}});
  REQUIRE(run(Command::Simulate, cfg, dir) == kOk);
  std::ifstream ts(dir / "timeseries.csv");
  CHECK(read_numeric_csv(ts).rows.size() == 1);
}

TEST_CASE("a feed that never fouls a stage-1 filter is a simulation error") {
  auto dir = scratch("no_fouling");
  auto cfg = write_config(dir, {{"feed", {{"xi", {0.9, 0.1}}, {"beta", {1.0, 0.1}}, {"lambda1", 0.0}}},
                                {"shape", {1.0, 0.0}},
                                {"sim", {{"max_steps", 50}}},
                                {"plan", {{"stages", "1,1"}}}});
  CHECK(run(Command::Multistage, cfg, dir) == kSimulationError);
}

TEST_CASE("an unsatisfiable search exits with the infeasible code") {
  auto dir = scratch("infeasible");
  json problem = {{"kind", "P2"}, {"method", "fast"}, {"removal_bounds", {{{"species", 2}, {"max", 0.0}}}}};
  auto cfg = write_config(dir, {{"feed", two_species_feed()}, {"problem", problem}, {"search", {{"n_starts", 3}}}});
  CHECK(run(Command::Optimize, cfg, dir) == kInfeasibleSearch);
  auto report = json::parse(slurp(dir / "optimum.json"));
  CHECK(report["feasible"] == false);
}

TEST_CASE("a single start echoes the user start") {
  auto dir = scratch("single_start");
  json problem = {{"kind", "P1"}, {"method", "fast"}, {"w", {1.0, 0.0}}};
  json search = {{"n_starts", 1}, {"start", {0.9, -0.5}}};
  auto cfg = write_config(dir, {{"feed", two_species_feed()}, {"problem", problem}, {"search", search}});
  REQUIRE(run(Command::Optimize, cfg, dir) == kOk);
  auto report = json::parse(slurp(dir / "optimum.json"));
  REQUIRE(report["local_optima"].size() == 1);
  CHECK(report["local_optima"][0]["start"] == json({0.9, -0.5}));
}

TEST_CASE("reruns are byte-identical") {
  auto dir = scratch("rerun");
  json problem = {{"kind", "P1"}, {"method", "fast"}, {"w", {1.0, 0.0}}};
  auto cfg = write_config(dir, {{"feed", two_species_feed()}, {"problem", problem}, {"search", {{"n_starts", 20}}}});
  REQUIRE(run(Command::Optimize, cfg, dir / "a") == kOk);
  REQUIRE(run(Command::Optimize, cfg, dir / "b") == kOk);
  CHECK(slurp(dir / "a" / "optimum.json") == slurp(dir / "b" / "optimum.json"));
  CHECK(slurp(dir / "a" / "timeseries.csv") == slurp(dir / "b" / "timeseries.csv"));
}

TEST_CASE("multistage and sweep outputs") {
  auto dir = scratch("multistage");
  json feed = {{"xi", {0.9, 0.1}}, {"beta", {1.0, 0.1}}};
  auto cfg = write_config(dir, {{"feed", feed}, {"shape", {1.0, 0.0}}, {"plan", {{"stages", "1,1"}}}});
  REQUIRE(run(Command::Multistage, cfg, dir) == kOk);
  std::ifstream ms(dir / "multistage.csv");
  auto t = read_numeric_csv(ms);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][1] == 2);
  CHECK(t.rows[0][2] == 4);
  CHECK(fs::exists(dir / "ledger.csv"));

  auto sdir = scratch("sweep");
  auto scfg = write_config(sdir, {{"feed", feed}, {"shape", {1.0, 0.0}}, {"candidates", {"1,1^4", "6,2,1^2"}}});
  REQUIRE(run(Command::Sweep, scfg, sdir) == kOk);
  std::ifstream sw(sdir / "sweep.csv");
  auto rows = read_numeric_csv(sw).rows;
  REQUIRE(rows.size() == 2);
  // ranked: the 6,2,1 candidate (second in the list) comes first
  CHECK(rows[0][0] == 1);
  CHECK(rows[0][1] == 2);
  CHECK(rows[0][2] == 6);
  CHECK(rows[1][1] == 1);
  CHECK(rows[1][6] == 4);
}

TEST_CASE("feasibility report") {
  auto dir = scratch("feasibility");
  REQUIRE(run(Command::Feasibility, write_config(dir, {{"shape", {1.0, 0.2}}}), dir) == kOk);
  auto j = json::parse(slurp(dir / "feasibility.json"));
  CHECK(j["feasible"] == false);
  CHECK(j["max"]["value"].get<double>() == Approx(1.2));
}
