#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "poreflow/multistage.hpp"
#include "poreflow/optimizer.hpp"

namespace poreflow::io {

using json = nlohmann::json;

enum class Command { Simulate, Optimize, Multistage, Sweep, Feasibility };

const char* to_string(Command c);
Command parse_command(const std::string& name);

struct RunConfig {
  Command command = Command::Simulate;
  FeedSpec feed;
  std::optional<ShapeFunction> shape;
  SimConfig sim;
  std::optional<ProblemSpec> problem;
  std::optional<SearchConfig> search;
  std::optional<StagePlan> plan;
  std::vector<std::vector<StageSpec>> candidates;
  double target = 0.99;
  std::string out_dir;
  std::string prefix;
};

// Throws Error(InvalidConfig) on missing sections, wrong types or unknown keys.
RunConfig parse_config(const json& doc, Command command);
RunConfig load_config(const std::string& path, Command command);

// 9 significant digits
std::string format_number(double v);

std::vector<std::string> timeseries_header(std::size_t n_species);
void write_timeseries_csv(std::ostream& os, const SimRecord& rec);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
Table read_numeric_csv(std::istream& is);

// a(x,t) at t = 0, the recorded step nearest t_f/2, and t_f
struct ProfileSnapshots {
  std::vector<double> times;
  std::vector<std::vector<double>> radii;
};
ProfileSnapshots snapshots(const SimRecord& rec);
void write_profile_csv(std::ostream& os, const ProfileSnapshots& snaps);

json summary_json(const SimRecord& rec, const FeedSpec& feed, const SimConfig& cfg);
json optimization_json(const OptimizationResult& res, const ProblemSpec& problem, const SearchConfig& search);

void write_multistage_csv(std::ostream& os, const StagePlan& plan, const MultiStageResult& res);
void write_ledger_csv(std::ostream& os, const std::vector<std::pair<std::string, const MultiStageResult*>>& runs);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

struct CliOptions {
  Command command = Command::Simulate;
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool emit_profile = false;
};

enum ExitCode { kOk = 0, kConfigError = 2, kSimulationError = 3, kInfeasibleSearch = 4 };

// Runs one command; diagnostics go to `diag`, never into the data files.
int run_command(const CliOptions& opts, std::ostream& diag);

}  // namespace poreflow::io
