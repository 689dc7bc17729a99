#include "poreflow/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace poreflow::io {

const char* to_string(Command c) {
  switch (c) {
    case Command::Simulate: return "simulate";
    case Command::Optimize: return "optimize";
    case Command::Multistage: return "multistage";
    case Command::Sweep: return "sweep";
    case Command::Feasibility: return "feasibility";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  for (auto c : {Command::Simulate, Command::Optimize, Command::Multistage, Command::Sweep, Command::Feasibility})
    if (name == to_string(c)) return c;
  throw Error(ErrorKind::InvalidConfig, "unknown command '" + name + "'");
}

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) fail(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) fail("unknown key '" + key + "' in " + where);
}

double number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) fail(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

long integer(const json& obj, const char* key, long fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) fail(std::string("'") + key + "' must be an integer");
  return v.get<long>();
}

bool boolean(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) fail(std::string("'") + key + "' must be a boolean");
  return v.get<bool>();
}

std::vector<double> numbers(const json& v, const std::string& what) {
  if (!v.is_array()) fail(what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(what + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Mode parse_mode(const std::string& s) {
  if (s == "constant-pressure") return Mode::ConstantPressure;
  if (s == "constant-flux") return Mode::ConstantFlux;
  fail("mode must be constant-pressure or constant-flux");
}

FeedSpec parse_feed(const json& f) {
  check_keys(f, {"xi", "beta", "lambda1", "lambda", "screening"}, "feed");
  if (!f.contains("xi")) fail("feed.xi is required");
  if (!f.contains("beta")) fail("feed.beta is required");
  auto xi = numbers(f.at("xi"), "feed.xi");
  auto beta = numbers(f.at("beta"), "feed.beta");
  if (xi.empty() || xi.size() != beta.size()) fail("feed.xi and feed.beta must be non-empty and equally long");
  FeedSpec feed = FeedSpec::coupled(xi, beta, number(f, "lambda1", 1.0));
  if (f.contains("lambda")) {
    auto lam = numbers(f.at("lambda"), "feed.lambda");
    if (lam.size() != xi.size()) fail("feed.lambda must match feed.xi in length");
    for (std::size_t i = 0; i < lam.size(); ++i) feed.species[i].lambda = lam[i];
  }
  if (f.contains("screening")) {
    const auto& s = f.at("screening");
    if (!s.is_array() || s.size() != xi.size()) fail("feed.screening must have one entry per species");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i].is_null()) continue;
      check_keys(s[i], {"lambda_clean", "lambda_fouled", "h0"}, "feed.screening entry");
      ScreeningParams p;
      p.lambda_clean = number(s[i], "lambda_clean", feed.species[i].lambda);
      p.lambda_fouled = number(s[i], "lambda_fouled", p.lambda_clean);
      p.h0 = number(s[i], "h0", 1.0);
      feed.species[i].screening = p;
    }
  }
  try {
    feed.validate();
  } catch (const Error& e) {
    fail(std::string("feed: ") + e.what());
  }
  return feed;
}

SimConfig parse_sim(const json* s, Mode mode) {
  SimConfig c;
  c.mode = mode;
  if (s) {
    check_keys(*s, {"n_x", "dt", "max_da", "theta", "n_steps", "max_steps", "p_init_max", "p_ratio_max", "screening"},
               "sim");
    c.n_x = static_cast<int>(integer(*s, "n_x", c.n_x));
    c.dt = number(*s, "dt", c.dt);
    c.max_da = number(*s, "max_da", c.max_da);
    c.theta = number(*s, "theta", c.theta);
    c.n_steps = integer(*s, "n_steps", c.n_steps);
    c.max_steps = integer(*s, "max_steps", c.max_steps);
    c.p_init_max = number(*s, "p_init_max", c.p_init_max);
    c.p_ratio_max = number(*s, "p_ratio_max", c.p_ratio_max);
    c.screening = boolean(*s, "screening", c.screening);
  }
  try {
    c.validate();
  } catch (const Error& e) {
    fail(std::string("sim: ") + e.what());
  }
  return c;
}

ShapeFunction parse_shape(const json& v) {
  auto c = numbers(v, "shape");
  if (c.size() < 2) fail("shape needs at least two coefficients (d0, d1)");
  return ShapeFunction(c);
}

std::size_t species_index(const json& v, std::size_t n, const std::string& what) {
  if (!v.is_number_integer()) fail(what + " must be a 1-based species number");
  long k = v.get<long>();
  if (k < 1 || static_cast<std::size_t>(k) > n) fail(what + " out of range");
  return static_cast<std::size_t>(k - 1);
}

ProblemSpec parse_problem(const json& p, const FeedSpec& feed, const SimConfig& sim) {
  check_keys(p, {"kind", "w", "method", "R", "R_hat", "target", "removal_bounds"}, "problem");
  ProblemSpec spec;
  spec.feed = feed;
  spec.sim = sim;
  std::string kind = p.value("kind", std::string("P2"));
  if (kind == "P1") spec.kind = Problem::P1;
  else if (kind == "P2") spec.kind = Problem::P2;
  else if (kind == "P3") spec.kind = Problem::P3;
  else fail("problem.kind must be P1, P2 or P3");
  if (p.contains("w")) {
    auto w = numbers(p.at("w"), "problem.w");
    if (w.size() != 2) fail("problem.w must have two weights");
    spec.w1 = w[0];
    spec.w2 = w[1];
  }
  std::string method = p.value("method", std::string("slow"));
  if (method == "slow") spec.method = Method::Slow;
  else if (method == "fast") spec.method = Method::Fast;
  else fail("problem.method must be slow or fast");
  spec.R = number(p, "R", spec.R);
  spec.R_hat = number(p, "R_hat", spec.R_hat);
  spec.target = feed.size() > 1 ? 1 : 0;
  if (p.contains("target")) spec.target = species_index(p.at("target"), feed.size(), "problem.target");
  if (p.contains("removal_bounds")) {
    const auto& rb = p.at("removal_bounds");
    if (!rb.is_array()) fail("problem.removal_bounds must be an array");
    for (const auto& b : rb) {
      check_keys(b, {"species", "min", "max"}, "problem.removal_bounds entry");
      if (!b.contains("species")) fail("removal bound needs a species");
      RemovalBound bound;
      bound.species = species_index(b.at("species"), feed.size(), "removal bound species");
      bound.min = number(b, "min", bound.min);
      bound.max = number(b, "max", bound.max);
      spec.removal_bounds.push_back(bound);
    }
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(std::string("problem: ") + e.what());
  }
  return spec;
}

SearchConfig parse_search(const json& s) {
  check_keys(s, {"degree", "bounds", "n_starts", "seed", "start", "step_tol", "objective_tol", "max_iterations",
                 "initial_step", "threads", "tie_tolerance"},
             "search");
  SearchConfig c;
  c.degree = static_cast<int>(integer(s, "degree", c.degree));
  if (s.contains("bounds")) {
    const auto& b = s.at("bounds");
    if (!b.is_array()) fail("search.bounds must be an array of [lo, hi] pairs");
    for (const auto& pair : b) {
      auto v = numbers(pair, "search.bounds entry");
      if (v.size() != 2) fail("search.bounds entries must be [lo, hi]");
      c.bounds.emplace_back(v[0], v[1]);
    }
  }
  c.n_starts = static_cast<int>(integer(s, "n_starts", c.n_starts));
  if (s.contains("seed")) {
    if (!s.at("seed").is_number_unsigned()) fail("search.seed must be a non-negative integer");
    c.seed = s.at("seed").get<std::uint64_t>();
  }
  if (s.contains("start")) c.start = numbers(s.at("start"), "search.start");
  c.step_tol = number(s, "step_tol", c.step_tol);
  c.objective_tol = number(s, "objective_tol", c.objective_tol);
  c.max_iterations = static_cast<int>(integer(s, "max_iterations", c.max_iterations));
  c.initial_step = number(s, "initial_step", c.initial_step);
  c.threads = static_cast<int>(integer(s, "threads", c.threads));
  c.tie_tolerance = number(s, "tie_tolerance", c.tie_tolerance);
  if (!(c.tie_tolerance >= 0.0)) fail("search.tie_tolerance must be >= 0");
  if (c.n_starts < 1) fail("search.n_starts must be >= 1");
  if (c.max_iterations < 1) fail("search.max_iterations must be >= 1");
  try {
    auto bounds = c.resolved_bounds();
    if (c.start) {
      if (c.start->size() != bounds.size()) fail("search.start must have degree + 1 coefficients");
      for (std::size_t k = 0; k < bounds.size(); ++k)
        if ((*c.start)[k] < bounds[k].first || (*c.start)[k] > bounds[k].second) fail("search.start outside bounds");
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidConfig) throw;
    fail(e.what());
  }
  return c;
}

std::vector<StageSpec> parse_stages(const json& v) {
  try {
    if (v.is_string()) return parse_stage_label(v.get<std::string>());
    if (!v.is_array() || v.empty()) fail("stages must be a label string or a non-empty array");
    std::vector<StageSpec> out;
    for (const auto& e : v) {
      StageSpec s;
      if (e.is_number_integer()) {
        s.filters = e.get<int>();
      } else if (e.is_object()) {
        check_keys(e, {"filters", "max_passes"}, "stage");
        s.filters = static_cast<int>(integer(e, "filters", 1));
        s.max_passes = static_cast<int>(integer(e, "max_passes", 0));
      } else {
        fail("stage entries must be integers or {filters, max_passes}");
      }
      if (s.filters < 1 || s.max_passes < 0) fail("stage filter count must be >= 1");
      out.push_back(s);
    }
    return out;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidConfig) throw;
    fail(e.what());
  }
}

StagePlan parse_plan(const json& p) {
  check_keys(p, {"R", "stages", "adaptive", "target", "max_stages", "max_reuse"}, "plan");
  StagePlan plan;
  plan.R = number(p, "R", plan.R);
  plan.adaptive = boolean(p, "adaptive", false);
  if (p.contains("stages")) plan.stages = parse_stages(p.at("stages"));
  else if (plan.adaptive) plan.stages = {StageSpec{}};
  else fail("plan.stages is required unless plan.adaptive is true");
  plan.target = number(p, "target", plan.target);
  plan.max_stages = static_cast<int>(integer(p, "max_stages", plan.max_stages));
  plan.max_reuse = static_cast<int>(integer(p, "max_reuse", plan.max_reuse));
  try {
    plan.validate();
  } catch (const Error& e) {
    fail(std::string("plan: ") + e.what());
  }
  return plan;
}

}  // namespace

RunConfig parse_config(const json& doc, Command command) {
  RunConfig cfg;
  cfg.command = command;
  try {
    if (!doc.is_object()) fail("config must be a JSON object");
    std::set<std::string> allowed{"command", "output", "sim"};
    switch (command) {
      case Command::Simulate: allowed.insert({"mode", "feed", "shape"}); break;
      case Command::Optimize: allowed.insert({"mode", "feed", "problem", "search"}); break;
      case Command::Multistage: allowed.insert({"feed", "shape", "plan"}); break;
      case Command::Sweep: allowed.insert({"feed", "shape", "candidates", "target"}); break;
      case Command::Feasibility: allowed.insert({"shape"}); break;
    }
    check_keys(doc, allowed, "config for '" + std::string(to_string(command)) + "'");
    if (doc.contains("command") && doc.at("command") != to_string(command))
      fail("config is for command '" + doc.at("command").dump() + "'");

    Mode mode = Mode::ConstantPressure;
    if (doc.contains("mode")) {
      mode = parse_mode(doc.at("mode").get<std::string>());
    } else if (command == Command::Optimize && doc.contains("problem") && doc.at("problem").value("kind", "") == "P3") {
      mode = Mode::ConstantFlux;
    }
    cfg.sim = parse_sim(doc.contains("sim") ? &doc.at("sim") : nullptr, mode);

    if (doc.contains("output")) {
      const auto& o = doc.at("output");
      check_keys(o, {"dir", "prefix"}, "output");
      cfg.out_dir = o.value("dir", std::string());
      cfg.prefix = o.value("prefix", std::string());
    }

    if (command != Command::Feasibility) {
      if (!doc.contains("feed")) fail("missing 'feed' section");
      cfg.feed = parse_feed(doc.at("feed"));
    }
    if (command != Command::Optimize) {
      if (!doc.contains("shape")) fail("missing 'shape'");
      cfg.shape = parse_shape(doc.at("shape"));
    }
    switch (command) {
      case Command::Optimize:
        if (!doc.contains("problem")) fail("missing 'problem' section");
        cfg.problem = parse_problem(doc.at("problem"), cfg.feed, cfg.sim);
        cfg.search = parse_search(doc.contains("search") ? doc.at("search") : json::object());
        break;
      case Command::Multistage:
        if (cfg.sim.mode != Mode::ConstantPressure) fail("multistage runs are constant pressure");
        if (!doc.contains("plan")) fail("missing 'plan' section");
        cfg.plan = parse_plan(doc.at("plan"));
        break;
      case Command::Sweep: {
        if (!doc.contains("candidates")) fail("missing 'candidates'");
        const auto& c = doc.at("candidates");
        if (!c.is_array()) fail("candidates must be an array");
        for (const auto& e : c) cfg.candidates.push_back(parse_stages(e));
        if (cfg.candidates.empty()) fail("candidate list is empty");
        cfg.target = number(doc, "target", cfg.target);
        break;
      }
      default: break;
    }
  } catch (const json::exception& e) {
    fail(std::string("malformed value: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path, Command command) {
  std::ifstream in(path);
  if (!in) fail("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail("cannot parse config '" + path + "': " + e.what());
  }
  return parse_config(doc, command);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> timeseries_header(std::size_t n) {
  std::vector<std::string> h{"t", "u", "j", "p0"};
  for (const char* base : {"c_ins_", "c_acm_", "R_", "Rbar_"})
    for (std::size_t i = 1; i <= n; ++i) h.push_back(base + std::to_string(i));
  return h;
}

namespace {

void write_row(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

}  // namespace

void write_timeseries_csv(std::ostream& os, const SimRecord& rec) {
  const std::size_t n = rec.species();
  write_row(os, timeseries_header(n));
  std::vector<std::string> cells;
  for (std::size_t s = 0; s < rec.steps(); ++s) {
    cells = {format_number(rec.t[s]), format_number(rec.u[s]), format_number(rec.j[s]), format_number(rec.p0[s])};
    for (const auto* series : {&rec.c_ins, &rec.c_acm, &rec.R, &rec.Rbar})
      for (std::size_t i = 0; i < n; ++i) cells.push_back(format_number((*series)[i][s]));
    write_row(os, cells);
  }
}

Table read_numeric_csv(std::istream& is) {
  Table t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(is, line)) throw Error(ErrorKind::InvalidInput, "empty CSV");
  t.header = split(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) throw Error(ErrorKind::InvalidInput, "ragged CSV row");
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw Error(ErrorKind::InvalidInput, "non-numeric CSV cell '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

ProfileSnapshots snapshots(const SimRecord& rec) {
  if (rec.profiles.size() != rec.steps() || rec.profiles.empty())
    throw Error(ErrorKind::InvalidInput, "record carries no profile history");
  const double half = 0.5 * rec.t.back();
  std::size_t mid = 0;
  for (std::size_t s = 0; s < rec.steps(); ++s)
    if (std::abs(rec.t[s] - half) < std::abs(rec.t[mid] - half)) mid = s;
  ProfileSnapshots out;
  for (std::size_t s : {std::size_t{0}, mid, rec.steps() - 1}) {
    out.times.push_back(rec.t[s]);
    out.radii.push_back(rec.profiles[s]);
  }
  return out;
}

void write_profile_csv(std::ostream& os, const ProfileSnapshots& snaps) {
  write_row(os, {"x", "a_t0", "a_thalf", "a_tf"});
  const std::size_t n = snaps.radii.front().size();
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::string> cells{format_number(static_cast<double>(k) / static_cast<double>(n - 1))};
    for (const auto& r : snaps.radii) cells.push_back(format_number(r[k]));
    write_row(os, cells);
  }
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json summary_json(const SimRecord& rec, const FeedSpec& feed, const SimConfig& cfg) {
  json s;
  s["mode"] = to_string(rec.mode);
  s["termination"] = to_string(rec.termination);
  s["steps"] = rec.steps();
  s["t_f"] = rec.t.back();
  s["j"] = rec.j.back();
  s["u0"] = rec.u.front();
  s["p0_initial"] = rec.p0.front();
  s["p0_final"] = rec.p0.back();
  json r0 = json::array(), cacm = json::array(), rbar = json::array();
  for (std::size_t i = 0; i < rec.species(); ++i) {
    r0.push_back(rec.R[i].front());
    cacm.push_back(rec.c_acm[i].back());
    rbar.push_back(rec.Rbar[i].back());
  }
  s["R0"] = r0;
  s["c_acm"] = cacm;
  s["Rbar"] = rbar;
  try {
    auto m = compute_metrics(rec);
    s["purity"] = m.purity;
    s["yield"] = m.yield;
  } catch (const Error&) {
    s["purity"] = nullptr;
    s["yield"] = 0.0;
  }
  s["n_x"] = cfg.n_x;
  s["dt"] = cfg.dt;
  s["species"] = feed.size();
  return s;
}

json optimization_json(const OptimizationResult& res, const ProblemSpec& problem, const SearchConfig& search) {
  json j;
  j["problem"] = to_string(problem.kind);
  j["method"] = to_string(problem.method);
  j["seed"] = search.seed;
  j["n_starts"] = search.n_starts;
  j["feasible"] = res.feasible;
  j["coefficients"] = res.best.coefficients;
  j["objective"] = finite_or_null(res.best_eval.J);
  j["violation"] = res.best_eval.violation;
  j["R0"] = res.best_eval.R0;
  j["evaluations"] = res.evaluations;
  json optima = json::array();
  for (const auto& o : res.optima) {
    json e;
    e["start"] = o.start;
    e["coefficients"] = o.coefficients;
    e["objective"] = finite_or_null(o.eval.J);
    e["feasible"] = o.eval.feasible;
    e["violation"] = o.eval.violation;
    e["iterations"] = o.iterations;
    e["evaluations"] = o.evaluations;
    optima.push_back(e);
  }
  j["local_optima"] = optima;
  return j;
}

void write_multistage_csv(std::ostream& os, const StagePlan& plan, const MultiStageResult& res) {
  const std::size_t n = res.final_batch.conc.size();
  std::vector<std::string> h{"R", "M", "n_last"};
  for (std::size_t i = 1; i <= n; ++i) h.push_back("Rbar_" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) h.push_back("k_" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) h.push_back("c_acm_" + std::to_string(i));
  for (const char* c : {"j", "yield_per_filter", "stage1_volume", "discarded", "target_met"}) h.push_back(c);
  write_row(os, h);
  std::vector<std::string> row{format_number(plan.R), std::to_string(res.M),
                               std::to_string(res.stages.back().passes)};
  for (double v : res.Rbar) row.push_back(format_number(v));
  for (double v : res.purity) row.push_back(format_number(v));
  for (double v : res.final_batch.conc) row.push_back(format_number(v));
  row.push_back(format_number(res.final_batch.volume));
  row.push_back(format_number(res.yield_per_filter));
  row.push_back(format_number(res.stage1_volume));
  row.push_back(format_number(res.discarded));
  row.push_back(res.target_met ? "1" : "0");
  write_row(os, row);
}

void write_ledger_csv(std::ostream& os, const std::vector<std::pair<std::string, const MultiStageResult*>>& runs) {
  write_row(os, {"run", "stage", "index", "uses", "processed", "discarded", "exhausted"});
  for (const auto& [name, res] : runs)
    for (const auto& f : res->ledger)
      write_row(os, {name, std::to_string(f.stage), std::to_string(f.index), std::to_string(f.uses),
                     format_number(f.processed), format_number(f.discarded), f.exhausted ? "1" : "0"});
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  std::size_t stages = 0, n = 0;
  for (const auto& r : rows) {
    stages = std::max(stages, r.stages.size());
    n = r.result.final_batch.conc.size();
  }
  std::vector<std::string> h{"rank", "candidate"};
  for (std::size_t m = 1; m <= stages; ++m) h.push_back("l_" + std::to_string(m));
  for (std::size_t m = 1; m <= stages; ++m) h.push_back("uses_" + std::to_string(m));
  for (std::size_t i = 1; i <= n; ++i) h.push_back("c_acm_" + std::to_string(i));
  h.push_back("j");
  h.push_back("yield_per_filter");
  for (std::size_t i = 1; i <= n; ++i) h.push_back("k_" + std::to_string(i));
  for (std::size_t i = 1; i <= n; ++i) h.push_back("Rbar_" + std::to_string(i));
  h.push_back("M");
  h.push_back("target_met");
  write_row(os, h);
  for (std::size_t rank = 0; rank < rows.size(); ++rank) {
    const auto& r = rows[rank];
    std::vector<std::string> row{std::to_string(rank + 1), std::to_string(r.candidate + 1)};
    for (std::size_t m = 0; m < stages; ++m) row.push_back(m < r.stages.size() ? std::to_string(r.stages[m].filters) : "0");
    for (std::size_t m = 0; m < stages; ++m)
      row.push_back(m < r.result.stages.size() ? std::to_string(r.result.stages[m].passes) : "0");
    for (double v : r.result.final_batch.conc) row.push_back(format_number(v));
    row.push_back(format_number(r.result.final_batch.volume));
    row.push_back(format_number(r.result.yield_per_filter));
    for (double v : r.result.purity) row.push_back(format_number(v));
    for (double v : r.result.Rbar) row.push_back(format_number(v));
    row.push_back(std::to_string(r.result.M));
    row.push_back(r.result.target_met ? "1" : "0");
    write_row(os, row);
  }
}

namespace {

bool is_config_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::InvalidParameter:
    case ErrorKind::InvalidInput:
    case ErrorKind::MalformedShape:
    case ErrorKind::UnsupportedMethod: return true;
    default: return false;
  }
}

class Output {
 public:
  Output(const RunConfig& cfg, const CliOptions& opts) {
    dir_ = opts.out_dir.empty() ? (cfg.out_dir.empty() ? std::string(".") : cfg.out_dir) : opts.out_dir;
    prefix_ = cfg.prefix;
    std::filesystem::create_directories(dir_);
  }

  std::ofstream open(const std::string& name) const {
    auto path = std::filesystem::path(dir_) / (prefix_ + name);
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::InvalidConfig, "cannot write '" + path.string() + "'");
    return f;
  }

  void write_json(const std::string& name, const json& j) const {
    auto f = open(name);
    f << j.dump(2) << '\n';
  }

 private:
  std::string dir_, prefix_;
};

int simulate(const RunConfig& cfg, const CliOptions& opts, std::ostream& diag) {
  SimConfig sim = cfg.sim;
  sim.keep_profiles = opts.emit_profile;
  auto rec = run(*cfg.shape, cfg.feed, sim);
  Output out(cfg, opts);
  {
    auto f = out.open("timeseries.csv");
    write_timeseries_csv(f, rec);
  }
  json summary = summary_json(rec, cfg.feed, sim);
  summary["shape"] = cfg.shape->coefficients;
  if (opts.emit_profile) {
    auto snaps = snapshots(rec);
    auto f = out.open("profile.csv");
    write_profile_csv(f, snaps);
    summary["profile_times"] = snaps.times;
  }
  out.write_json("summary.json", summary);
  diag << "simulate: " << rec.steps() << " steps, termination " << to_string(rec.termination) << ", j(t_f) = "
       << format_number(rec.j.back()) << '\n';
  return kOk;
}

int optimize(const RunConfig& cfg, const CliOptions& opts, std::ostream& diag) {
  ProblemSpec problem = *cfg.problem;
  SearchConfig search = *cfg.search;
  if (opts.seed) search.seed = *opts.seed;
  if (opts.threads) search.threads = *opts.threads;
  auto res = multistart(problem, search);
  diag << "optimize: " << search.n_starts << " starts, " << res.evaluations << " evaluations, "
       << format_number(res.wall_seconds) << " s\n";
  Output out(cfg, opts);
  json report = optimization_json(res, problem, search);
  if (!res.feasible) {
    out.write_json("optimum.json", report);
    diag << "optimize: no feasible local optimum; smallest violation " << format_number(res.best_eval.violation)
         << '\n';
    return kInfeasibleSearch;
  }
  SimConfig sim = problem.sim;
  sim.keep_profiles = opts.emit_profile;
  auto rec = run(res.best, problem.feed, sim);
  report["summary"] = summary_json(rec, problem.feed, sim);
  {
    auto f = out.open("timeseries.csv");
    write_timeseries_csv(f, rec);
  }
  if (opts.emit_profile) {
    auto snaps = snapshots(rec);
    auto f = out.open("profile.csv");
    write_profile_csv(f, snaps);
    report["summary"]["profile_times"] = snaps.times;
  }
  out.write_json("optimum.json", report);
  return kOk;
}

int multistage(const RunConfig& cfg, const CliOptions& opts, std::ostream& diag) {
  auto res = run_protocol(*cfg.plan, *cfg.shape, cfg.feed, cfg.sim);
  Output out(cfg, opts);
  {
    auto f = out.open("multistage.csv");
    write_multistage_csv(f, *cfg.plan, res);
  }
  {
    auto f = out.open("ledger.csv");
    write_ledger_csv(f, {{"1", &res}});
  }
  diag << "multistage: M = " << res.M << ", yield/filter = " << format_number(res.yield_per_filter)
       << (res.target_met ? "" : " (target not met)") << '\n';
  return kOk;
}

int sweep(const RunConfig& cfg, const CliOptions& opts, std::ostream& diag) {
  auto rows = sweep_stage_ratios(cfg.candidates, *cfg.shape, cfg.feed, cfg.sim, cfg.target);
  Output out(cfg, opts);
  {
    auto f = out.open("sweep.csv");
    write_sweep_csv(f, rows);
  }
  std::vector<std::pair<std::string, const MultiStageResult*>> runs;
  for (const auto& r : rows) runs.emplace_back(std::to_string(r.candidate + 1), &r.result);
  {
    auto f = out.open("ledger.csv");
    write_ledger_csv(f, runs);
  }
  diag << "sweep: best " << stage_label(rows.front().stages) << " yield/filter "
       << format_number(rows.front().result.yield_per_filter) << '\n';
  return kOk;
}

int feasibility(const RunConfig& cfg, const CliOptions& opts, std::ostream& diag) {
  auto check = validate_shape(*cfg.shape, cfg.sim.n_x);
  json j;
  j["shape"] = cfg.shape->coefficients;
  j["feasible"] = check.feasible;
  j["min"] = {{"value", check.min_value}, {"x", check.min_x}};
  j["max"] = {{"value", check.max_value}, {"x", check.max_x}};
  j["violation"] = check.violation;
  Output out(cfg, opts);
  out.write_json("feasibility.json", j);
  diag << "feasibility: " << (check.feasible ? "feasible" : "infeasible") << '\n';
  return kOk;
}

}  // namespace

int run_command(const CliOptions& opts, std::ostream& diag) {
  RunConfig cfg;
  try {
    cfg = load_config(opts.config, opts.command);
  } catch (const Error& e) {
    diag << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    switch (opts.command) {
      case Command::Simulate: return simulate(cfg, opts, diag);
      case Command::Optimize: return optimize(cfg, opts, diag);
      case Command::Multistage: return multistage(cfg, opts, diag);
      case Command::Sweep: return sweep(cfg, opts, diag);
      case Command::Feasibility: return feasibility(cfg, opts, diag);
    }
  } catch (const Error& e) {
    diag << (is_config_error(e.kind()) ? "config error: " : "simulation error: ") << e.what() << '\n';
    return is_config_error(e.kind()) ? kConfigError : kSimulationError;
  } catch (const std::exception& e) {
    diag << "simulation error: " << e.what() << '\n';
    return kSimulationError;
  }
  return kOk;
}

}  // namespace poreflow::io
