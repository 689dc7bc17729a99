#include "poreflow/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace poreflow {

const char* to_string(Problem p) {
  switch (p) {
    case Problem::P1: return "P1";
    case Problem::P2: return "P2";
    case Problem::P3: return "P3";
  }
  return "?";
}

const char* to_string(Method m) { return m == Method::Slow ? "slow" : "fast"; }

void ProblemSpec::validate() const {
  feed.validate();
  sim.validate();
  if (kind == Problem::P3) {
    if (sim.mode != Mode::ConstantFlux) throw Error(ErrorKind::InvalidConfig, "P3 needs constant flux");
    if (method == Method::Fast)
      throw Error(ErrorKind::UnsupportedMethod, "no fast objective exists for constant flux");
  } else if (sim.mode != Mode::ConstantPressure) {
    throw Error(ErrorKind::InvalidConfig, "P1/P2 need constant pressure");
  }
  if (!(R >= 0.0 && R <= 1.0)) throw Error(ErrorKind::InvalidConfig, "R outside [0,1]");
  if (target >= feed.size()) throw Error(ErrorKind::InvalidConfig, "target species out of range");
  for (const auto& b : removal_bounds)
    if (b.species >= feed.size()) throw Error(ErrorKind::InvalidConfig, "removal bound species out of range");
}

namespace {

double initial_violation(const std::vector<double>& r0, const ProblemSpec& problem) {
  double v = std::max(0.0, problem.R - r0[0]);
  for (const auto& b : problem.removal_bounds) {
    double r = r0[b.species];
    v += std::max(0.0, b.min - r) + std::max(0.0, r - b.max);
  }
  return v;
}

// Shape or initial-removal screening shared by both methods; returns true if the
// point is already known to be infeasible.
bool screen(const ShapeFunction& shape, const ProblemSpec& problem, Evaluation& e) {
  auto check = validate_shape(shape, problem.sim.n_x);
  if (!check.feasible) {
    e.feasible = false;
    e.violation = 1.0 + check.violation;
    return true;
  }
  if (check.min_value <= kClosureFloor) {
    // admissible shape, but born closed on the simulation grid
    e.feasible = false;
    e.violation = 1.0 + kClosureFloor - check.min_value;
    return true;
  }
  e.R0 = initial_removal(shape, problem.feed, problem.sim);
  e.violation = initial_violation(e.R0, problem);
  e.feasible = e.violation == 0.0;
  return !e.feasible;
}

}  // namespace

Evaluation evaluate_slow(const ShapeFunction& shape, const ProblemSpec& problem, bool full) {
  problem.validate();
  Evaluation e;
  bool rejected = screen(shape, problem, e);
  if (e.R0.empty() || (rejected && !full)) return e;

  const std::size_t t = problem.target;
  if (problem.kind == Problem::P3) {
    SimRecord rec;
    try {
      rec = run_constant_flux(shape, problem.feed, problem.sim);
    } catch (const Error& err) {
      if (err.kind() != ErrorKind::InfeasibleStart) throw;
      PoreProfile p = make_profile(shape, problem.sim.n_x);
      e.feasible = false;
      e.violation += inlet_pressure_constant_flux(p) / problem.sim.p_init_max - 1.0;
      return e;
    }
    e.simulated = true;
    e.J = rec.c_acm[t].back() * rec.j_final();
    double shortfall = std::max(0.0, problem.R_hat - rec.Rbar[0].back());
    if (rec.termination == Termination::PressureCap || rec.termination == Termination::PoreClosed) {
      double ratio = rec.p0.back() / rec.p0.front();
      shortfall += std::max(ratio / problem.sim.p_ratio_max - 1.0, 1e-12);
      // a truncated run has not processed the requested feed volume
      shortfall += 1.0 - static_cast<double>(rec.steps() - 1) / std::max<long>(problem.sim.n_steps, 1);
    }
    e.violation += shortfall;
    e.feasible = e.violation == 0.0;
    return e;
  }

  auto rec = run_constant_pressure(shape, problem.feed, problem.sim);
  e.simulated = true;
  const double j = rec.j_final();
  const double c = rec.c_acm[t].back();
  e.J = problem.kind == Problem::P1 ? problem.w1 * j + problem.w2 * c : c * j;
  return e;
}

Evaluation evaluate_fast(const ShapeFunction& shape, const ProblemSpec& problem) {
  if (problem.kind == Problem::P3)
    throw Error(ErrorKind::UnsupportedMethod, "no fast objective exists for constant flux");
  problem.validate();
  Evaluation e;
  screen(shape, problem, e);
  if (e.R0.empty()) return e;
  InitialRates r;
  try {
    r = initial_rates(shape, problem.feed, problem.sim);
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::PoreClosed) throw;
    // the pore closes within the first step: no usable rates
    e.feasible = false;
    e.violation += 1.0;
    return e;
  }
  e.simulated = true;
  const std::size_t t = problem.target;
  if (problem.kind == Problem::P1)
    e.J = problem.w1 * (r.u0 + r.du0) + problem.w2 * (r.c_ins0[t] + r.dc_ins0[t]);
  else
    e.J = r.u0 * r.c_ins0[t];
  return e;
}

Evaluation evaluate(const ShapeFunction& shape, const ProblemSpec& problem, bool full) {
  return problem.method == Method::Fast ? evaluate_fast(shape, problem) : evaluate_slow(shape, problem, full);
}

bool better(const Evaluation& a, const Evaluation& b) {
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) return a.J > b.J;
  return a.violation < b.violation;
}

std::vector<std::pair<double, double>> SearchConfig::resolved_bounds() const {
  if (degree < 1) throw Error(ErrorKind::InvalidConfig, "degree must be >= 1");
  if (!bounds.empty()) {
    if (static_cast<int>(bounds.size()) != degree + 1)
      throw Error(ErrorKind::InvalidConfig, "bounds must have degree + 1 entries");
    for (const auto& [lo, hi] : bounds)
      if (!(lo <= hi)) throw Error(ErrorKind::InvalidConfig, "bound with lo > hi");
    return bounds;
  }
  std::vector<std::pair<double, double>> b(degree + 1, {-1.0, 1.0});
  b[0] = {0.0, 1.0};
  return b;
}

namespace {

struct Vertex {
  std::vector<double> x;
  Evaluation e;
};

class Simplex {
 public:
  Simplex(const ProblemSpec& problem, std::vector<std::pair<double, double>> bounds)
      : problem_(problem), bounds_(std::move(bounds)) {}

  Vertex make(std::vector<double> x) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::clamp(x[k], bounds_[k].first, bounds_[k].second);
    ++evaluations;
    Vertex v{x, evaluate(ShapeFunction(x), problem_, false)};
    return v;
  }

  long evaluations = 0;

 private:
  const ProblemSpec& problem_;
  std::vector<std::pair<double, double>> bounds_;
};

bool same_score(const Evaluation& a, const Evaluation& b, double tol) {
  if (a.feasible != b.feasible) return false;
  if (a.feasible) return std::abs(a.J - b.J) <= tol * (1.0 + std::abs(a.J));
  return std::abs(a.violation - b.violation) <= tol;
}

}  // namespace

LocalOptimum local_search(const std::vector<double>& start, const ProblemSpec& problem,
                          const SearchConfig& search) {
  auto bounds = search.resolved_bounds();
  const std::size_t n = bounds.size();
  if (start.size() != n) throw Error(ErrorKind::InvalidInput, "start has wrong dimension");
  for (std::size_t k = 0; k < n; ++k)
    if (start[k] < bounds[k].first || start[k] > bounds[k].second)
      throw Error(ErrorKind::InvalidInput, "start outside bounds");

  Simplex sx(problem, bounds);
  std::vector<Vertex> v;
  v.push_back(sx.make(start));
  for (std::size_t k = 0; k < n; ++k) {
    auto x = start;
    double step = search.initial_step * (bounds[k].second - bounds[k].first);
    if (step == 0.0) step = search.initial_step;
    x[k] = start[k] + step > bounds[k].second ? start[k] - step : start[k] + step;
    v.push_back(sx.make(x));
  }

  auto order = [&] {
    std::stable_sort(v.begin(), v.end(), [](const Vertex& a, const Vertex& b) { return better(a.e, b.e); });
  };
  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i)
      for (std::size_t k = 0; k < n; ++k) d = std::max(d, std::abs(v[i].x[k] - v[0].x[k]));
    return d;
  };

  int it = 0;
  order();
  for (; it < search.max_iterations; ++it) {
    if (same_score(v.front().e, v.back().e, search.objective_tol)) break;
    if (diameter() < search.step_tol) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k) centroid[k] += v[i].x[k] / static_cast<double>(n);
    auto along = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t k = 0; k < n; ++k) x[k] = centroid[k] + coef * (v.back().x[k] - centroid[k]);
      return x;
    };

    Vertex r = sx.make(along(-1.0));
    if (better(r.e, v.front().e)) {
      Vertex ex = sx.make(along(-2.0));
      v.back() = better(ex.e, r.e) ? std::move(ex) : std::move(r);
    } else if (better(r.e, v[n - 1].e)) {
      v.back() = std::move(r);
    } else {
      bool outside = better(r.e, v.back().e);
      Vertex c = sx.make(along(outside ? -0.5 : 0.5));
      bool accept = outside ? !better(r.e, c.e) : better(c.e, v.back().e);
      if (accept) {
        v.back() = std::move(c);
      } else {
        for (std::size_t i = 1; i < v.size(); ++i) {
          std::vector<double> x(n);
          for (std::size_t k = 0; k < n; ++k) x[k] = v[0].x[k] + 0.5 * (v[i].x[k] - v[0].x[k]);
          v[i] = sx.make(x);
        }
      }
    }
    order();
  }

  LocalOptimum out;
  out.start = start;
  out.coefficients = v.front().x;
  out.eval = v.front().e;
  out.iterations = it;
  out.evaluations = sx.evaluations;
  return out;
}

std::vector<std::vector<double>> start_points(const SearchConfig& search) {
  if (search.n_starts < 1) throw Error(ErrorKind::InvalidConfig, "n_starts must be >= 1");
  auto bounds = search.resolved_bounds();
  std::vector<std::vector<double>> pts;
  pts.reserve(search.n_starts);
  int first = 0;
  if (search.start) {
    pts.push_back(*search.start);
    first = 1;
  }
  for (int i = first; i < search.n_starts; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(search.seed), static_cast<std::uint32_t>(search.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 gen(seq);
    std::vector<double> x(bounds.size());
    for (std::size_t k = 0; k < bounds.size(); ++k) {
      double unit = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      x[k] = bounds[k].first + unit * (bounds[k].second - bounds[k].first);
    }
    pts.push_back(std::move(x));
  }
  return pts;
}

namespace {

// (d1, d0, d2, d3, ...) lexicographic
bool tie_before(const std::vector<double>& a, const std::vector<double>& b) {
  auto key = [](const std::vector<double>& c) {
    std::vector<double> k;
    if (c.size() > 1) k.push_back(c[1]);
    k.push_back(c[0]);
    for (std::size_t i = 2; i < c.size(); ++i) k.push_back(c[i]);
    return k;
  };
  return key(a) < key(b);
}

}  // namespace

OptimizationResult multistart(const ProblemSpec& problem, const SearchConfig& search) {
  problem.validate();
  auto t0 = std::chrono::steady_clock::now();
  auto starts = start_points(search);
  std::vector<LocalOptimum> optima(starts.size());

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= starts.size() || failed) return;
      try {
        optima[i] = local_search(starts[i], problem, search);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  int threads = std::max(1, search.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  OptimizationResult out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < optima.size(); ++i) {
    out.evaluations += optima[i].evaluations;
    if (i == 0) continue;
    const auto& a = optima[i];
    const auto& b = optima[best];
    if (better(a.eval, b.eval) ||
        (!better(b.eval, a.eval) && tie_before(a.coefficients, b.coefficients)))
      best = i;
  }
  if (optima[best].eval.feasible) {
    // local optima within tie_tolerance (relative) of the maximum count as equal
    const double floor = optima[best].eval.J - search.tie_tolerance * std::abs(optima[best].eval.J);
    for (std::size_t i = 0; i < optima.size(); ++i)
      if (optima[i].eval.feasible && optima[i].eval.J >= floor &&
          tie_before(optima[i].coefficients, optima[best].coefficients))
        best = i;
  }
  out.best = ShapeFunction(optima[best].coefficients);
  out.best_eval = optima[best].eval;
  out.feasible = out.best_eval.feasible;
  out.optima = std::move(optima);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace poreflow
