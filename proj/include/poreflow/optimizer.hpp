#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "poreflow/simulator.hpp"

namespace poreflow {

enum class Problem { P1, P2, P3 };
enum class Method { Slow, Fast };

const char* to_string(Problem p);
const char* to_string(Method m);

// Extra bound on the initial removal ratio R_i(0) of one species.
struct RemovalBound {
  std::size_t species = 0;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

struct ProblemSpec {
  Problem kind = Problem::P2;
  double w1 = 1.0, w2 = 0.0;
  Method method = Method::Slow;
  double R = 0.99;       // R_1(0) >= R
  double R_hat = 0.98;   // P3: Rbar_1(t_f) >= R_hat
  std::size_t target = 1;  // species whose collected mass is maximized
  std::vector<RemovalBound> removal_bounds;
  SimConfig sim;
  FeedSpec feed;

  void validate() const;
};

struct Evaluation {
  double J = -std::numeric_limits<double>::infinity();
  bool feasible = false;
  double violation = 0.0;
  bool simulated = false;
  std::vector<double> R0;
};

struct SearchConfig {
  int degree = 1;
  std::vector<std::pair<double, double>> bounds;  // per coefficient d_k; empty means defaults
  int n_starts = 1000;
  std::uint64_t seed = 1;
  std::optional<std::vector<double>> start;  // user start; counts as the first of n_starts
  double initial_step = 0.05;  // simplex edge as a fraction of each bound range
  double step_tol = 1e-6;
  double objective_tol = 1e-10;
  int max_iterations = 300;
  double tie_tolerance = 1e-6;  // relative J gap below which optima tie on (d1, d0)
  int threads = 1;

  std::vector<std::pair<double, double>> resolved_bounds() const;
};

struct LocalOptimum {
  std::vector<double> start;
  std::vector<double> coefficients;
  Evaluation eval;
  int iterations = 0;
  long evaluations = 0;
};

struct OptimizationResult {
  ShapeFunction best;
  Evaluation best_eval;
  bool feasible = false;
  std::vector<LocalOptimum> optima;
  long evaluations = 0;
  double wall_seconds = 0.0;
};

// Both return J together with the constraint report. With full = false an infeasible
// initial state is reported without running the simulation (J = -inf).
Evaluation evaluate_slow(const ShapeFunction& shape, const ProblemSpec& problem, bool full = true);
Evaluation evaluate_fast(const ShapeFunction& shape, const ProblemSpec& problem);
Evaluation evaluate(const ShapeFunction& shape, const ProblemSpec& problem, bool full = true);

// true when a ranks strictly ahead of b
bool better(const Evaluation& a, const Evaluation& b);

LocalOptimum local_search(const std::vector<double>& start, const ProblemSpec& problem,
                          const SearchConfig& search);

std::vector<std::vector<double>> start_points(const SearchConfig& search);

OptimizationResult multistart(const ProblemSpec& problem, const SearchConfig& search);

}  // namespace poreflow
