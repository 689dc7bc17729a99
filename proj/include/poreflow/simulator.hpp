#pragma once

#include <limits>
#include <vector>

#include "poreflow/model.hpp"

namespace poreflow {

enum class Mode { ConstantPressure, ConstantFlux };

enum class Termination {
  FluxThreshold,
  StepCount,
  PressureCap,
  StepCap,
  VolumeReached,
  PoreClosed,
};

const char* to_string(Mode mode);
const char* to_string(Termination t);

struct SimConfig {
  Mode mode = Mode::ConstantPressure;
  int n_x = 200;
  double dt = 1e-3;
  double max_da = 1e-3;       // per-step cap on max_k |a_k(t+dt) - a_k(t)|
  double theta = 0.1;         // constant pressure: stop once u <= theta * u(0)
  long n_steps = 1000;        // constant flux: number of steps of size dt
  long max_steps = 200000;    // constant pressure guard
  double p_init_max = 100.0;  // constant flux: p0(0) bound
  double p_ratio_max = 10.0;  // constant flux: p0(t) / p0(0) bound
  bool screening = false;
  bool keep_profiles = false;

  void validate() const;
  static SimConfig constant_flux(long n_steps) {
    SimConfig c;
    c.mode = Mode::ConstantFlux;
    c.n_steps = n_steps;
    return c;
  }
};

struct SimRecord {
  Mode mode = Mode::ConstantPressure;
  std::vector<double> t, u, j, p0;
  // indexed [species][step]
  std::vector<std::vector<double>> c_ins, c_acm, R, Rbar;
  std::vector<double> inlet;
  double u_ref = 0.0;
  PoreProfile initial;
  PoreProfile final_profile;
  Termination termination = Termination::StepCount;
  std::vector<std::vector<double>> profiles;  // filled when keep_profiles is set

  std::size_t steps() const { return t.size(); }
  std::size_t species() const { return inlet.size(); }
  double t_final() const { return t.back(); }
  double j_final() const { return j.back(); }
};

struct Metrics {
  double t_f = 0.0;
  double j = 0.0;
  std::vector<double> c_acm;
  std::vector<double> Rbar;
  std::vector<double> purity;
  double yield = 0.0;  // c_acm of species 2 (or 1 if alone) times j
};

struct InitialRates {
  double u0 = 0.0;
  double du0 = 0.0;     // analytic
  double du0_fd = 0.0;  // one-step forward difference
  std::vector<double> c_ins0;
  std::vector<double> dc_ins0;
};

SimRecord run_constant_pressure(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg);
SimRecord run_constant_flux(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg);
SimRecord run(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg);

// Resume a constant-pressure run from an arbitrary fouled profile. The run stops when
// u <= theta * u_ref or once the throughput reaches volume_limit.
SimRecord run_from_profile(const PoreProfile& start, const std::vector<double>& clean_radii,
                           const FeedSpec& feed, const std::vector<double>& inlet,
                           const SimConfig& cfg, double u_ref,
                           double volume_limit = std::numeric_limits<double>::infinity());

InitialRates initial_rates(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg);

// Initial removal ratio R_i(0) of every species on the clean profile.
std::vector<double> initial_removal(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg);

Metrics compute_metrics(const SimRecord& record, const std::vector<double>& reference_inlet);
Metrics compute_metrics(const SimRecord& record);

// Two-species purity from removal ratios: k2 = (1-xi)(1-Rbar2) / (xi(1-Rbar1) + (1-xi)(1-Rbar2))
double purity_from_removal(double xi, double rbar1, double rbar2);

}  // namespace poreflow
