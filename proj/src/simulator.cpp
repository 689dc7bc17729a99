#include "poreflow/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace poreflow {

const char* to_string(Mode mode) {
  return mode == Mode::ConstantPressure ? "constant-pressure" : "constant-flux";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::FluxThreshold: return "flux-threshold";
    case Termination::StepCount: return "step-count";
    case Termination::PressureCap: return "pressure-cap";
    case Termination::StepCap: return "step-cap";
    case Termination::VolumeReached: return "volume-reached";
    case Termination::PoreClosed: return "pore-closed";
  }
  return "unknown";
}

void SimConfig::validate() const {
  if (n_x < 2) throw Error(ErrorKind::InvalidConfig, "n_x must be >= 2");
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidConfig, "dt must be positive");
  if (!(max_da > 0.0)) throw Error(ErrorKind::InvalidConfig, "max_da must be positive");
  if (mode == Mode::ConstantPressure) {
    if (!(theta > 0.0 && theta < 1.0)) throw Error(ErrorKind::InvalidConfig, "theta must be in (0,1)");
    if (max_steps < 1) throw Error(ErrorKind::InvalidConfig, "max_steps must be >= 1");
  } else {
    if (n_steps < 0) throw Error(ErrorKind::InvalidConfig, "n_steps must be >= 0");
    if (!(p_init_max > 0.0) || !(p_ratio_max >= 1.0))
      throw Error(ErrorKind::InvalidConfig, "pressure caps");
  }
}

namespace {

struct State {
  double u = 0.0;
  double p0 = 0.0;
  std::vector<std::vector<double>> c;
};

class Recorder {
 public:
  Recorder(SimRecord& rec, std::size_t n_species) : rec_(rec), mass_(n_species, 0.0) {
    rec_.c_ins.assign(n_species, {});
    rec_.c_acm.assign(n_species, {});
    rec_.R.assign(n_species, {});
    rec_.Rbar.assign(n_species, {});
  }

  void accumulate(double de, const State& prev, const State& next) {
    for (std::size_t i = 0; i < mass_.size(); ++i)
      mass_[i] += 0.5 * de * (prev.c[i].back() * prev.u + next.c[i].back() * next.u);
  }

  void push(double t, double j, const State& s) {
    rec_.t.push_back(t);
    rec_.u.push_back(s.u);
    rec_.j.push_back(j);
    rec_.p0.push_back(s.p0);
    for (std::size_t i = 0; i < mass_.size(); ++i) {
      double cin = rec_.inlet[i];
      double out = s.c[i].back();
      double acm = j > 0.0 ? mass_[i] / j : out;
      rec_.c_ins[i].push_back(out);
      rec_.c_acm[i].push_back(acm);
      rec_.R[i].push_back(cin > 0.0 ? std::clamp(1.0 - out / cin, 0.0, 1.0) : 0.0);
      rec_.Rbar[i].push_back(cin > 0.0 ? std::clamp(1.0 - acm / cin, 0.0, 1.0) : 0.0);
    }
  }

 private:
  SimRecord& rec_;
  std::vector<double> mass_;
};

class Model {
 public:
  Model(const FeedSpec& feed, const std::vector<double>& inlet, const std::vector<double>& clean,
        bool screening)
      : feed_(feed), inlet_(inlet), clean_(clean), screening_(screening) {}

  void evaluate(const PoreProfile& p, Mode mode, State& s) {
    if (mode == Mode::ConstantPressure) {
      s.u = flux_constant_pressure(p);
      s.p0 = 1.0;
    } else {
      s.p0 = inlet_pressure_constant_flux(p);
      s.u = 1.0;
    }
    s.c.resize(inlet_.size());
    for (std::size_t i = 0; i < inlet_.size(); ++i)
      concentration_into(p, s.u, feed_.species[i], inlet_[i], screening_ ? &clean_ : nullptr, scratch_, s.c[i]);
  }

  State evaluate(const PoreProfile& p, Mode mode) {
    State s;
    evaluate(p, mode, s);
    return s;
  }

  // fills r with da/dt and returns max |r|
  double rate(const State& s, std::vector<double>& r) const {
    r.assign(clean_.size(), 0.0);
    for (std::size_t i = 0; i < s.c.size(); ++i) {
      const double b = feed_.species[i].beta;
      const auto& c = s.c[i];
      for (std::size_t k = 0; k < r.size(); ++k) r[k] -= b * c[k];
    }
    double m = 0.0;
    for (double x : r) m = std::max(m, -x);
    return m;
  }

 private:
  const FeedSpec& feed_;
  const std::vector<double>& inlet_;
  const std::vector<double>& clean_;
  bool screening_;
  std::vector<double> scratch_;
};

// Returns false if the profile closed.
bool advance(PoreProfile& p, const std::vector<double>& rate, double de) {
  for (std::size_t k = 0; k < p.radii.size(); ++k) {
    double a = p.radii[k] + de * rate[k];
    if (a <= kClosureFloor) {
      a = kClosureFloor;
      p.closed = true;
    }
    p.radii[k] = a;
  }
  return !p.closed;
}

void check_inputs(const FeedSpec& feed, const std::vector<double>& inlet, const SimConfig& cfg) {
  cfg.validate();
  feed.validate();
  if (inlet.size() != feed.size()) throw Error(ErrorKind::GridMismatch, "inlet size differs from feed");
}

PoreProfile clean_profile(const ShapeFunction& shape, const SimConfig& cfg) {
  auto check = validate_shape(shape, cfg.n_x);
  if (!check.feasible) throw Error(ErrorKind::MalformedShape, "shape is not within (0,1] on [0,1]");
  return make_profile(shape, cfg.n_x);
}

SimRecord pressure_loop(const PoreProfile& start, const std::vector<double>& clean,
                        const FeedSpec& feed, const std::vector<double>& inlet,
                        const SimConfig& cfg, double u_ref, double volume_limit) {
  SimRecord rec;
  rec.mode = Mode::ConstantPressure;
  rec.inlet = inlet;
  rec.initial = start;
  Model model(feed, inlet, clean, cfg.screening);
  Recorder recorder(rec, inlet.size());

  PoreProfile p = start;
  State s = model.evaluate(p, Mode::ConstantPressure);
  if (!(u_ref > 0.0)) u_ref = s.u;
  rec.u_ref = u_ref;
  const double threshold = cfg.theta * u_ref;
  double t = 0.0, j = 0.0;
  recorder.push(t, j, s);
  if (cfg.keep_profiles) rec.profiles.push_back(p.radii);

  const bool limited = std::isfinite(volume_limit);
  rec.termination = Termination::StepCap;
  if (s.u <= threshold) {
    rec.termination = Termination::FluxThreshold;
  } else if (limited && volume_limit <= 0.0) {
    rec.termination = Termination::VolumeReached;
  } else {
    State next;
    std::vector<double> r;
    for (long n = 0; n < cfg.max_steps; ++n) {
      double de = cfg.dt;
      double m = model.rate(s, r);
      if (m * de > cfg.max_da) de = cfg.max_da / m;
      if (limited) {
        double remaining = volume_limit - j;
        if (s.u * de > remaining) de = remaining / s.u;
      }
      if (!advance(p, r, de)) {
        rec.termination = Termination::PoreClosed;
        break;
      }
      model.evaluate(p, Mode::ConstantPressure, next);
      j += 0.5 * de * (s.u + next.u);
      recorder.accumulate(de, s, next);
      t += de;
      std::swap(s, next);
      recorder.push(t, j, s);
      if (cfg.keep_profiles) rec.profiles.push_back(p.radii);
      if (s.u <= threshold) {
        rec.termination = Termination::FluxThreshold;
        break;
      }
      if (limited && j >= volume_limit * (1.0 - 1e-12)) {
        rec.termination = Termination::VolumeReached;
        break;
      }
    }
  }
  rec.final_profile = p;
  return rec;
}

}  // namespace

SimRecord run_from_profile(const PoreProfile& start, const std::vector<double>& clean_radii,
                           const FeedSpec& feed, const std::vector<double>& inlet,
                           const SimConfig& cfg, double u_ref, double volume_limit) {
  check_inputs(feed, inlet, cfg);
  if (cfg.mode != Mode::ConstantPressure)
    throw Error(ErrorKind::InvalidConfig, "resumed runs are constant pressure only");
  if (clean_radii.size() != start.radii.size())
    throw Error(ErrorKind::GridMismatch, "clean profile size differs");
  return pressure_loop(start, clean_radii, feed, inlet, cfg, u_ref, volume_limit);
}

SimRecord run_constant_pressure(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg) {
  if (cfg.mode != Mode::ConstantPressure)
    throw Error(ErrorKind::InvalidConfig, "config is not constant pressure");
  auto inlet = feed.inlet();
  check_inputs(feed, inlet, cfg);
  PoreProfile p = clean_profile(shape, cfg);
  return pressure_loop(p, p.radii, feed, inlet, cfg, 0.0, std::numeric_limits<double>::infinity());
}

SimRecord run_constant_flux(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg) {
  if (cfg.mode != Mode::ConstantFlux) throw Error(ErrorKind::InvalidConfig, "config is not constant flux");
  auto inlet = feed.inlet();
  check_inputs(feed, inlet, cfg);
  PoreProfile p = clean_profile(shape, cfg);
  const std::vector<double> clean = p.radii;

  SimRecord rec;
  rec.mode = Mode::ConstantFlux;
  rec.inlet = inlet;
  rec.initial = p;
  rec.u_ref = 1.0;
  Model model(feed, rec.inlet, clean, cfg.screening);
  Recorder recorder(rec, inlet.size());

  State s = model.evaluate(p, Mode::ConstantFlux);
  const double p_start = s.p0;
  if (p_start > cfg.p_init_max)
    throw Error(ErrorKind::InfeasibleStart, "initial inlet pressure exceeds p_init_max");
  recorder.push(0.0, 0.0, s);
  if (cfg.keep_profiles) rec.profiles.push_back(p.radii);

  rec.termination = Termination::StepCount;
  State next;
  std::vector<double> r;
  for (long n = 0; n < cfg.n_steps; ++n) {
    double remaining = cfg.dt;
    bool closed = false;
    while (remaining > 0.0) {
      double m = model.rate(s, r);
      double de = remaining;
      if (m * de > cfg.max_da) de = cfg.max_da / m;
      if (remaining - de < 1e-12 * cfg.dt) de = remaining;
      if (!advance(p, r, de)) {
        closed = true;
        break;
      }
      model.evaluate(p, Mode::ConstantFlux, next);
      recorder.accumulate(de, s, next);
      std::swap(s, next);
      remaining -= de;
    }
    if (closed) {
      rec.termination = Termination::PoreClosed;
      break;
    }
    double t = static_cast<double>(n + 1) * cfg.dt;
    recorder.push(t, t, s);
    if (cfg.keep_profiles) rec.profiles.push_back(p.radii);
    if (s.p0 > cfg.p_ratio_max * p_start) {
      rec.termination = Termination::PressureCap;
      break;
    }
  }
  rec.final_profile = p;
  return rec;
}

SimRecord run(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg) {
  return cfg.mode == Mode::ConstantPressure ? run_constant_pressure(shape, feed, cfg)
                                            : run_constant_flux(shape, feed, cfg);
}

InitialRates initial_rates(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg) {
  if (cfg.mode != Mode::ConstantPressure)
    throw Error(ErrorKind::UnsupportedMethod, "initial rates are defined for constant pressure");
  auto inlet = feed.inlet();
  check_inputs(feed, inlet, cfg);
  PoreProfile p = clean_profile(shape, cfg);
  const std::vector<double> clean = p.radii;
  Model model(feed, inlet, clean, cfg.screening);

  State s = model.evaluate(p, Mode::ConstantPressure);
  std::vector<double> r;
  model.rate(s, r);
  InitialRates out;
  out.u0 = s.u;
  std::vector<double> g(p.radii.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    double a = p.radii[k];
    double a2 = a * a;
    g[k] = -r[k] / (a2 * a2 * a);
  }
  out.du0 = -4.0 * s.u * s.u * trapezoid(g, p.spacing());
  for (const auto& c : s.c) out.c_ins0.push_back(c.back());

  PoreProfile q = p;
  if (!advance(q, r, cfg.dt)) throw Error(ErrorKind::PoreClosed, "pore closed within one step");
  State n = model.evaluate(q, Mode::ConstantPressure);
  out.du0_fd = (n.u - s.u) / cfg.dt;
  for (std::size_t i = 0; i < n.c.size(); ++i)
    out.dc_ins0.push_back((n.c[i].back() - s.c[i].back()) / cfg.dt);
  return out;
}

std::vector<double> initial_removal(const ShapeFunction& shape, const FeedSpec& feed, const SimConfig& cfg) {
  PoreProfile p = clean_profile(shape, cfg);
  double u = cfg.mode == Mode::ConstantPressure ? flux_constant_pressure(p) : 1.0;
  std::vector<double> out;
  for (const auto& sp : feed.species) {
    auto c = concentration_profile(p, u, sp, 1.0, cfg.screening ? &p.radii : nullptr);
    out.push_back(1.0 - c.back());
  }
  return out;
}

Metrics compute_metrics(const SimRecord& record, const std::vector<double>& reference_inlet) {
  if (record.steps() == 0) throw Error(ErrorKind::InvalidInput, "empty record");
  if (reference_inlet.size() != record.species())
    throw Error(ErrorKind::GridMismatch, "reference inlet size differs");
  Metrics m;
  m.t_f = record.t.back();
  m.j = record.j.back();
  double total = 0.0;
  for (std::size_t i = 0; i < record.species(); ++i) {
    double c = record.c_acm[i].back();
    m.c_acm.push_back(c);
    double ref = reference_inlet[i];
    m.Rbar.push_back(ref > 0.0 ? std::clamp(1.0 - c / ref, 0.0, 1.0) : 0.0);
    total += c;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::UndefinedPurity, "all accumulative concentrations are zero");
  for (double c : m.c_acm) m.purity.push_back(c / total);
  std::size_t target = record.species() > 1 ? 1 : 0;
  m.yield = m.c_acm[target] * m.j;
  return m;
}

Metrics compute_metrics(const SimRecord& record) { return compute_metrics(record, record.inlet); }

double purity_from_removal(double xi, double rbar1, double rbar2) {
  double num = (1.0 - xi) * (1.0 - rbar2);
  return num / (xi * (1.0 - rbar1) + num);
}

}  // namespace poreflow
