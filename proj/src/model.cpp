#include "poreflow/model.hpp"

#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace poreflow {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedShape: return "malformed-shape";
    case ErrorKind::PoreClosed: return "pore-closed";
    case ErrorKind::DegenerateFlow: return "degenerate-flow";
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::InfeasibleStart: return "infeasible-start";
    case ErrorKind::UnsupportedMethod: return "unsupported-method";
    case ErrorKind::FilterExhausted: return "filter-exhausted";
    case ErrorKind::UndefinedPurity: return "undefined-purity";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::NoExhaustion: return "no-exhaustion";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

std::vector<double> FeedSpec::inlet() const {
  std::vector<double> c;
  c.reserve(species.size());
  for (const auto& s : species) c.push_back(s.xi);
  return c;
}

void FeedSpec::validate() const {
  if (species.empty()) throw Error(ErrorKind::InvalidParameter, "feed has no species");
  double sum = 0.0;
  for (std::size_t i = 0; i < species.size(); ++i) {
    const auto& s = species[i];
    std::ostringstream where;
    where << "species " << i + 1;
    if (!(s.xi >= 0.0 && s.xi <= 1.0))
      throw Error(ErrorKind::InvalidParameter, where.str() + " xi outside [0,1]");
    if (!(s.lambda >= 0.0)) throw Error(ErrorKind::InvalidParameter, where.str() + " lambda < 0");
    if (!(s.beta >= 0.0)) throw Error(ErrorKind::InvalidParameter, where.str() + " beta < 0");
    if (s.screening) {
      if (!(s.screening->h0 > 0.0))
        throw Error(ErrorKind::InvalidParameter, where.str() + " screening h0 <= 0");
      if (!(s.screening->lambda_clean > 0.0) || !(s.screening->lambda_fouled >= 0.0))
        throw Error(ErrorKind::InvalidParameter, where.str() + " screening coefficients");
    }
    sum += s.xi;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw Error(ErrorKind::InvalidParameter, "feed fractions do not sum to 1");
}

FeedSpec FeedSpec::coupled(const std::vector<double>& xi, const std::vector<double>& beta,
                           double lambda1) {
  if (xi.size() != beta.size())
    throw Error(ErrorKind::InvalidParameter, "xi and beta lengths differ");
  FeedSpec feed;
  for (std::size_t i = 0; i < xi.size(); ++i)
    feed.species.push_back(Species{xi[i], beta[i] * lambda1, beta[i], std::nullopt});
  return feed;
}

double eval_shape(const ShapeFunction& shape, double x) {
  double v = 0.0;
  for (auto it = shape.coefficients.rbegin(); it != shape.coefficients.rend(); ++it) v = v * x + *it;
  return v;
}

ShapeCheck validate_shape(const ShapeFunction& shape, int n_check) {
  if (shape.coefficients.empty()) throw Error(ErrorKind::MalformedShape, "no coefficients");
  if (n_check < 2) throw Error(ErrorKind::InvalidParameter, "n_check < 2");
  for (double c : shape.coefficients)
    if (!std::isfinite(c)) throw Error(ErrorKind::MalformedShape, "non-finite coefficient");

  ShapeCheck out;
  out.min_value = out.max_value = eval_shape(shape, 0.0);
  auto visit = [&](double x) {
    double v = eval_shape(shape, x);
    if (v < out.min_value) { out.min_value = v; out.min_x = x; }
    if (v > out.max_value) { out.max_value = v; out.max_x = x; }
  };
  for (int k = 1; k <= n_check; ++k) visit(static_cast<double>(k) / n_check);
  if (shape.degree() == 2 && shape.coefficients[2] != 0.0) {
    double xv = -shape.coefficients[1] / (2.0 * shape.coefficients[2]);
    if (xv > 0.0 && xv < 1.0) visit(xv);
  }
  if (out.min_value <= 0.0) out.violation += kClosureFloor - out.min_value;
  if (out.max_value > 1.0) out.violation += out.max_value - 1.0;
  out.feasible = out.min_value > 0.0 && out.max_value <= 1.0;
  return out;
}

PoreProfile make_profile(const ShapeFunction& shape, int n_x) {
  if (n_x < 1) throw Error(ErrorKind::InvalidParameter, "n_x < 1");
  PoreProfile p;
  p.radii.resize(n_x + 1);
  for (int k = 0; k <= n_x; ++k) p.radii[k] = eval_shape(shape, static_cast<double>(k) / n_x);
  return p;
}

double trapezoid(const std::vector<double>& f, double h) {
  if (f.size() < 2) return 0.0;
  double s = 0.5 * (f.front() + f.back());
  for (std::size_t k = 1; k + 1 < f.size(); ++k) s += f[k];
  return s * h;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& f, double h) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t k = 1; k < f.size(); ++k) out[k] = out[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
  return out;
}

double inlet_pressure_constant_flux(const PoreProfile& profile) {
  const auto& a = profile.radii;
  if (a.size() < 2) throw Error(ErrorKind::GridMismatch, "profile needs >= 2 nodes");
  if (profile.closed) throw Error(ErrorKind::PoreClosed, "profile is closed");
  double lo = a[0];
  double s = 0.0;
  const std::size_t last = a.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    double a2 = a[k] * a[k];
    double g = 1.0 / (a2 * a2);
    s += (k == 0 || k == last) ? 0.5 * g : g;
    lo = std::min(lo, a[k]);
  }
  if (!(lo > kClosureFloor)) throw Error(ErrorKind::PoreClosed, "radius at closure floor");
  return s * profile.spacing();
}

double flux_constant_pressure(const PoreProfile& profile) {
  return 1.0 / inlet_pressure_constant_flux(profile);
}

double screened_lambda(const ScreeningParams& s, double h) {
  if (!(s.h0 > 0.0)) throw Error(ErrorKind::InvalidParameter, "screening h0 must be positive");
  if (h < 0.0) h = 0.0;
  return s.lambda_fouled + (s.lambda_clean - s.lambda_fouled) * std::exp(-h / s.h0);
}

void concentration_into(const PoreProfile& profile, double u, const Species& species, double c_inlet,
                        const std::vector<double>* clean_radii, std::vector<double>& integral,
                        std::vector<double>& out) {
  if (!(u > 0.0) || !std::isfinite(u)) throw Error(ErrorKind::DegenerateFlow, "flux must be positive");
  const auto& a = profile.radii;
  const std::size_t n = a.size();
  const bool screened = species.screening.has_value() && clean_radii != nullptr;
  if (screened && clean_radii->size() != n)
    throw Error(ErrorKind::GridMismatch, "clean profile size differs");

  integral.resize(n);
  out.resize(n);
  const double half_h = 0.5 * profile.spacing();
  double prev = (screened ? screened_lambda(*species.screening, (*clean_radii)[0] - a[0]) : species.lambda) * a[0];
  integral[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    double lam = screened ? screened_lambda(*species.screening, (*clean_radii)[k] - a[k]) : species.lambda;
    double w = lam * a[k];
    integral[k] = integral[k - 1] + half_h * (prev + w);
    prev = w;
  }
  detail::decay(integral.data(), n, std::numbers::pi / (4.0 * u), c_inlet, out.data());
  out[0] = c_inlet;
}

std::vector<double> concentration_profile(const PoreProfile& profile, double u,
                                          const Species& species, double c_inlet,
                                          const std::vector<double>* clean_radii) {
  std::vector<double> integral, c;
  concentration_into(profile, u, species, c_inlet, clean_radii, integral, c);
  return c;
}

std::vector<double> deposition_rate(const PoreProfile& profile,
                                    const std::vector<std::vector<double>>& concentrations,
                                    const FeedSpec& feed) {
  if (concentrations.size() != feed.size())
    throw Error(ErrorKind::GridMismatch, "species count differs from feed");
  std::vector<double> rate(profile.radii.size(), 0.0);
  for (std::size_t i = 0; i < concentrations.size(); ++i) {
    if (concentrations[i].size() != rate.size())
      throw Error(ErrorKind::GridMismatch, "concentration array length differs from grid");
    const double b = feed.species[i].beta;
    for (std::size_t k = 0; k < rate.size(); ++k) rate[k] -= b * concentrations[i][k];
  }
  return rate;
}

}  // namespace poreflow
