#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace poreflow {

enum class ErrorKind {
  MalformedShape,
  PoreClosed,
  DegenerateFlow,
  InvalidParameter,
  GridMismatch,
  InvalidConfig,
  InfeasibleStart,
  UnsupportedMethod,
  FilterExhausted,
  UndefinedPurity,
  InvalidInput,
  NoExhaustion,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline constexpr double kClosureFloor = 1e-4;

// a0(x) = sum_k coefficients[k] * x^k on x in [0,1]
struct ShapeFunction {
  std::vector<double> coefficients;

  ShapeFunction() = default;
  ShapeFunction(std::vector<double> c) : coefficients(std::move(c)) {}
  static ShapeFunction linear(double d0, double d1) { return ShapeFunction({d0, d1}); }

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }
};

struct ShapeCheck {
  bool feasible = true;
  double min_value = 0.0;
  double min_x = 0.0;
  double max_value = 0.0;
  double max_x = 0.0;
  // positive parts of (floor - min) and (max - 1); zero when feasible
  double violation = 0.0;
};

struct PoreProfile {
  std::vector<double> radii;
  bool closed = false;

  int n_x() const { return static_cast<int>(radii.size()) - 1; }
  double spacing() const { return 1.0 / n_x(); }
};

struct ScreeningParams {
  double lambda_clean = 1.0;
  double lambda_fouled = 1.0;
  double h0 = 1.0;
};

struct Species {
  double xi = 1.0;
  double lambda = 1.0;
  double beta = 1.0;
  std::optional<ScreeningParams> screening;
};

struct FeedSpec {
  std::vector<Species> species;

  std::size_t size() const { return species.size(); }
  std::vector<double> inlet() const;
  void validate() const;

  // lambda_i = beta_i * lambda1 (equal-density coupling)
  static FeedSpec coupled(const std::vector<double>& xi, const std::vector<double>& beta,
                          double lambda1 = 1.0);
  static FeedSpec two_species(double xi, double beta, double lambda1 = 1.0) {
    return coupled({xi, 1.0 - xi}, {1.0, beta}, lambda1);
  }
};

double eval_shape(const ShapeFunction& shape, double x);
ShapeCheck validate_shape(const ShapeFunction& shape, int n_check);
PoreProfile make_profile(const ShapeFunction& shape, int n_x);

double trapezoid(const std::vector<double>& f, double h);
std::vector<double> cumulative_trapezoid(const std::vector<double>& f, double h);

double inlet_pressure_constant_flux(const PoreProfile& profile);
double flux_constant_pressure(const PoreProfile& profile);

double screened_lambda(const ScreeningParams& screening, double h);

// c(x_k) = c_inlet * exp(-(pi / (4u)) * int_0^{x_k} lambda(x) a(x) dx); constant flux passes u = 1.
// When the species carries screening parameters and clean_radii is given, lambda(x) is the
// screened coefficient at deposited thickness clean_radii[k] - radii[k].
std::vector<double> concentration_profile(const PoreProfile& profile, double u,
                                          const Species& species, double c_inlet,
                                          const std::vector<double>* clean_radii = nullptr);

// Buffer-reusing form of concentration_profile; `integral` is scratch space.
void concentration_into(const PoreProfile& profile, double u, const Species& species, double c_inlet,
                        const std::vector<double>* clean_radii, std::vector<double>& integral,
                        std::vector<double>& out);

std::vector<double> deposition_rate(const PoreProfile& profile,
                                    const std::vector<std::vector<double>>& concentrations,
                                    const FeedSpec& feed);

}  // namespace poreflow
