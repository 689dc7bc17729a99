#include <cmath>
#include <numbers>

#include "doctest.h"
#include "poreflow/model.hpp"

using namespace poreflow;
using doctest::Approx;

namespace {

PoreProfile uniform(double a, int n_x = 200) { return make_profile(ShapeFunction::linear(a, 0.0), n_x); }

// closed form of int_0^1 (1 - 0.6 x)^-4 dx
constexpr double kLinearIntegral = (1.0 / (0.4 * 0.4 * 0.4) - 1.0) / 1.8;

// first-order upwind march of dc/dx = -k a c
std::vector<double> upwind(const PoreProfile& p, double k, double c0) {
  std::vector<double> c(p.radii.size());
  c[0] = c0;
  double h = p.spacing();
  for (std::size_t i = 1; i < c.size(); ++i) c[i] = c[i - 1] * (1.0 - k * h * p.radii[i - 1]);
  return c;
}

}  // namespace

TEST_CASE("eval_shape") {
  CHECK(eval_shape(ShapeFunction::linear(1.0, 0.0), 0.5) == 1.0);
  CHECK(eval_shape(ShapeFunction::linear(0.9998, -0.6001), 1.0) == Approx(0.3997).epsilon(1e-12));
  CHECK(eval_shape(ShapeFunction({0.5, 0.25, 0.25}), 1.0) == Approx(1.0));
  CHECK(eval_shape(ShapeFunction({0.5, 0.25, 0.25}), 0.5) == Approx(0.5 + 0.125 + 0.0625));
}

TEST_CASE("validate_shape") {
  auto ok = validate_shape(ShapeFunction::linear(1.0, -0.6), 200);
  CHECK(ok.feasible);
  CHECK(ok.min_value == Approx(0.4));
  CHECK(ok.violation == 0.0);

  auto high = validate_shape(ShapeFunction::linear(1.0, 0.5), 200);
  CHECK_FALSE(high.feasible);
  CHECK(high.max_value == Approx(1.5));
  CHECK(high.max_x == Approx(1.0));

  auto low = validate_shape(ShapeFunction::linear(0.2, -0.4), 200);
  CHECK_FALSE(low.feasible);
  CHECK(low.min_value == Approx(-0.2));
  CHECK(low.min_x == Approx(1.0));

  // interior maximum of a quadratic that the sample grid straddles
  auto peak = validate_shape(ShapeFunction({0.9, 0.4, -0.4}), 2);
  CHECK(peak.max_value == Approx(1.0));
  CHECK(peak.max_x == Approx(0.5));

  CHECK_THROWS_AS(validate_shape(ShapeFunction(std::vector<double>{}), 10), Error);
  try {
    validate_shape(ShapeFunction(std::vector<double>{}), 10);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedShape);
  }
}

TEST_CASE("flux and inlet pressure") {
  CHECK(flux_constant_pressure(uniform(1.0)) == Approx(1.0).epsilon(1e-15));
  CHECK(flux_constant_pressure(uniform(0.5)) == Approx(0.0625).epsilon(1e-15));
  CHECK(inlet_pressure_constant_flux(uniform(1.0)) == Approx(1.0).epsilon(1e-15));
  CHECK(inlet_pressure_constant_flux(uniform(0.5)) == Approx(16.0).epsilon(1e-15));

  auto fine = make_profile(ShapeFunction::linear(1.0, -0.6), 2000);
  CHECK(std::abs(flux_constant_pressure(fine) - 1.0 / kLinearIntegral) < 1e-6);
  CHECK(std::abs(inlet_pressure_constant_flux(fine) - kLinearIntegral) < 1e-5);
  CHECK(std::abs(flux_constant_pressure(fine) - 0.123077) < 1e-6);
}

TEST_CASE("flux quadrature converges at second order") {
  double prev = 0.0;
  for (int n : {50, 100, 200, 400}) {
    double err = std::abs(inlet_pressure_constant_flux(make_profile(ShapeFunction::linear(1.0, -0.6), n)) -
                          kLinearIntegral);
    if (prev > 0.0) CHECK(prev / err == Approx(4.0).epsilon(0.05));
    prev = err;
  }
}

TEST_CASE("closed profiles are rejected") {
  auto p = uniform(1.0);
  p.radii[7] = kClosureFloor;
  try {
    flux_constant_pressure(p);
    FAIL("expected pore-closed");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PoreClosed);
  }
  auto q = uniform(1.0);
  q.closed = true;
  CHECK_THROWS_AS(inlet_pressure_constant_flux(q), Error);
}

TEST_CASE("concentration_profile") {
  Species s{1.0, 1.0, 1.0, std::nullopt};
  auto p = uniform(1.0);

  auto cf = concentration_profile(p, 1.0, s, 1.0);
  CHECK(cf.back() == Approx(std::exp(-std::numbers::pi / 4)).epsilon(1e-12));
  CHECK(std::abs(cf.back() - 0.45594) < 1e-5);

  auto cp = concentration_profile(p, flux_constant_pressure(p), s, 0.5);
  CHECK(std::abs(cp.back() - 0.22797) < 1e-5);

  Species none{1.0, 0.0, 1.0, std::nullopt};
  for (double c : concentration_profile(make_profile(ShapeFunction::linear(1.0, -0.6), 200), 0.3, none, 0.7))
    CHECK(c == 0.7);

  try {
    concentration_profile(p, 0.0, s, 1.0);
    FAIL("expected degenerate-flow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateFlow);
  }
}

TEST_CASE("constant-flux outlet matches exponential of the area integral") {
  auto p = make_profile(ShapeFunction::linear(0.8, -0.5), 200);
  Species s{1.0, 3.0, 1.0, std::nullopt};
  auto c = concentration_profile(p, 1.0, s, 1.0);
  double area = 0.8 - 0.25;  // exact, trapezoid is exact for linear a
  CHECK(c.back() == Approx(std::exp(-3.0 * std::numbers::pi / 4 * area)).epsilon(1e-12));
}

TEST_CASE("upwind march cross-checks the exponential solution") {
  auto p = make_profile(ShapeFunction::linear(1.0, -0.6), 20000);
  Species s{1.0, 1.0, 1.0, std::nullopt};
  double u = 0.2;
  auto exact = concentration_profile(p, u, s, 1.0);
  auto march = upwind(p, std::numbers::pi / (4 * u), 1.0);
  CHECK(march.back() == Approx(exact.back()).epsilon(1e-3));
  auto coarse = upwind(make_profile(ShapeFunction::linear(1.0, -0.6), 2000), std::numbers::pi / (4 * u), 1.0);
  // first order: ten times the nodes, about a tenth of the error
  double e_fine = std::abs(march.back() - exact.back());
  double e_coarse = std::abs(coarse.back() - exact.back());
  CHECK(e_coarse / e_fine == Approx(10.0).epsilon(0.1));
}

TEST_CASE("screened_lambda") {
  ScreeningParams same{1.0, 1.0, 0.1};
  CHECK(screened_lambda(same, 0.0) == 1.0);
  CHECK(screened_lambda(same, 0.37) == 1.0);
  ScreeningParams decay{1.0, 0.0, 0.2};
  CHECK(screened_lambda(decay, 0.0) == 1.0);
  CHECK(screened_lambda(decay, 0.2) == Approx(0.367879).epsilon(1e-6));
  CHECK(screened_lambda(decay, 0.1) > screened_lambda(decay, 0.3));
  try {
    screened_lambda(ScreeningParams{1.0, 0.0, 0.0}, 0.1);
    FAIL("expected invalid-parameter");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidParameter);
  }
}

TEST_CASE("screened transport uses the deposited thickness") {
  auto clean = make_profile(ShapeFunction::linear(1.0, -0.4), 200);
  auto fouled = clean;
  for (auto& a : fouled.radii) a -= 0.1;
  Species plain{1.0, 2.0, 1.0, std::nullopt};
  Species screened = plain;
  screened.screening = ScreeningParams{2.0, 0.5, 0.05};
  auto c_plain = concentration_profile(fouled, 0.3, plain, 1.0, &clean.radii);
  auto c_screened = concentration_profile(fouled, 0.3, screened, 1.0, &clean.radii);
  CHECK(c_screened.back() > c_plain.back());

  double lam = screened_lambda(*screened.screening, 0.1);
  Species fixed{1.0, lam, 1.0, std::nullopt};
  CHECK(c_screened.back() == Approx(concentration_profile(fouled, 0.3, fixed, 1.0).back()).epsilon(1e-12));
}

TEST_CASE("deposition_rate") {
  auto p = uniform(1.0, 10);
  auto feed = FeedSpec::two_species(0.5, 0.1);
  std::vector<std::vector<double>> c(2, std::vector<double>(11, 0.5));
  for (double r : deposition_rate(p, c, feed)) CHECK(r == Approx(-0.55));

  std::vector<std::vector<double>> zero(2, std::vector<double>(11, 0.0));
  for (double r : deposition_rate(p, zero, feed)) CHECK(r == 0.0);

  auto three = FeedSpec::coupled({0.3, 0.35, 0.35}, {1.0, 0.1, 0.5});
  std::vector<std::vector<double>> c3{std::vector<double>(11, 0.3), std::vector<double>(11, 0.35),
                                      std::vector<double>(11, 0.35)};
  for (double r : deposition_rate(p, c3, three)) CHECK(r == Approx(-0.51));

  std::vector<std::vector<double>> ragged{std::vector<double>(11, 0.5), std::vector<double>(10, 0.5)};
  try {
    deposition_rate(p, ragged, feed);
    FAIL("expected grid-mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::GridMismatch);
  }
}

TEST_CASE("feed validation") {
  CHECK_NOTHROW(FeedSpec::two_species(0.9, 0.1).validate());
  auto f = FeedSpec::two_species(0.9, 0.1);
  CHECK(f.species[1].lambda == Approx(0.1));
  f.species[0].xi = 0.8;
  CHECK_THROWS_AS(f.validate(), Error);
  auto g = FeedSpec::two_species(0.5, 0.1);
  g.species[0].screening = ScreeningParams{1.0, 0.5, -1.0};
  CHECK_THROWS_AS(g.validate(), Error);
}
