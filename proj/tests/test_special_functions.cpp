#include <cmath>
#include <numbers>
#include <vector>

#include "cachenet/errors.hpp"
#include "cachenet/special_functions.hpp"
#include "doctest.h"

using namespace cachenet;
using namespace cachenet::special;

namespace {

// Reference values from tests/oracles/generate_oracles.py (mpmath, 50 digits).
struct Ref {
  double x;
  double value;
};

bool rel_close(double got, double want, double tol) {
  return std::fabs(got - want) <= tol * std::fabs(want);
}

}  // namespace

TEST_CASE("ln_gamma matches high precision references") {
  const std::vector<Ref> refs = {
      {0.5, 0.57236494292470008707},   {1.5, -0.12078223763524522235},
      {2.5, 0.28468287047291915963},   {3.575, 1.2846319648520036175},
      {0.9, 0.066376239734742971189},  {1.1, -0.049872441259839724148},
      {1.95, -0.020324499149577636385}, {2.05, 0.021937091667171834985},
      {7.25, 7.0521854507385394449},   {10.3, 13.482036786138356971},
      {83.575, 285.01365435066650149}, {170.5, 704.00442773420467079},
      {1000.25, 5906.947268271117177}, {1e6, 12815504.56914761166},
  };
  for (const auto& r : refs) {
    CAPTURE(r.x);
    CHECK(rel_close(ln_gamma(r.x), r.value, 1e-12));
  }
  CHECK(ln_gamma(1.0) == 0.0);
  CHECK(ln_gamma(2.0) == doctest::Approx(0.0).epsilon(1e-300));
}

TEST_CASE("ln_gamma rejects nonpositive arguments") {
  CHECK_THROWS_AS(ln_gamma(0.0), DomainError);
  CHECK_THROWS_AS(ln_gamma(-1.5), DomainError);
  CHECK_THROWS_AS(ln_gamma(std::nan("")), DomainError);
}

TEST_CASE("ln_gamma satisfies the recurrence on [0.5, 50]") {
  for (double x = 0.5; x <= 50.0; x += 0.173) {
    CAPTURE(x);
    const double lhs = std::exp(ln_gamma(x + 1.0));
    const double rhs = x * std::exp(ln_gamma(x));
    CHECK(rel_close(lhs, rhs, 1e-11));
  }
}

TEST_CASE("gamma_fn uses reflection below one half") {
  const std::vector<Ref> refs = {{-0.5, -3.5449077018110320546},
                                 {-1.5, 2.3632718012073547031},
                                 {-2.25, -1.7428148657282526509},
                                 {0.25, 3.6256099082219083119}};
  for (const auto& r : refs) CHECK(rel_close(gamma_fn(r.x), r.value, 1e-13));
  CHECK_THROWS_AS(gamma_fn(-3.0), DomainError);
  CHECK(reciprocal_gamma(-3.0) == 0.0);
  CHECK(reciprocal_gamma(0.0) == 0.0);
  CHECK(rel_close(reciprocal_gamma(0.5), 1.0 / std::sqrt(std::numbers::pi), 1e-14));
}

TEST_CASE("gauss_2f1_neg: arctan identity") {
  // 2F1(1, 1/2; 3/2; -x^2) = arctan(x) / x
  CHECK(gauss_2f1_neg(1, 0.5, 1.5, 0.0) == 1.0);
  CHECK(rel_close(gauss_2f1_neg(1, 0.5, 1.5, -1.0), std::numbers::pi / 4.0, 1e-10));
  CHECK(rel_close(gauss_2f1_neg(1, 0.5, 1.5, -100.0), std::atan(10.0) / 10.0, 1e-10));
  for (double x = 0.01; x < 1e4; x *= 1.37) {
    CAPTURE(x);
    CHECK(rel_close(gauss_2f1_neg(1, 0.5, 1.5, -x * x), std::atan(x) / x, 1e-10));
  }
}

TEST_CASE("gauss_2f1_neg: general parameters") {
  struct Case {
    double a, b, c, z, value;
  };
  const std::vector<Case> cases = {
      {0.5, 0.25, 1.75, -7.3, 0.8052372320448221637},
      {2, 1.3, 3.1, -0.4, 0.74858815470494522355},
      {1, 0.5, 1.5, -1e4, 0.01560796660108231381},
      {1, 1.0 / 3.0, 4.0 / 3.0, -50, 0.31830627747031842335},
      {1, 0.6, 1.6, -1e6, 0.00049634574301113053435},
      {1.5, 2, 2.5, -3, 0.17729989403903630843},
      {-2, 0.7, 1.9, -12, 40.941923774954627949},
  };
  for (const auto& k : cases) {
    CAPTURE(k.a);
    CAPTURE(k.z);
    CHECK(rel_close(gauss_2f1_neg(k.a, k.b, k.c, k.z), k.value, 1e-10));
  }
}

TEST_CASE("gauss_2f1_neg: zero argument and domain errors") {
  for (double a : {-1.5, 0.3, 2.0})
    for (double b : {0.1, 1.0, 4.5})
      for (double c : {0.5, 1.5, 7.0}) CHECK(gauss_2f1_neg(a, b, c, 0.0) == 1.0);
  CHECK_THROWS_AS(gauss_2f1_neg(1, 1, 1.5, 0.5), DomainError);
  CHECK_THROWS_AS(gauss_2f1_neg(1, 1, -2.0, -0.5), DomainError);
  CHECK_THROWS_AS(gauss_2f1_neg(1, 1, 0.0, -0.5), DomainError);
}

TEST_CASE("z1 against the defining integral") {
  struct Case {
    double t, beta, value;
  };
  const std::vector<Case> cases = {
      {0.01, 3, 0.01995028372954637329},    {1, 3, 1.6712976965294421067},
      {3, 3, 4.1413765469368700165},        {100, 3, 51.106805461254274579},
      {0.01, 4, 0.0099668652491162027378},  {1, 4, 0.78539816339744830962},
      {3, 4, 1.8137993642342178506},        {100, 4, 14.711276743037345919},
      {0.01, 5.5, 0.005692200430877139173}, {1, 5.5, 0.43049160535930741778},
      {3, 5.5, 0.94761001428119001291},     {100, 5.5, 5.704956251398271918},
  };
  for (const auto& k : cases) {
    CAPTURE(k.t);
    CAPTURE(k.beta);
    CHECK(rel_close(z1(k.t, k.beta), k.value, 1e-10));
  }
  CHECK(z1(0.0, 4.0) == 0.0);
  CHECK(z1(0.0, 2.5) == 0.0);
}

TEST_CASE("z1 for beta = 4 equals sqrt(t) arctan(sqrt(t)) on a log grid") {
  for (double t = 1e-3; t <= 1e4; t *= 1.2) {
    const double want = std::sqrt(t) * std::atan(std::sqrt(t));
    const double got = z1(t, 4.0);
    CAPTURE(t);
    CHECK(std::fabs(got - want) <= 1e-9 * (1.0 + got));
  }
}

TEST_CASE("z1 is strictly increasing in the threshold") {
  for (double beta : {2.2, 3.0, 4.0, 6.0, 12.0}) {
    double prev = 0.0;
    for (double t = 1e-3; t <= 1e4; t *= 1.5) {
      const double v = z1(t, beta);
      CAPTURE(beta);
      CAPTURE(t);
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("z1 domain errors") {
  CHECK_THROWS_AS(z1(1.0, 2.0), DomainError);
  CHECK_THROWS_AS(z1(1.0, 1.5), DomainError);
  CHECK_THROWS_AS(z1(-0.1, 4.0), DomainError);
}

TEST_CASE("integrate_semi_infinite on known integrals") {
  const QuadratureConfig cfg;
  CHECK(integrate_semi_infinite([](double r) { return std::exp(-r); }, cfg) ==
        doctest::Approx(1.0).epsilon(1e-8));
  CHECK(integrate_semi_infinite([](double r) { return r * std::exp(-r * r); }, cfg) ==
        doctest::Approx(0.5).epsilon(1e-8));
  for (double phi_b : {1e-8, 5.093e-6, 1e-3, 1.0, 250.0}) {
    auto pdf = [phi_b](double r) {
      return 2.0 * std::numbers::pi * phi_b * r * std::exp(-std::numbers::pi * phi_b * r * r);
    };
    CAPTURE(phi_b);
    CHECK(std::fabs(integrate_semi_infinite(pdf, cfg) - 1.0) <= 1e-8);
  }
}

TEST_CASE("integrate_semi_infinite honours the requested tolerance") {
  // Integrands with closed-form integrals over (0, inf).
  struct Case {
    std::function<double(double)> f;
    double value;
  };
  const double pi = std::numbers::pi;
  const std::vector<Case> cases = {
      {[](double x) { return 1.0 / (1.0 + x * x); }, pi / 2.0},
      {[](double x) { return std::exp(-3.0 * x) * x * x; }, 2.0 / 27.0},
      {[](double x) { return std::exp(-x * x / 1e6); }, std::sqrt(pi) / 2.0 * 1e3},
      {[](double x) { return 1.0 / std::sqrt(x) * std::exp(-x); }, std::sqrt(pi)},
      {[](double x) { return std::exp(-x) * (1.0 - std::exp(-45.0 * x)); }, 1.0 - 1.0 / 46.0},
  };
  for (double tol : {1e-6, 1e-8, 1e-10}) {
    QuadratureConfig cfg;
    cfg.rel_tol = tol;
    cfg.abs_tol = 0.0;
    cfg.max_subdivisions = 2000;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      CAPTURE(i);
      CAPTURE(tol);
      const double got = integrate_semi_infinite(cases[i].f, cfg);
      CHECK(std::fabs(got - cases[i].value) <= tol * std::fabs(cases[i].value));
    }
  }
}

TEST_CASE("integrate_semi_infinite reports failure with the best estimate") {
  QuadratureConfig cfg;
  cfg.rel_tol = 1e-14;
  cfg.abs_tol = 0.0;
  cfg.max_subdivisions = 18;
  try {
    integrate_semi_infinite([](double x) { return 1.0 / std::sqrt(x) * std::exp(-x); }, cfg);
    FAIL("expected QuadratureError");
  } catch (const QuadratureError& e) {
    CHECK(e.estimate() == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-3));
    CHECK(e.error_bound() > 0.0);
  }
  QuadratureConfig bad;
  bad.rel_tol = 0.0;
  CHECK_THROWS_AS(integrate_semi_infinite([](double x) { return std::exp(-x); }, bad), DomainError);
}

TEST_CASE("integrate_semi_infinite is deterministic") {
  auto f = [](double x) { return std::exp(-x) * std::sin(x) * std::sin(x); };
  const double a = integrate_semi_infinite(f);
  const double b = integrate_semi_infinite(f);
  CHECK(a == b);
}
