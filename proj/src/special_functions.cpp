#include "cachenet/special_functions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "cachenet/errors.hpp"

namespace cachenet::special {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

// zeta(k) for k = 2..30, coefficients of the ln Gamma(1 + e) expansion.
constexpr std::array<double, 29> kZeta = {
    1.6449340668482264365, 1.2020569031595942854, 1.0823232337111381915,
    1.0369277551433699263, 1.0173430619844491397, 1.0083492773819228268,
    1.0040773561979443394, 1.0020083928260822144, 1.0009945751278180853,
    1.0004941886041194646, 1.0002460865533080483, 1.0001227133475784891,
    1.0000612481350587048, 1.0000305882363070205, 1.0000152822594086519,
    1.0000076371976378998, 1.0000038172932649998, 1.0000019082127165539,
    1.0000009539620338728, 1.0000004769329867878, 1.0000002384505027277,
    1.0000001192199259653, 1.0000000596081890513, 1.0000000298035035147,
    1.0000000149015548284, 1.0000000074507117898, 1.0000000037253340248,
    1.0000000018626597235, 1.0000000009313274324};

// ln Gamma(1 + e) for |e| <= 0.25, accurate relative to the (small) result.
double ln_gamma_1p(double e) {
  double sum = 0.0;
  double power = -e;
  for (std::size_t i = 0; i < kZeta.size(); ++i) {
    power *= -e;
    const double k = static_cast<double>(i + 2);
    sum += kZeta[i] * power / k;
  }
  // power is (-e)^k, so each term is already signed.
  return -kEulerGamma * e + sum;
}

double ln_gamma_stirling(double x) {
  // Bernoulli terms B_2k / (2k (2k-1) x^(2k-1)).
  constexpr std::array<double, 8> c = {
      1.0 / 12.0,         -1.0 / 360.0,  1.0 / 1260.0,       -1.0 / 1680.0,
      1.0 / 1188.0, -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0};
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  double p = inv;
  for (double ck : c) {
    series += ck * p;
    p *= inv2;
  }
  return (x - 0.5) * std::log(x) - x + kHalfLog2Pi + series;
}

// Lanczos approximation, g = 607/128, 14 coefficients.
double ln_gamma_lanczos(double x) {
  constexpr std::array<double, 14> cof = {
      57.1562356658629235,     -59.5979603554754912,
      14.1360979747417471,     -0.491913816097620199,
      .339946499848118887e-4,  .465236289270485756e-4,
      -.983744753048795646e-4, .158088703224912494e-3,
      -.210264441724104883e-3, .217439618115212643e-3,
      -.164318106536763890e-3, .844182239838527433e-4,
      -.261908384015814087e-4, .368991826595316234e-5};
  double y = x;
  double tmp = x + 5.24218750000000000;
  tmp = (x + 0.5) * std::log(tmp) - tmp;
  double ser = 0.999999999999997092;
  for (double c : cof) ser += c / ++y;
  return tmp + std::log(2.5066282746310005 * ser / x);
}

// sin(pi x) with exact argument reduction.
double sin_pi(double x) {
  const double r = x - 2.0 * std::round(0.5 * x);  // r in [-1, 1]
  return std::sin(kPi * r);
}

bool is_nonpositive_integer(double x) { return x <= 0.0 && x == std::floor(x); }

double distance_to_integer(double x) { return std::fabs(x - std::round(x)); }

// Plain Gauss series for 0 <= w < 1.
double hyp2f1_series(double a, double b, double c, double w, long max_terms) {
  double term = 1.0;
  double sum = 1.0;
  for (long k = 0; k < max_terms; ++k) {
    const double kk = static_cast<double>(k);
    const double ratio = (a + kk) * (b + kk) / ((c + kk) * (kk + 1.0));
    term *= ratio * w;
    sum += term;
    if (term == 0.0) return sum;
    // The tail is bounded by a geometric series with ratio q.
    const double q = std::max(std::fabs(ratio * w), w);
    if (q < 1.0 && std::fabs(term) * q / (1.0 - q) <= 1e-17 * std::fabs(sum)) return sum;
  }
  throw ConvergenceError("gauss_2f1_neg: series did not converge within " +
                         std::to_string(max_terms) + " terms (w = " + std::to_string(w) + ")");
}

// 2F1(a, b; c; w) for 0 <= w < 1.
double hyp2f1_unit(double a, double b, double c, double w) {
  constexpr long kSeriesTerms = 200000;
  constexpr long kSlowSeriesTerms = 20000000;
  if (w <= 0.7 || is_nonpositive_integer(a) || is_nonpositive_integer(b))
    return hyp2f1_series(a, b, c, w, kSeriesTerms);

  const double s = c - a - b;
  if (distance_to_integer(s) < 0.05) return hyp2f1_series(a, b, c, w, kSlowSeriesTerms);

  // Connection formula around w = 1.
  const double v = 1.0 - w;
  const double gc = gamma_fn(c);
  const double first = gc * gamma_fn(s) * reciprocal_gamma(c - a) * reciprocal_gamma(c - b);
  const double second = gc * gamma_fn(-s) * reciprocal_gamma(a) * reciprocal_gamma(b);
  double result = 0.0;
  if (first != 0.0) result += first * hyp2f1_series(a, b, 1.0 - s, v, kSeriesTerms);
  if (second != 0.0)
    result += second * std::pow(v, s) * hyp2f1_series(c - a, c - b, 1.0 + s, v, kSeriesTerms);
  return result;
}

// Gauss-Kronrod 21-point rule (QUADPACK qk21).
constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208677289826, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Segment {
  double lo;
  double hi;
  double value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

class Integrator {
 public:
  explicit Integrator(const std::function<double(double)>& f) : f_(f) {}

  // Finite intervals live in x; the tail [tail_start, inf) lives in t in [0, 1)
  // through x = tail_start / (1 - t), which keeps 1/x^p tails smooth in t.
  Segment rule(double lo, double hi, bool tail) const {
    const double center = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    auto eval = [&](double t) {
      if (!tail) return checked(t);
      const double om = 1.0 - t;
      return checked(tail_start_ / om) * tail_start_ / (om * om);
    };
    const double fc = eval(center);
    double resk = fc * kWgk[10];
    double resg = 0.0;
    double resabs = std::fabs(resk);
    std::array<double, 10> f1{};
    std::array<double, 10> f2{};
    for (int j = 0; j < 10; ++j) {
      const double dx = half * kXgk[j];
      f1[j] = eval(center - dx);
      f2[j] = eval(center + dx);
      resk += kWgk[j] * (f1[j] + f2[j]);
      resabs += kWgk[j] * (std::fabs(f1[j]) + std::fabs(f2[j]));
      if (j % 2 == 1) resg += kWg[j / 2] * (f1[j] + f2[j]);
    }
    const double reskh = 0.5 * resk;
    double resasc = kWgk[10] * std::fabs(fc - reskh);
    for (int j = 0; j < 10; ++j)
      resasc += kWgk[j] * (std::fabs(f1[j] - reskh) + std::fabs(f2[j] - reskh));
    const double value = resk * half;
    resabs *= std::fabs(half);
    resasc *= std::fabs(half);
    double err = std::fabs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
    return {lo, hi, value, err};
  }

  double tail_start_ = 0.0;

 private:
  double checked(double x) const {
    const double v = f_(x);
    if (!std::isfinite(v))
      throw DomainError("integrate_semi_infinite: integrand is not finite at x = " + std::to_string(x));
    return v;
  }

  const std::function<double(double)>& f_;
};

}  // namespace

void QuadratureConfig::validate() const {
  if (!(rel_tol > 0.0)) throw DomainError("QuadratureConfig: rel_tol must be > 0");
  if (!(abs_tol >= 0.0)) throw DomainError("QuadratureConfig: abs_tol must be >= 0");
  if (max_subdivisions < 1) throw DomainError("QuadratureConfig: max_subdivisions must be >= 1");
}

double ln_gamma(double x) {
  if (!(x > 0.0) || std::isnan(x)) throw DomainError("ln_gamma: argument must be > 0");
  if (std::isinf(x)) return x;
  if (x >= 10.0) return ln_gamma_stirling(x);
  if (std::fabs(x - 1.0) <= 0.25) return ln_gamma_1p(x - 1.0);
  if (std::fabs(x - 2.0) <= 0.25) return ln_gamma_1p(x - 2.0) + std::log1p(x - 2.0);
  if (x < 0.5) return ln_gamma(x + 1.0) - std::log(x);
  return ln_gamma_lanczos(x);
}

double gamma_fn(double x) {
  if (std::isnan(x) || is_nonpositive_integer(x)) throw DomainError("gamma_fn: pole or NaN argument");
  if (x >= 0.5) return std::exp(ln_gamma(x));
  // Reflection.
  return kPi / (sin_pi(x) * std::exp(ln_gamma(1.0 - x)));
}

double reciprocal_gamma(double x) {
  if (std::isnan(x)) throw DomainError("reciprocal_gamma: NaN argument");
  if (is_nonpositive_integer(x)) return 0.0;
  if (x >= 0.5) return std::exp(-ln_gamma(x));
  return sin_pi(x) * std::exp(ln_gamma(1.0 - x)) / kPi;
}

double gauss_2f1_neg(double a, double b, double c, double z) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || std::isnan(z))
    throw DomainError("gauss_2f1_neg: non-finite parameter");
  if (is_nonpositive_integer(c)) throw DomainError("gauss_2f1_neg: c must not be a nonpositive integer");
  if (z > 0.0) throw DomainError("gauss_2f1_neg: only z <= 0 is supported");
  if (z == 0.0) return 1.0;
  if (std::isinf(z)) throw DomainError("gauss_2f1_neg: z must be finite");

  // Far from the origin, map to 1/z. This avoids w = z/(z-1) crowding 1, where
  // the c - a - b integer case (z1 always has c - a - b = 0) has no fast path.
  if (z < -2.0 && distance_to_integer(a - b) >= 0.05 && c < 170.0 && !is_nonpositive_integer(a) &&
      !is_nonpositive_integer(b)) {
    const double inv = 1.0 / z;
    const double gc = gamma_fn(c);
    const double first = gc * gamma_fn(b - a) * reciprocal_gamma(b) * reciprocal_gamma(c - a);
    const double second = gc * gamma_fn(a - b) * reciprocal_gamma(a) * reciprocal_gamma(c - b);
    double result = 0.0;
    if (first != 0.0) result += first * std::pow(-z, -a) * gauss_2f1_neg(a, a - c + 1.0, a - b + 1.0, inv);
    if (second != 0.0) result += second * std::pow(-z, -b) * gauss_2f1_neg(b, b - c + 1.0, b - a + 1.0, inv);
    return result;
  }

  const double w = z / (z - 1.0);
  // Pfaff: 2F1(a,b;c;z) = (1-z)^-a 2F1(a, c-b; c; w) = (1-z)^-b 2F1(c-a, b; c; w).
  // Keep a terminating parameter when the original series is a polynomial.
  if (is_nonpositive_integer(b) && !is_nonpositive_integer(a))
    return std::pow(1.0 - z, -b) * hyp2f1_unit(c - a, b, c, w);
  return std::pow(1.0 - z, -a) * hyp2f1_unit(a, c - b, c, w);
}

double z1(double t_bar, double beta) {
  if (!(beta > 2.0) || !std::isfinite(beta)) throw DomainError("z1: path-loss exponent must be > 2");
  if (!(t_bar >= 0.0) || !std::isfinite(t_bar)) throw DomainError("z1: threshold must be finite and >= 0");
  if (t_bar == 0.0) return 0.0;
  const double delta = 2.0 / beta;
  return 2.0 * t_bar / (beta - 2.0) * gauss_2f1_neg(1.0, 1.0 - delta, 2.0 - delta, -t_bar);
}

double integrate_semi_infinite(const std::function<double(double)>& f, const QuadratureConfig& cfg) {
  cfg.validate();
  Integrator integrator(f);

  // Decade breakpoints cover integrands whose mass sits anywhere in [1e-6, 1e9].
  std::vector<double> breaks = {0.0};
  for (int e = -6; e <= 9; ++e) breaks.push_back(std::pow(10.0, e));
  integrator.tail_start_ = breaks.back();

  std::priority_queue<Segment> finite;
  std::priority_queue<Segment> tail;
  double total = 0.0;
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    Segment s = integrator.rule(breaks[i], breaks[i + 1], false);
    total += s.value;
    total_err += s.error;
    finite.push(s);
  }
  {
    Segment s = integrator.rule(0.0, 1.0, true);
    total += s.value;
    total_err += s.error;
    tail.push(s);
  }

  int subdivisions = static_cast<int>(finite.size() + tail.size());
  auto tolerance = [&] { return std::max(cfg.abs_tol, cfg.rel_tol * std::fabs(total)); };

  while (total_err > tolerance()) {
    if (subdivisions >= cfg.max_subdivisions)
      throw QuadratureError("integrate_semi_infinite: subdivision limit reached", total, total_err);
    const bool from_tail = tail.top().error > (finite.empty() ? -1.0 : finite.top().error);
    auto& queue = from_tail ? tail : finite;
    const Segment worst = queue.top();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi))
      throw QuadratureError("integrate_semi_infinite: interval too small to bisect", total, total_err);
    queue.pop();
    const Segment left = integrator.rule(worst.lo, mid, from_tail);
    const Segment right = integrator.rule(mid, worst.hi, from_tail);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    ++subdivisions;
  }
  // Re-sum to drop accumulated cancellation from incremental updates.
  double exact_sum = 0.0;
  for (auto* q : {&finite, &tail}) {
    auto copy = *q;
    while (!copy.empty()) {
      exact_sum += copy.top().value;
      copy.pop();
    }
  }
  return exact_sum;
}

}  // namespace cachenet::special
