#include "fc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace fc {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIterations = 100000;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

// Continued fraction for I_x(a, b) (modified Lentz), valid for x < (a+1)/(a+b+2).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

// Returns {I_x(a,b), 1 - I_x(a,b)} given x and y = 1 - x computed independently.
std::pair<double, double> beta_pair(double a, double b, double x, double y) {
  if (x <= 0.0) return {0.0, 1.0};
  if (y <= 0.0) return {1.0, 0.0};
  const double log_front =
      a * std::log(x) + b * std::log(y) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    const double lower = front * beta_continued_fraction(a, b, x) / a;
    return {lower, 1.0 - lower};
  }
  const double upper = front * beta_continued_fraction(b, a, y) / b;
  return {1.0 - upper, upper};
}

double gamma_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 1; n <= kMaxIterations; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("incomplete gamma series did not converge");
}

double gamma_continued_fraction(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
  }
  throw std::runtime_error("incomplete gamma continued fraction did not converge");
}

double clamp01(double p) { return std::clamp(p, 0.0, 1.0); }

void check_groups(const std::vector<std::vector<double>>& groups, std::size_t min_size, const char* who) {
  if (groups.size() < 2) throw std::invalid_argument(std::string(who) + " needs at least 2 groups");
  for (const auto& g : groups) {
    if (g.size() < min_size)
      throw std::invalid_argument(std::string(who) + " needs at least " + std::to_string(min_size) +
                                  " value(s) per group");
    for (double v : g) require_finite(v, who);
  }
}

}  // namespace

double regularized_beta(double x, double a, double b) {
  require_finite(x, "regularized_beta");
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("regularized_beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return clamp01(beta_pair(a, b, x, 1.0 - x).first);
}

double regularized_gamma_p(double a, double x) {
  require_finite(x, "regularized_gamma_p");
  if (!(a > 0.0)) throw std::invalid_argument("regularized_gamma_p needs a > 0");
  if (x <= 0.0) return 0.0;
  return clamp01(x < a + 1.0 ? gamma_series(a, x) : 1.0 - gamma_continued_fraction(a, x));
}

double regularized_gamma_q(double a, double x) {
  require_finite(x, "regularized_gamma_q");
  if (!(a > 0.0)) throw std::invalid_argument("regularized_gamma_q needs a > 0");
  if (x <= 0.0) return 1.0;
  return clamp01(x < a + 1.0 ? 1.0 - gamma_series(a, x) : gamma_continued_fraction(a, x));
}

double f_sf(double x, double d1, double d2) {
  require_finite(x, "f_sf");
  require_finite(d1, "f_sf");
  require_finite(d2, "f_sf");
  if (x < 0.0) throw std::invalid_argument("f_sf needs x >= 0");
  if (!(d1 >= 1.0) || !(d2 >= 1.0)) throw std::invalid_argument("f_sf needs d1, d2 >= 1");
  if (x == 0.0) return 1.0;
  // P(F > x) = I_{d2/(d2 + d1 x)}(d2/2, d1/2); both arguments formed without cancellation.
  const double denom = d2 + d1 * x;
  return clamp01(beta_pair(d2 / 2.0, d1 / 2.0, d2 / denom, d1 * x / denom).first);
}

double chi2_sf(double x, double df) {
  require_finite(x, "chi2_sf");
  require_finite(df, "chi2_sf");
  if (x < 0.0) throw std::invalid_argument("chi2_sf needs x >= 0");
  if (!(df >= 1.0)) throw std::invalid_argument("chi2_sf needs df >= 1");
  return regularized_gamma_q(df / 2.0, x / 2.0);
}

StatTestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  check_groups(groups, 2, "anova_oneway");
  StatTestResult r;
  r.method = "anova_oneway";
  std::size_t n = 0;
  double total = 0.0;
  for (const auto& g : groups) {
    n += g.size();
    total += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const double grand = total / static_cast<double>(n);
  double ssb = 0.0;
  double ssw = 0.0;
  for (const auto& g : groups) {
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ssw += (v - mean) * (v - mean);
  }
  const double k = static_cast<double>(groups.size());
  r.df1 = k - 1.0;
  r.df2 = static_cast<double>(n) - k;
  // Sums of squares below this scale are rounding noise in the group means.
  const double scale = std::max(1.0, grand * grand) * static_cast<double>(n) * 1e-24;
  if (ssw <= scale) {
    r.defined = false;
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  if (ssb <= scale) ssb = 0.0;
  r.statistic = (ssb / r.df1) / (ssw / *r.df2);
  r.p_value = f_sf(r.statistic, r.df1, *r.df2);
  return r;
}

StatTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  check_groups(groups, 1, "kruskal_wallis");
  StatTestResult r;
  r.method = "kruskal_wallis";
  r.df1 = static_cast<double>(groups.size()) - 1.0;

  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (double v : groups[gi]) pooled.emplace_back(v, gi);
  const std::size_t n = pooled.size();
  if (n < 3) throw std::invalid_argument("kruskal_wallis needs at least 3 observations");
  std::sort(pooled.begin(), pooled.end());

  std::vector<double> rank_sum(groups.size(), 0.0);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank_sum[pooled[k].second] += avg_rank;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double nn = static_cast<double>(n);
  const double correction = 1.0 - tie_term / (nn * nn * nn - nn);
  if (correction <= 0.0) {
    r.defined = false;
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  double sum = 0.0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    sum += rank_sum[gi] * rank_sum[gi] / static_cast<double>(groups[gi].size());
  double h = (12.0 / (nn * (nn + 1.0)) * sum - 3.0 * (nn + 1.0)) / correction;
  if (std::fabs(h) < 1e-9) h = 0.0;
  r.statistic = h;
  r.p_value = chi2_sf(h, r.df1);
  return r;
}

}  // namespace fc
