#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fc {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_beta(double x, double a, double b);

/// Regularized incomplete gamma, lower P(a, x) and upper Q(a, x).
double regularized_gamma_p(double a, double x);
double regularized_gamma_q(double a, double x);

/// Upper tail of the F(d1, d2) distribution.
double f_sf(double x, double d1, double d2);

/// Upper tail of the chi-squared(df) distribution.
double chi2_sf(double x, double df);

struct StatTestResult {
  std::string method;  // "anova_oneway" | "kruskal_wallis"
  double statistic = 0.0;
  double df1 = 0.0;
  std::optional<double> df2;  // ANOVA only
  double p_value = 1.0;
  bool defined = true;  // false: degenerate data ("undefined statistic")
};

/// One-way ANOVA. Needs >= 2 groups of >= 2 values each (std::invalid_argument
/// otherwise); zero within-group variance yields an undefined result.
StatTestResult anova_oneway(const std::vector<std::vector<double>>& groups);

/// Kruskal-Wallis H with average ranks and tie correction. Needs >= 2 non-empty
/// groups and N >= 3; all-identical data yields an undefined result.
StatTestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

}  // namespace fc
