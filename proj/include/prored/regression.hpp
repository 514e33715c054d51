#ifndef PRORED_REGRESSION_HPP
#define PRORED_REGRESSION_HPP

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "prored/features.hpp"
#include "prored/tsv.hpp"

namespace prored {

// Minimal column store feeding the model fitters.
struct DataFrame {
  std::size_t n_rows = 0;
  std::map<std::string, Eigen::VectorXd> numeric;
  std::map<std::string, std::vector<std::string>> categorical;

  static DataFrame from_features(const FeatureTable& features);
  static DataFrame from_table(const Table& table, const std::set<std::string>& categorical_cols,
                              const std::string& origin);

  const Eigen::VectorXd& numeric_column(const std::string& name) const;
  const std::vector<std::string>& categorical_column(const std::string& name) const;
};

enum class FitCriterion { ml, reml };

// Fixed terms: a numeric column name, "numeric:categorical" for per-level
// slopes, or a categorical column name for treatment-coded dummies (first
// level in sorted order is the reference). The intercept is implicit.
struct ModelSpec {
  std::string response;
  std::vector<std::string> fixed_terms;
  std::vector<std::string> random_intercepts;
  FitCriterion criterion = FitCriterion::reml;
};

ModelSpec model_spec_from_json(const std::string& json_text, const std::string& origin);
std::string model_spec_to_json(const ModelSpec& spec);

struct Coefficient {
  std::string term;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_value = 0.0;
  double p_value = 1.0;  // Wald normal approximation
};

struct VarianceComponent {
  std::string factor;
  double variance = 0.0;
  std::size_t n_levels = 0;
};

struct OptimizerTrace {
  int iterations = 0;
  double final_deviance = 0.0;
};

struct FitResult {
  std::vector<Coefficient> coefficients;
  std::vector<VarianceComponent> variance_components;
  double sigma2_residual = 0.0;
  double log_likelihood = 0.0;     // at the fitted criterion
  double ml_log_likelihood = 0.0;  // always stored for model comparison
  FitCriterion criterion = FitCriterion::reml;
  std::size_t n_obs = 0;
  bool converged = false;
  bool boundary = false;  // some variance ratio pinned at zero
  OptimizerTrace trace;
  std::vector<double> theta;  // fitted variance ratios, one per random factor
  std::string response;
  std::vector<std::string> fixed_terms;

  const Coefficient& coefficient(const std::string& term) const;
};

struct LmmOptions {
  int max_iterations = 600;
  double deviance_tol = 1e-8;
  double theta_tol = 1e-6;
  // When set, skips optimization and evaluates at these variance ratios.
  std::optional<std::vector<double>> fixed_theta;
};

// Exact least squares via column-pivoted QR; errors name collinear terms.
FitResult fit_ols(const DataFrame& data, const ModelSpec& spec);

// Gaussian random-intercept model with crossed grouping factors, fitted by
// profiled (restricted) deviance over variance ratios theta_g = sigma_g^2 /
// sigma^2. Fixed effects and the residual variance are profiled out; each
// evaluation solves the sparse mixed-model normal equations by a symmetric
// positive-definite factorization. The optimizer is deterministic
// (Nelder-Mead over log theta from theta = 1, Newton polish on the
// numerical gradient).
FitResult fit_lmm(const DataFrame& data, const ModelSpec& spec, const LmmOptions& options = {});

struct ComparisonResult {
  double delta_ll = 0.0;
  double chi_sq = 0.0;  // always 2 * delta_ll
  int df = 0;
  bool nested = false;
  std::optional<double> p_value;  // absent: non-nested, descriptive only
};

// Compares ML log-likelihoods of two fits over the same rows.
ComparisonResult compare_models(const FitResult& fit_a, const FitResult& fit_b, bool nested,
                                int df_diff);

struct ReportRow {
  std::string label;
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
  double abs_t = 0.0;
};

std::vector<ReportRow> coefficient_report(
    const std::vector<std::pair<std::string, FitResult>>& fits);

}  // namespace prored

#endif  // PRORED_REGRESSION_HPP
