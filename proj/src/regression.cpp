#include "prored/regression.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "prored/error.hpp"
#include "prored/special.hpp"

namespace prored {

DataFrame DataFrame::from_features(const FeatureTable& features) {
  DataFrame df;
  const std::size_t n = features.rows.size();
  df.n_rows = n;
  auto num = [&](const std::string& name) -> Eigen::VectorXd& {
    return df.numeric.try_emplace(name, Eigen::VectorXd(n)).first->second;
  };
  auto cat = [&](const std::string& name) -> std::vector<std::string>& {
    return df.categorical.try_emplace(name, std::vector<std::string>(n)).first->second;
  };
  Eigen::VectorXd& log_duration = num("log_duration");
  Eigen::VectorXd& log_freq = num("log_freq");
  Eigen::VectorXd& n_phonemes = num("n_phonemes");
  Eigen::VectorXd& log_utt_len = num("log_utt_len");
  Eigen::VectorXd& inv_rel_pos = num("inv_rel_pos");
  Eigen::VectorXd& fwd = num("fwd_logprob");
  Eigen::VectorXd& bwd = num("bwd_logprob");
  Eigen::VectorXd& utterance_n = num("utterance_n");
  auto& word_pos = cat("word_pos_key");
  auto& speaker = cat("speaker_key");
  auto& word_class = cat("word_class");
  auto& recording = cat("recording_id");
  auto& surface = cat("surface");

  for (std::size_t i = 0; i < n; ++i) {
    const FeatureRow& row = features.rows[i];
    log_duration[i] = row.log_duration;
    log_freq[i] = row.log_freq;
    n_phonemes[i] = static_cast<double>(row.n_phonemes);
    log_utt_len[i] = row.log_utt_len;
    inv_rel_pos[i] = row.inv_rel_pos;
    fwd[i] = row.fwd_logprob;
    bwd[i] = row.bwd_logprob;
    utterance_n[i] = static_cast<double>(row.utterance_n);
    word_pos[i] = row.word_pos_key;
    speaker[i] = row.speaker_key;
    word_class[i] = row.word_class;
    recording[i] = row.recording_id;
    surface[i] = row.surface;
  }
  return df;
}

DataFrame DataFrame::from_table(const Table& table, const std::set<std::string>& categorical_cols,
                                const std::string& origin) {
  DataFrame df;
  df.n_rows = table.rows.size();
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (categorical_cols.count(name)) {
      std::vector<std::string> col(df.n_rows);
      for (std::size_t r = 0; r < df.n_rows; ++r) col[r] = table.rows[r][c];
      df.categorical.emplace(name, std::move(col));
    } else {
      Eigen::VectorXd col(df.n_rows);
      for (std::size_t r = 0; r < df.n_rows; ++r) {
        col[r] = parse_double(table.rows[r][c],
                              origin + ":" + std::to_string(r + 2) + " (" + name + ")");
      }
      df.numeric.emplace(name, std::move(col));
    }
  }
  return df;
}

const Eigen::VectorXd& DataFrame::numeric_column(const std::string& name) const {
  auto it = numeric.find(name);
  if (it == numeric.end()) {
    throw Error(ErrorCategory::usage, "no numeric column named '" + name + "'");
  }
  return it->second;
}

const std::vector<std::string>& DataFrame::categorical_column(const std::string& name) const {
  auto it = categorical.find(name);
  if (it == categorical.end()) {
    throw Error(ErrorCategory::usage, "no categorical column named '" + name + "'");
  }
  return it->second;
}

namespace {

std::vector<std::string> sorted_levels(const std::vector<std::string>& column) {
  std::vector<std::string> levels(column);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  return levels;
}

struct Design {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
};

Design build_design(const DataFrame& data, const std::vector<std::string>& terms) {
  const std::size_t n = data.n_rows;
  std::vector<Eigen::VectorXd> columns;
  std::vector<std::string> names;
  columns.emplace_back(Eigen::VectorXd::Ones(n));
  names.emplace_back("(Intercept)");

  auto add_numeric = [&](const std::string& name, const Eigen::VectorXd& v) {
    columns.push_back(v);
    names.push_back(name);
  };

  for (const std::string& term : terms) {
    const std::size_t colon = term.find(':');
    if (colon == std::string::npos) {
      if (data.numeric.count(term)) {
        add_numeric(term, data.numeric_column(term));
      } else if (data.categorical.count(term)) {
        const auto& col = data.categorical_column(term);
        const auto levels = sorted_levels(col);
        if (levels.size() < 2) {
          throw Error(ErrorCategory::numeric,
                      "categorical term '" + term + "' has a single level");
        }
        for (std::size_t l = 1; l < levels.size(); ++l) {  // first level is reference
          Eigen::VectorXd v(n);
          for (std::size_t i = 0; i < n; ++i) v[i] = col[i] == levels[l] ? 1.0 : 0.0;
          add_numeric(term + "=" + levels[l], v);
        }
      } else {
        throw Error(ErrorCategory::usage, "unknown model term '" + term + "'");
      }
      continue;
    }

    std::string a = term.substr(0, colon);
    std::string b = term.substr(colon + 1);
    if (data.numeric.count(a) && data.numeric.count(b)) {
      add_numeric(term, data.numeric_column(a).cwiseProduct(data.numeric_column(b)));
      continue;
    }
    if (data.categorical.count(a) && data.numeric.count(b)) std::swap(a, b);
    if (data.numeric.count(a) && data.categorical.count(b)) {
      const Eigen::VectorXd& x = data.numeric_column(a);
      const auto& col = data.categorical_column(b);
      // one slope per level, as in per-class probability terms
      for (const std::string& level : sorted_levels(col)) {
        Eigen::VectorXd v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = col[i] == level ? x[i] : 0.0;
        add_numeric(a + ":" + b + "=" + level, v);
      }
      continue;
    }
    throw Error(ErrorCategory::usage,
                "unsupported interaction '" + term + "' (need numeric:numeric or numeric:categorical)");
  }

  Design design;
  design.X.resize(n, columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) design.X.col(c) = columns[c];
  design.names = std::move(names);
  return design;
}

void validate_spec(const DataFrame& data, const ModelSpec& spec) {
  if (spec.response.empty() || !data.numeric.count(spec.response)) {
    throw Error(ErrorCategory::usage,
                "response '" + spec.response + "' is not a numeric column");
  }
  for (const std::string& term : spec.fixed_terms) {
    if (term == spec.response) {
      throw Error(ErrorCategory::usage, "response cannot appear among fixed terms");
    }
  }
  for (const std::string& factor : spec.random_intercepts) {
    if (!data.categorical.count(factor)) {
      throw Error(ErrorCategory::usage,
                  "random factor '" + factor + "' is not a categorical column");
    }
    if (std::find(spec.fixed_terms.begin(), spec.fixed_terms.end(), factor) !=
        spec.fixed_terms.end()) {
      throw Error(ErrorCategory::usage,
                  "factor '" + factor + "' cannot be both fixed and random");
    }
  }
}

void check_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank == X.cols()) return;
  const auto perm = qr.colsPermutation().indices();
  std::ostringstream msg;
  msg << "design matrix is rank deficient; collinear terms:";
  for (Eigen::Index j = rank; j < X.cols(); ++j) msg << " '" << names[perm[j]] << "'";
  throw Error(ErrorCategory::numeric, msg.str());
}

double gaussian_ml_loglik(double rss, double n) {
  return -0.5 * n * (1.0 + std::log(2.0 * M_PI * rss / n));
}

std::vector<Coefficient> wald_table(const std::vector<std::string>& names,
                                    const Eigen::VectorXd& beta, const Eigen::VectorXd& se) {
  std::vector<Coefficient> out(names.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    out[j].term = names[j];
    out[j].estimate = beta[j];
    out[j].std_error = se[j];
    out[j].t_value = beta[j] / se[j];
    out[j].p_value = normal_two_sided_p(out[j].t_value);
  }
  return out;
}

}  // namespace

const Coefficient& FitResult::coefficient(const std::string& term) const {
  for (const Coefficient& c : coefficients) {
    if (c.term == term) return c;
  }
  throw Error(ErrorCategory::usage, "fit has no term '" + term + "'");
}

FitResult fit_ols(const DataFrame& data, const ModelSpec& spec) {
  validate_spec(data, spec);
  if (!spec.random_intercepts.empty()) {
    throw Error(ErrorCategory::usage, "fit_ols does not accept random intercepts");
  }
  Design design = build_design(data, spec.fixed_terms);
  const Eigen::VectorXd& y = data.numeric_column(spec.response);
  const Eigen::Index n = design.X.rows();
  const Eigen::Index p = design.X.cols();
  if (n <= p) {
    throw Error(ErrorCategory::numeric, "need more observations than fixed-effect columns");
  }
  check_full_rank(design.X, design.names);

  Eigen::LLT<Eigen::MatrixXd> llt(design.X.transpose() * design.X);
  const Eigen::VectorXd beta = llt.solve(design.X.transpose() * y);
  const Eigen::VectorXd resid = y - design.X * beta;
  const double rss = resid.squaredNorm();
  const double sigma2 = rss / static_cast<double>(n - p);
  const Eigen::MatrixXd cov =
      sigma2 * llt.solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd se = cov.diagonal().cwiseSqrt();

  FitResult fit;
  fit.coefficients = wald_table(design.names, beta, se);
  fit.sigma2_residual = sigma2;
  fit.ml_log_likelihood = gaussian_ml_loglik(rss, static_cast<double>(n));
  fit.log_likelihood = fit.ml_log_likelihood;
  fit.criterion = FitCriterion::ml;
  fit.n_obs = static_cast<std::size_t>(n);
  fit.converged = true;
  fit.trace.iterations = 1;
  fit.trace.final_deviance = -2.0 * fit.ml_log_likelihood;
  fit.response = spec.response;
  fit.fixed_terms = spec.fixed_terms;
  return fit;
}

namespace {

// Shared state for profiled-deviance evaluations. The sparse blocked system
//
//   [ L'Z'ZL + I   L'Z'X ] [u]   [L'Z'y]
//   [ X'ZL         X'X   ] [b] = [X'y  ]
//
// is solved by a sparse LDL' factorization of the u block and a dense
// Cholesky of its Schur complement (the profiled fixed-effect block).
class ProfiledLmm {
 public:
  ProfiledLmm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
              const std::vector<const std::vector<std::string>*>& factor_columns,
              const std::vector<std::string>& factor_names)
      : X_(X), y_(y) {
    n_ = X.rows();
    p_ = X.cols();
    k_ = static_cast<int>(factor_columns.size());

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(n_) * k_);
    int offset = 0;
    for (int g = 0; g < k_; ++g) {
      const auto& col = *factor_columns[g];
      const auto levels = sorted_levels(col);
      if (levels.size() < 2) {
        throw Error(ErrorCategory::usage,
                    "random factor '" + factor_names[g] + "' needs at least 2 levels");
      }
      std::unordered_map<std::string, int> index;
      for (std::size_t l = 0; l < levels.size(); ++l) {
        index[levels[l]] = offset + static_cast<int>(l);
      }
      for (Eigen::Index i = 0; i < n_; ++i) triplets.emplace_back(index[col[i]], i, 1.0);
      block_offsets_.push_back(offset);
      block_sizes_.push_back(static_cast<int>(levels.size()));
      offset += static_cast<int>(levels.size());
    }
    q_ = offset;

    Zt_.resize(q_, n_);
    Zt_.setFromTriplets(triplets.begin(), triplets.end());
    Zt_.makeCompressed();

    ZtZ_ = (Zt_ * Zt_.transpose()).pruned();
    ZtZ_.makeCompressed();
    ZtX_ = Zt_ * X_;
    Zty_ = Zt_ * y_;
    XtX_ = X_.transpose() * X_;
    Xty_ = X_.transpose() * y_;

    // pattern of L'Z'ZL + I equals that of Z'Z (its diagonal is dense in
    // the occupied levels), so the symbolic analysis is done once
    Eigen::SparseMatrix<double> pattern = ZtZ_;
    solver_.analyzePattern(pattern);
  }

  int n_factors() const { return k_; }
  Eigen::Index n_obs() const { return n_; }
  Eigen::Index n_fixed() const { return p_; }
  int block_size(int g) const { return block_sizes_[g]; }

  struct Eval {
    bool ok = false;
    double dev_ml = std::numeric_limits<double>::infinity();
    double dev_reml = std::numeric_limits<double>::infinity();
    double r2 = 0.0;
    double logdet_a = 0.0;
    double logdet_rx = 0.0;
    Eigen::VectorXd beta;
    Eigen::MatrixXd rxt_rx;  // X' V0^-1 X at this theta
  };

  Eval evaluate(const Eigen::VectorXd& theta) {
    Eval eval;
    Eigen::VectorXd scale(q_);
    for (int g = 0; g < k_; ++g) {
      const double s = std::sqrt(std::max(theta[g], 0.0));
      scale.segment(block_offsets_[g], block_sizes_[g]).setConstant(s);
    }

    // A = diag(scale) Z'Z diag(scale) + I, same pattern as Z'Z
    Eigen::SparseMatrix<double> a = ZtZ_;
    for (int col = 0; col < a.outerSize(); ++col) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, col); it; ++it) {
        it.valueRef() *= scale[it.row()] * scale[col];
        if (it.row() == col) it.valueRef() += 1.0;
      }
    }
    solver_.factorize(a);
    if (solver_.info() != Eigen::Success) return eval;

    Eigen::MatrixXd rhs(q_, p_ + 1);
    rhs.col(0) = scale.asDiagonal() * Zty_;
    rhs.rightCols(p_) = scale.asDiagonal() * ZtX_;
    const Eigen::MatrixXd sol = solver_.solve(rhs);
    const Eigen::VectorXd cu = rhs.col(0);
    const Eigen::MatrixXd b = rhs.rightCols(p_);
    const Eigen::VectorXd sol_cu = sol.col(0);
    const Eigen::MatrixXd sol_b = sol.rightCols(p_);

    eval.rxt_rx = XtX_ - b.transpose() * sol_b;
    Eigen::LLT<Eigen::MatrixXd> llt(eval.rxt_rx);
    if (llt.info() != Eigen::Success) return eval;
    eval.beta = llt.solve(Xty_ - b.transpose() * sol_cu);

    const Eigen::VectorXd u = sol_cu - sol_b * eval.beta;
    const Eigen::VectorXd resid =
        y_ - X_ * eval.beta - Zt_.transpose() * (scale.asDiagonal() * u);
    eval.r2 = resid.squaredNorm() + u.squaredNorm();

    eval.logdet_a = solver_.vectorD().array().log().sum();
    eval.logdet_rx = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    const double n = static_cast<double>(n_);
    const double np = static_cast<double>(n_ - p_);
    eval.dev_ml = eval.logdet_a + n * (1.0 + std::log(2.0 * M_PI * eval.r2 / n));
    eval.dev_reml =
        eval.logdet_a + eval.logdet_rx + np * (1.0 + std::log(2.0 * M_PI * eval.r2 / np));
    eval.ok = true;
    return eval;
  }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  Eigen::Index n_ = 0, p_ = 0;
  int k_ = 0, q_ = 0;
  std::vector<int> block_offsets_, block_sizes_;
  Eigen::SparseMatrix<double> Zt_, ZtZ_;
  Eigen::MatrixXd ZtX_, XtX_;
  Eigen::VectorXd Zty_, Xty_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

constexpr double kLogThetaFloor = -23.025850929940457;  // log(1e-10)
constexpr double kLogThetaCeil = 18.420680743952367;    // log(1e8)

Eigen::VectorXd clamp_omega(Eigen::VectorXd omega) {
  for (Eigen::Index i = 0; i < omega.size(); ++i) {
    omega[i] = std::clamp(omega[i], kLogThetaFloor, kLogThetaCeil);
  }
  return omega;
}

// Deterministic Nelder-Mead over log variance ratios followed by a damped
// Newton polish on finite differences; returns the best point found.
template <typename F>
Eigen::VectorXd minimize_deviance(F&& f, int dim, const LmmOptions& options, int* evals_out,
                                  bool* converged_out) {
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& omega) {
    ++evals;
    return f(clamp_omega(omega));
  };

  const int max_evals = options.max_iterations;
  bool converged = false;

  std::vector<Eigen::VectorXd> simplex(dim + 1, Eigen::VectorXd::Zero(dim));
  for (int i = 0; i < dim; ++i) simplex[i + 1][i] = 1.0;
  std::vector<double> fx(dim + 1);
  for (int i = 0; i <= dim; ++i) fx[i] = eval(simplex[i]);

  auto order_simplex = [&] {
    std::vector<int> idx(dim + 1);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> f2;
    for (int i : idx) {
      s2.push_back(simplex[i]);
      f2.push_back(fx[i]);
    }
    simplex = std::move(s2);
    fx = std::move(f2);
  };

  while (evals < max_evals) {
    order_simplex();
    double spread = 0.0;
    double step = 0.0;
    for (int i = 1; i <= dim; ++i) {
      spread = std::max(spread, std::abs(fx[i] - fx[0]));
      step = std::max(step,
                      (clamp_omega(simplex[i]).array().exp() -
                       clamp_omega(simplex[0]).array().exp())
                          .abs()
                          .maxCoeff());
    }
    if (spread < options.deviance_tol && step < options.theta_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) centroid += simplex[i];
    centroid /= dim;

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[dim]);
    const double fr = eval(reflected);
    if (fr < fx[0]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[dim]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[dim] = expanded;
        fx[dim] = fe;
      } else {
        simplex[dim] = reflected;
        fx[dim] = fr;
      }
    } else if (fr < fx[dim - 1]) {
      simplex[dim] = reflected;
      fx[dim] = fr;
    } else {
      const Eigen::VectorXd contracted = centroid + 0.5 * (simplex[dim] - centroid);
      const double fc = eval(contracted);
      if (fc < fx[dim]) {
        simplex[dim] = contracted;
        fx[dim] = fc;
      } else {
        for (int i = 1; i <= dim; ++i) {
          simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
          fx[i] = eval(simplex[i]);
        }
      }
    }
  }
  order_simplex();

  // Newton polish on central differences; keeps only improving steps.
  Eigen::VectorXd omega = clamp_omega(simplex[0]);
  double fbest = fx[0];
  const double h = 1e-4;
  for (int round = 0; round < 12 && evals + 4 * dim * dim + 2 * dim < max_evals; ++round) {
    Eigen::VectorXd grad(dim);
    Eigen::MatrixXd hess(dim, dim);
    std::vector<double> fplus(dim), fminus(dim);
    for (int i = 0; i < dim; ++i) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
      e[i] = h;
      fplus[i] = eval(omega + e);
      fminus[i] = eval(omega - e);
      grad[i] = (fplus[i] - fminus[i]) / (2.0 * h);
      hess(i, i) = (fplus[i] - 2.0 * fbest + fminus[i]) / (h * h);
    }
    for (int i = 0; i < dim; ++i) {
      for (int j = i + 1; j < dim; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
        e[i] = h;
        e[j] = h;
        const double fpp = eval(omega + e);
        e[j] = -h;
        const double fpm = eval(omega + e);
        e[i] = -h;
        const double fmm = eval(omega + e);
        e[j] = h;
        const double fmp = eval(omega + e);
        hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
      }
    }
    if (grad.cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, std::abs(fbest))) break;

    Eigen::MatrixXd damped = hess;
    double ridge = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt(damped);
    while (llt.info() != Eigen::Success && ridge < 1e6) {
      ridge = ridge == 0.0 ? 1e-6 : ridge * 10.0;
      damped = hess + ridge * Eigen::MatrixXd::Identity(dim, dim);
      llt.compute(damped);
    }
    if (llt.info() != Eigen::Success) break;

    Eigen::VectorXd direction = -llt.solve(grad);
    double scale = 1.0;
    bool improved = false;
    for (int half = 0; half < 25; ++half) {
      const Eigen::VectorXd candidate = clamp_omega(omega + scale * direction);
      const double fc = eval(candidate);
      if (fc < fbest) {
        omega = candidate;
        fbest = fc;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }

  if (evals_out) *evals_out = evals;
  if (converged_out) *converged_out = converged;
  return omega;
}

}  // namespace

FitResult fit_lmm(const DataFrame& data, const ModelSpec& spec, const LmmOptions& options) {
  validate_spec(data, spec);
  if (spec.random_intercepts.empty()) {
    throw Error(ErrorCategory::usage, "fit_lmm requires at least one random factor");
  }
  Design design = build_design(data, spec.fixed_terms);
  const Eigen::VectorXd& y = data.numeric_column(spec.response);
  const Eigen::Index n = design.X.rows();
  const Eigen::Index p = design.X.cols();
  if (n <= p) {
    throw Error(ErrorCategory::numeric, "need more observations than fixed-effect columns");
  }
  check_full_rank(design.X, design.names);

  std::vector<const std::vector<std::string>*> factor_columns;
  for (const std::string& factor : spec.random_intercepts) {
    factor_columns.push_back(&data.categorical_column(factor));
  }
  ProfiledLmm profile(design.X, y, factor_columns, spec.random_intercepts);
  const int k = profile.n_factors();
  const bool use_reml = spec.criterion == FitCriterion::reml;

  auto deviance_at = [&](const Eigen::VectorXd& omega) {
    const Eigen::VectorXd theta = omega.array().exp();
    const ProfiledLmm::Eval eval = profile.evaluate(theta);
    if (!eval.ok) return std::numeric_limits<double>::infinity();
    return use_reml ? eval.dev_reml : eval.dev_ml;
  };

  Eigen::VectorXd theta_hat(k);
  int evals = 0;
  bool converged = true;
  if (options.fixed_theta) {
    if (static_cast<int>(options.fixed_theta->size()) != k) {
      throw Error(ErrorCategory::usage, "fixed_theta size must match the number of random factors");
    }
    for (int g = 0; g < k; ++g) {
      if ((*options.fixed_theta)[g] < 0.0) {
        throw Error(ErrorCategory::usage, "variance ratios must be nonnegative");
      }
      theta_hat[g] = (*options.fixed_theta)[g];
    }
    evals = 1;
  } else {
    const Eigen::VectorXd omega_hat =
        minimize_deviance(deviance_at, k, options, &evals, &converged);
    theta_hat = omega_hat.array().exp();
  }

  ProfiledLmm::Eval eval = profile.evaluate(theta_hat);
  if (!eval.ok) {
    throw Error(ErrorCategory::numeric, "mixed-model system could not be factorized at the optimum");
  }

  const double n_d = static_cast<double>(n);
  const double np_d = static_cast<double>(n - p);
  const double sigma2 = use_reml ? eval.r2 / np_d : eval.r2 / n_d;

  FitResult fit;
  fit.criterion = spec.criterion;
  fit.n_obs = static_cast<std::size_t>(n);
  fit.converged = converged;
  fit.trace.iterations = evals;
  fit.trace.final_deviance = use_reml ? eval.dev_reml : eval.dev_ml;
  fit.ml_log_likelihood = -0.5 * eval.dev_ml;
  fit.log_likelihood = use_reml ? -0.5 * eval.dev_reml : fit.ml_log_likelihood;
  fit.sigma2_residual = sigma2;
  fit.response = spec.response;
  fit.fixed_terms = spec.fixed_terms;

  const Eigen::MatrixXd cov =
      sigma2 * eval.rxt_rx.llt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.coefficients = wald_table(design.names, eval.beta, cov.diagonal().cwiseSqrt());

  fit.theta.resize(k);
  for (int g = 0; g < k; ++g) {
    fit.theta[g] = theta_hat[g];
    if (theta_hat[g] <= 1e-8) fit.boundary = true;
    VarianceComponent vc;
    vc.factor = spec.random_intercepts[g];
    vc.variance = theta_hat[g] * sigma2;
    vc.n_levels = static_cast<std::size_t>(profile.block_size(g));
    fit.variance_components.push_back(vc);
  }
  return fit;
}

ComparisonResult compare_models(const FitResult& fit_a, const FitResult& fit_b, bool nested,
                                int df_diff) {
  if (fit_a.n_obs != fit_b.n_obs) {
    throw Error(ErrorCategory::data,
                "fits cover " + std::to_string(fit_a.n_obs) + " vs " +
                    std::to_string(fit_b.n_obs) + " rows; likelihoods are incomparable");
  }
  if (fit_a.response != fit_b.response) {
    throw Error(ErrorCategory::data, "fits model different responses; likelihoods are incomparable");
  }
  ComparisonResult result;
  result.delta_ll = std::abs(fit_a.ml_log_likelihood - fit_b.ml_log_likelihood);
  result.chi_sq = 2.0 * result.delta_ll;
  result.df = df_diff;
  result.nested = nested;
  if (nested) {
    if (df_diff < 1) {
      throw Error(ErrorCategory::usage, "nested comparison requires df >= 1");
    }
    result.p_value = chi_squared_sf(result.chi_sq, static_cast<double>(df_diff));
  }
  return result;
}

std::vector<ReportRow> coefficient_report(
    const std::vector<std::pair<std::string, FitResult>>& fits) {
  std::vector<ReportRow> rows;
  for (const auto& [label, fit] : fits) {
    if (!fit.converged) {
      throw Error(ErrorCategory::usage, "fit '" + label + "' did not converge; no report emitted");
    }
    for (const Coefficient& c : fit.coefficients) {
      ReportRow row;
      row.label = label;
      row.term = c.term;
      row.estimate = c.estimate;
      row.se = c.std_error;
      row.t = c.t_value;
      row.p = c.p_value;
      row.abs_t = std::abs(c.t_value);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

ModelSpec model_spec_from_json(const std::string& json_text, const std::string& origin) {
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCategory::schema, origin + ": invalid JSON: " + e.what());
  }
  ModelSpec spec;
  try {
    spec.response = parsed.at("response").get<std::string>();
    spec.fixed_terms = parsed.at("fixed").get<std::vector<std::string>>();
    if (parsed.contains("random")) {
      spec.random_intercepts = parsed.at("random").get<std::vector<std::string>>();
    }
    std::string criterion = parsed.value("criterion", "reml");
    if (criterion == "reml") {
      spec.criterion = FitCriterion::reml;
    } else if (criterion == "ml") {
      spec.criterion = FitCriterion::ml;
    } else {
      throw Error(ErrorCategory::schema, origin + ": criterion must be 'ml' or 'reml'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::schema, origin + ": bad model spec: " + e.what());
  }
  return spec;
}

std::string model_spec_to_json(const ModelSpec& spec) {
  nlohmann::json out;
  out["response"] = spec.response;
  out["fixed"] = spec.fixed_terms;
  out["random"] = spec.random_intercepts;
  out["criterion"] = spec.criterion == FitCriterion::reml ? "reml" : "ml";
  return out.dump(2) + "\n";
}

}  // namespace prored
