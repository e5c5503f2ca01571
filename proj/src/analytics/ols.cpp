#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <set>

#include "sonder/analytics.hpp"
#include "sonder/error.hpp"

namespace sonder {

namespace {

// Index of the first column that lies in the span of the columns before it.
Eigen::Index first_collinear_column(const Eigen::MatrixXd& x) {
  for (Eigen::Index j = 1; j <= x.cols(); ++j) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.leftCols(j));
    if (qr.rank() < j) return j - 1;
  }
  return x.cols() - 1;
}

}  // namespace

const Coefficient& RegressionFit::at(std::string_view term) const {
  for (const auto& c : coefficients) {
    if (c.term == term) return c;
  }
  throw Error(ErrorCode::NotFound, "no coefficient named '" + std::string(term) + "'");
}

bool RegressionFit::has(std::string_view term) const {
  return std::any_of(coefficients.begin(), coefficients.end(), [&](const Coefficient& c) { return c.term == term; });
}

RegressionFit ols_fit(const Eigen::Ref<const Eigen::MatrixXd>& covariates, std::span<const std::string> names,
                      const Eigen::Ref<const Eigen::VectorXd>& outcome, const OlsOptions& options) {
  const Eigen::Index n = outcome.size();
  const Eigen::Index k = covariates.cols();
  if (covariates.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "covariates have " + std::to_string(covariates.rows()) +
                                                  " rows for " + std::to_string(n) + " outcomes");
  }
  if (static_cast<Eigen::Index>(names.size()) != k) {
    throw Error(ErrorCode::DimensionMismatch, "covariate names do not match the column count");
  }
  if (!options.standardize.empty() && static_cast<Eigen::Index>(options.standardize.size()) != k) {
    throw Error(ErrorCode::DimensionMismatch, "standardize flags do not match the column count");
  }
  if (!covariates.allFinite() || !outcome.allFinite()) {
    throw Error(ErrorCode::InvalidInput, "design or outcome contains NaN or Inf");
  }

  // Assemble [intercept | covariates | fixed-effect dummies].
  std::vector<std::string> columns;
  std::vector<Eigen::VectorXd> blocks;
  if (options.intercept) {
    columns.emplace_back(kInterceptTerm);
    blocks.push_back(Eigen::VectorXd::Ones(n));
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    columns.push_back(names[static_cast<std::size_t>(j)]);
    if (!options.standardize.empty() && options.standardize[static_cast<std::size_t>(j)]) {
      try {
        blocks.push_back(standardize(covariates.col(j)));
      } catch (const Error& e) {
        throw Error(ErrorCode::RankDeficient,
                    "column '" + names[static_cast<std::size_t>(j)] + "' cannot be standardized: " + e.what());
      }
    } else {
      blocks.push_back(covariates.col(j));
    }
  }
  const std::size_t n_reported = columns.size();

  std::size_t absorbed = 0;
  for (const auto& fe : options.fixed_effects) {
    if (static_cast<Eigen::Index>(fe.levels.size()) != n) {
      throw Error(ErrorCode::DimensionMismatch, "fixed effect '" + fe.name + "' has the wrong length");
    }
    const std::set<std::string> levels(fe.levels.begin(), fe.levels.end());
    auto it = levels.begin();
    if (options.intercept && it != levels.end()) ++it;  // drop the first level
    for (; it != levels.end(); ++it) {
      Eigen::VectorXd dummy(n);
      for (Eigen::Index i = 0; i < n; ++i) dummy[i] = fe.levels[static_cast<std::size_t>(i)] == *it ? 1.0 : 0.0;
      columns.push_back(fe.name + "=" + *it);
      blocks.push_back(std::move(dummy));
      ++absorbed;
    }
  }

  const auto p = static_cast<Eigen::Index>(blocks.size());
  if (p == 0) throw Error(ErrorCode::InvalidInput, "empty design");
  if (n <= p) {
    throw Error(ErrorCode::InvalidInput,
                std::to_string(n) + " observations cannot identify " + std::to_string(p) + " parameters");
  }
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index j = 0; j < p; ++j) x.col(j) = blocks[static_cast<std::size_t>(j)];

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p) {
    const auto bad = first_collinear_column(x);
    throw Error(ErrorCode::RankDeficient,
                "column '" + columns[static_cast<std::size_t>(bad)] + "' is collinear with earlier columns");
  }

  const Eigen::VectorXd beta = qr.solve(outcome);
  const Eigen::VectorXd resid = outcome - x * beta;
  const double rss = resid.squaredNorm();
  const double df = static_cast<double>(n - p);

  // (X'X)^-1 = P R^-1 R^-T P^T from X P = Q R.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd pivoted = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = perm * pivoted * perm.transpose();

  Eigen::MatrixXd cov;
  if (options.robust_se) {
    const Eigen::MatrixXd meat = x.transpose() * resid.array().square().matrix().asDiagonal() * x;
    cov = (static_cast<double>(n) / df) * xtx_inv * meat * xtx_inv;
  } else {
    cov = (rss / df) * xtx_inv;
  }

  RegressionFit fit;
  fit.outcome = options.outcome_name;
  fit.n_obs = static_cast<std::size_t>(n);
  fit.df_resid = static_cast<std::size_t>(n - p);
  fit.absorbed_levels = absorbed;
  fit.robust_se = options.robust_se;
  for (const auto& fe : options.fixed_effects) fit.fixed_effects.push_back(fe.name);

  const double centre = options.intercept ? outcome.mean() : 0.0;
  const double tss = (outcome.array() - centre).square().sum();
  fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;

  for (std::size_t j = 0; j < n_reported; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    Coefficient c;
    c.term = columns[j];
    c.estimate = beta[jj];
    c.std_error = std::sqrt(std::max(0.0, cov(jj, jj)));
    if (c.std_error > 0.0) {
      c.t_value = c.estimate / c.std_error;
      c.p_value = two_sided_t_p(c.t_value, df);
    } else {
      c.t_value = c.estimate == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c.estimate);
      c.p_value = c.estimate == 0.0 ? 1.0 : 0.0;
    }
    fit.coefficients.push_back(std::move(c));
  }
  return fit;
}

}  // namespace sonder
