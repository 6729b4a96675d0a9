#pragma once

#include <vector>

#include "phylogauss/model.hpp"

namespace phylogauss {

// Closed-form marginal moments at the tips:
//   Var[X_j] = F(alpha, t_j) .* R + q(t_j) Gamma q(t_j)
//   E[X_j]_k = e^{-a_k t_j} mu_k + (1 - e^{-a_k t_j}) beta_k (+ t_j nu_k on BM)
//   Var[Y_i] = Var[X_pa(i)] + S_i
struct TipMoments {
  std::vector<int> tip_ids;
  std::vector<VectorXd> latent_mean;  // per tip, in tip order
  std::vector<MatrixXd> latent_var;
  std::vector<MatrixXd> obs_var;  // per observation
};

TipMoments tip_moments(const ModelSpec& model);

// H_kl = V_kl(X) / sqrt(V_kk(Y) V_ll(Y)) with V the averaged per-tip
// population variances; requires exactly one observation per tip.
struct HeritabilityMatrix {
  MatrixXd h;
  VectorXd half_life;  // log 2 / alpha_k; +inf on BM dimensions
};

HeritabilityMatrix heritability(const ModelSpec& model);

// Expected empirical variance of a Gaussian vector with the given per-tip
// means and covariance: E[(1/n) sum (x_j - xbar)^2].
double expected_empirical_variance(const VectorXd& means, const MatrixXd& cov);

// The 4-tip comparison of empirical against population heritability: a
// univariate BM with variance sigma2 and iid observation variance s on the
// symmetric unit-height tree ((T1,T2),(T3,T4)), with a mean shift delta on
// the second cherry. The population statistic ignores delta; the empirical
// one inflates toward 1 as delta grows.
struct EmpiricalHeritabilityRow {
  double delta;
  double h_empirical;
  double h_population;
};

std::vector<EmpiricalHeritabilityRow> empirical_heritability_demo(
    double sigma2, double s, const std::vector<double>& deltas);

}  // namespace phylogauss
