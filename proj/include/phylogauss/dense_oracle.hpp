#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "phylogauss/model.hpp"
#include "phylogauss/trait_data.hpp"

namespace phylogauss {

// Brute-force reference: the joint Gaussian over every observation and
// latent node coordinate, built by composing the per-branch conditionals.
// Quadratic storage and cubic solves by design; guarded against large use.
struct DenseJoint {
  int p = 0;
  int n_obs = 0;    // observation blocks come first
  int n_nodes = 0;  // then one block per tree node
  VectorXd mean;
  MatrixXd cov;

  int obs_coord(int obs, int trait) const { return obs * p + trait; }
  int node_coord(int node, int trait) const { return (n_obs + node) * p + trait; }
  int dim() const { return (n_obs + n_nodes) * p; }

  MatrixXd node_cov(int a, int b) const;
  VectorXd node_mean(int a) const;
};

// Composition along the tree: E[X_j] = q_j E[X_pa] + r_j and
// Cov[X_j, .] = q_j Cov[X_pa, .], Var[X_j] = q_j Var[X_pa] q_j' + Sigma_j.
// A fixed root enters as a point mass. Guard: (N + m) * p <= 2000.
DenseJoint build_dense(const ModelSpec& model);

// Log density of the observed cells under the dense joint. Throws
// std::domain_error naming the offending coordinates if the observed
// covariance is numerically singular. Returns 0 when nothing is observed.
double dense_loglik(const DenseJoint& dense, const TraitData& data);

// Conditional mean and variance of every coordinate (observations and
// nodes) given the observed cells, by Schur complement.
struct DenseConditional {
  VectorXd mean;
  MatrixXd cov;
};
DenseConditional dense_conditional(const DenseJoint& dense, const TraitData& data);

// Conditional moments of one p-block extracted from a DenseConditional.
std::pair<VectorXd, MatrixXd> conditional_block(const DenseJoint& dense,
                                                const DenseConditional& cond,
                                                int first_coord, int p);

}  // namespace phylogauss
