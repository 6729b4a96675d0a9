#pragma once

#include <Eigen/Dense>
#include <vector>

#include "phylogauss/likelihood.hpp"

namespace phylogauss {

// Per-node cotangents of the log-likelihood with respect to the above-data
// moments of that node: d_mean pairs with n_k and d_prec (a symmetric
// matrix under the Frobenius pairing) with Q_k.
struct BranchGradient {
  VectorXd d_mean;  // Q_k (M_k - n_k)
  MatrixXd d_prec;  // 1/2 (Q_k^-1 - (M_k-n_k)(M_k-n_k)' - V_k)
};

// DAG-indexed; entries for a fixed root's node are zero.
std::vector<BranchGradient> branch_gradients(const EngineContext& ctx,
                                             const PostOrderState& post,
                                             const PreOrderState& pre);

// Gradient with respect to the natural parameters. Matrix-valued entries
// are full symmetric cotangents G: d logL = sum_kl G_kl dM_kl, so the
// derivative along a single off-diagonal coordinate of a symmetric
// parameter is 2 G_kl. Blocks absent from the model are zero-sized.
struct NaturalGradient {
  VectorXd d_root_mean;        // mu
  MatrixXd d_root_variance;    // Gamma; random root only
  VectorXd d_drift;            // nu over BM dimensions; only when has_drift
  MatrixXd d_diffusion;        // R
  VectorXd d_sigma;            // decomposed from R
  MatrixXd d_correlation;      // decomposed from R
  VectorXd d_alpha;            // over OU dimensions
  VectorXd d_optimum;          // beta over OU dimensions
  MatrixXd d_obs_variance;     // base S; absent when kind == None
  VectorXd d_obs_sdev;         // decomposed from S
  MatrixXd d_obs_correlation;  // correlated structure only
};

std::pair<double, NaturalGradient> natural_gradient(const ModelSpec& model,
                                                    const TraitData& data);
std::pair<double, NaturalGradient> natural_gradient(const EngineContext& ctx);

// Indices of BM / OU dimensions, in trait order; fixes the layout of the
// d_drift, d_alpha and d_optimum blocks.
std::vector<int> bm_dimensions(const EvolutionParams& evo);
std::vector<int> ou_dimensions(const EvolutionParams& evo);

}  // namespace phylogauss
