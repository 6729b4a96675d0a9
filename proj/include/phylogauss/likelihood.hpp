#pragma once

#include <Eigen/Dense>
#include <vector>

#include "phylogauss/model.hpp"
#include "phylogauss/trait_data.hpp"

namespace phylogauss {

// The engines run on a DAG that mirrors the tree plus one external node per
// observation. DAG indices place the N observation nodes first, followed by
// the m tree nodes. When the model carries no observation layer
// (ObsKind::None) the data sit directly on the tips, one observation per
// tip, and the DAG is the tree itself.
struct EngineContext {
  const ModelSpec* model = nullptr;
  const TraitData* data = nullptr;
  ModelBranches branches;
  bool direct_tips = false;
  int n_leaf_units = 0;  // number of observation DAG nodes (0 when direct)
  std::vector<std::vector<int>> obs_of_tip;  // tip node id -> observation rows

  int dag_size() const { return n_leaf_units + model->tree->node_count(); }
  int dag(int node) const { return n_leaf_units + node; }
};

EngineContext make_context(const ModelSpec& model, const TraitData& data);

// Post-order pass: for every DAG node k, the density of the data below k
// given the latent value at k is log rho_k + log phi(x; m_k, P_k), with
// pseudo-Gaussian phi. Remainders are accumulated in the reduced form that
// cancels rank and pseudo-determinant terms between successive levels, so
// the only spectral factorizations left are the observation initializations
// and the pseudo-inverse used for m_k.
struct PostOrderState {
  int p = 0;
  bool vacuous = false;  // no observed cell anywhere

  // DAG-indexed.
  std::vector<VectorXd> mean;              // observations: masked y; nodes: m_k
  std::vector<MatrixXd> deflated;          // P-tilde_k; root entry unused
  std::vector<MatrixXd> to_parent_prec;    // q' P-tilde q
  std::vector<VectorXd> to_parent_h;       // q' P-tilde (m - r)
  std::vector<double> ss;                  // (m - r)' P-tilde (m - r)

  // Tree-node indexed.
  std::vector<MatrixXd> precision;  // P_k
  std::vector<VectorXd> h;          // sum of child contributions; P_k m_k = h_k
  std::vector<double> log_remainder;
};

struct LikelihoodResult {
  double log_likelihood = 0.0;
  bool vacuous = false;
  PostOrderState post;
};

LikelihoodResult log_likelihood(const EngineContext& ctx);
LikelihoodResult log_likelihood(const ModelSpec& model, const TraitData& data);

// Pre-order pass: above-data moments (n_k, Q_k) of p(x_k | data not below k)
// and full conditional moments (M_k, V_k) of p(x_k | all data). Q_k is
// positive definite for every non-root node; with a fixed root the root
// itself is a point mass and the hat quantities of its children vanish.
struct PreOrderState {
  int p = 0;
  bool root_fixed = false;

  // DAG-indexed.
  std::vector<MatrixXd> above_prec;  // Q_k
  std::vector<MatrixXd> above_var;   // Omega_k = Q_k^-1
  std::vector<VectorXd> above_mean;  // n_k
  std::vector<MatrixXd> hat_var;     // Var of parent | data above k and siblings
  std::vector<VectorXd> hat_mean;
  std::vector<MatrixXd> cond_var;    // V_k
  std::vector<VectorXd> cond_mean;   // M_k
};

PreOrderState pre_order_moments(const EngineContext& ctx, const PostOrderState& post);
PreOrderState pre_order_moments(const ModelSpec& model, const TraitData& data,
                                const PostOrderState& post);

// Posterior mean and variance of the latent trait at every tree node.
struct AncestralMoments {
  std::vector<VectorXd> mean;  // node-indexed
  std::vector<MatrixXd> var;
};
AncestralMoments ancestral_reconstruction(const ModelSpec& model, const TraitData& data);

}  // namespace phylogauss
