#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "phylogauss/tree.hpp"

namespace phylogauss {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Per-edge Gaussian propagation: child | parent ~ N(q * parent + r, Sigma).
struct BranchGaussian {
  MatrixXd actualization;  // q, p x p
  VectorXd displacement;   // r
  MatrixXd variance;       // Sigma, symmetric PD for tree branches
};

struct RootParams {
  VectorXd mean;       // mu
  MatrixXd variance;   // Gamma, symmetric PSD; zero matrix iff fixed
  bool fixed = true;   // fixed <=> Gamma == 0 exactly

  static RootParams fixed_at(const VectorXd& mu);
  static RootParams random(const VectorXd& mu, const MatrixXd& gamma);
};

// Trait-evolution parameters. Per-dimension process: alpha[k] == 0 marks a
// BM dimension, alpha[k] > 0 an OU dimension. The diffusion is carried in
// decomposed form R = D_sigma * C * D_sigma.
struct EvolutionParams {
  VectorXd alpha;        // selection strengths, >= 0, size p
  VectorXd optimum;      // beta, meaningful on OU dimensions
  VectorXd drift;        // nu, meaningful on BM dimensions when has_drift
  bool has_drift = false;
  VectorXd sigma;        // diffusion standard deviations, > 0
  MatrixXd correlation;  // C: symmetric PD, unit diagonal

  int dim() const { return static_cast<int>(alpha.size()); }
  bool is_ou(int k) const { return alpha[k] > 0.0; }
  bool any_ou() const;
  bool all_ou() const;
  MatrixXd diffusion() const;  // R = D_sigma C D_sigma
  // Stationary variance entries R_kl / (alpha_k + alpha_l); requires all_ou.
  MatrixXd stationary_variance() const;
  void validate() const;

  static EvolutionParams bm(const VectorXd& sigma, const MatrixXd& correlation);
  static EvolutionParams ou(const VectorXd& alpha, const VectorXd& optimum,
                            const VectorXd& sigma, const MatrixXd& correlation);
};

enum class ObsKind { None, Iid, TipScaled };
enum class ObsStructure { Diagonal, Correlated };

struct ObservationParams {
  ObsKind kind = ObsKind::None;
  ObsStructure structure = ObsStructure::Diagonal;
  VectorXd sdev;         // per-trait standard deviations tau, > 0
  MatrixXd correlation;  // used when structure == Correlated

  MatrixXd base_variance() const;  // S = D_tau C D_tau (or diagonal)
  void validate(int p) const;
};

// S_i = S (iid) or t_i * S (tip-scaled); requires t_i > 0 in the latter case.
MatrixXd observation_variance(const ObservationParams& obs, double tip_height);

struct ModelSpec {
  std::shared_ptr<const PhyloTree> tree;
  int p = 0;
  EvolutionParams evo;
  RootParams root;
  ObservationParams obs;
  std::vector<int> obs_tip;  // observation index -> tip node id

  int n_obs() const { return static_cast<int>(obs_tip.size()); }
  void validate() const;

  // One observation per tip, in tip order.
  static ModelSpec one_per_tip(std::shared_ptr<const PhyloTree> tree, EvolutionParams evo,
                               RootParams root, ObservationParams obs);
};

// Integral of the attenuation kernel: F_kl = (1 - e^{-(a_k+a_l) l}) / (a_k+a_l),
// with the exact limit l when a_k + a_l vanishes. Branch variance is F .* R.
MatrixXd ou_variance_factor(const VectorXd& alpha, double ell);
// d F_kl / d(a_k + a_l): -(1 - [1 + s*l] e^{-s*l}) / s^2, limit -l^2/2 at s = 0.
MatrixXd ou_variance_factor_dsum(const VectorXd& alpha, double ell);

BranchGaussian branch_params_bm(double ell, const VectorXd& nu, const MatrixXd& R);
BranchGaussian branch_params_ou(double ell, const VectorXd& alpha, const VectorXd& beta,
                                const MatrixXd& R);

// Unified construction for a branch of the model (OU, BM and mixtures):
// q = diag(e^{-alpha l}), r = (I - q) beta + l nu, Sigma = F .* R.
BranchGaussian branch_params(const EvolutionParams& evo, double ell);

// Per-branch parameters for every non-root node, indexed by node id, plus
// per-observation variances. Throws if any branch variance fails the PD
// tolerance (e.g. zero-length branches).
struct ModelBranches {
  std::vector<BranchGaussian> node_branch;  // indexed by node id; root unused
  std::vector<MatrixXd> obs_variance;       // indexed by observation; empty if kind == None
};
ModelBranches build_branches(const ModelSpec& model);

// Pagel's lambda model: BM with diffusion R on the lambda-rescaled tree.
// For a univariate trait this matches a BM on the original tree plus a
// scaled observation error, with lambda playing the heritability.
ModelSpec pagel_lambda_equivalent(double lambda, const VectorXd& sigma,
                                  const MatrixXd& correlation, const VectorXd& mu,
                                  std::shared_ptr<const PhyloTree> tree);

}  // namespace phylogauss
