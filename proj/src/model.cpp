#include "phylogauss/model.hpp"

#include <cmath>
#include <stdexcept>

#include "phylogauss/linalg.hpp"

namespace phylogauss {

RootParams RootParams::fixed_at(const VectorXd& mu) {
  RootParams r;
  r.mean = mu;
  r.variance = MatrixXd::Zero(mu.size(), mu.size());
  r.fixed = true;
  return r;
}

RootParams RootParams::random(const VectorXd& mu, const MatrixXd& gamma) {
  RootParams r;
  r.mean = mu;
  r.variance = symmetrize(gamma);
  r.fixed = false;
  require_positive_definite(r.variance, "RootParams");
  return r;
}

bool EvolutionParams::any_ou() const { return (alpha.array() > 0.0).any(); }
bool EvolutionParams::all_ou() const { return (alpha.array() > 0.0).all(); }

MatrixXd EvolutionParams::diffusion() const {
  return sigma.asDiagonal() * correlation * sigma.asDiagonal();
}

MatrixXd EvolutionParams::stationary_variance() const {
  if (!all_ou()) throw std::domain_error("stationary_variance: requires all alpha > 0");
  const MatrixXd R = diffusion();
  const int p = dim();
  MatrixXd s(p, p);
  for (int k = 0; k < p; ++k) {
    for (int l = 0; l < p; ++l) s(k, l) = R(k, l) / (alpha[k] + alpha[l]);
  }
  return s;
}

void EvolutionParams::validate() const {
  const int p = dim();
  if (optimum.size() != p || sigma.size() != p || correlation.rows() != p ||
      correlation.cols() != p) {
    throw std::invalid_argument("EvolutionParams: inconsistent dimensions");
  }
  if (has_drift && drift.size() != p) {
    throw std::invalid_argument("EvolutionParams: drift size mismatch");
  }
  if ((alpha.array() < 0.0).any()) throw std::domain_error("EvolutionParams: alpha < 0");
  if ((sigma.array() <= 0.0).any()) throw std::domain_error("EvolutionParams: sigma <= 0");
  for (int k = 0; k < p; ++k) {
    if (std::abs(correlation(k, k) - 1.0) > 1e-10) {
      throw std::domain_error("EvolutionParams: correlation diagonal != 1");
    }
  }
  require_positive_definite(correlation, "EvolutionParams correlation");
}

EvolutionParams EvolutionParams::bm(const VectorXd& sigma, const MatrixXd& correlation) {
  EvolutionParams e;
  const int p = static_cast<int>(sigma.size());
  e.alpha = VectorXd::Zero(p);
  e.optimum = VectorXd::Zero(p);
  e.drift = VectorXd::Zero(p);
  e.sigma = sigma;
  e.correlation = correlation;
  e.validate();
  return e;
}

EvolutionParams EvolutionParams::ou(const VectorXd& alpha, const VectorXd& optimum,
                                    const VectorXd& sigma, const MatrixXd& correlation) {
  EvolutionParams e;
  e.alpha = alpha;
  e.optimum = optimum;
  e.drift = VectorXd::Zero(sigma.size());
  e.sigma = sigma;
  e.correlation = correlation;
  e.validate();
  return e;
}

MatrixXd ObservationParams::base_variance() const {
  if (kind == ObsKind::None) throw std::domain_error("ObservationParams: no observation model");
  if (structure == ObsStructure::Diagonal) {
    return sdev.array().square().matrix().asDiagonal();
  }
  return sdev.asDiagonal() * correlation * sdev.asDiagonal();
}

void ObservationParams::validate(int p) const {
  if (kind == ObsKind::None) return;
  if (sdev.size() != p) throw std::invalid_argument("ObservationParams: sdev size mismatch");
  if ((sdev.array() <= 0.0).any()) throw std::domain_error("ObservationParams: sdev <= 0");
  if (structure == ObsStructure::Correlated) {
    if (correlation.rows() != p || correlation.cols() != p) {
      throw std::invalid_argument("ObservationParams: correlation size mismatch");
    }
    require_positive_definite(correlation, "ObservationParams correlation");
  }
}

MatrixXd observation_variance(const ObservationParams& obs, double tip_height) {
  const MatrixXd s = obs.base_variance();
  if (obs.kind == ObsKind::TipScaled) {
    if (tip_height <= 0) throw std::domain_error("observation_variance: tip height <= 0");
    return tip_height * s;
  }
  return s;
}

void ModelSpec::validate() const {
  if (!tree) throw std::invalid_argument("ModelSpec: missing tree");
  if (p != evo.dim()) throw std::invalid_argument("ModelSpec: trait dimension mismatch");
  if (root.mean.size() != p) throw std::invalid_argument("ModelSpec: root mean size mismatch");
  if (root.fixed) {
    if (!root.variance.isZero(0.0)) throw std::invalid_argument("ModelSpec: fixed root with Gamma != 0");
  } else {
    require_positive_definite(root.variance, "ModelSpec root variance");
  }
  evo.validate();
  obs.validate(p);
  for (int t : obs_tip) {
    if (t < 0 || t >= tree->node_count() || !tree->is_tip(t)) {
      throw std::invalid_argument("ModelSpec: observation mapped to a non-tip node");
    }
  }
}

ModelSpec ModelSpec::one_per_tip(std::shared_ptr<const PhyloTree> tree, EvolutionParams evo,
                                 RootParams root, ObservationParams obs) {
  ModelSpec m;
  m.p = evo.dim();
  m.tree = std::move(tree);
  m.evo = std::move(evo);
  m.root = std::move(root);
  m.obs = std::move(obs);
  m.obs_tip = m.tree->tips();
  m.validate();
  return m;
}

namespace {

// (1 - e^{-s l}) / s with its l limit; series below sqrt(eps) to keep full
// precision through the BM crossover.
double attenuation_ratio(double s, double ell) {
  const double x = s * ell;
  if (std::abs(x) < 1e-8) return ell * (1.0 - 0.5 * x + x * x / 6.0);
  return (1.0 - std::exp(-x)) / s;
}

double attenuation_ratio_dsum(double s, double ell) {
  const double x = s * ell;
  if (std::abs(x) < 1e-5) {
    // -(1 - (1+x)e^{-x}) / s^2 = -l^2 (1/2 - x/3 + x^2/8 - ...)
    return -ell * ell * (0.5 - x / 3.0 + x * x / 8.0);
  }
  return -(1.0 - (1.0 + x) * std::exp(-x)) / (s * s);
}

}  // namespace

MatrixXd ou_variance_factor(const VectorXd& alpha, double ell) {
  const int p = static_cast<int>(alpha.size());
  MatrixXd f(p, p);
  for (int k = 0; k < p; ++k) {
    for (int l = 0; l <= k; ++l) {
      f(k, l) = f(l, k) = attenuation_ratio(alpha[k] + alpha[l], ell);
    }
  }
  return f;
}

MatrixXd ou_variance_factor_dsum(const VectorXd& alpha, double ell) {
  const int p = static_cast<int>(alpha.size());
  MatrixXd g(p, p);
  for (int k = 0; k < p; ++k) {
    for (int l = 0; l <= k; ++l) {
      g(k, l) = g(l, k) = attenuation_ratio_dsum(alpha[k] + alpha[l], ell);
    }
  }
  return g;
}

BranchGaussian branch_params_bm(double ell, const VectorXd& nu, const MatrixXd& R) {
  if (ell <= 0) throw std::domain_error("branch_params_bm: branch length <= 0");
  BranchGaussian b;
  const int p = static_cast<int>(nu.size());
  b.actualization = MatrixXd::Identity(p, p);
  b.displacement = ell * nu;
  b.variance = ell * R;
  require_positive_definite(b.variance, "branch_params_bm");
  return b;
}

BranchGaussian branch_params_ou(double ell, const VectorXd& alpha, const VectorXd& beta,
                                const MatrixXd& R) {
  if (ell <= 0) throw std::domain_error("branch_params_ou: branch length <= 0");
  BranchGaussian b;
  const VectorXd q = (-alpha.array() * ell).exp();
  b.actualization = MatrixXd(q.asDiagonal());
  b.displacement = (VectorXd::Ones(alpha.size()) - q).cwiseProduct(beta);
  b.variance = ou_variance_factor(alpha, ell).cwiseProduct(R);
  require_positive_definite(b.variance, "branch_params_ou");
  return b;
}

BranchGaussian branch_params(const EvolutionParams& evo, double ell) {
  if (ell <= 0) throw std::domain_error("branch_params: branch length <= 0");
  const int p = evo.dim();
  BranchGaussian b;
  const VectorXd q = (-evo.alpha.array() * ell).exp();
  b.actualization = MatrixXd(q.asDiagonal());
  b.displacement = (VectorXd::Ones(p) - q).cwiseProduct(evo.optimum);
  if (evo.has_drift) {
    for (int k = 0; k < p; ++k) {
      if (!evo.is_ou(k)) b.displacement[k] += ell * evo.drift[k];
    }
  }
  b.variance = ou_variance_factor(evo.alpha, ell).cwiseProduct(evo.diffusion());
  require_positive_definite(b.variance, "branch_params");
  return b;
}

ModelBranches build_branches(const ModelSpec& model) {
  const PhyloTree& tree = *model.tree;
  ModelBranches out;
  out.node_branch.resize(tree.node_count());
  for (int id = 0; id < tree.node_count(); ++id) {
    if (id == tree.root()) continue;
    out.node_branch[id] = branch_params(model.evo, tree.node(id).branch_length);
  }
  if (model.obs.kind != ObsKind::None) {
    out.obs_variance.reserve(model.n_obs());
    for (int i = 0; i < model.n_obs(); ++i) {
      out.obs_variance.push_back(
          observation_variance(model.obs, tree.height(model.obs_tip[i])));
    }
  }
  return out;
}

ModelSpec pagel_lambda_equivalent(double lambda, const VectorXd& sigma,
                                  const MatrixXd& correlation, const VectorXd& mu,
                                  std::shared_ptr<const PhyloTree> tree) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::domain_error("pagel_lambda_equivalent: lambda outside [0,1]");
  }
  auto rescaled = std::make_shared<PhyloTree>(pagel_lambda_rescale(*tree, lambda));
  return ModelSpec::one_per_tip(std::move(rescaled),
                                EvolutionParams::bm(sigma, correlation),
                                RootParams::fixed_at(mu), ObservationParams{});
}

}  // namespace phylogauss
