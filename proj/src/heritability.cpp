#include "phylogauss/heritability.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "phylogauss/dense_oracle.hpp"
#include "phylogauss/linalg.hpp"

namespace phylogauss {

TipMoments tip_moments(const ModelSpec& model) {
  model.validate();
  const PhyloTree& tree = *model.tree;
  const int p = model.p;
  TipMoments out;
  out.tip_ids = tree.tips();

  for (int t : out.tip_ids) {
    const double h = tree.height(t);
    const VectorXd q = (-model.evo.alpha.array() * h).exp();
    MatrixXd var = ou_variance_factor(model.evo.alpha, h).cwiseProduct(model.evo.diffusion());
    if (!model.root.fixed) {
      var += MatrixXd(q.asDiagonal()) * model.root.variance * MatrixXd(q.asDiagonal());
    }
    VectorXd mean(p);
    for (int k = 0; k < p; ++k) {
      mean[k] = q[k] * model.root.mean[k] + (1.0 - q[k]) * model.evo.optimum[k];
      if (model.evo.has_drift && !model.evo.is_ou(k)) {
        mean[k] += h * model.evo.drift[k];
      }
    }
    out.latent_mean.push_back(std::move(mean));
    out.latent_var.push_back(symmetrize(var));
  }

  for (int i = 0; i < model.n_obs(); ++i) {
    int tip_index = -1;
    for (std::size_t t = 0; t < out.tip_ids.size(); ++t) {
      if (out.tip_ids[t] == model.obs_tip[i]) tip_index = static_cast<int>(t);
    }
    MatrixXd var = out.latent_var[tip_index];
    if (model.obs.kind != ObsKind::None) {
      var += observation_variance(model.obs, tree.height(model.obs_tip[i]));
    }
    out.obs_var.push_back(symmetrize(var));
  }
  return out;
}

HeritabilityMatrix heritability(const ModelSpec& model) {
  std::vector<int> count(model.tree->node_count(), 0);
  for (int t : model.obs_tip) ++count[t];
  for (int t : model.tree->tips()) {
    if (count[t] != 1) {
      throw std::invalid_argument("heritability: requires exactly one observation per tip");
    }
  }
  const TipMoments tm = tip_moments(model);
  const int p = model.p;
  const int n = static_cast<int>(tm.tip_ids.size());

  MatrixXd vx = MatrixXd::Zero(p, p);
  for (const auto& v : tm.latent_var) vx += v;
  vx /= n;
  MatrixXd vy = MatrixXd::Zero(p, p);
  for (const auto& v : tm.obs_var) vy += v;
  vy /= static_cast<int>(tm.obs_var.size());

  HeritabilityMatrix out;
  out.h.resize(p, p);
  for (int k = 0; k < p; ++k) {
    for (int l = 0; l < p; ++l) {
      out.h(k, l) = vx(k, l) / std::sqrt(vy(k, k) * vy(l, l));
    }
  }
  out.half_life.resize(p);
  for (int k = 0; k < p; ++k) {
    out.half_life[k] = model.evo.is_ou(k)
                           ? std::log(2.0) / model.evo.alpha[k]
                           : std::numeric_limits<double>::infinity();
  }
  return out;
}

double expected_empirical_variance(const VectorXd& means, const MatrixXd& cov) {
  const int n = static_cast<int>(means.size());
  const double second_moment = (cov.diagonal().sum() + means.squaredNorm()) / n;
  const double mean_of_mean = means.mean();
  const double var_of_mean = cov.sum() / (static_cast<double>(n) * n);
  return second_moment - var_of_mean - mean_of_mean * mean_of_mean;
}

std::vector<EmpiricalHeritabilityRow> empirical_heritability_demo(
    double sigma2, double s, const std::vector<double>& deltas) {
  auto tree = std::make_shared<PhyloTree>(
      parse_newick("((T1:0.5,T2:0.5):0.5,(T3:0.5,T4:0.5):0.5):0;"));
  const int n = 4;

  // Latent tip covariance of the shift-free BM, from the dense composition.
  VectorXd sigma(1);
  sigma[0] = std::sqrt(sigma2);
  MatrixXd one = MatrixXd::Identity(1, 1);
  ObservationParams obs;
  obs.kind = ObsKind::Iid;
  obs.structure = ObsStructure::Diagonal;
  obs.sdev = VectorXd::Constant(1, std::sqrt(s));
  ModelSpec model = ModelSpec::one_per_tip(tree, EvolutionParams::bm(sigma, one),
                                           RootParams::fixed_at(VectorXd::Zero(1)), obs);
  const DenseJoint joint = build_dense(model);
  MatrixXd latent_cov(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      latent_cov(a, b) = joint.node_cov(tree->tips()[a], tree->tips()[b])(0, 0);
    }
  }
  const MatrixXd obs_cov = latent_cov + s * MatrixXd::Identity(n, n);
  const double h_pop = heritability(model).h(0, 0);

  // The shift enters the means only: +delta below the second cherry.
  std::vector<EmpiricalHeritabilityRow> rows;
  for (double delta : deltas) {
    VectorXd means(n);
    means << 0.0, 0.0, delta, delta;
    EmpiricalHeritabilityRow row;
    row.delta = delta;
    row.h_empirical = expected_empirical_variance(means, latent_cov) /
                      expected_empirical_variance(means, obs_cov);
    row.h_population = h_pop;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace phylogauss
