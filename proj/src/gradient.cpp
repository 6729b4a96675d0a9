#include "phylogauss/gradient.hpp"

#include <cmath>

#include "phylogauss/linalg.hpp"

namespace phylogauss {

std::vector<int> bm_dimensions(const EvolutionParams& evo) {
  std::vector<int> out;
  for (int k = 0; k < evo.dim(); ++k) {
    if (!evo.is_ou(k)) out.push_back(k);
  }
  return out;
}

std::vector<int> ou_dimensions(const EvolutionParams& evo) {
  std::vector<int> out;
  for (int k = 0; k < evo.dim(); ++k) {
    if (evo.is_ou(k)) out.push_back(k);
  }
  return out;
}

std::vector<BranchGradient> branch_gradients(const EngineContext& ctx,
                                             const PostOrderState& post,
                                             const PreOrderState& pre) {
  (void)post;
  const int n_dag = ctx.dag_size();
  const int p = ctx.model->p;
  std::vector<BranchGradient> out(n_dag);
  const int root_dag = ctx.dag(ctx.model->tree->root());
  for (int k = 0; k < n_dag; ++k) {
    if (k == root_dag && ctx.model->root.fixed) {
      out[k].d_mean = VectorXd::Zero(p);
      out[k].d_prec = MatrixXd::Zero(p, p);
      continue;
    }
    const VectorXd delta = pre.cond_mean[k] - pre.above_mean[k];
    out[k].d_mean = pre.above_prec[k] * delta;
    out[k].d_prec = symmetrize(
        0.5 * (pre.above_var[k] - delta * delta.transpose() - pre.cond_var[k]));
  }
  return out;
}

std::pair<double, NaturalGradient> natural_gradient(const EngineContext& ctx) {
  const ModelSpec& model = *ctx.model;
  const PhyloTree& tree = *model.tree;
  const int p = model.p;

  const LikelihoodResult lik = log_likelihood(ctx);
  const PreOrderState pre = pre_order_moments(ctx, lik.post);
  const std::vector<BranchGradient> bg = branch_gradients(ctx, lik.post, pre);

  const std::vector<int> bm_dims = bm_dimensions(model.evo);
  const std::vector<int> ou_dims = ou_dimensions(model.evo);
  const MatrixXd R = model.evo.diffusion();

  NaturalGradient g;
  g.d_root_mean = VectorXd::Zero(p);
  if (!model.root.fixed) g.d_root_variance = MatrixXd::Zero(p, p);
  if (model.evo.has_drift && !bm_dims.empty()) {
    g.d_drift = VectorXd::Zero(static_cast<int>(bm_dims.size()));
  }
  g.d_diffusion = MatrixXd::Zero(p, p);
  if (!ou_dims.empty()) {
    g.d_alpha = VectorXd::Zero(static_cast<int>(ou_dims.size()));
    g.d_optimum = VectorXd::Zero(static_cast<int>(ou_dims.size()));
  }
  if (model.obs.kind != ObsKind::None) g.d_obs_variance = MatrixXd::Zero(p, p);

  // Cotangent on the above variance Omega_k = Q_k^-1: -Q W Q.
  auto omega_cotangent = [&](int dag) -> MatrixXd {
    return symmetrize(-pre.above_prec[dag] * bg[dag].d_prec * pre.above_prec[dag]);
  };

  // Evolution branch above tree node k: q = diag(e^{-alpha l}),
  // r = (I - q) beta + l nu, Omega = q H q' + F(alpha, l) .* R.
  auto accumulate_tree_branch = [&](int k) {
    const int dk = ctx.dag(k);
    const double ell = tree.node(k).branch_length;
    const MatrixXd womega = omega_cotangent(dk);
    const VectorXd& u = bg[dk].d_mean;
    const MatrixXd f = ou_variance_factor(model.evo.alpha, ell);

    g.d_diffusion += f.cwiseProduct(womega);
    if (model.evo.has_drift) {
      for (std::size_t b = 0; b < bm_dims.size(); ++b) {
        g.d_drift[static_cast<int>(b)] += ell * u[bm_dims[b]];
      }
    }
    if (!ou_dims.empty()) {
      const VectorXd qdiag = (-model.evo.alpha.array() * ell).exp();
      const MatrixXd gfac = ou_variance_factor_dsum(model.evo.alpha, ell);
      const MatrixXd wqh = womega * qdiag.asDiagonal() * pre.hat_var[dk];
      for (std::size_t b = 0; b < ou_dims.size(); ++b) {
        const int r = ou_dims[b];
        const int ib = static_cast<int>(b);
        g.d_optimum[ib] += (1.0 - qdiag[r]) * u[r];
        // through the displacement and the mean actualization
        g.d_alpha[ib] +=
            ell * qdiag[r] * u[r] * (model.evo.optimum[r] - pre.hat_mean[dk][r]);
        // through the actualization inside Omega
        g.d_alpha[ib] += -2.0 * ell * qdiag[r] * wqh(r, r);
        // through the branch variance F .* R
        g.d_alpha[ib] += 2.0 * (gfac.row(r).array() * R.row(r).array() *
                                womega.row(r).array()).sum();
      }
    }
  };

  for (int k = 0; k < tree.node_count(); ++k) {
    if (tree.is_root(k)) continue;
    accumulate_tree_branch(k);
  }

  // Root block.
  const int root_dag = ctx.dag(tree.root());
  if (model.root.fixed) {
    for (int k : tree.node(tree.root()).children) {
      const int dk = ctx.dag(k);
      g.d_root_mean += ctx.branches.node_branch[k].actualization.transpose() * bg[dk].d_mean;
    }
  } else {
    g.d_root_mean = bg[root_dag].d_mean;
    g.d_root_variance = omega_cotangent(root_dag);
  }

  // Observation block: Omega_i = hat variance + w_i S with w_i = 1 or t_i.
  if (model.obs.kind != ObsKind::None) {
    for (int i = 0; i < model.n_obs(); ++i) {
      const double w = model.obs.kind == ObsKind::TipScaled
                           ? tree.height(model.obs_tip[i])
                           : 1.0;
      g.d_obs_variance += w * omega_cotangent(i);
    }
  }

  // Decompositions R = D_sigma C D_sigma and S = D_tau C_s D_tau.
  g.d_sigma = 2.0 * (g.d_diffusion * model.evo.sigma.asDiagonal() * model.evo.correlation)
                        .diagonal();
  g.d_correlation = symmetrize(model.evo.sigma.asDiagonal() * g.d_diffusion *
                               model.evo.sigma.asDiagonal());
  if (model.obs.kind != ObsKind::None) {
    const MatrixXd cs = model.obs.structure == ObsStructure::Correlated
                            ? model.obs.correlation
                            : MatrixXd::Identity(p, p);
    g.d_obs_sdev =
        2.0 * (g.d_obs_variance * model.obs.sdev.asDiagonal() * cs).diagonal();
    if (model.obs.structure == ObsStructure::Correlated) {
      g.d_obs_correlation = symmetrize(model.obs.sdev.asDiagonal() * g.d_obs_variance *
                                       model.obs.sdev.asDiagonal());
    }
  }

  return {lik.log_likelihood, std::move(g)};
}

std::pair<double, NaturalGradient> natural_gradient(const ModelSpec& model,
                                                    const TraitData& data) {
  return natural_gradient(make_context(model, data));
}

}  // namespace phylogauss
