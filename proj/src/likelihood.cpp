#include "phylogauss/likelihood.hpp"

#include <cmath>
#include <stdexcept>

#include "phylogauss/linalg.hpp"

namespace phylogauss {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Masked observation initialization: P-tilde = pinv(delta S delta),
// log rho = -rank/2 log 2pi + 1/2 log pdet. The diagonal fast path skips
// the spectral factorization entirely.
struct LeafInit {
  MatrixXd deflated;
  double log_rho;
  int rank;
};

LeafInit leaf_init(const MatrixXd& s, const Eigen::Array<bool, Eigen::Dynamic, 1>& mask,
                   bool diagonal) {
  const int p = static_cast<int>(s.rows());
  LeafInit out;
  out.deflated = MatrixXd::Zero(p, p);
  out.log_rho = 0.0;
  out.rank = 0;
  if (!mask.any()) return out;

  if (diagonal) {
    for (int k = 0; k < p; ++k) {
      if (!mask[k]) continue;
      out.deflated(k, k) = 1.0 / s(k, k);
      out.log_rho += -0.5 * kLog2Pi - 0.5 * std::log(s(k, k));
      ++out.rank;
    }
    return out;
  }

  std::vector<int> obs;
  for (int k = 0; k < p; ++k) {
    if (mask[k]) obs.push_back(k);
  }
  const int no = static_cast<int>(obs.size());
  MatrixXd soo(no, no);
  for (int a = 0; a < no; ++a) {
    for (int b = 0; b < no; ++b) soo(a, b) = s(obs[a], obs[b]);
  }
  const SymmetricPseudo ps = symmetric_pseudo(soo);
  if (ps.rank < no) throw std::domain_error("leaf_init: singular observation variance block");
  for (int a = 0; a < no; ++a) {
    for (int b = 0; b < no; ++b) out.deflated(obs[a], obs[b]) = ps.pinv(a, b);
  }
  out.rank = no;
  out.log_rho = -0.5 * no * kLog2Pi - 0.5 * ps.log_pdet;
  return out;
}

}  // namespace

EngineContext make_context(const ModelSpec& model, const TraitData& data) {
  model.validate();
  if (data.n_obs() != model.n_obs() || data.n_traits() != model.p) {
    throw std::invalid_argument("engine: model and data dimensions disagree");
  }
  EngineContext ctx;
  ctx.model = &model;
  ctx.data = &data;
  ctx.branches = build_branches(model);
  ctx.direct_tips = (model.obs.kind == ObsKind::None);
  ctx.n_leaf_units = ctx.direct_tips ? 0 : model.n_obs();
  ctx.obs_of_tip.assign(model.tree->node_count(), {});
  for (int i = 0; i < model.n_obs(); ++i) ctx.obs_of_tip[model.obs_tip[i]].push_back(i);
  if (ctx.direct_tips) {
    for (int t : model.tree->tips()) {
      if (ctx.obs_of_tip[t].size() != 1) {
        throw std::invalid_argument(
            "engine: a model without an observation layer needs exactly one "
            "observation per tip");
      }
    }
  }
  return ctx;
}

LikelihoodResult log_likelihood(const EngineContext& ctx) {
  const ModelSpec& model = *ctx.model;
  const TraitData& data = *ctx.data;
  const PhyloTree& tree = *model.tree;
  const int p = model.p;
  const int m = tree.node_count();
  const int n_dag = ctx.dag_size();

  LikelihoodResult res;
  PostOrderState& st = res.post;
  st.p = p;
  st.mean.assign(n_dag, VectorXd::Zero(p));
  st.deflated.assign(n_dag, MatrixXd::Zero(p, p));
  st.to_parent_prec.assign(n_dag, MatrixXd::Zero(p, p));
  st.to_parent_h.assign(n_dag, VectorXd::Zero(p));
  st.ss.assign(n_dag, 0.0);
  st.precision.assign(m, MatrixXd::Zero(p, p));
  st.h.assign(m, VectorXd::Zero(p));
  st.log_remainder.assign(m, 0.0);
  st.vacuous = !data.observed.any();

  // Remainder carried by each DAG node, in the reduced accumulation.
  std::vector<double> rho(n_dag, 0.0);

  if (!ctx.direct_tips) {
    const bool diag = model.obs.structure == ObsStructure::Diagonal;
    for (int i = 0; i < model.n_obs(); ++i) {
      const VectorXd y = data.observed.row(i).transpose().cast<double>().cwiseProduct(
          data.values.row(i).transpose());
      const LeafInit init =
          leaf_init(ctx.branches.obs_variance[i], data.observed.row(i).transpose(), diag);
      st.mean[i] = y;
      st.deflated[i] = init.deflated;
      st.to_parent_prec[i] = init.deflated;   // q = I
      st.to_parent_h[i] = init.deflated * y;  // r = 0
      st.ss[i] = y.dot(st.to_parent_h[i]);
      rho[i] = init.log_rho;
    }
  }

  for (int k : tree.post_order()) {
    const int dk = ctx.dag(k);

    if (ctx.direct_tips && tree.is_tip(k)) {
      // Exactly observed tip: the branch above acts as its observation
      // model, restricted to the observed coordinates.
      const int i = ctx.obs_of_tip[k][0];
      const BranchGaussian& br = ctx.branches.node_branch[k];
      const VectorXd y = data.observed.row(i).transpose().cast<double>().cwiseProduct(
          data.values.row(i).transpose());
      const LeafInit init = leaf_init(br.variance, data.observed.row(i).transpose(), false);
      st.mean[dk] = y;
      st.deflated[dk] = init.deflated;
      const VectorXd centered = y - br.displacement;
      st.to_parent_prec[dk] = br.actualization.transpose() * init.deflated * br.actualization;
      st.to_parent_h[dk] = br.actualization.transpose() * (init.deflated * centered);
      st.ss[dk] = centered.dot(init.deflated * centered);
      rho[dk] = init.log_rho;
      continue;
    }

    // Aggregate children: observation rows first, then node children, in
    // stored order (fixed summation order keeps results bit-reproducible).
    MatrixXd prec = MatrixXd::Zero(p, p);
    VectorXd h = VectorXd::Zero(p);
    double acc_rho = 0.0;
    double child_ss = 0.0;
    for (int i : ctx.obs_of_tip[k]) {
      prec += st.to_parent_prec[i];
      h += st.to_parent_h[i];
      acc_rho += rho[i];
      child_ss += st.ss[i];
    }
    for (int c : tree.node(k).children) {
      const int dc = ctx.dag(c);
      prec += st.to_parent_prec[dc];
      h += st.to_parent_h[dc];
      acc_rho += rho[dc];
      child_ss += st.ss[dc];
    }
    prec = symmetrize(prec);
    st.precision[k] = prec;
    st.h[k] = h;
    const SymmetricPseudo ps = symmetric_pseudo(prec);
    st.mean[dk] = ps.apply(h);
    // m' P m = m' h exactly: h lies in the range of P.
    acc_rho += 0.5 * st.mean[dk].dot(h) - 0.5 * child_ss;

    if (!tree.is_root(k)) {
      const BranchGaussian& br = ctx.branches.node_branch[k];
      Eigen::LLT<MatrixXd> lsig(br.variance);
      if (lsig.info() != Eigen::Success) {
        throw std::domain_error("log_likelihood: branch variance not positive definite");
      }
      const MatrixXd l = lsig.matrixL();
      const MatrixXd b = MatrixXd::Identity(p, p) + l.transpose() * prec * l;
      Eigen::LLT<MatrixXd> lb(b);
      // log pdet(P-tilde) - log pdet(P) = -log det(I + Sigma P)
      acc_rho -= lb.matrixLLT().diagonal().array().log().sum();
      const MatrixXd pl = prec * l;
      st.deflated[dk] = symmetrize(prec - pl * lb.solve(pl.transpose()));
      const VectorXd centered = st.mean[dk] - br.displacement;
      st.to_parent_prec[dk] =
          br.actualization.transpose() * st.deflated[dk] * br.actualization;
      st.to_parent_h[dk] = br.actualization.transpose() * (st.deflated[dk] * centered);
      st.ss[dk] = centered.dot(st.deflated[dk] * centered);
    }
    rho[dk] = acc_rho;
    st.log_remainder[k] = acc_rho;
  }

  // Root integration.
  const int r = tree.root();
  const MatrixXd& pr = st.precision[r];
  const VectorXd& mr = st.mean[ctx.dag(r)];
  double logl = st.log_remainder[r];
  if (model.root.fixed) {
    const VectorXd d = model.root.mean - mr;
    logl -= 0.5 * d.dot(pr * d);
  } else {
    const MatrixXd gamma_inv = inverse_pd(model.root.variance);
    const MatrixXd j = pr + gamma_inv;
    const VectorXd g = st.h[r] + gamma_inv * model.root.mean;
    logl += -0.5 * logdet_pd(model.root.variance) - 0.5 * logdet_pd(j) -
            0.5 * mr.dot(st.h[r]) -
            0.5 * model.root.mean.dot(gamma_inv * model.root.mean) +
            0.5 * g.dot(solve_pd(j, g));
  }

  res.vacuous = st.vacuous;
  res.log_likelihood = st.vacuous ? 0.0 : logl;
  return res;
}

LikelihoodResult log_likelihood(const ModelSpec& model, const TraitData& data) {
  return log_likelihood(make_context(model, data));
}

PreOrderState pre_order_moments(const EngineContext& ctx, const PostOrderState& post) {
  const ModelSpec& model = *ctx.model;
  const TraitData& data = *ctx.data;
  const PhyloTree& tree = *model.tree;
  const int p = model.p;
  const int n_dag = ctx.dag_size();

  PreOrderState st;
  st.p = p;
  st.root_fixed = model.root.fixed;
  st.above_prec.assign(n_dag, MatrixXd::Zero(p, p));
  st.above_var.assign(n_dag, MatrixXd::Zero(p, p));
  st.above_mean.assign(n_dag, VectorXd::Zero(p));
  st.hat_var.assign(n_dag, MatrixXd::Zero(p, p));
  st.hat_mean.assign(n_dag, VectorXd::Zero(p));
  st.cond_var.assign(n_dag, MatrixXd::Zero(p, p));
  st.cond_mean.assign(n_dag, VectorXd::Zero(p));

  // Fill hat and above moments of DAG node `dc` below tree parent `pa`,
  // with branch (q, r, Sigma) between them.
  auto descend = [&](int pa, int dc, const BranchGaussian& br) {
    const int dpa = ctx.dag(pa);
    if (tree.is_root(pa) && model.root.fixed) {
      st.hat_var[dc] = MatrixXd::Zero(p, p);
      st.hat_mean[dc] = model.root.mean;
    } else {
      const MatrixXd sib_prec = symmetrize(post.precision[pa] - post.to_parent_prec[dc]);
      const VectorXd sib_h = post.h[pa] - post.to_parent_h[dc];
      const MatrixXd hat_prec = sib_prec + st.above_prec[dpa];
      const VectorXd hat_h = sib_h + st.above_prec[dpa] * st.above_mean[dpa];
      st.hat_var[dc] = symmetrize(inverse_pd(hat_prec));
      st.hat_mean[dc] = st.hat_var[dc] * hat_h;
    }
    st.above_var[dc] = symmetrize(
        br.actualization * st.hat_var[dc] * br.actualization.transpose() + br.variance);
    st.above_prec[dc] = symmetrize(inverse_pd(st.above_var[dc]));
    st.above_mean[dc] = br.actualization * st.hat_mean[dc] + br.displacement;
  };

  // Full conditional of a leaf-like DAG node holding observation row i.
  auto leaf_conditional = [&](int i, int dc) {
    const auto mask = data.observed.row(i);
    if (mask.all()) {
      st.cond_mean[dc] = data.values.row(i).transpose();
      st.cond_var[dc] = MatrixXd::Zero(p, p);
      return;
    }
    if (!mask.any()) {
      st.cond_mean[dc] = st.above_mean[dc];
      st.cond_var[dc] = st.above_var[dc];
      return;
    }
    // Precision-form conditioning of N(n, Q^-1) on the observed block.
    std::vector<int> mis, obs;
    for (int k = 0; k < p; ++k) (mask[k] ? obs : mis).push_back(k);
    const int nm = static_cast<int>(mis.size());
    const int no = static_cast<int>(obs.size());
    MatrixXd qmm(nm, nm), qmo(nm, no);
    VectorXd dy(no), nmis(nm);
    for (int a = 0; a < nm; ++a) {
      nmis[a] = st.above_mean[dc][mis[a]];
      for (int b = 0; b < nm; ++b) qmm(a, b) = st.above_prec[dc](mis[a], mis[b]);
      for (int b = 0; b < no; ++b) qmo(a, b) = st.above_prec[dc](mis[a], obs[b]);
    }
    for (int b = 0; b < no; ++b) dy[b] = data.values(i, obs[b]) - st.above_mean[dc][obs[b]];
    const MatrixXd vmm = symmetrize(inverse_pd(qmm));
    const VectorXd mm = nmis - vmm * (qmo * dy);
    st.cond_mean[dc] = VectorXd::Zero(p);
    st.cond_var[dc] = MatrixXd::Zero(p, p);
    for (int b = 0; b < no; ++b) st.cond_mean[dc][obs[b]] = data.values(i, obs[b]);
    for (int a = 0; a < nm; ++a) {
      st.cond_mean[dc][mis[a]] = mm[a];
      for (int b = 0; b < nm; ++b) st.cond_var[dc](mis[a], mis[b]) = vmm(a, b);
    }
  };

  for (int k : tree.pre_order()) {
    const int dk = ctx.dag(k);
    if (tree.is_root(k)) {
      if (model.root.fixed) {
        st.cond_mean[dk] = model.root.mean;
        st.cond_var[dk] = MatrixXd::Zero(p, p);
      } else {
        st.above_var[dk] = model.root.variance;
        st.above_prec[dk] = symmetrize(inverse_pd(model.root.variance));
        st.above_mean[dk] = model.root.mean;
        const MatrixXd v = symmetrize(inverse_pd(post.precision[k] + st.above_prec[dk]));
        st.cond_var[dk] = v;
        st.cond_mean[dk] = v * (post.h[k] + st.above_prec[dk] * st.above_mean[dk]);
      }
    } else {
      descend(tree.node(k).parent, dk, ctx.branches.node_branch[k]);
      if (ctx.direct_tips && tree.is_tip(k)) {
        leaf_conditional(ctx.obs_of_tip[k][0], dk);
      } else {
        const MatrixXd v = symmetrize(inverse_pd(post.precision[k] + st.above_prec[dk]));
        st.cond_var[dk] = v;
        st.cond_mean[dk] = v * (post.h[k] + st.above_prec[dk] * st.above_mean[dk]);
      }
    }
    // Observation rows hanging below tip k.
    if (!ctx.direct_tips) {
      for (int i : ctx.obs_of_tip[k]) {
        BranchGaussian obs_branch;
        obs_branch.actualization = MatrixXd::Identity(p, p);
        obs_branch.displacement = VectorXd::Zero(p);
        obs_branch.variance = ctx.branches.obs_variance[i];
        descend(k, i, obs_branch);
        leaf_conditional(i, i);
      }
    }
  }
  return st;
}

PreOrderState pre_order_moments(const ModelSpec& model, const TraitData& data,
                                const PostOrderState& post) {
  return pre_order_moments(make_context(model, data), post);
}

AncestralMoments ancestral_reconstruction(const ModelSpec& model, const TraitData& data) {
  const EngineContext ctx = make_context(model, data);
  const LikelihoodResult lik = log_likelihood(ctx);
  const PreOrderState pre = pre_order_moments(ctx, lik.post);
  AncestralMoments out;
  const int m = model.tree->node_count();
  out.mean.reserve(m);
  out.var.reserve(m);
  for (int k = 0; k < m; ++k) {
    out.mean.push_back(pre.cond_mean[ctx.dag(k)]);
    out.var.push_back(pre.cond_var[ctx.dag(k)]);
  }
  return out;
}

}  // namespace phylogauss
