#include "phylogauss/dense_oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "phylogauss/linalg.hpp"

namespace phylogauss {

MatrixXd DenseJoint::node_cov(int a, int b) const {
  return cov.block(node_coord(a, 0), node_coord(b, 0), p, p);
}

VectorXd DenseJoint::node_mean(int a) const { return mean.segment(node_coord(a, 0), p); }

DenseJoint build_dense(const ModelSpec& model) {
  model.validate();
  const PhyloTree& tree = *model.tree;
  const int p = model.p;
  const int N = model.n_obs();
  const int m = tree.node_count();
  if ((N + m) * p > 2000) {
    throw std::domain_error("build_dense: model too large for the dense oracle");
  }
  const ModelBranches branches = build_branches(model);

  DenseJoint joint;
  joint.p = p;
  joint.n_obs = N;
  joint.n_nodes = m;
  joint.mean = VectorXd::Zero(joint.dim());
  joint.cov = MatrixXd::Zero(joint.dim(), joint.dim());

  // Nodes in pre-order: the parent block is complete before any child.
  for (int id : tree.pre_order()) {
    const int row = joint.node_coord(id, 0);
    if (tree.is_root(id)) {
      joint.mean.segment(row, p) = model.root.mean;
      joint.cov.block(row, row, p, p) = model.root.variance;
      continue;
    }
    const BranchGaussian& br = branches.node_branch[id];
    const int prow = joint.node_coord(tree.node(id).parent, 0);
    joint.mean.segment(row, p) = br.actualization * joint.mean.segment(prow, p) + br.displacement;
    // Cross-covariance with everything already placed, then own variance.
    MatrixXd cross = br.actualization * joint.cov.middleRows(prow, p);
    joint.cov.middleRows(row, p) = cross;
    joint.cov.middleCols(row, p) = cross.transpose();
    joint.cov.block(row, row, p, p) =
        br.actualization * joint.cov.block(prow, prow, p, p) * br.actualization.transpose() +
        br.variance;
  }

  // Observation layer: Y_i | X_tip ~ N(X_tip, S_i).
  for (int i = 0; i < N; ++i) {
    const int row = joint.obs_coord(i, 0);
    const int prow = joint.node_coord(model.obs_tip[i], 0);
    joint.mean.segment(row, p) = joint.mean.segment(prow, p);
    MatrixXd cross = joint.cov.middleRows(prow, p);
    joint.cov.middleRows(row, p) = cross;
    joint.cov.middleCols(row, p) = cross.transpose();
    MatrixXd own = joint.cov.block(prow, prow, p, p);
    if (model.obs.kind != ObsKind::None) own += branches.obs_variance[i];
    joint.cov.block(row, row, p, p) = own;
  }
  joint.cov = symmetrize(joint.cov);
  return joint;
}

namespace {

std::vector<int> observed_coords(const DenseJoint& dense, const TraitData& data) {
  std::vector<int> idx;
  for (int i = 0; i < data.n_obs(); ++i) {
    for (int k = 0; k < data.n_traits(); ++k) {
      if (data.observed(i, k)) idx.push_back(dense.obs_coord(i, k));
    }
  }
  return idx;
}

}  // namespace

double dense_loglik(const DenseJoint& dense, const TraitData& data) {
  const auto idx = observed_coords(dense, data);
  const int d = static_cast<int>(idx.size());
  if (d == 0) return 0.0;

  VectorXd y(d), mu(d);
  MatrixXd sig(d, d);
  for (int a = 0; a < d; ++a) {
    y[a] = data.values(idx[a] / dense.p, idx[a] % dense.p);
    mu[a] = dense.mean[idx[a]];
    for (int b = 0; b < d; ++b) sig(a, b) = dense.cov(idx[a], idx[b]);
  }
  Eigen::LLT<MatrixXd> llt(sig);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("dense_loglik: singular observed covariance near coordinate " +
                            std::to_string(idx.empty() ? -1 : idx[0]) + ".." +
                            std::to_string(idx.back()));
  }
  return mvn_logpdf(y, mu, llt);
}

DenseConditional dense_conditional(const DenseJoint& dense, const TraitData& data) {
  const auto idx = observed_coords(dense, data);
  const int d = static_cast<int>(idx.size());
  DenseConditional cond;
  cond.mean = dense.mean;
  cond.cov = dense.cov;
  if (d == 0) return cond;

  VectorXd y(d), mu(d);
  MatrixXd sig(d, d);
  MatrixXd cross(dense.dim(), d);  // Cov[all, observed]
  for (int a = 0; a < d; ++a) {
    y[a] = data.values(idx[a] / dense.p, idx[a] % dense.p);
    mu[a] = dense.mean[idx[a]];
    cross.col(a) = dense.cov.col(idx[a]);
    for (int b = 0; b < d; ++b) sig(a, b) = dense.cov(idx[a], idx[b]);
  }
  Eigen::LLT<MatrixXd> llt(sig);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("dense_conditional: singular observed covariance");
  }
  cond.mean = dense.mean + cross * llt.solve(y - mu);
  cond.cov = symmetrize(dense.cov - cross * llt.solve(cross.transpose()));
  return cond;
}

std::pair<VectorXd, MatrixXd> conditional_block(const DenseJoint& dense,
                                                const DenseConditional& cond, int first_coord,
                                                int p) {
  (void)dense;
  return {cond.mean.segment(first_coord, p), cond.cov.block(first_coord, first_coord, p, p)};
}

}  // namespace phylogauss
