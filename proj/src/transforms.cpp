#include "phylogauss/transforms.hpp"

#include <cmath>
#include <stdexcept>

#include "phylogauss/linalg.hpp"

namespace phylogauss {

namespace {

int lkj_dim(int p) { return p * (p - 1) / 2; }

// Per-column workspace of the half-sphere chain. K = k-1 free coordinates.
struct LkjColumn {
  VectorXd z;       // inf-ball coordinates, tanh(eta)
  VectorXd x;       // ball coordinates = off-diagonal column of W
  VectorXd prefix;  // prefix_i = prod_{j<i} sqrt(1 - z_j^2)
  double wkk;       // sqrt(1 - |x|^2)

  static LkjColumn from_eta(const Eigen::Ref<const VectorXd>& eta) {
    const int K = static_cast<int>(eta.size());
    LkjColumn c;
    c.z.resize(K);
    c.x.resize(K);
    c.prefix.resize(K);
    double acc = 1.0;  // prod (1 - z_j^2) so far
    for (int i = 0; i < K; ++i) {
      c.prefix[i] = std::sqrt(acc);
      c.z[i] = std::tanh(eta[i]);
      c.x[i] = c.z[i] * c.prefix[i];
      acc *= 1.0 - c.z[i] * c.z[i];
    }
    c.wkk = std::sqrt(acc);
    return c;
  }

  static LkjColumn from_x(const Eigen::Ref<const VectorXd>& x) {
    const int K = static_cast<int>(x.size());
    LkjColumn c;
    c.z.resize(K);
    c.x = x;
    c.prefix.resize(K);
    double rem = 1.0;  // 1 - sum_{j<i} x_j^2
    for (int i = 0; i < K; ++i) {
      c.prefix[i] = std::sqrt(rem);
      c.z[i] = x[i] / c.prefix[i];
      rem -= x[i] * x[i];
      if (rem <= 0) throw std::domain_error("LkjColumn: point outside the unit ball");
    }
    c.wkk = std::sqrt(rem);
    return c;
  }

  VectorXd eta() const {
    VectorXd out(z.size());
    for (int i = 0; i < z.size(); ++i) out[i] = std::atanh(z[i]);
    return out;
  }

  // Adjoint of eta -> x, with an optional direct cotangent on z.
  VectorXd pullback(const VectorXd& gx, const VectorXd& gz_direct) const {
    const int K = static_cast<int>(x.size());
    VectorXd geta(K);
    double suffix = 0.0;  // sum_{i' > i} gx_i' x_i'
    for (int i = K - 1; i >= 0; --i) {
      const double one_minus_z2 = 1.0 - z[i] * z[i];
      double gz = gx[i] * prefix[i];
      if (one_minus_z2 > 0) gz -= z[i] / one_minus_z2 * suffix;
      if (gz_direct.size() > 0) gz += gz_direct[i];
      geta[i] = gz * one_minus_z2;
      suffix += gx[i] * x[i];
    }
    return geta;
  }
};

}  // namespace

CholCorrelation CholCorrelation::from_matrix(const MatrixXd& c) {
  Eigen::LLT<MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("CholCorrelation: matrix not positive definite");
  }
  CholCorrelation out;
  out.w = MatrixXd(llt.matrixL()).transpose();
  return out;
}

CholCorrelation CholCorrelation::from_unconstrained(const Eigen::Ref<const VectorXd>& eta,
                                                    int p) {
  if (eta.size() != lkj_dim(p)) throw std::invalid_argument("CholCorrelation: bad eta size");
  CholCorrelation out;
  out.w = MatrixXd::Zero(p, p);
  out.w(0, 0) = 1.0;
  int off = 0;
  for (int k = 1; k < p; ++k) {
    const LkjColumn col = LkjColumn::from_eta(eta.segment(off, k));
    out.w.col(k).head(k) = col.x;
    out.w(k, k) = col.wkk;
    off += k;
  }
  return out;
}

VectorXd CholCorrelation::to_unconstrained() const {
  const int p = dim();
  VectorXd eta(lkj_dim(p));
  int off = 0;
  for (int k = 1; k < p; ++k) {
    const LkjColumn col = LkjColumn::from_x(w.col(k).head(k));
    eta.segment(off, k) = col.eta();
    off += k;
  }
  return eta;
}

double lkj_log_jacobian(const CholCorrelation& chol, VectorXd* grad_eta) {
  const int p = chol.dim();
  double logj = 0.0;
  if (grad_eta) grad_eta->resize(lkj_dim(p));
  int off = 0;
  for (int k = 1; k < p; ++k) {
    const LkjColumn col = LkjColumn::from_x(chol.w.col(k).head(k));
    // eta -> W column: d x_i/d eta terms give (1 + (K-1-i)/2) log(1 - z_i^2)
    // per coordinate (0-based i); W -> vech(C) adds (p-1-k) log W_kk for
    // 0-based column index k.
    const int K = k;
    const int cexp = p - 1 - k;  // exponent of W_kk in |d vech C / d W|
    for (int i = 0; i < K; ++i) {
      const double ci = 1.0 + 0.5 * (K - 1 - i);
      logj += ci * std::log(1.0 - col.z[i] * col.z[i]);
    }
    logj += cexp * std::log(col.wkk);
    if (grad_eta) {
      VectorXd gx = VectorXd::Zero(K);
      VectorXd gz = VectorXd::Zero(K);
      for (int i = 0; i < K; ++i) {
        const double ci = 1.0 + 0.5 * (K - 1 - i);
        gz[i] = -2.0 * ci * col.z[i] / (1.0 - col.z[i] * col.z[i]);
        gx[i] = -cexp * col.x[i] / (col.wkk * col.wkk);
      }
      grad_eta->segment(off, K) = col.pullback(gx, gz);
    }
    off += k;
  }
  return logj;
}

VectorXd lkj_pullback(const CholCorrelation& chol, const MatrixXd& c_cotangent) {
  const int p = chol.dim();
  // C = W'W: cotangent on W is 2 W G (G symmetric).
  const MatrixXd gw = 2.0 * chol.w * symmetrize(c_cotangent);
  VectorXd out(lkj_dim(p));
  int off = 0;
  for (int k = 1; k < p; ++k) {
    const LkjColumn col = LkjColumn::from_x(chol.w.col(k).head(k));
    VectorXd gx(k);
    for (int i = 0; i < k; ++i) {
      gx[i] = gw(i, k) - gw(k, k) * col.x[i] / col.wkk;
    }
    out.segment(off, k) = col.pullback(gx, VectorXd());
    off += k;
  }
  return out;
}

FreeBlocks FreeBlocks::none() {
  FreeBlocks f;
  f.root_mean = f.root_variance = f.drift = f.sigma = f.correlation = false;
  f.alpha = f.optimum = f.obs_sdev = f.obs_correlation = false;
  return f;
}

FreeBlocks FreeBlocks::only_root_mean() {
  FreeBlocks f = none();
  f.root_mean = true;
  return f;
}

Transform::Transform(ModelSpec tmpl, FreeBlocks free)
    : template_(std::move(tmpl)), free_(free) {
  template_.validate();
  const int p = template_.p;
  const int n_bm = static_cast<int>(bm_dimensions(template_.evo).size());
  const int n_ou = static_cast<int>(ou_dimensions(template_.evo).size());

  auto add_block = [&](const std::string& label, TransformKind kind, int size, int aux = 0) {
    if (size == 0) return;
    blocks_.push_back({label, kind, dim_, size, aux});
    for (int i = 0; i < size; ++i) {
      std::string name = label + "[" + std::to_string(i) + "]";
      if (kind == TransformKind::Log) name = "log_" + name;
      if (kind == TransformKind::LkjChain) name = label + ".z[" + std::to_string(i) + "]";
      coords_.push_back({name, kind});
    }
    dim_ += size;
  };

  if (free_.root_mean) add_block("mu", TransformKind::Identity, p);
  if (free_.root_variance && !template_.root.fixed) {
    add_block("gamma_sd", TransformKind::Log, p);
    if (p > 1) add_block("gamma_corr", TransformKind::LkjChain, lkj_dim(p), p);
  }
  if (free_.drift && template_.evo.has_drift) add_block("nu", TransformKind::Identity, n_bm);
  if (free_.sigma) add_block("sigma", TransformKind::Log, p);
  if (free_.correlation && p > 1) add_block("corr", TransformKind::LkjChain, lkj_dim(p), p);
  if (free_.alpha) add_block("alpha", TransformKind::Log, n_ou);
  if (free_.optimum) add_block("beta", TransformKind::Identity, n_ou);
  if (template_.obs.kind != ObsKind::None) {
    if (free_.obs_sdev) add_block("obs_sd", TransformKind::Log, p);
    if (free_.obs_correlation && template_.obs.structure == ObsStructure::Correlated &&
        p > 1) {
      add_block("obs_corr", TransformKind::LkjChain, lkj_dim(p), p);
    }
  }
}

namespace {

// Per-block natural-value access, shared by the transforms.
struct BlockOps {
  const ModelSpec* model;

  VectorXd get(const std::string& label) const {
    const auto& m = *model;
    const auto bm = bm_dimensions(m.evo);
    const auto ou = ou_dimensions(m.evo);
    if (label == "mu") return m.root.mean;
    if (label == "gamma_sd") return m.root.variance.diagonal().array().sqrt();
    if (label == "nu") {
      VectorXd v(bm.size());
      for (std::size_t i = 0; i < bm.size(); ++i) v[i] = m.evo.drift[bm[i]];
      return v;
    }
    if (label == "sigma") return m.evo.sigma;
    if (label == "alpha") {
      VectorXd v(ou.size());
      for (std::size_t i = 0; i < ou.size(); ++i) v[i] = m.evo.alpha[ou[i]];
      return v;
    }
    if (label == "beta") {
      VectorXd v(ou.size());
      for (std::size_t i = 0; i < ou.size(); ++i) v[i] = m.evo.optimum[ou[i]];
      return v;
    }
    if (label == "obs_sd") return m.obs.sdev;
    throw std::logic_error("BlockOps: unknown block " + label);
  }

  MatrixXd get_corr(const std::string& label) const {
    if (label == "corr") return model->evo.correlation;
    if (label == "obs_corr") return model->obs.correlation;
    if (label == "gamma_corr") {
      const VectorXd sd = model->root.variance.diagonal().array().sqrt();
      return VectorXd(sd.array().inverse()).asDiagonal() * model->root.variance *
             VectorXd(sd.array().inverse()).asDiagonal();
    }
    throw std::logic_error("BlockOps: unknown correlation block " + label);
  }

  void set(ModelSpec& m, const std::string& label, const VectorXd& v) const {
    const auto bm = bm_dimensions(m.evo);
    const auto ou = ou_dimensions(m.evo);
    if (label == "mu") {
      m.root.mean = v;
    } else if (label == "gamma_sd") {
      gamma_sd_ = v;
      rebuild_gamma(m);
    } else if (label == "nu") {
      for (std::size_t i = 0; i < bm.size(); ++i) m.evo.drift[bm[i]] = v[i];
    } else if (label == "sigma") {
      m.evo.sigma = v;
    } else if (label == "alpha") {
      for (std::size_t i = 0; i < ou.size(); ++i) m.evo.alpha[ou[i]] = v[i];
    } else if (label == "beta") {
      for (std::size_t i = 0; i < ou.size(); ++i) m.evo.optimum[ou[i]] = v[i];
    } else if (label == "obs_sd") {
      m.obs.sdev = v;
    } else {
      throw std::logic_error("BlockOps: unknown block " + label);
    }
  }

  void set_corr(ModelSpec& m, const std::string& label, const MatrixXd& c) const {
    if (label == "corr") {
      m.evo.correlation = c;
    } else if (label == "obs_corr") {
      m.obs.correlation = c;
    } else if (label == "gamma_corr") {
      gamma_corr_ = c;
      rebuild_gamma(m);
    } else {
      throw std::logic_error("BlockOps: unknown correlation block " + label);
    }
  }

  // Gamma is stored dense; its sd and correlation parts may be set in any
  // order, so both are cached until rebuilt.
  mutable VectorXd gamma_sd_;
  mutable MatrixXd gamma_corr_;

  void rebuild_gamma(ModelSpec& m) const {
    VectorXd sd = gamma_sd_.size() ? gamma_sd_
                                   : VectorXd(m.root.variance.diagonal().array().sqrt());
    MatrixXd corr;
    if (gamma_corr_.size()) {
      corr = gamma_corr_;
    } else {
      const VectorXd old_sd = m.root.variance.diagonal().array().sqrt();
      corr = VectorXd(old_sd.array().inverse()).asDiagonal() * m.root.variance *
             VectorXd(old_sd.array().inverse()).asDiagonal();
    }
    m.root.variance = symmetrize(sd.asDiagonal() * corr * sd.asDiagonal());
  }
};

}  // namespace

VectorXd Transform::to_unconstrained(const ModelSpec& model) const {
  BlockOps ops{&model};
  VectorXd eta(dim_);
  for (const auto& b : blocks_) {
    switch (b.kind) {
      case TransformKind::Identity:
        eta.segment(b.offset, b.size) = ops.get(b.label);
        break;
      case TransformKind::Log:
        eta.segment(b.offset, b.size) = ops.get(b.label).array().log();
        break;
      case TransformKind::LkjChain:
        eta.segment(b.offset, b.size) =
            CholCorrelation::from_matrix(ops.get_corr(b.label)).to_unconstrained();
        break;
    }
  }
  return eta;
}

ModelSpec Transform::from_unconstrained(const VectorXd& eta) const {
  if (eta.size() != dim_) throw std::invalid_argument("Transform: bad eta size");
  if (!eta.allFinite()) throw std::domain_error("Transform: non-finite eta");
  ModelSpec model = template_;
  BlockOps ops{&model};
  for (const auto& b : blocks_) {
    switch (b.kind) {
      case TransformKind::Identity:
        ops.set(model, b.label, eta.segment(b.offset, b.size));
        break;
      case TransformKind::Log:
        ops.set(model, b.label, eta.segment(b.offset, b.size).array().exp());
        break;
      case TransformKind::LkjChain:
        ops.set_corr(model, b.label,
                     symmetrize(CholCorrelation::from_unconstrained(
                                    eta.segment(b.offset, b.size), b.aux)
                                    .matrix()));
        break;
    }
  }
  return model;
}

double Transform::log_jacobian(const VectorXd& eta, VectorXd* grad) const {
  if (!eta.allFinite()) throw std::domain_error("Transform: non-finite eta");
  double logj = 0.0;
  if (grad) *grad = VectorXd::Zero(dim_);
  for (const auto& b : blocks_) {
    switch (b.kind) {
      case TransformKind::Identity:
        break;
      case TransformKind::Log:
        logj += eta.segment(b.offset, b.size).sum();
        if (grad) grad->segment(b.offset, b.size).array() += 1.0;
        break;
      case TransformKind::LkjChain: {
        const auto chol = CholCorrelation::from_unconstrained(eta.segment(b.offset, b.size),
                                                              b.aux);
        VectorXd g;
        logj += lkj_log_jacobian(chol, grad ? &g : nullptr);
        if (grad) grad->segment(b.offset, b.size) += g;
        break;
      }
    }
  }
  return logj;
}

VectorXd Transform::pullback(const ModelSpec& at, const NaturalGradient& g) const {
  BlockOps ops{&at};
  VectorXd out = VectorXd::Zero(dim_);
  auto scatter_vec = [&](const BlockInfo& b, const VectorXd& natural_grad) {
    if (natural_grad.size() == 0) return;
    if (b.kind == TransformKind::Log) {
      out.segment(b.offset, b.size) =
          natural_grad.cwiseProduct(ops.get(b.label));
    } else {
      out.segment(b.offset, b.size) = natural_grad;
    }
  };
  for (const auto& b : blocks_) {
    if (b.label == "mu") {
      scatter_vec(b, g.d_root_mean);
    } else if (b.label == "nu") {
      scatter_vec(b, g.d_drift);
    } else if (b.label == "sigma") {
      scatter_vec(b, g.d_sigma);
    } else if (b.label == "alpha") {
      scatter_vec(b, g.d_alpha);
    } else if (b.label == "beta") {
      scatter_vec(b, g.d_optimum);
    } else if (b.label == "obs_sd") {
      scatter_vec(b, g.d_obs_sdev);
    } else if (b.label == "corr") {
      if (g.d_correlation.size()) {
        out.segment(b.offset, b.size) = lkj_pullback(
            CholCorrelation::from_matrix(at.evo.correlation), g.d_correlation);
      }
    } else if (b.label == "obs_corr") {
      if (g.d_obs_correlation.size()) {
        out.segment(b.offset, b.size) = lkj_pullback(
            CholCorrelation::from_matrix(at.obs.correlation), g.d_obs_correlation);
      }
    } else if (b.label == "gamma_sd" || b.label == "gamma_corr") {
      if (!g.d_root_variance.size()) continue;
      // Gamma = D C D: split the dense cotangent into the two blocks.
      const VectorXd sd = at.root.variance.diagonal().array().sqrt();
      const MatrixXd corr = ops.get_corr("gamma_corr");
      if (b.label == "gamma_sd") {
        const VectorXd dsd = 2.0 * (g.d_root_variance * sd.asDiagonal() * corr).diagonal();
        out.segment(b.offset, b.size) = dsd.cwiseProduct(sd);  // log transform
      } else {
        const MatrixXd dcorr =
            symmetrize(sd.asDiagonal() * g.d_root_variance * sd.asDiagonal());
        out.segment(b.offset, b.size) =
            lkj_pullback(CholCorrelation::from_matrix(corr), dcorr);
      }
    }
  }
  return out;
}

std::vector<std::string> Transform::natural_names() const {
  std::vector<std::string> names;
  for (const auto& b : blocks_) {
    if (b.kind == TransformKind::LkjChain) {
      for (int k = 1; k < b.aux; ++k) {
        for (int i = 0; i < k; ++i) {
          names.push_back(b.label + "[" + std::to_string(i) + "," + std::to_string(k) + "]");
        }
      }
    } else {
      for (int i = 0; i < b.size; ++i) {
        names.push_back(b.label + "[" + std::to_string(i) + "]");
      }
    }
  }
  return names;
}

VectorXd Transform::natural_values(const ModelSpec& model) const {
  BlockOps ops{&model};
  VectorXd vals(dim_);
  int off = 0;
  for (const auto& b : blocks_) {
    if (b.kind == TransformKind::LkjChain) {
      const MatrixXd c = ops.get_corr(b.label);
      for (int k = 1; k < b.aux; ++k) {
        for (int i = 0; i < k; ++i) vals[off++] = c(i, k);
      }
    } else {
      const VectorXd v = ops.get(b.label);
      for (int i = 0; i < b.size; ++i) vals[off++] = v[i];
    }
  }
  return vals;
}

}  // namespace phylogauss
