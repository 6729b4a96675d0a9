#include "phylogauss/priors.hpp"

#include <cmath>
#include <stdexcept>

#include "phylogauss/linalg.hpp"

namespace phylogauss {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLogPi = 1.1447298858494002;
// 97.5% quantile of the standard normal = 95% quantile of a half-normal.
constexpr double kHalfNormalQ95 = 1.959963984540054;
}  // namespace

double PriorConfig::default_alpha_sd() { return std::log(2.0) / 0.05 / kHalfNormalQ95; }

double log_normal_pdf(double x, double mean, double sd, double* dx) {
  const double z = (x - mean) / sd;
  if (dx) *dx = -z / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

double log_half_normal_pdf(double x, double sd, double* dx) {
  if (x < 0) throw std::domain_error("half-normal: parameter outside support");
  if (dx) *dx = -x / (sd * sd);
  return std::log(2.0) - 0.5 * kLog2Pi - std::log(sd) - 0.5 * x * x / (sd * sd);
}

double log_half_student_pdf(double x, double df, double scale, double* dx) {
  if (x < 0) throw std::domain_error("half-Student: parameter outside support");
  const double s2 = scale * scale;
  if (dx) *dx = -(df + 1.0) * x / (df * s2 + x * x);
  return std::log(2.0) + std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
         0.5 * std::log(df) - 0.5 * kLogPi - std::log(scale) -
         0.5 * (df + 1.0) * std::log1p(x * x / (df * s2));
}

double lkj_log_constant(int p, double eta) {
  // Product over columns of the spherical-beta constants
  // Gamma(beta_k + (k-1)/2) pi^{-(k-1)/2} / Gamma(beta_k), beta_k = eta + (p-k)/2.
  double logc = 0.0;
  for (int k = 2; k <= p; ++k) {
    const double beta = eta + 0.5 * (p - k);
    logc += std::lgamma(beta + 0.5 * (k - 1)) - 0.5 * (k - 1) * kLogPi - std::lgamma(beta);
  }
  return logc;
}

double lkj_log_constant_closed_form(int p, double eta) {
  double logc = (p - 1) * std::lgamma(eta + 0.5 * (p - 1));
  for (int k = 1; k <= p - 1; ++k) {
    logc -= 0.5 * k * kLogPi + std::lgamma(eta + 0.5 * (p - k - 1));
  }
  return logc;
}

double lkj_log_pdf(const MatrixXd& corr, double eta, MatrixXd* dcorr) {
  const int p = static_cast<int>(corr.rows());
  Eigen::LLT<MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("lkj_log_pdf: correlation not positive definite");
  }
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  if (dcorr) {
    *dcorr = (eta - 1.0) * llt.solve(MatrixXd::Identity(p, p));
  }
  return lkj_log_constant(p, eta) + (eta - 1.0) * logdet;
}

double log_prior(const ModelSpec& model, const PriorConfig& cfg, NaturalGradient* grad) {
  const int p = model.p;
  const auto bm = bm_dimensions(model.evo);
  const auto ou = ou_dimensions(model.evo);
  double logp = 0.0;
  double dx = 0.0;

  if (grad) {
    grad->d_root_mean = VectorXd::Zero(p);
    if (!model.root.fixed) grad->d_root_variance = MatrixXd::Zero(p, p);
    if (model.evo.has_drift && !bm.empty()) {
      grad->d_drift = VectorXd::Zero(static_cast<int>(bm.size()));
    }
    grad->d_sigma = VectorXd::Zero(p);
    grad->d_correlation = MatrixXd::Zero(p, p);
    grad->d_diffusion = MatrixXd();
    if (!ou.empty()) {
      grad->d_alpha = VectorXd::Zero(static_cast<int>(ou.size()));
      grad->d_optimum = VectorXd::Zero(static_cast<int>(ou.size()));
    }
    if (model.obs.kind != ObsKind::None) {
      grad->d_obs_sdev = VectorXd::Zero(p);
      if (model.obs.structure == ObsStructure::Correlated) {
        grad->d_obs_correlation = MatrixXd::Zero(p, p);
      }
    }
  }

  for (int k = 0; k < p; ++k) {
    logp += log_normal_pdf(model.root.mean[k], 0.0, cfg.mean_sd, grad ? &dx : nullptr);
    if (grad) grad->d_root_mean[k] = dx;
  }
  for (std::size_t b = 0; b < ou.size(); ++b) {
    logp += log_normal_pdf(model.evo.optimum[ou[b]], 0.0, cfg.mean_sd, grad ? &dx : nullptr);
    if (grad) grad->d_optimum[static_cast<int>(b)] += dx;
    logp += log_half_normal_pdf(model.evo.alpha[ou[b]], cfg.alpha_sd, grad ? &dx : nullptr);
    if (grad) grad->d_alpha[static_cast<int>(b)] += dx;
  }
  if (model.evo.has_drift) {
    for (std::size_t b = 0; b < bm.size(); ++b) {
      logp += log_normal_pdf(model.evo.drift[bm[b]], 0.0, cfg.mean_sd, grad ? &dx : nullptr);
      if (grad) grad->d_drift[static_cast<int>(b)] += dx;
    }
  }
  for (int k = 0; k < p; ++k) {
    logp += log_half_student_pdf(model.evo.sigma[k], cfg.sd_df, cfg.sd_scale,
                                 grad ? &dx : nullptr);
    if (grad) grad->d_sigma[k] += dx;
  }
  if (p > 1) {
    MatrixXd dcorr;
    logp += lkj_log_pdf(model.evo.correlation, cfg.lkj_eta, grad ? &dcorr : nullptr);
    if (grad) grad->d_correlation = dcorr;
  }
  if (!model.root.fixed) {
    // Gamma = D C D prior: half-Student on the sds, LKJ on the correlation,
    // assembled as a dense cotangent over Gamma.
    const VectorXd sd = model.root.variance.diagonal().array().sqrt();
    const MatrixXd corr = VectorXd(sd.array().inverse()).asDiagonal() * model.root.variance *
                          VectorXd(sd.array().inverse()).asDiagonal();
    VectorXd dsd = VectorXd::Zero(p);
    for (int k = 0; k < p; ++k) {
      logp += log_half_student_pdf(sd[k], cfg.sd_df, cfg.sd_scale, grad ? &dx : nullptr);
      if (grad) dsd[k] = dx;
    }
    MatrixXd dcorr = MatrixXd::Zero(p, p);
    if (p > 1) {
      logp += lkj_log_pdf(symmetrize(corr), cfg.lkj_eta, grad ? &dcorr : nullptr);
    }
    if (grad) {
      // d/dGamma of the sd part: sd_k = sqrt(Gamma_kk).
      MatrixXd dg = MatrixXd::Zero(p, p);
      for (int k = 0; k < p; ++k) dg(k, k) += dsd[k] * 0.5 / sd[k];
      // d/dGamma of the correlation part: C = D^-1 Gamma D^-1.
      const MatrixXd dinv = VectorXd(sd.array().inverse()).asDiagonal();
      MatrixXd dg_corr = dinv * symmetrize(dcorr) * dinv;
      // C_kl depends on Gamma_kk through the scaling: add the diagonal terms.
      for (int k = 0; k < p; ++k) {
        double acc = 0.0;
        for (int l = 0; l < p; ++l) {
          if (l == k) continue;
          acc += dcorr(k, l) * corr(k, l);
        }
        dg(k, k) += -acc / (sd[k] * sd[k]);
      }
      grad->d_root_variance = symmetrize(dg + dg_corr -
                                         MatrixXd((dg_corr.diagonal()).asDiagonal()));
    }
  }
  if (model.obs.kind != ObsKind::None) {
    for (int k = 0; k < p; ++k) {
      logp += log_half_student_pdf(model.obs.sdev[k], cfg.obs_sd_df, cfg.obs_sd_scale,
                                   grad ? &dx : nullptr);
      if (grad) grad->d_obs_sdev[k] += dx;
    }
    if (model.obs.structure == ObsStructure::Correlated && p > 1) {
      MatrixXd dcorr;
      logp += lkj_log_pdf(model.obs.correlation, cfg.lkj_eta, grad ? &dcorr : nullptr);
      if (grad) grad->d_obs_correlation = dcorr;
    }
  }
  return logp;
}

double half_student_median(double scale) { return scale; }

double half_normal_median(double sd) { return sd * 0.6744897501960817; }

}  // namespace phylogauss
