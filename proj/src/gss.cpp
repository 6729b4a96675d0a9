#include "phylogauss/gss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace phylogauss {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}
}  // namespace

std::vector<double> PathSchedule::betas() const {
  validate();
  std::vector<double> out(rungs);
  for (int k = 1; k <= rungs; ++k) {
    out[k - 1] = std::pow(static_cast<double>(k) / rungs, 1.0 / beta_shape);
  }
  out.back() = 1.0;
  return out;
}

void PathSchedule::validate() const {
  if (rungs < 2) throw std::invalid_argument("gss: need at least 2 rungs");
  if (beta_shape <= 0) throw std::invalid_argument("gss: beta shape must be > 0");
}

void GssSettings::validate() const {
  schedule.validate();
  if (posterior_iterations < 100 || rung_iterations < 10) {
    throw std::invalid_argument("gss: iteration counts too small");
  }
}

double WorkingPrior::log_density(const VectorXd& eta, VectorXd* grad) const {
  if (use_exact_prior) throw std::logic_error("WorkingPrior: exact mode handled by caller");
  if (eta.size() != static_cast<int>(coords.size())) {
    throw std::invalid_argument("WorkingPrior: dimension mismatch");
  }
  double logp = 0.0;
  if (grad) grad->resize(eta.size());
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const Coord& coord = coords[c];
    const double x = eta[static_cast<int>(c)];
    if (coord.degenerate) {
      const double z = (x - coord.mean) / coord.sd;
      logp += -0.5 * kLog2Pi - std::log(coord.sd) - 0.5 * z * z;
      if (grad) (*grad)[static_cast<int>(c)] = -z / coord.sd;
      continue;
    }
    const double h = coord.bandwidth;
    const int n = static_cast<int>(coord.points.size());
    VectorXd logk(n);
    for (int i = 0; i < n; ++i) {
      const double z = (x - coord.points[i]) / h;
      logk[i] = -0.5 * z * z;
    }
    const double lse = log_sum_exp(logk);
    logp += lse - std::log(static_cast<double>(n)) - std::log(h) - 0.5 * kLog2Pi;
    if (grad) {
      double num = 0.0;
      for (int i = 0; i < n; ++i) {
        num += std::exp(logk[i] - lse) * (coord.points[i] - x);
      }
      (*grad)[static_cast<int>(c)] = num / (h * h);
    }
  }
  return logp;
}

WorkingPrior WorkingPrior::fit(const MatrixXd& eta_draws) {
  const int n = static_cast<int>(eta_draws.rows());
  if (n < 100) throw std::invalid_argument("WorkingPrior: need at least 100 samples");
  WorkingPrior wp;
  wp.coords.resize(eta_draws.cols());
  for (int c = 0; c < eta_draws.cols(); ++c) {
    Coord& coord = wp.coords[c];
    coord.points = eta_draws.col(c);
    coord.mean = coord.points.mean();
    coord.sd = std::sqrt(variance(coord.points));
    if (coord.sd <= 0 || !std::isfinite(coord.sd)) {
      coord.degenerate = true;
      coord.sd = 1e-3 * std::abs(coord.mean) + 1e-6;
      continue;
    }
    coord.bandwidth = 1.06 * coord.sd * std::pow(static_cast<double>(n), -0.2);
  }
  return wp;
}

TargetFn make_path_target(const Transform& tf, const TraitData& data,
                          const PriorConfig& priors, const WorkingPrior& wp, double beta) {
  const TargetFn posterior = make_posterior_target(tf, data, priors);
  if (wp.use_exact_prior) {
    // Standard stepping stone: pi0 is the model prior itself (with the
    // Jacobian, making it a density over eta).
    return [&tf, priors, posterior, beta](const VectorXd& eta) -> LogDensity {
      LogDensity out;
      out.grad = VectorXd::Zero(eta.size());
      try {
        const ModelSpec model = tf.from_unconstrained(eta);
        NaturalGradient gprior;
        const double logp = log_prior(model, priors, &gprior);
        VectorXd jgrad;
        const double logj = tf.log_jacobian(eta, &jgrad);
        const LogDensity post = posterior(eta);
        if (!post.ok) return out;
        out.value = beta * post.value + (1.0 - beta) * (logp + logj);
        out.grad = beta * post.grad +
                   (1.0 - beta) * (tf.pullback(model, gprior) + jgrad);
        out.ok = out.grad.allFinite() && std::isfinite(out.value);
      } catch (const std::domain_error&) {
      } catch (const std::invalid_argument&) {
      }
      return out;
    };
  }
  return [posterior, &wp, beta](const VectorXd& eta) -> LogDensity {
    LogDensity out;
    out.grad = VectorXd::Zero(eta.size());
    const LogDensity post = posterior(eta);
    if (!post.ok) return out;
    VectorXd wgrad;
    const double logw = wp.log_density(eta, &wgrad);
    out.value = beta * post.value + (1.0 - beta) * logw;
    out.grad = beta * post.grad + (1.0 - beta) * wgrad;
    out.ok = out.grad.allFinite() && std::isfinite(out.value);
    return out;
  };
}

GssResult estimate_log_ml(const Transform& tf, const TraitData& data,
                          const PriorConfig& priors, const GssSettings& settings) {
  settings.validate();
  GssResult res;

  // Initial posterior run feeds the working prior and the warm start.
  HmcConfig post_cfg = settings.hmc;
  post_cfg.iterations = settings.posterior_iterations;
  post_cfg.thin = 1;
  res.posterior = run_hmc(make_posterior_target(tf, data, priors), post_cfg,
                          prior_median_eta(tf, priors));
  fill_natural(res.posterior, tf);

  WorkingPrior wp;
  if (settings.standard_stepping_stone) {
    wp.use_exact_prior = true;
  } else {
    wp = WorkingPrior::fit(res.posterior.eta_post_burn());
  }

  // log weight of a state: log[posterior-unnormalized] - log[pi0], both as
  // densities over eta.
  const TargetFn posterior = make_posterior_target(tf, data, priors);
  const TargetFn prior_only = make_path_target(tf, data, priors, wp, 0.0);
  auto log_weight = [&](const VectorXd& eta) -> double {
    const LogDensity a = posterior(eta);
    const LogDensity b = prior_only(eta);
    if (!a.ok || !b.ok) return -std::numeric_limits<double>::infinity();
    return a.value - b.value;
  };

  std::vector<double> betas = settings.schedule.betas();
  const int K = static_cast<int>(betas.size());
  // Sampled exponents: 0 = working prior, then all but the last rung.
  std::vector<double> sampled(K);
  sampled[0] = 0.0;
  for (int k = 1; k < K; ++k) sampled[k] = betas[k - 1];

  // Warm-start each rung from the previous one, walking beta downward so
  // the first rung starts at the posterior sample.
  VectorXd state = res.posterior.eta.row(res.posterior.kept() - 1).transpose();
  std::vector<MatrixXd> rung_draws(K);
  for (int k = K - 1; k >= 0; --k) {
    HmcConfig rung_cfg = settings.hmc;
    rung_cfg.iterations = settings.rung_iterations;
    rung_cfg.thin = 1;
    rung_cfg.burn_in_fraction = 0.1;
    rung_cfg.seed = settings.hmc.seed + 1000 + static_cast<std::uint64_t>(k);
    const TargetFn target = make_path_target(tf, data, priors, wp, sampled[k]);
    LogDensity at_state = target(state);
    if (!at_state.ok) state = prior_median_eta(tf, priors);
    Chain rung = run_hmc(target, rung_cfg, state);
    state = rung.eta.row(rung.kept() - 1).transpose();
    rung_draws[k] = rung.eta_post_burn();
  }

  // Ratio-of-means estimator between consecutive exponents, stabilized by
  // log-sum-exp; the step from sampled[k] to betas[k] uses rung k's draws.
  res.log_ml = 0.0;
  double var_acc = 0.0;
  res.rungs.resize(K);
  for (int k = 0; k < K; ++k) {
    const MatrixXd& draws = rung_draws[k];
    const int n = static_cast<int>(draws.rows());
    VectorXd logw(n);
    for (int i = 0; i < n; ++i) logw[i] = log_weight(draws.row(i).transpose());
    if (!logw.allFinite()) {
      throw std::runtime_error("gss: non-finite importance weight at rung " +
                               std::to_string(k));
    }
    const double step = betas[k] - sampled[k];
    const VectorXd scaled = step * logw;
    const double log_ratio = log_sum_exp(scaled) - std::log(static_cast<double>(n));
    res.log_ml += log_ratio;

    // Delta-method error with an autocorrelation-adjusted sample size.
    const VectorXd w = (scaled.array() - scaled.maxCoeff()).exp();
    const double wbar = w.mean();
    const double wvar = variance(w);
    double ess = n;
    if (wvar > 0) ess = std::max(1.0, effective_sample_size(scaled).ess);
    var_acc += wvar / (ess * wbar * wbar);

    res.rungs[k].beta = sampled[k];
    res.rungs[k].log_ratio = log_ratio;
    res.rungs[k].mean_log_likelihood = logw.mean();
    res.rungs[k].ess = ess;
  }
  res.mc_error = std::sqrt(var_acc);
  return res;
}

ComparisonTable compare_models(const std::vector<std::pair<std::string, Transform>>& models,
                               const TraitData& data, const PriorConfig& priors,
                               const GssSettings& settings) {
  if (models.size() < 2) throw std::invalid_argument("compare_models: need >= 2 models");
  ComparisonTable table;
  for (const auto& [name, tf] : models) {
    ModelComparison row;
    row.name = name;
    try {
      const GssResult res = estimate_log_ml(tf, data, priors, settings);
      row.log_ml = res.log_ml;
      row.mc_error = res.mc_error;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      row.log_ml = -std::numeric_limits<double>::infinity();
    }
    table.models.push_back(std::move(row));
  }
  std::stable_sort(table.models.begin(), table.models.end(),
                   [](const ModelComparison& a, const ModelComparison& b) {
                     return a.log_ml > b.log_ml;
                   });
  const std::size_t n = table.models.size();
  table.log_bayes.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      table.log_bayes[i][j] = table.models[i].log_ml - table.models[j].log_ml;
    }
  }
  table.kass_raftery.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    table.kass_raftery[j] = kass_raftery_label(table.log_bayes[0][j]);
  }
  return table;
}

std::string kass_raftery_label(double log_bf) {
  const double two_ln = 2.0 * log_bf;
  if (two_ln < 2.0) return "not worth more than a bare mention";
  if (two_ln < 6.0) return "positive";
  if (two_ln < 10.0) return "strong";
  return "very strong";
}

}  // namespace phylogauss
