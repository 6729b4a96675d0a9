#include "phylogauss/hmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace phylogauss {

void HmcConfig::validate() const {
  if (leapfrog_steps < 1) throw std::invalid_argument("hmc: leapfrog steps must be >= 1");
  if (step_size <= 0) throw std::invalid_argument("hmc: step size must be > 0");
  if (iterations < 1 || thin < 1) throw std::invalid_argument("hmc: bad iteration counts");
  if (burn_in_fraction < 0 || burn_in_fraction >= 1) {
    throw std::invalid_argument("hmc: burn-in fraction outside [0,1)");
  }
}

void RwConfig::validate() const {
  if (scale <= 0) throw std::invalid_argument("rw: proposal scale must be > 0");
  if (iterations < 1 || thin < 1) throw std::invalid_argument("rw: bad iteration counts");
  if (burn_in_fraction < 0 || burn_in_fraction >= 1) {
    throw std::invalid_argument("rw: burn-in fraction outside [0,1)");
  }
}

MatrixXd Chain::natural_post_burn() const {
  return natural.bottomRows(kept() - burn_rows);
}

MatrixXd Chain::eta_post_burn() const { return eta.bottomRows(kept() - burn_rows); }

LeapfrogResult leapfrog(const VectorXd& eta, const VectorXd& momentum, double step_size,
                        int steps, const TargetFn& target) {
  LeapfrogResult out;
  out.position = eta;
  out.momentum = momentum;
  LogDensity d = target(out.position);
  if (!d.ok) return out;
  out.momentum += 0.5 * step_size * d.grad;
  for (int s = 0; s < steps; ++s) {
    out.position += step_size * out.momentum;
    d = target(out.position);
    if (!d.ok || !d.grad.allFinite()) return out;
    out.momentum += (s + 1 == steps ? 0.5 : 1.0) * step_size * d.grad;
  }
  out.density_at_end = d;
  out.ok = true;
  return out;
}

Chain run_hmc(const TargetFn& target, const HmcConfig& cfg, const VectorXd& init) {
  cfg.validate();
  const int dim = static_cast<int>(init.size());
  Rng rng(cfg.seed);

  LogDensity cur = target(init);
  if (!cur.ok) throw std::domain_error("run_hmc: posterior not finite at initialization");
  VectorXd eta = init;

  const int kept = cfg.iterations / cfg.thin;
  Chain chain;
  chain.eta.resize(kept, dim);
  chain.log_post.resize(kept);
  chain.delta_h.resize(kept);
  chain.accepted.assign(kept, 0);
  chain.burn_rows = static_cast<int>(std::floor(kept * cfg.burn_in_fraction));

  long accepted = 0;
  int row = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    VectorXd momentum(dim);
    for (int i = 0; i < dim; ++i) momentum[i] = rng.normal();
    const double h0 = -cur.value + 0.5 * momentum.squaredNorm();

    const LeapfrogResult traj =
        leapfrog(eta, momentum, cfg.step_size, cfg.leapfrog_steps, target);
    double dh = std::numeric_limits<double>::infinity();
    bool accept = false;
    if (traj.ok) {
      const double h1 = -traj.density_at_end.value + 0.5 * traj.momentum.squaredNorm();
      dh = h1 - h0;
      if (std::abs(dh) > cfg.divergence_threshold || !std::isfinite(dh)) {
        ++chain.divergences;
      } else {
        accept = std::log(rng.uniform() + 1e-300) < -dh;
      }
    } else {
      ++chain.divergences;
    }
    if (accept) {
      eta = traj.position;
      cur = traj.density_at_end;
      ++accepted;
    }
    if ((it + 1) % cfg.thin == 0) {
      chain.eta.row(row) = eta.transpose();
      chain.log_post[row] = cur.value;
      chain.delta_h[row] = std::isfinite(dh) ? dh : cfg.divergence_threshold;
      chain.accepted[row] = accept ? 1 : 0;
      ++row;
    }
  }
  chain.accept_rate = static_cast<double>(accepted) / cfg.iterations;
  return chain;
}

Chain run_rw(const TargetFn& target, const RwConfig& cfg, const VectorXd& init) {
  cfg.validate();
  const int dim = static_cast<int>(init.size());
  Rng rng(cfg.seed);

  LogDensity cur = target(init);
  if (!cur.ok) throw std::domain_error("run_rw: posterior not finite at initialization");
  VectorXd eta = init;

  const int kept = cfg.iterations / cfg.thin;
  Chain chain;
  chain.eta.resize(kept, dim);
  chain.log_post.resize(kept);
  chain.delta_h = VectorXd::Zero(kept);
  chain.accepted.assign(kept, 0);
  chain.burn_rows = static_cast<int>(std::floor(kept * cfg.burn_in_fraction));

  double scale = cfg.scale;
  const int burn_iters = static_cast<int>(cfg.iterations * cfg.burn_in_fraction);
  long accepted = 0;
  int window_accepted = 0;
  int window_size = 0;
  int row = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    VectorXd prop = eta;
    for (int i = 0; i < dim; ++i) prop[i] += scale * rng.normal();
    const LogDensity d = target(prop);
    bool accept = false;
    if (d.ok) {
      accept = std::log(rng.uniform() + 1e-300) < d.value - cur.value;
    }
    if (accept) {
      eta = prop;
      cur = d;
      ++accepted;
      ++window_accepted;
    }
    ++window_size;
    if (cfg.adapt && it < burn_iters && window_size == 100) {
      const double rate = static_cast<double>(window_accepted) / window_size;
      scale *= std::exp(rate - 0.234);
      window_accepted = 0;
      window_size = 0;
    }
    if ((it + 1) % cfg.thin == 0) {
      chain.eta.row(row) = eta.transpose();
      chain.log_post[row] = cur.value;
      chain.accepted[row] = accept ? 1 : 0;
      ++row;
    }
  }
  chain.accept_rate = static_cast<double>(accepted) / cfg.iterations;
  return chain;
}

TargetFn make_posterior_target(const Transform& tf, const TraitData& data,
                               const PriorConfig& priors) {
  return [&tf, &data, priors](const VectorXd& eta) -> LogDensity {
    LogDensity out;
    out.grad = VectorXd::Zero(eta.size());
    if (!eta.allFinite()) return out;
    try {
      const ModelSpec model = tf.from_unconstrained(eta);
      const auto [logl, glik] = natural_gradient(model, data);
      NaturalGradient gprior;
      const double logp = log_prior(model, priors, &gprior);
      VectorXd jgrad;
      const double logj = tf.log_jacobian(eta, &jgrad);
      out.value = logl + logp + logj;
      out.grad = tf.pullback(model, glik) + tf.pullback(model, gprior) + jgrad;
      out.ok = std::isfinite(out.value) && out.grad.allFinite();
    } catch (const std::domain_error&) {
      out.ok = false;
    } catch (const std::invalid_argument&) {
      out.ok = false;
    }
    return out;
  };
}

VectorXd prior_median_eta(const Transform& tf, const PriorConfig& priors) {
  const auto& coords = tf.coords();
  VectorXd eta = VectorXd::Zero(tf.dim());
  for (int i = 0; i < tf.dim(); ++i) {
    const std::string& name = coords[i].name;
    if (coords[i].kind != TransformKind::Log) continue;  // medians at 0
    if (name.rfind("log_alpha", 0) == 0) {
      eta[i] = std::log(half_normal_median(priors.alpha_sd));
    } else if (name.rfind("log_obs_sd", 0) == 0) {
      eta[i] = std::log(half_student_median(priors.obs_sd_scale));
    } else {
      eta[i] = std::log(half_student_median(priors.sd_scale));
    }
  }
  return eta;
}

void fill_natural(Chain& chain, const Transform& tf) {
  chain.eta_names.clear();
  for (const auto& c : tf.coords()) chain.eta_names.push_back(c.name);
  chain.natural_names = tf.natural_names();
  chain.natural.resize(chain.kept(), tf.dim());
  for (int r = 0; r < chain.kept(); ++r) {
    const ModelSpec m = tf.from_unconstrained(chain.eta.row(r).transpose());
    chain.natural.row(r) = tf.natural_values(m).transpose();
  }
}

Chain sample_posterior_hmc(const Transform& tf, const TraitData& data,
                           const PriorConfig& priors, const HmcConfig& cfg) {
  const TargetFn target = make_posterior_target(tf, data, priors);
  Chain chain = run_hmc(target, cfg, prior_median_eta(tf, priors));
  fill_natural(chain, tf);
  return chain;
}

Chain sample_posterior_rw(const Transform& tf, const TraitData& data,
                          const PriorConfig& priors, const RwConfig& cfg) {
  const TargetFn target = make_posterior_target(tf, data, priors);
  Chain chain = run_rw(target, cfg, prior_median_eta(tf, priors));
  fill_natural(chain, tf);
  return chain;
}

}  // namespace phylogauss
