#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "phylogauss/priors.hpp"
#include "phylogauss/stats.hpp"
#include "phylogauss/trait_data.hpp"
#include "phylogauss/transforms.hpp"

namespace phylogauss {

struct LogDensity {
  double value = 0.0;
  VectorXd grad;
  bool ok = false;
};

using TargetFn = std::function<LogDensity(const VectorXd&)>;

struct HmcConfig {
  int leapfrog_steps = 100;
  double step_size = 0.01;
  int iterations = 5000;
  int thin = 1;
  double burn_in_fraction = 0.1;
  std::uint64_t seed = 42;
  double divergence_threshold = 1000.0;

  void validate() const;
};

struct RwConfig {
  double scale = 0.1;
  bool adapt = true;  // tune the scale toward 23% acceptance during burn-in
  int iterations = 100000;
  int thin = 10;
  double burn_in_fraction = 0.1;
  std::uint64_t seed = 42;

  void validate() const;
};

struct Chain {
  std::vector<std::string> eta_names;
  std::vector<std::string> natural_names;
  MatrixXd eta;      // kept iterations x dim
  MatrixXd natural;  // kept iterations x dim, natural space
  VectorXd log_post;
  VectorXd delta_h;  // Hamiltonian error per kept iteration (0 for RW)
  std::vector<char> accepted;
  double accept_rate = 0.0;
  int divergences = 0;
  int burn_rows = 0;  // kept rows regarded as burn-in

  int kept() const { return static_cast<int>(eta.rows()); }
  MatrixXd natural_post_burn() const;
  MatrixXd eta_post_burn() const;
};

// One leapfrog trajectory of L steps; returns (position, momentum) and
// whether every gradient along the way was finite.
struct LeapfrogResult {
  VectorXd position;
  VectorXd momentum;
  LogDensity density_at_end;
  bool ok = false;
};
LeapfrogResult leapfrog(const VectorXd& eta, const VectorXd& momentum, double step_size,
                        int steps, const TargetFn& target);

Chain run_hmc(const TargetFn& target, const HmcConfig& cfg, const VectorXd& init);
Chain run_rw(const TargetFn& target, const RwConfig& cfg, const VectorXd& init);

// log posterior (likelihood + prior + transform Jacobian) over the
// unconstrained space, with its gradient. Invalid parameter regions come
// back with ok = false.
TargetFn make_posterior_target(const Transform& tf, const TraitData& data,
                               const PriorConfig& priors);

// Prior-median initialization point in the unconstrained space.
VectorXd prior_median_eta(const Transform& tf, const PriorConfig& priors);

// Convenience drivers that fill the natural-space columns of the chain.
Chain sample_posterior_hmc(const Transform& tf, const TraitData& data,
                           const PriorConfig& priors, const HmcConfig& cfg);
Chain sample_posterior_rw(const Transform& tf, const TraitData& data,
                          const PriorConfig& priors, const RwConfig& cfg);
void fill_natural(Chain& chain, const Transform& tf);

}  // namespace phylogauss
