#pragma once

#include <string>
#include <vector>

#include "phylogauss/hmc.hpp"

namespace phylogauss {

// Path exponents as evenly spaced quantiles of Beta(shape, 1):
// beta_k = (k / K)^(1/shape) for k = 1..K, preceded by 0 where the working
// prior itself is sampled.
struct PathSchedule {
  int rungs = 50;
  double beta_shape = 0.3;

  std::vector<double> betas() const;  // strictly increasing, ends at 1
  void validate() const;
};

// Independent per-coordinate kernel density estimate over the unconstrained
// space, with a normal kernel and Silverman bandwidth. Positive natural
// parameters are log coordinates here already, which realizes the
// log-transformed kernel for them.
struct WorkingPrior {
  struct Coord {
    VectorXd points;
    double bandwidth = 0.0;
    bool degenerate = false;  // fell back to a narrow normal
    double mean = 0.0;
    double sd = 0.0;
  };
  std::vector<Coord> coords;
  bool use_exact_prior = false;  // reduces GSS to standard stepping-stone

  double log_density(const VectorXd& eta, VectorXd* grad = nullptr) const;
  static WorkingPrior fit(const MatrixXd& eta_draws);
};

struct GssSettings {
  PathSchedule schedule;
  int posterior_iterations = 2000;  // initial run that feeds the KDE
  int rung_iterations = 1000;
  HmcConfig hmc;  // leapfrog settings shared by all runs
  bool standard_stepping_stone = false;

  void validate() const;
};

struct RungDiagnostics {
  double beta = 0.0;
  double mean_log_likelihood = 0.0;
  double ess = 0.0;
  double log_ratio = 0.0;  // contribution of the step ending at this rung
};

struct GssResult {
  double log_ml = 0.0;
  double mc_error = 0.0;
  std::vector<RungDiagnostics> rungs;
  Chain posterior;  // the initial beta = 1 run
};

// Path target: beta * (logL + log prior + log |J|) + (1 - beta) * log pi0.
TargetFn make_path_target(const Transform& tf, const TraitData& data,
                          const PriorConfig& priors, const WorkingPrior& wp, double beta);

GssResult estimate_log_ml(const Transform& tf, const TraitData& data,
                          const PriorConfig& priors, const GssSettings& settings);

struct ModelComparison {
  std::string name;
  double log_ml = 0.0;
  double mc_error = 0.0;
  bool failed = false;
  std::string error;
};

struct ComparisonTable {
  std::vector<ModelComparison> models;          // sorted by log_ml, best first
  std::vector<std::vector<double>> log_bayes;   // pairwise, row - column
  std::vector<std::string> kass_raftery;        // label of best vs each other
};

ComparisonTable compare_models(const std::vector<std::pair<std::string, Transform>>& models,
                               const TraitData& data, const PriorConfig& priors,
                               const GssSettings& settings);

// Kass-Raftery qualitative reading of a log Bayes factor.
std::string kass_raftery_label(double log_bf);

}  // namespace phylogauss
