#pragma once

#include "phylogauss/gradient.hpp"
#include "phylogauss/model.hpp"

namespace phylogauss {

// Default prior family, stated for a tree normalized to unit height:
// normal(0, 5) on means, optima and drifts; half-Student(df 1, scale 2.5)
// on diffusion and observation standard deviations; LKJ(1) on correlation
// matrices; half-normal on selection strengths with the sd chosen so that
// the phylogenetic half-life log(2)/alpha exceeds 5% of the tree height
// with prior probability 95%.
struct PriorConfig {
  double mean_sd = 5.0;
  double sd_df = 1.0;
  double sd_scale = 2.5;
  double alpha_sd = default_alpha_sd();
  double lkj_eta = 1.0;
  double obs_sd_df = 1.0;
  double obs_sd_scale = 2.5;

  static double default_alpha_sd();  // log(2) / 0.05 / 1.95996... ~= 7.0731
};

// Scalar building blocks.
double log_normal_pdf(double x, double mean, double sd, double* dx = nullptr);
double log_half_normal_pdf(double x, double sd, double* dx = nullptr);
double log_half_student_pdf(double x, double df, double scale, double* dx = nullptr);

// Normalization constant of the LKJ distribution, computed from the
// spherical-beta factorization over the Cholesky columns.
double lkj_log_constant(int p, double eta);
// The same constant via the closed-form product of gamma functions.
double lkj_log_constant_closed_form(int p, double eta);

// log LKJ(C | eta) = log c_p(eta) + (eta - 1) log det C, as a density over
// vech of the correlation matrix; gradient is the symmetric cotangent
// (eta - 1) C^-1.
double lkj_log_pdf(const MatrixXd& corr, double eta, MatrixXd* dcorr = nullptr);

// Sum of the block log-densities over the free natural parameters of the
// model; the gradient (when requested) comes back in the NaturalGradient
// conventions. Throws std::domain_error for parameters outside support.
double log_prior(const ModelSpec& model, const PriorConfig& cfg,
                 NaturalGradient* grad = nullptr);

// Prior medians, used for chain initialization.
double half_student_median(double scale);  // df 1: scale itself
double half_normal_median(double sd);

}  // namespace phylogauss
