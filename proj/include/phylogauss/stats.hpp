#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace phylogauss {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Deterministic generator: mt19937_64 stream with an explicit Box-Muller
// normal, so identical seeds give identical chains on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  double uniform();  // [0, 1)
  double normal();
  std::uint64_t integer(std::uint64_t bound);  // [0, bound)
  double exponential(double rate);

  // Independent substream, stable under call-order changes of the parent.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t next();
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Effective sample size by the initial-positive-sequence rule: sum the
// lag-pair autocorrelations while the pairs stay positive. Capped at the
// series length; a constant series reports length with the degenerate flag.
struct EssResult {
  double ess = 0.0;
  bool degenerate = false;
};
EssResult effective_sample_size(const VectorXd& series);

// Kolmogorov-Smirnov statistic of samples against a cdf given as values
// at the sorted sample points.
double ks_statistic_uniform(std::vector<double> samples, double lo, double hi);

// Shortest interval holding the given posterior mass.
std::pair<double, double> hpd_interval(std::vector<double> samples, double mass);

double quantile(std::vector<double> samples, double q);

double mean(const VectorXd& v);
double variance(const VectorXd& v);

}  // namespace phylogauss
