#include "phylogauss/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace phylogauss {

namespace {
// splitmix64; decorrelates consecutive seeds and fork streams.
std::uint64_t splitmix(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next() { return splitmix(state_); }

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] x [0,1).
  const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t Rng::integer(std::uint64_t bound) {
  return next() % bound;  // modulo bias negligible for the sizes used here
}

double Rng::exponential(double rate) {
  const double u = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
  return -std::log(u) / rate;
}

Rng Rng::fork(std::uint64_t stream) const {
  std::uint64_t s = state_;
  std::uint64_t mixed = splitmix(s) ^ (0xa0761d6478bd642fULL * (stream + 1));
  return Rng(mixed);
}

EssResult effective_sample_size(const VectorXd& series) {
  const int n = static_cast<int>(series.size());
  if (n < 10) throw std::invalid_argument("effective_sample_size: series too short");
  const double mu = series.mean();
  const VectorXd c = series.array() - mu;
  const double gamma0 = c.squaredNorm() / n;
  if (gamma0 <= 0 || !std::isfinite(gamma0)) {
    return {static_cast<double>(n), true};
  }
  auto autocov = [&](int lag) {
    double acc = 0.0;
    for (int t = 0; t + lag < n; ++t) acc += c[t] * c[t + lag];
    return acc / n;
  };
  double tau = 1.0;
  for (int k = 1; k + 1 < n; k += 2) {
    const double pair = (autocov(k) + autocov(k + 1)) / gamma0;
    if (pair <= 0) break;
    tau += 2.0 * pair;
  }
  double ess = n / tau;
  ess = std::min(ess, static_cast<double>(n));
  ess = std::max(ess, 1e-12);
  return {ess, false};
}

double ks_statistic_uniform(std::vector<double> samples, double lo, double hi) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = (samples[i] - lo) / (hi - lo);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return d;
}

std::pair<double, double> hpd_interval(std::vector<double> samples, double mass) {
  if (samples.empty()) throw std::invalid_argument("hpd_interval: empty sample");
  std::sort(samples.begin(), samples.end());
  const int n = static_cast<int>(samples.size());
  const int k = std::max(1, static_cast<int>(std::ceil(mass * n)));
  double best_lo = samples.front();
  double best_hi = samples.back();
  double best_width = best_hi - best_lo;
  for (int i = 0; i + k - 1 < n; ++i) {
    const double width = samples[i + k - 1] - samples[i];
    if (width < best_width) {
      best_width = width;
      best_lo = samples[i];
      best_hi = samples[i + k - 1];
    }
  }
  return {best_lo, best_hi};
}

double quantile(std::vector<double> samples, double q) {
  if (samples.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(samples.begin(), samples.end());
  const double pos = q * (samples.size() - 1);
  const int lo = static_cast<int>(std::floor(pos));
  const int hi = static_cast<int>(std::ceil(pos));
  const double w = pos - lo;
  return (1.0 - w) * samples[lo] + w * samples[hi];
}

double mean(const VectorXd& v) { return v.mean(); }

double variance(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double mu = v.mean();
  return (v.array() - mu).square().sum() / (v.size() - 1);
}

}  // namespace phylogauss
