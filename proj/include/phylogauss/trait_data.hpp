#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace phylogauss {

// Observation matrix with a per-cell missingness mask. Row i is one
// measurement attached to the taxon named in taxa[i]; several rows may
// share a taxon. Missing cells hold 0 in values and false in observed.
struct TraitData {
  std::vector<std::string> taxa;
  std::vector<std::string> trait_names;
  Eigen::MatrixXd values;                            // N x p
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;  // N x p

  int n_obs() const { return static_cast<int>(values.rows()); }
  int n_traits() const { return static_cast<int>(values.cols()); }
  bool fully_observed(int i) const { return observed.row(i).all(); }
  bool fully_missing(int i) const { return !observed.row(i).any(); }
  int observed_count(int i) const { return static_cast<int>(observed.row(i).count()); }
};

// CSV with header "taxon,<trait names...>"; missing cells are the literal
// NA. Throws std::runtime_error naming the offending line.
TraitData read_trait_csv(const std::string& path);
TraitData parse_trait_csv(const std::string& content);
std::string format_trait_csv(const TraitData& data);

}  // namespace phylogauss
