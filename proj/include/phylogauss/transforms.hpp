#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "phylogauss/gradient.hpp"
#include "phylogauss/model.hpp"

namespace phylogauss {

enum class TransformKind { Identity, Log, LkjChain };

struct CoordInfo {
  std::string name;  // unconstrained-space name
  TransformKind kind;
};

// Correlation matrices are carried through their upper Cholesky factor W
// (C = W'W, positive diagonal, unit-norm columns). The free coordinates of
// column k are its first k-1 entries, a point in the open Euclidean ball;
// the chain ball -> inf-ball -> R^{k-1} uses the partial-correlation map
// L_i(z) = z_i prod_{j<i} sqrt(1 - z_j^2) and atanh.
struct CholCorrelation {
  MatrixXd w;  // upper triangular, positive diagonal

  MatrixXd matrix() const { return w.transpose() * w; }
  static CholCorrelation from_matrix(const MatrixXd& c);
  static CholCorrelation from_unconstrained(const Eigen::Ref<const VectorXd>& eta, int p);
  VectorXd to_unconstrained() const;
  int dim() const { return static_cast<int>(w.rows()); }
};

// log |d vech(C) / d eta| for one correlation block, plus its eta-gradient.
double lkj_log_jacobian(const CholCorrelation& chol, VectorXd* grad_eta);

// Pulls a symmetric matrix cotangent over C back to the eta coordinates.
VectorXd lkj_pullback(const CholCorrelation& chol, const MatrixXd& c_cotangent);

// Which natural-parameter blocks the unconstrained vector ranges over.
// Blocks that do not exist in the model are always skipped.
struct FreeBlocks {
  bool root_mean = true;
  bool root_variance = true;
  bool drift = true;
  bool sigma = true;
  bool correlation = true;
  bool alpha = true;
  bool optimum = true;
  bool obs_sdev = true;
  bool obs_correlation = true;

  static FreeBlocks all() { return {}; }
  static FreeBlocks none();
  static FreeBlocks only_root_mean();
};

// Smooth bijection between the free natural parameters of a model and a
// flat unconstrained vector. The model passed at construction provides the
// structure (dimensions, process tags, observation kind) and the values of
// any block held fixed.
class Transform {
 public:
  Transform(ModelSpec tmpl, FreeBlocks free = FreeBlocks::all());

  int dim() const { return dim_; }
  const std::vector<CoordInfo>& coords() const { return coords_; }
  const ModelSpec& tmpl() const { return template_; }

  VectorXd to_unconstrained(const ModelSpec& model) const;
  ModelSpec from_unconstrained(const VectorXd& eta) const;

  // log |d(natural free coords) / d(eta)|; correlation blocks measure the
  // natural coordinates as vech of the correlation matrix.
  double log_jacobian(const VectorXd& eta, VectorXd* grad = nullptr) const;

  // Chain rule: natural-space cotangents (likelihood and/or prior) pulled
  // back to eta at the given parameter point.
  VectorXd pullback(const ModelSpec& at, const NaturalGradient& g) const;

  // Natural-space parameter names and values, for chain output.
  std::vector<std::string> natural_names() const;
  VectorXd natural_values(const ModelSpec& model) const;

 private:
  struct BlockInfo {
    std::string label;
    TransformKind kind;
    int offset;
    int size;
    int aux = 0;  // matrix dimension for LkjChain blocks
  };

  ModelSpec template_;
  FreeBlocks free_;
  std::vector<BlockInfo> blocks_;
  std::vector<CoordInfo> coords_;
  int dim_ = 0;
};

}  // namespace phylogauss
