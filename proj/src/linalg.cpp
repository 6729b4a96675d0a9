#include "phylogauss/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace phylogauss {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

SymmetricPseudo symmetric_pseudo(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(sym));
  if (es.info() != Eigen::Success) {
    throw std::domain_error("symmetric_pseudo: eigendecomposition failed");
  }
  const VectorXd& vals = es.eigenvalues();
  const MatrixXd& vecs = es.eigenvectors();
  const int p = static_cast<int>(vals.size());
  const double cutoff = vals.cwiseAbs().maxCoeff() * p * kEps;

  SymmetricPseudo out;
  out.rank = 0;
  out.log_pdet = 0.0;
  VectorXd inv_vals = VectorXd::Zero(p);
  for (int i = 0; i < p; ++i) {
    if (vals[i] > cutoff) {
      inv_vals[i] = 1.0 / vals[i];
      out.log_pdet += std::log(vals[i]);
      ++out.rank;
    }
  }
  out.pinv = vecs * inv_vals.asDiagonal() * vecs.transpose();
  return out;
}

int symmetric_rank(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  const VectorXd& vals = es.eigenvalues();
  const double cutoff = vals.cwiseAbs().maxCoeff() * vals.size() * kEps;
  int rank = 0;
  for (int i = 0; i < vals.size(); ++i) {
    if (vals[i] > cutoff) ++rank;
  }
  return rank;
}

double logdet_pd(const MatrixXd& sym) {
  Eigen::LLT<MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("logdet_pd: matrix not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

MatrixXd solve_pd(const MatrixXd& a, const MatrixXd& b) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("solve_pd: matrix not positive definite");
  }
  return llt.solve(b);
}

MatrixXd inverse_pd(const MatrixXd& a) {
  return solve_pd(a, MatrixXd::Identity(a.rows(), a.cols()));
}

bool is_positive_definite(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(sym), Eigen::EigenvaluesOnly);
  const VectorXd& vals = es.eigenvalues();
  const double max = vals.cwiseAbs().maxCoeff();
  if (max == 0.0) return false;
  return vals.minCoeff() > 1e-12 * max;
}

void require_positive_definite(const MatrixXd& sym, const char* what) {
  if (!is_positive_definite(sym)) {
    throw std::domain_error(std::string(what) + ": matrix not positive definite");
  }
}

double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const Eigen::LLT<MatrixXd>& chol) {
  const double logdet = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  const VectorXd z = chol.matrixL().solve(x - mean);
  const double d = static_cast<double>(x.size());
  return -0.5 * (d * std::log(2.0 * M_PI) + logdet + z.squaredNorm());
}

}  // namespace phylogauss
