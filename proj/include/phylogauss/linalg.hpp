#pragma once

#include <Eigen/Dense>

namespace phylogauss {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Spectral decomposition of a symmetric PSD matrix, reused for the
// pseudo-inverse, the pseudo-determinant and the rank. Eigenvalues below
// max|lambda| * dim * machine-epsilon are treated as exact zeros.
struct SymmetricPseudo {
  MatrixXd pinv;      // Moore-Penrose inverse
  double log_pdet;    // sum of log of retained eigenvalues
  int rank;

  VectorXd apply(const VectorXd& x) const { return pinv * x; }
};

SymmetricPseudo symmetric_pseudo(const MatrixXd& sym);

// Rank of a symmetric PSD matrix under the same relative cutoff.
int symmetric_rank(const MatrixXd& sym);

// log det of a symmetric positive definite matrix via Cholesky; throws
// std::domain_error if the factorization fails.
double logdet_pd(const MatrixXd& sym);

// Solve A x = b for symmetric positive definite A (LLT).
MatrixXd solve_pd(const MatrixXd& a, const MatrixXd& b);
MatrixXd inverse_pd(const MatrixXd& a);

// Positive definiteness at the project-wide tolerance:
// min eigenvalue > 1e-12 * max eigenvalue.
bool is_positive_definite(const MatrixXd& sym);

void require_positive_definite(const MatrixXd& sym, const char* what);

// 0.5 * (m + m^T); used to wash out asymmetry accumulated by arithmetic.
inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Multivariate normal log density with covariance given by its LLT factor.
double mvn_logpdf(const VectorXd& x, const VectorXd& mean, const Eigen::LLT<MatrixXd>& chol);

}  // namespace phylogauss
