#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace dwr {

class LinearSolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinearSolveInfo {
  std::string backend;      // "cholmod" or "umfpack"
  double residual = 0.0;    // max-norm of A x - b
  double diagonal_ratio = 0.0;  // min/max |diagonal|, a conditioning hint
};

/// Sparse direct solve of a symmetric system. Tries a supernodal Cholesky
/// first and falls back to LU when the matrix is not positive definite.
/// Throws LinearSolveError when the residual exceeds 1e-10 (1 + |b|_inf).
Eigen::VectorXd sparse_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b,
                             LinearSolveInfo* info = nullptr);

}  // namespace dwr
