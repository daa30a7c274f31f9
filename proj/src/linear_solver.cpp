#include "dwr/linear_solver.hpp"

#include <Eigen/CholmodSupport>
#include <Eigen/UmfPackSupport>

#include <cmath>
#include <sstream>

namespace dwr {

namespace {

double residual_norm(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  return (A * x - b).lpNorm<Eigen::Infinity>();
}

bool acceptable(double res, const Eigen::VectorXd& b) {
  return std::isfinite(res) && res <= 1e-10 * (1.0 + b.lpNorm<Eigen::Infinity>());
}

// min |a_ii| / max |a_ii|: a cheap conditioning hint for error messages.
double diagonal_ratio(const Eigen::SparseMatrix<double>& A) {
  const Eigen::VectorXd d = A.diagonal().cwiseAbs();
  const double mx = d.maxCoeff();
  return mx > 0.0 ? d.minCoeff() / mx : 0.0;
}

}  // namespace

Eigen::VectorXd sparse_solve(const Eigen::SparseMatrix<double>& A, const Eigen::VectorXd& b, LinearSolveInfo* info) {
  if (A.rows() != A.cols() || A.rows() != b.size()) throw LinearSolveError("sparse_solve: dimension mismatch");
  if (A.rows() == 0) return Eigen::VectorXd(0);

  {
    Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>> llt;
    llt.compute(A);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd x = llt.solve(b);
      const double res = residual_norm(A, x, b);
      if (acceptable(res, b)) {
        if (info) *info = {"cholmod", res, diagonal_ratio(A)};
        return x;
      }
    }
  }
  Eigen::UmfPackLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(A);
  if (lu.info() == Eigen::Success) {
    Eigen::VectorXd x = lu.solve(b);
    const double res = residual_norm(A, x, b);
    if (acceptable(res, b)) {
      if (info) *info = {"umfpack", res, diagonal_ratio(A)};
      return x;
    }
    std::ostringstream os;
    os << "sparse_solve: residual " << res << " exceeds tolerance, diagonal ratio " << diagonal_ratio(A);
    throw LinearSolveError(os.str());
  }
  std::ostringstream os;
  os << "sparse_solve: factorization failed, matrix is singular (n=" << A.rows() << ", diagonal ratio "
     << diagonal_ratio(A) << ")";
  throw LinearSolveError(os.str());
}

}  // namespace dwr
