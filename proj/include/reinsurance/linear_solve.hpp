#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace reinsurance {

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinearSolveOptions {
  Eigen::Index dense_limit = 2000;  // dense LU below, iterative at or above
  double rcond_floor = 1e-13;
  double iterative_tol = 1e-14;
};

/// Solves (I - M) x = b. Throws SingularSystem when the matrix is singular to
/// working precision.
inline Eigen::VectorXd solve_identity_minus(const Eigen::SparseMatrix<double, Eigen::RowMajor>& M,
                                            const Eigen::VectorXd& b, const LinearSolveOptions& opt = {}) {
  const Eigen::Index m = M.rows();
  if (m == 0) return Eigen::VectorXd(0);

  if (m < opt.dense_limit) {
    Eigen::MatrixXd A = -Eigen::MatrixXd(M);
    A.diagonal().array() += 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    const double rc = lu.rcond();
    if (!(rc > opt.rcond_floor))
      throw SingularSystem("linear system is singular (rcond " + std::to_string(rc) + ")");
    return lu.solve(b);
  }

  Eigen::SparseMatrix<double> A(m, m);
  A.setIdentity();
  A -= Eigen::SparseMatrix<double>(M);
  A.makeCompressed();
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::IncompleteLUT<double>> iterative;
  iterative.setTolerance(opt.iterative_tol);
  iterative.compute(A);
  if (iterative.info() == Eigen::Success) {
    Eigen::VectorXd x = iterative.solve(b);
    if (iterative.info() == Eigen::Success && (A * x - b).norm() <= 1e-10 * (1.0 + b.norm())) return x;
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> direct;
  direct.compute(A);
  if (direct.info() != Eigen::Success)
    throw SingularSystem("sparse linear system is singular: " + direct.lastErrorMessage());
  Eigen::VectorXd x = direct.solve(b);
  if (direct.info() != Eigen::Success || !x.allFinite())
    throw SingularSystem("sparse linear system could not be solved");
  return x;
}

}  // namespace reinsurance
