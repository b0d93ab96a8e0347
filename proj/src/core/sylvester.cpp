#include "core/sylvester.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "core/error.hpp"

namespace zslb {

namespace {

void check_shapes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c) {
  if (a.rows() != a.cols() || b.rows() != b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "sylvester: A and B must be square");
  }
  if (c.rows() != a.rows() || c.cols() != b.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "sylvester: C is " + std::to_string(c.rows()) + "x" + std::to_string(c.cols()) +
                    ", expected " + std::to_string(a.rows()) + "x" + std::to_string(b.rows()));
  }
}

// Smallest |lambda_i + mu_j| accepted as distinct from zero.
double conflict_tolerance(double scale) {
  return 1e3 * std::numeric_limits<double>::epsilon() * std::max(scale, std::numeric_limits<double>::min());
}

[[noreturn]] void spectral_conflict(double gap) {
  throw Error(ErrorCode::kSpectralConflict,
              "A and -B share an eigenvalue (|lambda_A + lambda_B| = " + std::to_string(gap) + ")");
}

}  // namespace

Eigen::MatrixXd solve_sylvester(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                const Eigen::MatrixXd& c) {
  check_shapes(a, b, c);
  using Cplx = std::complex<double>;
  using CMat = Eigen::MatrixXcd;
  const Eigen::Index m = a.rows(), n = b.rows();
  if (m == 0 || n == 0) return Eigen::MatrixXd::Zero(m, n);

  //   A = U Ta U*,  B = V Tb V*   (Ta, Tb upper triangular)
  //   Ta Y + Y Tb = U* C V,  X = U Y V*
  Eigen::ComplexSchur<CMat> schur_a(a.cast<Cplx>());
  Eigen::ComplexSchur<CMat> schur_b(b.cast<Cplx>());
  if (schur_a.info() != Eigen::Success || schur_b.info() != Eigen::Success) {
    throw Error(ErrorCode::kSpectralConflict, "sylvester: Schur decomposition did not converge");
  }
  const CMat& ta = schur_a.matrixT();
  const CMat& tb = schur_b.matrixT();
  const CMat& u = schur_a.matrixU();
  const CMat& v = schur_b.matrixU();
  CMat y = u.adjoint() * c.cast<Cplx>() * v;

  const double tol = conflict_tolerance(a.norm() + b.norm());
  for (Eigen::Index j = 0; j < n; ++j) {
    // Column j of Y depends on columns 0..j-1 through Tb's upper triangle.
    Eigen::VectorXcd rhs = y.col(j);
    if (j > 0) rhs.noalias() -= y.leftCols(j) * tb.col(j).head(j);
    for (Eigen::Index i = m - 1; i >= 0; --i) {
      Cplx acc = rhs(i);
      const Eigen::Index tail = m - i - 1;
      if (tail > 0) acc -= (ta.row(i).segment(i + 1, tail) * y.col(j).segment(i + 1, tail)).value();
      const Cplx diag = ta(i, i) + tb(j, j);
      if (std::abs(diag) <= tol) spectral_conflict(std::abs(diag));
      y(i, j) = acc / diag;
    }
  }
  return (u * y * v.adjoint()).real();
}

Eigen::MatrixXd solve_sylvester_symmetric(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                          const Eigen::MatrixXd& c) {
  check_shapes(a, b, c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_a(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_b(b);
  if (eig_a.info() != Eigen::Success || eig_b.info() != Eigen::Success) {
    throw Error(ErrorCode::kSpectralConflict, "sylvester: eigendecomposition did not converge");
  }
  const Eigen::MatrixXd& ua = eig_a.eigenvectors();
  const Eigen::MatrixXd& ub = eig_b.eigenvectors();
  const Eigen::VectorXd& la = eig_a.eigenvalues();
  const Eigen::VectorXd& lb = eig_b.eigenvalues();

  const double scale = std::max(la.cwiseAbs().maxCoeff(), lb.size() ? lb.cwiseAbs().maxCoeff() : 0.0);
  const double tol = conflict_tolerance(scale);
  Eigen::MatrixXd y = ua.transpose() * c * ub;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double denom = la(i) + lb(j);
      if (std::abs(denom) <= tol) spectral_conflict(std::abs(denom));
      y(i, j) /= denom;
    }
  }
  return ua * y * ub.transpose();
}

}  // namespace zslb
