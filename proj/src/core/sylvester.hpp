#pragma once

#include <Eigen/Dense>

namespace zslb {

// Solves A X + X B = C for X (A: m x m, B: n x n, C: m x n) by the
// Bartels-Stewart method on complex Schur forms. Throws kSpectralConflict when
// some eigenvalue of A equals an eigenvalue of -B.
Eigen::MatrixXd solve_sylvester(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                const Eigen::MatrixXd& c);

// Same equation for symmetric A and B via their eigendecompositions. Cheaper
// and better conditioned; this is the path the semantic autoencoder uses.
Eigen::MatrixXd solve_sylvester_symmetric(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                          const Eigen::MatrixXd& c);

}  // namespace zslb
