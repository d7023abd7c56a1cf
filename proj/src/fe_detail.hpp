#pragma once

#include <array>
#include <vector>

#include "hfev/solver.hpp"

namespace hfev {

Eigen::Matrix<double, 6, 30> strain_displacement(const std::array<Vec3, 10>& grad);

namespace detail {

struct ElementGauss {
    NaturalCoords nc;
    double weight;
};

// 4-point rule used for stiffness and internal-force integration.
const std::array<ElementGauss, 4>& element_rule();

std::vector<char> constrained_mask(int ndof, const DirichletSet& bc);

// Inverted 3x3 nodal blocks of K with constrained components decoupled.
std::vector<Eigen::Matrix3d> block_jacobi(const SparseMat& k,
                                          const std::vector<char>& constrained);

struct PcgResult {
    int iterations = 0;
    double rel_residual = 0.0;
};

// Conjugate gradients on the free subspace: entries of x and rhs at
// constrained DOFs are held at zero and K rows are masked on the fly.
PcgResult masked_pcg(const SparseMat& k, const std::vector<char>& constrained,
                     const std::vector<Eigen::Matrix3d>& precond,
                     const Eigen::VectorXd& rhs, Eigen::VectorXd& x, double rel_tol,
                     int max_iterations);

} // namespace detail
} // namespace hfev
