#pragma once

#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "hfev/error.hpp"
#include "hfev/materials.hpp"
#include "hfev/mesh.hpp"

namespace hfev {

using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Prescribed nodal displacement components. Keyed by global DOF index
// (3 * node + axis) so a node can be constrained in a subset of axes.
struct DirichletSet {
    std::map<int, double> prescribed;

    void set(int node, int axis, double value);
    bool constrains(int dof) const { return prescribed.count(dof) != 0; }
    std::size_t size() const { return prescribed.size(); }
};

struct SolverOptions {
    double rel_tol = 1e-9;
    int max_iterations = 20000;
    // Elastoplastic stepping
    int n_steps = 10;
    int max_newton_iterations = 30;
    double newton_rel_tol = 1e-8;
    // Optional explicit loading history as fractions of the prescribed values.
    // When non-empty it overrides n_steps; non-monotone schedules express
    // load-unload paths, e.g. {0.5, 1.0, 0.5, 0.0}.
    std::vector<double> load_schedule;
};

struct SolveDiagnostics {
    int cg_iterations = 0;      // total across all linear solves
    int newton_iterations = 0;  // total across all load steps
    int load_steps = 1;
    double final_residual = 0.0;
    bool plastic = false;
    int yielded_elements = 0; // elements with at least one plastified Gauss point
};

struct Solution {
    // n_nodes x 3 displacements, same ordering as mesh.nodes
    Eigen::MatrixXd displacements;
    // reaction force at each constrained DOF; zero elsewhere (n_nodes x 3)
    Eigen::MatrixXd reactions;
    // element centroid strain tensors, rows = [exx eyy ezz gxy gyz gxz]
    Eigen::MatrixXd element_strains;
    // element stress rows in the same Voigt order (centroid value for the
    // elastic solve, Gauss-point average for the elastoplastic one)
    Eigen::MatrixXd element_stresses;
    // equivalent plastic strain per element (centroid average), empty if elastic
    std::vector<double> plastic_strain;
    // sorted global DOF indices that carried a prescribed value
    std::vector<int> constrained_dofs;
    SolveDiagnostics diagnostics;
};

// 6x6 isotropic elasticity matrix in engineering Voigt order
// [xx yy zz xy yz xz] with shear strains stored as gamma = 2 eps.
Eigen::Matrix<double, 6, 6> isotropic_elasticity(double modulus, double poisson);

// Element stiffness with 4-point Gauss integration; throws errc::geometry on
// non-positive Jacobian determinant.
Eigen::Matrix<double, 30, 30> element_stiffness(const Tet10Mesh& mesh, int element,
                                                const MaterialField& materials);

// Full symmetric global stiffness (both triangles stored).
SparseMat assemble_stiffness(const Tet10Mesh& mesh, const MaterialField& materials);

// Throws errc::constraint if the constraints leave a rigid body mode free.
void check_rigid_modes(const Tet10Mesh& mesh, const DirichletSet& bc);

// Linear elastic solve. Reactions are reported as the force the constraint
// exerts minus the internal resistance, i.e. r = -(K u) on constrained DOFs,
// so a compressed bottom face carries a negative axial reaction.
Solution solve_linear(const Tet10Mesh& mesh, const MaterialField& materials,
                      const DirichletSet& bc, const SolverOptions& opts = {});

// Bilinear elastoplastic solve (von Mises, isotropic linear hardening).
// Displacements are ramped over opts.n_steps equal increments.
Solution solve_elastoplastic(const Tet10Mesh& mesh, const MaterialField& materials,
                             const DirichletSet& bc, const SolverOptions& opts = {});

// Strain tensor at the element centroid for a given displacement field.
Eigen::Matrix<double, 6, 1> element_centroid_strain(const Tet10Mesh& mesh, int element,
                                                    const Eigen::MatrixXd& displacements);

// Principal strains in descending order from a Voigt engineering strain vector.
Eigen::Vector3d principal_strains(const Eigen::Matrix<double, 6, 1>& voigt);

// Von Mises equivalent of a Voigt stress vector [sxx syy szz sxy syz sxz].
double von_mises(const Eigen::Matrix<double, 6, 1>& stress);

// Sum of reaction components along the given axis over the node set. Throws
// errc::contract when a node in the set is not constrained along that axis.
double reaction_force_axial(const Solution& sol, const std::vector<int>& nodes, int axis);

} // namespace hfev
