#include <cmath>

#include "fe_detail.hpp"
#include "hfev/solver.hpp"

namespace hfev {

void DirichletSet::set(int node, int axis, double value) {
    if (node < 0) throw Error(errc::constraint, "constraint node id must be >= 0");
    if (axis < 0 || axis > 2) throw Error(errc::constraint, "constraint axis must be 0, 1 or 2");
    prescribed[3 * node + axis] = value;
}

namespace detail {

std::vector<char> constrained_mask(int ndof, const DirichletSet& bc) {
    std::vector<char> mask(ndof, 0);
    for (const auto& [dof, value] : bc.prescribed) {
        (void)value;
        if (dof < 0 || dof >= ndof)
            throw Error(errc::constraint, "constraint DOF out of range");
        mask[dof] = 1;
    }
    return mask;
}

std::vector<Eigen::Matrix3d> block_jacobi(const SparseMat& k,
                                          const std::vector<char>& constrained) {
    const int ndof = static_cast<int>(k.rows());
    const int n_nodes = ndof / 3;
    std::vector<Eigen::Matrix3d> blocks(n_nodes);
    for (int n = 0; n < n_nodes; ++n) {
        Eigen::Matrix3d b = Eigen::Matrix3d::Zero();
        for (int i = 0; i < 3; ++i) {
            const int row = 3 * n + i;
            for (SparseMat::InnerIterator it(k, row); it; ++it) {
                const int col = static_cast<int>(it.col());
                if (col >= 3 * n && col < 3 * n + 3) b(i, col - 3 * n) = it.value();
            }
        }
        // Decouple constrained components so the inverse acts as identity
        // there and the free-free sub-block inverts cleanly.
        for (int i = 0; i < 3; ++i) {
            if (constrained[3 * n + i]) {
                b.row(i).setZero();
                b.col(i).setZero();
                b(i, i) = 1.0;
            } else if (b(i, i) == 0.0) {
                b(i, i) = 1.0; // isolated DOF, keep the block invertible
            }
        }
        blocks[n] = b.inverse();
    }
    return blocks;
}

namespace {

void apply_blocks(const std::vector<Eigen::Matrix3d>& blocks, const Eigen::VectorXd& r,
                  Eigen::VectorXd& z) {
    for (std::size_t n = 0; n < blocks.size(); ++n)
        z.segment<3>(3 * n) = blocks[n] * r.segment<3>(3 * n);
}

void mask_vector(const std::vector<char>& constrained, Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i)
        if (constrained[i]) v(i) = 0.0;
}

} // namespace

PcgResult masked_pcg(const SparseMat& k, const std::vector<char>& constrained,
                     const std::vector<Eigen::Matrix3d>& precond,
                     const Eigen::VectorXd& rhs, Eigen::VectorXd& x, double rel_tol,
                     int max_iterations) {
    const int ndof = static_cast<int>(k.rows());
    x = Eigen::VectorXd::Zero(ndof);
    Eigen::VectorXd r = rhs;
    mask_vector(constrained, r);
    const double b_norm = r.norm();
    PcgResult result;
    if (b_norm == 0.0) return result;

    Eigen::VectorXd z(ndof), q(ndof), p(ndof);
    apply_blocks(precond, r, z);
    mask_vector(constrained, z);
    p = z;
    double rz = r.dot(z);
    for (int it = 0; it < max_iterations; ++it) {
        q = k * p;
        mask_vector(constrained, q);
        const double alpha = rz / p.dot(q);
        x += alpha * p;
        r -= alpha * q;
        result.iterations = it + 1;
        result.rel_residual = r.norm() / b_norm;
        if (result.rel_residual <= rel_tol) return result;
        apply_blocks(precond, r, z);
        mask_vector(constrained, z);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    throw Error(errc::convergence,
                "conjugate gradient did not converge in " +
                    std::to_string(max_iterations) + " iterations (residual " +
                    std::to_string(result.rel_residual) + ")");
}

} // namespace detail

void check_rigid_modes(const Tet10Mesh& mesh, const DirichletSet& bc) {
    if (bc.size() < 6)
        throw Error(errc::constraint,
                    "constraints cannot fix all six rigid body modes");
    Vec3 center = Vec3::Zero();
    for (const auto& p : mesh.nodes) center += p;
    center /= static_cast<double>(mesh.node_count());
    double scale = 0.0;
    for (const auto& p : mesh.nodes) scale = std::max(scale, (p - center).norm());
    if (scale == 0.0) scale = 1.0;

    Eigen::MatrixXd c(static_cast<int>(bc.size()), 6);
    int row = 0;
    for (const auto& [dof, value] : bc.prescribed) {
        (void)value;
        const int node = dof / 3;
        const int axis = dof % 3;
        const Vec3 d = (mesh.nodes[node] - center) / scale;
        Eigen::Matrix<double, 3, 6> modes;
        modes << 1, 0, 0, 0, d.z(), -d.y(),
                 0, 1, 0, -d.z(), 0, d.x(),
                 0, 0, 1, d.y(), -d.x(), 0;
        c.row(row++) = modes.row(axis);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c);
    qr.setThreshold(1e-8);
    if (qr.rank() < 6)
        throw Error(errc::constraint,
                    "constraints leave a rigid body mode unconstrained");
}

Solution solve_linear(const Tet10Mesh& mesh, const MaterialField& materials,
                      const DirichletSet& bc, const SolverOptions& opts) {
    const int ndof = 3 * mesh.node_count();
    const auto constrained = detail::constrained_mask(ndof, bc);
    check_rigid_modes(mesh, bc);

    const SparseMat k = assemble_stiffness(mesh, materials);
    Eigen::VectorXd u_pres = Eigen::VectorXd::Zero(ndof);
    for (const auto& [dof, value] : bc.prescribed) u_pres(dof) = value;

    Eigen::VectorXd rhs = -(k * u_pres);
    const auto precond = detail::block_jacobi(k, constrained);
    Eigen::VectorXd u_free;
    const auto pcg = detail::masked_pcg(k, constrained, precond, rhs, u_free,
                                        opts.rel_tol, opts.max_iterations);

    const Eigen::VectorXd u = u_free + u_pres;
    const Eigen::VectorXd internal = k * u;

    Solution sol;
    sol.displacements = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3,
                                                       Eigen::RowMajor>>(
        u.data(), mesh.node_count(), 3);
    sol.reactions = Eigen::MatrixXd::Zero(mesh.node_count(), 3);
    for (const auto& [dof, value] : bc.prescribed) {
        (void)value;
        sol.reactions(dof / 3, dof % 3) = -internal(dof);
    }
    sol.element_strains.resize(mesh.element_count(), 6);
    sol.element_stresses.resize(mesh.element_count(), 6);
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto eps = element_centroid_strain(mesh, e, sol.displacements);
        sol.element_strains.row(e) = eps.transpose();
        sol.element_stresses.row(e) =
            (isotropic_elasticity(materials.modulus[e], materials.poisson[e]) * eps)
                .transpose();
    }
    sol.constrained_dofs.reserve(bc.size());
    for (const auto& [dof, value] : bc.prescribed) {
        (void)value;
        sol.constrained_dofs.push_back(dof);
    }
    sol.diagnostics.cg_iterations = pcg.iterations;
    sol.diagnostics.final_residual = pcg.rel_residual;
    sol.diagnostics.load_steps = 1;
    return sol;
}

} // namespace hfev
