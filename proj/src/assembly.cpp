#include <algorithm>
#include <array>
#include <cmath>

#include "fe_detail.hpp"
#include "hfev/solver.hpp"

namespace hfev {

namespace detail {

const std::array<ElementGauss, 4>& element_rule() {
    // Exact for quadratic integrands on straight-edged tets.
    static const std::array<ElementGauss, 4> rule = [] {
        const double a = 0.585410196624969;
        const double b = 0.138196601125011;
        std::array<ElementGauss, 4> pts;
        for (int i = 0; i < 4; ++i) {
            pts[i].nc.xi = {b, b, b, b};
            pts[i].nc.xi[i] = a;
            pts[i].weight = 0.25;
        }
        return pts;
    }();
    return rule;
}

} // namespace detail

Eigen::Matrix<double, 6, 6> isotropic_elasticity(double modulus, double poisson) {
    const double lambda =
        modulus * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    const double mu = modulus / (2.0 * (1.0 + poisson));
    Eigen::Matrix<double, 6, 6> c = Eigen::Matrix<double, 6, 6>::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) c(i, j) = lambda;
        c(i, i) += 2.0 * mu;
        c(i + 3, i + 3) = mu;
    }
    return c;
}

Eigen::Matrix<double, 6, 30> strain_displacement(const std::array<Vec3, 10>& grad) {
    Eigen::Matrix<double, 6, 30> b = Eigen::Matrix<double, 6, 30>::Zero();
    for (int n = 0; n < 10; ++n) {
        const int c = 3 * n;
        const double gx = grad[n].x(), gy = grad[n].y(), gz = grad[n].z();
        b(0, c + 0) = gx;
        b(1, c + 1) = gy;
        b(2, c + 2) = gz;
        b(3, c + 0) = gy;
        b(3, c + 1) = gx;
        b(4, c + 1) = gz;
        b(4, c + 2) = gy;
        b(5, c + 0) = gz;
        b(5, c + 2) = gx;
    }
    return b;
}

Eigen::Matrix<double, 30, 30> element_stiffness(const Tet10Mesh& mesh, int element,
                                                const MaterialField& materials) {
    const double det = mesh.element_jacobian(element).determinant();
    if (!(det > 0.0))
        throw Error(errc::geometry, "element " + std::to_string(element) +
                                        " has non-positive Jacobian determinant");
    const double volume = det / 6.0;
    const auto c = isotropic_elasticity(materials.modulus[element],
                                        materials.poisson[element]);
    Eigen::Matrix<double, 30, 30> k = Eigen::Matrix<double, 30, 30>::Zero();
    for (const auto& gp : detail::element_rule()) {
        const auto grad = shape_gradients_tet10(mesh, element, gp.nc);
        const auto b = strain_displacement(grad);
        k += (gp.weight * volume) * (b.transpose() * c * b);
    }
    return k;
}

SparseMat assemble_stiffness(const Tet10Mesh& mesh, const MaterialField& materials) {
    if (static_cast<int>(materials.element_count()) != mesh.element_count())
        throw Error(errc::contract, "material field does not match mesh element count");
    const int ndof = 3 * mesh.node_count();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.element_count()) * 900);
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto k = element_stiffness(mesh, e, materials);
        const auto& el = mesh.elements[e];
        for (int a = 0; a < 10; ++a)
            for (int i = 0; i < 3; ++i) {
                const int row = 3 * el[a] + i;
                for (int bn = 0; bn < 10; ++bn)
                    for (int j = 0; j < 3; ++j)
                        triplets.emplace_back(row, 3 * el[bn] + j, k(3 * a + i, 3 * bn + j));
            }
    }
    SparseMat k(ndof, ndof);
    k.setFromTriplets(triplets.begin(), triplets.end());
    return k;
}

Eigen::Matrix<double, 6, 1> element_centroid_strain(const Tet10Mesh& mesh, int element,
                                                    const Eigen::MatrixXd& displacements) {
    NaturalCoords centroid; // defaults to the barycenter
    const auto grad = shape_gradients_tet10(mesh, element, centroid);
    Eigen::Matrix<double, 6, 1> eps = Eigen::Matrix<double, 6, 1>::Zero();
    const auto& el = mesh.elements[element];
    for (int n = 0; n < 10; ++n) {
        const Eigen::Vector3d u = displacements.row(el[n]).transpose();
        eps(0) += grad[n].x() * u.x();
        eps(1) += grad[n].y() * u.y();
        eps(2) += grad[n].z() * u.z();
        eps(3) += grad[n].y() * u.x() + grad[n].x() * u.y();
        eps(4) += grad[n].z() * u.y() + grad[n].y() * u.z();
        eps(5) += grad[n].z() * u.x() + grad[n].x() * u.z();
    }
    return eps;
}

Eigen::Vector3d principal_strains(const Eigen::Matrix<double, 6, 1>& voigt) {
    Eigen::Matrix3d t;
    t << voigt(0), 0.5 * voigt(3), 0.5 * voigt(5),
         0.5 * voigt(3), voigt(1), 0.5 * voigt(4),
         0.5 * voigt(5), 0.5 * voigt(4), voigt(2);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(t);
    Eigen::Vector3d v = es.eigenvalues(); // ascending
    return Eigen::Vector3d(v(2), v(1), v(0));
}

double von_mises(const Eigen::Matrix<double, 6, 1>& s) {
    const double d01 = s(0) - s(1), d12 = s(1) - s(2), d20 = s(2) - s(0);
    return std::sqrt(0.5 * (d01 * d01 + d12 * d12 + d20 * d20) +
                     3.0 * (s(3) * s(3) + s(4) * s(4) + s(5) * s(5)));
}

double reaction_force_axial(const Solution& sol, const std::vector<int>& nodes, int axis) {
    if (axis < 0 || axis > 2) throw Error(errc::contract, "axis must be 0, 1 or 2");
    double total = 0.0;
    for (int n : nodes) {
        if (n < 0 || 3 * n + axis >= static_cast<int>(sol.reactions.size()))
            throw Error(errc::contract, "reaction node id out of range");
        const int dof = 3 * n + axis;
        if (!std::binary_search(sol.constrained_dofs.begin(), sol.constrained_dofs.end(),
                                dof))
            throw Error(errc::contract, "node " + std::to_string(n) +
                                            " is not constrained along the reaction axis");
        total += sol.reactions(n, axis);
    }
    return total;
}

} // namespace hfev
