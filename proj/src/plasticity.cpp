#include <cmath>

#include "fe_detail.hpp"
#include "hfev/solver.hpp"

namespace hfev {

namespace {

// Tensor-component Voigt order [11 22 33 12 23 13]; shear entries are the
// tensor components, not the engineering doubles.
struct GpState {
    Eigen::Matrix<double, 6, 1> plastic = Eigen::Matrix<double, 6, 1>::Zero();
    double alpha = 0.0;
};

struct ElementLaw {
    double bulk, mu, yield0, hardening; // hardening = plastic modulus H
};

ElementLaw element_law(const MaterialField& m, int e) {
    const double modulus = m.modulus[e];
    const double poisson = m.poisson[e];
    const double tangent = m.hardening_modulus[e];
    ElementLaw law;
    law.bulk = modulus / (3.0 * (1.0 - 2.0 * poisson));
    law.mu = modulus / (2.0 * (1.0 + poisson));
    law.yield0 = m.yield_stress[e];
    // Convert the bilinear tangent modulus E_t into the plastic modulus of
    // the return map: H = E E_t / (E - E_t).
    law.hardening = modulus * tangent / (modulus - tangent);
    return law;
}

struct ReturnMapResult {
    Eigen::Matrix<double, 6, 1> stress; // Voigt stress [s11 s22 s33 s12 s23 s13]
    Eigen::Matrix<double, 6, 6> tangent;
};

ReturnMapResult radial_return(const ElementLaw& law,
                              const Eigen::Matrix<double, 6, 1>& eps_eng,
                              const GpState& committed, GpState& updated) {
    Eigen::Matrix<double, 6, 1> eps = eps_eng;
    eps.tail<3>() *= 0.5; // engineering shear to tensor shear

    Eigen::Matrix<double, 6, 1> elastic = eps - committed.plastic;
    const double trace = elastic(0) + elastic(1) + elastic(2);
    Eigen::Matrix<double, 6, 1> dev = elastic;
    for (int i = 0; i < 3; ++i) dev(i) -= trace / 3.0;
    Eigen::Matrix<double, 6, 1> s_trial = 2.0 * law.mu * dev;
    const double s_norm2 = s_trial.head<3>().squaredNorm() +
                           2.0 * s_trial.tail<3>().squaredNorm();
    const double q_trial = std::sqrt(1.5 * s_norm2);

    static const Eigen::Matrix<double, 6, 6> kVolumetric = [] {
        Eigen::Matrix<double, 6, 6> j = Eigen::Matrix<double, 6, 6>::Zero();
        j.topLeftCorner<3, 3>().setOnes();
        return j;
    }();
    static const Eigen::Matrix<double, 6, 6> kDeviatoric =
        []() -> Eigen::Matrix<double, 6, 6> {
        Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
        d.diagonal() << 1, 1, 1, 0.5, 0.5, 0.5;
        return d - kVolumetric / 3.0;
    }();

    ReturnMapResult out;
    const double pressure = law.bulk * trace;
    const double flow = q_trial - (law.yield0 + law.hardening * committed.alpha);
    updated = committed;
    if (flow <= 0.0 || q_trial == 0.0) {
        out.stress = s_trial;
        out.stress.head<3>().array() += pressure;
        out.tangent = law.bulk * kVolumetric + 2.0 * law.mu * kDeviatoric;
        return out;
    }

    const double dgamma = flow / (3.0 * law.mu + law.hardening);
    const double theta = 1.0 - 3.0 * law.mu * dgamma / q_trial;
    const double theta_bar =
        3.0 * law.mu / (3.0 * law.mu + law.hardening) - (1.0 - theta);
    const Eigen::Matrix<double, 6, 1> n_hat = s_trial / std::sqrt(s_norm2);

    out.stress = theta * s_trial;
    out.stress.head<3>().array() += pressure;
    out.tangent = law.bulk * kVolumetric + 2.0 * law.mu * theta * kDeviatoric -
                  2.0 * law.mu * theta_bar * (n_hat * n_hat.transpose());

    updated.plastic = committed.plastic + dgamma * 1.5 / q_trial * s_trial;
    updated.alpha = committed.alpha + dgamma;
    return out;
}

struct AssembledState {
    SparseMat tangent;
    Eigen::VectorXd internal;
};

AssembledState assemble_internal(const Tet10Mesh& mesh, const MaterialField& materials,
                                 const Eigen::VectorXd& u,
                                 const std::vector<GpState>& committed,
                                 std::vector<GpState>& working,
                                 Eigen::MatrixXd* element_stresses = nullptr) {
    const int ndof = 3 * mesh.node_count();
    AssembledState out;
    out.internal = Eigen::VectorXd::Zero(ndof);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(mesh.element_count()) * 900);

    const auto& rule = detail::element_rule();
    for (int e = 0; e < mesh.element_count(); ++e) {
        const double det = mesh.element_jacobian(e).determinant();
        if (!(det > 0.0))
            throw Error(errc::geometry, "element " + std::to_string(e) +
                                            " has non-positive Jacobian determinant");
        const double volume = det / 6.0;
        const auto& el = mesh.elements[e];
        Eigen::Matrix<double, 30, 1> u_e;
        for (int n = 0; n < 10; ++n) u_e.segment<3>(3 * n) = u.segment<3>(3 * el[n]);

        const ElementLaw law = element_law(materials, e);
        Eigen::Matrix<double, 30, 30> k_e = Eigen::Matrix<double, 30, 30>::Zero();
        Eigen::Matrix<double, 30, 1> f_e = Eigen::Matrix<double, 30, 1>::Zero();
        Eigen::Matrix<double, 6, 1> stress_avg = Eigen::Matrix<double, 6, 1>::Zero();
        for (std::size_t g = 0; g < rule.size(); ++g) {
            const auto grad = shape_gradients_tet10(mesh, e, rule[g].nc);
            const auto b = strain_displacement(grad);
            const Eigen::Matrix<double, 6, 1> eps = b * u_e;
            const std::size_t gi = 4 * static_cast<std::size_t>(e) + g;
            const auto rm = radial_return(law, eps, committed[gi], working[gi]);
            const double w = rule[g].weight * volume;
            f_e += w * (b.transpose() * rm.stress);
            k_e += w * (b.transpose() * rm.tangent * b);
            stress_avg += rule[g].weight * rm.stress;
        }
        if (element_stresses) element_stresses->row(e) = stress_avg.transpose();
        for (int a = 0; a < 10; ++a)
            for (int i = 0; i < 3; ++i) {
                const int row = 3 * el[a] + i;
                out.internal(row) += f_e(3 * a + i);
                for (int bn = 0; bn < 10; ++bn)
                    for (int j = 0; j < 3; ++j)
                        triplets.emplace_back(row, 3 * el[bn] + j,
                                              k_e(3 * a + i, 3 * bn + j));
            }
    }
    out.tangent = SparseMat(ndof, ndof);
    out.tangent.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

} // namespace

Solution solve_elastoplastic(const Tet10Mesh& mesh, const MaterialField& materials,
                             const DirichletSet& bc, const SolverOptions& opts) {
    if (!materials.has_plasticity)
        throw Error(errc::contract,
                    "elastoplastic solve requires a material field with plasticity");
    if (opts.n_steps < 1)
        throw Error(errc::contract, "elastoplastic solve needs at least one load step");
    const int ndof = 3 * mesh.node_count();
    const auto constrained = detail::constrained_mask(ndof, bc);
    check_rigid_modes(mesh, bc);

    std::vector<double> schedule = opts.load_schedule;
    if (schedule.empty()) {
        schedule.resize(opts.n_steps);
        for (int s = 0; s < opts.n_steps; ++s)
            schedule[s] = static_cast<double>(s + 1) / opts.n_steps;
    }
    for (double f : schedule)
        if (!std::isfinite(f))
            throw Error(errc::contract, "load schedule fraction is not finite");

    std::vector<GpState> committed(static_cast<std::size_t>(mesh.element_count()) * 4);
    std::vector<GpState> working = committed;

    Eigen::VectorXd u = Eigen::VectorXd::Zero(ndof);
    SolveDiagnostics diag;
    diag.load_steps = static_cast<int>(schedule.size());
    Eigen::VectorXd residual_free;
    double last_norm = 0.0;

    // Newton on the displacement field at a fixed load fraction. On success u
    // holds the converged field and `working` the matching Gauss states.
    auto newton_at = [&](double frac, Eigen::VectorXd& u_step) -> bool {
        for (const auto& [dof, value] : bc.prescribed) u_step(dof) = frac * value;
        double ref_norm = -1.0;
        for (int it = 0; it < opts.max_newton_iterations; ++it) {
            auto state = assemble_internal(mesh, materials, u_step, committed, working);
            residual_free = -state.internal;
            for (int d = 0; d < ndof; ++d)
                if (constrained[d]) residual_free(d) = 0.0;
            const double norm = residual_free.norm();
            last_norm = norm;
            if (ref_norm < 0.0) ref_norm = norm;
            if (norm <= opts.newton_rel_tol * ref_norm || norm <= 1e-9) {
                diag.final_residual = ref_norm > 0.0 ? norm / ref_norm : 0.0;
                return true;
            }
            const auto precond = detail::block_jacobi(state.tangent, constrained);
            Eigen::VectorXd du;
            const auto pcg = detail::masked_pcg(state.tangent, constrained, precond,
                                                residual_free, du, opts.rel_tol,
                                                opts.max_iterations);
            diag.cg_iterations += pcg.iterations;
            ++diag.newton_iterations;
            u_step += du;
        }
        return false;
    };

    double frac_done = 0.0;
    for (std::size_t step = 1; step <= schedule.size(); ++step) {
        const double target = schedule[step - 1];
        // Large increments (sharp unloads in particular) can throw Newton into
        // a cycle; bisect the increment toward the last converged fraction and
        // work back up to the target.
        int cutbacks = 0;
        double frac = target;
        while (true) {
            Eigen::VectorXd u_trial = u;
            if (newton_at(frac, u_trial)) {
                u = u_trial;
                committed = working;
                frac_done = frac;
                if (frac == target) break;
                frac = target;
                continue;
            }
            if (++cutbacks > 12)
                throw Error(errc::convergence,
                            "Newton iteration did not converge at load step " +
                                std::to_string(step) + " (residual " +
                                std::to_string(last_norm) + ")");
            frac = 0.5 * (frac_done + frac);
        }
    }

    // Final internal force for the reactions and the reported stresses.
    Solution sol;
    sol.element_stresses.resize(mesh.element_count(), 6);
    auto state =
        assemble_internal(mesh, materials, u, committed, working, &sol.element_stresses);

    sol.displacements = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3,
                                                       Eigen::RowMajor>>(
        u.data(), mesh.node_count(), 3);
    sol.reactions = Eigen::MatrixXd::Zero(mesh.node_count(), 3);
    for (const auto& [dof, value] : bc.prescribed) {
        (void)value;
        sol.reactions(dof / 3, dof % 3) = -state.internal(dof);
        sol.constrained_dofs.push_back(dof);
    }
    sol.element_strains.resize(mesh.element_count(), 6);
    sol.plastic_strain.resize(mesh.element_count());
    for (int e = 0; e < mesh.element_count(); ++e) {
        sol.element_strains.row(e) =
            element_centroid_strain(mesh, e, sol.displacements).transpose();
        double alpha = 0.0;
        bool yielded = false;
        for (int g = 0; g < 4; ++g) {
            const auto& gp = committed[4 * static_cast<std::size_t>(e) + g];
            alpha += gp.alpha;
            yielded = yielded || gp.alpha > 0.0;
        }
        sol.plastic_strain[e] = alpha / 4.0;
        if (yielded) ++diag.yielded_elements;
    }
    diag.plastic = diag.yielded_elements > 0;
    sol.diagnostics = diag;
    return sol;
}

} // namespace hfev
