#include "surfphase/cahn_hilliard.hpp"
#include "surfphase/errors.hpp"
#include "surfphase/operators.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>

namespace surfphase {

namespace {

Eigen::VectorXd map_unary(const Eigen::VectorXd& s, const MaterialParams& p,
                          double (MaterialParams::*fn)(double) const) {
    Eigen::VectorXd out(s.size());
    for (int i = 0; i < s.size(); ++i) out[i] = (p.*fn)(s[i]);
    return out;
}

} // namespace

PhaseState initialize_phase(const SurfaceMesh& mesh, double time,
                            const Eigen::VectorXd& phi, const MaterialParams& params) {
    params.validate();
    if (phi.size() != mesh.n_vertices())
        throw ParameterError("phase field length does not match vertex count");
    const double max_abs = phi.cwiseAbs().maxCoeff();
    if (max_abs > 1.0 - params.eps_guard)
        throw ParameterError("initial phase field reaches the guard band (max|phi| = " +
                             std::to_string(max_abs) + ")");
    const Eigen::SparseMatrix<double> M = mass_matrix(mesh).matrix;
    const Eigen::SparseMatrix<double> K = stiffness_matrix(mesh).matrix;
    const Eigen::VectorXd a = mesh.lumped_vertex_areas();
    Eigen::VectorXd rhs = K * phi +
                          a.cwiseProduct(map_unary(phi, params, &MaterialParams::dF) -
                                         params.theta0 * phi);
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(M);
    if (chol.info() != Eigen::Success) throw SolverError("mass matrix factorization failed");
    PhaseState state;
    state.time = time;
    state.phi = phi;
    state.mu = chol.solve(rhs);
    state.separation_margin = 1.0 - max_abs;
    state.total_mass = mesh.lumped_vertex_areas().dot(phi);
    return state;
}

PhaseState ch_step(const SurfaceMesh& mesh_old, const SurfaceMesh& mesh_new,
                   const PhaseState& state, const Eigen::MatrixX3d& velocity,
                   const Eigen::VectorXd& vn_new, const MaterialParams& params,
                   double dt, const ChStepOptions& options) {
    params.validate();
    if (!(dt > 0.0)) throw ParameterError("ch_step requires dt > 0");
    const int nv = mesh_new.n_vertices();
    if (mesh_old.n_vertices() != nv || mesh_old.triangles != mesh_new.triangles)
        throw ParameterError("mesh snapshots must share connectivity");
    if (state.phi.size() != nv || velocity.rows() != nv || vn_new.size() != nv)
        throw ParameterError("field length does not match vertex count");
    if (state.separation_margin < params.eps_guard / 2.0)
        throw ParameterError("input state is not strictly separated");

    const Eigen::SparseMatrix<double> M_old = mass_matrix(mesh_old).matrix;
    const Eigen::SparseMatrix<double> M = mass_matrix(mesh_new).matrix;
    const Eigen::SparseMatrix<double> K = stiffness_matrix(mesh_new).matrix;
    Eigen::VectorXd vn_proj = vn_new;
    if (vn_new.cwiseAbs().maxCoeff() > 0.0)
        vn_proj = project_compatible(mesh_new, vn_new);
    const Eigen::SparseMatrix<double> C = convection_matrix(mesh_new, velocity, vn_proj).matrix;

    const Eigen::VectorXd m_phi_old = M_old * state.phi;
    const Eigen::VectorXd concave = params.theta0 * state.phi; // explicit split term
    Eigen::VectorXd source = Eigen::VectorXd::Zero(nv);
    if (options.forcing.size() != 0) {
        if (options.forcing.size() != nv)
            throw ParameterError("forcing length does not match vertex count");
        source = M * options.forcing;
    }

    const double bound = 1.0 - params.eps_guard;
    Eigen::VectorXd phi = state.phi;
    for (int i = 0; i < nv; ++i) phi[i] = std::clamp(phi[i], -bound, bound);
    Eigen::VectorXd mu = state.mu.size() == nv ? state.mu : Eigen::VectorXd::Zero(nv);

    // the potential terms are mass-lumped so the discrete energy law pairs
    // exactly with the nodal-quadrature potential energy
    const Eigen::VectorXd lump = mesh_new.lumped_vertex_areas();
    auto residual = [&](const Eigen::VectorXd& p, const Eigen::VectorXd& m,
                        Eigen::VectorXd& r1, Eigen::VectorXd& r2) {
        r1 = (M * p - m_phi_old) / dt + options.mobility * (K * m) + C * p - source;
        r2 = M * m - K * p -
             lump.cwiseProduct(map_unary(p, params, &MaterialParams::dF) - concave);
    };

    std::vector<double> history;
    Eigen::VectorXd r1(nv), r2(nv);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    for (int it = 0; it < options.max_newton; ++it) {
        residual(phi, mu, r1, r2);
        const double res = std::sqrt(r1.squaredNorm() + r2.squaredNorm());
        history.push_back(res);
        if (res <= options.tolerance * (1.0 + mu.norm())) {
            PhaseState out;
            out.time = state.time + dt;
            out.phi = phi;
            out.mu = mu;
            out.separation_margin = 1.0 - phi.cwiseAbs().maxCoeff();
            out.total_mass = mesh_new.lumped_vertex_areas().dot(phi);
            return out;
        }

        // Jacobian: [[M/dt + C, mobility K], [-K - M diag(F''), M]]
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(4 * (M.nonZeros() + K.nonZeros() + C.nonZeros()));
        auto add_block = [&](const Eigen::SparseMatrix<double>& A, int ro, int co, double scale) {
            for (int k = 0; k < A.outerSize(); ++k)
                for (Eigen::SparseMatrix<double>::InnerIterator jt(A, k); jt; ++jt)
                    trip.emplace_back(static_cast<int>(jt.row()) + ro,
                                      static_cast<int>(jt.col()) + co, scale * jt.value());
        };
        add_block(M, 0, 0, 1.0 / dt);
        add_block(C, 0, 0, 1.0);
        add_block(K, 0, nv, options.mobility);
        add_block(K, nv, 0, -1.0);
        const Eigen::VectorXd d2 = map_unary(phi, params, &MaterialParams::d2F);
        for (int i = 0; i < nv; ++i)
            trip.emplace_back(nv + i, i, -lump[i] * d2[i]);
        add_block(M, nv, nv, 1.0);
        Eigen::SparseMatrix<double> J(2 * nv, 2 * nv);
        J.setFromTriplets(trip.begin(), trip.end());

        lu.compute(J);
        if (lu.info() != Eigen::Success)
            throw StepFailure("phase Jacobian factorization failed", history);
        Eigen::VectorXd rhs(2 * nv);
        rhs.head(nv) = -r1;
        rhs.tail(nv) = -r2;
        const Eigen::VectorXd delta = lu.solve(rhs);
        if (!delta.allFinite())
            throw StepFailure("phase Newton produced a non-finite update", history);

        // damp the trial step so max|phi| stays within the guard band
        double alpha = 1.0;
        for (int i = 0; i < nv; ++i) {
            const double d = delta[i];
            if (phi[i] + d > bound && d > 0.0) alpha = std::min(alpha, (bound - phi[i]) / d);
            else if (phi[i] + d < -bound && d < 0.0) alpha = std::min(alpha, (-bound - phi[i]) / d);
        }
        phi += alpha * delta.head(nv);
        mu += alpha * delta.tail(nv);
    }
    throw StepFailure("phase Newton stalled after " + std::to_string(options.max_newton) +
                      " iterations (last residual " + std::to_string(history.back()) + ")",
                      history);
}

std::tuple<double, double, double> ch_energy(const SurfaceMesh& mesh,
                                             const PhaseState& state,
                                             const MaterialParams& params) {
    const Eigen::SparseMatrix<double> K = stiffness_matrix(mesh).matrix;
    const double gl = 0.5 * state.phi.dot(K * state.phi);
    const Eigen::VectorXd a = mesh.lumped_vertex_areas();
    double pot = 0.0;
    for (int i = 0; i < state.phi.size(); ++i) pot += a[i] * params.Psi(state.phi[i]);
    const double diss = state.mu.dot(K * state.mu);
    return {gl, pot, diss};
}

std::pair<double, double> mean_mu_bound_report(const SurfaceMesh& mesh,
                                               const PhaseState& state,
                                               const MaterialParams& params,
                                               double initial_mean) {
    if (std::abs(initial_mean) >= 1.0 - 1e-9)
        throw ParameterError("initial phase mean must satisfy |mean| < 1");
    const double area = surface_area(mesh);
    const double mu_bar = std::abs(integrate(mesh, state.mu)) / area;
    const double m = (std::abs(initial_mean) + 1.0) / 2.0;
    const double delta1 = std::min(initial_mean + m, m - initial_mean);
    const double c1 = 1.0 / delta1;
    const double c2 = 2.0 * std::abs(params.dF(m)) * area;
    const double grad_mu = h1_seminorm(mesh, state.mu);
    const double bound = (c1 * grad_mu + c2) / area;
    return {mu_bar, bound};
}

std::pair<double, std::vector<double>> separation_monitor(const std::vector<PhaseState>& states) {
    std::vector<double> series;
    series.reserve(states.size());
    double min_margin = 1.0;
    for (const auto& s : states) {
        series.push_back(s.separation_margin);
        min_margin = std::min(min_margin, s.separation_margin);
    }
    return {min_margin, series};
}

} // namespace surfphase
