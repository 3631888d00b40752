#include "surfphase/simulation.hpp"
#include "surfphase/errors.hpp"
#include "surfphase/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace surfphase {

void EnergyLedger::append(const LedgerRow& row) {
    const double entries[] = {row.t,          row.E_kin,    row.E_grad,
                              row.E_pot,      row.E_tot,    row.dissipation,
                              row.mass,       row.area,     row.volume,
                              row.sep_margin, row.div_res,  row.normal_res,
                              row.mean_mu,    row.mubar_ratio, row.rho_transport_res,
                              row.strain_sq,  row.grad_mu_sq};
    for (double e : entries)
        if (!std::isfinite(e)) throw ParameterError("ledger row has a non-finite entry");
    if (!rows.empty() && row.t <= rows.back().t)
        throw ParameterError("ledger rows must be strictly time-increasing");
    rows.push_back(row);
}

void ScenarioConfig::validate() const {
    if (surface.kind != "sphere")
        throw ConfigError("surface.kind: only \"sphere\" is supported");
    if (!(surface.radius > 0.0)) throw ConfigError("surface.radius must be positive");
    if (surface.subdivision < 0 || surface.subdivision > 8)
        throw ConfigError("surface.subdivision must be in [0, 8]");
    if (evolution.law != "stationary" && evolution.law != "oscillating")
        throw ConfigError("evolution.law: unknown law \"" + evolution.law + "\"");
    if (initial.phase != "constant" && initial.phase != "harmonic" &&
        initial.phase != "spinodal")
        throw ConfigError("initial.phase: unknown kind \"" + initial.phase + "\"");
    if (initial.velocity != "zero" && initial.velocity != "rotation")
        throw ConfigError("initial.velocity: unknown kind \"" + initial.velocity + "\"");
    if (std::abs(initial.mean) >= 1.0)
        throw ConfigError("initial.mean: |mean of initial phi| < 1 is required");
    if (initial.smoothing_passes < 0)
        throw ConfigError("initial.smoothing_passes must be non-negative");
    if (!(dt > 0.0)) throw ConfigError("stepping.dt must be positive");
    if (!(t_end >= dt)) throw ConfigError("stepping.t_end must be at least dt");
    if (output.snapshot_every < 0)
        throw ConfigError("output.snapshot_every must be non-negative");
    material.validate();
}

NormalVelocity ScenarioConfig::normal_velocity() const {
    if (evolution.law == "stationary" || evolution.amplitude == 0.0)
        return [](const Eigen::Vector3d&, double) { return 0.0; };
    const double a = evolution.amplitude, w = evolution.frequency;
    return [a, w](const Eigen::Vector3d& x, double t) { return a * std::cos(w * t) * x.z(); };
}

Eigen::VectorXd build_initial_phi(const SurfaceMesh& mesh, const ScenarioConfig& config) {
    const int nv = mesh.n_vertices();
    const InitialSpec& init = config.initial;
    Eigen::VectorXd phi = Eigen::VectorXd::Constant(nv, init.mean);
    if (init.phase == "harmonic") {
        for (int i = 0; i < nv; ++i) {
            const double z = mesh.vertex_positions(i, 2) / config.surface.radius;
            phi[i] += init.amplitude * 0.5 * (3.0 * z * z - 1.0);
        }
    } else if (init.phase == "spinodal") {
        std::mt19937 rng(init.seed);
        std::uniform_real_distribution<double> noise(-0.05, 0.05);
        for (int i = 0; i < nv; ++i) phi[i] += noise(rng);
        const Eigen::SparseMatrix<double> K = stiffness_matrix(mesh).matrix;
        const Eigen::VectorXd diag = K.diagonal();
        for (int pass = 0; pass < init.smoothing_passes; ++pass)
            phi -= (K * phi).cwiseQuotient(diag);
        // re-center the lumped mean on the requested value
        const Eigen::VectorXd a = mesh.lumped_vertex_areas();
        phi.array() += init.mean - a.dot(phi) / a.sum();
    }
    return phi;
}

namespace {

Eigen::MatrixX3d build_initial_velocity(const SurfaceMesh& mesh, const ScenarioConfig& config) {
    const int nv = mesh.n_vertices();
    Eigen::MatrixX3d V = Eigen::MatrixX3d::Zero(nv, 3);
    if (config.initial.velocity == "rotation" && config.initial.rotation_rate != 0.0) {
        Eigen::Vector3d axis(config.initial.rotation_axis[0], config.initial.rotation_axis[1],
                             config.initial.rotation_axis[2]);
        const double norm = axis.norm();
        if (norm < 1e-14) throw ConfigError("initial.rotation_axis must be non-zero");
        axis *= config.initial.rotation_rate / norm;
        for (int i = 0; i < nv; ++i)
            V.row(i) = axis.cross(Eigen::Vector3d(mesh.vertex_positions.row(i)));
    }
    return V;
}

LedgerRow make_row(const SurfaceMesh& mesh, const PhaseState& phase, const FlowState& flow,
                   const MaterialParams& params, double initial_mean, double rho_res) {
    LedgerRow row;
    row.t = phase.time;
    const auto [e_grad, e_pot, grad_mu_sq] = ch_energy(mesh, phase, params);
    row.E_kin = flow.kinetic_energy;
    row.E_grad = e_grad;
    row.E_pot = e_pot;
    row.E_tot = row.E_kin + row.E_grad + row.E_pot;
    row.grad_mu_sq = grad_mu_sq;

    const auto strain = rate_of_strain(mesh, flow.V);
    double visc = 0.0, strain_sq = 0.0;
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        double nu_bar = 0.0;
        for (int a = 0; a < 3; ++a)
            nu_bar += params.viscosity(phase.phi[mesh.triangles(t, a)]) / 3.0;
        const double e2 = mesh.triangle_areas[t] * strain[t].squaredNorm();
        strain_sq += e2;
        visc += 2.0 * nu_bar * e2;
    }
    row.strain_sq = strain_sq;
    row.dissipation = visc + grad_mu_sq;

    row.mass = phase.total_mass;
    row.area = surface_area(mesh);
    row.volume = volume_enclosed(mesh);
    row.sep_margin = phase.separation_margin;
    row.div_res = flow.div_residual;
    row.normal_res = flow.normal_residual;
    const auto [mu_bar, bound] = mean_mu_bound_report(mesh, phase, params, initial_mean);
    row.mean_mu = mu_bar;
    row.mubar_ratio = bound > 0.0 ? mu_bar / bound : 0.0;
    row.rho_transport_res = rho_res;
    return row;
}

} // namespace

std::pair<Trajectory, EnergyLedger> simulate(const ScenarioConfig& config) {
    config.validate();
    const NormalVelocity vn_law = config.normal_velocity();
    const bool moving = config.evolution.law != "stationary" && config.evolution.amplitude != 0.0;
    const bool project = config.evolution.compatibility_projection;

    SurfaceMesh mesh = build_icosphere(config.surface.subdivision, config.surface.radius);
    const Eigen::VectorXd phi0 = build_initial_phi(mesh, config);
    const Eigen::VectorXd lump0 = mesh.lumped_vertex_areas();
    const double initial_mean = lump0.dot(phi0) / lump0.sum();
    if (std::abs(initial_mean) >= 1.0)
        throw ConfigError("initial phase mean must satisfy |mean| < 1");

    PhaseState phase = initialize_phase(mesh, 0.0, phi0, config.material);

    auto sample_vn = [&](const SurfaceMesh& m, double t) {
        Eigen::VectorXd vn = Eigen::VectorXd::Zero(m.n_vertices());
        if (moving) {
            for (int i = 0; i < m.n_vertices(); ++i)
                vn[i] = vn_law(m.vertex_positions.row(i), t);
            if (project) vn = project_compatible(m, vn);
        }
        return vn;
    };

    FlowState flow;
    flow.time = 0.0;
    flow.V = build_initial_velocity(mesh, config);
    flow.pi = Eigen::VectorXd::Zero(mesh.n_vertices());
    {
        const Eigen::VectorXd vn0 = sample_vn(mesh, 0.0);
        flow.u_hat = compute_lift(mesh, vn0).second;
        Eigen::VectorXd rho(mesh.n_vertices());
        for (int i = 0; i < mesh.n_vertices(); ++i)
            rho[i] = config.material.density(phase.phi[i]);
        update_flow_diagnostics(mesh, rho, flow);
    }

    Trajectory traj;
    traj.initial_mesh = mesh;
    EnergyLedger ledger;
    ledger.append(make_row(mesh, phase, flow, config.material, initial_mean, 0.0));
    traj.phases.push_back(phase);
    if (config.output.snapshot_every > 0) traj.snapshots.emplace_back(0.0, mesh);

    NsOptions ns_options;
    ns_options.penalty_weight = config.penalty_weight;

    double t = 0.0;
    long step = 0;
    const double t_end = config.t_end;
    while (t < t_end - 1e-12 * t_end) {
        double dt_step = std::min(config.dt, t_end - t);
        int attempt = 0;
        for (;;) {
            try {
                SurfaceMesh mesh_new =
                    moving ? evolve_step(mesh, vn_law, t, dt_step, project) : mesh;
                const double t_new = t + dt_step;
                const Eigen::VectorXd vn_new = sample_vn(mesh_new, t_new);
                auto [Pi, u_hat_new] = compute_lift(mesh_new, vn_new);
                (void)Pi;

                const Eigen::MatrixX3d transport = flow.V + u_hat_new;
                PhaseState phase_new = ch_step(mesh, mesh_new, phase, transport, vn_new,
                                               config.material, dt_step);
                FlowState flow_new = ns_step(mesh, mesh_new, flow, phase, phase_new,
                                             u_hat_new, vn_new, config.material, dt_step,
                                             ns_options);
                const double rho_res = density_transport_residual(
                    mesh, mesh_new, phase, phase_new, flow_new, vn_new, config.material,
                    dt_step);

                mesh = std::move(mesh_new);
                phase = std::move(phase_new);
                flow = std::move(flow_new);
                t = t_new;
                ++step;
                ledger.append(make_row(mesh, phase, flow, config.material, initial_mean,
                                       rho_res));
                traj.phases.push_back(phase);
                if (config.output.snapshot_every > 0 &&
                    step % config.output.snapshot_every == 0)
                    traj.snapshots.emplace_back(t, mesh);
                break;
            } catch (const StepFailure&) {
                if (++attempt > 5) throw;
                dt_step /= 2.0;
            }
        }
    }

    traj.final_mesh = mesh;
    traj.final_phase = phase;
    traj.final_flow = flow;
    return {std::move(traj), std::move(ledger)};
}

EnergyReport verify_energy_inequality(const EnergyLedger& ledger,
                                      const MaterialParams& params) {
    EnergyReport report;
    const auto& rows = ledger.rows;
    for (std::size_t n = 0; n + 1 < rows.size(); ++n) {
        const double dt = rows[n + 1].t - rows[n].t;
        const double r = (rows[n + 1].E_tot - rows[n].E_tot) / dt +
                         params.nu_min() * rows[n + 1].strain_sq +
                         0.25 * rows[n + 1].grad_mu_sq;
        report.residuals.push_back(r);
        report.ratios.push_back(r / (1.0 + rows[n].E_tot));
    }
    report.C_hat = 0.0;
    for (double q : report.ratios) report.C_hat = std::max(report.C_hat, q);
    return report;
}

} // namespace surfphase
