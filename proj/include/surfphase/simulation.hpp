#pragma once

#include "surfphase/cahn_hilliard.hpp"
#include "surfphase/material.hpp"
#include "surfphase/mesh.hpp"
#include "surfphase/navier_stokes.hpp"

#include <string>
#include <utility>
#include <vector>

namespace surfphase {

/// One ledger record per accepted step (plus the initial state).  The first
/// fifteen fields are the published CSV columns; strain_sq and grad_mu_sq are
/// kept for the energy-inequality report only.
struct LedgerRow {
    double t = 0.0;
    double E_kin = 0.0;       ///< 1/2 sum a_i rho_i |V_i|^2
    double E_grad = 0.0;      ///< 1/2 ||grad phi||^2
    double E_pot = 0.0;       ///< nodal-quadrature int Psi(phi)
    double E_tot = 0.0;
    double dissipation = 0.0; ///< 2 int nu |E(V)|^2 + ||grad mu||^2
    double mass = 0.0;        ///< lumped int phi
    double area = 0.0;
    double volume = 0.0;
    double sep_margin = 0.0;  ///< 1 - max|phi|
    double div_res = 0.0;
    double normal_res = 0.0;
    double mean_mu = 0.0;     ///< |int mu| / area
    double mubar_ratio = 0.0; ///< mean_mu over its analytic-style bound
    double rho_transport_res = 0.0;

    double strain_sq = 0.0;   ///< ||E(V)||^2 (unweighted)
    double grad_mu_sq = 0.0;  ///< ||grad mu||^2
};

/// Append-only, time-monotone series of step records.
struct EnergyLedger {
    std::vector<LedgerRow> rows;

    /// Rejects non-finite entries and non-increasing time.
    void append(const LedgerRow& row);
};

struct SurfaceSpec {
    std::string kind = "sphere";
    double radius = 1.0;
    int subdivision = 3;
};

/// Prescribed normal-velocity law.  "stationary": v_n = 0.
/// "oscillating": v_n(x, t) = amplitude * cos(frequency * t) * x_3.
struct EvolutionSpec {
    std::string law = "stationary";
    double amplitude = 0.0;
    double frequency = 1.0;
    bool compatibility_projection = true;
};

/// Initial data.  Phase kinds: "constant" (phi = mean), "harmonic"
/// (mean + amplitude * (3 z^2 - 1)/2 with z the third coordinate over the
/// radius), "spinodal" (mean + seeded uniform noise in [-0.05, 0.05],
/// smoothed by `smoothing_passes` relaxation sweeps of the stiffness
/// operator, then re-centered on `mean`).  Velocity kinds: "zero" and
/// "rotation" (rotation_rate * axis x position, a tangential Killing field
/// on the sphere).
struct InitialSpec {
    std::string phase = "constant";
    double mean = 0.0;
    double amplitude = 0.0;
    unsigned seed = 0;
    int smoothing_passes = 5;
    std::string velocity = "zero";
    double rotation_rate = 0.0;
    double rotation_axis[3] = {0.0, 0.0, 1.0};
};

struct OutputSpec {
    std::string directory = "out";
    int snapshot_every = 0; ///< 0 disables mesh snapshots
};

struct ScenarioConfig {
    SurfaceSpec surface;
    EvolutionSpec evolution;
    InitialSpec initial;
    MaterialParams material;
    double dt = 1e-3;
    double t_end = 1e-2;
    double penalty_weight = -1.0; ///< non-positive: solver default
    OutputSpec output;

    /// Structural checks: sphere kind, dt > 0, t_end >= dt, |mean| < 1,
    /// known law/phase/velocity names.  Material validation is separate.
    void validate() const;

    /// The normal-velocity law as a callable.
    NormalVelocity normal_velocity() const;
};

/// Initial nodal phase field for a config (before initialize_phase).
Eigen::VectorXd build_initial_phi(const SurfaceMesh& mesh, const ScenarioConfig& config);

/// Final states plus the per-step phase history and optional mesh snapshots.
struct Trajectory {
    SurfaceMesh initial_mesh;
    SurfaceMesh final_mesh;
    PhaseState final_phase;
    FlowState final_flow;
    std::vector<PhaseState> phases; ///< one per ledger row
    std::vector<std::pair<double, SurfaceMesh>> snapshots;
};

/// Runs the coupled scheme: per step, advance the surface (Heun), rebuild
/// the lift, take the phase step transported by V_old + u_hat_new, then the
/// momentum step, and append a ledger row.  A failing step is retried with
/// the step size halved, up to five times; afterwards the failure is
/// rethrown.  Deterministic for fixed config.
std::pair<Trajectory, EnergyLedger> simulate(const ScenarioConfig& config);

/// Per-step residuals r_n = [E_tot(t_{n+1}) - E_tot(t_n)] / dt
/// + nu_min ||E(V)||^2 + 1/4 ||grad mu||^2 (dissipation terms at t_{n+1})
/// and the smallest constant with r_n <= C_hat (1 + E_tot(t_n)).
struct EnergyReport {
    double C_hat = 0.0;
    std::vector<double> residuals;
    std::vector<double> ratios; ///< r_n / (1 + E_tot(t_n))
};

EnergyReport verify_energy_inequality(const EnergyLedger& ledger,
                                      const MaterialParams& params);

} // namespace surfphase
