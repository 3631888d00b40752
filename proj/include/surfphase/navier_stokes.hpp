#pragma once

#include "surfphase/cahn_hilliard.hpp"
#include "surfphase/material.hpp"
#include "surfphase/mesh.hpp"

#include <Eigen/Core>

#include <utility>

namespace surfphase {

/// Divergence-free velocity part V, mean-zero pressure, and the lift u_hat
/// on one mesh snapshot.
struct FlowState {
    double time = 0.0;
    Eigen::MatrixX3d V;
    Eigen::VectorXd pi;
    Eigen::MatrixX3d u_hat;
    double kinetic_energy = 0.0;  ///< 1/2 sum a_i rho_i |V_i|^2 (lumped)
    double div_residual = 0.0;    ///< weak-divergence dual norm of V
    double normal_residual = 0.0; ///< ||V.n||_{L2}
};

/// Solves -Laplace(Pi) = H vn with mean-zero Pi and returns (Pi, u_hat) with
/// u_hat the area-weighted nodal average of the per-triangle gradient of Pi.
/// vn_samples must already satisfy the compatibility condition (lumped
/// integral of H vn = 0), which project_compatible enforces.
std::pair<Eigen::VectorXd, Eigen::MatrixX3d> compute_lift(const SurfaceMesh& mesh,
                                                          const Eigen::VectorXd& vn_samples);

/// Diffusive mass flux J_rho = flux_coefficient * grad(mu), averaged to
/// vertices from the per-triangle gradient.
Eigen::MatrixX3d assemble_J_rho(const SurfaceMesh& mesh, const Eigen::VectorXd& mu,
                                const MaterialParams& params);

struct NsOptions {
    /// Normal-penalty weight; non-positive means the default 1e4 nu_min / h.
    double penalty_weight = -1.0;
    /// Pressure-stabilization coefficient (times h^2 grad pi . grad q).
    double stabilization = 0.1;
    /// Post-solve projection of V onto the weak divergence-free space.
    bool divergence_cleaning = true;
};

/// One semi-implicit step of the tangential momentum equation for the
/// divergence-free velocity part.  Implicit in V+: rho-weighted lumped time
/// term with the symmetric density correction, skew Picard convection
/// transported by rho V_old + J_rho + rho u_hat, viscous form
/// 2 int nu E(V+):E(W), curvature and lift zeroth-order terms, normal
/// penalty, and stabilized pressure coupling.  Explicit right side: the
/// pairing-exact capillary force, the geometric sources built from vn, the
/// shape operator and u_hat, and the lift acceleration
/// (u_hat_new - flow.u_hat)/dt.  The linear saddle system is solved by a
/// sparse direct factorization; pi is gauge-fixed to zero mean.
FlowState ns_step(const SurfaceMesh& mesh_old, const SurfaceMesh& mesh_new,
                  const FlowState& flow, const PhaseState& phase_old,
                  const PhaseState& phase_new, const Eigen::MatrixX3d& u_hat_new,
                  const Eigen::VectorXd& vn_new, const MaterialParams& params,
                  double dt, const NsOptions& options = {});

/// Fills kinetic_energy, div_residual and normal_residual of `flow` on the
/// given mesh with nodal density rho: lumped kinetic energy, weak-divergence
/// dual norm sqrt(sum_j (int chi_j div V)^2 / a_j), and the lumped L2 norm of
/// V.n.  Used by ns_step and for the initial ledger row.
void update_flow_diagnostics(const SurfaceMesh& mesh, const Eigen::VectorXd& rho,
                             FlowState& flow);

/// Weak residual of the density transport law
///   d°rho + div(J_rho) + div(rho v_tot) = 0,  v_tot = V + u_hat + vn n,
/// tested against all P1 functions and reported in the lumped dual norm.
double density_transport_residual(const SurfaceMesh& mesh_old, const SurfaceMesh& mesh_new,
                                  const PhaseState& phase_old, const PhaseState& phase_new,
                                  const FlowState& flow_new, const Eigen::VectorXd& vn_new,
                                  const MaterialParams& params, double dt);

} // namespace surfphase
