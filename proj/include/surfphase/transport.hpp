#pragma once

#include "surfphase/mesh.hpp"

#include <Eigen/Core>

namespace surfphase {

/// Finite-difference checks of the evolving-surface transport identities.
/// Each check receives three vertex-tracked snapshots at t-dt, t, t+dt and
/// the corresponding nodal field slices; the time derivative on the left is
/// a central difference and the material derivatives and mesh velocity on
/// the right are central differences of nodal values and vertex positions.
/// Returned value: |d/dt(integral) - right-hand side|, of size O(dt^2 + h^2).

/// d/dt int eta phi = int d°eta phi + int eta d°phi + int eta phi div(W).
double check_transport_identity(const SurfaceMesh& prev, const SurfaceMesh& mid,
                                const SurfaceMesh& next,
                                const Eigen::VectorXd& eta_prev, const Eigen::VectorXd& eta_mid,
                                const Eigen::VectorXd& eta_next,
                                const Eigen::VectorXd& phi_prev, const Eigen::VectorXd& phi_mid,
                                const Eigen::VectorXd& phi_next, double dt);

/// d/dt int grad(eta).grad(phi) = int grad(d°eta).grad(phi)
///   + int grad(eta).grad(d°phi) + int grad(eta).grad(phi) div(W)
///   - 2 int grad(phi).E(W) grad(eta).
double check_transport_gradient(const SurfaceMesh& prev, const SurfaceMesh& mid,
                                const SurfaceMesh& next,
                                const Eigen::VectorXd& eta_prev, const Eigen::VectorXd& eta_mid,
                                const Eigen::VectorXd& eta_next,
                                const Eigen::VectorXd& phi_prev, const Eigen::VectorXd& phi_mid,
                                const Eigen::VectorXd& phi_next, double dt);

/// d/dt int grad(f).g = int grad(f).d°g + int grad(d°f).g
///   - int g.(grad(W)^T grad(f)) + int grad(f).g div(W)
/// for a tangential vector field g.
double check_transport_mixed(const SurfaceMesh& prev, const SurfaceMesh& mid,
                             const SurfaceMesh& next,
                             const Eigen::VectorXd& f_prev, const Eigen::VectorXd& f_mid,
                             const Eigen::VectorXd& f_next,
                             const Eigen::MatrixX3d& g_prev, const Eigen::MatrixX3d& g_mid,
                             const Eigen::MatrixX3d& g_next, double dt);

/// d/dt int eta E(u):E(v) = int d°eta E(u):E(v)
///   + int eta E(d°u):E(v) + int eta E(u):E(d°v)
///   + 2 int eta S(N gradW) Ehat(u) : E(v) + 2 int eta Ehat(u) S(N gradW) : E(v)
///   + 2 int eta E(u) : S(N gradW) Ehat(v) + 2 int eta E(u) : Ehat(v) S(N gradW)
///   - int eta S(gradU gradW):E(v) - int eta E(u):S(gradV gradW)
///   + int eta E(u):E(v) div(W),
/// with N = n (x) n, Ehat the unprojected symmetric gradient and S(.) the
/// symmetric part.
double check_transport_strain(const SurfaceMesh& prev, const SurfaceMesh& mid,
                              const SurfaceMesh& next,
                              const Eigen::VectorXd& eta_prev, const Eigen::VectorXd& eta_mid,
                              const Eigen::VectorXd& eta_next,
                              const Eigen::MatrixX3d& u_prev, const Eigen::MatrixX3d& u_mid,
                              const Eigen::MatrixX3d& u_next,
                              const Eigen::MatrixX3d& v_prev, const Eigen::MatrixX3d& v_mid,
                              const Eigen::MatrixX3d& v_next, double dt);

} // namespace surfphase
