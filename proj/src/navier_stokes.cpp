#include "surfphase/navier_stokes.hpp"
#include "surfphase/errors.hpp"
#include "surfphase/operators.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <vector>

namespace surfphase {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Area-weighted vertex average of a per-triangle 3-vector field.
Eigen::MatrixX3d average_to_vertices(const SurfaceMesh& mesh, const Eigen::MatrixX3d& per_tri) {
    Eigen::MatrixX3d out = Eigen::MatrixX3d::Zero(mesh.n_vertices(), 3);
    Eigen::VectorXd wsum = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const double A = mesh.triangle_areas[t];
        for (int a = 0; a < 3; ++a) {
            const int i = mesh.triangles(t, a);
            out.row(i) += A * per_tri.row(t);
            wsum[i] += A;
        }
    }
    for (int i = 0; i < mesh.n_vertices(); ++i) out.row(i) /= wsum[i];
    return out;
}

/// Area-weighted vertex average of the per-triangle derivative tensors.
std::vector<Eigen::Matrix3d> average_gradient_to_vertices(const SurfaceMesh& mesh,
                                                          const Eigen::MatrixX3d& v) {
    const auto grads = vector_gradient(mesh, v);
    std::vector<Eigen::Matrix3d> out(mesh.n_vertices(), Eigen::Matrix3d::Zero());
    Eigen::VectorXd wsum = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const double A = mesh.triangle_areas[t];
        for (int a = 0; a < 3; ++a) {
            const int i = mesh.triangles(t, a);
            out[i] += A * grads[t];
            wsum[i] += A;
        }
    }
    for (int i = 0; i < mesh.n_vertices(); ++i) out[i] /= wsum[i];
    return out;
}

/// Pressure-velocity coupling B_{j,(i,alpha)} = int chi_j d_alpha chi_i,
/// stored as an n x 3n sparse matrix acting on flattened velocities
/// (dof 3i + alpha).
Eigen::SparseMatrix<double> divergence_coupling(const SurfaceMesh& mesh) {
    const int nv = mesh.n_vertices();
    Triplets trip;
    trip.reserve(mesh.n_triangles() * 27);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Eigen::Matrix3d g = p1_shape_gradients(mesh, t);
        const double w = mesh.triangle_areas[t] / 3.0;
        for (int a = 0; a < 3; ++a) {
            const int i = mesh.triangles(t, a);
            for (int b = 0; b < 3; ++b) {
                const int j = mesh.triangles(t, b);
                for (int alpha = 0; alpha < 3; ++alpha)
                    trip.emplace_back(j, 3 * i + alpha, w * g(a, alpha));
            }
        }
    }
    Eigen::SparseMatrix<double> B(nv, 3 * nv);
    B.setFromTriplets(trip.begin(), trip.end());
    return B;
}

/// Vector viscous form 2 int nu_h E(V):E(W) on flattened dofs, with the
/// viscosity taken as the triangle mean of its nodal samples.
Eigen::SparseMatrix<double> viscous_form(const SurfaceMesh& mesh, const Eigen::VectorXd& nu) {
    const int nv = mesh.n_vertices();
    Triplets trip;
    trip.reserve(mesh.n_triangles() * 81);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Eigen::Matrix3d g = p1_shape_gradients(mesh, t);
        const Eigen::Vector3d n = mesh.triangle_normals.row(t);
        const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - n * n.transpose();
        const double A = mesh.triangle_areas[t];
        double nu_bar = 0.0;
        for (int a = 0; a < 3; ++a) nu_bar += nu[mesh.triangles(t, a)];
        nu_bar /= 3.0;
        Eigen::Matrix3d E[3][3]; // basis strains, [vertex][component]
        for (int a = 0; a < 3; ++a)
            for (int alpha = 0; alpha < 3; ++alpha) {
                Eigen::Matrix3d G = Eigen::Matrix3d::Zero();
                G.row(alpha) = g.row(a);
                E[a][alpha] = P * (0.5 * (G + G.transpose())) * P;
            }
        for (int a = 0; a < 3; ++a)
            for (int alpha = 0; alpha < 3; ++alpha)
                for (int b = 0; b < 3; ++b)
                    for (int beta = 0; beta < 3; ++beta) {
                        const double val =
                            2.0 * nu_bar * A * (E[a][alpha].cwiseProduct(E[b][beta])).sum();
                        if (val != 0.0)
                            trip.emplace_back(3 * mesh.triangles(t, a) + alpha,
                                              3 * mesh.triangles(t, b) + beta, val);
                    }
    }
    Eigen::SparseMatrix<double> Av(3 * nv, 3 * nv);
    Av.setFromTriplets(trip.begin(), trip.end());
    return Av;
}

/// Scalar transport form B_ij = int chi_i (a_h . grad chi_j) for a nodal
/// 3-vector field a.
Eigen::SparseMatrix<double> transport_form(const SurfaceMesh& mesh, const Eigen::MatrixX3d& af) {
    const int nv = mesh.n_vertices();
    Triplets trip;
    trip.reserve(mesh.n_triangles() * 9);
    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const Eigen::Matrix3d g = p1_shape_gradients(mesh, t);
        const double w = mesh.triangle_areas[t] / 12.0;
        Eigen::Vector3d asum = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) asum += af.row(mesh.triangles(t, k));
        for (int a = 0; a < 3; ++a) {
            const Eigen::Vector3d moment =
                w * (asum + Eigen::Vector3d(af.row(mesh.triangles(t, a))));
            for (int b = 0; b < 3; ++b)
                trip.emplace_back(mesh.triangles(t, a), mesh.triangles(t, b),
                                  moment.dot(g.row(b)));
        }
    }
    Eigen::SparseMatrix<double> B(nv, nv);
    B.setFromTriplets(trip.begin(), trip.end());
    return B;
}

Eigen::VectorXd flatten(const Eigen::MatrixX3d& v) {
    Eigen::VectorXd out(3 * v.rows());
    for (int i = 0; i < v.rows(); ++i)
        for (int alpha = 0; alpha < 3; ++alpha) out[3 * i + alpha] = v(i, alpha);
    return out;
}

Eigen::MatrixX3d unflatten(const Eigen::VectorXd& v) {
    Eigen::MatrixX3d out(v.size() / 3, 3);
    for (int i = 0; i < out.rows(); ++i)
        for (int alpha = 0; alpha < 3; ++alpha) out(i, alpha) = v[3 * i + alpha];
    return out;
}

} // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixX3d> compute_lift(const SurfaceMesh& mesh,
                                                          const Eigen::VectorXd& vn_samples) {
    if (vn_samples.size() != mesh.n_vertices())
        throw ParameterError("normal velocity length does not match vertex count");
    const Eigen::VectorXd rhs = mesh.vertex_mean_curvature.cwiseProduct(vn_samples);
    const Eigen::VectorXd Pi = solve_poisson_mean_zero(mesh, rhs);
    const Eigen::MatrixX3d grad = tangential_gradient(mesh, Pi);
    return {Pi, average_to_vertices(mesh, grad)};
}

Eigen::MatrixX3d assemble_J_rho(const SurfaceMesh& mesh, const Eigen::VectorXd& mu,
                                const MaterialParams& params) {
    const Eigen::MatrixX3d grad = tangential_gradient(mesh, mu);
    return params.flux_coefficient() * average_to_vertices(mesh, grad);
}

FlowState ns_step(const SurfaceMesh& mesh_old, const SurfaceMesh& mesh_new,
                  const FlowState& flow, const PhaseState& phase_old,
                  const PhaseState& phase_new, const Eigen::MatrixX3d& u_hat_new,
                  const Eigen::VectorXd& vn_new, const MaterialParams& params,
                  double dt, const NsOptions& options) {
    params.validate();
    if (!(dt > 0.0)) throw ParameterError("ns_step requires dt > 0");
    const int nv = mesh_new.n_vertices();
    if (mesh_old.n_vertices() != nv || mesh_old.triangles != mesh_new.triangles)
        throw ParameterError("mesh snapshots must share connectivity");
    if (phase_old.phi.size() != nv || phase_new.phi.size() != nv ||
        u_hat_new.rows() != nv || vn_new.size() != nv)
        throw ParameterError("field length does not match vertex count");

    const Eigen::MatrixX3d V_old =
        flow.V.rows() == nv ? flow.V : Eigen::MatrixX3d::Zero(nv, 3).eval();
    const Eigen::MatrixX3d u_hat_old =
        flow.u_hat.rows() == nv ? flow.u_hat : Eigen::MatrixX3d::Zero(nv, 3).eval();

    Eigen::VectorXd rho_new(nv), rho_old(nv), nu(nv);
    for (int i = 0; i < nv; ++i) {
        rho_new[i] = params.density(phase_new.phi[i]);
        rho_old[i] = params.density(phase_old.phi[i]);
        nu[i] = params.viscosity(phase_new.phi[i]);
    }
    const Eigen::VectorXd a_new = mesh_new.lumped_vertex_areas();
    const Eigen::VectorXd a_old = mesh_old.lumped_vertex_areas();
    const double h = mean_edge_length(mesh_new);
    const double penalty =
        options.penalty_weight > 0.0 ? options.penalty_weight : 1e4 * params.nu_min() / h;

    const Eigen::MatrixX3d J = assemble_J_rho(mesh_new, phase_new.mu, params);
    const auto grad_u_hat = average_gradient_to_vertices(mesh_new, u_hat_new);

    const int ndof = 4 * nv; // 3 nv velocity + nv pressure
    Triplets trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndof);

    // Time term with the symmetric density correction: the lumped kinetic
    // energy 1/2 sum a rho |V|^2 then obeys a telescoping inequality.
    for (int i = 0; i < nv; ++i) {
        const double diag = (a_new[i] * rho_new[i] + a_old[i] * rho_old[i]) / (2.0 * dt);
        for (int alpha = 0; alpha < 3; ++alpha) {
            trip.emplace_back(3 * i + alpha, 3 * i + alpha, diag);
            rhs[3 * i + alpha] += a_old[i] * rho_old[i] * V_old(i, alpha) / dt;
        }
    }

    // Skewed Picard convection transported by rho V_old + J + rho u_hat.
    Eigen::MatrixX3d a_field(nv, 3);
    for (int i = 0; i < nv; ++i)
        a_field.row(i) = rho_new[i] * (V_old.row(i) + u_hat_new.row(i)) + J.row(i);
    {
        const Eigen::SparseMatrix<double> Bc = transport_form(mesh_new, a_field);
        const Eigen::SparseMatrix<double> Sk =
            0.5 * (Bc - Eigen::SparseMatrix<double>(Bc.transpose()));
        for (int k = 0; k < Sk.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(Sk, k); it; ++it)
                for (int alpha = 0; alpha < 3; ++alpha)
                    trip.emplace_back(3 * static_cast<int>(it.row()) + alpha,
                                      3 * static_cast<int>(it.col()) + alpha, it.value());
    }

    // Viscous form (also used to apply the lift's viscous source on the rhs).
    const Eigen::SparseMatrix<double> Avisc = viscous_form(mesh_new, nu);
    for (int k = 0; k < Avisc.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Avisc, k); it; ++it)
            trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                              it.value());
    rhs.head(3 * nv) -= Avisc * flatten(u_hat_new);

    // Lumped zeroth-order blocks: curvature coupling rho vn S V, lift
    // transport rho (V . grad) u_hat, and the normal penalty.
    for (int i = 0; i < nv; ++i) {
        const Eigen::Vector3d n = mesh_new.vertex_normals.row(i);
        Eigen::Matrix3d block =
            a_new[i] * rho_new[i] *
                (vn_new[i] * mesh_new.vertex_shape_operator[i] + grad_u_hat[i]) +
            a_new[i] * penalty * (n * n.transpose());
        for (int alpha = 0; alpha < 3; ++alpha)
            for (int beta = 0; beta < 3; ++beta)
                if (block(alpha, beta) != 0.0)
                    trip.emplace_back(3 * i + alpha, 3 * i + beta, block(alpha, beta));
    }

    // Pressure coupling and stabilization: momentum -B^T pi, continuity
    // -B V - stab h^2 K_p pi = 0 (the symmetric-negative form dissipates).
    const Eigen::SparseMatrix<double> B = divergence_coupling(mesh_new);
    for (int k = 0; k < B.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(B, k); it; ++it) {
            trip.emplace_back(static_cast<int>(it.col()), 3 * nv + static_cast<int>(it.row()),
                              -it.value());
            trip.emplace_back(3 * nv + static_cast<int>(it.row()), static_cast<int>(it.col()),
                              -it.value());
        }
    {
        const Eigen::SparseMatrix<double> Kp = stiffness_matrix(mesh_new).matrix;
        const double w = options.stabilization * h * h;
        for (int k = 0; k < Kp.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(Kp, k); it; ++it)
                trip.emplace_back(3 * nv + static_cast<int>(it.row()),
                                  3 * nv + static_cast<int>(it.col()), -w * it.value());
    }

    // Capillary force with exact energy pairing against the phase convection.
    const Eigen::MatrixX3d f_cap =
        korteweg_pairing_force(mesh_new, phase_new.phi, phase_new.mu);
    // Geometric and lift sources, assembled per vertex (lumped) or per
    // triangle where a gradient is involved.
    Eigen::VectorXd vn2(nv);
    for (int i = 0; i < nv; ++i) vn2[i] = vn_new[i] * vn_new[i];
    const Eigen::MatrixX3d grad_vn2 = tangential_gradient(mesh_new, vn2);
    for (int i = 0; i < nv; ++i) {
        const Eigen::Vector3d n = mesh_new.vertex_normals.row(i);
        const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - n * n.transpose();
        const Eigen::Matrix3d& S = mesh_new.vertex_shape_operator[i];
        Eigen::Vector3d f = Eigen::Vector3d(f_cap.row(i));
        f -= a_new[i] * vn_new[i] * (S * Eigen::Vector3d(J.row(i)));
        f -= a_new[i] * rho_new[i] *
             (P * Eigen::Vector3d(u_hat_new.row(i) - u_hat_old.row(i))) / dt;
        f -= a_new[i] *
             (grad_u_hat[i] *
              Eigen::Vector3d(rho_new[i] * u_hat_new.row(i) + J.row(i)));
        f -= a_new[i] * rho_new[i] * vn_new[i] * (S * Eigen::Vector3d(u_hat_new.row(i)));
        for (int alpha = 0; alpha < 3; ++alpha) rhs[3 * i + alpha] += f[alpha];
    }
    for (int t = 0; t < mesh_new.n_triangles(); ++t) {
        const Eigen::Matrix3d g = p1_shape_gradients(mesh_new, t);
        const double A = mesh_new.triangle_areas[t];
        double nu_bar = 0.0, vn_bar = 0.0, rho_sum = 0.0;
        Eigen::Matrix3d S_bar = Eigen::Matrix3d::Zero();
        for (int a = 0; a < 3; ++a) {
            const int i = mesh_new.triangles(t, a);
            nu_bar += nu[i] / 3.0;
            vn_bar += vn_new[i] / 3.0;
            rho_sum += rho_new[i];
            S_bar += mesh_new.vertex_shape_operator[i] / 3.0;
        }
        for (int a = 0; a < 3; ++a) {
            const int i = mesh_new.triangles(t, a);
            // 2 P div(nu vn H) source, integrated by parts: -2 nu vn H : grad W
            const Eigen::Vector3d curv = -2.0 * nu_bar * vn_bar * A * (S_bar * g.row(a).transpose());
            // (rho/2) grad(vn^2) source with the exact P1 density moment
            const Eigen::Vector3d slip =
                0.5 * (A / 12.0) * (rho_sum + rho_new[i]) * grad_vn2.row(t).transpose();
            for (int alpha = 0; alpha < 3; ++alpha)
                rhs[3 * i + alpha] += curv[alpha] + slip[alpha];
        }
    }

    Eigen::SparseMatrix<double> A(ndof, ndof);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success)
        throw SolverError("momentum saddle-point factorization failed");
    const Eigen::VectorXd sol = lu.solve(rhs);
    if (!sol.allFinite()) throw SolverError("momentum solve produced non-finite values");

    Eigen::VectorXd V_flat = sol.head(3 * nv);
    Eigen::VectorXd pi = sol.tail(nv);
    pi.array() -= a_new.dot(pi) / a_new.sum();

    if (options.divergence_cleaning) {
        // Project onto the weak divergence-free space, orthogonally in the
        // rho-weighted lumped inner product: V <- V - D^{-1} B^T q with
        // (B D^{-1} B^T) q = B V.  Strictly decreases the kinetic energy.
        Eigen::VectorXd Dinv(3 * nv);
        for (int i = 0; i < nv; ++i)
            for (int alpha = 0; alpha < 3; ++alpha)
                Dinv[3 * i + alpha] = 1.0 / (a_new[i] * rho_new[i]);
        auto apply = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
            return B * Dinv.cwiseProduct(Eigen::VectorXd(B.transpose() * q));
        };
        const Eigen::VectorXd b = B * V_flat;
        Eigen::VectorXd q = Eigen::VectorXd::Zero(nv);
        Eigen::VectorXd r = b, p = r;
        double rr = r.squaredNorm();
        const double tol2 = 1e-26 * std::max(rr, 1e-300);
        const int max_it = 20 * static_cast<int>(std::sqrt(double(nv))) + 10;
        for (int it = 0; it < max_it && rr > tol2; ++it) {
            const Eigen::VectorXd Ap = apply(p);
            const double alpha = rr / p.dot(Ap);
            q += alpha * p;
            r -= alpha * Ap;
            const double rr_new = r.squaredNorm();
            p = r + (rr_new / rr) * p;
            rr = rr_new;
        }
        V_flat -= Dinv.cwiseProduct(Eigen::VectorXd(B.transpose() * q));
    }

    FlowState out;
    out.time = phase_new.time;
    out.V = unflatten(V_flat);
    out.pi = pi;
    out.u_hat = u_hat_new;
    update_flow_diagnostics(mesh_new, rho_new, out);
    return out;
}

void update_flow_diagnostics(const SurfaceMesh& mesh, const Eigen::VectorXd& rho,
                             FlowState& flow) {
    const int nv = mesh.n_vertices();
    if (flow.V.rows() != nv || rho.size() != nv)
        throw ParameterError("field length does not match vertex count");
    const Eigen::VectorXd a = mesh.lumped_vertex_areas();
    const Eigen::VectorXd div_weak = divergence_coupling(mesh) * flatten(flow.V);
    double div2 = 0.0, nrm2 = 0.0, kin = 0.0;
    for (int i = 0; i < nv; ++i) {
        div2 += div_weak[i] * div_weak[i] / a[i];
        const double vn_comp = flow.V.row(i).dot(mesh.vertex_normals.row(i));
        nrm2 += a[i] * vn_comp * vn_comp;
        kin += 0.5 * a[i] * rho[i] * flow.V.row(i).squaredNorm();
    }
    flow.div_residual = std::sqrt(div2);
    flow.normal_residual = std::sqrt(nrm2);
    flow.kinetic_energy = kin;
}

double density_transport_residual(const SurfaceMesh& mesh_old, const SurfaceMesh& mesh_new,
                                  const PhaseState& phase_old, const PhaseState& phase_new,
                                  const FlowState& flow_new, const Eigen::VectorXd& vn_new,
                                  const MaterialParams& params, double dt) {
    const int nv = mesh_new.n_vertices();
    if (mesh_old.n_vertices() != nv || phase_old.phi.size() != nv ||
        phase_new.phi.size() != nv || flow_new.V.rows() != nv || vn_new.size() != nv)
        throw ParameterError("field length does not match vertex count");
    if (!(dt > 0.0)) throw ParameterError("dt must be positive");

    Eigen::VectorXd w(nv), z(nv);
    Eigen::MatrixX3d F(nv, 3);
    const Eigen::MatrixX3d J = assemble_J_rho(mesh_new, phase_new.mu, params);
    for (int i = 0; i < nv; ++i) {
        const double rho = params.density(phase_new.phi[i]);
        w[i] = (rho - params.density(phase_old.phi[i])) / dt;
        const Eigen::Vector3d n = mesh_new.vertex_normals.row(i);
        const Eigen::Vector3d v_tot = Eigen::Vector3d(flow_new.V.row(i)) +
                                      Eigen::Vector3d(flow_new.u_hat.row(i)) + vn_new[i] * n;
        F.row(i) = J.row(i) + rho * v_tot.transpose();
        z[i] = mesh_new.vertex_mean_curvature[i] * rho * v_tot.dot(n);
    }
    // residual of the material rate plus flux divergence, tested with chi_j:
    //   r_j = int chi_j (w + H rho v.n) - int grad chi_j . F
    const Eigen::SparseMatrix<double> M = mass_matrix(mesh_new).matrix;
    Eigen::VectorXd r = M * (w + z);
    for (int t = 0; t < mesh_new.n_triangles(); ++t) {
        const Eigen::Matrix3d g = p1_shape_gradients(mesh_new, t);
        const double w3 = mesh_new.triangle_areas[t] / 3.0;
        Eigen::Vector3d Fsum = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) Fsum += F.row(mesh_new.triangles(t, k));
        for (int a = 0; a < 3; ++a)
            r[mesh_new.triangles(t, a)] -= w3 * g.row(a).dot(Fsum);
    }
    const Eigen::VectorXd a = mesh_new.lumped_vertex_areas();
    double s = 0.0;
    for (int j = 0; j < nv; ++j) s += r[j] * r[j] / a[j];
    return std::sqrt(s);
}

} // namespace surfphase
