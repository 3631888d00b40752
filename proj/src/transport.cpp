#include "surfphase/transport.hpp"
#include "surfphase/errors.hpp"
#include "surfphase/operators.hpp"

#include <cmath>

namespace surfphase {

namespace {

void require_matching(const SurfaceMesh& a, const SurfaceMesh& b) {
    if (a.n_vertices() != b.n_vertices() || a.triangles != b.triangles)
        throw ParameterError("transport check requires vertex-tracked snapshots "
                             "with identical connectivity");
}

Eigen::MatrixX3d mesh_velocity(const SurfaceMesh& prev, const SurfaceMesh& next, double dt) {
    return (next.vertex_positions - prev.vertex_positions) / (2.0 * dt);
}

// int_T eta_h * q for per-triangle constant q: A * mean(eta) * q
double weighted_triangle_sum(const SurfaceMesh& mesh, const Eigen::VectorXd& eta,
                             const Eigen::VectorXd& q) {
    double sum = 0.0;
    for (int f = 0; f < mesh.n_triangles(); ++f) {
        const double em = (eta[mesh.triangles(f, 0)] + eta[mesh.triangles(f, 1)] +
                           eta[mesh.triangles(f, 2)]) / 3.0;
        sum += mesh.triangle_areas[f] * em * q[f];
    }
    return sum;
}

// int eta_h phi_h dsigma, exact for P1 factors
double integral_product(const SurfaceMesh& mesh, const Eigen::VectorXd& eta,
                        const Eigen::VectorXd& phi) {
    double sum = 0.0;
    for (int f = 0; f < mesh.n_triangles(); ++f) {
        const double w = mesh.triangle_areas[f] / 12.0;
        double s = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                s += (a == b ? 2.0 : 1.0) * eta[mesh.triangles(f, a)] * phi[mesh.triangles(f, b)];
        sum += w * s;
    }
    return sum;
}

} // namespace

double check_transport_identity(const SurfaceMesh& prev, const SurfaceMesh& mid,
                                const SurfaceMesh& next,
                                const Eigen::VectorXd& eta_prev, const Eigen::VectorXd& eta_mid,
                                const Eigen::VectorXd& eta_next,
                                const Eigen::VectorXd& phi_prev, const Eigen::VectorXd& phi_mid,
                                const Eigen::VectorXd& phi_next, double dt) {
    require_matching(prev, mid);
    require_matching(mid, next);
    const double lhs = (integral_product(next, eta_next, phi_next) -
                        integral_product(prev, eta_prev, phi_prev)) / (2.0 * dt);

    const Eigen::VectorXd deta = (eta_next - eta_prev) / (2.0 * dt);
    const Eigen::VectorXd dphi = (phi_next - phi_prev) / (2.0 * dt);
    const Eigen::MatrixX3d W = mesh_velocity(prev, next, dt);
    const Eigen::VectorXd divW = divergence(mid, W);

    double rhs = integral_product(mid, deta, phi_mid) + integral_product(mid, eta_mid, dphi);
    // int eta phi div(W): div(W) constant per triangle, eta*phi quadratic
    for (int f = 0; f < mid.n_triangles(); ++f) {
        const double w = mid.triangle_areas[f] / 12.0;
        double s = 0.0;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                s += (a == b ? 2.0 : 1.0) * eta_mid[mid.triangles(f, a)] * phi_mid[mid.triangles(f, b)];
        rhs += divW[f] * w * s;
    }
    return std::abs(lhs - rhs);
}

double check_transport_gradient(const SurfaceMesh& prev, const SurfaceMesh& mid,
                                const SurfaceMesh& next,
                                const Eigen::VectorXd& eta_prev, const Eigen::VectorXd& eta_mid,
                                const Eigen::VectorXd& eta_next,
                                const Eigen::VectorXd& phi_prev, const Eigen::VectorXd& phi_mid,
                                const Eigen::VectorXd& phi_next, double dt) {
    require_matching(prev, mid);
    require_matching(mid, next);
    auto grad_pairing = [](const SurfaceMesh& m, const Eigen::VectorXd& a,
                           const Eigen::VectorXd& b) {
        const Eigen::MatrixX3d ga = tangential_gradient(m, a);
        const Eigen::MatrixX3d gb = tangential_gradient(m, b);
        double sum = 0.0;
        for (int f = 0; f < m.n_triangles(); ++f)
            sum += m.triangle_areas[f] * ga.row(f).dot(gb.row(f));
        return sum;
    };
    const double lhs = (grad_pairing(next, eta_next, phi_next) -
                        grad_pairing(prev, eta_prev, phi_prev)) / (2.0 * dt);

    const Eigen::VectorXd deta = (eta_next - eta_prev) / (2.0 * dt);
    const Eigen::VectorXd dphi = (phi_next - phi_prev) / (2.0 * dt);
    const Eigen::MatrixX3d W = mesh_velocity(prev, next, dt);
    const Eigen::VectorXd divW = divergence(mid, W);
    const auto EW = rate_of_strain(mid, W);
    const Eigen::MatrixX3d geta = tangential_gradient(mid, eta_mid);
    const Eigen::MatrixX3d gphi = tangential_gradient(mid, phi_mid);

    double rhs = grad_pairing(mid, deta, phi_mid) + grad_pairing(mid, eta_mid, dphi);
    for (int f = 0; f < mid.n_triangles(); ++f) {
        const Eigen::Vector3d ge = geta.row(f), gp = gphi.row(f);
        rhs += mid.triangle_areas[f] * (divW[f] * ge.dot(gp) - 2.0 * gp.dot(EW[f] * ge));
    }
    return std::abs(lhs - rhs);
}

double check_transport_mixed(const SurfaceMesh& prev, const SurfaceMesh& mid,
                             const SurfaceMesh& next,
                             const Eigen::VectorXd& f_prev, const Eigen::VectorXd& f_mid,
                             const Eigen::VectorXd& f_next,
                             const Eigen::MatrixX3d& g_prev, const Eigen::MatrixX3d& g_mid,
                             const Eigen::MatrixX3d& g_next, double dt) {
    require_matching(prev, mid);
    require_matching(mid, next);
    auto pairing = [](const SurfaceMesh& m, const Eigen::VectorXd& f, const Eigen::MatrixX3d& g) {
        const Eigen::MatrixX3d gf = tangential_gradient(m, f);
        double sum = 0.0;
        for (int t = 0; t < m.n_triangles(); ++t) {
            Eigen::Vector3d gm = Eigen::Vector3d::Zero();
            for (int k = 0; k < 3; ++k) gm += g.row(m.triangles(t, k)) / 3.0;
            sum += m.triangle_areas[t] * gf.row(t).dot(gm);
        }
        return sum;
    };
    const double lhs = (pairing(next, f_next, g_next) - pairing(prev, f_prev, g_prev)) / (2.0 * dt);

    const Eigen::VectorXd df = (f_next - f_prev) / (2.0 * dt);
    const Eigen::MatrixX3d dg = (g_next - g_prev) / (2.0 * dt);
    const Eigen::MatrixX3d W = mesh_velocity(prev, next, dt);
    const Eigen::VectorXd divW = divergence(mid, W);
    const auto GW = vector_gradient(mid, W);
    const Eigen::MatrixX3d gf = tangential_gradient(mid, f_mid);

    double rhs = pairing(mid, f_mid, dg) + pairing(mid, df, g_mid);
    for (int t = 0; t < mid.n_triangles(); ++t) {
        Eigen::Vector3d gm = Eigen::Vector3d::Zero();
        for (int k = 0; k < 3; ++k) gm += g_mid.row(mid.triangles(t, k)) / 3.0;
        const Eigen::Vector3d gft = gf.row(t);
        rhs += mid.triangle_areas[t] *
               (divW[t] * gft.dot(gm) - gm.dot(GW[t].transpose() * gft));
    }
    return std::abs(lhs - rhs);
}

double check_transport_strain(const SurfaceMesh& prev, const SurfaceMesh& mid,
                              const SurfaceMesh& next,
                              const Eigen::VectorXd& eta_prev, const Eigen::VectorXd& eta_mid,
                              const Eigen::VectorXd& eta_next,
                              const Eigen::MatrixX3d& u_prev, const Eigen::MatrixX3d& u_mid,
                              const Eigen::MatrixX3d& u_next,
                              const Eigen::MatrixX3d& v_prev, const Eigen::MatrixX3d& v_mid,
                              const Eigen::MatrixX3d& v_next, double dt) {
    require_matching(prev, mid);
    require_matching(mid, next);
    auto pairing = [](const SurfaceMesh& m, const Eigen::VectorXd& eta,
                      const Eigen::MatrixX3d& u, const Eigen::MatrixX3d& v) {
        const auto Eu = rate_of_strain(m, u);
        const auto Ev = rate_of_strain(m, v);
        Eigen::VectorXd q(m.n_triangles());
        for (int t = 0; t < m.n_triangles(); ++t)
            q[t] = Eu[t].cwiseProduct(Ev[t]).sum();
        return weighted_triangle_sum(m, eta, q);
    };
    const double lhs = (pairing(next, eta_next, u_next, v_next) -
                        pairing(prev, eta_prev, u_prev, v_prev)) / (2.0 * dt);

    const Eigen::VectorXd deta = (eta_next - eta_prev) / (2.0 * dt);
    const Eigen::MatrixX3d du = (u_next - u_prev) / (2.0 * dt);
    const Eigen::MatrixX3d dv = (v_next - v_prev) / (2.0 * dt);
    const Eigen::MatrixX3d W = mesh_velocity(prev, next, dt);

    const auto Eu = rate_of_strain(mid, u_mid);
    const auto Ev = rate_of_strain(mid, v_mid);
    const auto Edu = rate_of_strain(mid, du);
    const auto Edv = rate_of_strain(mid, dv);
    const auto Gu = vector_gradient(mid, u_mid);
    const auto Gv = vector_gradient(mid, v_mid);
    const auto GW = vector_gradient(mid, W);
    const Eigen::VectorXd divW = divergence(mid, W);

    Eigen::VectorXd q = Eigen::VectorXd::Zero(mid.n_triangles());
    Eigen::VectorXd qd = Eigen::VectorXd::Zero(mid.n_triangles());
    for (int t = 0; t < mid.n_triangles(); ++t) {
        const Eigen::Vector3d n = mid.triangle_normals.row(t);
        const Eigen::Matrix3d N = n * n.transpose();
        const Eigen::Matrix3d NW = N * GW[t];
        const Eigen::Matrix3d SNW = 0.5 * (NW + NW.transpose());
        const Eigen::Matrix3d Ehu = 0.5 * (Gu[t] + Gu[t].transpose());
        const Eigen::Matrix3d Ehv = 0.5 * (Gv[t] + Gv[t].transpose());
        const Eigen::Matrix3d GuGW = Gu[t] * GW[t];
        const Eigen::Matrix3d GvGW = Gv[t] * GW[t];
        const Eigen::Matrix3d SuW = 0.5 * (GuGW + GuGW.transpose());
        const Eigen::Matrix3d SvW = 0.5 * (GvGW + GvGW.transpose());

        double s = 0.0;
        s += (Edu[t].cwiseProduct(Ev[t]).sum() + Eu[t].cwiseProduct(Edv[t]).sum());
        s += 2.0 * (SNW * Ehu).cwiseProduct(Ev[t]).sum();
        s += 2.0 * (Ehu * SNW).cwiseProduct(Ev[t]).sum();
        s += 2.0 * Eu[t].cwiseProduct(SNW * Ehv).sum();
        s += 2.0 * Eu[t].cwiseProduct(Ehv * SNW).sum();
        s -= SuW.cwiseProduct(Ev[t]).sum();
        s -= Eu[t].cwiseProduct(SvW).sum();
        s += divW[t] * Eu[t].cwiseProduct(Ev[t]).sum();
        q[t] = s;
        qd[t] = Eu[t].cwiseProduct(Ev[t]).sum();
    }
    const double rhs = weighted_triangle_sum(mid, eta_mid, q) +
                       weighted_triangle_sum(mid, deta, qd);
    return std::abs(lhs - rhs);
}

} // namespace surfphase
