#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "surfphase/mesh.hpp"
#include "surfphase/transport.hpp"

#include <cmath>
#include <functional>

using namespace surfphase;

namespace {

using Scalar = std::function<double(const Eigen::Vector3d&, double)>;
using Vector = std::function<Eigen::Vector3d(const Eigen::Vector3d&, double)>;

Eigen::VectorXd sample(const SurfaceMesh& m, const Scalar& f, double t) {
    Eigen::VectorXd out(m.n_vertices());
    for (int i = 0; i < m.n_vertices(); ++i) out[i] = f(m.vertex_positions.row(i), t);
    return out;
}

Eigen::MatrixX3d sample(const SurfaceMesh& m, const Vector& f, double t) {
    Eigen::MatrixX3d out(m.n_vertices(), 3);
    for (int i = 0; i < m.n_vertices(); ++i) out.row(i) = f(m.vertex_positions.row(i), t);
    return out;
}

struct Snapshots {
    SurfaceMesh prev, mid, next;
    double t, dt;
};

Snapshots oscillating_sphere(int level, double t, double dt) {
    const auto vn = [](const Eigen::Vector3d& x, double s) {
        return 0.25 * std::cos(3.0 * s) * x.z();
    };
    SurfaceMesh m = build_icosphere(level, 1.0);
    // march to t - dt, then capture three consecutive snapshots
    const int warm = 4;
    const double wdt = (t - dt) / warm;
    double s = 0.0;
    for (int k = 0; k < warm; ++k, s += wdt) m = evolve_step(m, vn, s, wdt);
    Snapshots snaps;
    snaps.prev = m;
    snaps.mid = evolve_step(m, vn, t - dt, dt);
    snaps.next = evolve_step(snaps.mid, vn, t, dt);
    snaps.t = t;
    snaps.dt = dt;
    return snaps;
}

const Scalar eta_fn = [](const Eigen::Vector3d& x, double t) {
    return std::sin(x.x() + 0.7 * t) + 0.3 * x.y() * x.z();
};
const Scalar phi_fn = [](const Eigen::Vector3d& x, double t) {
    return std::cos(2.0 * x.z()) + 0.5 * x.x() * std::sin(t);
};
const Vector u_fn = [](const Eigen::Vector3d& x, double t) {
    return Eigen::Vector3d(std::sin(x.y() + t), x.z() * x.x(), std::cos(x.x()));
};
const Vector w_fn = [](const Eigen::Vector3d& x, double t) {
    return Eigen::Vector3d(x.y() * std::cos(t), std::sin(x.z()), 0.4 * x.x() * x.y());
};

} // namespace

TEST_CASE("stationary surface with constant fields has zero residual") {
    const SurfaceMesh m = build_icosphere(2, 1.0);
    const Eigen::VectorXd eta = Eigen::VectorXd::Constant(m.n_vertices(), 1.3);
    const Eigen::VectorXd phi = Eigen::VectorXd::Constant(m.n_vertices(), -0.4);
    CHECK(check_transport_identity(m, m, m, eta, eta, eta, phi, phi, phi, 1e-2) <= 1e-12);
    CHECK(check_transport_gradient(m, m, m, eta, eta, eta, phi, phi, phi, 1e-2) <= 1e-12);
}

TEST_CASE("area derivative identity on the oscillating sphere") {
    // eta = phi = 1 reduces the identity to d/dt area = int div(W)
    const auto s = oscillating_sphere(3, 0.2, 1e-3);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.mid.n_vertices());
    const double res = check_transport_identity(s.prev, s.mid, s.next, ones, ones, ones,
                                                ones, ones, ones, s.dt);
    CHECK(res <= 1e-6);
}

TEST_CASE("product rule identity: dt-order two") {
    const auto coarse = oscillating_sphere(3, 0.2, 2e-3);
    const auto fine = oscillating_sphere(3, 0.2, 1e-3);
    double r[2];
    for (int k = 0; k < 2; ++k) {
        const auto& s = k == 0 ? coarse : fine;
        r[k] = check_transport_identity(
            s.prev, s.mid, s.next, sample(s.prev, eta_fn, s.t - s.dt),
            sample(s.mid, eta_fn, s.t), sample(s.next, eta_fn, s.t + s.dt),
            sample(s.prev, phi_fn, s.t - s.dt), sample(s.mid, phi_fn, s.t),
            sample(s.next, phi_fn, s.t + s.dt), s.dt);
    }
    CHECK(r[0] / r[1] >= 3.0); // ~4x for a second-order residual
}

TEST_CASE("gradient identity: dt-order two") {
    double r[2];
    int k = 0;
    for (double dt : {2e-3, 1e-3}) {
        const auto s = oscillating_sphere(3, 0.2, dt);
        r[k++] = check_transport_gradient(
            s.prev, s.mid, s.next, sample(s.prev, eta_fn, s.t - s.dt),
            sample(s.mid, eta_fn, s.t), sample(s.next, eta_fn, s.t + s.dt),
            sample(s.prev, phi_fn, s.t - s.dt), sample(s.mid, phi_fn, s.t),
            sample(s.next, phi_fn, s.t + s.dt), s.dt);
    }
    CHECK(r[0] / r[1] >= 3.0);
}

TEST_CASE("mixed identity: h-order two at fixed dt") {
    // the mixed identity residual is dominated by the O(h^2) geometric
    // consistency error; refine the mesh at fixed dt and expect ~4x decay
    auto tang = [](const SurfaceMesh& m, const Eigen::MatrixX3d& g) {
        Eigen::MatrixX3d out = g;
        for (int i = 0; i < m.n_vertices(); ++i) {
            const Eigen::Vector3d n = m.vertex_normals.row(i);
            out.row(i) -= out.row(i).dot(n) * n.transpose();
        }
        return out;
    };
    double r[3];
    int k = 0;
    for (int level : {3, 4, 5}) {
        const auto s = oscillating_sphere(level, 0.2, 1e-3);
        r[k++] = check_transport_mixed(
            s.prev, s.mid, s.next, sample(s.prev, phi_fn, s.t - s.dt),
            sample(s.mid, phi_fn, s.t), sample(s.next, phi_fn, s.t + s.dt),
            tang(s.prev, sample(s.prev, u_fn, s.t - s.dt)),
            tang(s.mid, sample(s.mid, u_fn, s.t)),
            tang(s.next, sample(s.next, u_fn, s.t + s.dt)), s.dt);
    }
    CHECK(r[0] / r[1] >= 3.3);
    CHECK(r[1] / r[2] >= 3.3);
}

TEST_CASE("strain identity: dt-order two") {
    // here the O(h^2) geometric terms are far below the central-difference
    // error, so the residual follows dt^2 cleanly
    double r[3];
    int k = 0;
    for (double dt : {4e-3, 2e-3, 1e-3}) {
        const auto s = oscillating_sphere(3, 0.2, dt);
        r[k++] = check_transport_strain(
            s.prev, s.mid, s.next, sample(s.prev, eta_fn, s.t - s.dt),
            sample(s.mid, eta_fn, s.t), sample(s.next, eta_fn, s.t + s.dt),
            sample(s.prev, u_fn, s.t - s.dt), sample(s.mid, u_fn, s.t),
            sample(s.next, u_fn, s.t + s.dt), sample(s.prev, w_fn, s.t - s.dt),
            sample(s.mid, w_fn, s.t), sample(s.next, w_fn, s.t + s.dt), s.dt);
    }
    CHECK(r[0] / r[1] >= 3.5);
    CHECK(r[1] / r[2] >= 3.5);
    CHECK(r[2] <= 1e-5);
}

TEST_CASE("connectivity mismatch is rejected") {
    const SurfaceMesh a = build_icosphere(2, 1.0);
    const SurfaceMesh b = build_icosphere(3, 1.0);
    const Eigen::VectorXd fa = Eigen::VectorXd::Zero(a.n_vertices());
    const Eigen::VectorXd fb = Eigen::VectorXd::Zero(b.n_vertices());
    CHECK_THROWS(check_transport_identity(a, a, b, fa, fa, fb, fa, fa, fb, 1e-2));
}
