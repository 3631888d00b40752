#include "surfphase/mesh.hpp"
#include "surfphase/errors.hpp"
#include "surfphase/operators.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <map>
#include <utility>

namespace surfphase {

Eigen::VectorXd SurfaceMesh::lumped_vertex_areas() const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n_vertices());
    for (int f = 0; f < n_triangles(); ++f)
        for (int k = 0; k < 3; ++k)
            a[triangles(f, k)] += triangle_areas[f] / 3.0;
    return a;
}

void validate_connectivity(const SurfaceMesh& mesh) {
    const int nv = mesh.n_vertices();
    std::map<std::pair<int, int>, int> edge_count;
    for (int f = 0; f < mesh.n_triangles(); ++f) {
        const auto tri = mesh.triangles.row(f);
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw GeometryError("triangle " + std::to_string(f) + " has repeated vertices");
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k], b = tri[(k + 1) % 3];
            if (a < 0 || a >= nv || b < 0 || b >= nv)
                throw GeometryError("triangle " + std::to_string(f) + " has out-of-range vertex index");
            edge_count[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    for (const auto& [edge, count] : edge_count)
        if (count != 2)
            throw GeometryError("edge (" + std::to_string(edge.first) + "," +
                                std::to_string(edge.second) + ") shared by " +
                                std::to_string(count) + " triangles; mesh must be closed");
}

namespace {

void compute_face_geometry(SurfaceMesh& mesh) {
    const int nf = mesh.n_triangles();
    mesh.triangle_areas.resize(nf);
    mesh.triangle_normals.resize(nf, 3);
    double mean_area = 0.0;
    for (int f = 0; f < nf; ++f) {
        const Eigen::Vector3d a = mesh.vertex_positions.row(mesh.triangles(f, 0));
        const Eigen::Vector3d b = mesh.vertex_positions.row(mesh.triangles(f, 1));
        const Eigen::Vector3d c = mesh.vertex_positions.row(mesh.triangles(f, 2));
        const Eigen::Vector3d cr = (b - a).cross(c - a);
        const double area2 = cr.norm();
        mesh.triangle_areas[f] = 0.5 * area2;
        mesh.triangle_normals.row(f) = (area2 > 0.0 ? (cr / area2).eval() : Eigen::Vector3d::Zero().eval());
        mean_area += mesh.triangle_areas[f];
    }
    mean_area /= nf;
    for (int f = 0; f < nf; ++f)
        if (mesh.triangle_areas[f] < 1e-14 * mean_area)
            throw GeometryError("degenerate triangle " + std::to_string(f) +
                                " (area " + std::to_string(mesh.triangle_areas[f]) + ")");
}

void compute_vertex_normals(SurfaceMesh& mesh) {
    const int nv = mesh.n_vertices();
    mesh.vertex_normals = Eigen::MatrixX3d::Zero(nv, 3);
    for (int f = 0; f < mesh.n_triangles(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int i = mesh.triangles(f, k);
            const Eigen::Vector3d p = mesh.vertex_positions.row(i);
            const Eigen::Vector3d q = mesh.vertex_positions.row(mesh.triangles(f, (k + 1) % 3));
            const Eigen::Vector3d r = mesh.vertex_positions.row(mesh.triangles(f, (k + 2) % 3));
            Eigen::Vector3d e1 = (q - p).normalized();
            Eigen::Vector3d e2 = (r - p).normalized();
            const double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
            mesh.vertex_normals.row(i) += angle * mesh.triangle_normals.row(f);
        }
    }
    for (int i = 0; i < nv; ++i) {
        const double n = mesh.vertex_normals.row(i).norm();
        if (n == 0.0)
            throw GeometryError("vertex " + std::to_string(i) + " has zero normal");
        mesh.vertex_normals.row(i) /= n;
    }
}

// H from the cotangent formula: (K x)_i ~ int H n chi_i = A_i H_i n_i, with
// A_i the mixed Voronoi vertex area.  The barycentric lumped area works too
// but loses pointwise accuracy near irregular (valence != 6) vertices.
void compute_mean_curvature(SurfaceMesh& mesh) {
    const int nv = mesh.n_vertices();
    Eigen::VectorXd area = Eigen::VectorXd::Zero(nv);
    for (int f = 0; f < mesh.n_triangles(); ++f) {
        Eigen::Vector3d p[3];
        for (int k = 0; k < 3; ++k) p[k] = mesh.vertex_positions.row(mesh.triangles(f, k));
        double cot[3];
        bool obtuse = false;
        for (int k = 0; k < 3; ++k) {
            const Eigen::Vector3d u = p[(k + 1) % 3] - p[k];
            const Eigen::Vector3d w = p[(k + 2) % 3] - p[k];
            cot[k] = u.dot(w) / u.cross(w).norm();
            if (cot[k] < 0.0) obtuse = true;
        }
        if (obtuse) {
            // mixed-area fallback: half at the obtuse corner, quarter elsewhere
            for (int k = 0; k < 3; ++k)
                area[mesh.triangles(f, k)] +=
                    mesh.triangle_areas[f] * (cot[k] < 0.0 ? 0.5 : 0.25);
        } else {
            for (int k = 0; k < 3; ++k) {
                const double e2 = (p[(k + 1) % 3] - p[(k + 2) % 3]).squaredNorm();
                area[mesh.triangles(f, (k + 1) % 3)] += cot[k] * e2 / 8.0;
                area[mesh.triangles(f, (k + 2) % 3)] += cot[k] * e2 / 8.0;
            }
        }
    }
    const Eigen::SparseMatrix<double> K = stiffness_matrix(mesh).matrix;
    const Eigen::MatrixX3d KX = K * mesh.vertex_positions;
    mesh.vertex_mean_curvature.resize(nv);
    for (int i = 0; i < nv; ++i)
        mesh.vertex_mean_curvature[i] = KX.row(i).dot(mesh.vertex_normals.row(i)) / area[i];
}

// Tangential least-squares fit of per-edge normal differences, symmetrized,
// projected, and trace-matched to the cotangent H.
void compute_shape_operator(SurfaceMesh& mesh) {
    const int nv = mesh.n_vertices();
    std::vector<Eigen::Matrix3d> lhs(nv, Eigen::Matrix3d::Zero());
    std::vector<Eigen::Matrix3d> rhs(nv, Eigen::Matrix3d::Zero());
    for (int f = 0; f < mesh.n_triangles(); ++f) {
        for (int k = 0; k < 3; ++k) {
            const int i = mesh.triangles(f, k);
            const int j = mesh.triangles(f, (k + 1) % 3);
            // each directed edge visited once per incident triangle
            const Eigen::Vector3d ni = mesh.vertex_normals.row(i);
            const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - ni * ni.transpose();
            const Eigen::Vector3d e = P * (mesh.vertex_positions.row(j) - mesh.vertex_positions.row(i)).transpose();
            const Eigen::Vector3d dn = P * (mesh.vertex_normals.row(j) - mesh.vertex_normals.row(i)).transpose();
            lhs[i] += e * e.transpose();
            rhs[i] += dn * e.transpose();
        }
    }
    mesh.vertex_shape_operator.assign(nv, Eigen::Matrix3d::Zero());
    for (int i = 0; i < nv; ++i) {
        const Eigen::Vector3d ni = mesh.vertex_normals.row(i);
        const Eigen::Matrix3d P = Eigen::Matrix3d::Identity() - ni * ni.transpose();
        // regularize along the normal; does not affect the tangential fit
        const double scale = lhs[i].trace() > 0.0 ? lhs[i].trace() : 1.0;
        const Eigen::Matrix3d A = rhs[i] * (lhs[i] + scale * ni * ni.transpose()).inverse();
        Eigen::Matrix3d S = P * 0.5 * (A + A.transpose()) * P;
        S += 0.5 * (mesh.vertex_mean_curvature[i] - S.trace()) * P;
        mesh.vertex_shape_operator[i] = 0.5 * (S + S.transpose());
    }
}

} // namespace

SurfaceMesh recover_geometry(const SurfaceMesh& mesh) {
    SurfaceMesh out = mesh;
    validate_connectivity(out);
    compute_face_geometry(out);
    compute_vertex_normals(out);
    compute_mean_curvature(out);
    compute_shape_operator(out);
    return out;
}

double surface_area(const SurfaceMesh& mesh) { return mesh.triangle_areas.sum(); }

double volume_enclosed(const SurfaceMesh& mesh) {
    double vol = 0.0;
    for (int f = 0; f < mesh.n_triangles(); ++f) {
        const Eigen::Vector3d a = mesh.vertex_positions.row(mesh.triangles(f, 0));
        const Eigen::Vector3d b = mesh.vertex_positions.row(mesh.triangles(f, 1));
        const Eigen::Vector3d c = mesh.vertex_positions.row(mesh.triangles(f, 2));
        vol += a.dot(b.cross(c)) / 6.0;
    }
    return vol;
}

double mean_edge_length(const SurfaceMesh& mesh) {
    double sum = 0.0;
    int count = 0;
    for (int f = 0; f < mesh.n_triangles(); ++f)
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.triangles(f, k), b = mesh.triangles(f, (k + 1) % 3);
            if (a < b) {
                sum += (mesh.vertex_positions.row(a) - mesh.vertex_positions.row(b)).norm();
                ++count;
            }
        }
    return sum / count;
}

SurfaceMesh build_icosphere(int subdivision_level, double radius) {
    if (subdivision_level < 0 || subdivision_level > 8)
        throw ParameterError("icosphere subdivision level must be in [0, 8], got " +
                             std::to_string(subdivision_level));
    if (!(radius > 0.0))
        throw ParameterError("icosphere radius must be positive");

    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> verts = {
        {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
    std::vector<Eigen::Vector3i> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    for (auto& v : verts) v = radius * v.normalized();

    for (int lvl = 0; lvl < subdivision_level; ++lvl) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::make_pair(std::min(a, b), std::max(a, b));
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Eigen::Vector3d m = radius * (verts[a] + verts[b]).normalized();
            verts.push_back(m);
            const int idx = static_cast<int>(verts.size()) - 1;
            midpoint[key] = idx;
            return idx;
        };
        std::vector<Eigen::Vector3i> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    SurfaceMesh mesh;
    mesh.vertex_positions.resize(static_cast<int>(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i) mesh.vertex_positions.row(static_cast<int>(i)) = verts[i];
    mesh.triangles.resize(static_cast<int>(faces.size()), 3);
    for (size_t f = 0; f < faces.size(); ++f) mesh.triangles.row(static_cast<int>(f)) = faces[f];
    return recover_geometry(mesh);
}

Eigen::VectorXd project_compatible(const SurfaceMesh& mesh, const Eigen::VectorXd& vn_samples) {
    const Eigen::VectorXd a = mesh.lumped_vertex_areas();
    const Eigen::VectorXd& H = mesh.vertex_mean_curvature;
    const double hh = (a.array() * H.array().square()).sum();
    if (hh < 1e-14)
        throw GeometryError("surface has (numerically) vanishing mean curvature; "
                            "compatibility projection undefined");
    const double hv = (a.array() * H.array() * vn_samples.array()).sum();
    return vn_samples - (hv / hh) * H;
}

SurfaceMesh evolve_step(const SurfaceMesh& mesh, const NormalVelocity& vn,
                        double t, double dt, bool project_compat) {
    if (!(dt > 0.0)) throw ParameterError("evolve_step requires dt > 0");
    const int nv = mesh.n_vertices();

    auto sample = [&](const SurfaceMesh& m, double time) {
        Eigen::VectorXd s(nv);
        for (int i = 0; i < nv; ++i) {
            s[i] = vn(m.vertex_positions.row(i), time);
            if (!std::isfinite(s[i]))
                throw Error("non-finite normal velocity at vertex " + std::to_string(i));
        }
        return project_compat ? project_compatible(m, s) : s;
    };

    const Eigen::VectorXd s1 = sample(mesh, t);
    Eigen::MatrixX3d k1(nv, 3);
    for (int i = 0; i < nv; ++i) k1.row(i) = s1[i] * mesh.vertex_normals.row(i);

    SurfaceMesh stage = mesh;
    stage.vertex_positions = mesh.vertex_positions + dt * k1;
    stage = recover_geometry(stage);

    const Eigen::VectorXd s2 = sample(stage, t + dt);
    Eigen::MatrixX3d k2(nv, 3);
    for (int i = 0; i < nv; ++i) k2.row(i) = s2[i] * stage.vertex_normals.row(i);

    SurfaceMesh out = mesh;
    out.vertex_positions = mesh.vertex_positions + (0.5 * dt) * (k1 + k2);
    if (!out.vertex_positions.allFinite())
        throw Error("surface evolution produced non-finite vertex positions");
    return recover_geometry(out);
}

const SurfaceMesh& EvolvingSurface::at(double t) const {
    auto it = snapshots.lower_bound(t - 1e-12);
    if (it == snapshots.end() || std::abs(it->first - t) > 1e-9)
        throw ParameterError("no surface snapshot at t = " + std::to_string(t));
    return it->second;
}

EvolvingSurface evolve_surface(const SurfaceMesh& initial, const NormalVelocity& vn,
                               double time_horizon, double dt, bool project_compat) {
    EvolvingSurface surf;
    surf.initial_mesh = initial;
    surf.normal_velocity = vn;
    surf.time_horizon = time_horizon;
    surf.snapshots[0.0] = initial;
    SurfaceMesh current = initial;
    double t = 0.0;
    int step = 0;
    while (t < time_horizon - 1e-12) {
        const double step_dt = std::min(dt, time_horizon - t);
        current = evolve_step(current, vn, t, step_dt, project_compat);
        ++step;
        t = (step_dt == dt) ? step * dt : time_horizon;
        surf.snapshots[t] = current;
    }
    return surf;
}

} // namespace surfphase
