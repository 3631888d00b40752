#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <functional>
#include <map>
#include <vector>

namespace surfphase {

/// Closed, edge-manifold triangulated 2-surface embedded in R^3 together
/// with recovered first- and second-order geometry at the vertices.
///
/// Triangles are oriented counterclockwise with respect to the outward
/// normal; with that convention the mean curvature H (trace of the
/// Weingarten map) is +2/r on a sphere of radius r.
struct SurfaceMesh {
    Eigen::MatrixX3d vertex_positions;
    Eigen::MatrixX3i triangles;

    // Recovered geometry (filled by recover_geometry).
    Eigen::MatrixX3d vertex_normals;        ///< unit outward normals
    Eigen::VectorXd triangle_areas;
    Eigen::MatrixX3d triangle_normals;      ///< unit, per triangle
    Eigen::VectorXd vertex_mean_curvature;  ///< H = tr(shape operator)
    std::vector<Eigen::Matrix3d> vertex_shape_operator; ///< symmetric, S n = 0

    int n_vertices() const { return static_cast<int>(vertex_positions.rows()); }
    int n_triangles() const { return static_cast<int>(triangles.rows()); }

    /// Barycentric lumped vertex areas (one third of incident triangle areas).
    Eigen::VectorXd lumped_vertex_areas() const;
};

/// Normal-velocity law v_n(x, t), in length per unit time.
using NormalVelocity = std::function<double(const Eigen::Vector3d&, double)>;

/// Subdivided icosahedron projected to a sphere of the given radius.
/// Vertex count is 10*4^level + 2.  Throws ParameterError for level
/// outside [0, 8] or non-positive radius.
SurfaceMesh build_icosphere(int subdivision_level, double radius);

/// Recomputes areas, normals, mean curvature and the shape operator from
/// positions and connectivity.  Normals are angle-weighted averages of
/// incident triangle normals; H comes from the cotangent Laplacian applied
/// to the coordinates (Delta_Gamma x = -H n); the shape operator is a
/// tangential least-squares fit of per-edge normal differences, symmetrized
/// and trace-matched to H.  Throws GeometryError on degenerate triangles.
SurfaceMesh recover_geometry(const SurfaceMesh& mesh);

/// Validates connectivity: index ranges, distinct vertices per triangle,
/// closed edge-manifold (every edge in exactly two triangles).  Throws
/// GeometryError otherwise.
void validate_connectivity(const SurfaceMesh& mesh);

double surface_area(const SurfaceMesh& mesh);

/// Signed enclosed volume by the divergence theorem (positive for outward
/// orientation).
double volume_enclosed(const SurfaceMesh& mesh);

/// Mean edge length; the resolution parameter h used in stabilization
/// weights and convergence reporting.
double mean_edge_length(const SurfaceMesh& mesh);

/// Removes the H-component of a sampled normal velocity so the discrete
/// compatibility integral int H v_n dsigma vanishes:
///   v_n' = v_n - c H,  c = (int H v_n) / (int H^2).
/// Throws GeometryError when int H^2 is below 1e-14 (surface cannot be
/// made compatible this way).  Idempotent.
Eigen::VectorXd project_compatible(const SurfaceMesh& mesh,
                                   const Eigen::VectorXd& vn_samples);

/// One Heun step of the normal flow x' = v_n(x,t) n(x), with geometry
/// recovery between stages.  The sampled v_n is compatibility-projected at
/// each stage when project_compat is true.  Connectivity is unchanged.
SurfaceMesh evolve_step(const SurfaceMesh& mesh, const NormalVelocity& vn,
                        double t, double dt, bool project_compat = true);

/// A prescribed normal evolution: the initial surface plus the family of
/// vertex-tracked snapshots generated by repeated Heun steps.
struct EvolvingSurface {
    SurfaceMesh initial_mesh;
    NormalVelocity normal_velocity;
    double time_horizon = 0.0;
    std::map<double, SurfaceMesh> snapshots;

    const SurfaceMesh& at(double t) const;
};

/// Integrates the normal flow from t = 0 to time_horizon with fixed step dt,
/// storing every snapshot (including t = 0).
EvolvingSurface evolve_surface(const SurfaceMesh& initial, const NormalVelocity& vn,
                               double time_horizon, double dt,
                               bool project_compat = true);

} // namespace surfphase
