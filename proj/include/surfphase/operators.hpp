#pragma once

#include "surfphase/fields.hpp"
#include "surfphase/mesh.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace surfphase {

/// Sparse matrix with its dimensions and a symmetry promise.  The promise is
/// checked at construction: max |A - A^T| <= 1e-12 * max |A| entrywise.
struct SparseOperator {
    int rows = 0;
    int cols = 0;
    Eigen::SparseMatrix<double> matrix;
    bool symmetric = false;

    SparseOperator() = default;
    SparseOperator(Eigen::SparseMatrix<double> m, bool symmetric_flag);
};

/// P1 shape-function gradients of one triangle, row i = grad chi_i (in the
/// triangle plane).
Eigen::Matrix3d p1_shape_gradients(const SurfaceMesh& mesh, int triangle);

/// Consistent P1 mass matrix (exact vertex-pair quadrature, A/12 weights).
SparseOperator mass_matrix(const SurfaceMesh& mesh);

/// Diagonal (barycentric lumped) mass matrix.
SparseOperator lumped_mass_matrix(const SurfaceMesh& mesh);

/// Cotangent stiffness matrix; symmetric positive semi-definite with the
/// constants as kernel on a connected closed mesh.
SparseOperator stiffness_matrix(const SurfaceMesh& mesh);

/// Per-triangle P1 gradient of a nodal scalar field; each row lies in the
/// plane of its triangle.
Eigen::MatrixX3d tangential_gradient(const SurfaceMesh& mesh, const Eigen::VectorXd& f);

/// Per-triangle full P1 derivative of a nodal 3-vector field:
/// G(f)_{ab} = d_b v_a within the triangle plane (columns already tangential,
/// rows are ambient components).  The tangential gradient is G * P, the
/// tangential divergence tr(G * P) and the strain P sym(G) P.
std::vector<Eigen::Matrix3d> vector_gradient(const SurfaceMesh& mesh,
                                             const Eigen::MatrixX3d& v);

/// Per-triangle rate-of-strain tensors E(v) = P sym(G) P (P applied last,
/// so P E P = E to roundoff).
std::vector<Eigen::Matrix3d> rate_of_strain(const SurfaceMesh& mesh,
                                            const Eigen::MatrixX3d& v);

/// Per-triangle tangential divergence tr(G P).
Eigen::VectorXd divergence(const SurfaceMesh& mesh, const Eigen::MatrixX3d& v);

/// Skew-consistent, exactly mass-conservative convection operator for the
/// weak form of v . grad(phi) on a surface moving with normal speed vn:
///   C = 1/2 (B - B^T) - 1/2 S(H vn) + skew rank-one closure,
/// where B_ij = int chi_i (v . grad chi_j) and S is the mass matrix weighted
/// by the nodal H*vn.  The closure (g 1^T - 1 g^T)/N cancels the column sums
/// up to the lumped-quadrature mean of H*vn, so after compatibility
/// projection 1^T C = 0 to roundoff while C stays exactly skew.
SparseOperator convection_matrix(const SurfaceMesh& mesh, const Eigen::MatrixX3d& v,
                                 const Eigen::VectorXd& vn_samples);

/// Nodal capillary force f defined by the exact pairing
///   sum_i f_i . v_i = mu^T C0(v) phi   for every nodal velocity v,
/// where C0(v) is the v-dependent part of convection_matrix (skew transport
/// plus edge closure).  Using this force in the momentum equation makes the
/// capillary work cancel the phase-convection energy term to roundoff.
/// Consistent with mu grad(phi) up to a discrete gradient (a pressure shift).
Eigen::MatrixX3d korteweg_pairing_force(const SurfaceMesh& mesh,
                                        const Eigen::VectorXd& phi,
                                        const Eigen::VectorXd& mu);

/// Mass matrix weighted by a nodal coefficient: W_ij = int chi_i chi_j w_h,
/// assembled exactly for the P1 interpolant w_h.
SparseOperator weighted_mass_matrix(const SurfaceMesh& mesh, const Eigen::VectorXd& w);

/// Solves K u = M rhs with mean-zero gauge by diagonally preconditioned
/// conjugate gradients (relative residual 1e-11, at most 20 sqrt(dof)
/// iterations; a stalled recurrence is accepted at 1e-9).  Requires a
/// compatible right-hand side: |int rhs| <= 1e-10 * int |rhs|.
Eigen::VectorXd solve_poisson_mean_zero(const SurfaceMesh& mesh, const Eigen::VectorXd& rhs);

/// H^{-1}-type norm sqrt(f^T M N f) where N is the mean-zero inverse
/// Laplacian; the (lumped) mean of f is projected out first.
double hsharp_norm(const SurfaceMesh& mesh, const Eigen::VectorXd& f);

/// Smallest `count` generalized eigenvalues of K u = lambda M u in
/// ascending order (the first is ~0, the constants).  Shift-inverted
/// subspace iteration with a sparse Cholesky factorization.
Eigen::VectorXd laplace_beltrami_eigenvalues(const SurfaceMesh& mesh, int count);

/// Quadrature helpers over the consistent P1 spaces.
double integrate(const SurfaceMesh& mesh, const Eigen::VectorXd& nodal);   // int f_h dsigma
double l2_norm(const SurfaceMesh& mesh, const Eigen::VectorXd& nodal);     // ||f_h||_{L2}
double l2_norm(const SurfaceMesh& mesh, const Eigen::MatrixX3d& nodal);    // vector fields
double h1_seminorm(const SurfaceMesh& mesh, const Eigen::VectorXd& nodal); // ||grad f_h||
/// L2 norm of a piecewise-constant per-triangle tensor (e.g. strain).
double l2_norm_triangles(const SurfaceMesh& mesh, const std::vector<Eigen::Matrix3d>& q);
double l2_norm_triangles(const SurfaceMesh& mesh, const Eigen::VectorXd& q);

} // namespace surfphase
