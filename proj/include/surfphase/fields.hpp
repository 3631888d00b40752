#pragma once

#include "surfphase/errors.hpp"

#include <Eigen/Core>

namespace surfphase {

/// Nodal scalar field on a mesh snapshot.
struct ScalarField {
    double time = 0.0;
    Eigen::VectorXd values;

    ScalarField() = default;
    ScalarField(double t, Eigen::VectorXd v) : time(t), values(std::move(v)) {
        if (!values.allFinite()) throw Error("scalar field has non-finite entries");
    }
    int size() const { return static_cast<int>(values.size()); }
};

/// Nodal 3-vector field on a mesh snapshot.  When `tangential` is set the
/// creator asserts |v_i . n_i| <= tol_n * |v_i| and records the tolerance.
struct VectorField {
    double time = 0.0;
    Eigen::MatrixX3d values;
    bool tangential = false;
    double tol_n = 0.0;

    VectorField() = default;
    VectorField(double t, Eigen::MatrixX3d v) : time(t), values(std::move(v)) {
        if (!values.allFinite()) throw Error("vector field has non-finite entries");
    }
    int size() const { return static_cast<int>(values.rows()); }
};

} // namespace surfphase
