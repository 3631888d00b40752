#pragma once

namespace surfphase {

/// Constitutive parameters: logarithmic free energy F with temperature
/// `theta`, concave quadratic split coefficient `theta0`, specific densities
/// and viscosities of the two phases, and the Newton guard band that keeps
/// phase iterates strictly inside (-1, 1).
///
/// Conventions: phase +1 is fluid 1, so density(1) = rho1_tilde and
/// viscosity(1) = nu1; the diffusive mass flux is
/// J_rho = flux_coefficient() * grad(mu) with flux_coefficient =
/// -(rho1_tilde - rho2_tilde)/2.  Mobility is fixed at one.
struct MaterialParams {
    double theta = 0.8;
    double theta0 = 1.6;
    double rho1_tilde = 1.0;
    double rho2_tilde = 3.0;
    double nu1 = 1.0;
    double nu2 = 2.0;
    double eps_guard = 1e-9;

    /// Throws ParameterError on non-positive parameters or a guard band
    /// outside (0, 1e-6].  theta < theta0 is required by the energy split
    /// and is enforced at config parsing; direct construction permits
    /// theta0 <= theta for contraction experiments.
    void validate() const;

    double nu_min() const { return nu1 < nu2 ? nu1 : nu2; }
    double rho_min() const { return rho1_tilde < rho2_tilde ? rho1_tilde : rho2_tilde; }
    double rho_max() const { return rho1_tilde > rho2_tilde ? rho1_tilde : rho2_tilde; }

    /// Logarithmic free energy F(s) = (theta/2)[(1+s)ln(1+s) + (1-s)ln(1-s)]
    /// on [-1, 1] (endpoint limits theta*ln2) and its derivatives on (-1, 1).
    /// Derivatives throw ParameterError at |s| >= 1; no clamping.
    double F(double s) const;
    double dF(double s) const;
    double d2F(double s) const;

    /// Psi(s) = F(s) - (theta0/2) s^2 and derivatives.
    double Psi(double s) const;
    double dPsi(double s) const;
    double d2Psi(double s) const;

    /// Affine closures evaluated on s clamped to [-1, 1], so
    /// viscosity >= min(nu1, nu2) and density in [rho_min, rho_max] always.
    double viscosity(double s) const;
    double density(double s) const;
    double flux_coefficient() const { return -(rho1_tilde - rho2_tilde) / 2.0; }
};

} // namespace surfphase
