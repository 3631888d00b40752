#include "surfphase/material.hpp"
#include "surfphase/errors.hpp"

#include <algorithm>
#include <cmath>

namespace surfphase {

void MaterialParams::validate() const {
    if (!(theta > 0.0)) throw ParameterError("theta must be positive");
    if (!(theta0 > 0.0)) throw ParameterError("theta0 must be positive");
    if (!(rho1_tilde > 0.0) || !(rho2_tilde > 0.0))
        throw ParameterError("specific densities must be positive");
    if (!(nu1 > 0.0) || !(nu2 > 0.0))
        throw ParameterError("viscosities must be positive");
    if (!(eps_guard > 0.0) || eps_guard > 1e-6)
        throw ParameterError("eps_guard must lie in (0, 1e-6]");
}

namespace {
double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }
} // namespace

double MaterialParams::F(double s) const {
    if (s < -1.0 || s > 1.0)
        throw ParameterError("free energy argument outside [-1, 1]");
    return 0.5 * theta * (xlogx(1.0 + s) + xlogx(1.0 - s));
}

double MaterialParams::dF(double s) const {
    if (std::abs(s) >= 1.0)
        throw ParameterError("free energy derivative is singular at |s| >= 1");
    return 0.5 * theta * std::log((1.0 + s) / (1.0 - s));
}

double MaterialParams::d2F(double s) const {
    if (std::abs(s) >= 1.0)
        throw ParameterError("free energy derivative is singular at |s| >= 1");
    return theta / (1.0 - s * s);
}

double MaterialParams::Psi(double s) const { return F(s) - 0.5 * theta0 * s * s; }
double MaterialParams::dPsi(double s) const { return dF(s) - theta0 * s; }
double MaterialParams::d2Psi(double s) const { return d2F(s) - theta0; }

double MaterialParams::viscosity(double s) const {
    const double c = std::clamp(s, -1.0, 1.0);
    return nu1 * (1.0 + c) / 2.0 + nu2 * (1.0 - c) / 2.0;
}

double MaterialParams::density(double s) const {
    const double c = std::clamp(s, -1.0, 1.0);
    return (rho1_tilde + rho2_tilde) / 2.0 + (rho1_tilde - rho2_tilde) / 2.0 * c;
}

} // namespace surfphase
