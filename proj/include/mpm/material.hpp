#pragma once

#include "mpm/common.hpp"

#include <cmath>
#include <variant>

namespace mpm {

// Weakly compressible Newtonian fluid. Pressure comes from the artificial
// equation of state p = c^2 (rho - rho0). When `rate_form` is set the
// viscous term uses the strain rate d = D/dt instead of the increment D.
template <class T>
struct FluidParams {
    T rho0 = T(1000);
    T viscosity = T(0);
    T sound_speed = T(35);
    bool rate_form = false;

    void validate() const
    {
        if (!(rho0 > T(0)))
            throw ValidationError("fluid: rho0 must be positive");
        if (!(sound_speed > T(0)))
            throw ValidationError("fluid: sound_speed must be positive");
        if (viscosity < T(0))
            throw ValidationError("fluid: viscosity must be non-negative");
    }
};

template <class T>
struct DruckerPragerDerived {
    T q_phi, k_phi, q_psi, tau_P, alpha_P;
};

// q_phi = 6 sin(phi) / (sqrt(3) (3 + sin(phi))), and friends.
template <class T>
DruckerPragerDerived<T> dp_derived_params(T phi, T psi, T cohesion, T sigma_t)
{
    T s3 = std::sqrt(T(3));
    DruckerPragerDerived<T> d;
    d.q_phi = T(6) * std::sin(phi) / (s3 * (T(3) + std::sin(phi)));
    d.k_phi = T(6) * cohesion * std::cos(phi) / (s3 * (T(3) + std::sin(phi)));
    d.q_psi = T(6) * std::sin(psi) / (s3 * (T(3) + std::sin(psi)));
    d.tau_P = d.k_phi - d.q_phi * sigma_t;
    d.alpha_P = std::sqrt(T(1) + d.q_phi * d.q_phi) - d.q_phi;
    return d;
}

// Non-associated Drucker-Prager with tension cutoff. G is derived from
// (K, nu); the plasticity constants from (phi, psi, c, sigma_t).
template <class T>
struct DruckerPragerParams {
    T rho0 = T(2650);
    T K = T(7e5);
    T nu = T(0.3);
    T G = T(0);
    T phi = T(0);     // friction angle [rad]
    T psi = T(0);     // dilation angle [rad]
    T cohesion = T(0);
    T sigma_t = T(0); // tension cutoff [Pa]
    T q_phi = T(0), k_phi = T(0), q_psi = T(0), tau_P = T(0), alpha_P = T(0);

    static DruckerPragerParams make(T rho0, T K, T nu, T phi, T psi, T cohesion, T sigma_t)
    {
        DruckerPragerParams p;
        p.rho0 = rho0;
        p.K = K;
        p.nu = nu;
        p.G = T(3) * K * (T(1) - T(2) * nu) / (T(2) * (T(1) + nu));
        p.phi = phi;
        p.psi = psi;
        p.cohesion = cohesion;
        p.sigma_t = sigma_t;
        auto d = dp_derived_params(phi, psi, cohesion, sigma_t);
        p.q_phi = d.q_phi;
        p.k_phi = d.k_phi;
        p.q_psi = d.q_psi;
        p.tau_P = d.tau_P;
        p.alpha_P = d.alpha_P;
        p.validate();
        return p;
    }

    void validate() const
    {
        if (!(rho0 > T(0)))
            throw ValidationError("drucker_prager: rho0 must be positive");
        if (!(K > T(0)))
            throw ValidationError("drucker_prager: bulk modulus must be positive");
        if (!(nu >= T(0) && nu < T(0.5)))
            throw ValidationError("drucker_prager: poisson ratio must lie in [0, 0.5)");
        if (!(G > T(0)))
            throw ValidationError("drucker_prager: derived shear modulus must be positive");
        if (!(phi >= T(0) && phi < T(1.5707963267948966)))
            throw ValidationError("drucker_prager: friction angle must lie in [0, pi/2)");
        if (!(psi >= T(0) && psi <= phi))
            throw ValidationError("drucker_prager: dilation angle must lie in [0, phi]");
        if (cohesion < T(0) || sigma_t < T(0))
            throw ValidationError("drucker_prager: cohesion and tension cutoff must be non-negative");
        if (q_phi > T(0) && sigma_t > k_phi / q_phi)
            throw ValidationError("drucker_prager: tension cutoff must not exceed the cone apex k_phi/q_phi");
    }
};

template <class T>
using Material = std::variant<FluidParams<T>, DruckerPragerParams<T>>;

template <class T>
T material_rho0(const Material<T>& m)
{
    return std::visit([](const auto& p) { return p.rho0; }, m);
}

// Signal speed used by the CFL report: c_n for fluids, the P-wave speed
// sqrt((K + 4G/3)/rho0) for Drucker-Prager.
template <class T>
T material_wave_speed(const Material<T>& m)
{
    if (std::holds_alternative<FluidParams<T>>(m))
        return std::get<FluidParams<T>>(m).sound_speed;
    const auto& dp = std::get<DruckerPragerParams<T>>(m);
    return std::sqrt((dp.K + T(4) * dp.G / T(3)) / dp.rho0);
}

} // namespace mpm
