#pragma once

#include "mpm/material.hpp"
#include "mpm/state.hpp"

namespace mpm {

template <class T, int dim>
Mat<T, dim> strain_increment(const Mat<T, dim>& grad_v, T dt)
{
    return T(0.5) * (grad_v + grad_v.transpose()) * dt;
}

template <class T, int dim>
Mat<T, dim> spin_increment(const Mat<T, dim>& grad_v, T dt)
{
    return T(0.5) * (grad_v - grad_v.transpose()) * dt;
}

template <class T, int dim>
struct FluidUpdate {
    Mat<T, dim> sigma;
    T rho;
    T pressure;
    T volume_scale; // 1 + tr(dd)
};

// Weakly compressible update: rho' = rho / (1 + tr(dd)), p = c^2 (rho' -
// rho0), sigma = -p I - (2/3) mu tr(dd) I + 2 mu dd. The viscous term uses
// the strain increment as written in the weakly-compressible formulation;
// `rate_form` divides it by dt for the dimensional variant.
template <class T, int dim>
FluidUpdate<T, dim> fluid_stress_update(T rho, const Mat<T, dim>& grad_v, T dt,
                                        const FluidParams<T>& fluid)
{
    Mat<T, dim> dd = strain_increment(grad_v, dt);
    T trd = dd.trace();
    T den = T(1) + trd;
    if (!(den > T(0)))
        throw NumericalError("fluid update: 1 + tr(dd) <= 0, time step too large for the compression rate");
    FluidUpdate<T, dim> out;
    out.volume_scale = den;
    out.rho = rho / den;
    out.pressure = fluid.sound_speed * fluid.sound_speed * (out.rho - fluid.rho0);
    T k = fluid.rate_form ? fluid.viscosity / dt : fluid.viscosity;
    out.sigma = -out.pressure * Mat<T, dim>::Identity()
              - (T(2) / T(3)) * k * trd * Mat<T, dim>::Identity()
              + T(2) * k * dd;
    return out;
}

enum class DpZone { elastic = 1, shear = 2, tensile = 3 };

// Trial-stress invariants and yield function values; zones are classified
// by their signs. Exposed separately so tests can run the sign oracle on
// raw trial states.
template <class T>
struct DpTrial {
    T sigma_m, tau, fs, ft, h;
};

template <class T>
DpZone dp_classify(const DpTrial<T>& t)
{
    if (t.fs <= T(0) && t.ft < T(0))
        return DpZone::elastic;
    if (t.ft < T(0))
        return DpZone::shear; // fs > 0
    return t.h > T(0) ? DpZone::shear : DpZone::tensile;
}

template <class T>
DpTrial<T> dp_trial_invariants(const Eigen::Matrix<T, 3, 3>& trial, const DruckerPragerParams<T>& m)
{
    DpTrial<T> t;
    t.sigma_m = trial.trace() / T(3);
    Eigen::Matrix<T, 3, 3> dev = trial - t.sigma_m * Eigen::Matrix<T, 3, 3>::Identity();
    t.tau = std::sqrt(T(0.5) * dev.squaredNorm());
    t.fs = t.tau - m.k_phi + m.q_phi * t.sigma_m;
    t.ft = t.sigma_m - m.sigma_t;
    t.h = t.tau - m.tau_P - m.alpha_P * (t.sigma_m - m.sigma_t);
    return t;
}

template <class T, int dim>
struct ReturnMapResult {
    Mat<T, dim> sigma;
    T sigma_zz; // meaningful in 2D (plane strain)
    T delta_eps_eq;
    DpZone zone;
    T volume_scale;
};

// Drucker-Prager stress update: Jaumann rotation, isotropic elastic trial,
// three-zone classification, then radial shear return or tensile cap. In
// 2D the computation runs on the plane-strain 3x3 embedding. The returned
// state is always feasible (f^s <= 0 and sigma_m <= sigma_t): past-apex
// shear returns collapse to the apex, and corner states are clamped onto
// the cutoff corner. Zone labels always reflect the sign classification of
// the raw trial.
template <class T, int dim>
ReturnMapResult<T, dim> dp_stress_update(const Mat<T, dim>& sigma, T sigma_zz,
                                         const Mat<T, dim>& grad_v, T dt,
                                         const DruckerPragerParams<T>& m)
{
    using M3 = Eigen::Matrix<T, 3, 3>;
    M3 S = M3::Zero(), L = M3::Zero();
    S.template topLeftCorner<dim, dim>() = sigma;
    if constexpr (dim == 2)
        S(2, 2) = sigma_zz;
    L.template topLeftCorner<dim, dim>() = grad_v;

    M3 dd = T(0.5) * (L + L.transpose()) * dt;
    M3 dw = T(0.5) * (L - L.transpose()) * dt;

    // sigma^R_ij = sigma_ij + sigma_ik dw_jk + sigma_jk dw_ik
    M3 sR = S + S * dw.transpose() + dw * S.transpose();
    T trd = dd.trace();
    M3 trial = sR + T(2) * m.G * dd + (m.K - T(2) * m.G / T(3)) * trd * M3::Identity();

    DpTrial<T> tr = dp_trial_invariants(trial, m);
    DpZone zone = dp_classify(tr);

    M3 dev = trial - tr.sigma_m * M3::Identity();
    M3 result = trial;
    T delta_eps = T(0);

    if (zone == DpZone::shear) {
        T dlam = tr.fs / (m.G + m.K * m.q_phi * m.q_psi);
        delta_eps = dlam * std::sqrt(T(1) / T(3) + T(2) / T(9) * m.q_psi * m.q_psi);
        T sm_new = tr.sigma_m - m.K * m.q_psi * dlam;
        T tau_new = m.k_phi - m.q_phi * sm_new;
        if (tr.tau <= T(0) || tau_new < T(0)) {
            // hydrostatic trial or past-apex overshoot: land on the apex
            sm_new = m.q_phi > T(0) ? m.k_phi / m.q_phi : sm_new;
            result = sm_new * M3::Identity();
        } else {
            result = (tau_new / tr.tau) * dev + sm_new * M3::Identity();
        }
        if (sm_new > m.sigma_t) {
            // cutoff corner: cap the mean stress, deviator already admissible
            result += (m.sigma_t - sm_new) * M3::Identity();
        }
    } else if (zone == DpZone::tensile) {
        T dlam_t = tr.ft / m.K;
        delta_eps = std::sqrt(T(2)) / T(3) * dlam_t;
        result = trial + (m.sigma_t - tr.sigma_m) * M3::Identity();
        if (tr.tau > m.tau_P) {
            // capped state would sit above the shear line: clamp to corner
            result = (m.tau_P / tr.tau) * dev + m.sigma_t * M3::Identity();
        }
    }

    ReturnMapResult<T, dim> out;
    out.sigma = result.template topLeftCorner<dim, dim>();
    out.sigma_zz = dim == 2 ? result(2, 2) : T(0);
    out.delta_eps_eq = delta_eps;
    out.zone = zone;
    T den = T(1) + trd;
    if (!(den > T(0)))
        throw NumericalError("dp update: 1 + tr(dd) <= 0, time step too large for the compression rate");
    out.volume_scale = den;
    return out;
}

} // namespace mpm
