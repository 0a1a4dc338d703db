#pragma once

#include "mpm/constitutive.hpp"
#include "mpm/contact.hpp"
#include "mpm/scene.hpp"
#include "mpm/transfer.hpp"

#include <chrono>
#include <functional>

namespace mpm {

// Constitutive phase of the USL step: stress update from the fresh
// velocity gradient, then the volume/density update V *= (1 + tr(dd)).
template <class T, int dim>
void constitutive_update(ParticleSoA<T, dim>& prt, const Material<T>& material, T dt)
{
    if (std::holds_alternative<FluidParams<T>>(material)) {
        const auto& fluid = std::get<FluidParams<T>>(material);
        for (Index p = 0; p < prt.size(); ++p) {
            auto up = fluid_stress_update(prt.rho[p], prt.grad_v[p], dt, fluid);
            prt.sigma[p] = up.sigma;
            prt.rho[p] = up.rho;
            prt.volume[p] *= up.volume_scale;
        }
    } else {
        const auto& dp = std::get<DruckerPragerParams<T>>(material);
        for (Index p = 0; p < prt.size(); ++p) {
            T szz = dim == 2 ? prt.sigma_zz[p] : T(0);
            auto rm = dp_stress_update(prt.sigma[p], szz, prt.grad_v[p], dt, dp);
            prt.sigma[p] = rm.sigma;
            if constexpr (dim == 2)
                prt.sigma_zz[p] = rm.sigma_zz;
            prt.eps_eq[p] += rm.delta_eps_eq;
            prt.rho[p] /= rm.volume_scale;
            prt.volume[p] *= rm.volume_scale;
        }
    }
    if (!prt.def_grad.empty()) {
        for (Index p = 0; p < prt.size(); ++p)
            prt.def_grad[p] = (Mat<T, dim>::Identity() + prt.grad_v[p] * dt) * prt.def_grad[p];
    }
}

// One USL time step: reset grid -> P2G (with sigma^n) -> grid momentum
// update -> wall/obstacle/Coulomb corrections -> G2P -> stress update from
// grad v^{n+1} -> volume/density update. Deterministic for fixed inputs.
template <class T, int dim>
struct Stepper {
    const Scene<T, dim>* scene;
    Grid<T, dim> grid; // per-step scratch, reset by p2g

    explicit Stepper(const Scene<T, dim>& s)
        : scene(&s)
    {
        grid.configure(s.config.cells, s.config.dh, s.config.origin);
    }

    void advance(SimState<T, dim>& state)
    {
        const auto& cfg = scene->config;
        p2g(state.particles, cfg.scheme, cfg.gravity, grid);
        grid_momentum_update(grid, cfg.dt, scene->mass_epsilon);
        apply_grid_corrections(grid, scene->boundary, scene->obstacles);
        g2p(grid, cfg.scheme, cfg.dt, state.particles);
        constitutive_update(state.particles, scene->material, cfg.dt);
        state.step += 1;
        state.time = T(state.step) * cfg.dt;
    }
};

template <class T, int dim>
struct RunResult {
    std::vector<SimState<T, dim>> snapshots;
    double seconds_per_1000_steps = 0;
};

template <class T, int dim>
T max_particle_speed(const SimState<T, dim>& state)
{
    T vmax = T(0);
    for (const auto& v : state.particles.v)
        vmax = std::max(vmax, v.norm());
    return vmax;
}

// Runs num_steps steps, emitting snapshots at the stride (always including
// the initial and final states). Aborts with a diagnostic if any particle
// field turns non-finite. Refuses to start if the Courant number exceeds 1
// unless `force` is set.
template <class T, int dim>
RunResult<T, dim> run(const Scene<T, dim>& scene, SimState<T, dim> state, Index num_steps,
                      Index stride, bool force = false,
                      const std::type_identity_t<std::function<void(const SimState<T, dim>&, const Grid<T, dim>&)>>& observer = {})
{
    T courant = cfl_report(scene.config, scene.material, max_particle_speed(state));
    if (courant > T(1) && !force)
        throw ValidationError("run: Courant number " + std::to_string(double(courant))
            + " > 1; refusing to start (use force to override)");

    RunResult<T, dim> result;
    result.snapshots.push_back(state);
    Stepper<T, dim> stepper(scene);
    auto t0 = std::chrono::steady_clock::now();
    for (Index s = 0; s < num_steps; ++s) {
        stepper.advance(state);
        if (!state.particles.all_finite())
            throw NumericalError("run: non-finite particle field detected at step "
                + std::to_string(state.step));
        if (observer)
            observer(state, stepper.grid);
        if (stride > 0 && state.step % stride == 0 && state.step != num_steps)
            result.snapshots.push_back(state);
    }
    auto t1 = std::chrono::steady_clock::now();
    if (num_steps > 0) {
        result.snapshots.push_back(state);
        double secs = std::chrono::duration<double>(t1 - t0).count();
        result.seconds_per_1000_steps = secs / double(num_steps) * 1000.0;
    }
    return result;
}

} // namespace mpm
