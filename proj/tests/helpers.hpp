#pragma once

#include "mpm/scene.hpp"
#include "mpm/stepper.hpp"

#include <random>

namespace mpm::testing {

// Small fluid box in a closed domain, used by transfer/stepper tests.
inline Scene<double, 2> small_fluid_scene(SchemeKind kind = SchemeKind::pic,
                                          double alpha_flip = 1.0)
{
    Scene<double, 2> scene;
    scene.config.dh = 0.05;
    scene.config.cells = {20, 20};
    scene.config.dt = 1e-4;
    scene.config.gravity = Vec<double, 2>::Zero();
    scene.config.scheme.kind = kind;
    scene.config.scheme.alpha_flip = alpha_flip;
    scene.material = FluidParams<double>{1000.0, 0.0, 20.0};
    GeometryRegion<double, 2> region;
    region.lo = Vec<double, 2>(0.3, 0.3);
    region.hi = Vec<double, 2>(0.7, 0.7);
    scene.geometry.push_back(region);
    return scene;
}

// A lone particle at the given position; mass/volume as if seeded from a
// dh-cell with 4 ppc at rho0 = 1000.
inline SimState<double, 2> single_particle_state(const Scene<double, 2>& scene,
                                                 const Vec<double, 2>& x,
                                                 const Vec<double, 2>& v)
{
    SimState<double, 2> state;
    auto& prt = state.particles;
    prt.resize(1, scene.config.scheme.uses_affine(), false);
    double dh = scene.config.dh;
    prt.x[0] = x;
    prt.v[0] = v;
    prt.mass[0] = 1000.0 * dh * dh / 4;
    prt.rho[0] = 1000.0;
    prt.volume[0] = prt.mass[0] / 1000.0;
    return state;
}

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

} // namespace mpm::testing
