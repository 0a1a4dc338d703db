#pragma once

#include "mpm/bspline.hpp"
#include "mpm/config.hpp"
#include "mpm/state.hpp"

namespace mpm {

template <class T, int dim>
struct Scene {
    SimConfig<T, dim> config;
    Material<T> material = FluidParams<T>{};
    BoundarySpec<T, dim> boundary;
    std::vector<Obstacle<T, dim>> obstacles;
    std::vector<GeometryRegion<T, dim>> geometry;
    T mass_epsilon = T(0); // set by init_scene

    void validate() const
    {
        config.validate();
        std::visit([](const auto& m) { m.validate(); }, material);
        if (geometry.empty())
            throw ValidationError("scene: no geometry regions");
        Vec<T, dim> extent = config.domain_extent();
        T margin = T(2) * config.dh;
        for (const auto& region : geometry) {
            Vec<T, dim> lo = region.bound_lo(), hi = region.bound_hi();
            for (int a = 0; a < dim; ++a) {
                if (!(hi[a] > lo[a]))
                    throw ValidationError("scene: geometry region is empty on axis " + std::to_string(a));
                if (lo[a] < margin - T(1e-12) * config.dh || hi[a] > extent[a] - margin + T(1e-12) * config.dh)
                    throw ValidationError("scene: geometry must keep a 2-cell margin inside the grid (axis "
                        + std::to_string(a) + ")");
            }
        }
        for (const auto& ob : obstacles)
            for (int a = 0; a < dim; ++a)
                if (ob.lo[a] < T(0) || ob.hi[a] > extent[a] || !(ob.hi[a] > ob.lo[a]))
                    throw ValidationError("scene: obstacle box must be a non-empty box inside the domain");
        for (const auto& w : boundary.walls)
            if (w.kind == WallKind::coulomb) {
                if (w.friction.empty())
                    throw ValidationError("scene: coulomb wall needs at least one segment");
                for (T mu : w.friction)
                    if (mu < T(0))
                        throw ValidationError("scene: friction coefficients must be non-negative");
            }
    }
};

// Seeds particles on the regular 2^d sub-cell lattice (offsets +-dh/4 from
// the cell center on every axis) in all cells covered by the geometry.
// m_p = rho0 * dh^d / ppc, sigma = 0, eps_eq = 0, velocity from the owning
// region's initial-velocity expression.
template <class T, int dim>
SimState<T, dim> init_scene(Scene<T, dim>& scene)
{
    scene.validate();
    const auto& cfg = scene.config;
    T rho0 = material_rho0(scene.material);
    T cell_volume = std::pow(cfg.dh, T(dim));
    T mp = rho0 * cell_volume / T(cfg.particles_per_cell);

    std::vector<Vec<T, dim>> positions;
    std::vector<const GeometryRegion<T, dim>*> owner;

    std::array<int, dim> ci{};
    auto visit_cells = [&](auto&& self, int axis) -> void {
        if (axis == dim) {
            Vec<T, dim> center;
            for (int a = 0; a < dim; ++a)
                center[a] = cfg.origin[a] + (T(ci[a]) + T(0.5)) * cfg.dh;
            for (int corner = 0; corner < (1 << dim); ++corner) {
                Vec<T, dim> p = center;
                for (int a = 0; a < dim; ++a)
                    p[a] += ((corner >> a) & 1) ? cfg.dh / T(4) : -cfg.dh / T(4);
                for (const auto& region : scene.geometry) {
                    if (region.contains(p)) {
                        positions.push_back(p);
                        owner.push_back(&region);
                        break;
                    }
                }
            }
            return;
        }
        for (ci[axis] = 0; ci[axis] < cfg.cells[axis]; ++ci[axis])
            self(self, axis + 1);
    };
    visit_cells(visit_cells, 0);

    if (positions.empty())
        throw ValidationError("scene: geometry produced no particles");

    SimState<T, dim> state;
    auto& prt = state.particles;
    prt.resize(static_cast<Index>(positions.size()), cfg.scheme.uses_affine(), cfg.track_def_grad);
    T vmax = T(0);
    for (Index p = 0; p < prt.size(); ++p) {
        prt.x[p] = positions[p];
        prt.mass[p] = mp;
        prt.rho[p] = rho0;
        prt.volume[p] = mp / rho0;
        prt.v[p] = owner[p]->velocity.evaluate(positions[p][1] - owner[p]->min_y());
        vmax = std::max(vmax, prt.v[p].norm());
    }
    scene.mass_epsilon = T(1e-12) * mp;

    if (std::holds_alternative<FluidParams<T>>(scene.material)) {
        T courant = cfl_report(cfg, scene.material, vmax);
        if (courant > T(1))
            throw ValidationError("scene: CFL violation, Courant number " + std::to_string(double(courant))
                + " > 1 (reduce dt or coarsen the grid)");
    }
    return state;
}

} // namespace mpm
