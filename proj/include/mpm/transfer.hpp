#pragma once

#include "mpm/bspline.hpp"
#include "mpm/config.hpp"
#include "mpm/state.hpp"

namespace mpm {

// Velocity-augmentation matrix for the P2G momentum scatter: B D^-1 for
// APIC, the carried velocity gradient for TPIC, zero otherwise. D is the
// quadratic-spline moment matrix, recomputed from the current stencil (it
// equals dh^2/4 I analytically for interior particles; that identity is a
// test, not an assumption here).
template <class T, int dim>
Mat<T, dim> p2g_affine_matrix(const ParticleSoA<T, dim>& prt, Index p,
                              const TransferScheme<T>& scheme,
                              const Stencil<T, dim>& st, const Grid<T, dim>& grid)
{
    if (scheme.uses_velocity_gradient_transfer())
        return prt.grad_v[p];
    if (!scheme.uses_affine())
        return Mat<T, dim>::Zero();
    Mat<T, dim> D = Mat<T, dim>::Zero();
    for_each_offset<dim>([&](const std::array<int, dim>& o) {
        std::array<int, dim> idx;
        for (int a = 0; a < dim; ++a)
            idx[a] = st.base[a] + o[a];
        Vec<T, dim> r = grid.node_position(idx) - prt.x[p];
        D += st.weight(o) * r * r.transpose();
    });
    return prt.affine[p] * D.inverse();
}

// Scatter particle mass, momentum and force to the grid. Particles are
// processed in index order; each node accumulates contributions in that
// fixed order, so results are bit-reproducible.
template <class T, int dim>
void p2g(const ParticleSoA<T, dim>& prt, const TransferScheme<T>& scheme,
         const Vec<T, dim>& gravity, Grid<T, dim>& grid,
         const std::vector<Vec<T, dim>>* external_nodal_force = nullptr)
{
    grid.reset();
    for (Index p = 0; p < prt.size(); ++p) {
        auto st = shape_and_grad(prt.x[p], grid.dh, grid.origin, grid.cells, p);
        Mat<T, dim> A = p2g_affine_matrix(prt, p, scheme, st, grid);
        bool affine = scheme.uses_affine() || scheme.uses_velocity_gradient_transfer();
        T m = prt.mass[p];
        T V = prt.volume[p];
        const Mat<T, dim>& sig = prt.sigma[p];
        for_each_offset<dim>([&](const std::array<int, dim>& o) {
            std::array<int, dim> idx;
            for (int a = 0; a < dim; ++a)
                idx[a] = st.base[a] + o[a];
            std::size_t ni = grid.node_index(idx);
            T phi = st.weight(o);
            Vec<T, dim> gw = st.grad(o);
            grid.mass[ni] += m * phi;
            Vec<T, dim> vel = prt.v[p];
            if (affine)
                vel += A * (grid.node_position(idx) - prt.x[p]);
            grid.momentum[ni] += m * phi * vel;
            grid.force[ni] += -(V * (sig * gw)) + phi * m * gravity;
        });
    }
    if (external_nodal_force) {
        for (std::size_t i = 0; i < grid.num_nodes(); ++i)
            grid.force[i] += (*external_nodal_force)[i];
    }
}

// Explicit momentum update on occupied nodes: v_old = p/m, then
// v = v_old + dt f/m. Nodes at or below mass_eps stay zero. Boundary and
// contact corrections are applied afterwards (contact module) and modify
// `v` only; `v_old` keeps the pre-correction value FLIP needs.
template <class T, int dim>
void grid_momentum_update(Grid<T, dim>& grid, T dt, T mass_eps)
{
    for (std::size_t i = 0; i < grid.num_nodes(); ++i) {
        if (grid.mass[i] > mass_eps) {
            grid.v_old[i] = grid.momentum[i] / grid.mass[i];
            grid.v[i] = grid.v_old[i] + (dt / grid.mass[i]) * grid.force[i];
        }
    }
}

// Gather grid velocities back to particles and advect. PIC replaces the
// particle velocity, FLIP adds the grid increment (post-correction v minus
// pre-correction v_old, so boundary impulses reach particles); the blend
// interpolates. Positions always advect with the corrected grid velocity.
// The velocity gradient is refreshed every step; APIC additionally
// refreshes its affine matrix.
template <class T, int dim>
void g2p(const Grid<T, dim>& grid, const TransferScheme<T>& scheme, T dt,
         ParticleSoA<T, dim>& prt)
{
    T alpha = scheme.flip_fraction();
    for (Index p = 0; p < prt.size(); ++p) {
        auto st = shape_and_grad(prt.x[p], grid.dh, grid.origin, grid.cells, p);
        Vec<T, dim> v_pic = Vec<T, dim>::Zero();
        Vec<T, dim> v_inc = Vec<T, dim>::Zero();
        Mat<T, dim> grad_v = Mat<T, dim>::Zero();
        Mat<T, dim> B = Mat<T, dim>::Zero();
        for_each_offset<dim>([&](const std::array<int, dim>& o) {
            std::array<int, dim> idx;
            for (int a = 0; a < dim; ++a)
                idx[a] = st.base[a] + o[a];
            std::size_t ni = grid.node_index(idx);
            T phi = st.weight(o);
            v_pic += phi * grid.v[ni];
            v_inc += phi * (grid.v[ni] - grid.v_old[ni]);
            grad_v += grid.v[ni] * st.grad(o).transpose();
            if (scheme.uses_affine())
                B += phi * grid.v[ni] * (grid.node_position(idx) - prt.x[p]).transpose();
        });
        prt.v[p] = alpha * (prt.v[p] + v_inc) + (T(1) - alpha) * v_pic;
        prt.x[p] += dt * v_pic;
        prt.grad_v[p] = grad_v;
        if (scheme.uses_affine())
            prt.affine[p] = B;
    }
}

} // namespace mpm
