#pragma once

#include "mpm/config.hpp"
#include "mpm/state.hpp"

#include <algorithm>
#include <cmath>

namespace mpm {

// Wall index convention: w = 2*axis + side, side 0 at the low domain face.
inline int wall_axis(int w) { return w / 2; }
inline int wall_side(int w) { return w % 2; }

// A node belongs to the band of wall w if its index lies within
// `band_layers` node layers of that face.
template <class T, int dim>
bool node_in_wall_band(const Grid<T, dim>& grid, const std::type_identity_t<std::array<int, dim>>& idx,
                       int w, int band_layers)
{
    int a = wall_axis(w);
    return wall_side(w) == 0 ? idx[a] < band_layers
                             : idx[a] > grid.cells[a] - band_layers;
}

// Outward (into-the-wall) contact normal of wall w, e.g. (0,-1) for the
// bottom wall.
template <class T, int dim>
Vec<T, dim> wall_contact_normal(int w)
{
    Vec<T, dim> n = Vec<T, dim>::Zero();
    n[wall_axis(w)] = wall_side(w) == 0 ? T(-1) : T(1);
    return n;
}

// Coulomb friction correction after Bardenhagen, applied to an approaching
// node velocity (dv . n > 0): the normal component is removed and the
// tangential speed is reduced by mu' (dv . n), with mu' capped so that low
// tangential/normal ratios stick exactly.
template <class T, int dim>
Vec<T, dim> coulomb_correct(const Vec<T, dim>& v, const Vec<T, dim>& n, T mu)
{
    T vn = v.dot(n);
    if (vn <= T(0))
        return v;
    Vec<T, dim> t = v - vn * n;
    T tn = t.norm();
    if (tn <= mu * vn)
        return Vec<T, dim>::Zero(); // stick
    return t - (mu * vn / tn) * t;
}

// Frictionless predictor-corrector contact: eliminate the approaching
// normal component, keep the tangential part, leave separating nodes
// untouched.
template <class T, int dim>
Vec<T, dim> obstacle_correct(const Vec<T, dim>& v, const Vec<T, dim>& outward_normal)
{
    T vn = v.dot(outward_normal);
    if (vn < T(0))
        return v - vn * outward_normal;
    return v;
}

// Segment lookup along a Coulomb wall. Segments split the wall extent into
// equal intervals along `seg_axis`; a coordinate exactly on a shared edge
// belongs to the lower-index segment.
template <class T>
int coulomb_segment_index(T coord, T lo, T extent, int n_segments)
{
    T len = extent / T(n_segments);
    int k = static_cast<int>(std::ceil(double((coord - lo) / len))) - 1;
    return std::clamp(k, 0, n_segments - 1);
}

// Domain-wall rules for all non-Coulomb walls, in canonical wall order.
// fixed/no_slip zero the velocity; slip zeroes the normal component
// (unconditionally: the wall band is a kinematic constraint). Corner nodes
// receive each wall's rule independently.
template <class T, int dim>
void apply_wall_bc(Grid<T, dim>& grid, const BoundarySpec<T, dim>& bc)
{
    for (std::size_t i = 0; i < grid.num_nodes(); ++i) {
        auto idx = grid.node_multi_index(i);
        for (int w = 0; w < 2 * dim; ++w) {
            const auto& wall = bc.walls[w];
            if (wall.kind == WallKind::coulomb)
                continue;
            if (!node_in_wall_band(grid, idx, w, bc.band_layers))
                continue;
            if (wall.kind == WallKind::slip)
                grid.v[i][wall_axis(w)] = T(0);
            else
                grid.v[i] = Vec<T, dim>::Zero();
        }
    }
}

template <class T, int dim>
void rigid_obstacle_contact(Grid<T, dim>& grid, const Obstacle<T, dim>& obstacle)
{
    for (std::size_t i = 0; i < grid.num_nodes(); ++i) {
        auto idx = grid.node_multi_index(i);
        Vec<T, dim> xp = grid.node_position(idx);
        if (!obstacle.contains(xp))
            continue;
        grid.v[i] = obstacle_correct(grid.v[i], obstacle.outward_normal(xp));
    }
}

template <class T, int dim>
void coulomb_wall(Grid<T, dim>& grid, int w, const Wall<T>& wall, int band_layers)
{
    int seg_axis = wall_axis(w) == 0 ? 1 : 0;
    T lo = grid.origin[seg_axis];
    T extent = T(grid.cells[seg_axis]) * grid.dh;
    int n_seg = static_cast<int>(wall.friction.size());
    Vec<T, dim> n = wall_contact_normal<T, dim>(w);
    for (std::size_t i = 0; i < grid.num_nodes(); ++i) {
        auto idx = grid.node_multi_index(i);
        if (!node_in_wall_band(grid, idx, w, band_layers))
            continue;
        T coord = grid.node_position(idx)[seg_axis];
        int k = coulomb_segment_index(coord, lo, extent, n_seg);
        grid.v[i] = coulomb_correct(grid.v[i], n, wall.friction[static_cast<std::size_t>(k)]);
    }
}

// Per-node description of one grid velocity correction, in the exact order
// the pipeline applies them. Shared by the forward pipeline and the adjoint
// replay so branch decisions cannot drift apart.
template <class T, int dim>
struct NodeCorrection {
    enum Kind { slip, zero, obstacle, coulomb } kind;
    int axis = 0;              // slip
    Vec<T, dim> normal = Vec<T, dim>::Zero(); // obstacle / coulomb
    T mu = T(0);               // coulomb
    int wall = -1, segment = -1;
};

template <class T, int dim>
void collect_node_corrections(const Grid<T, dim>& grid, const BoundarySpec<T, dim>& bc,
                              const std::vector<Obstacle<T, dim>>& obstacles,
                              const std::array<int, dim>& idx,
                              std::vector<NodeCorrection<T, dim>>& out)
{
    out.clear();
    for (int w = 0; w < 2 * dim; ++w) {
        const auto& wall = bc.walls[w];
        if (wall.kind == WallKind::coulomb || !node_in_wall_band(grid, idx, w, bc.band_layers))
            continue;
        NodeCorrection<T, dim> c;
        if (wall.kind == WallKind::slip) {
            c.kind = NodeCorrection<T, dim>::slip;
            c.axis = wall_axis(w);
        } else {
            c.kind = NodeCorrection<T, dim>::zero;
        }
        out.push_back(c);
    }
    Vec<T, dim> xp = grid.node_position(idx);
    for (const auto& ob : obstacles) {
        if (!ob.contains(xp))
            continue;
        NodeCorrection<T, dim> c;
        c.kind = NodeCorrection<T, dim>::obstacle;
        c.normal = ob.outward_normal(xp);
        out.push_back(c);
    }
    for (int w = 0; w < 2 * dim; ++w) {
        const auto& wall = bc.walls[w];
        if (wall.kind != WallKind::coulomb || !node_in_wall_band(grid, idx, w, bc.band_layers))
            continue;
        int seg_axis = wall_axis(w) == 0 ? 1 : 0;
        int k = coulomb_segment_index(xp[seg_axis], grid.origin[seg_axis],
                                      T(grid.cells[seg_axis]) * grid.dh,
                                      static_cast<int>(wall.friction.size()));
        NodeCorrection<T, dim> c;
        c.kind = NodeCorrection<T, dim>::coulomb;
        c.normal = wall_contact_normal<T, dim>(w);
        c.mu = wall.friction[static_cast<std::size_t>(k)];
        c.wall = w;
        c.segment = k;
        out.push_back(c);
    }
}

template <class T, int dim>
Vec<T, dim> apply_node_correction(const NodeCorrection<T, dim>& c, const Vec<T, dim>& v,
                                  BranchLog* log = nullptr)
{
    switch (c.kind) {
    case NodeCorrection<T, dim>::slip: {
        Vec<T, dim> r = v;
        r[c.axis] = T(0);
        return r;
    }
    case NodeCorrection<T, dim>::zero:
        return Vec<T, dim>::Zero();
    case NodeCorrection<T, dim>::obstacle: {
        bool approach = v.dot(c.normal) < T(0);
        if (log)
            log->push(approach ? 0x11u : 0x10u);
        return approach ? (v - v.dot(c.normal) * c.normal).eval() : v;
    }
    case NodeCorrection<T, dim>::coulomb: {
        T vn = v.dot(c.normal);
        if (vn <= T(0)) {
            if (log)
                log->push(0x20u);
            return v;
        }
        Vec<T, dim> t = v - vn * c.normal;
        T tn = t.norm();
        bool stick = tn <= c.mu * vn;
        if (log)
            log->push(stick ? 0x22u : 0x21u);
        if (stick)
            return Vec<T, dim>::Zero();
        return (t - (c.mu * vn / tn) * t).eval();
    }
    }
    return v;
}

// Full correction pipeline in the order the stepper uses: plain walls,
// then obstacles, then Coulomb walls.
template <class T, int dim>
void apply_grid_corrections(Grid<T, dim>& grid, const BoundarySpec<T, dim>& bc,
                            const std::vector<Obstacle<T, dim>>& obstacles,
                            BranchLog* log = nullptr)
{
    if (log || !obstacles.empty() || bc.has_coulomb()) {
        // node-by-node pipeline (identical order to the phase-by-phase one:
        // every phase touches a node at most once)
        std::vector<NodeCorrection<T, dim>> list;
        for (std::size_t i = 0; i < grid.num_nodes(); ++i) {
            collect_node_corrections(grid, bc, obstacles, grid.node_multi_index(i), list);
            for (const auto& c : list)
                grid.v[i] = apply_node_correction(c, grid.v[i], log);
        }
    } else {
        apply_wall_bc(grid, bc);
    }
}

} // namespace mpm
