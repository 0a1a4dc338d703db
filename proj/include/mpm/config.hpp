#pragma once

#include "mpm/common.hpp"
#include "mpm/material.hpp"
#include "mpm/mlp.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace mpm {

enum class SchemeKind { pic, flip, blend, apic, tpic };

template <class T>
struct TransferScheme {
    SchemeKind kind = SchemeKind::flip;
    T alpha_flip = T(1); // only meaningful for blend

    // FLIP fraction of the velocity update: 0 for PIC-like schemes, 1 for
    // FLIP, alpha for the blend.
    T flip_fraction() const
    {
        switch (kind) {
        case SchemeKind::flip: return T(1);
        case SchemeKind::blend: return alpha_flip;
        default: return T(0);
        }
    }
    bool uses_affine() const { return kind == SchemeKind::apic; }
    bool uses_velocity_gradient_transfer() const { return kind == SchemeKind::tpic; }
};

enum class WallKind { slip, no_slip, fixed_wall, coulomb };

// One domain wall: wall index w = 2*axis + side (side 0 = low, 1 = high).
// Coulomb walls carry per-segment friction coefficients; segments divide
// the wall extent into equal-length intervals.
template <class T>
struct Wall {
    WallKind kind = WallKind::slip;
    std::vector<T> friction; // coulomb only, one entry per segment
};

template <class T, int dim>
struct BoundarySpec {
    std::array<Wall<T>, 2 * dim> walls{};
    int band_layers = 2; // node layers the wall rule applies to

    bool has_coulomb() const
    {
        for (const auto& w : walls)
            if (w.kind == WallKind::coulomb)
                return true;
        return false;
    }
};

// Axis-aligned rigid obstacle. Contact applies to grid nodes inside the
// box; the normal is the outward direction of the nearest face.
template <class T, int dim>
struct Obstacle {
    Vec<T, dim> lo, hi;

    bool contains(const Vec<T, dim>& p) const
    {
        for (int a = 0; a < dim; ++a)
            if (p[a] < lo[a] || p[a] > hi[a])
                return false;
        return true;
    }

    Vec<T, dim> outward_normal(const Vec<T, dim>& p) const
    {
        // nearest face by penetration depth
        int best_a = 0, best_s = 0;
        T best = std::numeric_limits<T>::max();
        for (int a = 0; a < dim; ++a) {
            T dlo = p[a] - lo[a];
            T dhi = hi[a] - p[a];
            if (dlo < best) { best = dlo; best_a = a; best_s = 0; }
            if (dhi < best) { best = dhi; best_a = a; best_s = 1; }
        }
        Vec<T, dim> n = Vec<T, dim>::Zero();
        n[best_a] = best_s == 0 ? T(-1) : T(1);
        return n;
    }
};

enum class VelExprKind { constant, linear_in_y, parabolic_sine, mlp_field };

// Initial-velocity field grammar. `y` below is measured from the bottom of
// the geometry region that carries the expression, and normalized by h0
// where applicable. All non-constant profiles act on the x component.
//   constant:       v = value
//   linear_in_y:    v_x = alpha * (h0 - y)
//   parabolic_sine: v_x = amplitude*(1 - (y/h0)^2) + perturbation*sin(freq*pi*y/h0)
//   mlp_field:      v_x = scale * net(y / h0)
template <class T, int dim>
struct VelocityExpr {
    VelExprKind kind = VelExprKind::constant;
    Vec<T, dim> value = Vec<T, dim>::Zero();
    T alpha = T(0);
    T h0 = T(1);
    T amplitude = T(2), perturbation = T(0.2), frequency = T(4);
    Mlp<T> net;
    T mlp_scale = T(3);

    Vec<T, dim> evaluate(T y_rel) const
    {
        Vec<T, dim> v = Vec<T, dim>::Zero();
        switch (kind) {
        case VelExprKind::constant:
            return value;
        case VelExprKind::linear_in_y:
            v[0] = alpha * (h0 - y_rel);
            return v;
        case VelExprKind::parabolic_sine: {
            T yn = y_rel / h0;
            v[0] = amplitude * (T(1) - yn * yn)
                 + perturbation * std::sin(frequency * T(EIGEN_PI) * yn);
            return v;
        }
        case VelExprKind::mlp_field:
            v[0] = mlp_scale * net.forward(y_rel / h0);
            return v;
        }
        return v;
    }
};

enum class RegionShape { box, cylinder };

// Seeding region: a box, or a cylinder (disk in 2D; axis-aligned along the
// last axis in 3D, bounded by zmin/zmax).
template <class T, int dim>
struct GeometryRegion {
    RegionShape shape = RegionShape::box;
    Vec<T, dim> lo = Vec<T, dim>::Zero();
    Vec<T, dim> hi = Vec<T, dim>::Zero();
    Vec<T, dim> center = Vec<T, dim>::Zero();
    T radius = T(0);
    T zmin = T(0), zmax = T(0);
    VelocityExpr<T, dim> velocity;

    bool contains(const Vec<T, dim>& p) const
    {
        if (shape == RegionShape::box) {
            for (int a = 0; a < dim; ++a)
                if (p[a] < lo[a] || p[a] >= hi[a])
                    return false;
            return true;
        }
        if constexpr (dim == 3) {
            if (p[2] < zmin || p[2] >= zmax)
                return false;
            Vec<T, 2> d(p[0] - center[0], p[1] - center[1]);
            return d.squaredNorm() < radius * radius;
        } else {
            return (p - center).squaredNorm() < radius * radius;
        }
    }

    T min_y() const { return shape == RegionShape::box ? lo[1] : center[1] - radius; }

    Vec<T, dim> bound_lo() const
    {
        if (shape == RegionShape::box)
            return lo;
        Vec<T, dim> b = center.array() - radius;
        if constexpr (dim == 3)
            b[2] = zmin;
        return b;
    }
    Vec<T, dim> bound_hi() const
    {
        if (shape == RegionShape::box)
            return hi;
        Vec<T, dim> b = center.array() + radius;
        if constexpr (dim == 3)
            b[2] = zmax;
        return b;
    }
};

enum class Precision { f32, f64 };

template <class T, int dim>
struct SimConfig {
    T dh = T(0);
    std::array<int, dim> cells{};
    T dt = T(0);
    Index num_steps = 0;
    Index snapshot_stride = 0; // 0 = only initial/final
    Vec<T, dim> gravity = Vec<T, dim>::Zero();
    TransferScheme<T> scheme;
    int particles_per_cell = 1 << dim;
    Precision precision = Precision::f64;
    std::uint64_t seed = 0;
    bool track_def_grad = false;

    Vec<T, dim> origin = Vec<T, dim>::Zero();

    Vec<T, dim> domain_extent() const
    {
        Vec<T, dim> e;
        for (int a = 0; a < dim; ++a)
            e[a] = T(cells[a]) * dh;
        return e;
    }

    void validate() const
    {
        if (!(dh > T(0)))
            throw ValidationError("config: grid spacing must be positive");
        for (int a = 0; a < dim; ++a)
            if (cells[a] < 5)
                throw ValidationError("config: need at least 5 cells per axis");
        if (!(dt > T(0)))
            throw ValidationError("config: time step must be positive");
        if (num_steps < 0)
            throw ValidationError("config: step count must be non-negative");
        if (particles_per_cell != (1 << dim))
            throw ValidationError("config: particles_per_cell must be " + std::to_string(1 << dim)
                + " in " + std::to_string(dim) + "D (regular 2^d sub-cell lattice)");
    }
};

// Courant number dt*(c_eff + vmax)/dh.
template <class T, int dim>
T cfl_report(const SimConfig<T, dim>& cfg, const Material<T>& material, T vmax)
{
    return cfg.dt * (material_wave_speed(material) + vmax) / cfg.dh;
}

} // namespace mpm
