#pragma once

#include "mpm/common.hpp"

#include <cmath>

namespace mpm {

// Per-particle Lagrangian fields, struct-of-arrays. Mass is constant after
// seeding. `affine` (the APIC B matrix) is allocated only under the APIC
// scheme; `def_grad` only when deformation-gradient tracking is enabled
// (pure diagnostic, excluded from the adjoint). In 2D the stress is the
// in-plane block of a plane-strain state and `sigma_zz` carries the
// out-of-plane normal stress (nonzero for elastoplastic materials, where
// the volumetric trial and the deviatoric return both touch it). In 3D
// `sigma_zz` stays empty.
template <class T, int dim>
struct ParticleSoA {
    std::vector<Vec<T, dim>> x;
    std::vector<Vec<T, dim>> v;
    std::vector<T> mass;
    std::vector<T> volume;
    std::vector<T> rho;
    std::vector<T> eps_eq;
    std::vector<T> sigma_zz;
    std::vector<Mat<T, dim>> sigma;
    std::vector<Mat<T, dim>> grad_v;
    std::vector<Mat<T, dim>> affine;
    std::vector<Mat<T, dim>> def_grad;

    Index size() const { return static_cast<Index>(x.size()); }

    void resize(Index n, bool with_affine, bool with_def_grad)
    {
        x.assign(n, Vec<T, dim>::Zero());
        v.assign(n, Vec<T, dim>::Zero());
        mass.assign(n, T(0));
        volume.assign(n, T(0));
        rho.assign(n, T(0));
        eps_eq.assign(n, T(0));
        sigma_zz.assign(dim == 2 ? n : 0, T(0));
        sigma.assign(n, Mat<T, dim>::Zero());
        grad_v.assign(n, Mat<T, dim>::Zero());
        affine.assign(with_affine ? n : 0, Mat<T, dim>::Zero());
        def_grad.assign(with_def_grad ? n : 0, Mat<T, dim>::Identity());
    }

    bool all_finite() const
    {
        auto ok = [](const auto& vec) {
            for (const auto& e : vec) {
                if constexpr (std::is_arithmetic_v<std::decay_t<decltype(e)>>) {
                    if (!std::isfinite(e)) return false;
                } else {
                    if (!e.allFinite()) return false;
                }
            }
            return true;
        };
        return ok(x) && ok(v) && ok(volume) && ok(rho) && ok(eps_eq) && ok(sigma_zz)
            && ok(sigma) && ok(grad_v) && ok(affine);
    }
};

template <class T, int dim>
struct SimState {
    ParticleSoA<T, dim> particles;
    Index step = 0;
    T time = T(0);

    std::uint64_t hash() const
    {
        std::uint64_t h = 0xcbf29ce484222325ull;
        const auto& p = particles;
        h = hash_vector(p.x, h);
        h = hash_vector(p.v, h);
        h = hash_vector(p.volume, h);
        h = hash_vector(p.rho, h);
        h = hash_vector(p.eps_eq, h);
        h = hash_vector(p.sigma_zz, h);
        h = hash_vector(p.sigma, h);
        h = hash_vector(p.grad_v, h);
        h = hash_vector(p.affine, h);
        h = hash_span(&step, 1, h);
        return h;
    }
};

// Eulerian scratch fields, reset at the start of every step. Node count on
// axis a is cells[a] + 1; node i sits at origin + i*dh.
template <class T, int dim>
struct Grid {
    std::array<int, dim> cells{};
    T dh = T(0);
    Vec<T, dim> origin = Vec<T, dim>::Zero();

    std::vector<T> mass;
    std::vector<Vec<T, dim>> momentum;
    std::vector<Vec<T, dim>> v_old; // momentum / mass
    std::vector<Vec<T, dim>> v;     // updated (and boundary-corrected) velocity
    std::vector<Vec<T, dim>> force;

    void configure(const std::array<int, dim>& c, T dh_, const Vec<T, dim>& origin_)
    {
        cells = c;
        dh = dh_;
        origin = origin_;
        std::size_t n = num_nodes();
        mass.resize(n);
        momentum.resize(n);
        v_old.resize(n);
        v.resize(n);
        force.resize(n);
        reset();
    }

    std::size_t num_nodes() const
    {
        std::size_t n = 1;
        for (int a = 0; a < dim; ++a)
            n *= static_cast<std::size_t>(cells[a] + 1);
        return n;
    }

    int nodes(int axis) const { return cells[axis] + 1; }

    std::size_t node_index(const std::array<int, dim>& idx) const
    {
        std::size_t r = 0;
        for (int a = 0; a < dim; ++a)
            r = r * static_cast<std::size_t>(cells[a] + 1) + static_cast<std::size_t>(idx[a]);
        return r;
    }

    std::array<int, dim> node_multi_index(std::size_t flat) const
    {
        std::array<int, dim> idx{};
        for (int a = dim - 1; a >= 0; --a) {
            std::size_t n = static_cast<std::size_t>(cells[a] + 1);
            idx[a] = static_cast<int>(flat % n);
            flat /= n;
        }
        return idx;
    }

    Vec<T, dim> node_position(const std::array<int, dim>& idx) const
    {
        Vec<T, dim> p;
        for (int a = 0; a < dim; ++a)
            p[a] = origin[a] + T(idx[a]) * dh;
        return p;
    }

    void reset()
    {
        std::fill(mass.begin(), mass.end(), T(0));
        std::fill(momentum.begin(), momentum.end(), Vec<T, dim>::Zero().eval());
        std::fill(v_old.begin(), v_old.end(), Vec<T, dim>::Zero().eval());
        std::fill(v.begin(), v.end(), Vec<T, dim>::Zero().eval());
        std::fill(force.begin(), force.end(), Vec<T, dim>::Zero().eval());
    }

    std::uint64_t hash() const
    {
        std::uint64_t h = 0xcbf29ce484222325ull;
        h = hash_vector(mass, h);
        h = hash_vector(momentum, h);
        h = hash_vector(v_old, h);
        h = hash_vector(v, h);
        h = hash_vector(force, h);
        return h;
    }
};

} // namespace mpm
