#pragma once

#include "mpm/common.hpp"

#include <random>

namespace mpm {

// Small feed-forward network with rectified-linear hidden layers, used to
// represent unknown parameter fields (scalar in, scalar out for the
// initial-velocity profiles). Weights are stored flat, layer by layer,
// each layer as a row-major (out x in) matrix followed by its bias.
template <class T>
struct Mlp {
    std::vector<int> sizes; // e.g. {1, 30, 30, 30, 1}
    std::vector<T> theta;

    static Mlp with_layers(std::vector<int> sizes)
    {
        Mlp m;
        m.sizes = std::move(sizes);
        if (m.sizes.size() < 2)
            throw ValidationError("mlp: needs at least input and output layer");
        m.theta.assign(m.param_count(), T(0));
        return m;
    }

    std::size_t param_count() const
    {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
            n += static_cast<std::size_t>(sizes[l + 1]) * (sizes[l] + 1);
        return n;
    }

    // Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    void init(std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        std::size_t ofs = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            T bound = T(1) / std::sqrt(T(sizes[l]));
            std::uniform_real_distribution<T> dist(-bound, bound);
            std::size_t n = static_cast<std::size_t>(sizes[l + 1]) * (sizes[l] + 1);
            for (std::size_t i = 0; i < n; ++i)
                theta[ofs + i] = dist(rng);
            ofs += n;
        }
    }

    T forward(T input) const { return forward_cached(input, nullptr); }

    // Forward pass; when `cache` is non-null, stores pre-activations per
    // layer for the backward pass.
    T forward_cached(T input, std::vector<std::vector<T>>* cache) const
    {
        std::vector<T> cur{input};
        if (cache)
            cache->clear();
        std::size_t ofs = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            int nin = sizes[l], nout = sizes[l + 1];
            std::vector<T> next(nout);
            for (int o = 0; o < nout; ++o) {
                T z = theta[ofs + static_cast<std::size_t>(o) * (nin + 1) + nin]; // bias
                for (int i = 0; i < nin; ++i)
                    z += theta[ofs + static_cast<std::size_t>(o) * (nin + 1) + i] * cur[i];
                next[o] = z;
            }
            if (cache)
                cache->push_back(next);
            bool last = (l + 2 == sizes.size());
            if (!last)
                for (auto& z : next)
                    z = z > T(0) ? z : T(0);
            cur = std::move(next);
        }
        if (cur.size() != 1)
            throw ValidationError("mlp: scalar output expected");
        return cur[0];
    }

    // Accumulates d(output)/d(theta) * out_cot into theta_grad, and returns
    // d(output)/d(input) * out_cot. ReLU subgradient at 0 is taken as 0.
    T vjp(T input, T out_cot, std::vector<T>& theta_grad) const
    {
        std::vector<std::vector<T>> pre;
        forward_cached(input, &pre);

        // recompute post-activation values per layer
        std::vector<std::vector<T>> post(pre.size());
        for (std::size_t l = 0; l < pre.size(); ++l) {
            post[l] = pre[l];
            if (l + 1 < pre.size())
                for (auto& z : post[l])
                    z = z > T(0) ? z : T(0);
        }

        std::vector<std::size_t> offsets(sizes.size() - 1);
        std::size_t ofs = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            offsets[l] = ofs;
            ofs += static_cast<std::size_t>(sizes[l + 1]) * (sizes[l] + 1);
        }

        std::vector<T> cot{out_cot};
        for (std::size_t l = sizes.size() - 2;; --l) {
            int nin = sizes[l], nout = sizes[l + 1];
            const std::vector<T> in_act = (l == 0) ? std::vector<T>{input} : post[l - 1];
            std::vector<T> in_cot(nin, T(0));
            for (int o = 0; o < nout; ++o) {
                T c = cot[o];
                std::size_t row = offsets[l] + static_cast<std::size_t>(o) * (nin + 1);
                for (int i = 0; i < nin; ++i) {
                    theta_grad[row + i] += c * in_act[i];
                    in_cot[i] += c * theta[row + i];
                }
                theta_grad[row + nin] += c; // bias
            }
            if (l == 0)
                return in_cot[0];
            for (int i = 0; i < nin; ++i)
                in_cot[i] = pre[l - 1][i] > T(0) ? in_cot[i] : T(0);
            cot = std::move(in_cot);
        }
    }
};

} // namespace mpm
