#pragma once

#include "mpm/common.hpp"

#include <cmath>

namespace mpm {

// Quadratic B-spline basis, C1-continuous, support |xi| < 3/2.
template <class T>
T bspline_weight(T xi)
{
    T a = std::abs(xi);
    if (a < T(0.5))
        return T(0.75) - a * a;
    if (a < T(1.5))
        return T(0.5) * a * a - T(1.5) * a + T(1.125);
    return T(0);
}

// d/dxi of bspline_weight.
template <class T>
T bspline_weight_derivative(T xi)
{
    T a = std::abs(xi);
    T s = xi < T(0) ? T(-1) : T(1);
    if (a < T(0.5))
        return -T(2) * xi;
    if (a < T(1.5))
        return s * (a - T(1.5));
    return T(0);
}

// 3^dim-node stencil of a particle on a uniform grid. Weights and
// derivatives are stored per axis; tensor products are formed by the
// transfer kernels. With base = floor(x/dh - 1/2) the fractional offset
// fx lies in [1/2, 3/2), so each of the three per-axis nodes evaluates a
// fixed polynomial branch of the spline:
//   w0 = (3/2 - fx)^2 / 2,  w1 = 3/4 - (fx - 1)^2,  w2 = (fx - 1/2)^2 / 2.
// dw is d/dx (includes the 1/dh factor); ddw is d2/dx2. The second
// derivatives are what the adjoint needs to differentiate grad-weights
// with respect to particle position.
template <class T, int dim>
struct Stencil {
    std::array<int, dim> base;
    T w[dim][3];
    T dw[dim][3];
    T ddw[dim][3];

    T weight(const std::array<int, dim>& offset) const
    {
        T r = T(1);
        for (int a = 0; a < dim; ++a)
            r *= w[a][offset[a]];
        return r;
    }

    // grad phi, axis a: dw on that axis, w elsewhere.
    Vec<T, dim> grad(const std::array<int, dim>& offset) const
    {
        Vec<T, dim> g;
        for (int a = 0; a < dim; ++a) {
            T r = dw[a][offset[a]];
            for (int b = 0; b < dim; ++b)
                if (b != a)
                    r *= w[b][offset[b]];
            g[a] = r;
        }
        return g;
    }

    // d(phi)/d(x_p) = -grad phi: weights depend on (x - x_i)/dh.
    // Kept explicit at call sites; see transfer and adjoint kernels.
};

template <class T, int dim>
Stencil<T, dim> shape_and_grad(const Vec<T, dim>& x, std::type_identity_t<T> dh,
                               const Vec<T, dim>& origin,
                               const std::type_identity_t<std::array<int, dim>>& cells,
                               Index particle = -1)
{
    Stencil<T, dim> st;
    T inv_dh = T(1) / dh;
    for (int a = 0; a < dim; ++a) {
        T u = (x[a] - origin[a]) * inv_dh;
        int base = static_cast<int>(std::floor(u - T(0.5)));
        if (base < 0 || base + 2 > cells[a]) {
            throw OutOfDomainError(particle,
                "particle " + std::to_string(particle) + " outside valid grid interior on axis "
                    + std::to_string(a) + " (coordinate " + std::to_string(double(x[a])) + ")");
        }
        st.base[a] = base;
        T fx = u - T(base); // in [1/2, 3/2)
        T h0 = T(1.5) - fx;
        T h1 = fx - T(1);
        T h2 = fx - T(0.5);
        st.w[a][0] = T(0.5) * h0 * h0;
        st.w[a][1] = T(0.75) - h1 * h1;
        st.w[a][2] = T(0.5) * h2 * h2;
        st.dw[a][0] = -h0 * inv_dh;
        st.dw[a][1] = -T(2) * h1 * inv_dh;
        st.dw[a][2] = h2 * inv_dh;
        st.ddw[a][0] = inv_dh * inv_dh;
        st.ddw[a][1] = -T(2) * inv_dh * inv_dh;
        st.ddw[a][2] = inv_dh * inv_dh;
    }
    return st;
}

// Iterate the 3^dim stencil offsets in canonical (row-major) order.
template <int dim, class F>
void for_each_offset(F&& f)
{
    if constexpr (dim == 2) {
        std::array<int, 2> o;
        for (o[0] = 0; o[0] < 3; ++o[0])
            for (o[1] = 0; o[1] < 3; ++o[1])
                f(o);
    } else {
        static_assert(dim == 3);
        std::array<int, 3> o;
        for (o[0] = 0; o[0] < 3; ++o[0])
            for (o[1] = 0; o[1] < 3; ++o[1])
                for (o[2] = 0; o[2] < 3; ++o[2])
                    f(o);
    }
}

} // namespace mpm
