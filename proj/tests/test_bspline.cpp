#include "mpm/bspline.hpp"

#include <doctest.h>

#include <random>

using namespace mpm;

TEST_CASE("quadratic spline point values")
{
    CHECK(bspline_weight(0.0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(bspline_weight(1.5) == 0.0);
    CHECK(bspline_weight(-1.5) == 0.0);
    CHECK(bspline_weight(2.0) == 0.0);
    CHECK(bspline_weight(1.0) == doctest::Approx(0.125).epsilon(1e-15));
    // continuity at the branch junction: both polynomial branches give 1/2
    CHECK(0.75 - 0.5 * 0.5 == doctest::Approx(0.5));
    CHECK(0.5 * 0.25 - 1.5 * 0.5 + 1.125 == doctest::Approx(0.5));
    CHECK(bspline_weight(0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(bspline_weight(std::nextafter(0.5, 0.0)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("spline is non-negative with unit integral")
{
    // trapezoid quadrature at 1e4 points over the support
    const int n = 10000;
    double lo = -1.5, hi = 1.5;
    double h = (hi - lo) / n;
    double sum = 0;
    for (int i = 0; i <= n; ++i) {
        double w = bspline_weight(lo + i * h);
        CHECK(w >= 0.0);
        sum += (i == 0 || i == n) ? 0.5 * w : w;
    }
    CHECK(sum * h == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("derivative is C1-consistent with the weight")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1.6, 1.6);
    for (int i = 0; i < 200; ++i) {
        double xi = dist(rng);
        double h = 1e-6;
        double fd = (bspline_weight(xi + h) - bspline_weight(xi - h)) / (2 * h);
        CHECK(bspline_weight_derivative(xi) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
    CHECK(bspline_weight_derivative(0.5) == doctest::Approx(-1.0));
    CHECK(bspline_weight_derivative(1.5) == 0.0);
}

TEST_CASE("stencil identities at random interior points")
{
    const double dh = 0.05;
    Vec<double, 2> origin = Vec<double, 2>::Zero();
    std::array<int, 2> cells{40, 30};
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> ux(0.5 * dh, (cells[0] - 0.5) * dh);
    std::uniform_real_distribution<double> uy(0.5 * dh, (cells[1] - 0.5) * dh);

    for (int trial = 0; trial < 1000; ++trial) {
        Vec<double, 2> x(ux(rng), uy(rng));
        auto st = shape_and_grad(x, dh, origin, cells);
        double wsum = 0;
        Vec<double, 2> gsum = Vec<double, 2>::Zero();
        Vec<double, 2> xsum = Vec<double, 2>::Zero();
        for_each_offset<2>([&](const std::array<int, 2>& o) {
            double w = st.weight(o);
            CHECK(w >= 0.0);
            wsum += w;
            gsum += st.grad(o);
            Vec<double, 2> xi((st.base[0] + o[0]) * dh, (st.base[1] + o[1]) * dh);
            xsum += w * xi;
        });
        CHECK(std::abs(wsum - 1.0) < 1e-12);                  // partition of unity
        CHECK(gsum.template lpNorm<Eigen::Infinity>() < 1e-12 / dh); // gradient of a constant
        CHECK((xsum - x).template lpNorm<Eigen::Infinity>() < 1e-12); // linear reproduction
    }
}

TEST_CASE("stencil identities hold in 3D")
{
    const double dh = 0.1;
    Vec<double, 3> origin = Vec<double, 3>::Zero();
    std::array<int, 3> cells{12, 10, 9};
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        Vec<double, 3> x;
        for (int a = 0; a < 3; ++a) {
            std::uniform_real_distribution<double> u(0.5 * dh, (cells[a] - 0.5) * dh);
            x[a] = u(rng);
        }
        auto st = shape_and_grad(x, dh, origin, cells);
        double wsum = 0;
        Vec<double, 3> xsum = Vec<double, 3>::Zero();
        for_each_offset<3>([&](const std::array<int, 3>& o) {
            double w = st.weight(o);
            wsum += w;
            Vec<double, 3> xi((st.base[0] + o[0]) * dh, (st.base[1] + o[1]) * dh,
                              (st.base[2] + o[2]) * dh);
            xsum += w * xi;
        });
        CHECK(std::abs(wsum - 1.0) < 1e-12);
        CHECK((xsum - x).template lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("out-of-domain particle raises an error naming the index")
{
    const double dh = 0.1;
    Vec<double, 2> origin = Vec<double, 2>::Zero();
    std::array<int, 2> cells{10, 10};
    Vec<double, 2> outside(0.01, 0.5); // below half a cell from the edge
    CHECK_THROWS_AS(shape_and_grad(outside, dh, origin, cells, 42), OutOfDomainError);
    try {
        shape_and_grad(outside, dh, origin, cells, 42);
    } catch (const OutOfDomainError& e) {
        CHECK(e.particle == 42);
        CHECK(std::string(e.what()).find("42") != std::string::npos);
    }
    Vec<double, 2> far(1.01, 0.5);
    CHECK_THROWS_AS(shape_and_grad(far, dh, origin, cells, 1), OutOfDomainError);
}
