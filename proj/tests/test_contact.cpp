#include "mpm/contact.hpp"

#include <doctest.h>

#include <random>

using namespace mpm;

namespace {

Grid<double, 2> simple_grid()
{
    Grid<double, 2> g;
    g.configure({10, 10}, 0.1, Vec<double, 2>::Zero());
    return g;
}

} // namespace

TEST_CASE("no-slip wall zeroes the velocity")
{
    auto g = simple_grid();
    BoundarySpec<double, 2> bc;
    bc.walls[2].kind = WallKind::no_slip; // bottom
    std::size_t i = g.node_index({5, 0});
    g.v[i] = Vec<double, 2>(1, 2);
    apply_wall_bc(g, bc);
    CHECK(g.v[i].norm() == 0.0);
}

TEST_CASE("slip wall zeroes only the normal component")
{
    auto g = simple_grid();
    BoundarySpec<double, 2> bc; // all slip by default
    std::size_t i = g.node_index({5, 1});
    g.v[i] = Vec<double, 2>(1, -2);
    apply_wall_bc(g, bc);
    CHECK(g.v[i][0] == 1.0);
    CHECK(g.v[i][1] == 0.0);
}

TEST_CASE("slip corner applies both wall rules")
{
    auto g = simple_grid();
    BoundarySpec<double, 2> bc;
    std::size_t i = g.node_index({0, 0});
    g.v[i] = Vec<double, 2>(-1, -2);
    apply_wall_bc(g, bc);
    CHECK(g.v[i].norm() == 0.0);
}

TEST_CASE("wall band covers exactly two node layers")
{
    auto g = simple_grid();
    BoundarySpec<double, 2> bc;
    for (int iy : {0, 1, 2, 5}) {
        std::size_t i = g.node_index({5, iy});
        g.v[i] = Vec<double, 2>(1, -1);
    }
    apply_wall_bc(g, bc);
    CHECK(g.v[g.node_index({5, 0})][1] == 0.0);
    CHECK(g.v[g.node_index({5, 1})][1] == 0.0);
    CHECK(g.v[g.node_index({5, 2})][1] == -1.0);
    CHECK(g.v[g.node_index({5, 5})][1] == -1.0);
}

TEST_CASE("rigid obstacle: predictor-corrector normal elimination")
{
    Vec<double, 2> n(0, 1);
    SUBCASE("tangent velocity untouched")
    {
        Vec<double, 2> v(0.7, 0);
        CHECK((obstacle_correct(v, n) - v).norm() == 0.0);
    }
    SUBCASE("head-on approach is stopped")
    {
        Vec<double, 2> v = -n;
        CHECK(obstacle_correct(v, n).norm() == 0.0);
    }
    SUBCASE("oblique approach keeps the tangential part")
    {
        Vec<double, 2> v(1, -2);
        auto r = obstacle_correct(v, n);
        CHECK(r[0] == doctest::Approx(1.0));
        CHECK(r[1] == doctest::Approx(0.0));
    }
    SUBCASE("separating velocity is untouched")
    {
        Vec<double, 2> v(0.3, 2.0);
        CHECK((obstacle_correct(v, n) - v).norm() == 0.0);
    }
}

TEST_CASE("coulomb friction wall hand values")
{
    Vec<double, 2> n(0, -1); // bottom wall contact normal
    SUBCASE("mu = 0 behaves like slip for approaching nodes")
    {
        Vec<double, 2> v(3, -1);
        auto r = coulomb_correct(v, n, 0.0);
        CHECK(r[0] == doctest::Approx(3.0));
        CHECK(r[1] == doctest::Approx(0.0));
    }
    SUBCASE("sliding branch: (3,-1) with mu = 0.2 -> (2.8, 0)")
    {
        Vec<double, 2> v(3, -1);
        auto r = coulomb_correct(v, n, 0.2);
        CHECK(r[0] == doctest::Approx(2.8).epsilon(1e-14));
        CHECK(r[1] == doctest::Approx(0.0));
    }
    SUBCASE("cap branch sticks exactly: (0.1,-1) with mu = 0.2 -> 0")
    {
        Vec<double, 2> v(0.1, -1);
        auto r = coulomb_correct(v, n, 0.2);
        CHECK(r.norm() == 0.0);
    }
    SUBCASE("separating node untouched")
    {
        Vec<double, 2> v(0.5, 1.0); // moving up, away from the bottom wall
        CHECK((coulomb_correct(v, n, 0.4) - v).norm() == 0.0);
    }
}

TEST_CASE("corrections are idempotent")
{
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    Vec<double, 2> n(0, -1);
    for (int i = 0; i < 500; ++i) {
        Vec<double, 2> v(u(rng), u(rng));
        double mu = std::abs(u(rng)) / 4;
        auto once = coulomb_correct(v, n, mu);
        auto twice = coulomb_correct(once, n, mu);
        CHECK((twice - once).norm() <= 1e-14);

        auto o1 = obstacle_correct(v, n);
        auto o2 = obstacle_correct(o1, n);
        CHECK((o2 - o1).norm() <= 1e-14);
    }
}

TEST_CASE("coulomb never reverses the tangential direction and never adds energy")
{
    std::mt19937_64 rng(45);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    Vec<double, 2> n(0, -1);
    for (int i = 0; i < 2000; ++i) {
        Vec<double, 2> v(u(rng), u(rng));
        double mu = std::abs(u(rng)) / 3;
        auto r = coulomb_correct(v, n, mu);
        Vec<double, 2> t_before = v - v.dot(n) * n;
        Vec<double, 2> t_after = r - r.dot(n) * n;
        CHECK(t_after.dot(t_before) >= -1e-15);
        CHECK(r.squaredNorm() <= v.squaredNorm() * (1 + 1e-14));
    }
}

TEST_CASE("segment lookup maps edge nodes to the lower-index segment")
{
    double lo = 0.0, extent = 2.0;
    int n = 4; // segments of length 0.5
    CHECK(coulomb_segment_index(0.0, lo, extent, n) == 0);
    CHECK(coulomb_segment_index(0.25, lo, extent, n) == 0);
    CHECK(coulomb_segment_index(0.5, lo, extent, n) == 0);  // edge -> lower
    CHECK(coulomb_segment_index(0.51, lo, extent, n) == 1);
    CHECK(coulomb_segment_index(1.0, lo, extent, n) == 1);  // edge -> lower
    CHECK(coulomb_segment_index(1.75, lo, extent, n) == 3);
    CHECK(coulomb_segment_index(2.0, lo, extent, n) == 3);
}

TEST_CASE("segment lookup matches a brute-force interval scan")
{
    std::mt19937_64 rng(46);
    double extent = 1.6;
    int n = 5;
    double len = extent / n;
    std::uniform_real_distribution<double> u(0.0, extent);
    for (int i = 0; i < 2000; ++i) {
        double x = u(rng);
        int k = coulomb_segment_index(x, 0.0, extent, n);
        // brute force: intervals (k len, (k+1) len], edges to the lower index
        int expect = 0;
        for (int j = n - 1; j >= 0; --j) {
            if (x > j * len) { expect = j; break; }
        }
        CHECK(k == expect);
    }
}

TEST_CASE("obstacle contact on the grid stops approaching nodes only")
{
    auto g = simple_grid();
    Obstacle<double, 2> ob;
    ob.lo = Vec<double, 2>(0.38, 0.38);
    ob.hi = Vec<double, 2>(0.62, 0.62);
    // node (4,5) is inside, left half: outward normal (-1, 0)
    std::size_t in_left = g.node_index({4, 5});
    g.v[in_left] = Vec<double, 2>(1.0, 0.2); // approaching (+x into the box from the left face)
    std::size_t outside = g.node_index({2, 5});
    g.v[outside] = Vec<double, 2>(5, 5);
    rigid_obstacle_contact(g, ob);
    CHECK(g.v[in_left][0] == doctest::Approx(0.0)); // normal (-1,0): v.n = -1 < 0 -> eliminated
    CHECK(g.v[in_left][1] == doctest::Approx(0.2));
    CHECK((g.v[outside] - Vec<double, 2>(5, 5)).norm() == 0.0);
}

TEST_CASE("dissipation: nodal kinetic energy never increases under the full pipeline")
{
    auto g = simple_grid();
    BoundarySpec<double, 2> bc;
    bc.walls[2].kind = WallKind::coulomb;
    bc.walls[2].friction = {0.1, 0.4};
    std::vector<Obstacle<double, 2>> obstacles(1);
    obstacles[0].lo = Vec<double, 2>(0.4, 0.4);
    obstacles[0].hi = Vec<double, 2>(0.6, 0.6);
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (auto& v : g.v)
        v = Vec<double, 2>(u(rng), u(rng));
    auto before = g.v;
    apply_grid_corrections(g, bc, obstacles);
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        CHECK(g.v[i].squaredNorm() <= before[i].squaredNorm() * (1 + 1e-14));
}
