#include "mpm/transfer.hpp"

#include "helpers.hpp"

#include <doctest.h>

using namespace mpm;
using namespace mpm::testing;

namespace {

Grid<double, 2> make_grid(const Scene<double, 2>& scene)
{
    Grid<double, 2> g;
    g.configure(scene.config.cells, scene.config.dh, scene.config.origin);
    return g;
}

Vec<double, 2> grid_momentum_sum(const Grid<double, 2>& g)
{
    Vec<double, 2> s = Vec<double, 2>::Zero();
    for (const auto& p : g.momentum)
        s += p;
    return s;
}

Vec<double, 2> particle_momentum_sum(const ParticleSoA<double, 2>& prt)
{
    Vec<double, 2> s = Vec<double, 2>::Zero();
    for (Index p = 0; p < prt.size(); ++p)
        s += prt.mass[p] * prt.v[p];
    return s;
}

SimState<double, 2> random_block(const Scene<double, 2>& scene, std::uint64_t seed)
{
    Scene<double, 2> copy = scene;
    auto state = init_scene(copy);
    auto gen = rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : state.particles.v)
        v = Vec<double, 2>(u(gen), u(gen));
    return state;
}

} // namespace

TEST_CASE("single particle at a node: PIC scatter pattern")
{
    auto scene = small_fluid_scene(SchemeKind::pic);
    double dh = scene.config.dh;
    Vec<double, 2> xk(10 * dh, 10 * dh); // exactly node (10, 10)
    Vec<double, 2> vp(0.3, -0.2);
    auto state = single_particle_state(scene, xk, vp);
    auto g = make_grid(scene);
    p2g(state.particles, scene.config.scheme, scene.config.gravity, g);

    double mp = state.particles.mass[0];
    std::size_t nk = g.node_index({10, 10});
    CHECK(g.mass[nk] == doctest::Approx(mp * 0.75 * 0.75).epsilon(1e-14));
    CHECK((g.momentum[nk] / g.mass[nk] - vp).norm() < 1e-14);

    double total_mass = 0;
    for (double m : g.mass)
        total_mass += m;
    CHECK(total_mass == doctest::Approx(mp).epsilon(1e-14));
}

TEST_CASE("P2G conserves mass and momentum for every scheme")
{
    for (auto kind : {SchemeKind::pic, SchemeKind::flip, SchemeKind::blend, SchemeKind::apic, SchemeKind::tpic}) {
        auto scene = small_fluid_scene(kind, 0.7);
        auto state = random_block(scene, 101);
        if (kind == SchemeKind::apic) {
            // give the affine matrices something nonzero to transfer
            auto gen = rng(7);
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            for (auto& B : state.particles.affine)
                B << u(gen), u(gen), u(gen), u(gen);
        }
        if (kind == SchemeKind::tpic) {
            auto gen = rng(8);
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            for (auto& G : state.particles.grad_v)
                G << u(gen), u(gen), u(gen), u(gen);
        }
        auto g = make_grid(scene);
        p2g(state.particles, scene.config.scheme, scene.config.gravity, g);

        double pm = 0, gm = 0;
        for (double m : state.particles.mass)
            pm += m;
        for (double m : g.mass)
            gm += m;
        CHECK(gm == doctest::Approx(pm).epsilon(1e-12));

        auto p_mom = particle_momentum_sum(state.particles);
        auto g_mom = grid_momentum_sum(g);
        // the affine/velocity-gradient terms cancel since sum_i phi (x_i - x_p) = 0
        CHECK((g_mom - p_mom).norm() <= 1e-12 * p_mom.norm());
    }
}

TEST_CASE("grid update: zero force leaves velocities, gravity adds g*dt")
{
    auto scene = small_fluid_scene(SchemeKind::pic);
    auto state = random_block(scene, 33);
    auto g = make_grid(scene);

    p2g(state.particles, scene.config.scheme, Vec<double, 2>(0, 0), g);
    for (auto& f : g.force)
        f = Vec<double, 2>::Zero(); // drop stress forces (they are zero anyway: sigma = 0)
    grid_momentum_update(g, scene.config.dt, 1e-12);
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        if (g.mass[i] > 1e-12)
            CHECK((g.v[i] - g.v_old[i]).norm() == 0.0);

    Vec<double, 2> grav(0, -9.8);
    p2g(state.particles, scene.config.scheme, grav, g);
    grid_momentum_update(g, scene.config.dt, 1e-12);
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        if (g.mass[i] > 1e-12)
            CHECK((g.v[i] - g.v_old[i] - scene.config.dt * grav).norm() < 1e-14);
}

TEST_CASE("far stencil node with zero weight stays zero, no NaN")
{
    auto scene = small_fluid_scene(SchemeKind::pic);
    double dh = scene.config.dh;
    // particle at a cell center: the outermost stencil node on each axis
    // gets exactly zero weight (offset 1.5 cells)
    Vec<double, 2> x((10 + 0.5) * dh, (10 + 0.5) * dh);
    auto state = single_particle_state(scene, x, Vec<double, 2>(1, 0));
    auto g = make_grid(scene);
    p2g(state.particles, scene.config.scheme, Vec<double, 2>(0, -9.8), g);
    std::size_t far = g.node_index({12, 12});
    CHECK(g.mass[far] == 0.0);
    grid_momentum_update(g, scene.config.dt, 1e-12);
    CHECK(g.v[far].norm() == 0.0);
    CHECK(g.v_old[far].norm() == 0.0);
    for (const auto& v : g.v)
        CHECK(v.allFinite());
}

TEST_CASE("uniform particle velocity reproduces itself through a full cycle")
{
    Vec<double, 2> V(0.4, -0.3);
    for (auto kind : {SchemeKind::pic, SchemeKind::flip, SchemeKind::blend, SchemeKind::apic, SchemeKind::tpic}) {
        auto scene = small_fluid_scene(kind, 0.4);
        Scene<double, 2> copy = scene;
        auto state = init_scene(copy);
        for (auto& v : state.particles.v)
            v = V;
        auto g = make_grid(scene);
        p2g(state.particles, scene.config.scheme, Vec<double, 2>(0, 0), g);
        grid_momentum_update(g, scene.config.dt, copy.mass_epsilon);
        g2p(g, scene.config.scheme, scene.config.dt, state.particles);
        for (Index p = 0; p < state.particles.size(); ++p) {
            CHECK((state.particles.v[p] - V).norm() < 1e-12);
            CHECK(state.particles.grad_v[p].norm() < 1e-12 / scene.config.dh);
        }
    }
}

TEST_CASE("APIC moment matrix equals dh^2/4 I at arbitrary interior points")
{
    auto scene = small_fluid_scene(SchemeKind::apic);
    double dh = scene.config.dh;
    Grid<double, 2> g = make_grid(scene);
    auto gen = rng(2024);
    std::uniform_real_distribution<double> u(0.5 * dh, 19.5 * dh);
    for (int trial = 0; trial < 100; ++trial) {
        Vec<double, 2> x(u(gen), u(gen));
        auto st = shape_and_grad(x, dh, g.origin, g.cells);
        Mat<double, 2> D = Mat<double, 2>::Zero();
        for_each_offset<2>([&](const std::array<int, 2>& o) {
            std::array<int, 2> idx{st.base[0] + o[0], st.base[1] + o[1]};
            Vec<double, 2> r = g.node_position(idx) - x;
            D += st.weight(o) * r * r.transpose();
        });
        Mat<double, 2> expected = (dh * dh / 4) * Mat<double, 2>::Identity();
        CHECK((D - expected).template lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("free fall: one cycle adds g*dt for PIC and FLIP")
{
    Vec<double, 2> grav(0, -9.8);
    Vec<double, 2> v0(0.2, 0.1);
    for (auto kind : {SchemeKind::pic, SchemeKind::flip}) {
        auto scene = small_fluid_scene(kind);
        Vec<double, 2> x(0.512, 0.483);
        auto state = single_particle_state(scene, x, v0);
        auto g = make_grid(scene);
        p2g(state.particles, scene.config.scheme, grav, g);
        grid_momentum_update(g, scene.config.dt, 1e-15);
        g2p(g, scene.config.scheme, scene.config.dt, state.particles);
        Vec<double, 2> expect = v0 + scene.config.dt * grav;
        CHECK((state.particles.v[0] - expect).norm() < 1e-13);
    }
}

TEST_CASE("force-free full cycle conserves momentum for all schemes")
{
    for (auto kind : {SchemeKind::pic, SchemeKind::flip, SchemeKind::blend, SchemeKind::apic, SchemeKind::tpic}) {
        auto scene = small_fluid_scene(kind, 0.3);
        auto state = random_block(scene, 404);
        auto before = particle_momentum_sum(state.particles);
        auto g = make_grid(scene);
        p2g(state.particles, scene.config.scheme, Vec<double, 2>(0, 0), g);
        for (auto& f : g.force)
            f = Vec<double, 2>::Zero();
        grid_momentum_update(g, scene.config.dt, 1e-12);
        g2p(g, scene.config.scheme, scene.config.dt, state.particles);
        auto after = particle_momentum_sum(state.particles);
        CHECK((after - before).norm() <= 1e-10 * before.norm() + 1e-14);
    }
}

TEST_CASE("PIC dissipates kinetic energy; FLIP preserves it for one particle")
{
    auto scene = small_fluid_scene(SchemeKind::pic);
    auto state = random_block(scene, 777);
    double ke_before = 0;
    for (Index p = 0; p < state.particles.size(); ++p)
        ke_before += 0.5 * state.particles.mass[p] * state.particles.v[p].squaredNorm();
    auto g = make_grid(scene);
    p2g(state.particles, scene.config.scheme, Vec<double, 2>(0, 0), g);
    for (auto& f : g.force)
        f = Vec<double, 2>::Zero();
    grid_momentum_update(g, scene.config.dt, 1e-12);
    g2p(g, scene.config.scheme, scene.config.dt, state.particles);
    double ke_after = 0;
    for (Index p = 0; p < state.particles.size(); ++p)
        ke_after += 0.5 * state.particles.mass[p] * state.particles.v[p].squaredNorm();
    CHECK(ke_after <= ke_before * (1 + 1e-12));

    auto flip_scene = small_fluid_scene(SchemeKind::flip);
    auto s1 = single_particle_state(flip_scene, Vec<double, 2>(0.517, 0.493), Vec<double, 2>(0.3, 0.4));
    auto g2 = make_grid(flip_scene);
    p2g(s1.particles, flip_scene.config.scheme, Vec<double, 2>(0, 0), g2);
    grid_momentum_update(g2, flip_scene.config.dt, 1e-15);
    g2p(g2, flip_scene.config.scheme, flip_scene.config.dt, s1.particles);
    CHECK((s1.particles.v[0] - Vec<double, 2>(0.3, 0.4)).norm() < 1e-10);
}

TEST_CASE("repeated transfers are bit-identical")
{
    auto scene = small_fluid_scene(SchemeKind::apic);
    auto state = random_block(scene, 5150);
    auto g1 = make_grid(scene);
    auto g2 = make_grid(scene);
    p2g(state.particles, scene.config.scheme, Vec<double, 2>(0, -9.8), g1);
    p2g(state.particles, scene.config.scheme, Vec<double, 2>(0, -9.8), g2);
    CHECK(g1.hash() == g2.hash());
}
