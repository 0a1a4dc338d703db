#pragma once

#include "mpm/stepper.hpp"

namespace mpm {

// Cotangents mirroring every differentiable field of the particle state.
// eps_eq is carried for shape congruence but treated as a non-differentiable
// output: its incoming cotangent is discarded by step_vjp.
template <class T, int dim>
struct StateCotangent {
    std::vector<Vec<T, dim>> x, v;
    std::vector<T> rho, volume, eps_eq, sigma_zz;
    std::vector<Mat<T, dim>> sigma, grad_v, affine;

    static StateCotangent zeros_like(const ParticleSoA<T, dim>& prt)
    {
        StateCotangent c;
        auto n = static_cast<std::size_t>(prt.size());
        c.x.assign(n, Vec<T, dim>::Zero());
        c.v.assign(n, Vec<T, dim>::Zero());
        c.rho.assign(n, T(0));
        c.volume.assign(n, T(0));
        c.eps_eq.assign(n, T(0));
        c.sigma_zz.assign(prt.sigma_zz.size(), T(0));
        c.sigma.assign(n, Mat<T, dim>::Zero());
        c.grad_v.assign(n, Mat<T, dim>::Zero());
        c.affine.assign(prt.affine.size(), Mat<T, dim>::Zero());
        return c;
    }

    void set_zero()
    {
        std::fill(x.begin(), x.end(), Vec<T, dim>::Zero().eval());
        std::fill(v.begin(), v.end(), Vec<T, dim>::Zero().eval());
        std::fill(rho.begin(), rho.end(), T(0));
        std::fill(volume.begin(), volume.end(), T(0));
        std::fill(eps_eq.begin(), eps_eq.end(), T(0));
        std::fill(sigma_zz.begin(), sigma_zz.end(), T(0));
        std::fill(sigma.begin(), sigma.end(), Mat<T, dim>::Zero().eval());
        std::fill(grad_v.begin(), grad_v.end(), Mat<T, dim>::Zero().eval());
        std::fill(affine.begin(), affine.end(), Mat<T, dim>::Zero().eval());
    }

    // this += a * other
    void axpy(T a, const StateCotangent& o)
    {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += a * o.x[i];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += a * o.v[i];
        for (std::size_t i = 0; i < rho.size(); ++i) rho[i] += a * o.rho[i];
        for (std::size_t i = 0; i < volume.size(); ++i) volume[i] += a * o.volume[i];
        for (std::size_t i = 0; i < eps_eq.size(); ++i) eps_eq[i] += a * o.eps_eq[i];
        for (std::size_t i = 0; i < sigma_zz.size(); ++i) sigma_zz[i] += a * o.sigma_zz[i];
        for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i] += a * o.sigma[i];
        for (std::size_t i = 0; i < grad_v.size(); ++i) grad_v[i] += a * o.grad_v[i];
        for (std::size_t i = 0; i < affine.size(); ++i) affine[i] += a * o.affine[i];
    }

    T dot(const StateCotangent& o) const
    {
        T s = T(0);
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i].dot(o.x[i]);
        for (std::size_t i = 0; i < v.size(); ++i) s += v[i].dot(o.v[i]);
        for (std::size_t i = 0; i < rho.size(); ++i) s += rho[i] * o.rho[i];
        for (std::size_t i = 0; i < volume.size(); ++i) s += volume[i] * o.volume[i];
        for (std::size_t i = 0; i < sigma_zz.size(); ++i) s += sigma_zz[i] * o.sigma_zz[i];
        for (std::size_t i = 0; i < sigma.size(); ++i) s += sigma[i].cwiseProduct(o.sigma[i]).sum();
        for (std::size_t i = 0; i < grad_v.size(); ++i) s += grad_v[i].cwiseProduct(o.grad_v[i]).sum();
        for (std::size_t i = 0; i < affine.size(); ++i) s += affine[i].cwiseProduct(o.affine[i]).sum();
        return s;
    }
};

// Gradients with respect to the trajectory-spanning parameters: fluid
// constants and per-segment Coulomb friction. Initial-condition parameters
// flow through the returned StateCotangent at t = 0 instead.
template <class T, int dim>
struct ParamGrads {
    T sound_speed = T(0);
    T viscosity = T(0);
    std::array<std::vector<T>, 2 * dim> wall_friction;

    static ParamGrads zeros_like(const BoundarySpec<T, dim>& bc)
    {
        ParamGrads g;
        for (int w = 0; w < 2 * dim; ++w)
            g.wall_friction[w].assign(bc.walls[w].friction.size(), T(0));
        return g;
    }
};

namespace detail {

// phi-Hessian of one stencil node with respect to particle position.
template <class T, int dim>
Mat<T, dim> stencil_hessian(const Stencil<T, dim>& st, const std::array<int, dim>& o)
{
    Mat<T, dim> H;
    for (int a = 0; a < dim; ++a) {
        for (int b = a; b < dim; ++b) {
            T r = a == b ? st.ddw[a][o[a]] : st.dw[a][o[a]] * st.dw[b][o[b]];
            for (int c = 0; c < dim; ++c)
                if (c != a && c != b)
                    r *= st.w[c][o[c]];
            H(a, b) = r;
            H(b, a) = r;
        }
    }
    return H;
}

// VJP of one grid velocity correction at the forward branch: returns the
// input cotangent; accumulates the friction-coefficient cotangent.
template <class T, int dim>
Vec<T, dim> node_correction_vjp(const NodeCorrection<T, dim>& c, const Vec<T, dim>& v_in,
                                const Vec<T, dim>& cot, ParamGrads<T, dim>& pg)
{
    switch (c.kind) {
    case NodeCorrection<T, dim>::slip: {
        Vec<T, dim> r = cot;
        r[c.axis] = T(0);
        return r;
    }
    case NodeCorrection<T, dim>::zero:
        return Vec<T, dim>::Zero();
    case NodeCorrection<T, dim>::obstacle: {
        if (v_in.dot(c.normal) < T(0))
            return cot - c.normal * c.normal.dot(cot);
        return cot;
    }
    case NodeCorrection<T, dim>::coulomb: {
        T vn = v_in.dot(c.normal);
        if (vn <= T(0))
            return cot;
        Vec<T, dim> t = v_in - vn * c.normal;
        T tn = t.norm();
        if (tn <= c.mu * vn)
            return Vec<T, dim>::Zero(); // stick: constant output
        // out = s(v) t(v), s = 1 - mu vn / tn
        T s = T(1) - c.mu * vn / tn;
        Vec<T, dim> that = t / tn;
        T t_dot_cot = t.dot(cot);
        Vec<T, dim> r = s * (cot - c.normal * c.normal.dot(cot));
        r += t_dot_cot * (-(c.mu / tn) * c.normal + (c.mu * vn / (tn * tn)) * that);
        pg.wall_friction[c.wall][static_cast<std::size_t>(c.segment)] += -vn * that.dot(cot);
        return r;
    }
    }
    return cot;
}

// VJP of the fluid stress/density/volume update for one particle.
template <class T, int dim>
void fluid_vjp(const FluidParams<T>& fl, T rho, T volume, const Mat<T, dim>& grad_v_new, T dt,
               const Mat<T, dim>& sigma_cot, T rho_cot, T volume_cot,
               Mat<T, dim>& grad_v_new_cot, T& rho_in_cot, T& volume_in_cot,
               T& c_cot, T& mu_cot)
{
    Mat<T, dim> dd = strain_increment(grad_v_new, dt);
    T trd = dd.trace();
    T den = T(1) + trd;
    T rho_new = rho / den;
    T c = fl.sound_speed;
    T k = fl.rate_form ? fl.viscosity / dt : fl.viscosity;

    T p_cot = -sigma_cot.trace();
    mu_cot += (sigma_cot.cwiseProduct(-(T(2) / T(3)) * trd * Mat<T, dim>::Identity() + T(2) * dd)).sum()
        * (fl.rate_form ? T(1) / dt : T(1));
    T trd_cot = -(T(2) / T(3)) * k * sigma_cot.trace();
    Mat<T, dim> dd_cot = T(2) * k * sigma_cot;

    c_cot += T(2) * c * (rho_new - fl.rho0) * p_cot;
    T rho_new_cot = rho_cot + c * c * p_cot;

    rho_in_cot += rho_new_cot / den;
    T den_cot = -(rho / (den * den)) * rho_new_cot;

    volume_in_cot += den * volume_cot;
    den_cot += volume * volume_cot;

    trd_cot += den_cot;
    dd_cot += trd_cot * Mat<T, dim>::Identity();
    grad_v_new_cot += dt * T(0.5) * (dd_cot + dd_cot.transpose());
}

// VJP of the Drucker-Prager update for one particle, at the zone/branch the
// forward pass selected. eps_eq and zone label cotangents are discarded.
template <class T, int dim>
void dp_vjp(const DruckerPragerParams<T>& m, const Mat<T, dim>& sigma_in, T sigma_zz_in,
            const Mat<T, dim>& grad_v_new, T dt,
            const Mat<T, dim>& sigma_cot, T sigma_zz_cot, T rho_cot, T volume_cot, T rho_in, T volume_in,
            Mat<T, dim>& grad_v_new_cot, Mat<T, dim>& sigma_in_cot, T& sigma_zz_in_cot,
            T& rho_in_cot, T& volume_in_cot)
{
    using M3 = Eigen::Matrix<T, 3, 3>;
    M3 I3 = M3::Identity();
    M3 S = M3::Zero(), L = M3::Zero();
    S.template topLeftCorner<dim, dim>() = sigma_in;
    if constexpr (dim == 2)
        S(2, 2) = sigma_zz_in;
    L.template topLeftCorner<dim, dim>() = grad_v_new;

    M3 dd = T(0.5) * (L + L.transpose()) * dt;
    M3 dw = T(0.5) * (L - L.transpose()) * dt;
    M3 sR = S + S * dw.transpose() + dw * S.transpose();
    T trd = dd.trace();
    M3 trial = sR + T(2) * m.G * dd + (m.K - T(2) * m.G / T(3)) * trd * I3;
    DpTrial<T> tr = dp_trial_invariants(trial, m);
    DpZone zone = dp_classify(tr);
    M3 dev = trial - tr.sigma_m * I3;

    // cotangent of the output stress in the 3x3 embedding
    M3 out_cot = M3::Zero();
    out_cot.template topLeftCorner<dim, dim>() = sigma_cot;
    if constexpr (dim == 2)
        out_cot(2, 2) += sigma_zz_cot;

    // reduce to trial cotangent per zone
    M3 trial_cot = M3::Zero();
    auto assemble = [&](const M3& dev_cot, T sm_cot) {
        // dev = trial - sm I, sm = tr(trial)/3
        trial_cot += dev_cot;
        T sm_total = sm_cot - dev_cot.trace();
        trial_cot += (sm_total / T(3)) * I3;
    };

    if (zone == DpZone::elastic) {
        trial_cot = out_cot;
    } else if (zone == DpZone::shear) {
        T denom = m.G + m.K * m.q_phi * m.q_psi;
        T dlam = tr.fs / denom;
        T sm_new = tr.sigma_m - m.K * m.q_psi * dlam;
        T tau_new = m.k_phi - m.q_phi * sm_new;
        if (tr.tau <= T(0) || tau_new < T(0)) {
            // apex: constant output, nothing flows back through the stress
        } else {
            bool capped = sm_new > m.sigma_t;
            T ratio = tau_new / tr.tau;
            M3 dev_cot = ratio * out_cot;
            T ratio_cot = out_cot.cwiseProduct(dev).sum();
            T sm_new_cot = capped ? T(0) : out_cot.trace();
            T tau_new_cot = ratio_cot / tr.tau;
            T tau_cot = -ratio_cot * tau_new / (tr.tau * tr.tau);
            sm_new_cot += -m.q_phi * tau_new_cot;
            // sm_new = sm - K q_psi dlam, dlam = fs / denom, fs = tau - k_phi + q_phi sm
            T sm_cot = sm_new_cot;
            T dlam_cot = -m.K * m.q_psi * sm_new_cot;
            T fs_cot = dlam_cot / denom;
            tau_cot += fs_cot;
            sm_cot += m.q_phi * fs_cot;
            if (tr.tau > T(0))
                dev_cot += (tau_cot / (T(2) * tr.tau)) * dev;
            assemble(dev_cot, sm_cot);
        }
    } else { // tensile
        if (tr.tau > m.tau_P) {
            // corner clamp: out = (tau_P / tau) dev + sigma_t I
            T ratio = m.tau_P / tr.tau;
            M3 dev_cot = ratio * out_cot;
            T ratio_cot = out_cot.cwiseProduct(dev).sum();
            T tau_cot = -ratio_cot * m.tau_P / (tr.tau * tr.tau);
            if (tr.tau > T(0))
                dev_cot += (tau_cot / (T(2) * tr.tau)) * dev;
            assemble(dev_cot, T(0));
        } else {
            // out = trial + (sigma_t - sm) I
            trial_cot = out_cot;
            T sm_cot = -out_cot.trace();
            trial_cot += (sm_cot / T(3)) * I3;
        }
    }

    // trial = sR + 2G dd + (K - 2G/3) tr(dd) I
    M3 sR_cot = trial_cot;
    M3 dd_cot = T(2) * m.G * trial_cot + (m.K - T(2) * m.G / T(3)) * trial_cot.trace() * I3;

    // volume/density update: V' = den V, rho' = rho / den, den = 1 + trd
    T den = T(1) + trd;
    T den_cot = volume_in * volume_cot - (rho_in / (den * den)) * rho_cot;
    volume_in_cot += den * volume_cot;
    rho_in_cot += rho_cot / den;
    dd_cot += den_cot * I3;

    // sR = S + S dw^T + dw S^T
    M3 S_cot = sR_cot + sR_cot * dw + dw.transpose() * sR_cot;
    M3 dw_cot = sR_cot.transpose() * S + sR_cot * S;

    M3 L_cot = dt * (T(0.5) * (dd_cot + dd_cot.transpose()) + T(0.5) * (dw_cot - dw_cot.transpose()));
    grad_v_new_cot += L_cot.template topLeftCorner<dim, dim>();
    sigma_in_cot += S_cot.template topLeftCorner<dim, dim>();
    if constexpr (dim == 2)
        sigma_zz_in_cot += S_cot(2, 2);
}

} // namespace detail

// Scratch buffers reused across step_vjp calls.
template <class T, int dim>
struct AdjointWorkspace {
    Grid<T, dim> grid;
    std::vector<Vec<T, dim>> v_tilde;       // pre-correction grid velocity
    std::vector<T> gm_cot;                  // grid mass cotangent
    std::vector<Vec<T, dim>> gmom_cot, gf_cot, gv_cot, gvold_cot;
    ParticleSoA<T, dim> out;                // forward outputs of the step
    std::vector<Stencil<T, dim>> stencils;
    std::vector<Mat<T, dim>> apic_A, apic_Dinv;
    std::vector<Mat<T, dim>> grad_v_new_cot;
    std::vector<NodeCorrection<T, dim>> corrections;
    std::vector<Vec<T, dim>> chain; // per-node correction intermediates

    void configure(const Scene<T, dim>& scene)
    {
        grid.configure(scene.config.cells, scene.config.dh, scene.config.origin);
        std::size_t n = grid.num_nodes();
        v_tilde.resize(n);
        gm_cot.resize(n);
        gmom_cot.resize(n);
        gf_cot.resize(n);
        gv_cot.resize(n);
        gvold_cot.resize(n);
    }
};

// Transpose of one USL step. `input` must be the exact forward input of the
// step being differentiated; the grid intermediates are recomputed here
// (they are never stored along the trajectory). Accumulates the parameter
// cotangent into `pg` and writes the input-state cotangent to `cot_in`.
template <class T, int dim>
void step_vjp(const Scene<T, dim>& scene, const SimState<T, dim>& input,
              const StateCotangent<T, dim>& cot_out, StateCotangent<T, dim>& cot_in,
              ParamGrads<T, dim>& pg, AdjointWorkspace<T, dim>& ws)
{
    const auto& cfg = scene.config;
    const auto& prt = input.particles;
    const T dt = cfg.dt;
    const T alpha = cfg.scheme.flip_fraction();
    const bool apic = cfg.scheme.uses_affine();
    const bool tpic = cfg.scheme.uses_velocity_gradient_transfer();
    const Index n = prt.size();

    // ---- forward replay ------------------------------------------------
    ws.stencils.resize(static_cast<std::size_t>(n));
    for (Index p = 0; p < n; ++p)
        ws.stencils[static_cast<std::size_t>(p)] =
            shape_and_grad(prt.x[p], cfg.dh, cfg.origin, cfg.cells, p);
    if (apic) {
        ws.apic_A.resize(static_cast<std::size_t>(n));
        ws.apic_Dinv.resize(static_cast<std::size_t>(n));
        for (Index p = 0; p < n; ++p) {
            Mat<T, dim> D = Mat<T, dim>::Zero();
            const auto& st = ws.stencils[static_cast<std::size_t>(p)];
            for_each_offset<dim>([&](const std::array<int, dim>& o) {
                std::array<int, dim> idx;
                for (int a = 0; a < dim; ++a)
                    idx[a] = st.base[a] + o[a];
                Vec<T, dim> r = ws.grid.node_position(idx) - prt.x[p];
                D += st.weight(o) * r * r.transpose();
            });
            ws.apic_Dinv[static_cast<std::size_t>(p)] = D.inverse();
            ws.apic_A[static_cast<std::size_t>(p)] = prt.affine[p] * ws.apic_Dinv[static_cast<std::size_t>(p)];
        }
    }
    p2g(prt, cfg.scheme, cfg.gravity, ws.grid);
    grid_momentum_update(ws.grid, dt, scene.mass_epsilon);
    ws.v_tilde = ws.grid.v;
    apply_grid_corrections(ws.grid, scene.boundary, scene.obstacles);
    ws.out = prt;
    g2p(ws.grid, cfg.scheme, dt, ws.out);

    // ---- reverse sweep ---------------------------------------------------
    cot_in = StateCotangent<T, dim>::zeros_like(prt);
    ws.grad_v_new_cot.assign(static_cast<std::size_t>(n), Mat<T, dim>::Zero());

    // (1) constitutive transpose (runs first: it was the last forward phase)
    if (std::holds_alternative<FluidParams<T>>(scene.material)) {
        const auto& fl = std::get<FluidParams<T>>(scene.material);
        for (Index p = 0; p < n; ++p) {
            detail::fluid_vjp(fl, prt.rho[p], prt.volume[p], ws.out.grad_v[p], dt,
                              cot_out.sigma[p], cot_out.rho[p], cot_out.volume[p],
                              ws.grad_v_new_cot[static_cast<std::size_t>(p)],
                              cot_in.rho[p], cot_in.volume[p], pg.sound_speed, pg.viscosity);
        }
    } else {
        const auto& dp = std::get<DruckerPragerParams<T>>(scene.material);
        for (Index p = 0; p < n; ++p) {
            T szz_in = dim == 2 ? prt.sigma_zz[p] : T(0);
            T szz_cot = dim == 2 ? cot_out.sigma_zz[p] : T(0);
            T szz_in_cot = T(0);
            detail::dp_vjp(dp, prt.sigma[p], szz_in, ws.out.grad_v[p], dt,
                           cot_out.sigma[p], szz_cot, cot_out.rho[p], cot_out.volume[p],
                           prt.rho[p], prt.volume[p],
                           ws.grad_v_new_cot[static_cast<std::size_t>(p)],
                           cot_in.sigma[p], szz_in_cot, cot_in.rho[p], cot_in.volume[p]);
            if constexpr (dim == 2)
                cot_in.sigma_zz[p] = szz_in_cot;
        }
    }
    // cot_out.grad_v joins the constitutive contribution
    for (Index p = 0; p < n; ++p)
        ws.grad_v_new_cot[static_cast<std::size_t>(p)] += cot_out.grad_v[p];

    // (2) G2P transpose: particle cotangents -> grid velocity cotangents
    std::fill(ws.gv_cot.begin(), ws.gv_cot.end(), Vec<T, dim>::Zero().eval());
    std::fill(ws.gvold_cot.begin(), ws.gvold_cot.end(), Vec<T, dim>::Zero().eval());
    for (Index p = 0; p < n; ++p) {
        const auto& st = ws.stencils[static_cast<std::size_t>(p)];
        const Vec<T, dim> x_cot = cot_out.x[p];
        const Vec<T, dim> v_cot = cot_out.v[p];
        const Mat<T, dim>& L_cot = ws.grad_v_new_cot[static_cast<std::size_t>(p)];
        cot_in.v[p] += alpha * v_cot;
        cot_in.x[p] += x_cot;
        Vec<T, dim> pic_cot = (T(1) - alpha) * v_cot + dt * x_cot;
        Vec<T, dim> inc_cot = alpha * v_cot;
        Mat<T, dim> B_cot = apic ? cot_out.affine[p] : Mat<T, dim>::Zero();
        Vec<T, dim> xp_cot = Vec<T, dim>::Zero();
        for_each_offset<dim>([&](const std::array<int, dim>& o) {
            std::array<int, dim> idx;
            for (int a = 0; a < dim; ++a)
                idx[a] = st.base[a] + o[a];
            std::size_t ni = ws.grid.node_index(idx);
            T phi = st.weight(o);
            Vec<T, dim> gw = st.grad(o);
            Mat<T, dim> H = detail::stencil_hessian(st, o);
            const Vec<T, dim>& w = ws.grid.v[ni];
            const Vec<T, dim>& u = ws.grid.v_old[ni];

            Vec<T, dim> gv_add = phi * (pic_cot + inc_cot) + L_cot * gw;
            ws.gvold_cot[ni] -= phi * inc_cot;
            xp_cot += gw * (pic_cot.dot(w) + inc_cot.dot(w - u));
            xp_cot += H * (L_cot.transpose() * w);
            if (apic) {
                Vec<T, dim> r = ws.grid.node_position(idx) - prt.x[p];
                gv_add += phi * (B_cot * r);
                xp_cot += gw * (w.dot(B_cot * r)) - phi * (B_cot.transpose() * w);
            }
            ws.gv_cot[ni] += gv_add;
        });
        cot_in.x[p] += xp_cot;
    }

    // (3) correction transpose: v_new cotangent -> v_tilde cotangent (+ mu)
    for (std::size_t i = 0; i < ws.grid.num_nodes(); ++i) {
        if (ws.grid.mass[i] <= scene.mass_epsilon) {
            ws.gv_cot[i] = Vec<T, dim>::Zero();
            ws.gvold_cot[i] = Vec<T, dim>::Zero();
            continue;
        }
        collect_node_corrections(ws.grid, scene.boundary, scene.obstacles,
                                 ws.grid.node_multi_index(i), ws.corrections);
        if (ws.corrections.empty())
            continue;
        ws.chain.resize(ws.corrections.size() + 1);
        ws.chain[0] = ws.v_tilde[i];
        for (std::size_t k = 0; k < ws.corrections.size(); ++k)
            ws.chain[k + 1] = apply_node_correction(ws.corrections[k], ws.chain[k]);
        Vec<T, dim> cot = ws.gv_cot[i];
        for (std::size_t k = ws.corrections.size(); k-- > 0;)
            cot = detail::node_correction_vjp(ws.corrections[k], ws.chain[k], cot, pg);
        ws.gv_cot[i] = cot;
    }

    // (4) grid momentum update transpose
    for (std::size_t i = 0; i < ws.grid.num_nodes(); ++i) {
        T mass = ws.grid.mass[i];
        if (mass <= scene.mass_epsilon) {
            ws.gm_cot[i] = T(0);
            ws.gmom_cot[i] = Vec<T, dim>::Zero();
            ws.gf_cot[i] = Vec<T, dim>::Zero();
            continue;
        }
        Vec<T, dim> vt_cot = ws.gv_cot[i];
        Vec<T, dim> u_cot = ws.gvold_cot[i] + vt_cot;
        ws.gf_cot[i] = (dt / mass) * vt_cot;
        ws.gmom_cot[i] = u_cot / mass;
        ws.gm_cot[i] = -(ws.grid.momentum[i].dot(u_cot)) / (mass * mass)
                     - dt * (ws.grid.force[i].dot(vt_cot)) / (mass * mass);
    }

    // (5) P2G transpose: grid cotangents -> particle cotangents
    for (Index p = 0; p < n; ++p) {
        const auto& st = ws.stencils[static_cast<std::size_t>(p)];
        T mass = prt.mass[p];
        T volume = prt.volume[p];
        const Mat<T, dim>& sig = prt.sigma[p];
        Mat<T, dim> A = Mat<T, dim>::Zero();
        if (apic)
            A = ws.apic_A[static_cast<std::size_t>(p)];
        else if (tpic)
            A = prt.grad_v[p];
        bool affine = apic || tpic;
        Mat<T, dim> A_cot = Mat<T, dim>::Zero();
        Vec<T, dim> xp_cot = Vec<T, dim>::Zero();
        for_each_offset<dim>([&](const std::array<int, dim>& o) {
            std::array<int, dim> idx;
            for (int a = 0; a < dim; ++a)
                idx[a] = st.base[a] + o[a];
            std::size_t ni = ws.grid.node_index(idx);
            T phi = st.weight(o);
            Vec<T, dim> gw = st.grad(o);
            Mat<T, dim> H = detail::stencil_hessian(st, o);
            const Vec<T, dim>& mom_cot = ws.gmom_cot[ni];
            const Vec<T, dim>& f_cot = ws.gf_cot[ni];

            cot_in.v[p] += mass * phi * mom_cot;
            Vec<T, dim> vel_aug = prt.v[p];
            if (affine) {
                Vec<T, dim> r = ws.grid.node_position(idx) - prt.x[p];
                vel_aug += A * r;
                A_cot += mass * phi * mom_cot * r.transpose();
                xp_cot -= mass * phi * (A.transpose() * mom_cot);
            }
            cot_in.sigma[p] += -volume * f_cot * gw.transpose();
            cot_in.volume[p] += -(sig * gw).dot(f_cot);
            xp_cot += mass * ws.gm_cot[ni] * gw;
            xp_cot += mass * mom_cot.dot(vel_aug) * gw;
            xp_cot += mass * cfg.gravity.dot(f_cot) * gw;
            xp_cot += -volume * (H * (sig * f_cot));
        });
        cot_in.x[p] += xp_cot;
        if (apic)
            cot_in.affine[p] += A_cot * ws.apic_Dinv[static_cast<std::size_t>(p)];
        else if (tpic)
            cot_in.grad_v[p] += A_cot;
    }
}

} // namespace mpm
