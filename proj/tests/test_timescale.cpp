#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "tsvar/calculus.hpp"
#include "tsvar/timescale.hpp"

using namespace tsvar;
using tsvar::testing::close_rel;
using tsvar::testing::random_grid;
using tsvar::testing::random_scale;

TEST_CASE("scale construction and validation") {
    auto h = make_hZ(0.5, 0, 1);
    REQUIRE(h->size() == 3);
    CHECK(h->point(0) == 0.0);
    CHECK(h->point(1) == 0.5);
    CHECK(h->point(2) == 1.0);

    auto q = make_qZ(2, 0, 3);
    REQUIRE(q->size() == 4);
    CHECK(q->point(0) == 1.0);
    CHECK(q->point(3) == 8.0);

    auto p = make_Pab(1, 1, 2, 0.5);
    REQUIRE(p->size() == 6);
    CHECK(p->point(0) == 0.0);
    CHECK(p->point(1) == 0.5);
    CHECK(p->point(2) == 1.0);
    CHECK(p->point(3) == 2.0);
    CHECK(p->point(4) == 2.5);
    CHECK(p->point(5) == 3.0);
    CHECK(p->sampled());
    CHECK(p->model_step() == 0.5);

    CHECK_THROWS_AS(make_points({0.0, 1.0, 1.0}), input_error);
    CHECK_THROWS_AS(make_points({0.0, 1.0, 0.5}), input_error);
    CHECK_THROWS_AS(make_hZ(0.3, 0, 1), input_error);  // non-integral span
    CHECK_THROWS_AS(make_hZ(-0.5, 0, 1), input_error);
    CHECK_THROWS_AS(make_hZ(0.5, 1, 0), input_error);
    CHECK_THROWS_AS(make_qZ(0.5, 0, 3), input_error);
    CHECK_THROWS_AS(make_Pab(1, 1, 0, 0.5), input_error);
    CHECK_THROWS_AS(make_Pab(1, 1, 2, 0.0), input_error);
    CHECK_THROWS_AS(make_Pab(1, 1, 2, 0.3), input_error);

    CHECK(build_timescale("hZ(0.5, 0, 1)")->size() == 3);
    CHECK(build_timescale("points(0, 0.5, 1)")->size() == 3);
    CHECK_THROWS_AS(build_timescale("circle(1)"), input_error);
    CHECK_THROWS_AS(build_timescale("points(1)"), input_error);
}

TEST_CASE("jump data on hZ and qZ matches the closed forms") {
    double h = 0.25;
    auto ts = make_hZ(h, 0, 2);
    for (int i = 1; i + 1 < ts->size(); ++i) {
        double t = ts->point(i);
        JumpData d = jump_data(*ts, t);
        CHECK(d.sigma == t + h);
        CHECK(d.rho == t - h);
        CHECK(d.mu == h);
        CHECK(d.nu == h);
        CHECK(d.cls.isolated());
    }
    // endpoint conventions
    JumpData lo = jump_data(*ts, 0.0);
    CHECK(lo.rho == 0.0);
    CHECK(lo.nu == 0.0);
    CHECK(lo.cls.right_scattered);
    CHECK(!lo.cls.left_scattered);
    JumpData hi = jump_data(*ts, 2.0);
    CHECK(hi.sigma == 2.0);
    CHECK(hi.mu == 0.0);

    double qq = 2.0;
    auto qs = make_qZ(qq, -2, 4);
    for (int i = 1; i + 1 < qs->size(); ++i) {
        double t = qs->point(i);
        JumpData d = jump_data(*qs, t);
        CHECK(close_rel(d.sigma, qq * t, 1e-14));
        CHECK(close_rel(d.mu, t * (qq - 1), 1e-14));
        CHECK(close_rel(d.nu, t * (qq - 1) / qq, 1e-14));
    }

    CHECK_THROWS_AS(jump_data(*ts, 0.1), input_error);

    // max-point convention on a 3-point list
    auto p3 = make_points({0.0, 0.5, 1.0});
    JumpData top = jump_data(*p3, 1.0);
    CHECK(top.sigma == 1.0);
    CHECK(top.rho == 0.5);
}

TEST_CASE("Pab sample jumps reflect the block gaps") {
    auto p = make_Pab(1, 1, 2, 0.5);
    JumpData d = jump_data(*p, 1.0);
    CHECK(d.sigma == 2.0);
    CHECK(d.mu == 1.0);
    CHECK(d.nu == 0.5);
    // model-aware jumps: 1.0 ends a block, so it is left-dense in the model
    CHECK(p->rho_model_index(p->index_of(1.0)) == p->index_of(1.0));
    CHECK(p->sigma_model_index(p->index_of(1.0)) == p->index_of(2.0));
    CHECK(p->sigma_model_index(p->index_of(0.5)) == p->index_of(0.5));
    CHECK(p->rho_model_index(p->index_of(2.0)) == p->index_of(1.0));
}

TEST_CASE("scale properties") {
    CHECK(scale_properties(*make_hZ(1, 0, 5)).is_isolated);
    CHECK(scale_properties(*make_hZ(1, 0, 5)).is_regular);
    auto pab = make_Pab(1, 1, 2, 0.5);
    CHECK(scale_properties(*pab).is_isolated);
    CHECK(scale_properties(*pab).is_regular);
    auto pts = make_points({0.0, 1.0, 1.5});
    CHECK(scale_properties(*pts).is_regular);
    // direct check of both compositions at all points, minus the endpoint
    // conventions
    for (int i = 1; i < pts->size(); ++i)
        CHECK(pts->sigma_index(pts->rho_index(i)) == i);
    for (int i = 0; i + 1 < pts->size(); ++i)
        CHECK(pts->rho_index(pts->sigma_index(i)) == i);
}

TEST_CASE("delta and nabla derivatives") {
    double h = 0.5;
    auto ts = make_hZ(h, 0, 3);
    GridFunction y = GridFunction::sample(ts, [](double t) { return t * t; });
    GridFunction dy = delta_derivative(y);
    CHECK(dy.lo() == 0);
    CHECK(dy.hi() == ts->size() - 2);
    for (int i = dy.lo(); i <= dy.hi(); ++i) {
        double t = ts->point(i);
        CHECK(close_rel(dy[i], ((t + h) * (t + h) - t * t) / h, 1e-14));
    }
    CHECK_THROWS_AS(dy[ts->size() - 1], input_error); // trimmed point

    GridFunction ny = nabla_derivative(y);
    CHECK(ny.lo() == 1);
    CHECK(ny.hi() == ts->size() - 1);

    // Jackson quotient on the q-scale
    auto qs = make_qZ(2, 0, 5);
    GridFunction f = GridFunction::sample(qs, [](double t) { return t * t * t; });
    GridFunction df = delta_derivative(f);
    for (int i = df.lo(); i <= df.hi(); ++i) {
        double t = qs->point(i);
        double jackson = (std::pow(2 * t, 3) - std::pow(t, 3)) / ((2 - 1) * t);
        CHECK(close_rel(df[i], jackson, 1e-14));
    }

    // constant functions differentiate to zero
    GridFunction c = GridFunction::constant(ts, 3.25);
    CHECK(delta_derivative(c).max_abs() == 0.0);
    CHECK(nabla_derivative(c).max_abs() == 0.0);

    // nabla(y)(t) = delta(y)(rho(t)) exactly on isolated scales
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        auto rts = random_scale(rng);
        GridFunction g = random_grid(rts, rng);
        GridFunction dg = delta_derivative(g);
        GridFunction ng = nabla_derivative(g);
        for (int i = ng.lo(); i <= ng.hi(); ++i)
            CHECK(ng[i] == dg[rts->rho_index(i)]);
    }
}

TEST_CASE("delta and nabla integrals, conventions and one-step identities") {
    auto ts = make_hZ(1, 0, 3);
    GridFunction one = GridFunction::constant(ts, 1.0);
    CHECK(delta_integral(one, 0, 3) == 3.0);
    CHECK(delta_integral(one, 0, 0) == 0.0);
    CHECK(delta_integral(one, 3, 0) == -3.0);
    CHECK(nabla_integral(one, 0, 0) == 0.0);
    CHECK_THROWS_AS(delta_integral(one, 0.5, 3), input_error);

    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        auto rts = random_scale(rng);
        GridFunction f = random_grid(rts, rng);
        int i = static_cast<int>(rng() % static_cast<std::uint64_t>(rts->size() - 1));
        // one-step integrals: mu f and nu f
        CHECK(delta_integral_idx(f, i, i + 1) == doctest::Approx(rts->mu(i) * f[i]).epsilon(1e-14));
        CHECK(nabla_integral_idx(f, i, i + 1) ==
              doctest::Approx(rts->nu(i + 1) * f[i + 1]).epsilon(1e-14));
    }
}

TEST_CASE("calculus identity suite on random isolated scales") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 200; ++rep) {
        auto ts = random_scale(rng);
        GridFunction f = random_grid(ts, rng);
        GridFunction g = random_grid(ts, rng);
        int n = ts->size();

        GridFunction df = delta_derivative(f);
        GridFunction dg = delta_derivative(g);

        // product rule (fg)^D = f^D g + f^sigma g^D
        std::vector<double> fg;
        for (int i = 0; i < n; ++i) fg.push_back(f[i] * g[i]);
        GridFunction dfg = delta_derivative(GridFunction(ts, fg));
        for (int i = 0; i + 1 < n; ++i) {
            double want = df[i] * g[i] + f[ts->sigma_index(i)] * dg[i];
            CHECK(close_rel(dfg[i], want, 1e-10));
        }

        // quotient rule wherever g g^sigma != 0
        bool g_ok = true;
        for (int i = 0; i < n; ++i)
            if (std::fabs(g[i]) < 0.05) g_ok = false;
        if (g_ok) {
            std::vector<double> fq;
            for (int i = 0; i < n; ++i) fq.push_back(f[i] / g[i]);
            GridFunction dq = delta_derivative(GridFunction(ts, fq));
            for (int i = 0; i + 1 < n; ++i) {
                double want = (df[i] * g[i] - f[i] * dg[i]) / (g[i] * g[ts->sigma_index(i)]);
                CHECK(close_rel(dq[i], want, 1e-10));
            }
        }

        // f^sigma = f + mu f^D
        for (int i = 0; i + 1 < n; ++i)
            CHECK(close_rel(f[ts->sigma_index(i)], f[i] + ts->mu(i) * df[i], 1e-12));

        // fundamental theorem
        double total = delta_integral_idx(df, 0, n - 1);
        CHECK(close_rel(total, f[n - 1] - f[0], 1e-12));

        // delta-nabla conversion (both identities of the relation theorem)
        std::vector<double> frho, fsig;
        for (int i = 0; i < n; ++i) {
            frho.push_back(f[ts->rho_index(i)]);
            fsig.push_back(f[ts->sigma_index(i)]);
        }
        CHECK(close_rel(delta_integral_idx(f, 0, n - 1),
                        nabla_integral_idx(GridFunction(ts, frho), 0, n - 1), 1e-12));
        CHECK(close_rel(nabla_integral_idx(f, 0, n - 1),
                        delta_integral_idx(GridFunction(ts, fsig), 0, n - 1), 1e-12));

        // integration by parts, both forms
        auto ip = [&](const GridFunction& u, const GridFunction& dv, const GridFunction& v,
                      const GridFunction& du, bool sigma_on_left) {
            // int u dv = uv| - int du v^sigma  (or the mirrored variant)
            std::vector<double> lhs_v, rhs_v;
            for (int i = 0; i + 1 < n; ++i) {
                if (sigma_on_left) {
                    lhs_v.push_back(u[ts->sigma_index(i)] * dv[i]);
                    rhs_v.push_back(du[i] * v[i]);
                } else {
                    lhs_v.push_back(u[i] * dv[i]);
                    rhs_v.push_back(du[i] * v[ts->sigma_index(i)]);
                }
            }
            lhs_v.push_back(0);
            rhs_v.push_back(0);
            double lhs = delta_integral_idx(GridFunction(ts, lhs_v), 0, n - 1);
            double rhs = u[n - 1] * v[n - 1] - u[0] * v[0] -
                         delta_integral_idx(GridFunction(ts, rhs_v), 0, n - 1);
            CHECK(close_rel(lhs, rhs, 1e-10));
        };
        ip(f, dg, g, df, false); // item 6
        ip(f, dg, g, df, true);  // item 7

        // linearity, additivity over a split point, sign reversal
        int c = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n - 2));
        std::vector<double> lin;
        for (int i = 0; i < n; ++i) lin.push_back(2.5 * f[i] - 1.5 * g[i]);
        CHECK(close_rel(delta_integral_idx(GridFunction(ts, lin), 0, n - 1),
                        2.5 * delta_integral_idx(f, 0, n - 1) -
                            1.5 * delta_integral_idx(g, 0, n - 1),
                        1e-12));
        CHECK(close_rel(delta_integral_idx(f, 0, n - 1),
                        delta_integral_idx(f, 0, c) + delta_integral_idx(f, c, n - 1), 1e-12));
        CHECK(delta_integral_idx(f, n - 1, 0) == -delta_integral_idx(f, 0, n - 1));
    }
}

TEST_CASE("time-scale exponential") {
    auto ts = make_hZ(0.5, 0, 2);
    GridFunction zero = GridFunction::constant(ts, 0.0);
    GridFunction e0 = ts_exponential(zero, 0.0);
    for (int i = 0; i < ts->size(); ++i) CHECK(e0[i] == 1.0);

    // hZ with r = -2/h alternates in sign exactly
    double h = 0.5;
    GridFunction rm = GridFunction::constant(ts, -2.0 / h);
    GridFunction em = ts_exponential(rm, 0.0);
    for (int i = 0; i < ts->size(); ++i) {
        double k = (ts->point(i) - 0.0) / h;
        CHECK(em[i] == std::pow(-1.0, k));
    }

    // qZ(2, 0..3), r = 1, s0 = 1: e(8, 1) = 2 * 3 * 5 = 30
    auto qs = make_qZ(2, 0, 3);
    GridFunction rq = GridFunction::constant(qs, 1.0);
    GridFunction eq = ts_exponential(rq, 1.0);
    CHECK(eq[qs->index_of(8.0)] == 30.0);
    CHECK(eq[qs->index_of(1.0)] == 1.0);

    // sampled scales rejected
    auto pab = make_Pab(1, 1, 2, 0.5);
    GridFunction rp = GridFunction::constant(pab, 1.0);
    CHECK_THROWS_AS(ts_exponential(rp, 0.0), input_error);
}

TEST_CASE("grid function domain carrying") {
    auto ts = make_hZ(1, 0, 4);
    CHECK_THROWS_AS(GridFunction(ts, {1.0, 2.0}), input_error);
    CHECK_THROWS_AS(GridFunction(ts, {1.0, 2.0, std::nan(""), 0.0, 0.0}), input_error);
    GridFunction part(ts, 1, {5.0, 6.0, 7.0});
    CHECK(part[1] == 5.0);
    CHECK(part[3] == 7.0);
    CHECK_THROWS_AS(part[0], input_error);
    CHECK_THROWS_AS(part[4], input_error);
}
