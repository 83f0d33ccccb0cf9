#include <catch2/catch_amalgamated.hpp>

#include "phaseflow/quantize.hpp"

using namespace phaseflow;

TEST_CASE("constant symbol quantizes to the identity") {
    auto one = builtin_symbol("constant_one");
    one.kernel_plan.push_back({cplx(0.0), 1.0, cplx(0.0), 1.0, cplx(0.0)});
    auto op = weyl_matrix(one, 0.1, 6.0, 512);
    CHECK((op.matrix - Eigen::MatrixXcd::Identity(512, 512)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(log_abs_det(op).value == 0.0);
}

TEST_CASE("trace identity for the Gaussian perturbation") {
    // a = 0.5 e^{-(x^2+xi^2)}: tr(Op(p) - I) = (2 pi h)^{-1} * 0.5 pi = 0.25/h
    auto p = builtin_symbol("elliptic_gauss", {{"c", 0.5}});
    double h = 0.05;
    auto op = weyl_matrix(p, h, 6.0, 512);
    cplx tr = weyl_trace(op);
    CHECK(std::abs(tr.imag()) < 1e-12);
    CHECK(std::abs(tr.real() - 0.25 / h) < 1e-3);
}

TEST_CASE("trace identity holds across the decaying catalog") {
    // (2 pi h)^{-1} integral of p - 1 over phase space
    double h = 0.1;
    struct Case {
        const char* name;
        double integral;
    };
    const Case cases[] = {{"elliptic_gauss", 0.5 * pi},
                          {"ring_zero", -2.0 * pi},
                          {"shifted_ring", -2.0 * pi},
                          {"ring_zero_pow2", -2.0 * pi}};
    for (const auto& c : cases) {
        auto op = weyl_matrix(builtin_symbol(c.name), h, 6.0, 512);
        double expect = c.integral / (2.0 * pi * h);
        INFO(c.name);
        CHECK(std::abs(weyl_trace(op).real() - expect) < 1e-3 * std::abs(expect));
    }
}

TEST_CASE("Op(p)* Op(p) has nonnegative spectrum") {
    auto op = weyl_matrix(builtin_symbol("shifted_ring", {{"b", 0.3}}), 0.1, 6.0, 512);
    Eigen::MatrixXcd gram = op.matrix.adjoint() * op.matrix;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    CHECK(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("real symbols give self-adjoint operators") {
    for (const char* name : {"elliptic_gauss", "ring_zero"}) {
        auto p = builtin_symbol(name);
        auto op = weyl_matrix(p, 0.1, 6.0, 512);
        CHECK(hermiticity_defect(op) < 1e-10);
    }
    // shifted_ring is not real on R^2: genuinely non-self-adjoint
    auto op = weyl_matrix(builtin_symbol("shifted_ring", {{"b", 0.3}}), 0.1, 6.0, 512);
    CHECK(hermiticity_defect(op) > 1e-3);
}

TEST_CASE("closed-form kernel matches the theta-quadrature path") {
    auto p = builtin_symbol("elliptic_gauss", {{"c", 0.4}});
    auto closed = weyl_matrix(p, 0.1, 6.0, 512);
    HolomorphicSymbol q = p;
    q.kernel_plan.clear();  // force quadrature
    auto quad = weyl_matrix(q, 0.1, 6.0, 512);
    double worst = (closed.matrix - quad.matrix).cwiseAbs().maxCoeff();
    CHECK(worst < 1e-10);
}

TEST_CASE("log_abs_det basics and conjugation invariance") {
    auto p = builtin_symbol("elliptic_gauss", {{"c", 0.5}});
    auto op = weyl_matrix(p, 0.1, 6.0, 512);
    double base = log_abs_det(op).value;

    // diag(2, 1/2, 1, ..) has log|det| = 0; similarity leaves det unchanged
    QuantizedOperator diag = op;
    diag.matrix = Eigen::MatrixXcd::Identity(op.N, op.N);
    diag.matrix(0, 0) = 2.0;
    diag.matrix(1, 1) = 0.5;
    CHECK(std::abs(log_abs_det(diag).value) < 1e-14);

    Rng rng(5);
    Eigen::VectorXd d(op.N);
    for (int i = 0; i < op.N; ++i) d(i) = rng.uniform(0.5, 2.0);
    QuantizedOperator conj = op;
    conj.matrix = d.asDiagonal() * op.matrix * d.asDiagonal().inverse();
    CHECK(std::abs(log_abs_det(conj).value - base) < 1e-10 * (1.0 + std::abs(base)));
}

TEST_CASE("refusal when N under-resolves the oscillation") {
    auto p = builtin_symbol("elliptic_gauss", {{"c", 0.5}});
    CHECK_THROWS_AS(weyl_matrix(p, 0.025, 6.0, 512), config_error);
    CHECK_THROWS_AS(weyl_matrix(p, 0.1, 6.0, 513), config_error);  // odd N
}

TEST_CASE("theta truncation above tolerance is refused") {
    HolomorphicSymbol p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    p.kernel_plan.clear();  // force the quadrature path
    WeylOptions opt;
    opt.theta_max = 2.0;  // tail |p - 1| ~ 2 e^{-4} at theta_max, far above 1e-8
    CHECK_THROWS_AS(weyl_matrix(p, 0.1, 6.0, 512, opt), config_error);
}

TEST_CASE("doubling N moves log_abs_det by little") {
    auto p = builtin_symbol("ring_zero");
    double h = 0.05;
    auto a = weyl_matrix(p, h, 6.0, 1024);
    auto b = weyl_matrix(p, h, 6.0, 2048);
    CHECK(std::abs(log_abs_det(a).value - log_abs_det(b).value) < 1e-6 *
          (1.0 + std::abs(log_abs_det(b).value)));
}

TEST_CASE("elliptic determinant identity") {
    auto p = builtin_symbol("elliptic_gauss", {{"c", 0.5}});
    auto res = elliptic_logdet_compare(p, {0.1, 0.05, 0.025});
    CHECK(res.pass);
    CHECK(res.fitted_slope >= 0.8);
    for (const auto& row : res.rows) {
        INFO("h = " << row.h << " E = " << row.error);
        CHECK(row.error < 0.05);
    }
    // halving h from 0.1 to 0.05 roughly halves the error (within factor 2)
    CHECK(res.rows[1].error < res.rows[0].error);
}

TEST_CASE("determinant bound on weight-graph deformations") {
    auto slack = calibrate_slack({0.1, 0.05});
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    std::vector<WeightPtr> phis;
    for (double s : {-0.2, -0.1, 0.0, 0.1, 0.2})
        phis.push_back(std::make_shared<weights::GaussBump>(s, 1.0, 0.0));
    auto res = bound_experiment(p, phis, {0.1, 0.05}, slack, 6.0, 5.0, 801);
    CHECK(res.all_satisfied);
    CHECK(res.rows.size() == 10);
    double spread_min = 1e300, spread_max = -1e300;
    for (const auto& row : res.rows) {
        CHECK(!row.skipped);
        spread_min = std::min(spread_min, row.I_phi);
        spread_max = std::max(spread_max, row.I_phi);
    }
    CHECK(spread_max - spread_min > 1e-3);  // I genuinely varies with phi
}

TEST_CASE("spectral map: Laplacian mass matches the pushforward") {
    auto p = builtin_symbol("ring_zero");
    auto one = builtin_symbol("constant_one");
    auto m = IRManifold::real_phase_space(1, 5.0, {129, 129});
    auto sm = spectral_map(p, one, m, -0.85, 0.75, 41, -0.41, 0.39, 41);
    auto rect = rectangle_mass(sm, -0.6, 0.4, -0.3, 0.3);
    INFO("lap " << rect.laplacian_mass << " vs pi*push " << pi * rect.pushforward_mass);
    CHECK(rect.relative_gap < 0.03);

    // real symbol: off-axis Laplacian mass is noise
    double off_axis = 0.0, total = 0.0;
    for (int i = 1; i + 1 < sm.nre; ++i)
        for (int j = 1; j + 1 < sm.nim; ++j) {
            double im = sm.im0 + j * sm.dim();
            double mass = std::abs(sm.laplacian[sm.at(i, j)]) * sm.dre() * sm.dim();
            total += mass;
            if (std::abs(im) > 2.5 * sm.dim()) off_axis += mass;
        }
    CHECK(off_axis < 0.01 * total);
}

TEST_CASE("spectral map eigenvalue counting band") {
    auto p = builtin_symbol("ring_zero");
    auto one = builtin_symbol("constant_one");
    auto m = IRManifold::real_phase_space(1, 5.0, {129, 129});
    auto sm = spectral_map(p, one, m, -0.85, 0.75, 41, -0.41, 0.39, 41);
    // V(E2) - V(E1) from the counting measure vs the Laplacian band mass
    double E1 = -0.6, E2 = 0.2;
    auto band = rectangle_mass(sm, E1, E2, -0.35, 0.35);
    auto weights = symplectic_volume(m);
    double V = 0.0;
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        cplx rho[2];
        m.node(i, rho);
        cplx v;
        p.eval_raw(rho, v, nullptr);
        if (v.real() > E1 && v.real() <= E2) V += weights[i];
    }
    CHECK(std::abs(band.laplacian_mass - pi * V) < 0.03 * pi * V);
}

TEST_CASE("oscillator pushforward grows quadratically and dominates") {
    auto pure = builtin_symbol("oscillator_quadratic", {{"mu1", 1.0}, {"mu2", 1.0}});
    auto pert = builtin_symbol("oscillator_quadratic",
                               {{"mu1", 1.0}, {"mu2", 1.0}, {"delta", 0.15}});
    std::vector<double> ladder = {0.05, 0.08, 0.12, 0.18, 0.27};
    // p_hat = p: domination is trivially tight
    auto same = pushforward_comparison(pure, pure, 1.5, ladder, 1.3, 41);
    for (const auto& row : same.rows) {
        CHECK(row.inflation_forward < 2e-2);
        CHECK(row.inflation_backward < 2e-2);
    }
    CHECK(std::abs(same.slope - 2.0) < 0.2);
    // mass of D(0,r) ~ pi^3 r^2 for the pure quadratic oscillator
    for (const auto& row : same.rows) {
        double exact = std::pow(pi, 3) * row.r * row.r;
        CHECK(std::abs(row.nu - exact) < 0.15 * exact);
    }

    // cubic perturbation: N0 = 3/2 domination with fitted constants
    auto res = pushforward_comparison(pure, pert, 1.5, ladder, 1.3, 41);
    CHECK(res.domination);
    CHECK(std::abs(res.slope - 2.0) < 0.2);
    CHECK(res.C_forward < 2.0);
    CHECK(res.C_backward < 2.0);

    // vanishing point mismatch is rejected
    auto eg = builtin_symbol("torus_codim2");
    CHECK_THROWS_AS(pushforward_comparison(pure, eg, 1.5, ladder), config_error);
}
