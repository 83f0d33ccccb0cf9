#include <catch2/catch_amalgamated.hpp>

#include "phaseflow/variation.hpp"

using namespace phaseflow;

namespace {

IRManifold plane(int nodes = 401, double R = 5.0) {
    return IRManifold::real_phase_space(1, R, {nodes, nodes});
}

GeneratorFunction bump(double a, double x0, double xi0, double coef = 1.0) {
    std::ostringstream id;
    id << "bump:" << a << "," << x0 << "," << xi0;
    return GeneratorFunction::from_basis(1, {id.str()}, {coef});
}

// fourth-order difference of I_eps through the flow module
double fd_gradient(const IRManifold& m, const HolomorphicSymbol& p, const GeneratorFunction& f,
                   double eps, double h = 1e-3) {
    auto base = to_flow_grid(m, 2.0);
    auto p1 = flow(base, f, h, h, 2.0);
    auto p2 = flow(p1, f, h, h, 2.0);
    auto m1 = flow(base, f.scaled(-1.0), h, h, 2.0);
    auto m2 = flow(m1, f.scaled(-1.0), h, h, 2.0);
    double I1 = compute_I_eps(p1, p, eps).value;
    double I2 = compute_I_eps(p2, p, eps).value;
    double J1 = compute_I_eps(m1, p, eps).value;
    double J2 = compute_I_eps(m2, p, eps).value;
    return (8.0 * (I1 - J1) - (I2 - J2)) / (12.0 * h);
}

double fd_hessian(const IRManifold& m, const HolomorphicSymbol& p, const GeneratorFunction& f,
                  double eps, double h = 1e-2) {
    auto base = to_flow_grid(m, 2.0);
    auto plus = flow(base, f, h, h / 4, 2.0);
    auto minus = flow(base, f.scaled(-1.0), h, h / 4, 2.0);
    double I0 = compute_I_eps(base, p, eps).value;
    double Ip = compute_I_eps(plus, p, eps).value;
    double Im_ = compute_I_eps(minus, p, eps).value;
    return (Ip - 2.0 * I0 + Im_) / (h * h);
}

}  // namespace

TEST_CASE("gradient pairing: trivial vanishing cases") {
    auto m = plane(201);
    auto ring = builtin_symbol("ring_zero");

    // constant f: H_f = 0
    auto fconst = GeneratorFunction::from_basis(1, {"mono:0,0"}, {2.5});
    CHECK(gradient_pairing_eps(m, ring, fconst, 0.1).pairing_value == 0.0);

    // real symbol on the real manifold: {p, pbar} = 0 pointwise
    auto fb = bump(0.8, 0.4, -0.2);
    CHECK(gradient_pairing_eps(m, ring, fb, 0.1).pairing_value == 0.0);
    CHECK(gradient_pairing_eps(m, ring, fb, 0.05).pairing_value == 0.0);
}

TEST_CASE("regularized gradient matches finite differences through the flow") {
    auto m = plane(801);
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    Rng rng(31);
    for (int trial = 0; trial < 4; ++trial) {
        auto f = bump(rng.uniform(0.4, 1.2), rng.uniform(-1, 1), rng.uniform(-1, 1),
                      rng.uniform(0.5, 1.5));
        for (double eps : {0.1, 0.05}) {
            double pred = gradient_pairing_eps(m, p, f, eps).pairing_value;
            double fd = fd_gradient(m, p, f, eps);
            INFO("trial " << trial << " eps " << eps << " pred " << pred << " fd " << fd);
            CHECK(std::abs(pred - fd) < 1e-5 * (1.0 + std::abs(fd)));
        }
    }
}

TEST_CASE("pairing is linear in f and kills constants") {
    auto m = plane(201);
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    auto f1 = bump(0.7, 0.5, 0.0);
    auto f2 = bump(1.1, -0.4, 0.6);
    double a = 0.37, b = -1.42, eps = 0.1;
    GeneratorFunction combo;
    combo.n = 1;
    combo.terms.push_back({a * f1.terms[0].coef, f1.terms[0].basis, {1.0}});
    combo.terms.push_back({b * f2.terms[0].coef, f2.terms[0].basis, {1.0}});
    double lhs = gradient_pairing_eps(m, p, combo, eps).pairing_value;
    double rhs = a * gradient_pairing_eps(m, p, f1, eps).pairing_value +
                 b * gradient_pairing_eps(m, p, f2, eps).pairing_value;
    CHECK(std::abs(lhs - rhs) < 1e-10 * (1.0 + std::abs(rhs)));

    GeneratorFunction shifted = f1;
    shifted.terms.push_back({5.0, parse_basis_element("mono:0,0", 1), {1.0}});
    double v0 = gradient_pairing_eps(m, p, f1, eps).pairing_value;
    double v1 = gradient_pairing_eps(m, p, shifted, eps).pairing_value;
    CHECK(std::abs(v0 - v1) < 1e-12 * (1.0 + std::abs(v0)));
}

TEST_CASE("two-route gradient pairing reconciles and matches compute_I differences") {
    auto m = plane(1601);
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    auto f = bump(0.8, 0.6, 0.1);
    auto rep = gradient_pairing(m, p, f);
    CHECK(rep.residuals["gap"] < 5e-4 * (1.0 + std::abs(rep.pairing_value)));

    // central difference of the extrapolated I through the flow
    double h = 1e-3;
    auto base = to_flow_grid(m, 2.0);
    auto plus = flow(base, f, h, h, 2.0);
    auto minus = flow(base, f.scaled(-1.0), h, h, 2.0);
    double fd =
        (compute_I(plus, p, 0.2, 4).value - compute_I(minus, p, 0.2, 4).value) / (2.0 * h);
    CHECK(std::abs(rep.pairing_value - fd) < 2e-4);
}

TEST_CASE("torus criticality: pairings vanish for every generator") {
    auto torus = builtin_symbol("torus_codim2");
    auto m = IRManifold::real_phase_space(2, 2.0, {33, 33, 33, 33});
    Rng rng(17);
    for (int k = 0; k < 3; ++k) {
        GeneratorFunction f = GeneratorFunction::from_basis(
            2, {"monobump:0.5,1,0,0,0", "monobump:0.5,0,1,1,0"},
            {rng.uniform(-1, 1), rng.uniform(-1, 1)});
        CHECK(std::abs(gradient_pairing_eps(m, torus, f, 0.1).pairing_value) < 1e-12);
    }
}

TEST_CASE("gradient eps rate") {
    auto m = plane(401);
    auto ladder = eps_ladder(0.2, 5);
    // elliptic symbol: no zeros, gaps at noise level, sentinel infinity
    auto eg = builtin_symbol("elliptic_gauss", {{"c", 0.5}});
    auto f = bump(0.9, 0.3, -0.5);
    double q1 = gradient_eps_rate(m, eg, f, ladder);
    CHECK(std::isinf(q1));
    // ring_zero: both sides vanish identically
    auto ring = builtin_symbol("ring_zero");
    CHECK(std::isinf(gradient_eps_rate(m, ring, f, ladder)));
    // shifted ring: a genuine positive rate
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    double q2 = gradient_eps_rate(m, p, f, ladder);
    CHECK(q2 > 0.0);
}

TEST_CASE("autonomous hessian: positivity and finite differences") {
    auto m = plane(401);
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    Rng rng(13);
    for (int trial = 0; trial < 3; ++trial) {
        auto f = bump(rng.uniform(0.4, 1.0), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8));
        double eps = 0.1;
        double hess = hessian_autonomous(m, p, f, eps);
        CHECK(hess >= 0.0);
        double fd = (4.0 * fd_hessian(m, p, f, eps, 5e-3) - fd_hessian(m, p, f, eps, 1e-2)) / 3.0;
        INFO("hess " << hess << " fd " << fd);
        CHECK(std::abs(hess - fd) < 1e-4 * (1.0 + std::abs(fd)));
    }
}

TEST_CASE("hessian vanishes when f is a function of p") {
    // torus toy: f = Re p has H_f p = 0 pointwise (both factor brackets vanish)
    auto torus = builtin_symbol("torus_codim2");
    auto m = IRManifold::real_phase_space(2, 2.0, {17, 17, 17, 17});
    auto f = GeneratorFunction::from_basis(
        2, {"mono:2,0,0,0", "mono:0,0,2,0", "mono:0,0,0,0"}, {1.0, 1.0, -1.0});
    CHECK(hessian_autonomous(m, torus, f, 0.1) == 0.0);
}

TEST_CASE("non-autonomous hessian") {
    auto m = plane(401);
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    auto f0 = bump(0.8, 0.5, -0.1);
    double eps = 0.1;

    // dt f = 0 reduces to the autonomous case
    CHECK(hessian_nonautonomous(m, p, f0, eps) == hessian_autonomous(m, p, f0, eps));

    // f_t = (1 + t) f0: correction equals the pairing against f0
    GeneratorFunction family = f0;
    family.terms[0].tpoly = {1.0, 1.0};
    double expect = hessian_autonomous(m, p, f0, eps) +
                    gradient_pairing_eps(m, p, f0, eps).pairing_value;
    CHECK(std::abs(hessian_nonautonomous(m, p, family, eps) - expect) < 1e-14);

    // second central difference along the non-autonomous family
    double h = 1e-2;
    auto base = to_flow_grid(m, 2.0);
    auto flow_family = [&](double dir) {
        // integrate the time-dependent field with small steps
        IRManifold cur = base;
        int steps = 8;
        double dt = h / steps;
        GeneratorFunction gf = family;
        if (dir < 0)
            for (auto& t : gf.terms) {
                // reverse time: f_{-t} with the flow direction flipped
                t.tpoly = {-t.tpoly[0], t.tpoly.size() > 1 ? t.tpoly[1] : 0.0};
            }
        return flow(cur, gf, h, dt, 2.0);
    };
    auto plus = flow_family(+1);
    auto minus = flow_family(-1);
    double I0 = compute_I_eps(base, p, eps).value;
    double fd2 = (compute_I_eps(plus, p, eps).value - 2.0 * I0 +
                  compute_I_eps(minus, p, eps).value) /
                 (h * h);
    double pred = hessian_nonautonomous(m, p, family, eps);
    INFO("pred " << pred << " fd2 " << fd2);
    CHECK(std::abs(pred - fd2) < 1e-3 * (1.0 + std::abs(fd2)));
}

TEST_CASE("minimize: monotone descent on shifted_ring") {
    auto m = plane(201);
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    MinimizeOptions opt;
    opt.max_steps = 6;
    opt.tube_radius = 1.5;
    auto res = minimize(m, p, {"bump:0.6,0.8,0.0", "bump:0.6,-0.8,0.0", "x1"}, opt);
    REQUIRE(res.trajectory.size() >= 2);
    for (std::size_t k = 1; k < res.trajectory.size(); ++k)
        CHECK(res.trajectory[k] <= res.trajectory[k - 1] + 1e-12);
    // at least one accepted step decreased I
    CHECK(res.trajectory.back() < res.trajectory.front() + 1e-12);
}

TEST_CASE("minimize: critical start returns immediately") {
    auto torus = builtin_symbol("torus_codim2");
    auto m = IRManifold::real_phase_space(2, 2.0, {21, 21, 21, 21});
    MinimizeOptions opt;
    opt.max_steps = 3;
    auto res = minimize(m, torus, {"monobump:0.5,1,0,0,0"}, opt);
    CHECK(res.status == "critical");
    CHECK(res.log.size() == 1);
}

TEST_CASE("minimality experiment on the real ring") {
    auto m = plane(1201);
    auto ring = builtin_symbol("ring_zero");
    std::vector<GeneratorFunction> fams = {bump(0.8, 0.6, 0.0), bump(0.5, 0.0, -0.7),
                                           GeneratorFunction::from_basis(1, {"x1"}, {0.3})};
    auto res = minimality_experiment(m, ring, fams, {0.1, 0.2}, 1.8);
    CHECK(res.pass);
    CHECK(res.min_deviation >= -res.error_margin);
    // second differences at spacing 0.1 amplify I noise by 400; bound honestly
    CHECK(res.min_second_difference >= -400.0 * res.error_margin);
}

TEST_CASE("minimality rejects non-critical starts") {
    auto m = plane(201);
    auto p = builtin_symbol("shifted_ring", {{"b", 0.3}});
    std::vector<GeneratorFunction> fams = {bump(0.8, 0.6, 0.0)};
    CHECK_THROWS_AS(minimality_experiment(m, p, fams, {0.1}, 1.8), config_error);
}

TEST_CASE("index integrals reproduce the sign indices") {
    auto fbump = [](double x, double xi) { return std::exp(-(x * x + xi * xi)); };
    auto ladder = eps_ladder(0.1, 4);

    auto rx = index_gradient_1d(make_profile("x"), fbump, ladder, 6.0, 4001);
    CHECK(std::abs(rx.predicted - pi) < 1e-12);
    CHECK(std::abs(rx.extrapolated - pi) < 1e-3);

    auto rmx = index_gradient_1d(make_profile("-x"), fbump, ladder, 6.0, 4001);
    CHECK(std::abs(rmx.extrapolated + pi) < 1e-3);

    auto rx2 = index_gradient_1d(make_profile("x^2"), fbump, ladder, 6.0, 4001);
    CHECK(std::abs(rx2.predicted) < 1e-12);
    CHECK(std::abs(rx2.extrapolated) < 1e-3);
}

TEST_CASE("jump experiment on the ring with a rotation-breaking bump") {
    auto m = plane(1601);
    auto ring = builtin_symbol("ring_zero");
    auto f = bump(1.0, 0.83, 0.0);  // centered on the zero circle, breaks rotation
    auto res = jump_experiment(m, ring, f, {0.06, 0.08, 0.10, 0.12}, 1.8, 0.8326, 0.1, 4);
    CHECK(res.jump >= 0.0);
    CHECK(res.predicted_jump > 0.0);
    INFO("measured " << res.jump << " predicted " << res.predicted_jump);
    CHECK(std::abs(res.jump - res.predicted_jump) < 0.05 * res.predicted_jump);
    CHECK(res.transversality >= 1e-3);

    // f = 0 has no transversal zeros: Sigma_0 extraction must fail
    auto msmall = plane(201);
    CHECK_THROWS_AS(jump_experiment(msmall, ring, GeneratorFunction::zero(1), {0.05}, 1.8),
                    config_error);
}
