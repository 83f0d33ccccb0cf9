#include <catch2/catch_amalgamated.hpp>

#include "phaseflow/manifolds.hpp"

using namespace phaseflow;

namespace {

GeneratorFunction gen1(const std::string& id, double coef = 1.0) {
    return GeneratorFunction::from_basis(1, {id}, {coef});
}

IRManifold plane(int nodes = 41, double R = 5.0) {
    return IRManifold::real_phase_space(1, R, {nodes, nodes});
}

}  // namespace

TEST_CASE("real deformation field on the catalog examples") {
    auto rho = PhasePoint::real2d(0.7, -0.4);

    auto fx = real_deformation_field(gen1("x1"), rho);
    CHECK(fx[0] == 0.0);
    CHECK(fx[1] == 0.0);
    CHECK(fx[2] == 0.0);
    CHECK(fx[3] == -1.0);

    auto fxi = real_deformation_field(gen1("xi1"), rho);
    CHECK(fxi[0] == 0.0);
    CHECK(fxi[1] == 1.0);
    CHECK(fxi[2] == 0.0);
    CHECK(fxi[3] == 0.0);

    // f = (x^2 + xi^2)/2: rotation lifted into the imaginary directions
    auto rot = GeneratorFunction::from_basis(1, {"mono:2,0", "mono:0,2"}, {0.5, 0.5});
    auto fr = real_deformation_field(rot, rho);
    CHECK(std::abs(fr[0]) < 1e-15);
    CHECK(std::abs(fr[1] - (-0.4)) < 1e-15);
    CHECK(std::abs(fr[2]) < 1e-15);
    CHECK(std::abs(fr[3] - (-0.7)) < 1e-15);
}

TEST_CASE("flow: identity, exact linear cases") {
    auto m0 = to_flow_grid(plane());

    auto id = flow(m0, GeneratorFunction::zero(1), 0.5, 0.01);
    for (std::size_t i = 0; i < id.nodes.size(); ++i) CHECK(id.nodes[i] == m0.nodes[i]);

    // f = x: node (x, xi) -> (x, xi - i t), the graph of phi = -t x
    double t = 0.37;
    auto mx = flow(m0, gen1("x1"), t, t / 10, 2.0);
    for (std::size_t i = 0; i < m0.node_count(); ++i) {
        cplx a[2], b[2];
        m0.node(i, a);
        mx.node(i, b);
        CHECK(std::abs(b[0] - a[0]) < 1e-14);
        CHECK(std::abs(b[1] - (a[1] - cplx(0, t))) < 1e-13);
    }

    // f = c x^2/2: node -> (x, xi - i c t x), phi = -c t x^2 / 2
    double c = 0.8;
    auto fq = GeneratorFunction::from_basis(1, {"mono:2,0"}, {0.5 * c});
    auto mq = flow(m0, fq, t, 1e-2, 5.0);
    for (std::size_t i = 0; i < m0.node_count(); ++i) {
        cplx a[2], b[2];
        m0.node(i, a);
        mq.node(i, b);
        CHECK(std::abs(b[1] - (a[1] - cplx(0, c * t) * a[0])) < 1e-12);
    }
}

TEST_CASE("flow errors") {
    auto m0 = to_flow_grid(plane(21));
    CHECK_THROWS_AS(flow(m0, gen1("x1"), 0.35, 0.1), config_error);  // dt does not divide
    CHECK_THROWS_AS(flow(m0, gen1("x1"), 1.0, 0.1, 0.5), flow_error);  // leaves a tight tube
    try {
        flow(m0, gen1("x1"), 1.0, 0.1, 0.5);
    } catch (const flow_error& e) {
        CHECK(e.exit_time > 0.0);
    }
}

TEST_CASE("check_ir on graphs and flows") {
    auto r = check_ir(plane(21));
    CHECK(r.pass);
    CHECK(r.max_im_sigma < 1e-14);
    CHECK(std::abs(r.min_gram_det - 1.0) < 1e-12);

    auto lg = IRManifold::weight_graph(1, 5.0, {21, 21},
                                       std::make_shared<weights::Quadratic>(1, 0.1));
    auto rg = check_ir(lg);
    CHECK(rg.pass);
    CHECK(rg.max_im_sigma < 1e-12);

    // flowed grid under an entire generator stays IR to discretization accuracy
    auto bump = gen1("bump:0.7,0.5,-0.3", 0.8);
    auto mf = flow(to_flow_grid(plane(41)), bump, 0.1, 5e-3, 2.0);
    auto rf = check_ir(mf);
    CHECK(rf.max_im_sigma < 1e-6);
    CHECK(rf.pass);

    CHECK_THROWS_AS(check_ir(to_flow_grid(plane(2))), config_error);
}

TEST_CASE("symplectic volume: graphs exact, flows preserve") {
    auto m = plane(21);
    auto w = symplectic_volume(m);
    double total = pairwise_sum(w);
    CHECK(std::abs(total - 100.0) < 1e-10);  // (2R)^2 with R = 5

    auto lg = IRManifold::weight_graph(1, 5.0, {21, 21},
                                       std::make_shared<weights::Quadratic>(1, 0.3));
    auto wg = symplectic_volume(lg);
    for (std::size_t i = 0; i < wg.size(); ++i) CHECK(wg[i] == w[i]);

    auto bump = gen1("bump:0.7,0.4,0.2", 1.0);
    auto mf = flow(to_flow_grid(plane(81)), bump, 0.5, 1e-2, 2.0);
    auto wf = symplectic_volume(mf);
    // interior weights match the base Lebesgue weights to 1e-6 relative
    int multi[2];
    for (std::size_t i = 0; i < mf.node_count(); ++i) {
        mf.decode(i, multi);
        bool interior = multi[0] > 0 && multi[0] < 80 && multi[1] > 0 && multi[1] < 80;
        if (interior) CHECK(std::abs(wf[i] / mf.base_weight(i) - 1.0) < 1e-6);
    }
}

TEST_CASE("flow forward then backward returns to start") {
    auto bump = gen1("bump:0.9,0.1,-0.2", 1.0);
    auto m0 = to_flow_grid(plane(41));
    double t = 0.4, dt = 1e-2;
    auto fwd = flow(m0, bump, t, dt, 2.0);
    auto back = flow(fwd, bump.scaled(-1.0), t, dt, 2.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < m0.nodes.size(); ++i)
        worst = std::max(worst, std::abs(back.nodes[i] - m0.nodes[i]));
    CHECK(worst < 10.0 * std::pow(dt, 4) * t);
}

TEST_CASE("rk4 self check is small for smooth generators") {
    auto bump = gen1("bump:0.8,0.3,0.1", 1.0);
    double est = flow_self_check(plane(21), bump, 0.25, 1e-2, 2.0);
    CHECK(est < 1e-9);
}

TEST_CASE("to_flow_grid") {
    auto g0 = to_flow_grid(plane(11));
    for (std::size_t i = 0; i < g0.node_count(); ++i) {
        cplx b[2];
        g0.node(i, b);
        CHECK(b[0].imag() == 0.0);
        CHECK(b[1].imag() == 0.0);
    }
    double s = 0.4;
    auto lg = IRManifold::weight_graph(1, 5.0, {11, 11},
                                       std::make_shared<weights::Quadratic>(1, s));
    auto gf = to_flow_grid(lg);
    for (std::size_t i = 0; i < gf.node_count(); ++i) {
        cplx b[2];
        gf.node(i, b);
        CHECK(std::abs(b[1].imag() - s * b[0].real()) < 1e-14);
    }
    CHECK(check_ir(gf).pass);
    // graph escapes a tube tighter than max |phi'| = s R
    CHECK_THROWS_AS(to_flow_grid(lg, 0.5 * s * 5.0), config_error);
}

TEST_CASE("deformation distance") {
    auto m = plane(21);
    CHECK(deformation_distance(m, {}) == 0.0);  // empty path
    CHECK(deformation_distance(m, {{GeneratorFunction::zero(1), 1.0}}) == 0.0);
    double d1 = deformation_distance(m, {{gen1("x1"), 1.0}}, 3.0);
    CHECK(std::abs(d1 - 1.0) < 1e-12);
    double d2 = deformation_distance(
        m, {{gen1("x1"), 1.0}, {gen1("x1", -1.0), 1.0}}, 3.0);
    CHECK(std::abs(d2 - 2.0) < 1e-12);
}

TEST_CASE("field identities at random real points") {
    auto lin = field_identities_check(gen1("x1"), 20);
    CHECK(lin.res_re_hamilton < 1e-13);
    CHECK(lin.res_im_hamilton < 1e-13);
    CHECK(lin.res_lifted < 1e-13);

    auto bump = field_identities_check(gen1("bump:0.8,0.4,-0.1", 0.7), 40);
    CHECK(bump.res_re_hamilton < 1e-10);
    CHECK(bump.res_im_hamilton < 1e-10);
    CHECK(bump.res_lifted < 1e-10);

    // negative control: a complex coefficient breaks the lifted identity
    auto bad = field_identities_check(
        forms::product(forms::constant(cplx(0.0, 1.0)), forms::coordinate(0)), 1, 20);
    CHECK(bad.res_lifted > 0.1);
}

TEST_CASE("generator reality and time dependence") {
    auto f = gen1("bump:0.5,0.2,0.4", 1.3);
    CHECK(reality_residual(f, 3.0, 200) < 1e-15);

    GeneratorFunction ft;
    ft.n = 1;
    ft.terms.push_back({2.0, parse_basis_element("x1", 1), {1.0, 3.0}});  // (1 + 3t) * 2 x
    auto f0 = ft.at_time(0.0);
    CHECK(f0.terms[0].coef == 2.0);
    auto fdot = ft.time_derivative(0.0);
    CHECK(fdot.terms[0].coef == 6.0);
    auto f2 = ft.at_time(0.5);
    CHECK(std::abs(f2.terms[0].coef - 5.0) < 1e-15);
}
