#ifndef PHASEFLOW_ZEROSET_HPP
#define PHASEFLOW_ZEROSET_HPP

#include <fftw3.h>

#include "phaseflow/variation.hpp"

namespace phaseflow {

// Parameterized codimension-2 zero surfaces of n = 2 symbols on flat R^4 (or
// a flowed image of it). Two chart families: the torus (theta1, theta2) with
// radial transverse directions, and a square graph chart over (x1, x2) with
// the momenta transverse.
struct ChartSpec {
    enum class Kind { torus, disc };
    Kind kind = Kind::torus;
    int m1 = 64, m2 = 64;
    double half_width = 0.7;      // disc chart: (x1,x2) in [-a,a]^2
    double seed_offset = 0.0;     // radial seed perturbation (basin tests)
};

struct ZeroSurface {
    ChartSpec spec;
    bool closed = false;
    double du1 = 0.0, du2 = 0.0;
    std::vector<double> u1, u2;          // chart parameters per node
    std::vector<cplx> points;            // 4 ambient coords per node
    std::vector<cplx> frames;            // S1, S2 (chart tangents), 8 per node
    std::vector<double> lambda_signed;   // Liouville density wrt du1 du2
    std::vector<cplx> bracket;           // {p, pbar} per node
    std::vector<cplx> a_coeff;           // transport coefficient
    double newton_residual = 0.0;
    double independence_sigma_min = 1e300;

    std::size_t count() const { return points.size() / 4; }
    double lambda_total() const {
        double s = 0.0;
        for (double l : lambda_signed) s += std::abs(l) * du1 * du2;
        return s;
    }
};

namespace zdetail {

// Solves the 2x2 complex-linear Newton system Re/Im p = 0 in the transverse
// variables. rho(t) = base + t1 dir1 + t2 dir2; exact gradients throughout.
template <class RhoFn, class GradFn>
bool newton_transverse(const RhoFn& rho_of, const GradFn& eval, double& t1, double& t2,
                       double& resid, double& sigma_min) {
    for (int it = 0; it < 50; ++it) {
        cplx rho[4], grad[4], dir1[4], dir2[4];
        rho_of(t1, t2, rho, dir1, dir2);
        cplx pv;
        eval(rho, pv, grad);
        cplx dp1 = 0.0, dp2 = 0.0;
        for (int j = 0; j < 4; ++j) {
            dp1 += grad[j] * dir1[j];
            dp2 += grad[j] * dir2[j];
        }
        // [Re dp1 Re dp2; Im dp1 Im dp2] [dt1 dt2]^T = -[Re p; Im p]
        double a = dp1.real(), b = dp2.real(), c = dp1.imag(), d = dp2.imag();
        double det = a * d - b * c;
        double s1 = std::hypot(a, c), s2 = std::hypot(b, d);
        sigma_min = std::min(sigma_min, std::abs(det) / std::max(s1, s2));
        if (std::abs(det) < 1e-13) return false;
        double r1 = pv.real(), r2 = pv.imag();
        double dt1 = (-r1 * d + r2 * b) / det;
        double dt2 = (-a * r2 + c * r1) / det;
        t1 += dt1;
        t2 += dt2;
        resid = std::abs(pv);
        if (std::abs(dt1) + std::abs(dt2) < 1e-14) {
            rho_of(t1, t2, rho, dir1, dir2);
            eval(rho, pv, grad);
            resid = std::abs(pv);
            return true;
        }
    }
    return false;
}

// sigma^2/2 evaluated on four tangent vectors
inline double sigma2_form(const cplx* v1, const cplx* v2, const cplx* v3, const cplx* v4) {
    auto s = [](const cplx* a, const cplx* b) { return sigma_form(a, b, 2).real(); };
    return s(v1, v2) * s(v3, v4) - s(v1, v3) * s(v2, v4) + s(v1, v4) * s(v2, v3);
}

// signed Liouville density: lambda(S1,S2) = [sigma^2/2](S1,S2,W1,W2) / omega(W1,W2)
// with omega = (i/2) dp wedge dpbar; any transverse completion W works.
inline double liouville_density(const cplx* S1, const cplx* S2, const cplx* W1, const cplx* W2,
                                const cplx* grad_p) {
    auto dp = [&](const cplx* v) {
        cplx s = 0.0;
        for (int j = 0; j < 4; ++j) s += grad_p[j] * v[j];
        return s;
    };
    cplx dpW1 = dp(W1), dpW2 = dp(W2);
    // real vectors: d pbar (W) = conj(dp(W))
    double omega = (cplx(0.0, 0.5) * (dpW1 * std::conj(dpW2) - dpW2 * std::conj(dpW1))).real();
    if (std::abs(omega) < 1e-12) throw numeric_error("liouville: degenerate transverse pair");
    return sigma2_form(S1, S2, W1, W2) / omega;
}

}  // namespace zdetail

// d{p,pbar} along a real coordinate direction k, from exact Hessians (real
// points of flat R^4).
inline cplx bracket_derivative(const HolomorphicSymbol& p, const cplx* rho, int k) {
    cplx pv, g[4], h[16];
    p.eval_raw(rho, pv, g, h);
    int n = 2;
    cplx s = 0.0;
    for (int j = 0; j < n; ++j) {
        // d/dk [ dxi_j p * conj(dx_j p) - dx_j p * conj(dxi_j p) ]
        s += h[(n + j) * 4 + k] * std::conj(g[j]) + g[n + j] * std::conj(h[j * 4 + k]) -
             h[j * 4 + k] * std::conj(g[n + j]) - g[j] * std::conj(h[(n + j) * 4 + k]);
    }
    return s;
}

// Newton-extracts the zero surface of an n = 2 symbol over the requested
// chart on flat R^4, with the Liouville density from frame determinants and
// the transport coefficient from the least-squares bracket linearization.
inline ZeroSurface extract_sigma(const HolomorphicSymbol& p, const ChartSpec& spec) {
    if (p.n != 2) throw config_error("extract_sigma: n = 2 symbols only");
    ZeroSurface S;
    S.spec = spec;
    S.closed = spec.kind == ChartSpec::Kind::torus;
    int M1 = spec.m1, M2 = spec.m2;
    std::size_t count = std::size_t(M1) * M2;
    S.u1.resize(count);
    S.u2.resize(count);
    S.points.resize(count * 4);
    S.frames.resize(count * 8);
    S.lambda_signed.resize(count);
    S.bracket.resize(count);
    S.a_coeff.resize(count);
    S.du1 = spec.kind == ChartSpec::Kind::torus ? 2.0 * pi / M1 : 2.0 * spec.half_width / (M1 - 1);
    S.du2 = spec.kind == ChartSpec::Kind::torus ? 2.0 * pi / M2 : 2.0 * spec.half_width / (M2 - 1);

    auto eval = [&](const cplx* rho, cplx& pv, cplx* grad) { p.eval_raw(rho, pv, grad); };

    double worst_resid = 0.0;
    for (int i1 = 0; i1 < M1; ++i1)
        for (int i2 = 0; i2 < M2; ++i2) {
            std::size_t idx = std::size_t(i1) * M2 + i2;
            double u1, u2;
            double t1, t2;
            std::function<void(double, double, cplx*, cplx*, cplx*)> rho_of;
            if (spec.kind == ChartSpec::Kind::torus) {
                u1 = i1 * S.du1;
                u2 = i2 * S.du2;
                double c1 = std::cos(u1), s1 = std::sin(u1);
                double c2 = std::cos(u2), s2 = std::sin(u2);
                rho_of = [c1, s1, c2, s2](double r1, double r2, cplx* rho, cplx* d1, cplx* d2) {
                    rho[0] = r1 * c1;
                    rho[1] = r2 * c2;
                    rho[2] = r1 * s1;
                    rho[3] = r2 * s2;
                    d1[0] = c1; d1[1] = 0.0; d1[2] = s1; d1[3] = 0.0;
                    d2[0] = 0.0; d2[1] = c2; d2[2] = 0.0; d2[3] = s2;
                };
                t1 = 1.0 + spec.seed_offset;
                t2 = 1.0 - spec.seed_offset;
            } else {
                u1 = -spec.half_width + i1 * S.du1;
                u2 = -spec.half_width + i2 * S.du2;
                rho_of = [u1, u2](double xi1, double xi2, cplx* rho, cplx* d1, cplx* d2) {
                    rho[0] = u1;
                    rho[1] = u2;
                    rho[2] = xi1;
                    rho[3] = xi2;
                    d1[0] = 0.0; d1[1] = 0.0; d1[2] = 1.0; d1[3] = 0.0;
                    d2[0] = 0.0; d2[1] = 0.0; d2[2] = 0.0; d2[3] = 1.0;
                };
                t1 = spec.seed_offset;
                t2 = spec.seed_offset;
            }
            double resid = 0.0;
            if (!zdetail::newton_transverse(rho_of, eval, t1, t2, resid,
                                            S.independence_sigma_min))
                throw numeric_error("extract_sigma: Newton failed at chart node (" +
                                    std::to_string(u1) + ", " + std::to_string(u2) +
                                    "); independence may fail (sigma_min = " +
                                    std::to_string(S.independence_sigma_min) + ")");
            worst_resid = std::max(worst_resid, resid);
            S.u1[idx] = u1;
            S.u2[idx] = u2;

            cplx rho[4], d1[4], d2[4], grad[4];
            rho_of(t1, t2, rho, d1, d2);
            cplx pv;
            eval(rho, pv, grad);
            std::copy(rho, rho + 4, S.points.data() + idx * 4);

            // implicit-function chart frames: S_a = chart-partial + transverse
            // correction solving dp(S_a) = 0
            cplx chart1[4], chart2[4];
            if (spec.kind == ChartSpec::Kind::torus) {
                double c1 = std::cos(u1), s1 = std::sin(u1);
                double c2 = std::cos(u2), s2 = std::sin(u2);
                chart1[0] = -t1 * s1; chart1[1] = 0.0; chart1[2] = t1 * c1; chart1[3] = 0.0;
                chart2[0] = 0.0; chart2[1] = -t2 * s2; chart2[2] = 0.0; chart2[3] = t2 * c2;
            } else {
                chart1[0] = 1.0; chart1[1] = 0.0; chart1[2] = 0.0; chart1[3] = 0.0;
                chart2[0] = 0.0; chart2[1] = 1.0; chart2[2] = 0.0; chart2[3] = 0.0;
            }
            auto dp_of = [&](const cplx* v) {
                cplx s = 0.0;
                for (int j = 0; j < 4; ++j) s += grad[j] * v[j];
                return s;
            };
            cplx dpd1 = dp_of(d1), dpd2 = dp_of(d2);
            double a = dpd1.real(), b = dpd2.real(), c = dpd1.imag(), dd = dpd2.imag();
            double det = a * dd - b * c;
            cplx* S1 = S.frames.data() + idx * 8;
            cplx* S2 = S1 + 4;
            for (int which = 0; which < 2; ++which) {
                const cplx* ch = which == 0 ? chart1 : chart2;
                cplx dpc = dp_of(ch);
                double r1 = dpc.real(), r2 = dpc.imag();
                double s1c = (-r1 * dd + r2 * b) / det;
                double s2c = (-a * r2 + c * r1) / det;
                cplx* out = which == 0 ? S1 : S2;
                for (int j = 0; j < 4; ++j) out[j] = ch[j] + s1c * d1[j] + s2c * d2[j];
            }
            S.lambda_signed[idx] = zdetail::liouville_density(S1, S2, d1, d2, grad);

            // tangential bracket on flat R^4 equals the ambient bracket
            cplx gbar[4];
            for (int j = 0; j < 4; ++j) gbar[j] = std::conj(grad[j]);
            S.bracket[idx] = poisson_bracket(std::span<const cplx>(grad, 4),
                                             std::span<const cplx>(gbar, 4), 2);

            // transport coefficient: least squares of d{p,pbar} = A dp + B dpbar
            // over the four coordinate directions; a = -B
            Eigen::MatrixXcd Amat(4, 2);
            Eigen::VectorXcd rhs(4);
            for (int k = 0; k < 4; ++k) {
                Amat(k, 0) = grad[k];
                Amat(k, 1) = std::conj(grad[k]);
                rhs(k) = bracket_derivative(p, rho, k);
            }
            Eigen::Vector2cd sol =
                (Amat.adjoint() * Amat).ldlt().solve(Amat.adjoint() * rhs);
            S.a_coeff[idx] = -sol(1);
        }
    S.newton_residual = worst_resid;
    if (worst_resid > 1e-10)
        throw numeric_error("extract_sigma: poor Newton polish, residual " +
                            std::to_string(worst_resid));
    return S;
}

// Per-node transport coefficient {p,pbar} = abar p - a pbar, as filled by extract_sigma.
inline const std::vector<cplx>& transport_coefficient(const ZeroSurface& S) {
    return S.a_coeff;
}

struct LiouvilleIdentityReport {
    double max_pointwise_residual = 0.0;  // |(i/2){p,pbar} lambda - sigma|_Sigma|
    double closed_integral = 0.0;         // integral of (i/2){p,pbar} lambda
    bool integral_checked = false;
};

// Liouville identity: (i/2){p,pbar} lambda = sigma restricted to the chart frame; the
// closed-component integral of the left side vanishes.
inline LiouvilleIdentityReport liouville_identity_check(const ZeroSurface& S) {
    LiouvilleIdentityReport rep;
    double integral = 0.0;
    for (std::size_t idx = 0; idx < S.count(); ++idx) {
        const cplx* S1 = S.frames.data() + idx * 8;
        const cplx* S2 = S1 + 4;
        double lhs = (cplx(0.0, 0.5) * S.bracket[idx]).real() * S.lambda_signed[idx];
        double rhs = sigma_form(S1, S2, 2).real();
        rep.max_pointwise_residual = std::max(rep.max_pointwise_residual, std::abs(lhs - rhs));
        integral += lhs * S.du1 * S.du2;
    }
    if (S.closed) {
        rep.closed_integral = integral;
        rep.integral_checked = true;
    }
    return rep;
}

struct LieTransportReport {
    double max_residual = 0.0;  // |L_{H_Re p} lambda - Re(a) lambda|
};

// Transport identity L_{H_p} lambda = a lambda, checked by flowing chart
// points a short time along the Hamilton
// field of Re p (tangent to Sigma at critical pairs) and differences the
// pulled-back density against Re(a) lambda.
inline LieTransportReport lie_transport_check(const HolomorphicSymbol& p, const ZeroSurface& S,
                                              double delta = 1e-3) {
    if (S.spec.kind != ChartSpec::Kind::torus)
        throw config_error("lie_transport_check: torus charts only");
    LieTransportReport rep;
    auto flow_point = [&](std::array<double, 4> y, double time, int steps) {
        double dt = time / steps;
        for (int s = 0; s < steps; ++s) {
            auto field = [&](const std::array<double, 4>& q) {
                cplx rho[4] = {q[0], q[1], q[2], q[3]};
                cplx pv, g[4];
                p.eval_raw(rho, pv, g);
                // H_{Re p} on real points: (Re dxi p, -Re dx p)
                return std::array<double, 4>{g[2].real(), g[3].real(), -g[0].real(),
                                             -g[1].real()};
            };
            auto add = [](const std::array<double, 4>& a, const std::array<double, 4>& b,
                          double s) {
                std::array<double, 4> r;
                for (int j = 0; j < 4; ++j) r[j] = a[j] + s * b[j];
                return r;
            };
            auto k1 = field(y);
            auto k2 = field(add(y, k1, dt / 2));
            auto k3 = field(add(y, k2, dt / 2));
            auto k4 = field(add(y, k3, dt));
            for (int j = 0; j < 4; ++j)
                y[j] += dt / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
        }
        return y;
    };
    // chart angles of a transported point
    auto angles = [](const std::array<double, 4>& q) {
        return std::pair<double, double>(std::atan2(q[2], q[0]), std::atan2(q[3], q[1]));
    };
    // lambda at arbitrary chart angles by local re-extraction
    auto lambda_at = [&](double th1, double th2) {
        ChartSpec one;
        one.kind = ChartSpec::Kind::torus;
        one.m1 = 1;
        one.m2 = 1;
        // single-node extraction: reuse the Newton machinery with a seed at
        // the requested angles (shift the chart origin)
        double c1 = std::cos(th1), s1 = std::sin(th1), c2 = std::cos(th2), s2 = std::sin(th2);
        double t1 = 1.0, t2 = 1.0, resid = 0.0, smin = 1e300;
        auto rho_of = [&](double r1, double r2, cplx* rho, cplx* d1, cplx* d2) {
            rho[0] = r1 * c1;
            rho[1] = r2 * c2;
            rho[2] = r1 * s1;
            rho[3] = r2 * s2;
            d1[0] = c1; d1[1] = 0.0; d1[2] = s1; d1[3] = 0.0;
            d2[0] = 0.0; d2[1] = c2; d2[2] = 0.0; d2[3] = s2;
        };
        auto eval = [&](const cplx* rho, cplx& pv, cplx* grad) { p.eval_raw(rho, pv, grad); };
        if (!zdetail::newton_transverse(rho_of, eval, t1, t2, resid, smin))
            throw numeric_error("lie_transport_check: re-extraction failed");
        cplx rho[4], d1[4], d2[4], grad[4], pv;
        rho_of(t1, t2, rho, d1, d2);
        eval(rho, pv, grad);
        cplx chart1[4] = {-t1 * s1, 0.0, t1 * c1, 0.0};
        cplx chart2[4] = {0.0, -t2 * s2, 0.0, t2 * c2};
        auto dp_of = [&](const cplx* v) {
            cplx s = 0.0;
            for (int j = 0; j < 4; ++j) s += grad[j] * v[j];
            return s;
        };
        cplx dpd1 = dp_of(d1), dpd2 = dp_of(d2);
        double a = dpd1.real(), b = dpd2.real(), c = dpd1.imag(), dd = dpd2.imag();
        double det = a * dd - b * c;
        cplx S1[4], S2[4];
        for (int which = 0; which < 2; ++which) {
            const cplx* ch = which == 0 ? chart1 : chart2;
            cplx dpc = dp_of(ch);
            double r1 = dpc.real(), r2 = dpc.imag();
            double s1c = (-r1 * dd + r2 * b) / det;
            double s2c = (-a * r2 + c * r1) / det;
            cplx* out = which == 0 ? S1 : S2;
            for (int j = 0; j < 4; ++j) out[j] = ch[j] + s1c * d1[j] + s2c * d2[j];
        }
        return zdetail::liouville_density(S1, S2, d1, d2, grad);
    };

    int stride = std::max(1, S.spec.m1 / 16);
    for (int i1 = 0; i1 < S.spec.m1; i1 += stride)
        for (int i2 = 0; i2 < S.spec.m2; i2 += stride) {
            std::size_t idx = std::size_t(i1) * S.spec.m2 + i2;
            const cplx* pt = S.points.data() + idx * 4;
            std::array<double, 4> q = {pt[0].real(), pt[1].real(), pt[2].real(), pt[3].real()};
            // pullback density at +-delta: lambda(Phi(theta)) * |D Phi|_chart
            auto transported_lambda = [&](double dt_sign) {
                auto qf = flow_point(q, dt_sign * delta, 4);
                auto [th1, th2] = angles(qf);
                // chart Jacobian of the flow by differencing neighbors in angle
                double h = 1e-4;
                auto shift = [&](double a1, double a2) {
                    double t1 = 1.0, t2 = 1.0, resid = 0.0, smin = 1e300;
                    double c1 = std::cos(a1), s1 = std::sin(a1), c2 = std::cos(a2),
                           s2 = std::sin(a2);
                    auto rho_of = [&](double r1, double r2, cplx* rho, cplx* d1, cplx* d2) {
                        rho[0] = r1 * c1;
                        rho[1] = r2 * c2;
                        rho[2] = r1 * s1;
                        rho[3] = r2 * s2;
                        d1[0] = c1; d1[1] = 0.0; d1[2] = s1; d1[3] = 0.0;
                        d2[0] = 0.0; d2[1] = c2; d2[2] = 0.0; d2[3] = s2;
                    };
                    auto eval = [&](const cplx* rho, cplx& pv, cplx* grad) {
                        p.eval_raw(rho, pv, grad);
                    };
                    zdetail::newton_transverse(rho_of, eval, t1, t2, resid, smin);
                    cplx rho[4], d1[4], d2[4];
                    rho_of(t1, t2, rho, d1, d2);
                    return std::array<double, 4>{rho[0].real(), rho[1].real(), rho[2].real(),
                                                 rho[3].real()};
                };
                auto [b1, b2] = angles(q);  // base chart angles
                auto jac_col = [&](int which) {
                    auto qa = shift(b1 + (which == 0 ? h : 0.0), b2 + (which == 1 ? h : 0.0));
                    auto qb = shift(b1 - (which == 0 ? h : 0.0), b2 - (which == 1 ? h : 0.0));
                    auto fa = flow_point(qa, dt_sign * delta, 4);
                    auto fb = flow_point(qb, dt_sign * delta, 4);
                    auto [a1, a2] = angles(fa);
                    auto [b1n, b2n] = angles(fb);
                    double d1v = std::remainder(a1 - b1n, 2.0 * pi) / (2.0 * h);
                    double d2v = std::remainder(a2 - b2n, 2.0 * pi) / (2.0 * h);
                    return std::pair<double, double>(d1v, d2v);
                };
                auto [j11, j21] = jac_col(0);
                auto [j12, j22] = jac_col(1);
                double detJ = j11 * j22 - j12 * j21;
                return lambda_at(th1, th2) * detJ;
            };
            double lp = transported_lambda(+1.0);
            double lm = transported_lambda(-1.0);
            double lie = (lp - lm) / (2.0 * delta);
            double expect = S.a_coeff[idx].real() * S.lambda_signed[idx];
            rep.max_residual = std::max(rep.max_residual, std::abs(lie - expect));
        }
    return rep;
}

struct AdjointReport {
    double max_mean_residual = 0.0;      // |int (H_p + a) u lambda|
    double max_adjoint_residual = 0.0;   // |<(H_p+a)u, v> + <u, H_pbar v>|
    double coefficient_variation = 0.0;  // constancy of H_p in chart coords
};

namespace zdetail {

// Chart coefficients of H_p: solve [S1 S2] c = H_p at each node (least
// squares over the 4 ambient components).
inline void hp_chart_coefficients(const HolomorphicSymbol& p, const ZeroSurface& S,
                                  std::vector<cplx>& c1, std::vector<cplx>& c2,
                                  double& variation) {
    std::size_t count = S.count();
    c1.resize(count);
    c2.resize(count);
    for (std::size_t idx = 0; idx < count; ++idx) {
        const cplx* pt = S.points.data() + idx * 4;
        cplx rho[4] = {pt[0], pt[1], pt[2], pt[3]};
        cplx pv, g[4];
        p.eval_raw(rho, pv, g);
        cplx Hp[4] = {g[2], g[3], -g[0], -g[1]};
        const cplx* S1 = S.frames.data() + idx * 8;
        const cplx* S2 = S1 + 4;
        Eigen::MatrixXcd A(4, 2);
        Eigen::VectorXcd b(4);
        for (int j = 0; j < 4; ++j) {
            A(j, 0) = S1[j];
            A(j, 1) = S2[j];
            b(j) = Hp[j];
        }
        Eigen::Vector2cd sol = (A.adjoint() * A).ldlt().solve(A.adjoint() * b);
        c1[idx] = sol(0);
        c2[idx] = sol(1);
    }
    cplx m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        m1 += c1[i];
        m2 += c2[i];
    }
    m1 /= double(count);
    m2 /= double(count);
    variation = 0.0;
    for (std::size_t i = 0; i < count; ++i)
        variation = std::max(variation, std::max(std::abs(c1[i] - m1), std::abs(c2[i] - m2)));
}

// 2-D FFT helpers on the torus chart (row-major m1 x m2)
struct Fft2 {
    int m1, m2;
    std::vector<cplx> buf;
    Fft2(int a, int b) : m1(a), m2(b), buf(std::size_t(a) * b) {}
    void forward(std::vector<cplx>& data) { run(data, FFTW_FORWARD); }
    void backward(std::vector<cplx>& data) {
        run(data, FFTW_BACKWARD);
        double s = 1.0 / (double(m1) * m2);
        for (auto& z : data) z *= s;
    }
    void run(std::vector<cplx>& data, int sign) {
        fftw_plan plan = fftw_plan_dft_2d(m1, m2, reinterpret_cast<fftw_complex*>(data.data()),
                                          reinterpret_cast<fftw_complex*>(data.data()), sign,
                                          FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
};

inline int freq(int i, int m) { return i <= m / 2 ? i : i - m; }

}  // namespace zdetail

// Residuals of the closed-chart adjoint identities under
// spectral differentiation, for trigonometric test functions u, v.
inline AdjointReport adjoint_identity_check(const HolomorphicSymbol& p, const ZeroSurface& S,
                                            const std::vector<std::vector<cplx>>& test_funcs) {
    if (!S.closed) throw config_error("adjoint_identity_check: closed charts only");
    AdjointReport rep;
    std::vector<cplx> c1, c2;
    zdetail::hp_chart_coefficients(p, S, c1, c2, rep.coefficient_variation);
    int m1 = S.spec.m1, m2 = S.spec.m2;
    zdetail::Fft2 fft(m1, m2);

    auto theta_derivative = [&](const std::vector<cplx>& u, int axis) {
        std::vector<cplx> w = u;
        fft.forward(w);
        for (int i = 0; i < m1; ++i)
            for (int j = 0; j < m2; ++j) {
                int k = axis == 0 ? zdetail::freq(i, m1) : zdetail::freq(j, m2);
                w[std::size_t(i) * m2 + j] *= cplx(0.0, double(k));
            }
        fft.backward(w);
        return w;
    };

    auto Hp_apply = [&](const std::vector<cplx>& u) {
        auto d1 = theta_derivative(u, 0);
        auto d2 = theta_derivative(u, 1);
        std::vector<cplx> out(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = c1[i] * d1[i] + c2[i] * d2[i];
        return out;
    };
    auto Hpbar_apply = [&](const std::vector<cplx>& u) {
        auto d1 = theta_derivative(u, 0);
        auto d2 = theta_derivative(u, 1);
        std::vector<cplx> out(u.size());
        for (std::size_t i = 0; i < u.size(); ++i)
            out[i] = std::conj(c1[i]) * d1[i] + std::conj(c2[i]) * d2[i];
        return out;
    };
    auto inner = [&](const std::vector<cplx>& a, const std::vector<cplx>& b) {
        cplx s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            s += a[i] * std::conj(b[i]) * std::abs(S.lambda_signed[i]);
        return s * S.du1 * S.du2;
    };

    std::vector<cplx> ones(S.count(), cplx(1.0));
    for (const auto& u : test_funcs) {
        auto Au = Hp_apply(u);
        for (std::size_t i = 0; i < Au.size(); ++i) Au[i] += S.a_coeff[i] * u[i];
        rep.max_mean_residual = std::max(rep.max_mean_residual, std::abs(inner(Au, ones)));
        for (const auto& v : test_funcs) {
            cplx lhs = inner(Au, v);
            auto Hv = Hpbar_apply(v);
            cplx rhs = inner(u, Hv) * (-1.0);
            // <(H_p + a) u, v> = -<u, H_pbar v>
            rep.max_adjoint_residual = std::max(rep.max_adjoint_residual,
                                                std::abs(lhs - (-1.0) * inner(u, Hv)));
            (void)rhs;
        }
    }
    return rep;
}

struct CorrectionResult {
    std::vector<cplx> delta_f;     // chart solution, zero mean
    double rhs_mean = 0.0;         // solvability defect
    double solve_residual = 0.0;   // operator applied minus right side
    cplx c1, c2;                   // chart coefficients of H_p (constant)
};

// Spectral solve of -(H_p + a) H_pbar df = Im (H_p + a) dpbar on a closed
// torus chart with constant chart coefficients (the flat-torus case, where
// the operator is -4 Laplace for the standard codim-2 torus).
inline CorrectionResult solve_correction(const HolomorphicSymbol& p, const ZeroSurface& S,
                                         const HolomorphicSymbol& delta_p,
                                         double mean_tol = 1e-8) {
    if (!S.closed) throw config_error("solve_correction: closed charts only");
    std::vector<cplx> c1v, c2v;
    double variation = 0.0;
    zdetail::hp_chart_coefficients(p, S, c1v, c2v, variation);
    if (variation > 1e-8)
        throw config_error("solve_correction: chart operator is not constant-coefficient");
    cplx c1 = c1v[0], c2 = c2v[0];
    cplx a_mean = 0.0;
    double a_var = 0.0;
    for (const auto& a : S.a_coeff) a_mean += a;
    a_mean /= double(S.count());
    for (const auto& a : S.a_coeff) a_var = std::max(a_var, std::abs(a - a_mean));
    if (a_var > 1e-8)
        throw config_error("solve_correction: transport coefficient not constant on chart");

    int m1 = S.spec.m1, m2 = S.spec.m2;
    std::size_t count = S.count();
    // RHS = Im (H_p + a) conj(delta_p) on Sigma
    std::vector<cplx> rhs(count);
    for (std::size_t idx = 0; idx < count; ++idx) {
        const cplx* pt = S.points.data() + idx * 4;
        cplx rho[4] = {pt[0], pt[1], pt[2], pt[3]};
        cplx pv, gp[4], dv, gd[4];
        p.eval_raw(rho, pv, gp);
        delta_p.eval_raw(rho, dv, gd);
        cplx Hp[4] = {gp[2], gp[3], -gp[0], -gp[1]};
        cplx s = 0.0;
        for (int j = 0; j < 4; ++j) s += Hp[j] * std::conj(gd[j]);
        s += S.a_coeff[idx] * std::conj(dv);
        rhs[idx] = (s - std::conj(s)) / cplx(0.0, 2.0);  // Im part, kept complex
    }
    CorrectionResult out;
    out.c1 = c1;
    out.c2 = c2;
    cplx mean = 0.0;
    for (const auto& r : rhs) mean += r;
    mean /= double(count);
    out.rhs_mean = std::abs(mean);
    if (out.rhs_mean > mean_tol)
        throw numeric_error("solve_correction: right side has nonzero mean " +
                            std::to_string(out.rhs_mean) + " (solvability fails)");

    zdetail::Fft2 fft(m1, m2);
    std::vector<cplx> w = rhs;
    fft.forward(w);
    for (int i = 0; i < m1; ++i)
        for (int j = 0; j < m2; ++j) {
            std::size_t idx = std::size_t(i) * m2 + j;
            if (i == 0 && j == 0) {
                w[idx] = 0.0;
                continue;
            }
            cplx mp = cplx(0.0, 1.0) * (double(zdetail::freq(i, m1)) * c1 +
                                        double(zdetail::freq(j, m2)) * c2);
            cplx mpbar = cplx(0.0, 1.0) * (double(zdetail::freq(i, m1)) * std::conj(c1) +
                                           double(zdetail::freq(j, m2)) * std::conj(c2));
            cplx symbol = -(mp + a_mean) * mpbar;
            if (std::abs(symbol) < 1e-14)
                throw numeric_error("solve_correction: operator symbol vanishes off k = 0");
            w[idx] /= symbol;
        }
    fft.backward(w);
    out.delta_f = w;

    // residual: apply the operator spectrally and compare with the right side
    auto apply_op = [&](const std::vector<cplx>& u) {
        std::vector<cplx> v = u;
        fft.forward(v);
        for (int i = 0; i < m1; ++i)
            for (int j = 0; j < m2; ++j) {
                std::size_t idx = std::size_t(i) * m2 + j;
                cplx mp = cplx(0.0, 1.0) * (double(zdetail::freq(i, m1)) * c1 +
                                            double(zdetail::freq(j, m2)) * c2);
                cplx mpbar = cplx(0.0, 1.0) * (double(zdetail::freq(i, m1)) * std::conj(c1) +
                                               double(zdetail::freq(j, m2)) * std::conj(c2));
                v[idx] *= -(mp + a_mean) * mpbar;
            }
        fft.backward(v);
        return v;
    };
    auto Adf = apply_op(out.delta_f);
    for (std::size_t i = 0; i < count; ++i)
        out.solve_residual = std::max(out.solve_residual, std::abs(Adf[i] - rhs[i]));
    return out;
}

enum class LeviMode { fixed_manifold, corrected };

// Levi form of z -> I: fixed mode gives (pi/2) int |dz p|^2 lambda; corrected
// mode removes the component in the image of H_p (spectral projection).
inline double levi_form(const HolomorphicSymbol& p, const ZeroSurface& S,
                        const HolomorphicSymbol& dz_p, LeviMode mode) {
    std::size_t count = S.count();
    std::vector<cplx> u(count);
    for (std::size_t idx = 0; idx < count; ++idx) {
        const cplx* pt = S.points.data() + idx * 4;
        cplx rho[4] = {pt[0], pt[1], pt[2], pt[3]};
        cplx dv, gd[4];
        dz_p.eval_raw(rho, dv, gd);
        u[idx] = dv;
    }
    if (mode == LeviMode::corrected) {
        if (!S.closed) throw config_error("levi_form: corrected mode needs a closed chart");
        std::vector<cplx> c1v, c2v;
        double variation = 0.0;
        zdetail::hp_chart_coefficients(p, S, c1v, c2v, variation);
        if (variation > 1e-8)
            throw config_error("levi_form: chart operator is not constant-coefficient");
        cplx c1 = c1v[0], c2 = c2v[0];
        int m1 = S.spec.m1, m2 = S.spec.m2;
        zdetail::Fft2 fft(m1, m2);
        std::vector<cplx> w = u;
        fft.forward(w);
        // image of H_p spans every mode with nonzero symbol; remove it
        for (int i = 0; i < m1; ++i)
            for (int j = 0; j < m2; ++j) {
                std::size_t idx = std::size_t(i) * m2 + j;
                cplx mp = cplx(0.0, 1.0) * (double(zdetail::freq(i, m1)) * c1 +
                                            double(zdetail::freq(j, m2)) * c2);
                if (std::abs(mp) > 1e-12) w[idx] = 0.0;  // (1 - Pi) u keeps the kernel modes
            }
        fft.backward(w);
        u = w;
    }
    double s = 0.0;
    for (std::size_t idx = 0; idx < count; ++idx)
        s += std::norm(u[idx]) * std::abs(S.lambda_signed[idx]) * S.du1 * S.du2;
    return 0.5 * pi * s;
}

// Builds the entire polynomial extension of a torus-chart Fourier mode sum:
// e^{i k theta} extends to (x + i xi)^k per factor (conjugate powers for
// negative k), so a real chart function becomes a real polynomial generator.
inline GeneratorFunction torus_chart_extension(const std::vector<cplx>& chart_values, int m1,
                                               int m2, int max_degree = 8,
                                               double coef_tol = 1e-11) {
    zdetail::Fft2 fft(m1, m2);
    std::vector<cplx> w = chart_values;
    fft.forward(w);
    double scale = 1.0 / (double(m1) * m2);
    using namespace forms;
    std::vector<FormPtr> terms;
    FormPtr z1p = sum({coordinate(0), product(constant(cplx(0, 1)), coordinate(2))});
    FormPtr z1m = sum({coordinate(0), product(constant(cplx(0, -1)), coordinate(2))});
    FormPtr z2p = sum({coordinate(1), product(constant(cplx(0, 1)), coordinate(3))});
    FormPtr z2m = sum({coordinate(1), product(constant(cplx(0, -1)), coordinate(3))});
    auto zpow = [&](const FormPtr& zp, const FormPtr& zm, int k) -> FormPtr {
        if (k == 0) return constant(1.0);
        return pow_int(k > 0 ? zp : zm, std::abs(k));
    };
    for (int i = 0; i < m1; ++i)
        for (int j = 0; j < m2; ++j) {
            cplx c = w[std::size_t(i) * m2 + j] * scale;
            if (std::abs(c) < coef_tol) continue;
            int k1 = zdetail::freq(i, m1), k2 = zdetail::freq(j, m2);
            if (std::abs(k1) + std::abs(k2) > max_degree)
                throw config_error("torus_chart_extension: mode degree exceeds bound");
            terms.push_back(
                product(constant(c), product(zpow(z1p, z1m, k1), zpow(z2p, z2m, k2))));
        }
    if (terms.empty()) terms.push_back(constant(0.0));
    GeneratorFunction g;
    g.n = 2;
    BasisElement be;
    be.id = "torus_chart_extension";
    be.n = 2;
    be.form = sum(std::move(terms));
    g.terms.push_back({1.0, be, {1.0}});
    return g;
}

// Flows one point of R^4 with its tangent frame under the generator and
// returns the image and the transported frame columns.
inline void point_flow_with_frame(const GeneratorFunction& f, const cplx* rho0, double t,
                                  double dt, cplx* rho_out, cplx* frame_out) {
    cplx y[4];
    std::copy(rho0, rho0 + 4, y);
    cplx T[16];
    std::fill(T, T + 16, cplx(0.0));
    for (int a = 0; a < 4; ++a) T[a * 4 + a] = 1.0;
    long steps = std::max(1L, std::lround(std::abs(t) / dt));
    double sdt = t / double(steps);
    double time = 0.0;
    for (long s = 0; s < steps; ++s) {
        detail::rk4_step_var(f, y, T, time, sdt, 4);
        time += sdt;
    }
    std::copy(y, y + 4, rho_out);
    std::copy(T, T + 16, frame_out);
}

// Max tangential |{p_z, pbar_z}| over the zero set of p_z on the flowed
// manifold Lambda_z = exp(z hat(i H_df))(R^4), extracting Sigma_z through the
// flow map from torus-chart seeds.
inline double corrected_bracket_residual(const HolomorphicSymbol& p_z,
                                         const GeneratorFunction& df_ext, double z,
                                         const ChartSpec& spec, double flow_dt = 5e-3) {
    if (spec.kind != ChartSpec::Kind::torus)
        throw config_error("corrected_bracket_residual: torus charts only");
    double worst = 0.0;
    for (int i1 = 0; i1 < spec.m1; ++i1)
        for (int i2 = 0; i2 < spec.m2; ++i2) {
            double th1 = 2.0 * pi * i1 / spec.m1;
            double th2 = 2.0 * pi * i2 / spec.m2;
            double c1 = std::cos(th1), s1 = std::sin(th1);
            double c2 = std::cos(th2), s2 = std::sin(th2);
            // Newton in the radial preimage coordinates through the flow
            double t1 = 1.0, t2 = 1.0, resid = 0.0, smin = 1e300;
            auto rho_of = [&](double r1, double r2, cplx* rho, cplx* d1, cplx* d2) {
                cplx base[4] = {r1 * c1, r2 * c2, r1 * s1, r2 * s2};
                cplx frame[16];
                point_flow_with_frame(df_ext, base, z, flow_dt, rho, frame);
                // transported radial directions: frame[a*4+j] is component j
                // of the transported basis vector e_a
                cplx rad1[4] = {c1, 0.0, s1, 0.0};
                cplx rad2[4] = {0.0, c2, 0.0, s2};
                for (int j = 0; j < 4; ++j) {
                    d1[j] = 0.0;
                    d2[j] = 0.0;
                    for (int a = 0; a < 4; ++a) {
                        d1[j] += frame[a * 4 + j] * rad1[a];
                        d2[j] += frame[a * 4 + j] * rad2[a];
                    }
                }
            };
            auto eval = [&](const cplx* rho, cplx& pv, cplx* grad) {
                p_z.eval_raw(rho, pv, grad);
            };
            if (!zdetail::newton_transverse(rho_of, eval, t1, t2, resid, smin))
                throw numeric_error("corrected_bracket_residual: Newton failed");
            // tangential bracket on Lambda_z at the solved point
            cplx base[4] = {t1 * c1, t2 * c2, t1 * s1, t2 * s2};
            cplx rho[4], frame[16];
            point_flow_with_frame(df_ext, base, z, flow_dt, rho, frame);
            TangentFrame fr;
            fr.dim = 4;
            std::copy(frame, frame + 16, fr.T);  // transported coordinate frame
            fr.compute_forms(2);
            cplx pv, gp[4];
            p_z.eval_raw(rho, pv, gp);
            cplx gt[4], gbar[4];
            fr.tangential(gp, gt);
            for (int a = 0; a < 4; ++a) gbar[a] = std::conj(gt[a]);
            worst = std::max(worst, std::abs(fr.bracket(gt, gbar)));
        }
    return worst;
}

}  // namespace phaseflow

#endif
