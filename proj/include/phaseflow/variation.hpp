#ifndef PHASEFLOW_VARIATION_HPP
#define PHASEFLOW_VARIATION_HPP

#include <array>
#include <map>

#include "phaseflow/functional.hpp"

namespace phaseflow {

struct VariationReport {
    double pairing_value = 0.0;  // the reconciled / primary estimate
    double epsilon = 0.0;
    std::string method;          // "regularized", "l1_form" or "extrapolated"
    std::map<std::string, double> residuals;
};

namespace detail {

// Per-node data shared by every pairing kernel: the symplectic weight, the
// symbol value, the tangential Hamilton derivative H_f(p) and the tangential
// bracket {p, pbar}. Frames are real tangent vectors, so the differential of
// pbar is the conjugate of the differential of p.
template <class Fn>
double pairing_quadrature(const IRManifold& m, const HolomorphicSymbol& p,
                          const GeneratorFunction& f, Fn&& node_term) {
    if (p.n != m.n || f.n != m.n) throw config_error("pairing: dimension mismatch");
    std::size_t count = m.node_count();
    int dim = m.dim();
    std::vector<double> vals(count);
    std::vector<double> wsym = symplectic_volume(m);
    parallel_for(count, [&](std::size_t b, std::size_t e) {
        TangentFrame fr;
        cplx rho[8], gp[8], gf[8], gpt[8], gft[8], gpbar[8];
        for (std::size_t i = b; i < e; ++i) {
            m.node(i, rho);
            cplx pv, fv;
            p.eval_raw(rho, pv, gp);
            f.eval(rho, 0.0, fv, gf);
            tangent_frame(m, i, fr);
            fr.tangential(gp, gpt);
            fr.tangential(gf, gft);
            for (int a = 0; a < dim; ++a) {
                gpbar[a] = std::conj(gpt[a]);
                gft[a] = cplx(gft[a].real(), 0.0);  // f is real on the manifold
            }
            cplx bracket_ppbar = fr.bracket(gpt, gpbar);  // {p, pbar}
            cplx hfp = fr.bracket(gft, gpt);              // H_f(p) = {f, p}
            vals[i] = node_term(wsym[i], pv, fv.real(), bracket_ppbar, hfp);
        }
    });
    return pairwise_sum(vals);
}

}  // namespace detail

// d/dt I_eps(Lambda_t, p) at t = 0 for the flow generated by f:
//   2 int f eps^2 / (eps^2 + |p|^2)^2 * (i/2){p, pbar} dmu
// with manifold-tangential brackets.
inline VariationReport gradient_pairing_eps(const IRManifold& m, const HolomorphicSymbol& p,
                                            const GeneratorFunction& f, double eps) {
    if (!(eps > 0.0)) throw config_error("gradient_pairing_eps: need eps > 0");
    double e2 = eps * eps;
    double v = detail::pairing_quadrature(
        m, p, f, [e2](double w, cplx pv, double fv, cplx br, cplx) {
            double denom = std::norm(pv) + e2;
            double half_i_br = (cplx(0.0, 0.5) * br).real();  // (i/2){p,pbar}, real
            return w * 2.0 * fv * e2 / (denom * denom) * half_i_br;
        });
    VariationReport rep;
    rep.pairing_value = v;
    rep.epsilon = eps;
    rep.method = "regularized";
    return rep;
}

// "dI" pairing by two routes: (a) the L1 form -<[d arg p], H_f> with a cutoff
// near the zero set plus the regularized remainder, (b) extrapolation of the
// regularized pairings over the eps ladder. Both land in the report.
inline VariationReport gradient_pairing(const IRManifold& m, const HolomorphicSymbol& p,
                                        const GeneratorFunction& f, double eps0 = 0.2,
                                        int rungs = 4) {
    auto ladder = eps_ladder(eps0, rungs);
    double eps_min = ladder.back();
    double cutoff = 10.0 * eps_min;

    // route (a): exact d arg p pairing away from zeros
    double direct = detail::pairing_quadrature(
        m, p, f, [cutoff](double w, cplx pv, double, cplx, cplx hfp) {
            if (std::abs(pv) <= cutoff) return 0.0;
            return -w * (hfp / pv).imag();
        });
    // regularized remainder from the cutoff region, extrapolated in eps
    std::vector<double> rem(rungs);
    for (int k = 0; k < rungs; ++k) {
        double e2 = ladder[k] * ladder[k];
        rem[k] = detail::pairing_quadrature(
            m, p, f, [cutoff, e2](double w, cplx pv, double, cplx, cplx hfp) {
                double ap2 = std::norm(pv);
                if (std::sqrt(ap2) > cutoff || ap2 < 1e-300) return 0.0;
                return -w * (ap2 / (ap2 + e2)) * (hfp / pv).imag();
            });
    }
    // route (b): regularized pairings on the full manifold
    std::vector<double> reg(rungs);
    for (int k = 0; k < rungs; ++k)
        reg[k] = gradient_pairing_eps(m, p, f, ladder[k]).pairing_value;

    auto tail_extrapolate = [rungs, &p](const std::vector<double>& T) {
        double scale = 0.0;
        for (double t : T) scale = std::max(scale, std::abs(t));
        if (std::abs(T[rungs - 2] - T[rungs - 1]) < 1e-12 * std::max(1.0, scale))
            return T[rungs - 1];
        double q_base = p.max_vanishing_order >= 1 ? 1.0 / p.max_vanishing_order : 2.0;
        return richardson_tail(T, q_base).first;
    };

    double route_a = direct + tail_extrapolate(rem);
    double route_b = tail_extrapolate(reg);

    VariationReport rep;
    rep.pairing_value = route_b;
    rep.epsilon = 0.0;
    rep.method = "extrapolated";
    rep.residuals["l1_form"] = route_a;
    rep.residuals["extrapolated"] = route_b;
    rep.residuals["gap"] = std::abs(route_a - route_b);
    rep.residuals["reg_last"] = reg[rungs - 1];
    return rep;
}

// Rate of d_Lambda I_eps -> "d_Lambda I": fits |pairing_eps - pairing| ~ C eps^d1.
// Returns +inf when the gaps sit at quadrature noise (no zeros contribute).
inline double gradient_eps_rate(const IRManifold& m, const HolomorphicSymbol& p,
                                const GeneratorFunction& f, const std::vector<double>& ladder) {
    if (ladder.size() < 3) throw config_error("gradient_eps_rate: need >= 3 ladder points");
    auto full = gradient_pairing(m, p, f);
    double limit = full.pairing_value;
    std::vector<double> gaps;
    double scale = std::max(1.0, std::abs(limit));
    for (double eps : ladder)
        gaps.push_back(std::abs(gradient_pairing_eps(m, p, f, eps).pairing_value - limit));
    bool vacuous = true;
    for (double g : gaps) vacuous = vacuous && g < 1e-12 * scale;
    if (vacuous) return std::numeric_limits<double>::infinity();
    auto [q, C] = powerlaw_fit(std::span<const double>(ladder), std::span<const double>(gaps));
    return q;
}

// Second variation for the autonomous flow of f:
//   d^2/dt^2 I_eps(Lambda_t)|_0 = 2 int eps^2/(eps^2+|p|^2)^2 |H_f p|^2 dmu >= 0.
inline double hessian_autonomous(const IRManifold& m, const HolomorphicSymbol& p,
                                 const GeneratorFunction& f, double eps) {
    if (!(eps > 0.0)) throw config_error("hessian_autonomous: need eps > 0");
    double e2 = eps * eps;
    return detail::pairing_quadrature(
        m, p, f, [e2](double w, cplx pv, double, cplx, cplx hfp) {
            double denom = std::norm(pv) + e2;
            return w * 2.0 * e2 / (denom * denom) * std::norm(hfp);
        });
}

// Non-autonomous second variation: the autonomous term of f_0 plus the
// gradient pairing against the generator d/dt f_t|_0.
inline double hessian_nonautonomous(const IRManifold& m, const HolomorphicSymbol& p,
                                    const GeneratorFunction& family, double eps) {
    GeneratorFunction f0 = family.at_time(0.0);
    GeneratorFunction fdot = family.time_derivative(0.0);
    double h = hessian_autonomous(m, p, f0, eps);
    double corr = fdot.empty() ? 0.0 : gradient_pairing_eps(m, p, fdot, eps).pairing_value;
    return h + corr;
}

struct DescentLogRow {
    int step;
    double epsilon;
    double I_eps;
    double grad_norm;
    double step_size;
    bool accepted;
};

struct MinimizeResult {
    std::vector<DescentLogRow> log;
    std::vector<double> final_coefficients;
    std::string status;  // "max_steps", "critical", "line_search_failed"
    IRManifold manifold;
    std::vector<double> trajectory;  // accepted I_eps values
};

struct MinimizeOptions {
    int max_steps = 20;
    double eps0 = 0.1;
    double eps_floor = 1e-3;
    double eps_anneal = 1.0;       // eps = clamp(anneal * |grad|, floor, eps0)
    double initial_step = 0.5;
    double critical_norm = 1e-6;
    int max_backtracks = 20;
    double flow_dt = 0.05;
    double tube_radius = 1.5;
};

// Gradient descent over a finite generator basis with backtracking line
// search on I_eps and eps annealed with the gradient norm.
inline MinimizeResult minimize(const IRManifold& start, const HolomorphicSymbol& p,
                               const std::vector<std::string>& basis_ids,
                               const MinimizeOptions& opt = {}) {
    MinimizeResult res;
    res.manifold = to_flow_grid(start, opt.tube_radius);
    res.status = "max_steps";
    int nb = int(basis_ids.size());
    std::vector<GeneratorFunction> basis;
    for (const auto& id : basis_ids)
        basis.push_back(GeneratorFunction::from_basis(start.n, {id}, {1.0}));
    res.final_coefficients.assign(nb, 0.0);

    // I_eps needs a decaying symbol; criticality detection alone does not
    auto guarded_I = [&](const IRManifold& mm, double ee) {
        if (p.decay_order + 2.0 * p.n >= 0.0) return std::numeric_limits<double>::quiet_NaN();
        return compute_I_eps(mm, p, ee).value;
    };

    double eps = opt.eps0;
    double step = opt.initial_step;
    for (int it = 0; it < opt.max_steps; ++it) {
        std::vector<double> g(nb);
        double gnorm2 = 0.0;
        for (int k = 0; k < nb; ++k) {
            g[k] = gradient_pairing_eps(res.manifold, p, basis[k], eps).pairing_value;
            gnorm2 += g[k] * g[k];
        }
        double gnorm = std::sqrt(gnorm2);
        if (gnorm <= opt.critical_norm) {
            res.log.push_back({it, eps, guarded_I(res.manifold, eps), gnorm, 0.0, false});
            res.status = "critical";
            break;
        }
        eps = std::clamp(opt.eps_anneal * gnorm, opt.eps_floor, opt.eps0);
        double I0 = compute_I_eps(res.manifold, p, eps).value;

        GeneratorFunction dir = GeneratorFunction::zero(start.n);
        dir.n = start.n;
        for (int k = 0; k < nb; ++k)
            if (g[k] != 0.0) dir.terms.push_back({-g[k], basis[k].terms[0].basis, {1.0}});

        bool accepted = false;
        double eta = step;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            try {
                double dt = std::min(opt.flow_dt, eta);
                long nsteps = std::max(1L, std::lround(eta / dt));
                IRManifold cand = flow(res.manifold, dir, eta, eta / double(nsteps),
                                       opt.tube_radius);
                double I1 = compute_I_eps(cand, p, eps).value;
                if (I1 <= I0 - 1e-4 * eta * gnorm2) {
                    res.manifold = std::move(cand);
                    for (int k = 0; k < nb; ++k) res.final_coefficients[k] -= eta * g[k];
                    res.log.push_back({it, eps, I1, gnorm, eta, true});
                    res.trajectory.push_back(I1);
                    accepted = true;
                    step = std::min(eta * 2.0, opt.initial_step);
                    break;
                }
            } catch (const flow_error&) {
                // step left the tube: treat as a rejected trial
            }
            eta *= 0.5;
        }
        if (!accepted) {
            res.log.push_back({it, eps, I0, gnorm, eta, false});
            res.status = "line_search_failed";
            break;
        }
    }
    return res;
}

struct MinimalityRow {
    double t;
    double I_value;
    double deviation;  // I(Lambda_t) - I(Lambda_0)
};

struct MinimalityResult {
    std::vector<std::vector<MinimalityRow>> families;
    double min_deviation = 0.0;
    double error_margin = 0.0;       // quadrature + extrapolation error budget
    double min_second_difference = 0.0;
    bool pass = false;
};

// Samples I(Lambda_t) along autonomous deformation families around a critical
// manifold and checks minimality up to the numerical error margin, plus
// convexity of t -> I(Lambda_t) for the entire generators.
inline MinimalityResult minimality_experiment(const IRManifold& m0, const HolomorphicSymbol& p,
                                              const std::vector<GeneratorFunction>& families,
                                              const std::vector<double>& t_values,
                                              double tube_radius, double critical_tol = 1e-5,
                                              double eps0 = 0.2, int rungs = 4) {
    // precondition: Lambda_0 critical for the tested directions
    for (const auto& f : families) {
        auto g = gradient_pairing(m0, p, f);
        if (std::abs(g.pairing_value) > critical_tol)
            throw config_error("minimality_experiment: manifold not critical, |gradient| = " +
                               std::to_string(std::abs(g.pairing_value)));
    }
    std::vector<double> ts;  // positive multipliers, sorted
    for (double t : t_values) {
        if (t <= 0) throw config_error("minimality_experiment: t grid must be positive");
        ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());

    IRManifold base = to_flow_grid(m0, tube_radius);
    auto w0 = symplectic_volume(base);
    auto I0 = compute_I(base, p, eps0, rungs, &w0);

    MinimalityResult res;
    res.error_margin = 2.0 * I0.extrapolation_residual + 4.0 * I0.quad_error +
                       2.0 * I0.tail_bound + 1e-7;
    res.min_deviation = 1e300;
    res.min_second_difference = 1e300;
    double dt_flow = 5e-3;

    for (const auto& f : families) {
        std::vector<MinimalityRow> rows;
        for (int dir = -1; dir <= 1; dir += 2) {
            IRManifold cur = base;
            double t_prev = 0.0;
            for (double t : ts) {
                double seg = (t - t_prev);
                long nst = std::max(1L, std::lround(seg / dt_flow));
                cur = flow(cur, f.scaled(double(dir)), seg, seg / double(nst), tube_radius);
                t_prev = t;
                auto wt = symplectic_volume(cur);
                auto It = compute_I(cur, p, eps0, rungs, &wt);
                rows.push_back({dir * t, It.value, It.value - I0.value});
            }
        }
        rows.push_back({0.0, I0.value, 0.0});
        std::sort(rows.begin(), rows.end(),
                  [](const MinimalityRow& a, const MinimalityRow& b) { return a.t < b.t; });
        for (const auto& r : rows) res.min_deviation = std::min(res.min_deviation, r.deviation);
        // convexity of t -> I along the family (entire generator)
        for (std::size_t k = 1; k + 1 < rows.size(); ++k) {
            double h1 = rows[k].t - rows[k - 1].t;
            double h2 = rows[k + 1].t - rows[k].t;
            if (std::abs(h1 - h2) > 1e-9) continue;
            double d2 = rows[k + 1].I_value - 2.0 * rows[k].I_value + rows[k - 1].I_value;
            res.min_second_difference = std::min(res.min_second_difference, d2);
        }
        res.families.push_back(std::move(rows));
    }
    res.pass = res.min_deviation >= -res.error_margin;
    return res;
}

// 1-D profile r(x) with exact derivative, for the model index integrals.
struct RealProfile {
    std::function<double(double)> value;
    std::function<double(double)> deriv;
    std::string id;
};

inline RealProfile make_profile(const std::string& name) {
    if (name == "x") return {[](double x) { return x; }, [](double) { return 1.0; }, name};
    if (name == "-x") return {[](double x) { return -x; }, [](double) { return -1.0; }, name};
    if (name == "x^2")
        return {[](double x) { return x * x; }, [](double x) { return 2.0 * x; }, name};
    throw config_error("unknown profile: " + name);
}

struct IndexResult {
    double extrapolated = 0.0;
    double predicted = 0.0;   // pi * sum iota(x_n) f(x_n, 0)
    std::vector<double> zero_locations;
    std::vector<int> indices;
};

// Sign-index model integral: M_eps = int eps^2/(eps^2+xi^2+r^2)^2 r'(x) f dx dxi,
// extrapolated over the eps ladder and compared with pi sum iota f(zeros).
inline IndexResult index_gradient_1d(const RealProfile& r,
                                     const std::function<double(double, double)>& f,
                                     const std::vector<double>& ladder, double box = 6.0,
                                     int nodes = 2001) {
    IndexResult res;
    // locate zeros by sign change plus tangency scan
    int scan = 20001;
    double h = 2.0 * box / (scan - 1);
    std::vector<double> zeros;
    std::vector<int> iotas;
    for (int i = 0; i + 1 < scan; ++i) {
        double a = -box + i * h, b = a + h;
        double ra = r.value(a), rb = r.value(b);
        if (ra == 0.0) {
            zeros.push_back(a);
        } else if (ra * rb < 0.0) {
            double lo = a, hi = b;
            for (int it = 0; it < 80; ++it) {
                double mid = 0.5 * (lo + hi);
                (r.value(lo) * r.value(mid) <= 0.0 ? hi : lo) = mid;
            }
            zeros.push_back(0.5 * (lo + hi));
        } else {
            continue;
        }
        double z = zeros.back();
        double left = r.value(z - 10 * h), right = r.value(z + 10 * h);
        iotas.push_back(left < 0 && right > 0 ? 1 : (left > 0 && right < 0 ? -1 : 0));
    }
    for (std::size_t k = 0; k < zeros.size(); ++k) {
        if (std::abs(std::abs(zeros[k]) - box) < 1e-9)
            throw config_error("index_gradient_1d: zero of r at the truncation boundary");
        res.predicted += pi * iotas[k] * f(zeros[k], 0.0);
    }
    res.zero_locations = zeros;
    res.indices = iotas;

    // the eps-family of double integrals on a tensor grid
    std::vector<double> M(ladder.size());
    double step = 2.0 * box / (nodes - 1);
    for (std::size_t k = 0; k < ladder.size(); ++k) {
        double e2 = ladder[k] * ladder[k];
        std::vector<double> rowsum(nodes);
        parallel_for(nodes, [&](std::size_t bb, std::size_t ee) {
            for (std::size_t ix = bb; ix < ee; ++ix) {
                double x = -box + ix * step;
                double rv = r.value(x), rd = r.deriv(x);
                double wx = (ix == 0 || ix == std::size_t(nodes - 1)) ? 0.5 : 1.0;
                double acc = 0.0;
                for (int ixi = 0; ixi < nodes; ++ixi) {
                    double xi = -box + ixi * step;
                    double wxi = (ixi == 0 || ixi == nodes - 1) ? 0.5 : 1.0;
                    double denom = e2 + xi * xi + rv * rv;
                    acc += wxi * e2 / (denom * denom) * rd * f(x, xi);
                }
                rowsum[ix] = acc * wx * step * step;
            }
        });
        M[k] = pairwise_sum(rowsum);
    }
    // The model converges like M + A eps^2 log(1/eps) + B eps^2; solve the
    // 3x3 system on the last three rungs to eliminate both terms.
    int K = int(M.size());
    if (K >= 3) {
        double e1 = ladder[K - 1], e2v = ladder[K - 2], e3 = ladder[K - 3];
        Eigen::Matrix3d A;
        Eigen::Vector3d b;
        auto row = [](double e) {
            return std::array<double, 3>{1.0, e * e * std::log(1.0 / e), e * e};
        };
        auto r1 = row(e1), r2 = row(e2v), r3 = row(e3);
        A << r1[0], r1[1], r1[2], r2[0], r2[1], r2[2], r3[0], r3[1], r3[2];
        b << M[K - 1], M[K - 2], M[K - 3];
        Eigen::Vector3d sol = A.fullPivLu().solve(b);
        res.extrapolated = sol(0);
        return res;
    }
    res.extrapolated = M.back();
    return res;
}

struct JumpResult {
    double left_slope = 0.0;
    double right_slope = 0.0;
    double jump = 0.0;            // right_slope - left_slope
    double predicted_slope = 0.0; // 2 pi sum f (-sgn H_p^2 f) over Sigma_0
    double predicted_jump = 0.0;  // twice the predicted slope
    double transversality = 0.0;  // min |d(H_p f)| over Sigma_0
    std::vector<double> sigma0_angles;
};

namespace detail {

// gradient of u = {p, f} for n = 1 from exact Hessians
inline void bracket_gradient(const HolomorphicSymbol& p, const GeneratorFunction& f,
                             const cplx* rho, cplx* grad_u) {
    cplx pv, fv;
    cplx gp[2], gf[2], hp[4], hf[4];
    p.eval_raw(rho, pv, gp, hp);
    f.eval(rho, 0.0, fv, gf, hf);
    // u = dp/dxi df/dx - dp/dx df/dxi
    for (int k = 0; k < 2; ++k)
        grad_u[k] = hp[1 * 2 + k] * gf[0] + gp[1] * hf[0 * 2 + k] - hp[0 * 2 + k] * gf[1] -
                    gp[0] * hf[1 * 2 + k];
}

}  // namespace detail

// Jump of d/dt I(Lambda_t, p) at t = 0 for a real principal-type symbol on
// R^2 with a ring-shaped zero curve. The measured one-sided slopes come from
// I along the flow of f; the prediction integrates over Sigma_0.
inline JumpResult jump_experiment(const IRManifold& m0, const HolomorphicSymbol& p,
                                  const GeneratorFunction& f,
                                  const std::vector<double>& t_values, double tube_radius,
                                  double ring_radius_guess = 0.8, double eps0 = 0.2,
                                  int rungs = 4) {
    JumpResult res;
    // parameterize the zero curve by angle: Newton along rays
    const int M = 4096;
    std::vector<double> radius(M), angle(M);
    for (int k = 0; k < M; ++k) {
        double th = 2.0 * pi * k / M;
        double c = std::cos(th), s = std::sin(th);
        double rr = ring_radius_guess;
        bool ok = false;
        for (int it = 0; it < 60; ++it) {
            cplx rho[2] = {cplx(rr * c), cplx(rr * s)};
            cplx pv, gp[2];
            p.eval_raw(rho, pv, gp);
            if (std::abs(pv.imag()) > 1e-10)
                throw config_error("jump_experiment: symbol is not real on the manifold");
            double dpdr = (gp[0] * c + gp[1] * s).real();
            if (std::abs(dpdr) < 1e-12) break;
            double next = rr - pv.real() / dpdr;
            if (std::abs(next - rr) < 1e-14) {
                ok = true;
                rr = next;
                break;
            }
            rr = next;
        }
        if (!ok) throw numeric_error("jump_experiment: zero-curve Newton failed");
        radius[k] = rr;
        angle[k] = th;
    }
    // Sigma_0: zeros of H_p f along the curve
    auto hpf_at = [&](double th) {
        double rr = radius[std::size_t(std::round(th / (2.0 * pi) * M)) % M];
        // re-polish the radius at interpolated angles
        double c = std::cos(th), s = std::sin(th);
        for (int it = 0; it < 40; ++it) {
            cplx rho[2] = {cplx(rr * c), cplx(rr * s)};
            cplx pv, gp[2];
            p.eval_raw(rho, pv, gp);
            double dpdr = (gp[0] * c + gp[1] * s).real();
            if (std::abs(dpdr) < 1e-12) break;
            double next = rr - pv.real() / dpdr;
            if (std::abs(next - rr) < 5e-16) {
                rr = next;
                break;
            }
            rr = next;
        }
        cplx rho[2] = {cplx(rr * c), cplx(rr * s)};
        cplx pv, fv, gp[2], gf[2];
        p.eval_raw(rho, pv, gp);
        f.eval(rho, 0.0, fv, gf);
        // {p, f} with everything real on R^2
        double u = (gp[1] * gf[0] - gp[0] * gf[1]).real();
        return std::tuple<double, double, cplx, cplx>(u, rr, rho[0], rho[1]);
    };
    std::vector<double> crit_angles;
    double prev_u = std::get<0>(hpf_at(0.0));
    for (int k = 1; k <= M; ++k) {
        double th = 2.0 * pi * k / M;
        double u = std::get<0>(hpf_at(th));
        if (prev_u == 0.0 || prev_u * u < 0.0) {
            double lo = 2.0 * pi * (k - 1) / M, hi = th;
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                (std::get<0>(hpf_at(lo)) * std::get<0>(hpf_at(mid)) <= 0.0 ? hi : lo) = mid;
            }
            crit_angles.push_back(0.5 * (lo + hi));
        }
        prev_u = u;
    }
    if (crit_angles.empty())
        throw config_error("jump_experiment: Sigma_0 extraction found no transversal zeros");

    res.transversality = 1e300;
    for (double th : crit_angles) {
        auto [u, rr, x, xi] = hpf_at(th);
        cplx rho[2] = {x, xi};
        cplx grad_u[2];
        detail::bracket_gradient(p, f, rho, grad_u);
        double du = std::hypot(grad_u[0].real(), grad_u[1].real());
        res.transversality = std::min(res.transversality, du);
        // H_p^2 f = {p, {p, f}}
        cplx pv, gp[2];
        p.eval_raw(rho, pv, gp);
        double h2 = (gp[1] * grad_u[0] - gp[0] * grad_u[1]).real();
        cplx fv, gf[2];
        f.eval(rho, 0.0, fv, gf);
        if (h2 != 0.0) res.predicted_slope += 2.0 * pi * fv.real() * (h2 > 0 ? -1.0 : 1.0);
        res.sigma0_angles.push_back(th);
    }
    if (res.transversality < 1e-3)
        throw config_error("jump_experiment: transversality fails (zeros of H_p f must be simple), min |d H_p f| = " +
                           std::to_string(res.transversality));
    res.predicted_jump = 2.0 * res.predicted_slope;

    // measured one-sided slopes of t -> I(Lambda_t)
    IRManifold base = to_flow_grid(m0, tube_radius);
    auto w0 = symplectic_volume(base);
    double I0 = compute_I(base, p, eps0, rungs, &w0).value;
    std::vector<double> ts = t_values;
    std::sort(ts.begin(), ts.end());
    auto one_sided = [&](int dir) {
        // fit dI = c0 + a |t| over the window; the intercept absorbs the
        // eps-regularization offset that survives at small |t|
        std::vector<double> xs, ys;
        IRManifold cur = base;
        double t_prev = 0.0;
        for (double t : ts) {
            double seg = t - t_prev;
            long nst = std::max(1L, std::lround(seg / 5e-3));
            cur = flow(cur, f.scaled(double(dir)), seg, seg / double(nst), tube_radius);
            t_prev = t;
            auto wt = symplectic_volume(cur);
            double It = compute_I(cur, p, eps0, rungs, &wt).value;
            xs.push_back(t);
            ys.push_back(It - I0);
        }
        return linear_fit(xs, ys).second;  // slope in |t|
    };
    double up = one_sided(+1);
    double down = one_sided(-1);
    res.right_slope = up;
    res.left_slope = -down;
    res.jump = res.right_slope - res.left_slope;
    return res;
}

}  // namespace phaseflow

#endif
