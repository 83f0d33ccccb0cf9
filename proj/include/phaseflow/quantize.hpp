#ifndef PHASEFLOW_QUANTIZE_HPP
#define PHASEFLOW_QUANTIZE_HPP

#include "phaseflow/functional.hpp"

namespace phaseflow {

// Nystrom matrix of the h-Weyl quantization of an n = 1 symbol on [-L, L]:
// A = I + D^{1/2} K D^{1/2} with K the Weyl kernel of p - 1 and D the
// trapezoid weights (the symmetrization leaves the determinant unchanged).
struct QuantizedOperator {
    double h = 0.1;
    double L = 6.0;
    int N = 512;
    std::string symbol_id;
    double theta_truncation = 0.0;  // 0 when a closed-form kernel was used
    std::vector<double> grid;
    Eigen::MatrixXcd matrix;

    double dx() const { return 2.0 * L / (N - 1); }
};

namespace qdetail {

// closed-form theta integral of one Gaussian kernel term:
// int e^{i tau theta / h} e^{-at (theta - ct)^2} dtheta
//   = sqrt(pi/at) exp(i ct tau / h - tau^2 / (4 at h^2))
inline cplx gauss_theta_integral(double tau, double h, double at, cplx ct) {
    return std::sqrt(pi / at) *
           std::exp(cplx(0.0, 1.0) * ct * (tau / h) - tau * tau / (4.0 * at * h * h));
}

}  // namespace qdetail

struct WeylOptions {
    int theta_nodes = 4096;
    double theta_max = 8.0;
    int min_nodes_per_wavelength = 8;
};

// Minimal admissible N for the oscillation scale 2 pi h at unit momentum.
inline int weyl_min_nodes(double h, double L, int per_wavelength = 8) {
    return int(std::ceil(1.0 + per_wavelength * 2.0 * L / (2.0 * pi * h)));
}

inline QuantizedOperator weyl_matrix(const HolomorphicSymbol& p, double h, double L, int N,
                                     const WeylOptions& opt = {}) {
    if (p.n != 1) throw config_error("weyl_matrix: n = 1 symbols only");
    if (!(h > 0.0) || h > 1.0) throw config_error("weyl_matrix: need h in (0, 1]");
    if (N % 2 != 0) throw config_error("weyl_matrix: N must be even");
    if (p.decay_order >= -2.0 && p.kernel_plan.empty())
        throw config_error("weyl_matrix: symbol must decay (m < -2)");
    int nmin = weyl_min_nodes(h, L, opt.min_nodes_per_wavelength);
    if (N < nmin)
        throw config_error("weyl_matrix: N = " + std::to_string(N) +
                           " under-resolves the kernel at h = " + std::to_string(h) +
                           "; suggest N >= " + std::to_string(nmin));
    QuantizedOperator op;
    op.h = h;
    op.L = L;
    op.N = N;
    op.symbol_id = p.id;
    op.grid.resize(N);
    double dx = 2.0 * L / (N - 1);
    for (int i = 0; i < N; ++i) op.grid[i] = -L + i * dx;

    Eigen::MatrixXcd K(N, N);
    bool closed_form = !p.kernel_plan.empty();
    if (closed_form) {
        parallel_for(std::size_t(N), [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i)
                for (int j = 0; j < N; ++j) {
                    double m = 0.5 * (op.grid[i] + op.grid[j]);
                    double tau = op.grid[i] - op.grid[j];
                    cplx acc = 0.0;
                    for (const auto& term : p.kernel_plan) {
                        cplx xfac = term.amp * std::exp(-term.ax * (m - term.cx) * (m - term.cx));
                        acc += xfac * qdetail::gauss_theta_integral(tau, h, term.at, term.ct);
                    }
                    K(i, j) = acc / (2.0 * pi * h);
                }
        });
    } else {
        op.theta_truncation = opt.theta_max;
        // refuse when the dropped theta tail is not negligible
        double tail = 0.0;
        for (int i = 0; i < 16; ++i) {
            double m = -L + 2.0 * L * i / 15.0;
            for (double sgn : {-1.0, 1.0}) {
                cplx rho[2] = {cplx(m), cplx(sgn * opt.theta_max)};
                cplx pv;
                p.eval_raw(rho, pv, nullptr);
                tail = std::max(tail, std::abs(pv - 1.0));
            }
        }
        if (tail > 1e-8)
            throw config_error("weyl_matrix: theta truncation error " + std::to_string(tail) +
                               " above tolerance; enlarge theta_max");
        int M = opt.theta_nodes;
        double dth = 2.0 * opt.theta_max / (M - 1);
        // tabulate a(m, theta) = p(m, theta) - 1 on the (midpoint, theta) grid
        parallel_for(std::size_t(N), [&](std::size_t b, std::size_t e) {
            std::vector<cplx> arow(M);
            for (std::size_t i = b; i < e; ++i)
                for (int j = 0; j < N; ++j) {
                    double m = 0.5 * (op.grid[i] + op.grid[j]);
                    double tau = op.grid[i] - op.grid[j];
                    for (int k = 0; k < M; ++k) {
                        double th = -opt.theta_max + k * dth;
                        cplx rho[2] = {cplx(m), cplx(th)};
                        cplx pv;
                        p.eval_raw(rho, pv, nullptr);
                        double w = (k == 0 || k == M - 1) ? 0.5 : 1.0;
                        arow[k] = (pv - 1.0) * w * std::exp(cplx(0.0, tau * th / h));
                    }
                    K(i, j) = pairwise_sum(arow) * dth / (2.0 * pi * h);
                }
        });
    }
    op.matrix = Eigen::MatrixXcd::Identity(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            double wi = (i == 0 || i == N - 1) ? 0.5 : 1.0;
            double wj = (j == 0 || j == N - 1) ? 0.5 : 1.0;
            op.matrix(i, j) += std::sqrt(wi * dx) * K(i, j) * std::sqrt(wj * dx);
        }
    return op;
}

// trace of Op(p) - I (the kernel part), grid-quadratured
inline cplx weyl_trace(const QuantizedOperator& op) {
    cplx s = 0.0;
    for (int i = 0; i < op.N; ++i) s += op.matrix(i, i);
    return s - double(op.N);
}

struct LogDet {
    double value = 0.0;
    bool singular = false;
};

// log |det A| via partial-pivot LU (deterministic pivoting order).
inline LogDet log_abs_det(const QuantizedOperator& op) {
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(op.matrix);
    LogDet out;
    for (int i = 0; i < op.N; ++i) {
        double u = std::abs(lu.matrixLU()(i, i));
        if (u == 0.0) {
            out.singular = true;
            out.value = -std::numeric_limits<double>::infinity();
            return out;
        }
        out.value += std::log(u);
    }
    return out;
}

inline double hermiticity_defect(const QuantizedOperator& op) {
    return (op.matrix - op.matrix.adjoint()).cwiseAbs().maxCoeff();
}

struct EllipticCompareRow {
    double h;
    int N;
    double logdet_scaled;  // 2 pi h log|det|
    double phase_integral;
    double error;
};

struct EllipticCompareResult {
    std::vector<EllipticCompareRow> rows;
    double fitted_slope = 0.0;
    bool pass = false;
};

// N(h) = clamp(ceil(c L^2 / h), 512, 2048) with c tuned so N(0.1) = 512
inline int default_N_rule(double h, double L) {
    double c = 512.0 * 0.1 / (L * L);
    int N = int(std::ceil(c * L * L / h));
    N = std::clamp(N, 512, 2048);
    if (N % 2) ++N;
    return N;
}

// Elliptic determinant identity: E(h) = |2 pi h log|det Op(p)| - int log|p_0||, fitted slope in
// log-log must reach at least 0.8 for an elliptic symbol.
inline EllipticCompareResult elliptic_logdet_compare(const HolomorphicSymbol& p,
                                                     const std::vector<double>& h_ladder,
                                                     double L = 6.0,
                                                     double phase_R = 5.0, int phase_nodes = 401,
                                                     double min_slope = 0.8) {
    auto m = IRManifold::real_phase_space(1, phase_R, {phase_nodes, phase_nodes});
    double phase_integral = compute_I(m, p).value;
    EllipticCompareResult res;
    std::vector<double> hs, es;
    for (double h : h_ladder) {
        int N = default_N_rule(h, L);
        auto op = weyl_matrix(p, h, L, N);
        auto ld = log_abs_det(op);
        if (ld.singular) throw numeric_error("elliptic_logdet_compare: singular operator");
        double scaled = 2.0 * pi * h * ld.value;
        double err = std::abs(scaled - phase_integral);
        res.rows.push_back({h, N, scaled, phase_integral, err});
        hs.push_back(h);
        es.push_back(err);
    }
    auto [slope, c] = powerlaw_fit(std::span<const double>(hs), std::span<const double>(es));
    res.fitted_slope = slope;
    res.pass = slope >= min_slope;
    return res;
}

struct SlackModel {
    double a = 0.0, b = 0.0;
    double margin = 3.0;
    double operator()(double h) const { return margin * (a + b * h); }
};

// Calibrates slack(h) = margin (a + b h) from the elliptic family, where the
// determinant identity is an equality and the residual is pure discretization.
inline SlackModel calibrate_slack(const std::vector<double>& h_ladder, double L = 6.0,
                                  double phase_R = 5.0, int phase_nodes = 401) {
    std::vector<double> hs, es;
    for (double c : {0.3, 0.5, 0.8}) {
        auto p = builtin_symbol("elliptic_gauss", {{"c", c}});
        auto m = IRManifold::real_phase_space(1, phase_R, {phase_nodes, phase_nodes});
        double phase_integral = compute_I(m, p).value;
        for (double h : h_ladder) {
            auto op = weyl_matrix(p, h, L, default_N_rule(h, L));
            double scaled = 2.0 * pi * h * log_abs_det(op).value;
            hs.push_back(h);
            es.push_back(std::abs(scaled - phase_integral));
        }
    }
    auto [a, b] = linear_fit(hs, es);
    SlackModel s;
    s.a = std::max(a, 0.0);
    s.b = std::max(b, 1e-6);
    return s;
}

struct BoundRow {
    double h;
    std::string phi_id;
    double logdet_scaled;
    double I_phi;
    double slack;
    bool satisfied;
    bool skipped = false;
};

struct BoundResult {
    std::vector<BoundRow> rows;
    std::string minimizing_phi;
    double min_I = 1e300;
    bool all_satisfied = true;
};

// Determinant upper bound: the determinant is computed once per h on the
// real-quantization side, while Lambda_phi only moves the functional side.
inline BoundResult bound_experiment(const HolomorphicSymbol& p,
                                    const std::vector<WeightPtr>& weight_family,
                                    const std::vector<double>& h_ladder, const SlackModel& slack,
                                    double L = 6.0, double phase_R = 5.0, int phase_nodes = 801,
                                    double eps0 = 0.2, int rungs = 5) {
    BoundResult res;
    for (double h : h_ladder) {
        auto op = weyl_matrix(p, h, L, default_N_rule(h, L));
        auto ld = log_abs_det(op);
        double scaled = 2.0 * pi * h * ld.value;
        for (const auto& phi : weight_family) {
            BoundRow row;
            row.h = h;
            row.phi_id = phi->id();
            row.logdet_scaled = scaled;
            row.slack = slack(h);
            try {
                auto lg = IRManifold::weight_graph(1, phase_R, {phase_nodes, phase_nodes}, phi);
                to_flow_grid(lg, p.tube_radius);  // tube check
                row.I_phi = compute_I(lg, p, eps0, rungs).value;
            } catch (const config_error&) {
                row.skipped = true;
                res.rows.push_back(row);
                continue;
            }
            row.satisfied = scaled <= row.I_phi + row.slack;
            if (!row.satisfied) res.all_satisfied = false;
            if (row.I_phi < res.min_I) {
                res.min_I = row.I_phi;
                res.minimizing_phi = row.phi_id;
            }
            res.rows.push_back(row);
        }
    }
    return res;
}

struct SpectralMap {
    double re0, re1, im0, im1;
    int nre, nim;
    std::vector<double> I_values;     // row-major over (ire, iim)
    std::vector<double> laplacian;    // quarter of the 5-point Laplacian
    std::vector<double> pushforward;  // histogram mass of p_*(mu) per z-cell
    std::vector<int> near_pole;       // nodes where |ptilde - z| was small

    double dre() const { return (re1 - re0) / (nre - 1); }
    double dim() const { return (im1 - im0) / (nim - 1); }
    std::size_t at(int i, int j) const { return std::size_t(i) * nim + j; }
};

// I(z) = I(Lambda, (p - z)/(ptilde - z)) sampled on a z-grid, its discrete
// dz dzbar (quarter Laplacian), and the pushforward histogram of p.
inline SpectralMap spectral_map(const HolomorphicSymbol& p, const HolomorphicSymbol& ptilde,
                                const IRManifold& m, double re0, double re1, int nre, double im0,
                                double im1, int nim, double pole_tol = 1e-6) {
    SpectralMap sm;
    sm.re0 = re0;
    sm.re1 = re1;
    sm.im0 = im0;
    sm.im1 = im1;
    sm.nre = nre;
    sm.nim = nim;
    sm.I_values.assign(std::size_t(nre) * nim, 0.0);
    sm.laplacian.assign(std::size_t(nre) * nim, 0.0);
    sm.pushforward.assign(std::size_t(nre) * nim, 0.0);
    sm.near_pole.assign(std::size_t(nre) * nim, 0);

    auto weights = symplectic_volume(m);
    std::size_t count = m.node_count();
    std::vector<cplx> pv(count), ptv(count);
    parallel_for(count, [&](std::size_t b, std::size_t e) {
        cplx rho[8];
        for (std::size_t i = b; i < e; ++i) {
            m.node(i, rho);
            cplx v, vt;
            p.eval_raw(rho, v, nullptr);
            ptilde.eval_raw(rho, vt, nullptr);
            pv[i] = v;
            ptv[i] = vt;
        }
    });

    for (int i = 0; i < nre; ++i)
        for (int j = 0; j < nim; ++j) {
            cplx z(re0 + i * sm.dre(), im0 + j * sm.dim());
            std::vector<double> vals(count);
            int flagged = 0;
            for (std::size_t k = 0; k < count; ++k) {
                double num = std::abs(pv[k] - z);
                double den = std::abs(ptv[k] - z);
                if (den < pole_tol) {
                    ++flagged;
                    vals[k] = 0.0;
                    continue;
                }
                double clipped = std::max(num, 1e-300);
                vals[k] = weights[k] * std::log(clipped / den);
            }
            sm.I_values[sm.at(i, j)] = pairwise_sum(vals);
            sm.near_pole[sm.at(i, j)] = flagged;
        }

    // Discrete dz dzbar in the delta normalization for which the mass
    // identity reads laplacian = pi * pushforward: half the 5-point Laplacian.
    // (The quarter-Laplacian convention would pair with pi/2 instead.)
    for (int i = 1; i + 1 < nre; ++i)
        for (int j = 1; j + 1 < nim; ++j) {
            double lap_re = (sm.I_values[sm.at(i + 1, j)] - 2.0 * sm.I_values[sm.at(i, j)] +
                             sm.I_values[sm.at(i - 1, j)]) /
                            (sm.dre() * sm.dre());
            double lap_im = (sm.I_values[sm.at(i, j + 1)] - 2.0 * sm.I_values[sm.at(i, j)] +
                             sm.I_values[sm.at(i, j - 1)]) /
                            (sm.dim() * sm.dim());
            sm.laplacian[sm.at(i, j)] = 0.5 * (lap_re + lap_im);
        }

    // pushforward histogram of p over the same z-cells
    for (std::size_t k = 0; k < count; ++k) {
        double re = pv[k].real(), im = pv[k].imag();
        int i = int(std::floor((re - (re0 - 0.5 * sm.dre())) / sm.dre()));
        int j = int(std::floor((im - (im0 - 0.5 * sm.dim())) / sm.dim()));
        if (i >= 0 && i < nre && j >= 0 && j < nim) sm.pushforward[sm.at(i, j)] += weights[k];
    }
    return sm;
}

// Laplacian mass over an interior rectangle vs pi times pushforward mass.
struct RectMass {
    double laplacian_mass = 0.0;
    double pushforward_mass = 0.0;
    double relative_gap = 0.0;
};

inline RectMass rectangle_mass(const SpectralMap& sm, double a, double b, double c, double d) {
    RectMass out;
    for (int i = 1; i + 1 < sm.nre; ++i)
        for (int j = 1; j + 1 < sm.nim; ++j) {
            double re = sm.re0 + i * sm.dre();
            double im = sm.im0 + j * sm.dim();
            if (re < a || re > b || im < c || im > d) continue;
            out.laplacian_mass += sm.laplacian[sm.at(i, j)] * sm.dre() * sm.dim();
        }
    for (int i = 0; i < sm.nre; ++i)
        for (int j = 0; j < sm.nim; ++j) {
            double re = sm.re0 + i * sm.dre();
            double im = sm.im0 + j * sm.dim();
            if (re < a || re > b || im < c || im > d) continue;
            out.pushforward_mass += sm.pushforward[sm.at(i, j)];
        }
    double denom = std::max(pi * out.pushforward_mass, 1e-300);
    out.relative_gap = std::abs(out.laplacian_mass - pi * out.pushforward_mass) / denom;
    return out;
}

struct PushforwardRow {
    double r;
    double nu;
    double nu_hat;
    double inflation_forward;   // minimal s with nu(D_r) <= nu_hat(D_{r+s})
    double inflation_backward;
};

struct PushforwardResult {
    std::vector<PushforwardRow> rows;
    double slope = 0.0;          // fitted exponent of nu(D(0,r)) ~ r^slope
    double C_forward = 0.0;      // fitted constants in s(r) = C r^{N0}
    double C_backward = 0.0;
    bool domination = true;
};

// Inflated-disc domination near a second-order vanishing point: histograms of both
// pushforwards near 0 with the inflated-disc domination measured both ways.
inline PushforwardResult pushforward_comparison(const HolomorphicSymbol& p,
                                                const HolomorphicSymbol& p_hat, double N0,
                                                const std::vector<double>& r_ladder,
                                                double box = 1.2, int nodes_per_axis = 41) {
    if (p.n != 2 || p_hat.n != 2) throw config_error("pushforward_comparison: n = 2 only");
    {
        // both symbols must vanish at the same point (the origin here)
        cplx rho[4] = {0, 0, 0, 0};
        cplx v1, v2;
        p.eval_raw(rho, v1, nullptr);
        p_hat.eval_raw(rho, v2, nullptr);
        if (std::abs(v1) > 1e-12 || std::abs(v2) > 1e-12)
            throw config_error("pushforward_comparison: vanishing point mismatch");
    }
    // radii refined between the ladder points for the inflation search
    std::vector<double> radii;
    double rmax = 0.0;
    for (double r : r_ladder) rmax = std::max(rmax, r);
    int fine = 400;
    for (int k = 0; k <= fine; ++k) radii.push_back(2.0 * rmax * k / fine);

    // stream the midpoint grid and accumulate counting masses
    std::vector<double> nu(radii.size(), 0.0), nu_hat(radii.size(), 0.0);
    double h = 2.0 * box / nodes_per_axis;
    double cell = h * h * h * h;
    std::size_t n = nodes_per_axis;
    std::vector<double> acc_nu(thread_count() * radii.size(), 0.0);
    std::vector<double> acc_nuh(thread_count() * radii.size(), 0.0);
    std::atomic<int> slot{0};
    parallel_for(n * n * n * n, [&](std::size_t bgn, std::size_t end) {
        int s = slot.fetch_add(1);
        double* my_nu = acc_nu.data() + std::size_t(s) * radii.size();
        double* my_nuh = acc_nuh.data() + std::size_t(s) * radii.size();
        for (std::size_t idx = bgn; idx < end; ++idx) {
            std::size_t rem = idx;
            int ii[4];
            for (int a = 3; a >= 0; --a) {
                ii[a] = int(rem % n);
                rem /= n;
            }
            cplx rho[4];
            for (int a = 0; a < 4; ++a) rho[a] = -box + (ii[a] + 0.5) * h;
            cplx v1, v2;
            p.eval_raw(rho, v1, nullptr);
            p_hat.eval_raw(rho, v2, nullptr);
            double a1 = std::abs(v1), a2 = std::abs(v2);
            for (std::size_t k = 0; k < radii.size(); ++k) {
                if (a1 <= radii[k]) my_nu[k] += cell;
                if (a2 <= radii[k]) my_nuh[k] += cell;
            }
        }
    });
    for (int s = 0; s < thread_count(); ++s)
        for (std::size_t k = 0; k < radii.size(); ++k) {
            nu[k] += acc_nu[std::size_t(s) * radii.size() + k];
            nu_hat[k] += acc_nuh[std::size_t(s) * radii.size() + k];
        }

    auto mass_at = [&](const std::vector<double>& masses, double r) {
        // nearest refined radius at or above r
        std::size_t k = std::size_t(std::ceil(r / (2.0 * rmax) * fine));
        k = std::min(k, masses.size() - 1);
        return masses[k];
    };
    auto min_inflation = [&](const std::vector<double>& lhs, const std::vector<double>& rhs,
                             double r) {
        double target = mass_at(lhs, r);
        for (std::size_t k = 0; k < radii.size(); ++k)
            if (radii[k] >= r && rhs[k] >= target) return radii[k] - r;
        return 2.0 * rmax;
    };

    PushforwardResult res;
    std::vector<double> rs, ms, cf, cb;
    for (double r : r_ladder) {
        PushforwardRow row;
        row.r = r;
        row.nu = mass_at(nu, r);
        row.nu_hat = mass_at(nu_hat, r);
        row.inflation_forward = min_inflation(nu, nu_hat, r);
        row.inflation_backward = min_inflation(nu_hat, nu, r);
        res.rows.push_back(row);
        rs.push_back(r);
        ms.push_back(row.nu);
        cf.push_back(row.inflation_forward / std::pow(r, N0));
        cb.push_back(row.inflation_backward / std::pow(r, N0));
    }
    auto [slope, cc] = powerlaw_fit(std::span<const double>(rs), std::span<const double>(ms));
    res.slope = slope;
    res.C_forward = *std::max_element(cf.begin(), cf.end());
    res.C_backward = *std::max_element(cb.begin(), cb.end());
    // domination fails when the needed inflation stops shrinking like r^{N0}
    for (const auto& row : res.rows)
        if (row.inflation_forward >= 2.0 * rmax - 1e-12 ||
            row.inflation_backward >= 2.0 * rmax - 1e-12)
            res.domination = false;
    return res;
}

}  // namespace phaseflow

#endif
