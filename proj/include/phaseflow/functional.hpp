#ifndef PHASEFLOW_FUNCTIONAL_HPP
#define PHASEFLOW_FUNCTIONAL_HPP

#include <numeric>

#include "phaseflow/manifolds.hpp"

namespace phaseflow {

struct FunctionalValue {
    double value = 0.0;
    double epsilon = 0.0;
    double tail_bound = 0.0;
    double quad_error = 0.0;           // internal grid-refinement estimate
    double extrapolation_residual = 0.0;
    std::vector<int> grid_shape;
    double R = 0.0;
    bool extrapolation_ok = true;
};

namespace detail {

// |contribution outside the box| <= C_m * area(S^{2n-1}) * R^{m+2n}/|m+2n|
inline double tail_bound_for(const HolomorphicSymbol& p, double R) {
    double m = p.decay_order;
    int n = p.n;
    if (m + 2.0 * n >= 0.0) return 1e300;  // growing symbol: no certificate
    double cm = verify_decay(p, R);
    double sphere = (n == 1) ? 2.0 * pi : 2.0 * pi * pi;
    return cm * sphere * std::pow(R, m + 2.0 * n) / std::abs(m + 2.0 * n);
}

// F_eps(p) = 0.5 log((|p|^2 + eps^2) / (1 + eps^2))
inline double f_eps(cplx p, double eps2) {
    return 0.5 * std::log((std::norm(p) + eps2) / (1.0 + eps2));
}

// shape with every axis halved onto the even-index subgrid (needs odd sizes)
inline bool coarse_shape(const std::vector<int>& shape, std::vector<int>& out) {
    out = shape;
    for (auto& s : out) {
        if (s < 5 || s % 2 == 0) return false;
        s = (s + 1) / 2;
    }
    return true;
}

}  // namespace detail

// Quadrature of node-wise values against precomputed symplectic weights,
// with deterministic pairwise reduction.
template <class NodeFn>
double quadrature_sum(const IRManifold& m, const std::vector<double>& weights, NodeFn&& fn) {
    std::size_t count = m.node_count();
    std::vector<double> vals(count);
    parallel_for(count, [&](std::size_t b, std::size_t e) {
        cplx buf[8];
        for (std::size_t i = b; i < e; ++i) {
            m.node(i, buf);
            vals[i] = fn(i, buf) * weights[i];
        }
    });
    return pairwise_sum(vals);
}

inline FunctionalValue compute_I_eps(const IRManifold& m, const HolomorphicSymbol& p, double eps,
                                     const std::vector<double>* weights = nullptr) {
    if (!(eps > 0.0) || eps > 1.0) throw config_error("compute_I_eps: need eps in (0, 1]");
    if (p.n != m.n) throw config_error("compute_I_eps: dimension mismatch");
    if (p.decay_order + 2.0 * p.n >= 0.0)
        throw config_error("compute_I_eps: symbol must decay faster than <rho>^{-2n}");
    std::vector<double> wlocal;
    if (!weights) {
        wlocal = symplectic_volume(m);
        weights = &wlocal;
    }
    double eps2 = eps * eps;
    auto integrand = [&](std::size_t, const cplx* rho) {
        cplx v;
        p.eval_raw(rho, v, nullptr);
        return detail::f_eps(v, eps2);
    };
    FunctionalValue out;
    out.value = quadrature_sum(m, *weights, integrand);
    out.epsilon = eps;
    out.tail_bound = detail::tail_bound_for(p, m.R);
    out.grid_shape = m.shape;
    out.R = m.R;

    // refinement estimate from the even-index subgrid (weight graphs only;
    // flow grids would need refitted frames, the caller compares runs instead)
    std::vector<int> cs;
    if (m.rep == IRManifold::Rep::weight_graph && detail::coarse_shape(m.shape, cs)) {
        IRManifold coarse = IRManifold::weight_graph(m.n, m.R, cs, m.phi);
        auto cw = symplectic_volume(coarse);
        double icoarse = quadrature_sum(coarse, cw, integrand);
        out.quad_error = std::abs(out.value - icoarse) / 3.0;
    }
    return out;
}

// Geometric eps-ladder eps0 * 2^{-k}, k = 0..rungs-1.
inline std::vector<double> eps_ladder(double eps0 = 0.2, int rungs = 6) {
    std::vector<double> l(rungs);
    for (int k = 0; k < rungs; ++k) l[k] = eps0 * std::pow(2.0, -k);
    return l;
}

// Richardson table for values on a halving ladder with exponent steps
// q_base, 2 q_base, ...; returns the diagonal value and a residual estimate.
inline std::pair<double, double> richardson_tail(const std::vector<double>& values,
                                                 double q_base, int max_levels = 3) {
    int rungs = int(values.size());
    if (rungs < 2) throw numeric_error("richardson_tail: need >= 2 values");
    std::vector<double> T = values, Tprev = values;
    int levels = std::min(max_levels, rungs - 1);
    for (int j = 0; j < levels; ++j) {
        Tprev = T;
        double r = std::pow(2.0, q_base * (j + 1));
        for (int k = rungs - 1; k >= j + 1; --k) T[k] = T[k] + (T[k] - T[k - 1]) / (r - 1.0);
    }
    double residual =
        std::abs(T[rungs - 1] - T[rungs - 2]) + std::abs(T[rungs - 1] - Tprev[rungs - 1]);
    return {T[rungs - 1], residual};
}

// I(Lambda, p) by Richardson extrapolation of the eps-ladder. The geometric
// tail is summed with the empirically fitted rate, falling back to the
// declared 1/m0 when the differences are too small to fit.
inline FunctionalValue compute_I(const IRManifold& m, const HolomorphicSymbol& p,
                                 double eps0 = 0.2, int rungs = 6,
                                 const std::vector<double>* weights = nullptr) {
    if (rungs < 3) throw config_error("compute_I: need at least 3 rungs");
    std::vector<double> wlocal;
    if (!weights) {
        wlocal = symplectic_volume(m);
        weights = &wlocal;
    }
    auto ladder = eps_ladder(eps0, rungs);
    std::vector<double> I(rungs);
    FunctionalValue last;
    for (int k = 0; k < rungs; ++k) {
        last = compute_I_eps(m, p, ladder[k], weights);
        I[k] = last.value;
    }
    std::vector<double> d(rungs - 1);
    for (int k = 0; k + 1 < rungs; ++k) d[k] = I[k] - I[k + 1];

    FunctionalValue out = last;
    out.epsilon = 0.0;
    double scale = std::max(1.0, std::abs(I[rungs - 1]));
    bool negligible = true;
    for (double dk : d) negligible = negligible && std::abs(dk) < 1e-13 * scale;
    if (negligible) {
        out.value = I[rungs - 1];
        out.extrapolation_residual = 0.0;
        return out;
    }

    // monotonicity of the ladder differences (all same sign, decreasing)
    bool monotone = true;
    for (int k = 0; k + 1 < int(d.size()); ++k) {
        if (d[k] * d[k + 1] <= 0.0) monotone = false;
        if (std::abs(d[k + 1]) > std::abs(d[k]) * 1.02) monotone = false;
    }
    if (!monotone) {
        out.extrapolation_ok = false;
        throw numeric_error(
            "compute_I: eps-ladder not monotone; symbol may vanish to higher order than the "
            "declared m0, or the grid is too coarse for the smallest eps");
    }

    // empirical rate from the difference ratios, as a declared-order check
    std::vector<double> qs;
    for (int k = 0; k + 1 < int(d.size()); ++k) {
        double ratio = d[k] / d[k + 1];
        if (ratio > 1.01) qs.push_back(std::log2(ratio));
    }
    double q_base = p.max_vanishing_order >= 1 ? 1.0 / p.max_vanishing_order : 2.0;
    if (!qs.empty()) {
        double q_fit = std::accumulate(qs.begin(), qs.end(), 0.0) / double(qs.size());
        if (q_fit < 0.6 * q_base) {
            out.extrapolation_ok = false;
            throw numeric_error("compute_I: observed eps-rate " + std::to_string(q_fit) +
                                " is slower than the declared 1/m0 = " + std::to_string(q_base) +
                                "; symbol may vanish to higher order than declared");
        }
    }

    // Richardson table along the exponent ladder q_base, 2 q_base, ...
    // (values carry quadrature noise, so the table depth is capped)
    auto [value, residual] = richardson_tail(I, q_base);
    out.value = value;
    out.extrapolation_residual = residual;
    return out;
}

// mu({ |p| <= delta }) by indicator-weighted quadrature
inline double sublevel_volume(const IRManifold& m, const HolomorphicSymbol& p, double delta,
                              const std::vector<double>* weights = nullptr) {
    if (!(delta > 0.0) || delta > 1.0) throw config_error("sublevel_volume: need delta in (0,1]");
    std::vector<double> wlocal;
    if (!weights) {
        wlocal = symplectic_volume(m);
        weights = &wlocal;
    }
    return quadrature_sum(m, *weights, [&](std::size_t, const cplx* rho) {
        cplx v;
        p.eval_raw(rho, v, nullptr);
        return std::abs(v) <= delta ? 1.0 : 0.0;
    });
}

struct RateFit {
    double exponent = 0.0;
    double constant = 0.0;
    double I_limit = 0.0;
};

// Least-squares fit |I_eps - I| ~ C eps^q over the given ladder.
inline RateFit rate_fit(const IRManifold& m, const HolomorphicSymbol& p,
                        const std::vector<double>& ladder) {
    if (ladder.size() < 4) throw config_error("rate_fit: need >= 4 ladder points");
    for (std::size_t k = 0; k + 1 < ladder.size(); ++k)
        if (ladder[k + 1] >= ladder[k]) throw config_error("rate_fit: ladder must decrease");
    auto weights = symplectic_volume(m);
    FunctionalValue I = compute_I(m, p, ladder.front(), int(ladder.size()), &weights);
    std::vector<double> gaps;
    for (double eps : ladder)
        gaps.push_back(std::abs(compute_I_eps(m, p, eps, &weights).value - I.value));
    auto [q, C] = powerlaw_fit(std::span<const double>(ladder), std::span<const double>(gaps));
    return {q, C, I.value};
}

}  // namespace phaseflow

#endif
