#ifndef PHASEFLOW_SYMBOLS_HPP
#define PHASEFLOW_SYMBOLS_HPP

#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "phaseflow/core.hpp"

namespace phaseflow {

// Closed-form holomorphic scalar field on C^{2n}. Every node evaluates the
// value and, when requested, the exact complex gradient (2n partials) and
// Hessian (row-major 2n x 2n). Differentiation rules are attached to each
// form; nothing is differenced.
class ClosedForm {
  public:
    virtual ~ClosedForm() = default;
    // rho has 2n entries; grad/hess may be nullptr. hess requires grad.
    virtual void eval(const cplx* rho, int dim, cplx& val, cplx* grad,
                      cplx* hess = nullptr) const = 0;
};

using FormPtr = std::shared_ptr<const ClosedForm>;

namespace forms {

class Constant final : public ClosedForm {
    cplx c_;

  public:
    explicit Constant(cplx c) : c_(c) {}
    void eval(const cplx*, int dim, cplx& val, cplx* grad, cplx* hess) const override {
        val = c_;
        if (grad) std::fill(grad, grad + dim, cplx(0.0));
        if (hess) std::fill(hess, hess + dim * dim, cplx(0.0));
    }
};

class Coordinate final : public ClosedForm {
    int idx_;

  public:
    explicit Coordinate(int idx) : idx_(idx) {}
    void eval(const cplx* rho, int dim, cplx& val, cplx* grad, cplx* hess) const override {
        val = rho[idx_];
        if (grad) {
            std::fill(grad, grad + dim, cplx(0.0));
            grad[idx_] = 1.0;
        }
        if (hess) std::fill(hess, hess + dim * dim, cplx(0.0));
    }
};

// amp * prod_j rho_j^{k_j} * exp(-sum_j alpha_j (rho_j - c_j)^2).
// The workhorse for the whole catalog: Gaussians of quadratics times
// monomials, with possibly complex centers (entire in rho).
class PolyGauss final : public ClosedForm {
  public:
    cplx amp;
    std::vector<int> pow;      // size 2n
    std::vector<double> alpha; // size 2n
    std::vector<cplx> center;  // size 2n

    PolyGauss(cplx a, std::vector<int> k, std::vector<double> al, std::vector<cplx> c)
        : amp(a), pow(std::move(k)), alpha(std::move(al)), center(std::move(c)) {}

    void eval(const cplx* rho, int dim, cplx& val, cplx* grad, cplx* hess) const override {
        cplx expo = 0.0;
        for (int j = 0; j < dim; ++j) {
            if (alpha[j] != 0.0) {
                cplx d = rho[j] - center[j];
                expo -= alpha[j] * d * d;
            }
        }
        cplx g = amp * std::exp(expo);
        // monomial with per-coordinate power reductions shared below
        auto mono = [&](int dec_a, int dec_b) {
            cplx m = 1.0;
            double coef = 1.0;
            for (int l = 0; l < dim; ++l) {
                int k = pow[l];
                if (l == dec_a) {
                    coef *= k;
                    if (k == 0) return cplx(0.0);
                    --k;
                }
                if (l == dec_b) {
                    coef *= k;
                    if (k == 0) return cplx(0.0);
                    --k;
                }
                for (int m2 = 0; m2 < k; ++m2) m *= rho[l];
            }
            return coef * m;
        };
        cplx mon = mono(-1, -1);
        val = g * mon;
        if (!grad) return;
        cplx E[8];  // d(exponent)/d rho_j
        for (int j = 0; j < dim; ++j)
            E[j] = (alpha[j] != 0.0) ? cplx(-2.0 * alpha[j]) * (rho[j] - center[j]) : cplx(0.0);
        cplx dmon[8];
        for (int j = 0; j < dim; ++j) {
            dmon[j] = mono(j, -1);
            grad[j] = g * dmon[j] + val * E[j];
        }
        if (!hess) return;
        for (int i = 0; i < dim; ++i)
            for (int j = i; j < dim; ++j) {
                cplx h = g * mono(i, j) + g * dmon[i] * E[j] + grad[j] * E[i] +
                         (i == j && alpha[i] != 0.0 ? val * cplx(-2.0 * alpha[i]) : cplx(0.0));
                hess[i * dim + j] = h;
                hess[j * dim + i] = h;
            }
    }
};

class Sum final : public ClosedForm {
    std::vector<FormPtr> terms_;

  public:
    explicit Sum(std::vector<FormPtr> t) : terms_(std::move(t)) {}
    void eval(const cplx* rho, int dim, cplx& val, cplx* grad, cplx* hess) const override {
        val = 0.0;
        if (grad) std::fill(grad, grad + dim, cplx(0.0));
        if (hess) std::fill(hess, hess + dim * dim, cplx(0.0));
        cplx g[8], h[64];
        cplx v;
        for (const auto& t : terms_) {
            t->eval(rho, dim, v, grad ? g : nullptr, hess ? h : nullptr);
            val += v;
            if (grad)
                for (int j = 0; j < dim; ++j) grad[j] += g[j];
            if (hess)
                for (int j = 0; j < dim * dim; ++j) hess[j] += h[j];
        }
    }
};

class Product final : public ClosedForm {
    FormPtr a_, b_;

  public:
    Product(FormPtr a, FormPtr b) : a_(std::move(a)), b_(std::move(b)) {}
    void eval(const cplx* rho, int dim, cplx& val, cplx* grad, cplx* hess) const override {
        cplx va, vb;
        if (!grad) {
            a_->eval(rho, dim, va, nullptr);
            b_->eval(rho, dim, vb, nullptr);
            val = va * vb;
            return;
        }
        cplx ga[8], gb[8], ha[64], hb[64];
        a_->eval(rho, dim, va, ga, hess ? ha : nullptr);
        b_->eval(rho, dim, vb, gb, hess ? hb : nullptr);
        val = va * vb;
        for (int j = 0; j < dim; ++j) grad[j] = ga[j] * vb + va * gb[j];
        if (hess)
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j)
                    hess[i * dim + j] = ha[i * dim + j] * vb + ga[i] * gb[j] + ga[j] * gb[i] +
                                        va * hb[i * dim + j];
    }
};

class PowInt final : public ClosedForm {
    FormPtr a_;
    int k_;

  public:
    PowInt(FormPtr a, int k) : a_(std::move(a)), k_(k) {}
    void eval(const cplx* rho, int dim, cplx& val, cplx* grad, cplx* hess) const override {
        cplx v;
        cplx g[8], h[64];
        a_->eval(rho, dim, v, grad ? g : nullptr, hess ? h : nullptr);
        cplx vk2 = 1.0;
        for (int m = 0; m < k_ - 2; ++m) vk2 *= v;
        cplx vk1 = (k_ >= 2) ? vk2 * v : cplx(1.0);
        val = vk1 * v;
        if (grad)
            for (int j = 0; j < dim; ++j) grad[j] = double(k_) * vk1 * g[j];
        if (hess)
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j)
                    hess[i * dim + j] = double(k_) * vk1 * h[i * dim + j] +
                                        double(k_) * double(k_ - 1) * vk2 * g[i] * g[j];
    }
};

// 1/a; only used where |a| is bounded away from zero on the tube.
class Reciprocal final : public ClosedForm {
    FormPtr a_;

  public:
    explicit Reciprocal(FormPtr a) : a_(std::move(a)) {}
    void eval(const cplx* rho, int dim, cplx& val, cplx* grad, cplx* hess) const override {
        cplx v;
        cplx g[8], h[64];
        a_->eval(rho, dim, v, grad ? g : nullptr, hess ? h : nullptr);
        val = 1.0 / v;
        if (grad)
            for (int j = 0; j < dim; ++j) grad[j] = -g[j] * val * val;
        if (hess) {
            cplx v2 = val * val, v3 = v2 * val;
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j)
                    hess[i * dim + j] = -h[i * dim + j] * v2 + 2.0 * g[i] * g[j] * v3;
        }
    }
};

inline FormPtr constant(cplx c) { return std::make_shared<Constant>(c); }
inline FormPtr coordinate(int idx) { return std::make_shared<Coordinate>(idx); }
inline FormPtr sum(std::vector<FormPtr> t) { return std::make_shared<Sum>(std::move(t)); }
inline FormPtr product(FormPtr a, FormPtr b) {
    return std::make_shared<Product>(std::move(a), std::move(b));
}
inline FormPtr pow_int(FormPtr a, int k) { return std::make_shared<PowInt>(std::move(a), k); }
inline FormPtr reciprocal(FormPtr a) { return std::make_shared<Reciprocal>(std::move(a)); }

// Gaussian exp(-sum alpha_j (rho_j - c_j)^2) with unit amplitude.
inline FormPtr gauss(int dim, std::vector<double> alpha, std::vector<cplx> center,
                     cplx amp = 1.0) {
    return std::make_shared<PolyGauss>(amp, std::vector<int>(dim, 0), std::move(alpha),
                                       std::move(center));
}

inline FormPtr monomial(int dim, std::vector<int> pow, cplx amp = 1.0) {
    return std::make_shared<PolyGauss>(amp, std::move(pow), std::vector<double>(dim, 0.0),
                                       std::vector<cplx>(dim, cplx(0.0)));
}

}  // namespace forms

// One Gaussian-product term of a - 1 = p - 1, used for closed-form Weyl
// kernels: amp * exp(-ax (x-cx)^2) * exp(-at (theta-ct)^2), n = 1.
struct GaussKernelTerm {
    cplx amp;
    double ax;
    cplx cx;
    double at;
    cplx ct;
};

struct HolomorphicSymbol {
    int n = 1;
    double tube_radius = 1.0;
    double decay_order = -6.0;      // m in p - 1 = O(<rho>^m)
    int max_vanishing_order = 1;    // m0
    FormPtr form;
    std::string id;
    std::optional<cplx> spectral_parameter;
    // present when p - 1 is a finite sum of Gaussian products (n = 1)
    std::vector<GaussKernelTerm> kernel_plan;

    int dim() const { return 2 * n; }

    void check_tube(const PhasePoint& rho) const {
        for (int j = 0; j < dim(); ++j) {
            double im = std::abs(rho.c[j].imag());
            if (im > tube_radius + 1e-12) throw tube_error(j, im, tube_radius);
        }
    }

    cplx eval(const PhasePoint& rho) const {
        check_tube(rho);
        cplx v;
        form->eval(rho.c.data(), dim(), v, nullptr);
        return v;
    }

    // value, exact gradient and optional Hessian, no tube check (hot path)
    void eval_raw(const cplx* rho, cplx& val, cplx* grad, cplx* hess = nullptr) const {
        form->eval(rho, dim(), val, grad, hess);
    }

    std::vector<cplx> gradient(const PhasePoint& rho) const {
        check_tube(rho);
        cplx v;
        std::vector<cplx> g(dim());
        form->eval(rho.c.data(), dim(), v, g.data());
        return g;
    }
};

// Complex Hamilton field H_p = (dp/dxi, -dp/dx), both n-vectors.
inline std::pair<std::vector<cplx>, std::vector<cplx>> hamilton_field(
    const HolomorphicSymbol& p, const PhasePoint& rho) {
    auto g = p.gradient(rho);
    std::vector<cplx> xdot(p.n), xidot(p.n);
    for (int j = 0; j < p.n; ++j) {
        xdot[j] = g[p.n + j];
        xidot[j] = -g[j];
    }
    return {xdot, xidot};
}

// sigma(H_f, H_g) = sum_j (df/dxi_j dg/dx_j - df/dx_j dg/dxi_j) from ambient
// gradients. Tangential (manifold) brackets live in manifolds.hpp.
inline cplx poisson_bracket(std::span<const cplx> grad_f, std::span<const cplx> grad_g, int n) {
    if (grad_f.size() != std::size_t(2 * n) || grad_g.size() != std::size_t(2 * n))
        throw numeric_error("poisson_bracket: gradient dimension mismatch");
    cplx s = 0.0;
    for (int j = 0; j < n; ++j) s += grad_f[n + j] * grad_g[j] - grad_f[j] * grad_g[n + j];
    return s;
}

inline cplx poisson_bracket(const HolomorphicSymbol& f, const HolomorphicSymbol& g,
                            const PhasePoint& rho) {
    if (f.n != g.n) throw numeric_error("poisson_bracket: dimension mismatch");
    return poisson_bracket(f.gradient(rho), g.gradient(rho), f.n);
}

namespace detail {

inline double get_param(const std::map<std::string, double>& params, const std::string& key,
                        double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

inline HolomorphicSymbol make_gauss_ring(const std::string& id, double amp_term, double b) {
    // p = 1 + amp_term * exp(-(x^2 + (xi - ib)^2)), n = 1
    HolomorphicSymbol s;
    s.n = 1;
    s.id = id;
    s.tube_radius = 2.0;
    s.decay_order = -8.0;
    std::vector<cplx> center = {cplx(0.0), cplx(0.0, b)};
    s.form = forms::sum({forms::constant(1.0),
                         forms::gauss(2, {1.0, 1.0}, center, cplx(amp_term))});
    s.kernel_plan.push_back({cplx(amp_term), 1.0, cplx(0.0), 1.0, cplx(0.0, b)});
    return s;
}

}  // namespace detail

// Catalog of test symbols. Unknown names and invalid parameters throw.
inline HolomorphicSymbol builtin_symbol(const std::string& name,
                                        const std::map<std::string, double>& params = {}) {
    using namespace forms;
    if (name == "constant_one") {
        HolomorphicSymbol s;
        s.n = int(detail::get_param(params, "n", 1));
        s.id = name;
        s.tube_radius = 1e6;
        s.decay_order = -1e9;
        s.max_vanishing_order = 1;
        s.form = constant(1.0);
        s.kernel_plan.push_back({cplx(0.0), 1.0, cplx(0.0), 1.0, cplx(0.0)});
        return s;
    }
    if (name == "elliptic_gauss") {
        double c = detail::get_param(params, "c", 0.5);
        if (c <= -1.0) throw config_error("elliptic_gauss: need c > -1 (got " + std::to_string(c) + ")");
        auto s = detail::make_gauss_ring(name, c, 0.0);
        s.max_vanishing_order = 1;  // no zeros on the reals; 1 is the declared bound off axis
        if (c > -1.0 && c < 1.0) s.max_vanishing_order = 0;
        return s;
    }
    if (name == "ring_zero") {
        auto s = detail::make_gauss_ring(name, -2.0, 0.0);
        s.max_vanishing_order = 1;  // transverse circle r^2 = ln 2
        return s;
    }
    if (name == "shifted_ring") {
        double b = detail::get_param(params, "b", 0.3);
        if (std::abs(b) >= 1.0) throw config_error("shifted_ring: need |b| < 1");
        auto s = detail::make_gauss_ring(name, -2.0, b);
        s.id = name;
        s.max_vanishing_order = 1;
        return s;
    }
    if (name == "ring_zero_pow2") {
        // (1 - 2G)^2 = 1 - 4G + 4G^2: vanishing order 2 on the circle
        HolomorphicSymbol s;
        s.n = 1;
        s.id = name;
        s.tube_radius = 2.0;
        s.decay_order = -8.0;
        s.max_vanishing_order = 2;
        std::vector<cplx> c0 = {cplx(0.0), cplx(0.0)};
        s.form = sum({constant(1.0), gauss(2, {1.0, 1.0}, c0, cplx(-4.0)),
                      gauss(2, {2.0, 2.0}, c0, cplx(4.0))});
        s.kernel_plan.push_back({cplx(-4.0), 1.0, cplx(0.0), 1.0, cplx(0.0)});
        s.kernel_plan.push_back({cplx(4.0), 2.0, cplx(0.0), 2.0, cplx(0.0)});
        return s;
    }
    if (name == "torus_codim2") {
        // (x1^2 + xi1^2 - 1) + i (x2^2 + xi2^2 - 1), n = 2
        HolomorphicSymbol s;
        s.n = 2;
        s.id = name;
        s.tube_radius = 2.0;
        s.decay_order = 4.0;  // grows; not usable with the decaying-symbol functionals
        s.max_vanishing_order = 1;
        auto sq = [](int idx) { return monomial(4, [&] {
                std::vector<int> k(4, 0);
                k[idx] = 2;
                return k;
            }()); };
        s.form = sum({sq(0), sq(2), constant(-1.0),
                      product(constant(cplx(0.0, 1.0)), sum({sq(1), sq(3), constant(-1.0)}))});
        return s;
    }
    if (name == "graph_codim2") {
        // xi1 + i (xi2 + x1^2 + x2^2 - 1), n = 2
        HolomorphicSymbol s;
        s.n = 2;
        s.id = name;
        s.tube_radius = 2.0;
        s.decay_order = 2.0;
        s.max_vanishing_order = 1;
        auto sq = [](int idx) { return monomial(4, [&] {
                std::vector<int> k(4, 0);
                k[idx] = 2;
                return k;
            }()); };
        s.form = sum({coordinate(2),
                      product(constant(cplx(0.0, 1.0)),
                              sum({coordinate(3), sq(0), sq(1), constant(-1.0)}))});
        return s;
    }
    if (name == "monomial4") {
        // test perturbation x1^k1 x2^k2 xi1^k3 xi2^k4, n = 2
        HolomorphicSymbol s;
        s.n = 2;
        s.id = name;
        s.tube_radius = 2.0;
        s.decay_order = 4.0;
        s.max_vanishing_order = 1;
        std::vector<int> k = {int(detail::get_param(params, "k1", 1)),
                              int(detail::get_param(params, "k2", 1)),
                              int(detail::get_param(params, "k3", 0)),
                              int(detail::get_param(params, "k4", 0))};
        s.form = monomial(4, k, cplx(detail::get_param(params, "amp", 1.0)));
        return s;
    }
    if (name == "oscillator_quadratic") {
        // f(i1, i2) = mu1 i1 - i mu2 i2 + gamma (i1^2 + i2^2) + delta x1^3,
        // i_j = (x_j^2 + xi_j^2)/2; local model near rho = 0, n = 2
        double mu1 = detail::get_param(params, "mu1", 1.0);
        double mu2 = detail::get_param(params, "mu2", 1.0);
        double gamma = detail::get_param(params, "gamma", 0.0);
        double delta = detail::get_param(params, "delta", 0.0);
        if (mu1 <= 0 || mu2 <= 0) throw config_error("oscillator_quadratic: need mu1, mu2 > 0");
        HolomorphicSymbol s;
        s.n = 2;
        s.id = name;
        s.tube_radius = 2.0;
        s.decay_order = 4.0;
        s.max_vanishing_order = 2;
        auto sq = [](int idx) { return monomial(4, [&] {
                std::vector<int> k(4, 0);
                k[idx] = 2;
                return k;
            }()); };
        FormPtr i1 = product(constant(0.5), sum({sq(0), sq(2)}));
        FormPtr i2 = product(constant(0.5), sum({sq(1), sq(3)}));
        std::vector<FormPtr> terms = {product(constant(mu1), i1),
                                      product(constant(cplx(0.0, -mu2)), i2)};
        if (gamma != 0.0)
            terms.push_back(product(constant(gamma), sum({pow_int(i1, 2), pow_int(i2, 2)})));
        if (delta != 0.0) terms.push_back(monomial(4, {3, 0, 0, 0}, cplx(delta)));
        s.form = sum(std::move(terms));
        return s;
    }
    throw config_error("unknown symbol name: " + name);
}

// (p - z) / (ptilde - z). With ptilde = 1 the kernel plan survives: the
// perturbation is (p - 1)/(1 - z), still a sum of Gaussian products.
inline HolomorphicSymbol relative_symbol(const HolomorphicSymbol& p,
                                         const HolomorphicSymbol& ptilde, cplx z) {
    if (p.n != ptilde.n) throw config_error("relative_symbol: dimension mismatch");
    HolomorphicSymbol s;
    s.n = p.n;
    s.id = "relative(" + p.id + "," + ptilde.id + ")";
    s.tube_radius = std::min(p.tube_radius, ptilde.tube_radius);
    s.decay_order = std::max(p.decay_order, ptilde.decay_order);
    s.max_vanishing_order = p.max_vanishing_order;
    s.spectral_parameter = z;
    using namespace forms;
    s.form = product(sum({p.form, constant(-z)}),
                     reciprocal(sum({ptilde.form, constant(-z)})));
    bool ptilde_is_one = (ptilde.id == "constant_one");
    if (ptilde_is_one && !p.kernel_plan.empty()) {
        for (auto t : p.kernel_plan) {
            t.amp /= (cplx(1.0) - z);
            s.kernel_plan.push_back(t);
        }
    }
    return s;
}

// Samples |p - 1| <rho>^{-m} along rays out to radius 3R and returns the
// largest value, an empirical constant for the declared decay order.
inline double verify_decay(const HolomorphicSymbol& p, double R, int rays = 8,
                           int samples_per_ray = 24) {
    double cmax = 0.0;
    int dim = p.dim();
    for (int r = 0; r < rays; ++r) {
        std::vector<double> dir(dim);
        double norm = 0.0;
        for (int j = 0; j < dim; ++j) {
            dir[j] = std::cos(2.0 * pi * (r + 0.37 * j + 1) / rays + 0.61 * j);
            norm += dir[j] * dir[j];
        }
        norm = std::sqrt(norm);
        for (int k = 1; k <= samples_per_ray; ++k) {
            double t = R + (3.0 * R - R) * k / samples_per_ray;
            PhasePoint rho(p.n);
            for (int j = 0; j < dim; ++j) rho.c[j] = t * dir[j] / norm;
            cplx v;
            p.eval_raw(rho.c.data(), v, nullptr);
            double bracket = std::sqrt(1.0 + t * t);
            cmax = std::max(cmax, std::abs(v - 1.0) * std::pow(bracket, -p.decay_order));
        }
    }
    return cmax;
}

}  // namespace phaseflow

#endif
