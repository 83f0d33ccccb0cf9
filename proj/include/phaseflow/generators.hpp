#ifndef PHASEFLOW_GENERATORS_HPP
#define PHASEFLOW_GENERATORS_HPP

#include "phaseflow/symbols.hpp"

namespace phaseflow {

// One entire basis element for deformation generators: real-coefficient
// monomial times a Gaussian of a real-centered quadratic, so f is real on
// R^{2n} and extends holomorphically to all of C^{2n}.
struct BasisElement {
    std::string id;
    FormPtr form;
    int n = 1;
};

// Basis ids:
//   "x<j>", "xi<j>"                       coordinates, 1-based j
//   "bump:a,x0,xi0"                       exp(-a((x-x0)^2+(xi-xi0)^2)), n=1
//   "mono:k1,..,k2n"                      monomial with integer powers
//   "monobump:a,k1,..,k2n"                monomial * exp(-a |rho|^2)
inline BasisElement parse_basis_element(const std::string& id, int n) {
    using namespace forms;
    BasisElement b;
    b.id = id;
    b.n = n;
    int dim = 2 * n;
    auto nums = [](const std::string& s) {
        std::vector<double> out;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
        return out;
    };
    if (id.rfind("bump:", 0) == 0) {
        if (n != 1) throw config_error("basis 'bump' is n=1 only: " + id);
        auto v = nums(id.substr(5));
        if (v.size() != 3 || v[0] <= 0) throw config_error("bad bump basis: " + id);
        b.form = gauss(2, {v[0], v[0]}, {cplx(v[1]), cplx(v[2])});
        return b;
    }
    if (id.rfind("mono:", 0) == 0) {
        auto v = nums(id.substr(5));
        if (int(v.size()) != dim) throw config_error("bad mono basis arity: " + id);
        std::vector<int> k(dim);
        for (int j = 0; j < dim; ++j) k[j] = int(v[j]);
        b.form = monomial(dim, k);
        return b;
    }
    if (id.rfind("monobump:", 0) == 0) {
        auto v = nums(id.substr(9));
        if (int(v.size()) != dim + 1 || v[0] < 0) throw config_error("bad monobump basis: " + id);
        std::vector<int> k(dim);
        for (int j = 0; j < dim; ++j) k[j] = int(v[j + 1]);
        b.form = std::make_shared<forms::PolyGauss>(cplx(1.0), k,
                                                    std::vector<double>(dim, v[0]),
                                                    std::vector<cplx>(dim, cplx(0.0)));
        return b;
    }
    if (id.size() >= 2 && id[0] == 'x' && id[1] == 'i') {
        int j = std::stoi(id.substr(2));
        if (j < 1 || j > n) throw config_error("basis coordinate out of range: " + id);
        b.form = coordinate(n + j - 1);
        return b;
    }
    if (id[0] == 'x') {
        int j = std::stoi(id.substr(1));
        if (j < 1 || j > n) throw config_error("basis coordinate out of range: " + id);
        b.form = coordinate(j - 1);
        return b;
    }
    throw config_error("unknown basis element: " + id);
}

// f_t(rho) = sum_i coef_i * poly_i(t) * b_i(rho). Real on real points by
// construction; entire in rho, so the almost-holomorphic extension is exact.
struct GeneratorFunction {
    struct Term {
        double coef = 0.0;
        BasisElement basis;
        std::vector<double> tpoly = {1.0};  // c(t) = sum_k tpoly[k] t^k
    };
    int n = 1;
    std::vector<Term> terms;

    static GeneratorFunction from_basis(int n, const std::vector<std::string>& ids,
                                        const std::vector<double>& coefs) {
        if (ids.size() != coefs.size()) throw config_error("generator: ids/coefs size mismatch");
        GeneratorFunction f;
        f.n = n;
        for (std::size_t i = 0; i < ids.size(); ++i)
            f.terms.push_back({coefs[i], parse_basis_element(ids[i], n), {1.0}});
        return f;
    }

    static GeneratorFunction zero(int n) { return GeneratorFunction{n, {}}; }

    bool empty() const { return terms.empty(); }

    double tcoef(const Term& term, double t) const {
        double c = 0.0, tp = 1.0;
        for (double a : term.tpoly) {
            c += a * tp;
            tp *= t;
        }
        return c;
    }
    double tcoef_dt(const Term& term, double t) const {
        double c = 0.0, tp = 1.0;
        for (std::size_t k = 1; k < term.tpoly.size(); ++k) {
            c += term.tpoly[k] * k * tp;
            tp *= t;
        }
        return c;
    }

    // value, complex gradient and optional Hessian of f_t at rho
    void eval(const cplx* rho, double t, cplx& val, cplx* grad, cplx* hess = nullptr) const {
        int dim = 2 * n;
        val = 0.0;
        if (grad) std::fill(grad, grad + dim, cplx(0.0));
        if (hess) std::fill(hess, hess + dim * dim, cplx(0.0));
        cplx g[8], h[64];
        cplx v;
        for (const auto& term : terms) {
            double c = term.coef * tcoef(term, t);
            if (c == 0.0) continue;
            term.basis.form->eval(rho, dim, v, grad ? g : nullptr, hess ? h : nullptr);
            val += c * v;
            if (grad)
                for (int j = 0; j < dim; ++j) grad[j] += c * g[j];
            if (hess)
                for (int j = 0; j < dim * dim; ++j) hess[j] += c * h[j];
        }
    }

    // the generator frozen at time t (tpoly folded into the coefficients)
    GeneratorFunction at_time(double t) const {
        GeneratorFunction f;
        f.n = n;
        for (const auto& term : terms)
            f.terms.push_back({term.coef * tcoef(term, t), term.basis, {1.0}});
        return f;
    }

    // d/dt f_t as a generator (for the non-autonomous Hessian term)
    GeneratorFunction time_derivative(double t) const {
        GeneratorFunction f;
        f.n = n;
        for (const auto& term : terms)
            f.terms.push_back({term.coef * tcoef_dt(term, t), term.basis, {1.0}});
        return f;
    }

    GeneratorFunction scaled(double s) const {
        GeneratorFunction f = *this;
        for (auto& term : f.terms) term.coef *= s;
        return f;
    }
};

// Velocity of the lifted field 2 Re(i H_f) as a complex 2n-vector applied to
// the complex coordinates: xdot = i df/dxi, xidot = -i df/dx.
inline void deformation_velocity(const GeneratorFunction& f, const cplx* rho, double t,
                                 cplx* vel) {
    int dim = 2 * f.n;
    cplx val;
    cplx g[8];
    f.eval(rho, t, val, g);
    (void)dim;
    for (int j = 0; j < f.n; ++j) {
        vel[j] = cplx(0.0, 1.0) * g[f.n + j];
        vel[f.n + j] = cplx(0.0, -1.0) * g[j];
    }
}

// Velocity together with its complex Jacobian jac[i*2n+j] = d vel_i / d rho_j,
// used for variational transport of tangent frames along the flow.
inline void deformation_velocity_jac(const GeneratorFunction& f, const cplx* rho, double t,
                                     cplx* vel, cplx* jac) {
    int n = f.n, dim = 2 * n;
    cplx val;
    cplx g[8], h[64];
    f.eval(rho, t, val, g, h);
    for (int j = 0; j < n; ++j) {
        vel[j] = cplx(0.0, 1.0) * g[n + j];
        vel[n + j] = cplx(0.0, -1.0) * g[j];
        for (int k = 0; k < dim; ++k) {
            jac[j * dim + k] = cplx(0.0, 1.0) * h[(n + j) * dim + k];
            jac[(n + j) * dim + k] = cplx(0.0, -1.0) * h[j * dim + k];
        }
    }
}

// The same field as a real 4n-vector (Re x., Im x., Re xi., Im xi.).
inline std::vector<double> real_deformation_field(const GeneratorFunction& f,
                                                  const PhasePoint& rho, double t = 0.0) {
    int n = f.n;
    std::vector<cplx> vel(2 * n);
    deformation_velocity(f, rho.c.data(), t, vel.data());
    std::vector<double> out(4 * n);
    for (int j = 0; j < n; ++j) {
        out[2 * j] = vel[j].real();
        out[2 * j + 1] = vel[j].imag();
        out[2 * n + 2 * j] = vel[n + j].real();
        out[2 * n + 2 * j + 1] = vel[n + j].imag();
    }
    return out;
}

// max |Im f| over random real points; should be ~0 for a valid generator
inline double reality_residual(const GeneratorFunction& f, double box, int samples,
                               std::uint64_t seed = 7) {
    Rng rng(seed);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        PhasePoint rho(f.n);
        for (int j = 0; j < 2 * f.n; ++j) rho.c[j] = rng.uniform(-box, box);
        cplx v;
        f.eval(rho.c.data(), 0.0, v, nullptr);
        worst = std::max(worst, std::abs(v.imag()));
    }
    return worst;
}

}  // namespace phaseflow

#endif
