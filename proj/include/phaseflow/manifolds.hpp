#ifndef PHASEFLOW_MANIFOLDS_HPP
#define PHASEFLOW_MANIFOLDS_HPP

#include <Eigen/Dense>
#include <atomic>
#include <fstream>
#include <mutex>

#include "phaseflow/generators.hpp"

namespace phaseflow {

// Closed-form real weight phi(x) on R^n_x defining the graph manifold
// Lambda_phi = {(x, xi + i phi'(x))}. Gradient and Hessian are exact.
class SmoothWeight {
  public:
    virtual ~SmoothWeight() = default;
    virtual int n() const = 0;
    virtual double eval(const double* x) const = 0;
    virtual void grad(const double* x, double* g) const = 0;
    virtual void hess(const double* x, double* h) const = 0;  // row-major n*n
    virtual std::string id() const = 0;
};

using WeightPtr = std::shared_ptr<const SmoothWeight>;

namespace weights {

class Zero final : public SmoothWeight {
    int n_;

  public:
    explicit Zero(int n) : n_(n) {}
    int n() const override { return n_; }
    double eval(const double*) const override { return 0.0; }
    void grad(const double*, double* g) const override { std::fill(g, g + n_, 0.0); }
    void hess(const double*, double* h) const override { std::fill(h, h + n_ * n_, 0.0); }
    std::string id() const override { return "zero"; }
};

// phi = s * |x|^2 / 2
class Quadratic final : public SmoothWeight {
    int n_;
    double s_;

  public:
    Quadratic(int n, double s) : n_(n), s_(s) {}
    int n() const override { return n_; }
    double eval(const double* x) const override {
        double r2 = 0;
        for (int j = 0; j < n_; ++j) r2 += x[j] * x[j];
        return 0.5 * s_ * r2;
    }
    void grad(const double* x, double* g) const override {
        for (int j = 0; j < n_; ++j) g[j] = s_ * x[j];
    }
    void hess(const double*, double* h) const override {
        std::fill(h, h + n_ * n_, 0.0);
        for (int j = 0; j < n_; ++j) h[j * n_ + j] = s_;
    }
    std::string id() const override { return "quad:" + std::to_string(s_); }
};

// phi = s * exp(-a (x - c)^2), n = 1
class GaussBump final : public SmoothWeight {
    double s_, a_, c_;

  public:
    GaussBump(double s, double a, double c) : s_(s), a_(a), c_(c) {}
    int n() const override { return 1; }
    double eval(const double* x) const override {
        double d = x[0] - c_;
        return s_ * std::exp(-a_ * d * d);
    }
    void grad(const double* x, double* g) const override {
        double d = x[0] - c_;
        g[0] = -2.0 * a_ * d * s_ * std::exp(-a_ * d * d);
    }
    void hess(const double* x, double* h) const override {
        double d = x[0] - c_;
        h[0] = s_ * std::exp(-a_ * d * d) * (4.0 * a_ * a_ * d * d - 2.0 * a_);
    }
    std::string id() const override {
        return "gaussbump:" + std::to_string(s_) + "," + std::to_string(a_) + "," +
               std::to_string(c_);
    }
};

inline WeightPtr parse(const std::string& id, int n) {
    if (id == "zero" || id.empty()) return std::make_shared<Zero>(n);
    auto nums = [](const std::string& s) {
        std::vector<double> out;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
        return out;
    };
    if (id.rfind("quad:", 0) == 0) {
        auto v = nums(id.substr(5));
        if (v.size() != 1) throw config_error("bad weight: " + id);
        return std::make_shared<Quadratic>(n, v[0]);
    }
    if (id.rfind("gaussbump:", 0) == 0) {
        if (n != 1) throw config_error("gaussbump weight is n=1 only");
        auto v = nums(id.substr(10));
        if (v.size() != 3 || v[1] <= 0) throw config_error("bad weight: " + id);
        return std::make_shared<GaussBump>(v[0], v[1], v[2]);
    }
    throw config_error("unknown weight: " + id);
}

}  // namespace weights

struct GeneratorStep {
    GeneratorFunction f;
    double t_final = 0.0;
    double dt = 0.0;
};

// An IR-manifold over a truncated box [-R,R]^{2n}: either a weight graph
// Lambda_phi (exact frames, Lebesgue volume) or a flow grid of node images
// in C^{2n} with finite-difference frames.
struct IRManifold {
    enum class Rep { weight_graph, flow_grid };

    int n = 1;
    double R = 5.0;
    std::vector<int> shape;  // nodes per axis, 2n axes (x axes then xi axes)
    Rep rep = Rep::weight_graph;
    WeightPtr phi;               // weight_graph only
    std::vector<cplx> nodes;     // flow_grid: node-major, 2n entries per node
    std::vector<cplx> frames;    // flow_grid: node-major, 2n frames x 2n comps
    std::vector<GeneratorStep> history;

    static IRManifold weight_graph(int n, double R, std::vector<int> shape, WeightPtr phi) {
        IRManifold m;
        m.n = n;
        m.R = R;
        m.shape = std::move(shape);
        m.rep = Rep::weight_graph;
        m.phi = std::move(phi);
        m.validate_shape();
        return m;
    }

    static IRManifold real_phase_space(int n, double R, std::vector<int> shape) {
        return weight_graph(n, R, std::move(shape), std::make_shared<weights::Zero>(n));
    }

    void validate_shape() const {
        if (int(shape.size()) != 2 * n) throw config_error("manifold shape must have 2n axes");
        for (int s : shape)
            if (s < 2) throw config_error("manifold grid needs at least 2 nodes per axis");
    }

    int dim() const { return 2 * n; }

    std::size_t node_count() const {
        std::size_t c = 1;
        for (int s : shape) c *= std::size_t(s);
        return c;
    }

    double axis_step(int a) const { return 2.0 * R / (shape[a] - 1); }

    void decode(std::size_t idx, int* multi) const {
        for (int a = dim() - 1; a >= 0; --a) {
            multi[a] = int(idx % std::size_t(shape[a]));
            idx /= std::size_t(shape[a]);
        }
    }

    std::size_t encode(const int* multi) const {
        std::size_t idx = 0;
        for (int a = 0; a < dim(); ++a) idx = idx * std::size_t(shape[a]) + std::size_t(multi[a]);
        return idx;
    }

    // base-grid parameter along axis a
    double axis_coord(int a, int i) const { return -R + axis_step(a) * i; }

    // Lebesgue trapezoid weight of the base cell
    double base_weight(std::size_t idx) const {
        int multi[8];
        decode(idx, multi);
        double w = 1.0;
        for (int a = 0; a < dim(); ++a) {
            double wa = axis_step(a);
            if (multi[a] == 0 || multi[a] == shape[a] - 1) wa *= 0.5;
            w *= wa;
        }
        return w;
    }

    // Materializes node idx into out (2n complex coords).
    void node(std::size_t idx, cplx* out) const {
        if (rep == Rep::flow_grid) {
            const cplx* src = nodes.data() + idx * std::size_t(dim());
            std::copy(src, src + dim(), out);
            return;
        }
        int multi[8];
        decode(idx, multi);
        double x[4], g[4];
        for (int j = 0; j < n; ++j) x[j] = axis_coord(j, multi[j]);
        phi->grad(x, g);
        for (int j = 0; j < n; ++j) {
            out[j] = x[j];
            out[n + j] = cplx(axis_coord(n + j, multi[n + j]), g[j]);
        }
    }

    PhasePoint node_point(std::size_t idx) const {
        PhasePoint p(n);
        node(idx, p.c.data());
        return p;
    }

    double max_im() const {
        double worst = 0.0;
        std::size_t count = node_count();
        cplx buf[8];
        for (std::size_t i = 0; i < count; ++i) {
            const_cast<IRManifold*>(this)->node(i, buf);
            for (int j = 0; j < dim(); ++j) worst = std::max(worst, std::abs(buf[j].imag()));
        }
        return worst;
    }
};

// sigma(u, v) = sum_j u_xi_j v_x_j - u_x_j v_xi_j for complex 2n-vectors.
inline cplx sigma_form(const cplx* u, const cplx* v, int n) {
    cplx s = 0.0;
    for (int j = 0; j < n; ++j) s += u[n + j] * v[j] - u[j] * v[n + j];
    return s;
}

// Pfaffian of a real antisymmetric matrix (row-major, dim x dim, dim even).
inline double pfaffian(const double* a, int dim) {
    if (dim == 2) return a[1];
    if (dim == 4)
        return a[0 * 4 + 1] * a[2 * 4 + 3] - a[0 * 4 + 2] * a[1 * 4 + 3] +
               a[0 * 4 + 3] * a[1 * 4 + 2];
    throw numeric_error("pfaffian: only 2n <= 4 supported");
}

// Tangent frame, symplectic form data and tangential calculus at one node.
struct TangentFrame {
    int dim = 2;                 // 2n
    cplx T[4 * 4];               // frame vectors, T[a*dim + j]
    double omega[16];            // Re sigma(T_a, T_b)
    double omega_inv[16];
    double max_im_sigma = 0.0;
    double gram_det = 0.0;       // det of omega
    double pf = 0.0;             // Pfaffian of omega

    void compute_forms(int n) {
        dim = 2 * n;
        max_im_sigma = 0.0;
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                cplx s = sigma_form(T + a * dim, T + b * dim, n);
                omega[a * dim + b] = s.real();
                max_im_sigma = std::max(max_im_sigma, std::abs(s.imag()));
            }
        pf = pfaffian(omega, dim);
        if (dim == 2) {
            double w = omega[1];
            gram_det = w * w;
            if (std::abs(w) < 1e-14) throw numeric_error("degenerate tangent frame");
            omega_inv[0] = 0.0;
            omega_inv[1] = -1.0 / w;
            omega_inv[2] = 1.0 / w;
            omega_inv[3] = 0.0;
        } else {
            Eigen::Matrix4d M;
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) M(a, b) = omega[a * 4 + b];
            gram_det = M.determinant();
            if (std::abs(gram_det) < 1e-14) throw numeric_error("degenerate tangent frame");
            Eigen::Matrix4d Minv = M.inverse();
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) omega_inv[a * 4 + b] = Minv(a, b);
        }
    }

    // tangential differential of a holomorphic function from its ambient gradient
    void tangential(const cplx* amb_grad, cplx* out) const {
        int n = dim / 2;
        for (int a = 0; a < dim; ++a) {
            cplx s = 0.0;
            const cplx* Ta = T + a * dim;
            for (int j = 0; j < dim; ++j) s += amb_grad[j] * Ta[j];
            (void)n;
            out[a] = s;
        }
    }

    // {a, b} = H_a(b) = g_b^T Omega^{-1} g_a for tangential differentials
    cplx bracket(const cplx* g_a, const cplx* g_b) const {
        cplx s = 0.0;
        for (int i = 0; i < dim; ++i) {
            cplx row = 0.0;
            for (int j = 0; j < dim; ++j) row += omega_inv[i * dim + j] * g_a[j];
            s += g_b[i] * row;
        }
        return s;
    }

    // frame coordinates of the Hamilton field of a function with tangential
    // differential g: c = Omega^{-1} g
    void hamilton_coords(const cplx* g, cplx* c) const {
        for (int i = 0; i < dim; ++i) {
            cplx s = 0.0;
            for (int j = 0; j < dim; ++j) s += omega_inv[i * dim + j] * g[j];
            c[i] = s;
        }
    }

    // Euclidean Gram matrix of the frame (for dual norms of differentials)
    void gram(double* G) const {
        for (int a = 0; a < dim; ++a)
            for (int b = 0; b < dim; ++b) {
                double s = 0.0;
                for (int j = 0; j < dim; ++j)
                    s += T[a * dim + j].real() * T[b * dim + j].real() +
                         T[a * dim + j].imag() * T[b * dim + j].imag();
                G[a * dim + b] = s;
            }
    }
};

// Frame of manifold tangent vectors at node idx. Weight graphs use the exact
// phi'' formula; flow grids carry variationally transported frames, with a
// neighbor-differencing fallback for grids loaded without frame data.
inline void tangent_frame(const IRManifold& m, std::size_t idx, TangentFrame& fr) {
    int dim = m.dim();
    fr.dim = dim;
    if (m.rep == IRManifold::Rep::flow_grid && !m.frames.empty()) {
        const cplx* src = m.frames.data() + idx * std::size_t(dim) * std::size_t(dim);
        std::copy(src, src + dim * dim, fr.T);
        fr.compute_forms(m.n);
        return;
    }
    if (m.rep == IRManifold::Rep::weight_graph) {
        int multi[8];
        m.decode(idx, multi);
        double x[4], h[16];
        for (int j = 0; j < m.n; ++j) x[j] = m.axis_coord(j, multi[j]);
        m.phi->hess(x, h);
        for (int a = 0; a < dim; ++a) {
            cplx* Ta = fr.T + a * dim;
            std::fill(Ta, Ta + dim, cplx(0.0));
            if (a < m.n) {
                Ta[a] = 1.0;
                for (int j = 0; j < m.n; ++j) Ta[m.n + j] = cplx(0.0, h[j * m.n + a]);
            } else {
                Ta[a] = 1.0;
            }
        }
    } else {
        int multi[8];
        m.decode(idx, multi);
        cplx plus[8], minus[8];
        for (int a = 0; a < dim; ++a) {
            int ip = multi[a], im = multi[a];
            double denom;
            if (multi[a] == 0) {
                ip = 1;
                denom = m.axis_step(a);
            } else if (multi[a] == m.shape[a] - 1) {
                im = multi[a] - 1;
                denom = m.axis_step(a);
            } else {
                ip = multi[a] + 1;
                im = multi[a] - 1;
                denom = 2.0 * m.axis_step(a);
            }
            int mp[8], mm[8];
            std::copy(multi, multi + dim, mp);
            std::copy(multi, multi + dim, mm);
            mp[a] = ip;
            mm[a] = im;
            m.node(m.encode(mp), plus);
            m.node(m.encode(mm), minus);
            cplx* Ta = fr.T + a * dim;
            for (int j = 0; j < dim; ++j) Ta[j] = (plus[j] - minus[j]) / denom;
        }
    }
    fr.compute_forms(m.n);
}

struct IRReport {
    double max_im_sigma = 0.0;
    double min_gram_det = 0.0;
    double max_tube_excursion = 0.0;
    bool pass = false;
};

// I-Lagrangian / R-symplectic diagnostics over all nodes.
inline IRReport check_ir(const IRManifold& m, double tol_geom = 1e-6, double c_nd = 0.5) {
    if (m.rep == IRManifold::Rep::flow_grid)
        for (int s : m.shape)
            if (s < 3) throw config_error("check_ir: flow grid too coarse (need >= 3 nodes/axis)");
    std::size_t count = m.node_count();
    int nt = thread_count();
    std::vector<double> worst_im(nt, 0.0), worst_det(nt, 1e300), worst_ex(nt, 0.0);
    std::atomic<int> slot{0};
    parallel_for(count, [&](std::size_t b, std::size_t e) {
        int s = slot.fetch_add(1);
        TangentFrame fr;
        cplx buf[8];
        for (std::size_t i = b; i < e; ++i) {
            tangent_frame(m, i, fr);
            worst_im[s] = std::max(worst_im[s], fr.max_im_sigma);
            worst_det[s] = std::min(worst_det[s], std::abs(fr.gram_det));
            m.node(i, buf);
            for (int j = 0; j < m.dim(); ++j)
                worst_ex[s] = std::max(worst_ex[s], std::abs(buf[j].imag()));
        }
    });
    IRReport rep;
    rep.max_im_sigma = *std::max_element(worst_im.begin(), worst_im.end());
    rep.min_gram_det = *std::min_element(worst_det.begin(), worst_det.end());
    rep.max_tube_excursion = *std::max_element(worst_ex.begin(), worst_ex.end());
    rep.pass = rep.max_im_sigma <= tol_geom && rep.min_gram_det >= c_nd;
    return rep;
}

// Quadrature weights for the symplectic volume |sigma^n|/n! pulled back to
// the base grid. Weight graphs keep the Lebesgue weights exactly; flow grids
// pick up the Pfaffian of Re sigma on the frame.
inline std::vector<double> symplectic_volume(const IRManifold& m) {
    std::size_t count = m.node_count();
    std::vector<double> w(count);
    if (m.rep == IRManifold::Rep::weight_graph) {
        parallel_for(count, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) w[i] = m.base_weight(i);
        });
        return w;
    }
    parallel_for(count, [&](std::size_t b, std::size_t e) {
        TangentFrame fr;
        for (std::size_t i = b; i < e; ++i) {
            tangent_frame(m, i, fr);
            w[i] = std::abs(fr.pf) * m.base_weight(i);
            if (!(w[i] > 0.0)) throw numeric_error("symplectic_volume: degenerate frame");
        }
    });
    return w;
}

// Samples a weight graph as explicit complex nodes with Lebesgue weights.
inline IRManifold to_flow_grid(const IRManifold& m, double tube_radius = 1e300) {
    if (m.rep == IRManifold::Rep::flow_grid) return m;
    IRManifold out;
    out.n = m.n;
    out.R = m.R;
    out.shape = m.shape;
    out.rep = IRManifold::Rep::flow_grid;
    out.history = m.history;
    std::size_t count = m.node_count();
    int dim = m.dim();
    out.nodes.resize(count * std::size_t(dim));
    out.frames.resize(count * std::size_t(dim) * std::size_t(dim));
    double worst = 0.0;
    TangentFrame fr;
    for (std::size_t i = 0; i < count; ++i) {
        m.node(i, out.nodes.data() + i * std::size_t(dim));
        tangent_frame(m, i, fr);  // exact for weight graphs
        std::copy(fr.T, fr.T + dim * dim, out.frames.data() + i * std::size_t(dim) * dim);
        for (int j = 0; j < dim; ++j)
            worst = std::max(worst, std::abs(out.nodes[i * std::size_t(dim) + j].imag()));
    }
    if (worst > tube_radius)
        throw config_error("to_flow_grid: graph leaves the tube (max |Im| = " +
                           std::to_string(worst) + ")");
    return out;
}

namespace detail {

// One RK4 step of the deformation field on a single node together with its
// tangent frame (variational equation T' = Dv(rho) T).
inline void rk4_step_var(const GeneratorFunction& f, cplx* y, cplx* T, double t, double dt,
                         int dim) {
    const int nf = dim * dim;
    cplx ky[4][8], kT[4][64];
    cplx ytmp[8], Ttmp[64], jac[64];
    const double stage_t[4] = {0.0, 0.5, 0.5, 1.0};
    const double stage_c[4] = {0.0, 0.5, 0.5, 1.0};
    for (int s = 0; s < 4; ++s) {
        const cplx* ys = y;
        const cplx* Ts = T;
        if (s > 0) {
            for (int j = 0; j < dim; ++j) ytmp[j] = y[j] + stage_c[s] * dt * ky[s - 1][j];
            for (int j = 0; j < nf; ++j) Ttmp[j] = T[j] + stage_c[s] * dt * kT[s - 1][j];
            ys = ytmp;
            Ts = Ttmp;
        }
        deformation_velocity_jac(f, ys, t + stage_t[s] * dt, ky[s], jac);
        // frame a evolves by jac * T_a
        for (int a = 0; a < dim; ++a)
            for (int i = 0; i < dim; ++i) {
                cplx acc = 0.0;
                for (int j = 0; j < dim; ++j) acc += jac[i * dim + j] * Ts[a * dim + j];
                kT[s][a * dim + i] = acc;
            }
    }
    for (int j = 0; j < dim; ++j)
        y[j] += (dt / 6.0) * (ky[0][j] + 2.0 * ky[1][j] + 2.0 * ky[2][j] + ky[3][j]);
    for (int j = 0; j < nf; ++j)
        T[j] += (dt / 6.0) * (kT[0][j] + 2.0 * kT[1][j] + 2.0 * kT[2][j] + kT[3][j]);
}

}  // namespace detail

// Integrates every node under 2 Re(i H_{f_t}) with fixed-step classical RK4.
// dt must divide |t_final|; negative t_final integrates backwards.
inline IRManifold flow(const IRManifold& manifold, const GeneratorFunction& f, double t_final,
                       double dt, double tube_radius = 1e300) {
    if (f.n != manifold.n) throw config_error("flow: generator dimension mismatch");
    if (dt <= 0) throw config_error("flow: dt must be positive");
    IRManifold m = to_flow_grid(manifold, tube_radius);
    if (t_final == 0.0 || f.empty()) {
        m.history.push_back({f, t_final, dt});
        return m;
    }
    double steps_real = std::abs(t_final) / dt;
    long steps = std::lround(steps_real);
    if (steps < 1 || std::abs(steps_real - double(steps)) > 1e-9 * std::max(1.0, steps_real))
        throw config_error("flow: dt does not divide t_final");
    double sdt = t_final > 0 ? dt : -dt;
    int dim = m.dim();
    std::size_t count = m.node_count();

    struct NodeFailure {
        std::size_t node;
        double time;
        int kind;  // 0 = tube exit, 1 = nan
    };
    std::vector<NodeFailure> failures;
    std::mutex fail_mutex;

    parallel_for(count, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            cplx* y = m.nodes.data() + i * std::size_t(dim);
            cplx* T = m.frames.data() + i * std::size_t(dim) * std::size_t(dim);
            double t = 0.0;
            for (long s = 0; s < steps; ++s) {
                detail::rk4_step_var(f, y, T, t, sdt, dim);
                t += sdt;
                for (int j = 0; j < dim; ++j) {
                    if (std::isnan(y[j].real()) || std::isnan(y[j].imag())) {
                        std::lock_guard<std::mutex> lk(fail_mutex);
                        failures.push_back({i, t, 1});
                        return;
                    }
                    if (std::abs(y[j].imag()) > tube_radius) {
                        std::lock_guard<std::mutex> lk(fail_mutex);
                        failures.push_back({i, t, 0});
                        return;
                    }
                }
            }
        }
    });
    if (!failures.empty()) {
        auto worst = *std::min_element(failures.begin(), failures.end(),
                                       [](const NodeFailure& a, const NodeFailure& b) {
                                           return a.node < b.node;
                                       });
        if (worst.kind == 1)
            throw numeric_error("flow: NaN in deformation field at node " +
                                std::to_string(worst.node));
        throw flow_error(worst.node, worst.time, "node left the tube");
    }
    m.history.push_back({f, t_final, dt});
    return m;
}

// Step-halving error estimate: max node distance between dt and dt/2 runs.
inline double flow_self_check(const IRManifold& manifold, const GeneratorFunction& f,
                              double t_final, double dt, double tube_radius = 1e300) {
    IRManifold a = flow(manifold, f, t_final, dt, tube_radius);
    IRManifold b = flow(manifold, f, t_final, dt / 2.0, tube_radius);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.nodes.size(); ++i)
        worst = std::max(worst, std::abs(a.nodes[i] - b.nodes[i]));
    return worst;
}

// Upper estimate of the deformation path length sum ||df_t||_inf dt. Dual
// norms use the Euclidean metric of C^{2n} through the frame Gram matrix.
inline double deformation_distance(const IRManifold& start,
                                   const std::vector<std::pair<GeneratorFunction, double>>& path,
                                   double tube_radius = 1e300) {
    IRManifold m = to_flow_grid(start, tube_radius);
    double total = 0.0;
    for (const auto& [f, dt] : path) {
        if (dt < 0) throw config_error("deformation_distance: negative step");
        if (dt == 0.0) continue;
        std::size_t count = m.node_count();
        std::vector<double> worst(thread_count(), 0.0);
        std::atomic<int> slot{0};
        parallel_for(count, [&](std::size_t b, std::size_t e) {
            int s = slot.fetch_add(1);
            TangentFrame fr;
            cplx buf[8], g[8], gt[8];
            cplx val;
            for (std::size_t i = b; i < e; ++i) {
                tangent_frame(m, i, fr);
                m.node(i, buf);
                f.eval(buf, 0.0, val, g);
                fr.tangential(g, gt);
                int dim = m.dim();
                double G[16];
                fr.gram(G);
                Eigen::MatrixXd Gm(dim, dim);
                Eigen::VectorXd gv(dim);
                for (int a = 0; a < dim; ++a) {
                    gv(a) = gt[a].real();
                    for (int bb = 0; bb < dim; ++bb) Gm(a, bb) = G[a * dim + bb];
                }
                double norm2 = gv.dot(Gm.ldlt().solve(gv));
                worst[s] = std::max(worst[s], std::sqrt(std::max(0.0, norm2)));
            }
        });
        total += *std::max_element(worst.begin(), worst.end()) * dt;
        if (!f.empty()) m = flow(m, f, dt, dt, tube_radius);
    }
    return total;
}

struct FieldIdentityReport {
    double res_re_hamilton = 0.0;   // 2 Re H_f vs Hamilton field of Re f wrt Re sigma
    double res_im_hamilton = 0.0;   // -2 Im H_f vs Hamilton field of Re f wrt Im sigma
    double res_lifted = 0.0;        // H_f^{Im sigma} vs 2 * (2 Re(i H_f)) where df is real
};

namespace detail {

// real 4n-vector <-> complex 2n-vector with layout (Re, Im) per coordinate
inline void real_to_complex(const double* u, cplx* w, int dim) {
    for (int j = 0; j < dim; ++j) w[j] = cplx(u[2 * j], u[2 * j + 1]);
}

}  // namespace detail

// Checks the structural identities relating complex and real Hamilton fields
// of an entire function at random real points.
inline FieldIdentityReport field_identities_check(const FormPtr& form, int n, int samples,
                                                  double box = 2.0, std::uint64_t seed = 99) {
    int dim = 2 * n;
    int rdim = 4 * n;
    // real matrices of Re sigma and Im sigma in the (Re, Im)-interleaved basis
    Eigen::MatrixXd Are(rdim, rdim), Aim(rdim, rdim);
    {
        std::vector<double> u(rdim, 0.0), v(rdim, 0.0);
        std::vector<cplx> wu(dim), wv(dim);
        for (int a = 0; a < rdim; ++a)
            for (int b = 0; b < rdim; ++b) {
                std::fill(u.begin(), u.end(), 0.0);
                std::fill(v.begin(), v.end(), 0.0);
                u[a] = 1.0;
                v[b] = 1.0;
                detail::real_to_complex(u.data(), wu.data(), dim);
                detail::real_to_complex(v.data(), wv.data(), dim);
                cplx s = sigma_form(wu.data(), wv.data(), n);
                Are(a, b) = s.real();
                Aim(a, b) = s.imag();
            }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu_re(Are), lu_im(Aim);

    Rng rng(seed);
    FieldIdentityReport rep;
    std::vector<cplx> rho(dim), g(dim);
    for (int s = 0; s < samples; ++s) {
        for (int j = 0; j < dim; ++j) rho[j] = rng.uniform(-box, box);
        cplx val;
        form->eval(rho.data(), dim, val, g.data());

        // complex Hamilton field H_f = (df/dxi, -df/dx)
        std::vector<cplx> Hf(dim);
        for (int j = 0; j < n; ++j) {
            Hf[j] = g[n + j];
            Hf[n + j] = -g[j];
        }
        // hat(nu) of a (1,0)-field is the complex component vector itself
        Eigen::VectorXd hat_Hf(rdim), hat_iHf(rdim);
        for (int j = 0; j < dim; ++j) {
            hat_Hf(2 * j) = Hf[j].real();
            hat_Hf(2 * j + 1) = Hf[j].imag();
            cplx iH = cplx(0.0, 1.0) * Hf[j];
            hat_iHf(2 * j) = iH.real();
            hat_iHf(2 * j + 1) = iH.imag();
        }

        // real gradient of Re f from the holomorphic gradient (CR relations)
        Eigen::VectorXd grad_ref(rdim);
        for (int j = 0; j < dim; ++j) {
            grad_ref(2 * j) = g[j].real();
            grad_ref(2 * j + 1) = -g[j].imag();
        }

        // hat(H_f) = 2 Re H_f is the Re-sigma Hamilton field of Re f
        Eigen::VectorXd h1 = lu_re.solve(grad_ref);
        rep.res_re_hamilton =
            std::max(rep.res_re_hamilton, (h1 - hat_Hf).lpNorm<Eigen::Infinity>());
        // hat(i H_f) = -2 Im H_f is the Im-sigma Hamilton field of Re f
        Eigen::VectorXd h2 = lu_im.solve(grad_ref);
        rep.res_im_hamilton =
            std::max(rep.res_im_hamilton, (h2 - hat_iHf).lpNorm<Eigen::Infinity>());

        // where df is real, the Im-sigma Hamilton field of the real
        // function with (1,0)-differential df (that is 2 Re f) equals
        // 4 Re(i H_f) = 2 hat(i H_f). The naive real form below assumes the
        // partials are real; a complex coefficient breaks the identity.
        Eigen::VectorXd grad_naive(rdim);
        for (int j = 0; j < dim; ++j) {
            grad_naive(2 * j) = g[j].real();
            grad_naive(2 * j + 1) = 0.0;
        }
        Eigen::VectorXd h3 = lu_im.solve(2.0 * grad_naive);
        rep.res_lifted = std::max(rep.res_lifted, (h3 - 2.0 * hat_iHf).lpNorm<Eigen::Infinity>());
    }
    return rep;
}

inline FieldIdentityReport field_identities_check(const GeneratorFunction& f, int samples,
                                                  double box = 2.0, std::uint64_t seed = 99) {
    std::vector<FormPtr> terms;
    for (const auto& t : f.terms)
        terms.push_back(forms::product(forms::constant(t.coef), t.basis.form));
    if (terms.empty()) terms.push_back(forms::constant(0.0));
    return field_identities_check(forms::sum(std::move(terms)), f.n, samples, box, seed);
}

}  // namespace phaseflow

#endif
