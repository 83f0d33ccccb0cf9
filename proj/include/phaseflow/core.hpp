#ifndef PHASEFLOW_CORE_HPP
#define PHASEFLOW_CORE_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace phaseflow {

using cplx = std::complex<double>;

constexpr double pi = 3.14159265358979323846;

// A point of complex phase space C^{2n}, stored as [x_1..x_n, xi_1..xi_n].
struct PhasePoint {
    int n = 0;
    std::vector<cplx> c;

    PhasePoint() = default;
    explicit PhasePoint(int n_) : n(n_), c(2 * n_, cplx(0.0)) {}
    PhasePoint(int n_, std::vector<cplx> coords) : n(n_), c(std::move(coords)) {}

    cplx& x(int j) { return c[j]; }
    cplx& xi(int j) { return c[n + j]; }
    const cplx& x(int j) const { return c[j]; }
    const cplx& xi(int j) const { return c[n + j]; }

    static PhasePoint real2d(double x, double xi) {
        PhasePoint p(1);
        p.c[0] = x;
        p.c[1] = xi;
        return p;
    }
    static PhasePoint real4d(double x1, double x2, double xi1, double xi2) {
        PhasePoint p(2);
        p.c[0] = x1;
        p.c[1] = x2;
        p.c[2] = xi1;
        p.c[3] = xi2;
        return p;
    }

    double max_im() const {
        double m = 0.0;
        for (const auto& z : c) m = std::max(m, std::abs(z.imag()));
        return m;
    }
};

struct tube_error : std::runtime_error {
    int coordinate;
    tube_error(int coord, double im, double radius)
        : std::runtime_error("point outside symbol tube: |Im rho[" + std::to_string(coord) +
                             "]| = " + std::to_string(im) + " > tube radius " +
                             std::to_string(radius)),
          coordinate(coord) {}
};

struct flow_error : std::runtime_error {
    std::size_t node_index;
    double exit_time;
    flow_error(std::size_t node, double t, const std::string& what_)
        : std::runtime_error("flow error at node " + std::to_string(node) + ", t = " +
                             std::to_string(t) + ": " + what_),
          node_index(node),
          exit_time(t) {}
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline int thread_count() {
    if (const char* env = std::getenv("PHASEFLOW_THREADS")) {
        int t = std::atoi(env);
        if (t > 0) return t;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(begin, end) over disjoint chunks of [0, count). Workers write to
// disjoint slots only; reductions happen afterwards in a fixed order.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn) {
    int nt = thread_count();
    if (nt <= 1 || count < 1024) {
        fn(0, count);
        return;
    }
    std::size_t chunk = (count + nt - 1) / nt;
    std::vector<std::thread> workers;
    workers.reserve(nt);
    for (int t = 0; t < nt; ++t) {
        std::size_t b = std::min(count, t * chunk);
        std::size_t e = std::min(count, b + chunk);
        if (b >= e) break;
        workers.emplace_back(fn, b, e);
    }
    for (auto& w : workers) w.join();
}

// Pairwise tree summation: the reduction order depends only on the length,
// so results are bit-identical for any worker count.
template <class T>
T pairwise_sum(std::span<const T> v) {
    if (v.size() <= 8) {
        T s{};
        for (const auto& x : v) s += x;
        return s;
    }
    std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(std::span<const double>(v));
}
inline cplx pairwise_sum(const std::vector<cplx>& v) {
    return pairwise_sum(std::span<const cplx>(v));
}

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed = 12345) : eng(seed) {}
    double uniform(double a, double b) {
        std::uniform_real_distribution<double> d(a, b);
        return d(eng);
    }
    int uniform_int(int a, int b) {
        std::uniform_int_distribution<int> d(a, b);
        return d(eng);
    }
};

// Least-squares fit of y = a + b*x; returns {a, b}.
inline std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw numeric_error("linear_fit needs >= 2 points");
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) throw numeric_error("linear_fit: degenerate abscissae");
    double b = (n * sxy - sx * sy) / denom;
    double a = (sy - b * sx) / n;
    return {a, b};
}

// Fit |y| ~ C * x^q in log-log; returns {q, C}. Skips non-positive y.
inline std::pair<double, double> powerlaw_fit(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0 && std::abs(y[i]) > 0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(std::abs(y[i])));
        }
    }
    if (lx.size() < 2) throw numeric_error("powerlaw_fit: fewer than 2 usable points");
    auto [a, b] = linear_fit(lx, ly);
    return {b, std::exp(a)};
}

}  // namespace phaseflow

#endif
