#pragma once

// Self-contained numerical kernel: modified Bessel K1, adaptive
// Gauss-Kronrod quadrature of Levy integrals over R\{0}, bracketed scalar
// root finding, and reproducible random-number streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "qsd/errors.hpp"

namespace qsd {

// e^z - 1 - z, evaluated without the cancellation that expm1(z) - z suffers
// for tiny z. The Levy integrands hit this against densities as singular as
// |x|^{-3+eps}, where the naive form's noise integrates to visible error.
inline double expm1m(double z) {
    if (std::abs(z) > 0.01) return std::expm1(z) - z;
    double term = 0.5 * z * z;
    double sum = term;
    for (int k = 3; k <= 12; ++k) {
        term *= z / k;
        sum += term;
    }
    return sum;
}

// ---------------------------------------------------------------------------
// Modified Bessel function K1
// ---------------------------------------------------------------------------

namespace detail {

// I1 by its ascending series; converges fast for x <= 2.
inline double bessel_i1_series(double x) {
    const double q = 0.25 * x * x;
    double term = 0.5 * x;  // k = 0 term of (x/2) * sum q^k / (k! (k+1)!)
    double sum = term;
    for (int k = 1; k < 40; ++k) {
        term *= q / (static_cast<double>(k) * (k + 1));
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

// Small-argument expansion:
//   K1(x) = ln(x/2) I1(x) + 1/x - (x/4) sum_k [psi(k+1)+psi(k+2)] q^k / (k!(k+1)!)
// with q = x^2/4 and psi the digamma function at integer arguments.
inline double bessel_k1_series(double x) {
    constexpr double euler = 0.57721566490153286060651209008240;
    const double q = 0.25 * x * x;
    double psi_a = -euler;        // psi(1)
    double psi_b = 1.0 - euler;   // psi(2)
    double fact = 1.0;            // q^k / (k! (k+1)!)
    double sum = psi_a + psi_b;
    for (int k = 1; k < 40; ++k) {
        fact *= q / (static_cast<double>(k) * (k + 1));
        psi_a += 1.0 / k;
        psi_b += 1.0 / (k + 1);
        const double term = (psi_a + psi_b) * fact;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-18) break;
    }
    return std::log(0.5 * x) * bessel_i1_series(x) + 1.0 / x - 0.25 * x * sum;
}

// exp(x) * K1(x) for x >= 2 through the integral representation
//   K1(x) = int_0^inf exp(-x cosh t) cosh t dt,
// rewritten with the exponential factored out and evaluated by fixed
// high-order quadrature on a peak-resolving grid. The integrand
// exp(-x(cosh t - 1)) cosh t is smooth, positive and decays double
// exponentially; composite 15-point Gauss-Legendre on panels scaled to the
// peak width 1/sqrt(x) reaches full double precision.
inline double bessel_k1_scaled_integral(double x) {
    // 15-point Gauss-Legendre nodes/weights on [-1, 1].
    static const double gl_x[15] = {
        -0.9879925180204854, -0.9372733924007060, -0.8482065834104272,
        -0.7244177313601701, -0.5709721726085388, -0.3941513470775634,
        -0.2011940939974345, 0.0,                 0.2011940939974345,
        0.3941513470775634,  0.5709721726085388,  0.7244177313601701,
        0.8482065834104272,  0.9372733924007060,  0.9879925180204854};
    static const double gl_w[15] = {
        0.0307532419961173, 0.0703660474881081, 0.1071592204671719,
        0.1395706779261543, 0.1662692058169939, 0.1861610000155622,
        0.1984314853271116, 0.2025782419255613, 0.1984314853271116,
        0.1861610000155622, 0.1662692058169939, 0.1395706779261543,
        0.1071592204671719, 0.0703660474881081, 0.0307532419961173};

    // cutoff where x (cosh t - 1) > 745 makes the integrand underflow
    const double t_max = std::acosh(1.0 + 746.0 / x);
    // panel size tied to the peak width; >= 24 panels total
    const int n_panels = std::max(24, static_cast<int>(std::ceil(t_max * std::sqrt(x) * 2.0)));
    const double h = t_max / n_panels;
    double total = 0.0;
    for (int p = 0; p < n_panels; ++p) {
        const double mid = (p + 0.5) * h;
        double acc = 0.0;
        for (int i = 0; i < 15; ++i) {
            const double t = mid + 0.5 * h * gl_x[i];
            const double c = std::cosh(t);
            acc += gl_w[i] * std::exp(-x * (c - 1.0)) * c;
        }
        total += acc * 0.5 * h;
    }
    return total;
}

}  // namespace detail

// exp(x) * K1(x); stays representable for all x > 0.
inline double bessel_k1_scaled(double x) {
    if (!(x > 0.0)) throw ValidationError("bessel_k1: argument must be positive");
    if (x <= 2.0) return std::exp(x) * detail::bessel_k1_series(x);
    return detail::bessel_k1_scaled_integral(x);
}

// K1(x), relative error <= 1e-12 on [1e-8, 700]; underflows to 0 above ~745.
inline double bessel_k1(double x) {
    if (!(x > 0.0)) throw ValidationError("bessel_k1: argument must be positive");
    if (x <= 2.0) return detail::bessel_k1_series(x);
    return std::exp(-x) * detail::bessel_k1_scaled_integral(x);
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature
// ---------------------------------------------------------------------------

struct QuadSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-9;
    // panel boundaries; always contains -1, 0, 1 (kinks of the truncation
    // function and the origin split)
    std::vector<double> split_points{-1.0, 0.0, 1.0};
    // fixed tail cutoff; 0 means adaptive doubling search
    double tail_cutoff = 0.0;

    void validate() const {
        ConstraintChecker c;
        c.require(abs_tol > 0.0, "abs_tol must be > 0");
        c.require(rel_tol > 0.0, "rel_tol must be > 0");
        c.require(std::is_sorted(split_points.begin(), split_points.end()),
                  "split_points must be sorted");
        c.require(std::find(split_points.begin(), split_points.end(), 0.0) != split_points.end(),
                  "split_points must contain 0");
        c.finish();
    }
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
    long n_evals = 0;
};

namespace detail {

// 7-15 Gauss-Kronrod pair (QUADPACK dqk15 abscissae and weights).
inline void gk15(const std::function<double(double)>& f, double a, double b,
                 double& result, double& err, long& n_evals) {
    static const double xgk[8] = {
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.0};
    static const double wgk[8] = {
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static const double wg[4] = {
        0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
        0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double resg = fc * wg[3];
    double resk = fc * wgk[7];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * xgk[j];
        const double f1 = f(c - dx);
        const double f2 = f(c + dx);
        resk += wgk[j] * (f1 + f2);
        if (j % 2 == 1) resg += wg[j / 2] * (f1 + f2);
    }
    n_evals += 15;
    result = resk * h;
    err = std::abs((resk - resg) * h);
    // sharpen the raw G-K difference the way QUADPACK does
    if (err > 0.0) err = std::min(err, std::pow(200.0 * err, 1.5));
}

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

}  // namespace detail

// Globally adaptive integration on [a, b]: refine the worst segment until
// the summed error estimate meets max(abs_tol, rel_tol*|I|) or the segment
// budget is exhausted.
inline QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                     double abs_tol, double rel_tol, int initial_panels = 1,
                                     int max_segments = 4000) {
    QuadResult out;
    if (a == b) return out;
    std::priority_queue<detail::Segment> heap;
    double total = 0.0, total_err = 0.0;
    initial_panels = std::min(std::max(1, initial_panels), max_segments);
    for (int i = 0; i < initial_panels; ++i) {
        const double lo = a + (b - a) * i / initial_panels;
        const double hi = a + (b - a) * (i + 1) / initial_panels;
        detail::Segment s{lo, hi, 0.0, 0.0};
        detail::gk15(f, lo, hi, s.value, s.error, out.n_evals);
        total += s.value;
        total_err += s.error;
        heap.push(s);
    }
    int n_segments = initial_panels;
    while (total_err > std::max(abs_tol, rel_tol * std::abs(total)) && n_segments < max_segments) {
        detail::Segment worst = heap.top();
        heap.pop();
        total -= worst.value;
        total_err -= worst.error;
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {  // cannot split further in fp
            total += worst.value;
            total_err += worst.error;
            break;
        }
        detail::Segment left{worst.a, mid, 0.0, 0.0}, right{mid, worst.b, 0.0, 0.0};
        detail::gk15(f, left.a, left.b, left.value, left.error, out.n_evals);
        detail::gk15(f, right.a, right.b, right.value, right.error, out.n_evals);
        total += left.value + right.value;
        total_err += left.error + right.error;
        heap.push(left);
        heap.push(right);
        ++n_segments;
    }
    out.value = total;
    out.error = total_err;
    out.converged = total_err <= std::max(abs_tol, rel_tol * std::abs(total)) ||
                    total_err <= std::abs(total) * 1e-13 + abs_tol;
    if (!std::isfinite(total))
        throw NumericalError("integrate_adaptive: non-finite integrand value", total, total_err);
    return out;
}

// Integral of integrand(x) * density(x) over R \ {0}.
//
// Panels are split at the spec's split points (the |x|<=1 truncation kinks),
// the two panels adjacent to the origin use the substitution x = +-s e^{-t}
// to tame 1/x^2-type singularities, and the tails are truncated where the
// product has decayed below abs_tol * 1e-3 (doubling search, unless the spec
// pins a cutoff).
inline double integrate_levy(const std::function<double(double)>& integrand,
                             const std::function<double(double)>& density,
                             const QuadSpec& spec = QuadSpec{}) {
    spec.validate();

    // density underflowed to zero => product is negligible by admissibility;
    // a genuinely non-finite product is a caller error worth raising.
    auto product = [&](double x) -> double {
        const double d = density(x);
        if (d == 0.0) return 0.0;
        const double p = integrand(x) * d;
        if (!std::isfinite(p))
            throw NumericalError("integrate_levy: non-finite integrand*density at x=" +
                                 std::to_string(x));
        return p;
    };

    const double cut = spec.abs_tol * 1e-3;

    // doubling search for a tail cutoff on one side (sign = +-1)
    auto find_tail = [&](double sign, double start) -> double {
        if (spec.tail_cutoff > 0.0) return spec.tail_cutoff;
        double r = std::max(start, 2.0);
        for (int iter = 0; iter < 64; ++iter) {
            if (std::abs(product(sign * r)) < cut && std::abs(product(sign * 1.5 * r)) < cut)
                return 2.0 * r;
            r *= 2.0;
            if (r > 1e7)
                throw NumericalError("integrate_levy: tail does not decay (cutoff search past 1e7)");
        }
        return r;
    };

    // t-range for the log-substituted panel next to the origin; capped so
    // s e^{-t} never underflows to an exact zero
    auto find_origin_depth = [&](const std::function<double(double)>& g) -> double {
        double t = 16.0;
        while (t < 640.0) {
            if (std::abs(g(t)) < cut && std::abs(g(0.75 * t)) < cut) return t;
            t *= 2.0;
        }
        return 690.0;
    };

    double total = 0.0;
    double err_budget = 0.0;
    const double panel_abs = spec.abs_tol / 8.0;

    for (double sign : {1.0, -1.0}) {
        // positive-side splits (mirrored for the negative side)
        std::vector<double> splits;
        for (double s : spec.split_points) {
            const double v = sign * s;
            if (v > 0.0) splits.push_back(v);
        }
        std::sort(splits.begin(), splits.end());
        if (splits.empty()) splits.push_back(1.0);

        const double s0 = splits.front();
        std::function<double(double)> g = [&, sign, s0](double t) {
            const double x = sign * s0 * std::exp(-t);
            if (x == 0.0) return 0.0;
            return product(x) * s0 * std::exp(-t);
        };
        const double t_max = find_origin_depth(g);
        QuadResult q = integrate_adaptive(g, 0.0, t_max, panel_abs, spec.rel_tol,
                                          std::min(64, std::max(4, static_cast<int>(t_max / 8))));
        if (!q.converged)
            throw NumericalError("integrate_levy: origin panel did not converge", total + q.value,
                                 q.error);
        total += q.value;
        err_budget += q.error;

        const double tail = find_tail(sign, splits.back());
        splits.push_back(tail);
        for (std::size_t i = 0; i + 1 < splits.size(); ++i) {
            const double lo = splits[i], hi = splits[i + 1];
            if (hi <= lo) continue;
            auto h = [&](double x) { return product(sign * x); };
            const int hint = std::max(1, static_cast<int>((hi - lo) / 4));
            q = integrate_adaptive(h, lo, hi, panel_abs, spec.rel_tol, std::min(hint, 64));
            if (!q.converged)
                throw NumericalError("integrate_levy: panel [" + std::to_string(sign * lo) + "," +
                                         std::to_string(sign * hi) + "] did not converge",
                                     total + q.value, q.error);
            total += q.value;
            err_budget += q.error;
        }
    }
    (void)err_budget;
    return total;
}

// ---------------------------------------------------------------------------
// Bracketed root finding (Brent)
// ---------------------------------------------------------------------------

// Brent's method: bisection safeguarded by secant / inverse quadratic steps.
// Requires f(lo) and f(hi) of opposite sign (or one of them zero).
inline double find_root(const std::function<double(double)>& f, double bracket_lo,
                        double bracket_hi, double tol = 1e-12) {
    double a = bracket_lo, b = bracket_hi;
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0)
        throw ValidationError("find_root: f(bracket_lo) and f(bracket_hi) have the same sign");

    double c = a, fc = fa;
    double d = b - a, e = d;
    const int max_iter = 200;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * tol;
        const double xm = 0.5 * (c - b);
        if (std::abs(xm) <= tol1 || fb == 0.0) return b;
        if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
            // attempt secant / inverse quadratic interpolation
            const double s = fb / fa;
            double p, q;
            if (a == c) {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc, r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
        fb = f(b);
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    throw NumericalError("find_root: no convergence after 200 iterations", b, std::abs(c - b));
}

// ---------------------------------------------------------------------------
// Random number streams (PCG32, one independent stream per stream_id)
// ---------------------------------------------------------------------------

// PCG XSH-RR 64/32 with stream selection. Identical (seed, stream_id) pairs
// reproduce bit-identical sequences on every platform; distinct stream_ids
// select distinct LCG increments. A mirrored stream maps every uniform u to
// 1-u and negates normals (antithetic driver).
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : state_(0), inc_((stream_id << 1u) | 1u), seed_(seed), stream_id_(stream_id) {
        step();
        state_ += seed;
        step();
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    void set_mirror(bool m) noexcept { mirror_ = m; }
    bool mirrored() const noexcept { return mirror_; }

    std::uint32_t next_u32() {
        const std::uint64_t old = state_;
        step();
        const std::uint32_t xorshifted =
            static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        const std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // uniform in the open interval (0, 1); the support {(k+1/2) 2^-53} is
    // closed under u -> 1-u, so mirroring is exact
    double next_double() {
        const double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
        return mirror_ ? 1.0 - u : u;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return mirror_ ? -spare_ : spare_;
        }
        const double u1 = raw_double();
        const double u2 = raw_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        const double z = r * std::cos(a);
        return mirror_ ? -z : z;
    }

private:
    double raw_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }
    void step() { state_ = state_ * 6364136223846793005ULL + inc_; }

    std::uint64_t state_;
    std::uint64_t inc_;
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    double spare_ = 0.0;
    bool has_spare_ = false;
    bool mirror_ = false;
};

inline double rng_normal(RngStream& stream, double mean = 0.0, double sd = 1.0) {
    if (!(sd >= 0.0)) throw ValidationError("rng_normal: sd must be >= 0");
    return mean + sd * stream.normal();
}

// Gamma(shape, rate) via Marsaglia-Tsang squeeze; shape < 1 boosted through
// Gamma(shape+1) * U^(1/shape).
inline double rng_gamma(RngStream& stream, double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
        throw ValidationError("rng_gamma: shape and rate must be > 0");
    if (shape < 1.0) {
        const double u = stream.next_double();
        return rng_gamma(stream, shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = stream.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = stream.next_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

// Inverse Gaussian with density  delta e^{delta gamma} / sqrt(2 pi) x^{-3/2}
// exp(-(delta^2/x + gamma^2 x)/2); mean delta/gamma. Sampled by the
// Michael-Schucany-Haas transformation, arranged so the root candidate is
// computed without cancellation.
inline double rng_inverse_gaussian(RngStream& stream, double delta, double gamma) {
    if (!(delta > 0.0) || !(gamma > 0.0))
        throw ValidationError("rng_inverse_gaussian: delta and gamma must be > 0");
    const double mu = delta / gamma;
    const double lam = delta * delta;
    const double n = stream.normal();
    const double w = mu * n * n;
    const double s = std::sqrt(w * (w + 4.0 * lam));
    const double x = mu * (s - w > 0.0 ? 4.0 * lam * w / ((s + w) * (s + w)) : 0.0);
    // w == 0 gives x = mu * 0/0 guard above; the limit is mu
    const double cand = (w == 0.0) ? mu : x;
    const double u = stream.next_double();
    return (u <= mu / (mu + cand)) ? cand : mu * mu / std::max(cand, 1e-300);
}

}  // namespace qsd
