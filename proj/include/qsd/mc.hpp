#pragma once

// Monte Carlo engine: exact increment samplers for NIG and VG, an
// inversion-based Meixner sampler (Gil-Pelaez tabulation), path simulation,
// and statistical tests of the duality identity and both martingale
// properties.
//
// Paths are partitioned into fixed-size blocks keyed by stream_id; partial
// results are reduced in block order with compensated summation, so the
// outcome is bit-identical for any thread count.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qsd/duality.hpp"
#include "qsd/errors.hpp"
#include "qsd/format.hpp"
#include "qsd/models.hpp"
#include "qsd/numerics.hpp"

namespace qsd {

// ---------------------------------------------------------------------------
// Run configuration and estimates
// ---------------------------------------------------------------------------

struct McConfig {
    long n_paths = 1'000'000;
    long n_steps = 1;
    double horizon_T = 1.0;  // years
    std::uint64_t seed = 42;
    bool antithetic = false;

    void validate() const {
        ConstraintChecker c;
        c.require(n_paths >= 1, "n_paths >= 1 required");
        c.require(n_steps >= 1, "n_steps >= 1 required");
        c.require(horizon_T > 0.0, "horizon_T > 0 required");
        c.finish();
    }
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    long n = 0;
};

// Kahan-compensated accumulator; merge is associative in exact arithmetic
// and applied in fixed block order, making reductions order-independent.
class Accumulator {
public:
    void add(double x) {
        add_comp(sum_, c1_, x);
        add_comp(sumsq_, c2_, x * x);
        ++n_;
    }
    void merge(const Accumulator& o) {
        add_comp(sum_, c1_, o.sum_);
        add_comp(sum_, c1_, o.c1_);
        add_comp(sumsq_, c2_, o.sumsq_);
        add_comp(sumsq_, c2_, o.c2_);
        n_ += o.n_;
    }
    Estimate estimate() const {
        Estimate e;
        e.n = n_;
        if (n_ == 0) return e;
        e.mean = sum_ / n_;
        if (n_ > 1) {
            const double var = std::max(0.0, (sumsq_ - sum_ * sum_ / n_) / (n_ - 1));
            e.std_error = std::sqrt(var / n_);
        }
        return e;
    }

private:
    static void add_comp(double& s, double& c, double x) {
        const double y = x - c;
        const double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double sum_ = 0.0, c1_ = 0.0;
    double sumsq_ = 0.0, c2_ = 0.0;
    long n_ = 0;
};

// ---------------------------------------------------------------------------
// Payoffs
// ---------------------------------------------------------------------------

struct PayoffDescriptor {
    enum class Kind { call, put, digital, identity, constant };
    Kind kind = Kind::constant;
    double strike = 1.0;

    static PayoffDescriptor call(double K) { return make(Kind::call, K); }
    static PayoffDescriptor put(double K) { return make(Kind::put, K); }
    static PayoffDescriptor digital(double K) { return make(Kind::digital, K); }
    static PayoffDescriptor identity() { return PayoffDescriptor{Kind::identity, 1.0}; }
    static PayoffDescriptor constant() { return PayoffDescriptor{Kind::constant, 1.0}; }

    double operator()(double s) const {
        switch (kind) {
            case Kind::call: return std::max(s - strike, 0.0);
            case Kind::put: return std::max(strike - s, 0.0);
            case Kind::digital: return s > strike ? 1.0 : 0.0;
            case Kind::identity: return s;
            case Kind::constant: return 1.0;
        }
        return 0.0;
    }

    std::string name() const {
        switch (kind) {
            case Kind::call: return "call";
            case Kind::put: return "put";
            case Kind::digital: return "digital";
            case Kind::identity: return "identity";
            case Kind::constant: return "constant";
        }
        return "?";
    }

private:
    static PayoffDescriptor make(Kind k, double K) {
        if (!(K > 0.0)) throw ValidationError("payoff strike must be > 0");
        return PayoffDescriptor{k, K};
    }
};

// ---------------------------------------------------------------------------
// Meixner increment sampler (Gil-Pelaez CDF tabulation + inverse interpolation)
// ---------------------------------------------------------------------------

// CDF of a Meixner(a, b, d t, m t) increment by the Gil-Pelaez inversion
//   F(x) = 1/2 - (1/pi) int_0^inf Im[phi(u) e^{-iux}] / u du.
// cosh((au - ib)/2) stays in the right half-plane for |b| < pi, so the
// principal complex log makes phi continuous.
inline double meixner_cdf(const MeixnerParams& p, double dt, double x) {
    const double twodt = 2.0 * p.d * dt;
    const double log_cb = std::log(std::cos(0.5 * p.b));
    auto phi = [&](double u) -> std::complex<double> {
        const std::complex<double> z(0.5 * p.a * u, -0.5 * p.b);
        const std::complex<double> log_phi =
            std::complex<double>(0.0, p.m * dt * u) + twodt * (log_cb - std::log(std::cosh(z)));
        return std::exp(log_phi);
    };
    // |phi(u)| ~ (2 cos(b/2))^{2 d dt} e^{-a d dt u}; truncate where it is dead
    const double rate = p.a * p.d * dt;
    const double u_max = (40.0 + std::abs(twodt * (std::log(2.0) + log_cb))) / rate + 1.0;
    const double mean_shift = p.m * dt;
    auto integrand = [&](double u) -> double {
        if (u == 0.0) return mean_shift - x + p.a * p.d * dt * std::tan(0.5 * p.b);
        return std::imag(phi(u) * std::exp(std::complex<double>(0.0, -u * x))) / u;
    };
    const int hint = std::max(8, static_cast<int>(u_max * (1.0 + std::abs(x - mean_shift)) /
                                                  (2.0 * std::numbers::pi)));
    QuadResult q = integrate_adaptive(integrand, 0.0, u_max, 1e-11, 1e-10,
                                      std::min(hint, 512), 20000);
    if (!q.converged)
        throw NumericalError("meixner_cdf: Gil-Pelaez integral did not converge", q.value, q.error);
    return 0.5 - q.value / std::numbers::pi;
}

// One tabulated inverse CDF per (params, dt). The table spans the quantile
// range [~1e-10, 1-1e-10]; draws are clamped to it, and within a cell the
// inverse is linear in u (distribution bias O(h^2), far below MC noise at
// the documented grid size).
class MeixnerSampler {
public:
    MeixnerSampler(const MeixnerParams& p, double dt, int grid = 4097) {
        p.validate();
        if (!(dt > 0.0)) throw ValidationError("MeixnerSampler: dt > 0 required");
        const double mean = (p.m + p.a * p.d * std::tan(0.5 * p.b)) * dt;
        const double cb = std::cos(0.5 * p.b);
        const double sd = std::sqrt(p.a * p.a * p.d * dt / (2.0 * cb * cb));
        double lo = mean - 10.0 * sd, hi = mean + 10.0 * sd;
        while (meixner_cdf(p, dt, lo) > 1e-10) lo -= 5.0 * sd;
        while (meixner_cdf(p, dt, hi) < 1.0 - 1e-10) hi += 5.0 * sd;
        x_.resize(grid);
        f_.resize(grid);
        for (int i = 0; i < grid; ++i) {
            x_[i] = lo + (hi - lo) * i / (grid - 1);
            f_[i] = meixner_cdf(p, dt, x_[i]);
        }
        // quadrature noise can leave microscopic non-monotonicity in the far
        // tails; clamp to a running maximum
        for (int i = 1; i < grid; ++i) f_[i] = std::max(f_[i], f_[i - 1]);
    }

    double draw(RngStream& stream) const {
        const double u = std::min(std::max(stream.next_double(), f_.front()), f_.back());
        auto it = std::lower_bound(f_.begin(), f_.end(), u);
        std::size_t j = static_cast<std::size_t>(it - f_.begin());
        if (j == 0) return x_.front();
        const double df = f_[j] - f_[j - 1];
        if (df <= 0.0) return x_[j];
        const double w = (u - f_[j - 1]) / df;
        return x_[j - 1] + w * (x_[j] - x_[j - 1]);
    }

    const std::vector<double>& grid_x() const { return x_; }
    const std::vector<double>& grid_f() const { return f_; }

private:
    std::vector<double> x_, f_;
};

// ---------------------------------------------------------------------------
// Increment sampling
// ---------------------------------------------------------------------------

// Draws one exact increment X_{t+dt} - X_t. Meixner goes through a sampler
// table cached per (params, dt).
class IncrementSampler {
public:
    IncrementSampler(const ModelParams& params, double dt) : params_(params), dt_(dt) {
        validate_params(params);
        if (!(dt > 0.0)) throw ValidationError("IncrementSampler: dt > 0 required");
        if (family_of(params) == Family::cgmy)
            throw ValidationError("no exact increment sampler for CGMY (not required here)");
        if (const auto* mx = std::get_if<MeixnerParams>(&params))
            meixner_ = std::make_shared<MeixnerSampler>(*mx, dt);
    }

    double operator()(RngStream& stream) const {
        return std::visit(
            [&](const auto& v) -> double {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, NigParams>) {
                    // Brownian motion with drift b time-changed by an
                    // inverse-Gaussian subordinator
                    const double delta = v.d * dt_;
                    const double ig_gamma = std::sqrt(v.a * v.a - v.b * v.b);
                    const double tau = rng_inverse_gaussian(stream, delta, ig_gamma);
                    return v.m * dt_ + v.b * tau + std::sqrt(tau) * stream.normal();
                } else if constexpr (std::is_same_v<T, VgParams>) {
                    const double shape = v.C * dt_;
                    const double up = rng_gamma(stream, shape, v.M);
                    const double dn = rng_gamma(stream, shape, v.G);
                    return v.m * dt_ + up - dn;
                } else if constexpr (std::is_same_v<T, MeixnerParams>) {
                    return meixner_->draw(stream);
                } else if constexpr (std::is_same_v<T, BsParams>) {
                    return v.m * dt_ + std::sqrt(v.sigma2 * dt_) * stream.normal();
                } else {
                    throw ValidationError("no exact increment sampler for CGMY");
                }
            },
            params_);
    }

    double dt() const { return dt_; }

private:
    ModelParams params_;
    double dt_;
    std::shared_ptr<MeixnerSampler> meixner_;
};

inline double sample_increment(const ModelParams& params, double dt, RngStream& stream) {
    if (family_of(params) == Family::meixner) {
        // cache the tabulated sampler across calls
        static std::mutex mu;
        static std::vector<std::pair<std::pair<std::string, double>, std::shared_ptr<IncrementSampler>>>
            cache;
        const std::string key = format_params(params);
        std::shared_ptr<IncrementSampler> sampler;
        {
            std::lock_guard<std::mutex> lock(mu);
            for (auto& [k, s] : cache)
                if (k.first == key && k.second == dt) sampler = s;
            if (!sampler) {
                sampler = std::make_shared<IncrementSampler>(params, dt);
                cache.emplace_back(std::make_pair(key, dt), sampler);
            }
        }
        return (*sampler)(stream);
    }
    IncrementSampler s(params, dt);
    return s(stream);
}

// ---------------------------------------------------------------------------
// Block-parallel engine
// ---------------------------------------------------------------------------

namespace detail {
constexpr long kBlockSize = 1 << 14;

// Runs path_fn for every path, accumulating K statistics per path. Blocks
// are assigned stream_id = block index; the reduction runs in block order
// regardless of the thread count. With antithetic on, every path is averaged
// with its mirrored twin (same pre-path stream state, mirrored draws).
template <std::size_t K, class PathFn>
std::array<Accumulator, K> mc_run(PathFn&& path_fn, const McConfig& cfg) {
    cfg.validate();
    const long n_blocks = (cfg.n_paths + kBlockSize - 1) / kBlockSize;
    std::vector<std::array<Accumulator, K>> partial(static_cast<std::size_t>(n_blocks));

    unsigned hw = std::thread::hardware_concurrency();
    const unsigned n_threads =
        std::max(1u, std::min<unsigned>(hw ? hw : 1, static_cast<unsigned>(n_blocks)));

    auto worker = [&](unsigned tid) {
        for (long b = tid; b < n_blocks; b += n_threads) {
            RngStream stream(cfg.seed, static_cast<std::uint64_t>(b));
            const long lo = b * kBlockSize;
            const long hi = std::min(cfg.n_paths, lo + kBlockSize);
            auto& acc = partial[static_cast<std::size_t>(b)];
            for (long i = lo; i < hi; ++i) {
                if (cfg.antithetic) {
                    RngStream twin = stream;  // same state, mirrored draws
                    twin.set_mirror(true);
                    const std::array<double, K> v1 = path_fn(stream);
                    const std::array<double, K> v2 = path_fn(twin);
                    for (std::size_t k = 0; k < K; ++k) acc[k].add(0.5 * (v1[k] + v2[k]));
                } else {
                    const std::array<double, K> v = path_fn(stream);
                    for (std::size_t k = 0; k < K; ++k) acc[k].add(v[k]);
                }
            }
        }
    };

    if (n_threads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();
    }

    std::array<Accumulator, K> out;
    for (long b = 0; b < n_blocks; ++b)
        for (std::size_t k = 0; k < K; ++k) out[k].merge(partial[static_cast<std::size_t>(b)][k]);
    return out;
}

inline void require_moment(const ModelParams& p, double theta, const std::string& what) {
    const auto [lo, hi] = strip_of(p);
    if (!(theta >= lo + kStripMargin && theta <= hi - kStripMargin)) {
        std::ostringstream os;
        os << what << ": requires the moment E[e^{" << theta
           << " X}] which does not exist (strip (" << lo << ", " << hi << "))";
        throw ValidationError(os.str());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Terminal-value expectation, duality test, path simulation
// ---------------------------------------------------------------------------

// E[g(S_T)] with S_T = S0 e^{lambda T + X_T}; single-step terminal sampling.
inline Estimate mc_expectation(const QsdSpec& spec, const std::function<double(double)>& g,
                               const McConfig& cfg, double S0 = 1.0) {
    const ModelParams native = qsd_to_native(spec);
    const IncrementSampler sampler(native, cfg.horizon_T);
    const double drift = spec.lambda * cfg.horizon_T;
    auto path = [&](RngStream& s) -> std::array<double, 1> {
        return {g(S0 * std::exp(drift + sampler(s)))};
    };
    return detail::mc_run<1>(path, cfg)[0].estimate();
}

struct DualityTestResult {
    Estimate lhs;  // E[f(S_T/S0)]
    Estimate rhs;  // E[(S_T/S0)^alpha f(S0/S_T)]
    double z_score = 0.0;
};

// Monte Carlo check of the defining identity
//   E[f(S_T/S0)] = E[(S_T/S0)^alpha f(S0/S_T)],
// both sides on common random numbers; z is the paired-difference score.
inline DualityTestResult duality_test(const QsdSpec& spec, const PayoffDescriptor& f,
                                      const McConfig& cfg) {
    const ModelParams native = qsd_to_native(spec);
    // moment pre-validation: refuse payoffs whose dual side has no moment
    detail::require_moment(native, 1.0, "duality_test lhs");
    using Kind = PayoffDescriptor::Kind;
    if (f.kind == Kind::call || f.kind == Kind::identity)
        detail::require_moment(native, spec.alpha - 1.0, "duality_test rhs");

    const IncrementSampler sampler(native, cfg.horizon_T);
    const double drift = spec.lambda * cfg.horizon_T;
    const double alpha = spec.alpha;
    auto path = [&](RngStream& s) -> std::array<double, 3> {
        const double r = std::exp(drift + sampler(s));  // S_T / S0
        const double lhs = f(r);
        const double rhs = std::pow(r, alpha) * f(1.0 / r);
        return {lhs, rhs, lhs - rhs};
    };
    auto acc = detail::mc_run<3>(path, cfg);
    DualityTestResult out;
    out.lhs = acc[0].estimate();
    out.rhs = acc[1].estimate();
    const Estimate diff = acc[2].estimate();
    out.z_score = diff.std_error > 0.0 ? diff.mean / diff.std_error : 0.0;
    return out;
}

// Path on the equally spaced grid 0 = t_0 < ... < t_n = T via exact
// increment sampling; returns (t, S_t) pairs.
inline std::vector<std::pair<double, double>> simulate_path(const QsdSpec& spec,
                                                            const McConfig& cfg, RngStream& stream,
                                                            double S0 = 1.0) {
    cfg.validate();
    const ModelParams native = qsd_to_native(spec);
    const double dt = cfg.horizon_T / static_cast<double>(cfg.n_steps);
    const IncrementSampler sampler(native, dt);
    std::vector<std::pair<double, double>> path;
    path.reserve(static_cast<std::size_t>(cfg.n_steps) + 1);
    path.emplace_back(0.0, S0);
    double x = 0.0;
    for (long k = 1; k <= cfg.n_steps; ++k) {
        x += sampler(stream);
        const double t = dt * static_cast<double>(k);
        path.emplace_back(t, S0 * std::exp(spec.lambda * t + x));
    }
    return path;
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

inline std::string estimate_csv_header() {
    return "test_name,family,alpha,lambda,lhs,lhs_se,rhs,rhs_se,z,n_paths,seed";
}

inline std::string estimate_csv_row(const std::string& test_name, const QsdSpec& spec,
                                    const Estimate& lhs, const Estimate& rhs, double z,
                                    const McConfig& cfg) {
    std::ostringstream os;
    os << test_name << ',' << family_name(family_of(spec.base)) << ','
       << format_double(spec.alpha) << ',' << format_double(spec.lambda) << ','
       << format_double(lhs.mean) << ',' << format_double(lhs.std_error) << ','
       << format_double(rhs.mean) << ',' << format_double(rhs.std_error) << ','
       << format_double(z) << ',' << format_int(cfg.n_paths) << ','
       << format_int(static_cast<long long>(cfg.seed));
    return os.str();
}

}  // namespace qsd
