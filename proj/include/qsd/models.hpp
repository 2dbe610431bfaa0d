#pragma once

// Model catalog: parameter sets in their native parameterizations, Levy
// densities, cumulant functions on their real strips of regularity, Levy
// triplets under the truncation c(x) = 1_{|x|<=1}, and the quasi-self-dual
// reparameterization (symmetric base + order alpha + carrying cost lambda).

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <variant>

#include "qsd/errors.hpp"
#include "qsd/format.hpp"
#include "qsd/numerics.hpp"

namespace qsd {

constexpr double kStripMargin = 1e-9;  // open strips are enforced with this margin

// ---------------------------------------------------------------------------
// Native parameter sets
// ---------------------------------------------------------------------------

struct NigParams {
    double a, b, d, m;
    void validate() const {
        ConstraintChecker c;
        c.require(a > 0.0, "NIG: a > 0 required");
        c.require(d > 0.0, "NIG: d > 0 required");
        c.require(std::abs(b) < a, "NIG: b in (-a, a) required");
        c.finish();
    }
};

struct VgParams {
    double C, G, M, m;
    void validate() const {
        ConstraintChecker c;
        c.require(C > 0.0, "VG: C > 0 required");
        c.require(G > 0.0, "VG: G > 0 required");
        c.require(M > 1.0, "VG: M > 1 required (first exponential moment)");
        c.finish();
    }
};

struct MeixnerParams {
    double a, b, d, m;
    void validate() const {
        ConstraintChecker c;
        c.require(a > 0.0 && a < 2.0 * std::numbers::pi, "Meixner: a in (0, 2*pi) required");
        c.require(b > -std::numbers::pi && b < std::numbers::pi - a,
                  "Meixner: b in (-pi, pi - a) required (first exponential moment)");
        c.require(d > 0.0, "Meixner: d > 0 required");
        c.finish();
    }
};

struct CgmyParams {
    double C, G, M, Y, m;
    void validate() const {
        ConstraintChecker c;
        c.require(C > 0.0, "CGMY: C > 0 required");
        c.require(G > 0.0, "CGMY: G > 0 required");
        c.require(M > 1.0, "CGMY: M > 1 required (first exponential moment)");
        c.require(Y < 2.0, "CGMY: Y < 2 required");
        c.require(Y != 0.0, "CGMY: Y = 0 is the Variance Gamma family; use VgParams");
        c.require(Y != 1.0, "CGMY: Y = 1 unsupported (Gamma(-Y) pole)");
        c.finish();
    }
};

// Degenerate Black-Scholes model (nu == 0): sanity case supported throughout.
struct BsParams {
    double sigma2, m;
    void validate() const {
        ConstraintChecker c;
        c.require(sigma2 > 0.0, "BS: sigma2 > 0 required");
        c.finish();
    }
};

using ModelParams = std::variant<NigParams, VgParams, MeixnerParams, CgmyParams, BsParams>;

enum class Family { nig, vg, meixner, cgmy, bs };

inline Family family_of(const ModelParams& p) {
    return std::visit(
        [](const auto& v) -> Family {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigParams>) return Family::nig;
            else if constexpr (std::is_same_v<T, VgParams>) return Family::vg;
            else if constexpr (std::is_same_v<T, MeixnerParams>) return Family::meixner;
            else if constexpr (std::is_same_v<T, CgmyParams>) return Family::cgmy;
            else return Family::bs;
        },
        p);
}

inline std::string family_name(Family f) {
    switch (f) {
        case Family::nig: return "nig";
        case Family::vg: return "vg";
        case Family::meixner: return "meixner";
        case Family::cgmy: return "cgmy";
        case Family::bs: return "bs";
    }
    return "?";
}

inline void validate_params(const ModelParams& p) {
    std::visit([](const auto& v) { v.validate(); }, p);
}

// ---------------------------------------------------------------------------
// Levy densities
// ---------------------------------------------------------------------------

inline double levy_density(const NigParams& p, double x) {
    const double ax = p.a * std::abs(x);
    // exp(bx) K1(a|x|) combined in the exponent via the scaled Bessel so the
    // tails underflow gracefully instead of hitting 0 * inf
    const double expo = p.b * x - ax;
    if (expo < -745.0) return 0.0;
    return p.d * p.a / std::numbers::pi * std::exp(expo) * bessel_k1_scaled(ax) / std::abs(x);
}

inline double levy_density(const VgParams& p, double x) {
    const double rate = (x < 0.0) ? p.G : p.M;
    return p.C / std::abs(x) * std::exp(-rate * std::abs(x));
}

inline double levy_density(const MeixnerParams& p, double x) {
    const double t = std::numbers::pi * x / p.a;
    if (std::abs(t) > 30.0) {
        // x sinh(pi x / a) = |x| |sinh|, and 1/sinh|t| ~ 2 e^{-|t|}
        return 2.0 * p.d * std::exp(p.b / p.a * x - std::abs(t)) / std::abs(x);
    }
    return p.d * std::exp(p.b / p.a * x) / (x * std::sinh(t));
}

inline double levy_density(const CgmyParams& p, double x) {
    const double rate = (x < 0.0) ? p.G : p.M;
    return p.C / std::pow(std::abs(x), 1.0 + p.Y) * std::exp(-rate * std::abs(x));
}

inline double levy_density(const BsParams&, double) { return 0.0; }

inline double levy_density(const ModelParams& p, double x) {
    if (x == 0.0) throw ValidationError("levy_density: x must be nonzero");
    return std::visit([x](const auto& v) { return levy_density(v, x); }, p);
}

// ---------------------------------------------------------------------------
// Cumulant functions kappa(theta) = log E[e^{theta X_1}]
// ---------------------------------------------------------------------------

// open strip of regularity for real cumulant arguments
inline std::pair<double, double> strip_of(const ModelParams& p) {
    const double inf = std::numeric_limits<double>::infinity();
    return std::visit(
        [&](const auto& v) -> std::pair<double, double> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigParams>) return {-v.a - v.b, v.a - v.b};
            else if constexpr (std::is_same_v<T, VgParams>) return {-v.G, v.M};
            else if constexpr (std::is_same_v<T, MeixnerParams>)
                return {-(std::numbers::pi + v.b) / v.a, (std::numbers::pi - v.b) / v.a};
            else if constexpr (std::is_same_v<T, CgmyParams>) return {-v.G, v.M};
            else return {-inf, inf};
        },
        p);
}

namespace detail {
inline void require_in_strip(const ModelParams& p, double theta) {
    const auto [lo, hi] = strip_of(p);
    if (!(theta >= lo + kStripMargin && theta <= hi - kStripMargin)) {
        std::ostringstream os;
        os << "cumulant: theta = " << theta << " outside the strip of regularity ("
           << lo << ", " << hi << ")";
        throw ValidationError(os.str());
    }
}
}  // namespace detail

inline double cumulant(const ModelParams& p, double theta) {
    detail::require_in_strip(p, theta);
    return std::visit(
        [theta](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigParams>) {
                return v.m * theta +
                       v.d * (std::sqrt(v.a * v.a - v.b * v.b) -
                              std::sqrt(v.a * v.a - (v.b + theta) * (v.b + theta)));
            } else if constexpr (std::is_same_v<T, VgParams>) {
                return v.m * theta - v.C * (std::log1p(-theta / v.M) + std::log1p(theta / v.G));
            } else if constexpr (std::is_same_v<T, MeixnerParams>) {
                return v.m * theta +
                       2.0 * v.d *
                           std::log(std::cos(0.5 * v.b) / std::cos(0.5 * (v.b + v.a * theta)));
            } else if constexpr (std::is_same_v<T, CgmyParams>) {
                const double g = std::tgamma(-v.Y);
                return v.m * theta +
                       v.C * g *
                           (std::pow(v.M - theta, v.Y) - std::pow(v.M, v.Y) +
                            std::pow(v.G + theta, v.Y) - std::pow(v.G, v.Y));
            } else {
                return v.m * theta + 0.5 * v.sigma2 * theta * theta;
            }
        },
        p);
}

// the native drift parameter m, shared by every family
inline double drift_param_of(const ModelParams& p) {
    return std::visit([](const auto& v) { return v.m; }, p);
}

// kappa'(0) = E[X_1]
inline double mean_of(const ModelParams& p) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigParams>)
                return v.m + v.d * v.b / std::sqrt(v.a * v.a - v.b * v.b);
            else if constexpr (std::is_same_v<T, VgParams>)
                return v.m + v.C / v.M - v.C / v.G;
            else if constexpr (std::is_same_v<T, MeixnerParams>)
                return v.m + v.a * v.d * std::tan(0.5 * v.b);
            else if constexpr (std::is_same_v<T, CgmyParams>)
                return v.m - v.C * std::tgamma(-v.Y) * v.Y *
                                 (std::pow(v.M, v.Y - 1.0) - std::pow(v.G, v.Y - 1.0));
            else
                return v.m;
        },
        p);
}

// kappa''(0) = Var[X_1]
inline double variance_of(const ModelParams& p) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigParams>)
                return v.d * v.a * v.a / std::pow(v.a * v.a - v.b * v.b, 1.5);
            else if constexpr (std::is_same_v<T, VgParams>)
                return v.C / (v.M * v.M) + v.C / (v.G * v.G);
            else if constexpr (std::is_same_v<T, MeixnerParams>) {
                const double cb = std::cos(0.5 * v.b);
                return v.a * v.a * v.d / (2.0 * cb * cb);
            } else if constexpr (std::is_same_v<T, CgmyParams>)
                return v.C * std::tgamma(2.0 - v.Y) *
                       (std::pow(v.M, v.Y - 2.0) + std::pow(v.G, v.Y - 2.0));
            else
                return v.sigma2;
        },
        p);
}

// ---------------------------------------------------------------------------
// Levy triplet under c(x) = 1_{|x|<=1}
// ---------------------------------------------------------------------------

struct LevyTriplet {
    double gamma = 0.0;
    double sigma2 = 0.0;
    std::function<double(double)> density;  // nu(x) on R\{0}; empty means nu == 0
};

inline double density_or_zero(const LevyTriplet& t, double x) {
    return t.density ? t.density(x) : 0.0;
}

inline LevyTriplet triplet_of(const ModelParams& p, const QuadSpec& qs = QuadSpec{}) {
    validate_params(p);
    LevyTriplet t;
    const Family fam = family_of(p);
    if (fam == Family::bs) {
        const auto& v = std::get<BsParams>(p);
        t.gamma = v.m;
        t.sigma2 = v.sigma2;
        return t;
    }
    t.density = [p](double x) { return levy_density(p, x); };
    t.sigma2 = 0.0;
    switch (fam) {
        case Family::nig: {
            const auto& v = std::get<NigParams>(p);
            // gamma = m + (2da/pi) int_0^1 sinh(bx) K1(ax) dx
            auto integrand = [&](double x) {
                if (x == 0.0) return v.b / v.a;  // limit of sinh(bx)K1(ax)
                return std::sinh(v.b * x) * bessel_k1(v.a * x);
            };
            QuadResult q = integrate_adaptive(integrand, 0.0, 1.0, qs.abs_tol * 1e-2, qs.rel_tol, 8);
            if (!q.converged)
                throw NumericalError("triplet_of: NIG drift integral did not converge", q.value,
                                     q.error);
            t.gamma = v.m + 2.0 * v.d * v.a / std::numbers::pi * q.value;
            break;
        }
        case Family::vg: {
            const auto& v = std::get<VgParams>(p);
            t.gamma = v.m - v.C *
                                (v.G * (std::exp(-v.M) - 1.0) - v.M * (std::exp(-v.G) - 1.0)) /
                                (v.M * v.G);
            break;
        }
        case Family::meixner:
        case Family::cgmy: {
            // gamma = kappa'(0) - int_{|x|>1} x nu(dx), correction by quadrature
            auto integrand = [](double x) { return std::abs(x) > 1.0 ? x : 0.0; };
            const double corr = integrate_levy(integrand, t.density, qs);
            t.gamma = mean_of(p) - corr;
            break;
        }
        default: break;
    }
    // construction check: int min(x^2,1) nu(dx) finite
    const double small_mass =
        integrate_levy([](double x) { return std::min(x * x, 1.0); }, t.density,
                       QuadSpec{1e-6, 1e-6, {-1.0, 0.0, 1.0}, qs.tail_cutoff});
    if (!std::isfinite(small_mass))
        throw NumericalError("triplet_of: int min(x^2,1) nu(dx) not finite");
    return t;
}

// kappa reconstructed from a triplet by quadrature; consistency oracle for
// the closed-form cumulants.
inline double cumulant_from_triplet(const LevyTriplet& t, double theta,
                                    const QuadSpec& qs = QuadSpec{}) {
    double val = t.gamma * theta + 0.5 * t.sigma2 * theta * theta;
    if (t.density) {
        auto integrand = [theta](double x) {
            if (std::abs(x) <= 1.0) return expm1m(theta * x);  // e^{tx} - 1 - tx, stable
            return std::expm1(theta * x);
        };
        val += integrate_levy(integrand, t.density, qs);
    }
    return val;
}

// ---------------------------------------------------------------------------
// Quasi-self-dual reparameterization
// ---------------------------------------------------------------------------

struct NigBase { double a, d; };
struct VgBase { double C, beta; };
struct MeixnerBase { double b, d; };
struct CgmyBase { double C, beta, Y; };
struct BsBase { double sigma2; };

using QsdBase = std::variant<NigBase, VgBase, MeixnerBase, CgmyBase, BsBase>;

inline Family family_of(const QsdBase& b) {
    return std::visit(
        [](const auto& v) -> Family {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigBase>) return Family::nig;
            else if constexpr (std::is_same_v<T, VgBase>) return Family::vg;
            else if constexpr (std::is_same_v<T, MeixnerBase>) return Family::meixner;
            else if constexpr (std::is_same_v<T, CgmyBase>) return Family::cgmy;
            else return Family::bs;
        },
        b);
}

// Open interval of admissible orders alpha for a symmetric base.
inline std::pair<double, double> admissible_interval(const QsdBase& b) {
    const double inf = std::numeric_limits<double>::infinity();
    const double pi = std::numbers::pi;
    return std::visit(
        [&](const auto& v) -> std::pair<double, double> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigBase>) {
                ConstraintChecker c;
                c.require(v.a > 0.5, "NIG base: a > 1/2 required");
                c.require(v.d > 0.0, "NIG base: d > 0 required");
                c.finish();
                return {-2.0 * (v.a - 1.0), 2.0 * v.a};
            } else if constexpr (std::is_same_v<T, VgBase>) {
                ConstraintChecker c;
                c.require(v.beta > 0.5, "VG base: beta > 1/2 required");
                c.require(v.C > 0.0, "VG base: C > 0 required");
                c.finish();
                return {-2.0 * (v.beta - 1.0), 2.0 * v.beta};
            } else if constexpr (std::is_same_v<T, MeixnerBase>) {
                ConstraintChecker c;
                c.require(v.b > -pi && v.b < pi && v.b != 0.0,
                          "Meixner base: b in (-pi, pi), b != 0 required");
                c.require(v.d > 0.0, "Meixner base: d > 0 required");
                c.finish();
                if (v.b > 0.0) return {-inf, -2.0 * v.b / (pi - v.b)};  // case (M1)
                return {-2.0 * v.b / (pi - v.b), inf};                  // case (M2)
            } else if constexpr (std::is_same_v<T, CgmyBase>) {
                ConstraintChecker c;
                c.require(v.beta > 0.5, "CGMY base: beta > 1/2 required");
                c.require(v.C > 0.0, "CGMY base: C > 0 required");
                c.require(v.Y < 2.0 && v.Y != 0.0 && v.Y != 1.0,
                          "CGMY base: Y < 2, Y not in {0, 1} required");
                c.finish();
                return {-2.0 * (v.beta - 1.0), 2.0 * v.beta};
            } else {
                ConstraintChecker c;
                c.require(v.sigma2 > 0.0, "BS base: sigma2 > 0 required");
                c.finish();
                return {-inf, inf};
            }
        },
        b);
}

// A model family in its quasi-self-dual reparameterization. Construction
// enforces the admissible alpha interval, the Jensen sign exclusions, and
// m = -lambda; it does not require lambda to equal the calibrated value, so
// deliberately broken specs can be built for power checks.
struct QsdSpec {
    QsdBase base;
    double alpha;
    double lambda;
    double m;
};

inline QsdSpec make_qsd_spec(const QsdBase& base, double alpha, double lambda) {
    const auto [lo, hi] = admissible_interval(base);
    ConstraintChecker c;
    std::ostringstream os;
    os << "alpha = " << alpha << " outside the admissible interval (" << lo << ", " << hi << ")";
    c.require(alpha >= lo + kStripMargin && alpha <= hi - kStripMargin, os.str());
    c.require(!(lambda > 0.0 && alpha > 1.0),
              "excluded combination: lambda > 0 along with alpha > 1");
    c.require(!(lambda < 0.0 && alpha < 1.0 && alpha != 0.0),
              "excluded combination: lambda < 0 along with alpha < 1, alpha != 0");
    if (family_of(base) == Family::meixner) {
        c.require(alpha != 0.0, "Meixner QSD parameterization requires alpha != 0 when b != 0");
    }
    c.finish();
    return QsdSpec{base, alpha, lambda, -lambda};
}

inline ModelParams qsd_to_native(const QsdSpec& spec) {
    return std::visit(
        [&](const auto& v) -> ModelParams {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigBase>) {
                NigParams p{v.a, -0.5 * spec.alpha, v.d, spec.m};
                p.validate();
                return p;
            } else if constexpr (std::is_same_v<T, VgBase>) {
                VgParams p{v.C, v.beta - 0.5 * spec.alpha, v.beta + 0.5 * spec.alpha, spec.m};
                p.validate();
                return p;
            } else if constexpr (std::is_same_v<T, MeixnerBase>) {
                MeixnerParams p{-2.0 * v.b / spec.alpha, v.b, v.d, spec.m};
                p.validate();
                return p;
            } else if constexpr (std::is_same_v<T, CgmyBase>) {
                CgmyParams p{v.C, v.beta - 0.5 * spec.alpha, v.beta + 0.5 * spec.alpha, v.Y,
                             spec.m};
                p.validate();
                return p;
            } else {
                BsParams p{v.sigma2, spec.m};
                p.validate();
                return p;
            }
        },
        spec.base);
}

// ---------------------------------------------------------------------------
// Flat key-value serialization (CLI interchange format)
// ---------------------------------------------------------------------------

inline std::string format_params(const ModelParams& p) {
    std::ostringstream os;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigParams>) {
                os << "family=nig a=" << format_double(v.a) << " b=" << format_double(v.b)
                   << " d=" << format_double(v.d) << " m=" << format_double(v.m);
            } else if constexpr (std::is_same_v<T, VgParams>) {
                os << "family=vg C=" << format_double(v.C) << " G=" << format_double(v.G)
                   << " M=" << format_double(v.M) << " m=" << format_double(v.m);
            } else if constexpr (std::is_same_v<T, MeixnerParams>) {
                os << "family=meixner a=" << format_double(v.a) << " b=" << format_double(v.b)
                   << " d=" << format_double(v.d) << " m=" << format_double(v.m);
            } else if constexpr (std::is_same_v<T, CgmyParams>) {
                os << "family=cgmy C=" << format_double(v.C) << " G=" << format_double(v.G)
                   << " M=" << format_double(v.M) << " Y=" << format_double(v.Y)
                   << " m=" << format_double(v.m);
            } else {
                os << "family=bs sigma2=" << format_double(v.sigma2)
                   << " m=" << format_double(v.m);
            }
        },
        p);
    return os.str();
}

inline ModelParams parse_params(const std::string& text) {
    std::istringstream is(text);
    std::string tok, family;
    std::map<std::string, double> kv;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ValidationError("parse_params: expected key=value, got '" + tok + "'");
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "family") {
            family = val;
        } else {
            try {
                kv[key] = std::stod(val);
            } catch (const std::exception&) {
                throw ValidationError("parse_params: bad numeric value for '" + key + "'");
            }
        }
    }
    auto get = [&](const std::string& k, double dflt = std::numeric_limits<double>::quiet_NaN(),
                   bool required = true) {
        auto it = kv.find(k);
        if (it == kv.end()) {
            if (required) throw ValidationError("parse_params: missing parameter '" + k + "'");
            return dflt;
        }
        return it->second;
    };
    ModelParams out;
    if (family == "nig")
        out = NigParams{get("a"), get("b"), get("d"), get("m", 0.0, false)};
    else if (family == "vg")
        out = VgParams{get("C"), get("G"), get("M"), get("m", 0.0, false)};
    else if (family == "meixner")
        out = MeixnerParams{get("a"), get("b"), get("d"), get("m", 0.0, false)};
    else if (family == "cgmy")
        out = CgmyParams{get("C"), get("G"), get("M"), get("Y"), get("m", 0.0, false)};
    else if (family == "bs")
        out = BsParams{get("sigma2"), get("m", 0.0, false)};
    else
        throw ValidationError("parse_params: unknown family '" + family + "'");
    validate_params(out);
    return out;
}

}  // namespace qsd
