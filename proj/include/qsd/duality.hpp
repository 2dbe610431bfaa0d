#pragma once

// Quasi self-duality machinery: symmetry and martingale condition checks,
// the forward map lambda(alpha), closed-form and root-found inversions
// alpha(lambda), the triplet transform of Z = alpha(lambda t + X), and the
// stochastic-logarithm duality conditions.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qsd/errors.hpp"
#include "qsd/format.hpp"
#include "qsd/models.hpp"
#include "qsd/numerics.hpp"

namespace qsd {

// ---------------------------------------------------------------------------
// Forward map lambda(alpha)
// ---------------------------------------------------------------------------

namespace detail {
// The closed-form forward map extends continuously to the interval closure,
// and the endpoint values are pinned by hand-exact identities; only the
// quadrature- and moment-backed operations need the interior margin.
inline void require_admissible(const QsdBase& base, double alpha) {
    const auto [lo, hi] = admissible_interval(base);
    if (!(alpha >= lo && alpha <= hi)) {
        std::ostringstream os;
        os << "alpha = " << alpha << " outside the admissible interval (" << lo << ", " << hi
           << ")";
        throw ValidationError(os.str());
    }
}
}  // namespace detail

// Carrying cost lambda for which both e^X and S^alpha are martingales, via
// the symmetric-base cumulant difference kappa0(1 - a/2) - kappa0(-a/2).
inline double lambda_of_alpha(const QsdBase& base, double alpha) {
    detail::require_admissible(base, alpha);
    return std::visit(
        [alpha](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            const double h = 0.5 * alpha;
            if constexpr (std::is_same_v<T, NigBase>) {
                return -v.d * (std::sqrt(v.a * v.a - (1.0 - h) * (1.0 - h)) -
                               std::sqrt(v.a * v.a - h * h));
            } else if constexpr (std::is_same_v<T, VgBase>) {
                return -v.C * (std::log1p(-1.0 / (v.beta + h)) + std::log1p(1.0 / (v.beta - h)));
            } else if constexpr (std::is_same_v<T, MeixnerBase>) {
                return 2.0 * v.d *
                       std::log(std::cos(0.5 * v.b) / std::cos(0.5 * v.b - v.b / alpha));
            } else if constexpr (std::is_same_v<T, CgmyBase>) {
                const double g = std::tgamma(-v.Y);
                return v.C * g *
                       (std::pow(v.beta - 1.0 + h, v.Y) + std::pow(v.beta + 1.0 - h, v.Y) -
                        std::pow(v.beta + h, v.Y) - std::pow(v.beta - h, v.Y));
            } else {
                return (1.0 - alpha) * 0.5 * v.sigma2;
            }
        },
        base);
}

// Independent oracle for the closed forms: quadrature of
//   (1-alpha) sigma^2/2 + int (e^x - x e^{alpha x/2} 1_{|x|<=1} - 1) nu(dx).
inline double lambda_of_alpha_quadrature(const LevyTriplet& t, double alpha,
                                         const QuadSpec& qs = QuadSpec{}) {
    double val = (1.0 - alpha) * 0.5 * t.sigma2;
    if (t.density) {
        auto integrand = [alpha](double x) {
            if (std::abs(x) > 1.0) return std::expm1(x);
            // e^x - 1 - x e^{ax/2} = (e^x - 1 - x) - x(e^{ax/2} - 1), both O(x^2)
            return expm1m(x) - x * std::expm1(0.5 * alpha * x);
        };
        val += integrate_levy(integrand, t.density, qs);
    }
    return val;
}

// ---------------------------------------------------------------------------
// Inversion alpha(lambda)
// ---------------------------------------------------------------------------

enum class Branch { principal, upper };

inline std::string branch_name(Branch b) {
    return b == Branch::principal ? "principal" : "upper";
}

struct InversionSolution {
    double alpha;
    Branch branch;
};

struct InversionResult {
    std::vector<InversionSolution> solutions;
    double target_lambda = 0.0;
    std::vector<double> residuals;
};

namespace detail {

inline InversionResult make_inversion_result(const QsdBase& base, double lambda,
                                             std::vector<InversionSolution> sols) {
    InversionResult out;
    out.target_lambda = lambda;
    for (const auto& s : sols) {
        const double resid = lambda_of_alpha(base, s.alpha) - lambda;
        if (!(std::abs(resid) <= 1e-9))
            throw NumericalError("inversion residual |f(alpha) - lambda| exceeds 1e-9", s.alpha,
                                 std::abs(resid));
        out.solutions.push_back(s);
        out.residuals.push_back(resid);
    }
    return out;
}

inline void require_lambda_in_image(double lambda, double lo, double hi, bool lo_closed,
                                    const std::string& what) {
    const bool ok = (lo_closed ? lambda >= lo : lambda > lo) && lambda < hi;
    if (!ok) {
        std::ostringstream os;
        os << "lambda = " << lambda << " outside the image interval " << (lo_closed ? "[" : "(")
           << lo << ", " << hi << ") of " << what;
        throw ValidationError(os.str());
    }
}

}  // namespace detail

// Closed-form inversions. NIG and VG are bijective; Meixner case (M1) is
// bijective, case (M2) returns two residual-validated solutions on the
// non-unique band (2d log cos(b/2), 0). The arccos is always the principal
// branch with range [0, pi].
inline InversionResult alpha_of_lambda_closed(const QsdBase& base, double lambda) {
    const double inf = std::numeric_limits<double>::infinity();
    return std::visit(
        [&](const auto& v) -> InversionResult {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, NigBase>) {
                const double bound = v.d * std::sqrt(2.0 * v.a - 1.0);
                detail::require_lambda_in_image(lambda, -bound, bound, false, "NIG f_{a,d}");
                const double alpha =
                    1.0 - lambda * std::sqrt(4.0 * v.a * v.a * v.d * v.d - v.d * v.d -
                                             lambda * lambda) /
                              (v.d * std::sqrt(lambda * lambda + v.d * v.d));
                return detail::make_inversion_result(base, lambda,
                                                     {{alpha, Branch::principal}});
            } else if constexpr (std::is_same_v<T, VgBase>) {
                // alpha = (-2 + 2 sqrt(q + 1 + beta^2 q^2)) / q with
                // q = e^{-lambda/C} - 1, rewritten without cancellation; the
                // q -> 0 limit gives the lambda = 0 value 1.
                const double q = std::expm1(-lambda / v.C);
                const double disc = std::sqrt(1.0 + q + v.beta * v.beta * q * q);
                const double alpha = 2.0 * (1.0 + v.beta * v.beta * q) / (1.0 + disc);
                return detail::make_inversion_result(base, lambda,
                                                     {{alpha, Branch::principal}});
            } else if constexpr (std::is_same_v<T, MeixnerBase>) {
                const double cb = std::cos(0.5 * v.b);
                const double scaled = cb * std::exp(-lambda / (2.0 * v.d));
                if (v.b > 0.0) {  // case (M1): image (0, inf)
                    detail::require_lambda_in_image(lambda, 0.0, inf, false, "Meixner (M1)");
                    const double alpha = 2.0 * v.b / (v.b - 2.0 * std::acos(scaled));
                    return detail::make_inversion_result(base, lambda,
                                                         {{alpha, Branch::principal}});
                }
                // case (M2): image [2d log cos(b/2), inf)
                const double floor_l = 2.0 * v.d * std::log(cb);
                detail::require_lambda_in_image(lambda, floor_l, inf, true, "Meixner (M2)");
                if (lambda == floor_l)  // minimum of f, attained at alpha = 2
                    return detail::make_inversion_result(base, lambda, {{2.0, Branch::principal}});
                const double ac = std::acos(std::min(scaled, 1.0));
                std::vector<InversionSolution> sols{
                    {2.0 * v.b / (v.b - 2.0 * ac), Branch::principal}};
                if (lambda < 0.0)  // non-unique band (2d log cos(b/2), 0)
                    sols.push_back({2.0 * v.b / (v.b + 2.0 * ac), Branch::upper});
                return detail::make_inversion_result(base, lambda, sols);
            } else if constexpr (std::is_same_v<T, CgmyBase>) {
                throw ValidationError(
                    "alpha_of_lambda_closed: no closed-form inverse for CGMY; use "
                    "alpha_of_lambda_root");
            } else {
                const double alpha = 1.0 - 2.0 * lambda / v.sigma2;
                return detail::make_inversion_result(base, lambda,
                                                     {{alpha, Branch::principal}});
            }
        },
        base);
}

// Bracketed root-finding inversion, justified by the monotonicity of the
// forward map (strictly decreasing for NIG/VG/CGMY/BS; Meixner (M1)
// increasing, (M2) decreasing on (lo, 2] and increasing on (2, inf)).
inline InversionResult alpha_of_lambda_root(const QsdBase& base, double lambda,
                                            double tol = 1e-12) {
    const auto [lo, hi] = admissible_interval(base);
    const Family fam = family_of(base);
    auto f = [&](double a) { return lambda_of_alpha(base, a); };

    if (fam == Family::bs) {
        const double sigma2 = std::get<BsBase>(base).sigma2;
        return detail::make_inversion_result(base, lambda,
                                             {{1.0 - 2.0 * lambda / sigma2, Branch::principal}});
    }

    if (fam == Family::meixner) {
        const auto& v = std::get<MeixnerBase>(base);
        const double inf = std::numeric_limits<double>::infinity();
        if (v.b > 0.0) {  // (M1): f increasing from 0+ (alpha -> -inf) to +inf
            detail::require_lambda_in_image(lambda, 0.0, inf, false, "Meixner (M1)");
            const double b_hi = hi - std::max(kStripMargin, 1e-12 * std::abs(hi));
            double b_lo = hi - 1.0;
            for (int i = 0; i < 200 && f(b_lo) > lambda; ++i) b_lo = hi - 2.0 * (hi - b_lo);
            const double alpha = find_root([&](double a) { return f(a) - lambda; }, b_lo, b_hi, tol);
            return detail::make_inversion_result(base, lambda, {{alpha, Branch::principal}});
        }
        // (M2): decreasing on (lo, 2], increasing on (2, inf) with minimum floor
        const double floor_l = 2.0 * v.d * std::log(std::cos(0.5 * v.b));
        detail::require_lambda_in_image(lambda, floor_l, inf, true, "Meixner (M2)");
        if (std::abs(lambda - floor_l) < 1e-14)
            return detail::make_inversion_result(base, lambda, {{2.0, Branch::principal}});
        std::vector<InversionSolution> sols;
        {
            double b_lo = lo + std::max(kStripMargin, 1e-12 * std::abs(lo));
            // f(lo+) = +inf; expand toward lo until the bracket straddles
            while (f(b_lo) < lambda) b_lo = lo + 0.5 * (b_lo - lo);
            sols.push_back({find_root([&](double a) { return f(a) - lambda; }, b_lo, 2.0, tol),
                            Branch::principal});
        }
        if (lambda < 0.0) {  // second solution on (2, inf)
            double b_hi = 4.0;
            for (int i = 0; i < 200 && f(b_hi) < lambda; ++i) b_hi *= 2.0;
            sols.push_back({find_root([&](double a) { return f(a) - lambda; }, 2.0, b_hi, tol),
                            Branch::upper});
        }
        return detail::make_inversion_result(base, lambda, sols);
    }

    // NIG / VG / CGMY: strictly decreasing on a finite interval
    const double w = hi - lo;
    const double m = std::max(kStripMargin, 1e-12 * w);
    const double a_lo = lo + m, a_hi = hi - m;
    const double f_hi = f(a_lo), f_lo = f(a_hi);  // decreasing: f(a_lo) >= f(a_hi)
    if (!(lambda <= f_hi && lambda >= f_lo)) {
        std::ostringstream os;
        os << "lambda = " << lambda << " outside the image interval (" << f_lo << ", " << f_hi
           << ") of the " << family_name(fam) << " forward map";
        throw ValidationError(os.str());
    }
    const double alpha = find_root([&](double a) { return f(a) - lambda; }, a_lo, a_hi, tol);
    return detail::make_inversion_result(base, lambda, {{alpha, Branch::principal}});
}

// Calibrated spec: lambda = lambda_of_alpha(alpha), m = -lambda.
inline QsdSpec calibrate(const QsdBase& base, double alpha) {
    return make_qsd_spec(base, alpha, lambda_of_alpha(base, alpha));
}

// ---------------------------------------------------------------------------
// Condition checks (Thm. "quasi PCS" conditions (i)/(ii)/(iii) and friends)
// ---------------------------------------------------------------------------

// Esscher-type drift: int_{|x|<=1} x (1 - e^{alpha x/2}) nu(dx) - alpha sigma^2/2 - lambda
inline double gamma_drift(double alpha, double lambda, double sigma2,
                          const std::function<double(double)>& density,
                          const QuadSpec& qs = QuadSpec{}) {
    double val = -0.5 * alpha * sigma2 - lambda;
    if (density) {
        auto integrand = [alpha](double x) {
            if (std::abs(x) > 1.0) return 0.0;
            return -x * std::expm1(0.5 * alpha * x);
        };
        val += integrate_levy(integrand, density, qs);
    }
    return val;
}

// Martingale drift of e^X: -sigma^2/2 + int (x 1_{|x|<=1} + 1 - e^x) nu(dx)
inline double martingale_drift(double sigma2, const std::function<double(double)>& density,
                               const QuadSpec& qs = QuadSpec{}) {
    double val = -0.5 * sigma2;
    if (density) {
        auto integrand = [](double x) {
            if (std::abs(x) > 1.0) return -std::expm1(x);
            return -expm1m(x);  // x - (e^x - 1)
        };
        val += integrate_levy(integrand, density, qs);
    }
    return val;
}

// Max relative deviation of e^{alpha x/2} nu(x) from e^{-alpha x/2} nu(-x)
// over a grid: condition (i) in its reflected form.
inline double check_measure_symmetry(const std::function<double(double)>& density, double alpha,
                                     const std::vector<double>& grid) {
    if (!density) return 0.0;
    double worst = 0.0;
    for (double x : grid) {
        if (x == 0.0) throw ValidationError("check_measure_symmetry: grid must avoid 0");
        const double lhs = std::exp(0.5 * alpha * x) * density(x);
        const double rhs = std::exp(-0.5 * alpha * x) * density(-x);
        const double dev = std::abs(lhs - rhs) / (std::abs(lhs) + 1e-300);
        worst = std::max(worst, dev);
    }
    return worst;
}

inline std::vector<double> default_symmetry_grid() {
    std::vector<double> g;
    for (double x = 0.05; x <= 3.0; x *= 1.5) {
        g.push_back(x);
        g.push_back(-x);
    }
    return g;
}

// int (e^{alpha x} - 1 - alpha x e^{alpha x/2} 1_{|x|<=1}) nu(dx); vanishes
// under the measure symmetry (i).
inline double vanishing_integral(const std::function<double(double)>& density, double alpha,
                                 const QuadSpec& qs = QuadSpec{}) {
    if (alpha == 0.0 || !density) return 0.0;
    auto integrand = [alpha](double x) {
        if (std::abs(x) > 1.0) return std::expm1(alpha * x);
        // e^{ax} - 1 - ax e^{ax/2} = (e^{ax} - 1 - ax) - ax(e^{ax/2} - 1)
        return expm1m(alpha * x) - alpha * x * std::expm1(0.5 * alpha * x);
    };
    return integrate_levy(integrand, density, qs);
}

// Triplet of Z = alpha (lambda t + X) in terms of the triplet of X.
inline LevyTriplet power_triplet(const LevyTriplet& t, double alpha, double lambda,
                                 const QuadSpec& qs = QuadSpec{}) {
    if (alpha == 0.0) throw ValidationError("power_triplet: alpha must be nonzero");
    LevyTriplet out;
    out.sigma2 = alpha * alpha * t.sigma2;
    double corr = 0.0;
    if (t.density) {
        const double inv = 1.0 / std::abs(alpha);
        // x (1_{|alpha x|<=1} - 1_{|x|<=1}) is supported between |x| = min(1, 1/|alpha|)
        // and max(1, 1/|alpha|); splitting there keeps the kinks on panel edges
        QuadSpec qs2 = qs;
        qs2.split_points = {-std::max(1.0, inv), -std::min(1.0, inv), 0.0, std::min(1.0, inv),
                            std::max(1.0, inv)};
        auto integrand = [alpha](double x) {
            const double i1 = std::abs(alpha * x) <= 1.0 ? 1.0 : 0.0;
            const double i2 = std::abs(x) <= 1.0 ? 1.0 : 0.0;
            return x * (i1 - i2);
        };
        corr = integrate_levy(integrand, t.density, qs2);
        const auto density = t.density;
        const double a = alpha;
        out.density = [density, a](double y) { return density(y / a) / std::abs(a); };
    }
    out.gamma = alpha * ((lambda + t.gamma) + corr);
    return out;
}

// max_z |kappa_Z(z) - kappa_Z(1-z)| for Z = alpha(lambda t + X) through the
// closed-form cumulants; the reflection z <-> 1-z fixes self-dual Z. The
// drift of X is pinned by the martingale condition (independently of the
// spec's lambda), so a miscalibrated lambda breaks the reflection.
inline double cumulant_reflection_error(const QsdSpec& spec, const std::vector<double>& z_grid) {
    if (spec.alpha == 0.0) return 0.0;
    const ModelParams native = qsd_to_native(spec);
    const double m_native = drift_param_of(native);
    auto sym = [&](double t) { return cumulant(native, t) - m_native * t; };
    const double m_mart = -sym(1.0);  // kappa_X(1) = 0 fixes the drift
    auto kz = [&](double z) {
        const double t = spec.alpha * z;
        return spec.alpha * spec.lambda * z + m_mart * t + sym(t);
    };
    double worst = 0.0;
    for (double z : z_grid) {
        if (!(z > 0.0 && z < 1.0))
            throw ValidationError("cumulant_reflection_error: z grid must lie in (0,1)");
        worst = std::max(worst, std::abs(kz(z) - kz(1.0 - z)));
    }
    return worst;
}

// Stochastic-logarithm symmetry: with Y the stochastic logarithm of e^X
// (nu^Y the image of nu^X under x -> e^x - 1), checks
//   nu^Y(B) = int_{chi(B)} (1+y)^alpha nu^Y(dy),  chi(y) = -y/(1+y)
// on intervals B, returning the max relative deviation. Interval measures
// are pulled back to x-space, where both sides are plain integrals of nu^X.
inline double stochastic_log_symmetry(const std::function<double(double)>& density_X, double alpha,
                                      const std::vector<std::pair<double, double>>& intervals,
                                      const QuadSpec& qs = QuadSpec{}) {
    if (!density_X) return 0.0;
    double worst = 0.0;
    for (const auto& [lo, hi] : intervals) {
        ConstraintChecker c;
        c.require(lo > -1.0, "interval must lie in (-1, inf)");
        c.require(lo < hi, "interval must be non-empty");
        c.require((lo > 0.0 && hi > 0.0) || (lo < 0.0 && hi < 0.0),
                  "interval must avoid 0 (one-signed)");
        c.finish();
        const double x_lo = std::log1p(lo), x_hi = std::log1p(hi);
        QuadResult qa = integrate_adaptive(density_X, x_lo, x_hi, qs.abs_tol, qs.rel_tol, 8);
        auto weighted = [&](double x) { return std::exp(alpha * x) * density_X(x); };
        QuadResult qb = integrate_adaptive(weighted, -x_hi, -x_lo, qs.abs_tol, qs.rel_tol, 8);
        if (!qa.converged || !qb.converged)
            throw NumericalError("stochastic_log_symmetry: interval quadrature did not converge",
                                 qa.value - qb.value, qa.error + qb.error);
        const double dev = std::abs(qa.value - qb.value) / (std::abs(qa.value) + 1e-300);
        worst = std::max(worst, dev);
    }
    return worst;
}

// The Meixner alpha = 0 case enforces b = 0; positive carrying costs then
// require lambda = -2d log(cos(a/2)).
inline double meixner_alpha0_lambda(double a, double d) {
    ConstraintChecker c;
    c.require(a > 0.0 && a < std::numbers::pi, "Meixner alpha=0: a in (0, pi) required");
    c.require(d > 0.0, "Meixner alpha=0: d > 0 required");
    c.finish();
    return -2.0 * d * std::log(std::cos(0.5 * a));
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

struct DualityReport {
    double measure_symmetry_error = 0.0;   // condition (i), reflected form
    double drift_condition_residual = 0.0; // gamma minus condition (ii) value
    double lambda_alpha_residual = 0.0;    // lambda minus condition (iii) integral
    double martingale_residual_x = 0.0;    // kappa_X(1)
    double martingale_residual_z = 0.0;    // kappa_Z(1), Z = alpha(lambda t + X)
    double vanishing_integral = 0.0;
    double cumulant_reflection_error = 0.0;
};

inline DualityReport full_report(const QsdSpec& spec, const QuadSpec& qs = QuadSpec{}) {
    DualityReport r;
    const ModelParams native = qsd_to_native(spec);
    const LevyTriplet trip = triplet_of(native, qs);

    r.measure_symmetry_error =
        check_measure_symmetry(trip.density, spec.alpha, default_symmetry_grid());
    r.drift_condition_residual =
        trip.gamma - gamma_drift(spec.alpha, spec.lambda, trip.sigma2, trip.density, qs);
    r.lambda_alpha_residual = spec.lambda - lambda_of_alpha_quadrature(trip, spec.alpha, qs);
    r.martingale_residual_x = cumulant(native, 1.0);
    r.martingale_residual_z =
        spec.alpha == 0.0 ? 0.0
                          : spec.alpha * spec.lambda + cumulant(native, spec.alpha);
    r.vanishing_integral = vanishing_integral(trip.density, spec.alpha, qs);
    r.cumulant_reflection_error =
        cumulant_reflection_error(spec, {0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.6, 0.7, 0.8, 0.9});
    return r;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline std::string csv_header(const DualityReport&) {
    return "measure_symmetry,drift_residual,lambda_alpha_residual,kappa_x_1,kappa_z_1,"
           "vanishing_integral,cumulant_reflection";
}

inline std::string to_csv_row(const DualityReport& r) {
    std::ostringstream os;
    os << format_double(r.measure_symmetry_error) << ',' << format_double(r.drift_condition_residual)
       << ',' << format_double(r.lambda_alpha_residual) << ','
       << format_double(r.martingale_residual_x) << ',' << format_double(r.martingale_residual_z)
       << ',' << format_double(r.vanishing_integral) << ','
       << format_double(r.cumulant_reflection_error);
    return os.str();
}

inline std::string to_text(const DualityReport& r) {
    std::ostringstream os;
    os << "measure symmetry error     " << format_double(r.measure_symmetry_error) << '\n'
       << "drift condition residual   " << format_double(r.drift_condition_residual) << '\n'
       << "lambda-alpha residual      " << format_double(r.lambda_alpha_residual) << '\n'
       << "kappa_X(1)                 " << format_double(r.martingale_residual_x) << '\n'
       << "kappa_Z(1)                 " << format_double(r.martingale_residual_z) << '\n'
       << "vanishing integral         " << format_double(r.vanishing_integral) << '\n'
       << "cumulant reflection error  " << format_double(r.cumulant_reflection_error) << '\n';
    return os.str();
}

inline std::string csv_header(const InversionResult&) {
    return "branch,alpha,target_lambda,residual";
}

inline std::string to_csv_rows(const InversionResult& r) {
    std::ostringstream os;
    for (std::size_t i = 0; i < r.solutions.size(); ++i) {
        os << branch_name(r.solutions[i].branch) << ',' << format_double(r.solutions[i].alpha)
           << ',' << format_double(r.target_lambda) << ',' << format_double(r.residuals[i]);
        if (i + 1 < r.solutions.size()) os << '\n';
    }
    return os.str();
}

inline std::string to_text(const InversionResult& r) {
    std::ostringstream os;
    if (r.solutions.size() > 1)
        os << "non-unique inversion: " << r.solutions.size() << " solutions\n";
    for (std::size_t i = 0; i < r.solutions.size(); ++i) {
        os << "alpha = " << format_double(r.solutions[i].alpha) << "  ["
           << branch_name(r.solutions[i].branch)
           << " branch, residual = " << format_double(r.residuals[i]) << "]\n";
    }
    return os.str();
}

}  // namespace qsd
