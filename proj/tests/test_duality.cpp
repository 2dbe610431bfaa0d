#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "qsd/duality.hpp"

using namespace qsd;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;

struct TestRng {
    std::uint64_t s = 0x853c49e6748fea9bULL;
    double uniform(double lo, double hi) {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        return lo + (hi - lo) * (static_cast<double>(s >> 11) * 0x1.0p-53);
    }
};

// interior sub-range of the admissible interval, for random draws that keep
// the quadrature well away from the integrability endpoints
std::pair<double, double> interior(const QsdBase& base, double frac = 0.12) {
    auto [lo, hi] = admissible_interval(base);
    if (std::isinf(lo) && std::isinf(hi)) return {-5.0, 5.0};
    if (std::isinf(lo)) lo = hi - 12.0;
    if (std::isinf(hi)) hi = lo + 12.0;
    const double w = hi - lo;
    return {lo + frac * w, hi - frac * w};
}
}  // namespace

TEST_CASE("lambda_of_alpha hand-exact values") {
    // NIG(a=1, d=1)
    CHECK(lambda_of_alpha(NigBase{1.0, 1.0}, 0.0) == Approx(1.0).margin(1e-12));
    CHECK(lambda_of_alpha(NigBase{1.0, 1.0}, 1.0) == Approx(0.0).margin(1e-12));
    CHECK(lambda_of_alpha(NigBase{1.0, 1.0}, 2.0) == Approx(-1.0).margin(1e-12));
    // VG(C=1, beta=1.5)
    CHECK(lambda_of_alpha(VgBase{1.0, 1.5}, 0.0) ==
          Approx(std::log(9.0 / 5.0)).margin(1e-12));
    CHECK(lambda_of_alpha(VgBase{1.0, 1.5}, 1.0) == Approx(0.0).margin(1e-12));
    // Meixner(b=-pi/2, d=1): f(1) = 0, f(2) = -log 2 (the (M2) codomain floor)
    CHECK(lambda_of_alpha(MeixnerBase{-kPi / 2, 1.0}, 1.0) == Approx(0.0).margin(1e-12));
    CHECK(lambda_of_alpha(MeixnerBase{-kPi / 2, 1.0}, 2.0) ==
          Approx(-std::log(2.0)).margin(1e-12));
    // BS
    CHECK(lambda_of_alpha(BsBase{0.04}, 1.0) == 0.0);
    CHECK(lambda_of_alpha(BsBase{0.04}, 0.0) == Approx(0.02));
}

TEST_CASE("lambda_of_alpha rejects out-of-interval orders") {
    CHECK_THROWS_AS(lambda_of_alpha(NigBase{1.0, 1.0}, 2.1), ValidationError);
    CHECK_THROWS_AS(lambda_of_alpha(NigBase{1.0, 1.0}, 0.0 - 1e-12), ValidationError);
    CHECK_THROWS_AS(lambda_of_alpha(MeixnerBase{-kPi / 2, 1.0}, 0.5), ValidationError);
}

TEST_CASE("closed form vs quadrature oracle on alpha grids") {
    const std::vector<QsdBase> bases = {NigBase{1.0, 1.0}, VgBase{1.0, 1.5},
                                        MeixnerBase{-kPi / 2, 1.0}, CgmyBase{1.0, 1.5, 0.5}};
    for (const auto& base : bases) {
        const auto [lo, hi] = interior(base);
        for (int i = 0; i < 4; ++i) {
            const double alpha = lo + (hi - lo) * (i + 0.5) / 4.0;
            const QsdSpec spec = calibrate(base, alpha);
            const LevyTriplet t = triplet_of(qsd_to_native(spec));
            const double closed = lambda_of_alpha(base, alpha);
            const double quad = lambda_of_alpha_quadrature(t, alpha);
            INFO(family_name(family_of(base)) << " alpha=" << alpha);
            CHECK(std::abs(closed - quad) <= 1e-6 * std::max(1.0, std::abs(closed)));
        }
    }
}

TEST_CASE("lambda_of_alpha_quadrature on the degenerate BS triplet") {
    LevyTriplet t;
    t.sigma2 = 0.09;
    for (double alpha : {-1.0, 0.0, 1.0, 2.5}) {
        CHECK(lambda_of_alpha_quadrature(t, alpha) == Approx((1.0 - alpha) * 0.045).margin(1e-15));
    }
}

TEST_CASE("sign law: sign(lambda(alpha)) = sign(1 - alpha) for nice-form families") {
    const std::vector<QsdBase> bases = {NigBase{1.0, 1.0}, VgBase{1.0, 1.5},
                                        CgmyBase{1.0, 1.5, 0.5}, BsBase{0.04}};
    for (const auto& base : bases) {
        const auto [lo, hi] = interior(base, 0.02);
        const int n = 200;
        for (int i = 0; i <= n; ++i) {
            const double alpha = lo + (hi - lo) * i / n;
            if (std::abs(alpha - 1.0) < 1e-9) continue;  // the zero crossing itself
            const double lam = lambda_of_alpha(base, alpha);
            if (alpha < 1.0) CHECK(lam > 0.0);
            if (alpha > 1.0) CHECK(lam < 0.0);
        }
    }
}

TEST_CASE("strict monotonicity of the forward maps") {
    // NIG/VG/CGMY strictly decreasing on 1000-point grids
    for (const QsdBase& base :
         {QsdBase{NigBase{1.0, 1.0}}, QsdBase{VgBase{1.0, 1.5}}, QsdBase{CgmyBase{1.0, 1.5, 0.5}},
          QsdBase{CgmyBase{0.8, 1.3, 1.4}}}) {
        const auto [lo, hi] = interior(base, 0.01);
        const int n = 1000;
        double prev = lambda_of_alpha(base, lo);
        for (int i = 1; i <= n; ++i) {
            const double alpha = lo + (hi - lo) * i / n;
            const double lam = lambda_of_alpha(base, alpha);
            REQUIRE(lam < prev);
            prev = lam;
        }
    }
    // Meixner (M1): strictly increasing
    {
        const MeixnerBase base{1.0, 0.7};
        const double ub = -2.0 / (kPi - 1.0);
        const int n = 1000;
        double prev = lambda_of_alpha(base, ub - 12.0);
        for (int i = 1; i <= n; ++i) {
            const double alpha = ub - 12.0 + (12.0 - 1e-3) * i / n;
            const double lam = lambda_of_alpha(base, alpha);
            REQUIRE(lam > prev);
            prev = lam;
        }
    }
    // Meixner (M2): decreasing on (lo, 2], increasing on (2, inf), min at 2
    {
        const MeixnerBase base{-kPi / 2, 1.0};
        const double lb = kPi / (kPi + kPi / 2);
        const int n = 1000;
        double prev = lambda_of_alpha(base, lb + 1e-3);
        for (int i = 1; i <= n; ++i) {
            const double alpha = lb + 1e-3 + (2.0 - lb - 1e-3) * i / n;
            const double lam = lambda_of_alpha(base, alpha);
            REQUIRE(lam < prev);
            prev = lam;
        }
        prev = lambda_of_alpha(base, 2.0);
        for (int i = 1; i <= n; ++i) {
            const double alpha = 2.0 + 10.0 * i / n;
            const double lam = lambda_of_alpha(base, alpha);
            REQUIRE(lam > prev);
            prev = lam;
        }
        // minimum value 2d log(cos(b/2)) attained at alpha = 2
        const double floor_l = 2.0 * std::log(std::cos(-kPi / 4));
        CHECK(std::abs(lambda_of_alpha(base, 2.0) - floor_l) <= 1e-8);
        CHECK(lambda_of_alpha(base, 2.0 - 1e-4) > floor_l);
        CHECK(lambda_of_alpha(base, 2.0 + 1e-4) > floor_l);
    }
}

TEST_CASE("endpoint limits of the NIG forward map") {
    const NigBase base{1.3, 0.9};
    const double bound = base.d * std::sqrt(2.0 * base.a - 1.0);
    const auto [lo, hi] = admissible_interval(base);
    CHECK(std::abs(lambda_of_alpha(base, lo + 1e-6) - bound) < 1e-2);
    CHECK(std::abs(lambda_of_alpha(base, hi - 1e-6) + bound) < 1e-2);
}

TEST_CASE("alpha_of_lambda_closed hand-exact values") {
    const auto nig = NigBase{1.0, 1.0};
    CHECK(alpha_of_lambda_closed(nig, 1.0 - 1e-14).solutions[0].alpha == Approx(0.0).margin(1e-6));
    CHECK(alpha_of_lambda_closed(nig, 0.0).solutions[0].alpha == Approx(1.0).margin(1e-12));
    CHECK(alpha_of_lambda_closed(nig, -1.0 + 1e-14).solutions[0].alpha == Approx(2.0).margin(1e-6));
    const auto vg = VgBase{1.0, 1.5};
    CHECK(alpha_of_lambda_closed(vg, std::log(9.0 / 5.0)).solutions[0].alpha ==
          Approx(0.0).margin(1e-12));
    CHECK(alpha_of_lambda_closed(vg, 0.0).solutions[0].alpha == 1.0);  // the lambda = 0 case
    const auto bs = BsBase{0.04};
    CHECK(alpha_of_lambda_closed(bs, 0.01).solutions[0].alpha == Approx(0.5));
}

TEST_CASE("alpha_of_lambda_closed rejects lambda outside the image") {
    CHECK_THROWS_AS(alpha_of_lambda_closed(NigBase{1.0, 1.0}, 1.5), ValidationError);
    CHECK_THROWS_AS(alpha_of_lambda_closed(NigBase{1.0, 1.0}, -1.0), ValidationError);
    CHECK_THROWS_AS(alpha_of_lambda_closed(MeixnerBase{1.0, 1.0}, -0.2), ValidationError);
    const double floor_l = 2.0 * std::log(std::cos(-kPi / 4));
    CHECK_THROWS_AS(alpha_of_lambda_closed(MeixnerBase{-kPi / 2, 1.0}, floor_l - 1e-6),
                    ValidationError);
    CHECK_THROWS_AS(alpha_of_lambda_closed(CgmyBase{1.0, 1.5, 0.5}, 0.0), ValidationError);
}

TEST_CASE("Meixner (M2) non-unique band returns two residual-validated solutions") {
    const MeixnerBase base{-kPi / 2, 1.0};
    const double floor_l = 2.0 * std::log(std::cos(-kPi / 4));  // -log 2
    for (double lambda : {-0.5, -0.2, floor_l + 1e-3}) {
        const auto res = alpha_of_lambda_closed(base, lambda);
        REQUIRE(res.solutions.size() == 2);
        CHECK(res.solutions[0].branch == Branch::principal);
        CHECK(res.solutions[1].branch == Branch::upper);
        CHECK(res.solutions[0].alpha <= 2.0);
        CHECK(res.solutions[1].alpha > 2.0);
        for (double r : res.residuals) CHECK(std::abs(r) <= 1e-9);
    }
    // at the floor: the single solution alpha = 2
    const auto at_floor = alpha_of_lambda_closed(base, floor_l);
    REQUIRE(at_floor.solutions.size() == 1);
    CHECK(at_floor.solutions[0].alpha == Approx(2.0).margin(1e-7));
    // above 0: unique again
    CHECK(alpha_of_lambda_closed(base, 0.5).solutions.size() == 1);
}

TEST_CASE("Meixner (M1) closed inversion") {
    const MeixnerBase base{1.0, 0.7};
    for (double alpha : {-1.2, -3.0, -8.0}) {
        const double lam = lambda_of_alpha(base, alpha);
        const auto res = alpha_of_lambda_closed(base, lam);
        REQUIRE(res.solutions.size() == 1);
        CHECK(res.solutions[0].alpha == Approx(alpha).margin(1e-9));
    }
}

TEST_CASE("round-trip inversion: 100 random admissible alphas per family") {
    TestRng rng;
    const std::vector<QsdBase> bases = {NigBase{1.0, 1.0}, NigBase{1.7, 0.6}, VgBase{1.0, 1.5},
                                        VgBase{0.6, 2.2}, BsBase{0.07}};
    for (const auto& base : bases) {
        const auto [lo, hi] = interior(base, 0.001);
        for (int i = 0; i < 100; ++i) {
            const double alpha = rng.uniform(lo, hi);
            const double lam = lambda_of_alpha(base, alpha);
            const auto res = alpha_of_lambda_closed(base, lam);
            INFO(family_name(family_of(base)) << " alpha=" << alpha);
            REQUIRE(std::abs(res.solutions[0].alpha - alpha) <= 1e-9);
        }
    }
    // Meixner (M2): principal branch recovers alpha <= 2, upper recovers alpha > 2
    const MeixnerBase m2{-kPi / 2, 1.0};
    const double lb = kPi / (kPi + kPi / 2);
    for (int i = 0; i < 100; ++i) {
        const double alpha = rng.uniform(lb + 0.01, 12.0);
        const double lam = lambda_of_alpha(m2, alpha);
        const auto res = alpha_of_lambda_closed(m2, lam);
        bool matched = false;
        for (const auto& s : res.solutions) {
            if ((alpha <= 2.0 && s.branch == Branch::principal) ||
                (alpha > 2.0 && s.branch == Branch::upper))
                matched = std::abs(s.alpha - alpha) <= 1e-9;
        }
        INFO("meixner alpha=" << alpha << " lambda=" << lam);
        REQUIRE(matched);
    }
    // Meixner (M1)
    const MeixnerBase m1{0.8, 1.1};
    const double ub = -1.6 / (kPi - 0.8);
    for (int i = 0; i < 100; ++i) {
        const double alpha = rng.uniform(ub - 10.0, ub - 0.01);
        const double lam = lambda_of_alpha(m1, alpha);
        const auto res = alpha_of_lambda_closed(m1, lam);
        REQUIRE(std::abs(res.solutions[0].alpha - alpha) <= 1e-9);
    }
}

TEST_CASE("alpha_of_lambda_root agrees with the closed forms") {
    TestRng rng;
    const std::vector<QsdBase> bases = {NigBase{1.0, 1.0}, VgBase{1.0, 1.5},
                                        MeixnerBase{-kPi / 2, 1.0}, MeixnerBase{0.9, 0.8},
                                        BsBase{0.04}};
    int checked = 0;
    for (const auto& base : bases) {
        const auto [lo, hi] = interior(base, 0.02);
        for (int i = 0; i < 10; ++i) {
            const double alpha = rng.uniform(lo, hi);
            const double lam = lambda_of_alpha(base, alpha);
            const auto closed = alpha_of_lambda_closed(base, lam);
            const auto rooted = alpha_of_lambda_root(base, lam);
            REQUIRE(closed.solutions.size() == rooted.solutions.size());
            for (std::size_t k = 0; k < closed.solutions.size(); ++k) {
                CHECK(std::abs(closed.solutions[k].alpha - rooted.solutions[k].alpha) <= 1e-9);
                ++checked;
            }
        }
    }
    CHECK(checked >= 50);
}

TEST_CASE("alpha_of_lambda_root handles CGMY") {
    const CgmyBase base{1.0, 1.5, 0.5};
    // f(1) = 0 for the symmetric nice-form measure
    CHECK(alpha_of_lambda_root(base, 0.0).solutions[0].alpha == Approx(1.0).margin(1e-9));
    for (double alpha : {-0.5, 0.3, 1.9, 2.6}) {
        const double lam = lambda_of_alpha(base, alpha);
        CHECK(alpha_of_lambda_root(base, lam).solutions[0].alpha == Approx(alpha).margin(1e-9));
    }
    CHECK_THROWS_AS(alpha_of_lambda_root(base, 100.0), ValidationError);
}

TEST_CASE("alpha_of_lambda_root rejects lambda outside the NIG image") {
    CHECK_THROWS_AS(alpha_of_lambda_root(NigBase{1.0, 1.0}, 1.5), ValidationError);
}

TEST_CASE("gamma_drift special cases") {
    const LevyTriplet vg = triplet_of(ModelParams{VgParams{1.0, 1.5, 1.5, 0.0}});
    // alpha = 0: the integrand vanishes, result is -lambda
    CHECK(gamma_drift(0.0, 0.7, 0.0, vg.density) == Approx(-0.7).margin(1e-12));
    // Black-Scholes: sigma2 = 1, nu = 0, alpha = 1, lambda = 0 -> -1/2
    CHECK(gamma_drift(1.0, 0.0, 1.0, nullptr) == Approx(-0.5).margin(1e-15));
}

TEST_CASE("gamma_drift equals martingale_drift at the calibrated lambda") {
    for (const QsdBase& base : {QsdBase{NigBase{1.0, 1.0}}, QsdBase{VgBase{1.0, 1.5}},
                                QsdBase{CgmyBase{1.0, 1.5, 0.5}}}) {
        for (double frac : {0.3, 0.6}) {
            const auto [lo, hi] = interior(base);
            const double alpha = lo + (hi - lo) * frac;
            const QsdSpec spec = calibrate(base, alpha);
            const LevyTriplet t = triplet_of(qsd_to_native(spec));
            const double g1 = gamma_drift(alpha, spec.lambda, t.sigma2, t.density);
            const double g2 = martingale_drift(t.sigma2, t.density);
            INFO(family_name(family_of(base)) << " alpha=" << alpha);
            CHECK(std::abs(g1 - g2) <= 1e-8);
        }
    }
}

TEST_CASE("martingale_drift hand values") {
    CHECK(martingale_drift(1.0, nullptr) == Approx(-0.5).margin(1e-15));
    // calibrated NIG(a=1, d=1, alpha=1): m = -lambda = 0; kappa(1) = 0 by hand
    const ModelParams nig = NigParams{1.0, -0.5, 1.0, 0.0};
    CHECK(cumulant(nig, 1.0) == Approx(0.0).margin(1e-14));
    // and gamma from the triplet equals the martingale drift
    const LevyTriplet t = triplet_of(nig);
    CHECK(std::abs(t.gamma - martingale_drift(t.sigma2, t.density)) <= 1e-8);
}

TEST_CASE("check_measure_symmetry") {
    // QSD-parameterized models are exactly symmetric
    const QsdSpec spec = calibrate(NigBase{1.0, 1.0}, 0.5);
    const LevyTriplet t = triplet_of(qsd_to_native(spec));
    CHECK(check_measure_symmetry(t.density, 0.5, default_symmetry_grid()) <= 1e-10);
    // NIG with b != -alpha/2 deviates
    const ModelParams off = NigParams{1.0, 0.0, 1.0, 0.0};
    auto off_density = [off](double x) { return levy_density(off, x); };
    CHECK(check_measure_symmetry(off_density, 1.0, default_symmetry_grid()) > 1e-2);
    // alpha = 1 is the plain self-duality check: e^{x/2} nu(x) even
    const QsdSpec sd = calibrate(VgBase{1.0, 1.5}, 1.0);
    const LevyTriplet t2 = triplet_of(qsd_to_native(sd));
    CHECK(check_measure_symmetry(t2.density, 1.0, default_symmetry_grid()) <= 1e-10);
}

TEST_CASE("vanishing_integral") {
    for (const QsdBase& base : {QsdBase{NigBase{1.0, 1.0}}, QsdBase{VgBase{1.0, 1.5}},
                                QsdBase{MeixnerBase{-kPi / 2, 1.0}},
                                QsdBase{CgmyBase{1.0, 1.5, 0.5}}}) {
        const auto [lo, hi] = interior(base);
        const double alpha = lo + (hi - lo) * 0.4;
        const QsdSpec spec = calibrate(base, alpha);
        const LevyTriplet t = triplet_of(qsd_to_native(spec));
        INFO(family_name(family_of(base)) << " alpha=" << alpha);
        CHECK(std::abs(vanishing_integral(t.density, alpha)) <= 1e-8);
    }
    // alpha = 0 is identically zero
    const LevyTriplet t = triplet_of(ModelParams{VgParams{1.0, 1.5, 1.5, 0.0}});
    CHECK(vanishing_integral(t.density, 0.0) == 0.0);
    // asymmetric measure: VG(M=3, G=1.2) at alpha=1 is bounded away from zero
    const LevyTriplet ta = triplet_of(ModelParams{VgParams{1.0, 1.2, 3.0, 0.0}});
    CHECK(std::abs(vanishing_integral(ta.density, 1.0)) > 1e-3);
}

TEST_CASE("power_triplet") {
    const QsdSpec spec = calibrate(VgBase{1.0, 1.5}, 0.5);
    const ModelParams native = qsd_to_native(spec);
    const LevyTriplet t = triplet_of(native);
    // identity transform at alpha = 1, lambda = 0
    {
        const LevyTriplet id = power_triplet(t, 1.0, 0.0);
        CHECK(id.gamma == Approx(t.gamma).margin(1e-10));
        CHECK(id.sigma2 == t.sigma2);
        for (double x : {-1.5, -0.3, 0.4, 2.0})
            CHECK(id.density(x) == Approx(t.density(x)).epsilon(1e-13));
    }
    // sigma2 scales by alpha^2
    {
        LevyTriplet bs;
        bs.sigma2 = 0.04;
        bs.gamma = 0.1;
        const LevyTriplet z = power_triplet(bs, 2.0, 0.0);
        CHECK(z.sigma2 == Approx(0.16).margin(1e-15));
    }
    // cumulant consistency: kappa_Z(theta) = alpha lambda theta + kappa_X(alpha theta)
    {
        const double alpha = spec.alpha, lambda = spec.lambda;
        const LevyTriplet z = power_triplet(t, alpha, lambda);
        for (double theta : {0.3, 0.8, 1.0, 1.6}) {
            const double lhs = cumulant_from_triplet(z, theta);
            const double rhs = alpha * lambda * theta + cumulant(native, alpha * theta);
            INFO("theta=" << theta);
            CHECK(std::abs(lhs - rhs) <= 1e-8);
        }
    }
    CHECK_THROWS_AS(power_triplet(t, 0.0, 0.1), ValidationError);
}

TEST_CASE("cumulant_reflection_error") {
    const QsdSpec good = calibrate(NigBase{1.0, 1.0}, 0.5);
    const std::vector<double> grid = {0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9};
    CHECK(cumulant_reflection_error(good, grid) <= 1e-10);
    // z = 1/2 is the reflection fixed point
    CHECK(cumulant_reflection_error(good, {0.5}) == 0.0);
    // a miscalibrated lambda is visible
    const QsdSpec bad = make_qsd_spec(NigBase{1.0, 1.0}, 0.5, good.lambda + 0.01);
    CHECK(cumulant_reflection_error(bad, grid) > 1e-4);
    CHECK_THROWS_AS(cumulant_reflection_error(good, {1.5}), ValidationError);
}

TEST_CASE("stochastic_log_symmetry") {
    // chi is a self-inverse transform
    auto chi = [](double y) { return -y / (1.0 + y); };
    for (double y : {-0.9, -0.4, 0.1, 0.8, 3.0, 10.0})
        CHECK(chi(chi(y)) == Approx(y).epsilon(1e-12));

    const std::vector<std::pair<double, double>> intervals = {
        {0.1, 0.5}, {0.6, 1.4}, {-0.5, -0.15}};
    for (const QsdBase& base : {QsdBase{NigBase{1.0, 1.0}}, QsdBase{VgBase{1.0, 1.5}},
                                QsdBase{MeixnerBase{-kPi / 2, 1.0}},
                                QsdBase{CgmyBase{1.0, 1.5, 0.5}}}) {
        const auto [lo, hi] = interior(base);
        const double alpha = lo + (hi - lo) * 0.55;
        const QsdSpec spec = calibrate(base, alpha);
        const LevyTriplet t = triplet_of(qsd_to_native(spec));
        INFO(family_name(family_of(base)) << " alpha=" << alpha);
        CHECK(stochastic_log_symmetry(t.density, alpha, intervals) <= 1e-7);
    }
    // alpha = 1 is the Mellin-type condition with weight (1+y)^{-1}
    const QsdSpec sd = calibrate(VgBase{1.0, 1.5}, 1.0);
    const LevyTriplet t = triplet_of(qsd_to_native(sd));
    CHECK(stochastic_log_symmetry(t.density, 1.0, intervals) <= 1e-7);
    // invalid intervals
    CHECK_THROWS_AS(stochastic_log_symmetry(t.density, 1.0, {{-0.5, 0.5}}), ValidationError);
    CHECK_THROWS_AS(stochastic_log_symmetry(t.density, 1.0, {{-1.5, -0.5}}), ValidationError);
}

TEST_CASE("meixner_alpha0_lambda") {
    CHECK(meixner_alpha0_lambda(kPi / 2, 1.0) == Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(meixner_alpha0_lambda(kPi / 2, 2.0) ==
          Approx(2.0 * meixner_alpha0_lambda(kPi / 2, 1.0)).epsilon(1e-14));
    CHECK(meixner_alpha0_lambda(1e-4, 1.0) == Approx(0.0).margin(1e-8));
    CHECK(meixner_alpha0_lambda(0.3, 1.0) > 0.0);
    CHECK_THROWS_AS(meixner_alpha0_lambda(kPi, 1.0), ValidationError);
    CHECK_THROWS_AS(meixner_alpha0_lambda(0.5, -1.0), ValidationError);
}

TEST_CASE("full_report: calibrated specs pass every residual") {
    for (const QsdBase& base :
         {QsdBase{NigBase{1.0, 1.0}}, QsdBase{VgBase{1.0, 1.5}},
          QsdBase{MeixnerBase{-kPi / 2, 1.0}}, QsdBase{CgmyBase{1.0, 1.5, 0.5}},
          QsdBase{BsBase{0.04}}}) {
        const auto [lo, hi] = interior(base);
        const QsdSpec spec = calibrate(base, lo + (hi - lo) * 0.45);
        const DualityReport r = full_report(spec);
        INFO(family_name(family_of(base)) << ": " << to_text(r));
        CHECK(r.measure_symmetry_error <= 1e-10);
        CHECK(std::abs(r.drift_condition_residual) <= 1e-8);
        CHECK(std::abs(r.lambda_alpha_residual) <= 1e-8);
        CHECK(std::abs(r.martingale_residual_x) <= 1e-10);
        CHECK(std::abs(r.martingale_residual_z) <= 1e-10);
        CHECK(std::abs(r.vanishing_integral) <= 1e-8);
        CHECK(r.cumulant_reflection_error <= 1e-10);
    }
}

TEST_CASE("full_report: perturbed lambda shows up as its own residual") {
    const QsdSpec good = calibrate(VgBase{1.0, 1.5}, 0.5);
    const double eps = 0.01;
    const QsdSpec bad = make_qsd_spec(good.base, good.alpha, good.lambda + eps);
    const DualityReport r = full_report(bad);
    CHECK(r.lambda_alpha_residual == Approx(eps).margin(1e-6));
}

TEST_CASE("full_report rejects Jensen-excluded combinations") {
    CHECK_THROWS_AS(make_qsd_spec(NigBase{1.0, 1.0}, 1.5, 0.1), ValidationError);
}

TEST_CASE("inversion and report serialization") {
    const auto res = alpha_of_lambda_closed(MeixnerBase{-kPi / 2, 1.0}, -0.5);
    const std::string rows = to_csv_rows(res);
    CHECK(rows.find("principal") != std::string::npos);
    CHECK(rows.find("upper") != std::string::npos);
    CHECK(to_text(res).find("non-unique") != std::string::npos);
    const DualityReport r = full_report(calibrate(BsBase{0.04}, 0.5));
    CHECK(to_csv_row(r).find(',') != std::string::npos);
}
