#include <catch2/catch_amalgamated.hpp>

#include <slag/gluing.hpp>

#include "oracles.hpp"

#include <cmath>
#include <complex>

using namespace slag;

namespace {

GluingConfig raw_cfg(double delta) { return GluingConfig(delta, CutoffKind::RawLog); }
GluingConfig smooth_cfg(double delta) { return GluingConfig(delta, CutoffKind::SmoothedClampedLog); }

NeckPoint random_neck_point(std::uint64_t& rng, const GluingConfig& cfg) {
    // log-uniform radius inside [delta, sqrt(delta)]
    double t = oracle::uniform(rng, 0.0, 1.0);
    double r = cfg.r_inner() * std::pow(cfg.r_outer() / cfg.r_inner(), t);
    double theta = oracle::uniform(rng, 0.0, 2 * M_PI);
    return NeckPoint::polar(r, theta, oracle::uniform(rng, 0.0, 2 * M_PI));
}

}  // namespace

TEST_CASE("config validation", "[gluing][errors]") {
    CHECK_THROWS_AS(GluingConfig(0.0), std::invalid_argument);
    CHECK_THROWS_AS(GluingConfig(1.0), std::invalid_argument);
    CHECK_THROWS_AS(GluingConfig(0.1, CutoffKind::RawLog, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(cutoff_beta(0.0, raw_cfg(0.1)), std::invalid_argument);
    CHECK_THROWS_AS(cutoff_beta(-1.0, raw_cfg(0.1)), std::invalid_argument);
}

TEST_CASE("raw-log cutoff closed-form values", "[gluing][cutoff]") {
    double delta = 0.01;
    auto cfg = raw_cfg(delta);
    CHECK(cutoff_beta(std::sqrt(delta), cfg).value == Catch::Approx(0.0).margin(1e-15));
    CHECK(cutoff_beta(std::pow(delta, 0.75), cfg).value == Catch::Approx(0.5).margin(1e-14));
    CHECK(cutoff_beta(delta, cfg).value == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("smoothed cutoff is clamped, C1 and monotone", "[gluing][cutoff]") {
    for (double delta : {0.1, 0.01, 0.001}) {
        auto cfg = smooth_cfg(delta);
        double ri = cfg.r_inner(), ro = cfg.r_outer();
        double w = 0.05 * (ro - ri);

        CHECK(cutoff_beta(delta / 2.0, cfg).value == 1.0);
        CHECK(cutoff_beta(delta / std::sqrt(2.0), cfg).value == 1.0);
        CHECK(cutoff_beta(2.0 * ro, cfg).value == 0.0);

        // agrees with raw-log away from the blend bands
        auto craw = raw_cfg(delta);
        for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            double r = (ri + w) + s * ((ro - w) - (ri + w));
            CHECK(cutoff_beta(r, cfg).value ==
                  Catch::Approx(cutoff_beta(r, craw).value).margin(1e-14));
        }

        // monotone and within [0,1]; derivative consistent with values (C1)
        double prev = 1.0 + 1e-15;
        const int n = 2000;
        for (int i = 0; i <= n; ++i) {
            double r = 0.5 * ri + (1.2 * ro - 0.5 * ri) * i / n;
            auto s = cutoff_beta(r, cfg);
            CHECK(s.value <= prev + 1e-13);
            CHECK(s.value >= -1e-15);
            CHECK(s.value <= 1.0 + 1e-15);
            prev = s.value;
            double h = 1e-7 * r;
            double fd = (cutoff_beta(r + h, cfg).value - cutoff_beta(r - h, cfg).value) / (2 * h);
            CHECK(std::abs(fd - s.dvalue) <= 1e-4 * std::max(1.0, std::abs(s.dvalue)) + 1e-4 / ri);
        }
    }
}

TEST_CASE("six-case chart", "[gluing][chart]") {
    double delta = 0.04;
    auto cfg = smooth_cfg(delta);
    double ro = cfg.r_outer();

    SECTION("outer region passes through untouched") {
        auto cp = chart_point(0.3, std::complex<double>(2 * ro, 0.0), ChartSide::FromL1, cfg);
        CHECK(cp.z1 == std::complex<double>(2 * ro, 0.0));
        CHECK(cp.z2 == std::complex<double>(0.0, 0.0));
    }

    SECTION("middle band uses the exact reciprocal formula") {
        double r = 1.1 * delta / std::sqrt(2.0);
        std::complex<double> z = std::polar(r, 0.7);
        auto cp = chart_point(0.0, z, ChartSide::FromL1, cfg);
        CHECK(std::abs(cp.z2 - delta * delta / (2.0 * std::conj(z))) <= 1e-15);
        CHECK(std::abs(cp.z1) * std::abs(cp.z2) == Catch::Approx(delta * delta / 2.0).epsilon(1e-12));
    }

    SECTION("gluing relation z1 * conj(z2) = beta delta^2 / 2 on the annulus") {
        std::uint64_t rng = 11ULL;
        for (int i = 0; i < 200; ++i) {
            double r = oracle::uniform(rng, delta, ro);
            std::complex<double> z = std::polar(r, oracle::uniform(rng, 0.0, 2 * M_PI));
            auto cp = chart_point(0.0, z, ChartSide::FromL1, cfg);
            double beta = cutoff_beta(r, cfg).value;
            CHECK(std::abs(cp.z1 * std::conj(cp.z2) - 0.5 * beta * delta * delta) <= 1e-15);
        }
    }

    SECTION("the two sides agree on the shared band") {
        std::complex<double> z = std::polar(0.8 * delta, 1.9);
        auto from1 = chart_point(0.0, z, ChartSide::FromL1, cfg);
        auto from2 = chart_point(0.0, from1.z2, ChartSide::FromL2, cfg);
        CHECK(std::abs(from1.z1 - from2.z1) <= 1e-14);
        CHECK(std::abs(from1.z2 - from2.z2) <= 1e-14);
    }

    SECTION("case-boundary continuity under the smoothed cutoff") {
        for (double thr : {ro, delta}) {
            std::complex<double> below = std::polar(thr * (1.0 - 1e-10), 0.4);
            std::complex<double> above = std::polar(thr * (1.0 + 1e-10), 0.4);
            auto a = chart_point(0.0, below, ChartSide::FromL1, cfg);
            auto b = chart_point(0.0, above, ChartSide::FromL1, cfg);
            CHECK(std::abs(a.z2 - b.z2) <= 1e-10);
        }
    }

    SECTION("excluded points raise domain errors") {
        CHECK_THROWS_AS(chart_point(0.0, std::complex<double>(0.0, 0.0), ChartSide::FromL1, cfg),
                        std::domain_error);
        CHECK_THROWS_AS(
            chart_point(0.0, std::complex<double>(0.4 * delta, 0.0), ChartSide::FromL2, cfg),
            std::domain_error);
    }
}

TEST_CASE("tangent frame matches the closed-form partials", "[gluing][frame]") {
    double delta = 0.05;
    auto cfg = smooth_cfg(delta);

    SECTION("flat outside the cutoff support") {
        NeckPoint p = NeckPoint::polar(2.0 * cfg.r_outer(), 0.3, 0.0);
        Frame3 fr = tangent_frame(p, cfg);
        for (int k = 0; k < 6; ++k) {
            CHECK(fr.E1[k] == (k == 0 ? 1.0 : 0.0));
            CHECK(fr.E2[k] == (k == 1 ? 1.0 : 0.0));
            CHECK(fr.E3[k] == (k == 2 ? 1.0 : 0.0));
        }
    }

    SECTION("beta == 1 region reproduces the inversion derivative") {
        auto cfg1 = GluingConfig(delta, CutoffKind::ConstantOne);
        NeckPoint p{0.03, 0.017, 0.0};
        Frame3 fr = tangent_frame(p, cfg1);
        double r2 = p.r2();
        double expected = delta * delta * (p.y * p.y - p.x * p.x) / (2.0 * r2 * r2);
        CHECK(fr.E1[4] == Catch::Approx(expected).epsilon(1e-13));
        CHECK(fr.E3[2] == 1.0);
    }

    SECTION("derivative slots agree with central differences of (u, v)") {
        std::uint64_t rng = 5ULL;
        for (int trial = 0; trial < 50; ++trial) {
            NeckPoint p = random_neck_point(rng, cfg);
            double h = 1e-6 * p.r();
            auto u_at = [&](double x, double y) {
                return graph_derivatives(NeckPoint{x, y, 0.0}, cfg).u;
            };
            auto v_at = [&](double x, double y) {
                return graph_derivatives(NeckPoint{x, y, 0.0}, cfg).v;
            };
            GraphDerivatives g = graph_derivatives(p, cfg);
            double ux_fd = (u_at(p.x + h, p.y) - u_at(p.x - h, p.y)) / (2 * h);
            double uy_fd = (u_at(p.x, p.y + h) - u_at(p.x, p.y - h)) / (2 * h);
            double vx_fd = (v_at(p.x + h, p.y) - v_at(p.x - h, p.y)) / (2 * h);
            double vy_fd = (v_at(p.x, p.y + h) - v_at(p.x, p.y - h)) / (2 * h);
            double scale = std::abs(g.u_x) + std::abs(g.u_y) + std::abs(g.v_y) + 1e-30;
            CHECK(std::abs(ux_fd - g.u_x) / scale <= 1e-6);
            CHECK(std::abs(uy_fd - g.u_y) / scale <= 1e-6);
            CHECK(std::abs(vx_fd - g.v_x) / scale <= 1e-6);
            CHECK(std::abs(vy_fd - g.v_y) / scale <= 1e-6);

            CHECK(tangent_frame(p, cfg).gram_det() > 0.0);
        }
    }

    SECTION("points at or left of the removed disk are rejected") {
        CHECK_THROWS_AS(tangent_frame(NeckPoint{0.4 * delta, 0.0, 0.0}, cfg), std::domain_error);
    }
}

TEST_CASE("Lagrangian property of the glued manifold", "[gluing][lagrangian][property]") {
    std::uint64_t rng = 101ULL;
    for (double delta : {1e-1, 1e-2, 1e-3}) {
        for (auto kind : {CutoffKind::RawLog, CutoffKind::SmoothedClampedLog}) {
            GluingConfig cfg(delta, kind);
            double worst = 0.0;
            for (int i = 0; i < 2000; ++i) {
                NeckPoint p = random_neck_point(rng, cfg);
                worst = std::max(worst, omega_restriction(tangent_frame(p, cfg)).max_abs());
            }
            CHECK(worst <= 1e-12);
        }
    }
}

TEST_CASE("non-radial test cutoff breaks the Lagrangian identity as predicted",
          "[gluing][lagrangian]") {
    // beta~(x,y) = x gives omega(E1,E2) = -delta^2 y / (2 r^2) from the
    // displayed formula; build the frame from hand-expanded partials of
    // u = delta^2 x^2/(2r^2), v = delta^2 x y/(2 r^2).
    double delta = 0.05;
    std::uint64_t rng = 23ULL;
    for (int trial = 0; trial < 20; ++trial) {
        double r = oracle::uniform(rng, delta, std::sqrt(delta));
        double th = oracle::uniform(rng, 0.0, 2 * M_PI);
        double x = r * std::cos(th), y = r * std::sin(th);
        double d2 = delta * delta, r2 = r * r, r4 = r2 * r2;

        // direct expansion of u = d2 x^2/(2 r^2), v = d2 x y/(2 r^2)
        double u_x = d2 * 0.5 * (2 * x / r2 - 2 * x * x * x / r4);
        double u_y = d2 * 0.5 * (-2 * x * x * y / r4);
        double v_x = d2 * 0.5 * (y / r2 - 2 * x * x * y / r4);
        double v_y = d2 * 0.5 * (x / r2 - 2 * x * y * y / r4);

        Frame3 fr;
        fr.E1 = Vec6(1, 0, 0, 0, u_x, v_x);
        fr.E2 = Vec6(0, 1, 0, 0, u_y, v_y);
        fr.E3 = Vec6(0, 0, 1, 0, 0, 0);
        double expected = -d2 * y / (2.0 * r2);
        CHECK(omega_restriction(fr).pairs[0] == Catch::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("error density closed forms", "[gluing][error]") {
    SECTION("zero where the cutoff is locally constant") {
        auto cfg = smooth_cfg(0.01);
        CHECK(error_density(NeckPoint::polar(0.01 / std::sqrt(2.0) * 0.99, 1.0, 0.0), cfg) == 0.0);
        CHECK(error_density(NeckPoint::polar(2.0 * cfg.r_outer(), 1.0, 0.0), cfg) == 0.0);
    }

    SECTION("frozen raw-log value at delta = 0.01, r = 0.05") {
        auto cfg = raw_cfg(0.01);
        double got = error_density(NeckPoint::polar(0.05, 0.3, 0.0), cfg);
        CHECK(got == Catch::Approx(-8.685889638065035e-3).epsilon(1e-12));
    }

    SECTION("two independent paths agree at 1000 random neck points") {
        static const auto xi = holomorphic_three_form();
        std::uint64_t rng = 31ULL;
        for (double delta : {0.1, 0.01}) {
            for (auto kind : {CutoffKind::RawLog, CutoffKind::SmoothedClampedLog}) {
                GluingConfig cfg(delta, kind);
                for (int i = 0; i < 500; ++i) {
                    NeckPoint p = random_neck_point(rng, cfg);
                    Frame3 fr = tangent_frame(p, cfg);
                    double via_form = xi.second.evaluate({fr.E1, fr.E2, fr.E3});
                    CHECK(std::abs(via_form - error_density(p, cfg)) <= 1e-12);
                }
            }
        }
    }

    SECTION("mirror symmetry about |z| = delta/sqrt(2)") {
        // in the exact middle bands both sides carry zero error, and the
        // paired radii r <-> delta^2/(2r) map the bands onto each other
        auto cfg = smooth_cfg(0.04);
        double delta = cfg.delta;
        for (double r : {0.55 * delta, 0.8 * delta, 0.95 * delta}) {
            double mirrored = delta * delta / (2.0 * r);
            CHECK(error_density(NeckPoint::polar(r, 0.2, 0.0), cfg) == 0.0);
            CHECK(error_density(NeckPoint::polar(mirrored, 0.2, 0.0), cfg) == 0.0);
        }
    }

    SECTION("gradient structure: u_y - v_x vanishes by finite differences") {
        auto cfg = smooth_cfg(0.03);
        std::uint64_t rng = 77ULL;
        for (int i = 0; i < 100; ++i) {
            NeckPoint p = random_neck_point(rng, cfg);
            double h = 1e-6 * p.r();
            auto g = [&](double x, double y) { return graph_derivatives(NeckPoint{x, y, 0.0}, cfg); };
            double uy_fd = (g(p.x, p.y + h).u - g(p.x, p.y - h).u) / (2 * h);
            double vx_fd = (g(p.x + h, p.y).v - g(p.x - h, p.y).v) / (2 * h);
            CHECK(std::abs(uy_fd - vx_fd) <= 1e-10 * std::max(1.0, std::abs(uy_fd)) + 1e-10);
        }
    }
}

TEST_CASE("induced metric", "[gluing][metric]") {
    SECTION("beta == 1 closed form") {
        GluingConfig cfg(0.1, CutoffKind::ConstantOne);
        MetricSample m = induced_metric(NeckPoint::polar(0.1, 0.9, 0.0), cfg);
        CHECK(m.sqrt_det == Catch::Approx(1.25).epsilon(1e-12));
        CHECK(m.g11 == Catch::Approx(1.25).epsilon(1e-12));
        CHECK(m.g22 == Catch::Approx(1.25).epsilon(1e-12));
    }

    SECTION("flat region") {
        GluingConfig cfg(0.1, CutoffKind::ConstantZero, 2.0);
        MetricSample m = induced_metric(NeckPoint::polar(0.2, 0.0, 0.0), cfg);
        CHECK(m.g11 == 1.0);
        CHECK(m.g22 == 1.0);
        CHECK(m.g33 == 2.0);
        CHECK(m.sqrt_det == Catch::Approx(std::sqrt(2.0)).epsilon(1e-14));
    }

    SECTION("determinant bound and diagonal consistency at random points") {
        std::uint64_t rng = 13ULL;
        for (double delta : {0.1, 0.01}) {
            auto cfg = smooth_cfg(delta);
            for (int i = 0; i < 500; ++i) {
                NeckPoint p = random_neck_point(rng, cfg);
                MetricSample m = induced_metric(p, cfg);
                CHECK(m.g11 >= 1.0);
                CHECK(m.g22 >= 1.0);
                CHECK(m.sqrt_det ==
                      Catch::Approx(std::sqrt(m.g11 * m.g22 * m.g33)).epsilon(1e-12));

                double r = p.r(), r2 = r * r;
                auto [beta, dbeta] = cutoff_beta(r, cfg);
                double bx = dbeta * p.x / r, by = dbeta * p.y / r;
                double q = std::pow(delta, 4) / (4.0 * r2 * r2);
                double bound = std::sqrt(cfg.area_factor_A) *
                               (1.0 + q * ((1.0 - p.x * bx) * (1.0 - p.x * bx) + p.y * p.y * bx * bx)) *
                               (1.0 + q * ((1.0 - p.y * by) * (1.0 - p.y * by) + p.x * p.x * by * by));
                CHECK(m.sqrt_det <= bound * (1.0 + 1e-12));
                (void)beta;
            }
        }
    }

    SECTION("exact form reports the dropped cross term") {
        auto cfg = smooth_cfg(0.05);
        NeckPoint p = NeckPoint::polar(1.5 * cfg.delta, 0.6, 0.0);
        MetricSample diag = induced_metric(p, cfg, MetricForm::Diagonal);
        MetricSample exact = induced_metric(p, cfg, MetricForm::Exact);
        CHECK(diag.g12 == 0.0);
        CHECK(exact.sqrt_det <= diag.sqrt_det);  // dropping -g12^2 overestimates
    }
}

TEST_CASE("Hessian determinant of the gluing potential", "[gluing][hessian]") {
    double delta = 0.07;

    SECTION("beta == 1 closed form") {
        GluingConfig cfg(delta, CutoffKind::ConstantOne);
        NeckPoint p = NeckPoint::polar(0.11, 2.2, 0.0);
        double r4 = std::pow(p.r2(), 2);
        CHECK(det_hess_G(p, cfg) ==
              Catch::Approx(-std::pow(delta, 4) / (4.0 * r4)).epsilon(1e-12));
    }

    SECTION("beta == 0 region vanishes") {
        GluingConfig cfg(delta, CutoffKind::ConstantZero);
        CHECK(det_hess_G(NeckPoint::polar(0.2, 0.1, 0.0), cfg) == 0.0);
    }

    SECTION("finite-difference Hessian agreement") {
        auto cfg = smooth_cfg(delta);
        std::uint64_t rng = 4242ULL;
        for (int i = 0; i < 50; ++i) {
            NeckPoint p = random_neck_point(rng, cfg);
            double h = 1e-6 * p.r();
            auto g = [&](double x, double y) { return graph_derivatives(NeckPoint{x, y, 0.0}, cfg); };
            double ux = (g(p.x + h, p.y).u - g(p.x - h, p.y).u) / (2 * h);
            double uy = (g(p.x, p.y + h).u - g(p.x, p.y - h).u) / (2 * h);
            double vx = (g(p.x + h, p.y).v - g(p.x - h, p.y).v) / (2 * h);
            double vy = (g(p.x, p.y + h).v - g(p.x, p.y - h).v) / (2 * h);
            double fd = ux * vy - uy * vx;
            double exact = det_hess_G(p, cfg);
            CHECK(std::abs(fd - exact) <= 1e-6 * std::max(std::abs(exact), 1e-12) + 1e-14);
        }
    }
}

TEST_CASE("mean curvature expansion", "[gluing][curvature]") {
    double delta = 0.04;
    auto cfg = smooth_cfg(delta);

    SECTION("straight curve with parallel frames has zero curvature") {
        auto straight = CurveModel::straight();
        Vec6 h = mean_curvature_leading(NeckPoint::polar(0.1, 0.2, 0.3), straight, cfg);
        CHECK(h.norm() == 0.0);
    }

    SECTION("circle model at r = sqrt(delta): leading term norm (1/R)/(1+delta)") {
        double R = 2.0;
        auto circle = CurveModel::circle(R, /*boundZ=*/0.0);
        NeckPoint p = NeckPoint::polar(cfg.r_outer(), 0.8, 1.1);
        Vec6 h = mean_curvature_leading(p, circle, cfg);
        CHECK(h.norm() == Catch::Approx((1.0 / R) / (1.0 + delta)).epsilon(1e-12));
    }

    SECTION("z1 = 0 is rejected") {
        auto circle = CurveModel::circle(1.0);
        CHECK_THROWS_AS(mean_curvature_leading(NeckPoint{0.0, 0.0, 0.0}, circle, cfg),
                        std::domain_error);
    }
}
