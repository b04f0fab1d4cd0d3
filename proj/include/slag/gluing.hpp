/*
 * gluing.hpp — local model of the approximate special Lagrangian H_delta.
 *
 * Two flat 3-planes L1, L2 in C^3 meet along the kappa-axis; the neck is
 * glued by z1 * conj(z2) = beta * delta^2 / 2.  On the L1 side the glued
 * manifold is the graph of the potential gradient
 *
 *   (u, v) = grad G,   u = delta^2 beta(r) x / (2 r^2),
 *                      v = delta^2 beta(r) y / (2 r^2),   r^2 = x^2 + y^2.
 *
 * This header carries the cutoff function, the six-case connected-sum
 * chart, the tangent frame of the graph, the induced metric, the
 * special-Lagrangian error density Im(xi)(E1,E2,E3) = u_x + v_y, the
 * Hessian determinant of G, and the leading mean-curvature expansion of
 * the curved-K model.  All quantities are exact closed forms of
 * (point, config); no discretization happens here.
 */
#pragma once

#include <slag/exterior.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>

namespace slag {

// ── Configuration ────────────────────────────────────────────────────────

enum class CutoffKind {
    RawLog,              // log(r/sqrt(delta)) / log(sqrt(delta)), unclamped
    SmoothedClampedLog,  // C^1 monotone, == 1 for r <= delta/sqrt(2), == 0 for r >= sqrt(delta)
    ConstantOne,         // test fixture: beta == 1 (no error band)
    ConstantZero,        // test fixture: beta == 0 (flat graph)
};

struct GluingConfig {
    double delta;
    CutoffKind cutoff = CutoffKind::SmoothedClampedLog;
    double area_factor_A = 1.0;  // the kappa-direction metric coefficient

    GluingConfig(double delta_, CutoffKind cutoff_ = CutoffKind::SmoothedClampedLog,
                 double area_factor = 1.0)
        : delta(delta_), cutoff(cutoff_), area_factor_A(area_factor) {
        if (!(delta > 0.0 && delta < 1.0))
            throw std::invalid_argument("GluingConfig: delta must lie in (0,1)");
        if (!(area_factor_A > 0.0) || !std::isfinite(area_factor_A))
            throw std::invalid_argument("GluingConfig: area factor must be positive");
    }

    double r_inner() const { return delta; }               // inner neck radius
    double r_outer() const { return std::sqrt(delta); }    // outer neck radius
};

struct NeckPoint {
    double x = 0.0;
    double y = 0.0;
    double kappa = 0.0;

    double r2() const { return x * x + y * y; }
    double r() const { return std::sqrt(r2()); }

    static NeckPoint polar(double r, double theta, double kappa) {
        return NeckPoint{r * std::cos(theta), r * std::sin(theta), kappa};
    }

    bool in_neck(const GluingConfig& cfg) const {
        double rr = r2();
        return rr >= cfg.delta * cfg.delta && rr <= cfg.delta;
    }
};

// ── Cutoff function ──────────────────────────────────────────────────────

struct CutoffSample {
    double value;
    double dvalue;  // d beta / d r
};

namespace detail {

inline CutoffSample raw_log_cutoff(double r, double delta) {
    double ls = std::log(std::sqrt(delta));  // negative for delta < 1
    return {std::log(r / std::sqrt(delta)) / ls, 1.0 / (r * ls)};
}

// Cubic Hermite on [a,b] from (ya, ma) to (yb, mb); returns value and slope.
inline CutoffSample hermite(double r, double a, double b, double ya, double ma, double yb,
                            double mb) {
    double h = b - a, s = (r - a) / h;
    double s2 = s * s, s3 = s2 * s;
    double value = ya * (2 * s3 - 3 * s2 + 1) + yb * (-2 * s3 + 3 * s2) +
                   h * ma * (s3 - 2 * s2 + s) + h * mb * (s3 - s2);
    double dvalue = (ya * (6 * s2 - 6 * s) + yb * (6 * s - 6 * s2)) / h + ma * (3 * s2 - 4 * s + 1) +
                    mb * (3 * s2 - 2 * s);
    return {value, dvalue};
}

}  // namespace detail

// Radial cutoff beta(r) and its derivative.  RawLog is the exact formula
// from the gluing construction; it equals 1 at r = delta and 0 at
// r = sqrt(delta) but exceeds [0,1] outside that annulus.  The smoothed
// variant clamps to [0,1] and replaces the two corners with C^1 cubic
// blends over bands of width 0.05 * (sqrt(delta) - delta).
inline CutoffSample cutoff_beta(double r, const GluingConfig& cfg) {
    if (!(r > 0.0)) throw std::invalid_argument("cutoff_beta: radius must be positive");
    switch (cfg.cutoff) {
        case CutoffKind::ConstantOne: return {1.0, 0.0};
        case CutoffKind::ConstantZero: return {0.0, 0.0};
        case CutoffKind::RawLog: return detail::raw_log_cutoff(r, cfg.delta);
        case CutoffKind::SmoothedClampedLog: {
            double ri = cfg.r_inner(), ro = cfg.r_outer();
            double w = 0.05 * (ro - ri);
            if (r <= ri) return {1.0, 0.0};
            if (r >= ro) return {0.0, 0.0};
            if (r < ri + w) {
                auto edge = detail::raw_log_cutoff(ri + w, cfg.delta);
                return detail::hermite(r, ri, ri + w, 1.0, 0.0, edge.value, edge.dvalue);
            }
            if (r > ro - w) {
                auto edge = detail::raw_log_cutoff(ro - w, cfg.delta);
                return detail::hermite(r, ro - w, ro, edge.value, edge.dvalue, 0.0, 0.0);
            }
            return detail::raw_log_cutoff(r, cfg.delta);
        }
    }
    throw std::logic_error("cutoff_beta: unknown cutoff kind");
}

// ── Six-case connected-sum chart ─────────────────────────────────────────

enum class ChartSide { FromL1, FromL2 };

struct ChartPoint {
    double kappa;
    std::complex<double> z1;
    std::complex<double> z2;
};

// The piecewise chart of L1 #_delta L2.  The input z is the coordinate on
// the side named by `side`; the other coordinate follows from
// z1 * conj(z2) = beta * delta^2 / 2 (beta == 1 in the middle bands).
// The construction is symmetric under (z1 <-> z2), so both sides share one
// case analysis.
inline ChartPoint chart_point(double kappa, std::complex<double> z, ChartSide side,
                              const GluingConfig& cfg) {
    double r = std::abs(z);
    double ro = cfg.r_outer();
    std::complex<double> partner;
    if (r > ro) {
        partner = 0.0;
    } else {
        if (r == 0.0)
            throw std::domain_error("chart_point: z = 0 lies on the excluded singular set");
        if (r <= 0.5 * cfg.delta)
            throw std::domain_error("chart_point: |z| <= delta/2 was removed by the gluing");
        double beta = (r <= cfg.delta) ? 1.0 : cutoff_beta(r, cfg).value;
        partner = beta * cfg.delta * cfg.delta / (2.0 * std::conj(z));
    }
    if (side == ChartSide::FromL1) return {kappa, z, partner};
    return {kappa, partner, z};
}

// ── Graph derivatives (the core closed forms) ────────────────────────────

// First partials of the graph functions u, v and the functions themselves.
// With radial beta: beta_x = beta'(r) x / r, and
//   u_x = d/dx [ d^2 beta x / (2 r^2) ]   (and cyclic).
// Note u_y == v_x exactly (the graph is a gradient: curl-free).
struct GraphDerivatives {
    double u, v;
    double u_x, u_y, v_x, v_y;

    double error_divergence() const { return u_x + v_y; }       // Im xi density
    double det_hess() const { return u_x * v_y - u_y * v_x; }   // det Hess G
};

inline GraphDerivatives graph_derivatives(const NeckPoint& p, const GluingConfig& cfg) {
    double r2 = p.r2();
    if (!(r2 > 0.0)) throw std::invalid_argument("graph_derivatives: r must be positive");
    double r = std::sqrt(r2);
    auto [beta, dbeta] = cutoff_beta(r, cfg);
    double d2 = cfg.delta * cfg.delta;
    double x = p.x, y = p.y;
    double r4 = r2 * r2;

    GraphDerivatives g;
    g.u = 0.5 * d2 * beta * x / r2;
    g.v = 0.5 * d2 * beta * y / r2;
    // u = (d2/2) beta(r) x / r^2:
    //   u_x = (d2/2) [ beta' x^2 / r^3 + beta (y^2 - x^2) / r^4 ]
    //   u_y = (d2/2) [ beta' x y / r^3 - 2 beta x y / r^4 ]
    g.u_x = 0.5 * d2 * (dbeta * x * x / (r2 * r) + beta * (y * y - x * x) / r4);
    g.u_y = 0.5 * d2 * (dbeta * x * y / (r2 * r) - 2.0 * beta * x * y / r4);
    g.v_x = g.u_y;
    g.v_y = 0.5 * d2 * (dbeta * y * y / (r2 * r) + beta * (x * x - y * y) / r4);
    return g;
}

// ── Tangent frame ────────────────────────────────────────────────────────

struct Frame3 {
    Vec6 E1, E2, E3;

    double gram_det() const {
        double a = E1.dot(E1), b = E1.dot(E2), c = E1.dot(E3);
        double d = E2.dot(E2), e = E2.dot(E3), f = E3.dot(E3);
        return a * (d * f - e * e) - b * (b * f - c * e) + c * (b * e - c * d);
    }
};

// Graph frame of H_delta on the L1 side:
//   E1 = e1 + u_x e5 + v_x e6,  E2 = e2 + u_y e5 + v_y e6,  E3 = e3.
inline Frame3 tangent_frame(const NeckPoint& p, const GluingConfig& cfg) {
    if (!(p.r() > 0.5 * cfg.delta))
        throw std::domain_error("tangent_frame: point outside the L1 graph region (r <= delta/2)");
    GraphDerivatives g = graph_derivatives(p, cfg);
    Frame3 fr;
    fr.E1 = Vec6(1, 0, 0, 0, g.u_x, g.v_x);
    fr.E2 = Vec6(0, 1, 0, 0, g.u_y, g.v_y);
    fr.E3 = Vec6(0, 0, 1, 0, 0, 0);
    return fr;
}

// omega restricted to the three frame pairs (E1,E2), (E1,E3), (E2,E3).
// For a radial cutoff every entry vanishes: the glued manifold is
// Lagrangian for every delta.
struct OmegaRestriction {
    std::array<double, 3> pairs;
    double max_abs() const {
        return std::max({std::abs(pairs[0]), std::abs(pairs[1]), std::abs(pairs[2])});
    }
};

inline OmegaRestriction omega_restriction(const Frame3& fr) {
    static const KForm w = standard_symplectic_form();
    return {{w.evaluate({fr.E1, fr.E2}), w.evaluate({fr.E1, fr.E3}), w.evaluate({fr.E2, fr.E3})}};
}

// ── Error density ────────────────────────────────────────────────────────

// Im(xi)(E1,E2,E3) = u_x + v_y, which for a radial cutoff collapses to
// (delta^2 / 2 r^2) * r * beta'(r); the beta-proportional part is the
// divergence of the (harmonic) inversion field and cancels identically.
// Zero wherever beta is locally constant.
inline double error_density(const NeckPoint& p, const GluingConfig& cfg) {
    double r = p.r();
    if (!(r > 0.0)) throw std::invalid_argument("error_density: r must be positive");
    auto [beta, dbeta] = cutoff_beta(r, cfg);
    (void)beta;
    return 0.5 * cfg.delta * cfg.delta * dbeta / r;
}

// ── Induced metric ───────────────────────────────────────────────────────

enum class MetricForm {
    Diagonal,  // the dx.dy cross term is dropped (the form the estimates use)
    Exact,     // full first fundamental form of the graph
};

struct MetricSample {
    double g11, g22, g33;
    double g12;       // zero in the Diagonal form
    double sqrt_det;  // sqrt(g33 (g11 g22 - g12^2))
};

inline MetricSample induced_metric(const NeckPoint& p, const GluingConfig& cfg,
                                   MetricForm form = MetricForm::Diagonal) {
    GraphDerivatives g = graph_derivatives(p, cfg);
    MetricSample m;
    m.g11 = 1.0 + g.u_x * g.u_x + g.v_x * g.v_x;
    m.g22 = 1.0 + g.u_y * g.u_y + g.v_y * g.v_y;
    m.g33 = cfg.area_factor_A;
    m.g12 = (form == MetricForm::Exact) ? (g.u_x * g.u_y + g.v_x * g.v_y) : 0.0;
    m.sqrt_det = std::sqrt(m.g33 * (m.g11 * m.g22 - m.g12 * m.g12));
    return m;
}

// ── Hessian determinant of the gluing potential ──────────────────────────

// det Hess G = u_x v_y - u_y v_x; equals -delta^4 / (4 r^4) where beta == 1
// and vanishes where beta == 0.
inline double det_hess_G(const NeckPoint& p, const GluingConfig& cfg) {
    return graph_derivatives(p, cfg).det_hess();
}

// ── Mean curvature of the curved-K model ─────────────────────────────────

using Complex3 = std::array<std::complex<double>, 3>;

// Converts a C^3 vector to the adapted real basis: z1 = x + iu pairs the
// (e1, e5) slots, z2 = y + iv pairs (e2, e6), z3 = kappa + i zeta pairs
// (e3, e4).
inline Vec6 to_vec6(const Complex3& z) {
    return Vec6(z[0].real(), z[1].real(), z[2].real(), z[2].imag(), z[0].imag(), z[1].imag());
}

// K modeled as a curve c(t) in C^3 with normal frames V1, V2; only second
// derivatives enter the displayed curvature expansion.  bound_Z stands in
// for the bounded function multiplying c'' in the delta^2 term.
struct CurveModel {
    std::function<Complex3(double)> c_dd;   // c''(t)
    std::function<Complex3(double)> v1_dd;  // V1''(t)
    std::function<Complex3(double)> v2_dd;  // V2''(t)
    double bound_Z = 1.0;

    CurveModel(std::function<Complex3(double)> c, std::function<Complex3(double)> v1,
               std::function<Complex3(double)> v2, double boundZ = 1.0)
        : c_dd(std::move(c)), v1_dd(std::move(v1)), v2_dd(std::move(v2)), bound_Z(boundZ) {
        if (!(bound_Z >= 0.0) || !std::isfinite(bound_Z))
            throw std::invalid_argument("CurveModel: bound_Z must be finite and nonnegative");
        if (!c_dd || !v1_dd || !v2_dd)
            throw std::invalid_argument("CurveModel: all second-derivative callbacks required");
    }

    // Unit-speed circle of radius R in the first complex plane; parallel
    // normal frames (V'' = 0).
    static CurveModel circle(double radius, double boundZ = 1.0) {
        if (!(radius > 0.0)) throw std::invalid_argument("CurveModel::circle: radius must be > 0");
        auto cdd = [radius](double t) -> Complex3 {
            double arg = t / radius;
            return {std::complex<double>(-std::cos(arg) / radius, 0.0),
                    std::complex<double>(-std::sin(arg) / radius, 0.0),
                    std::complex<double>(0.0, 0.0)};
        };
        auto zero = [](double) -> Complex3 { return {}; };
        return CurveModel(cdd, zero, zero, boundZ);
    }

    static CurveModel straight() {
        auto zero = [](double) -> Complex3 { return {}; };
        return CurveModel(zero, zero, zero, 0.0);
    }
};

// Leading terms of the mean curvature of the glued manifold over a curved K:
//   H = (c'' + z1 V1'') / (1 + |z1|^2)
//     + delta^2 ( -Z c'' + V2'' / (z1 (1 + |z1|^2)) )
// with the O(delta^4) remainder omitted.  z1 = x + iy, t = kappa.
inline Vec6 mean_curvature_leading(const NeckPoint& p, const CurveModel& curve,
                                   const GluingConfig& cfg) {
    std::complex<double> z1(p.x, p.y);
    if (std::abs(z1) == 0.0)
        throw std::domain_error("mean_curvature_leading: z1 = 0 (reciprocal term undefined)");
    double t = p.kappa;
    Complex3 cdd = curve.c_dd(t), v1dd = curve.v1_dd(t), v2dd = curve.v2_dd(t);
    double denom = 1.0 + std::norm(z1);
    double d2 = cfg.delta * cfg.delta;

    Complex3 h;
    for (int i = 0; i < 3; ++i) {
        h[i] = (cdd[i] + z1 * v1dd[i]) / denom +
               d2 * (-curve.bound_Z * cdd[i] + v2dd[i] / (z1 * denom));
    }
    return to_vec6(h);
}

}  // namespace slag
