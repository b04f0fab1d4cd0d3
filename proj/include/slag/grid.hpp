/*
 * grid.hpp — discretization of the neck B_delta x S^1 and the weighted
 * Sobolev norms.
 *
 * Coordinates: polar (r, theta) in the (x, y) plane with r log-spaced on
 * [delta, sqrt(delta)] (the inner scale needs resolution per scale, the
 * integrands vary like powers of delta/r), uniform periodic theta and
 * kappa.  Quadrature weight per node:
 *
 *   w = sqrt(det g~) * r * w_r * dtheta * dkappa
 *
 * with sqrt(det g~) from the induced graph metric (diagonal form) or from
 * the flat test metric.  Derivatives for the L^p_k norms are centered
 * differences in (log r, theta, kappa) mapped to Cartesian (x, y, kappa)
 * components; the metric-aware mode divides by the conformal scale
 * factors sqrt(mu), sqrt(mu), sqrt(A).  The two radial boundary rings are
 * excluded from derivative sums (recorded in output metadata).
 */
#pragma once

#include <slag/gluing.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace slag {

// ── Grid ─────────────────────────────────────────────────────────────────

class NeckGrid {
public:
    GluingConfig cfg;
    int n_r, n_theta, n_kappa;
    double kappa_length;
    bool flat_metric;

    std::vector<double> r_nodes;   // size n_r, log-spaced, endpoints included
    std::vector<double> w_r;       // radial trapezoid weights (operator assembly)
    std::vector<double> w_r_quad;  // radial Simpson-in-log-r weights (integrals)
    std::vector<double> mu;        // conformal factor 1 + delta^4/(4 r^4) per radial node
    double drho;                   // uniform spacing of log r
    double dtheta, dkappa;
    std::vector<double> weights;   // per-node quadrature weight (dvol_delta)

    NeckGrid(const GluingConfig& cfg_, int nr, int ntheta, int nkappa, bool flat,
             double kappa_len)
        : cfg(cfg_), n_r(nr), n_theta(ntheta), n_kappa(nkappa), kappa_length(kappa_len),
          flat_metric(flat) {
        if (nr < 8 || ntheta < 8 || nkappa < 8)
            throw std::invalid_argument("NeckGrid: resolutions must be >= 8");
        double ri = cfg.r_inner(), ro = cfg.r_outer();
        drho = std::log(ro / ri) / (nr - 1);
        r_nodes.resize(nr);
        for (int i = 0; i < nr; ++i) r_nodes[i] = ri * std::exp(drho * i);
        r_nodes.front() = ri;
        r_nodes.back() = ro;

        w_r.assign(nr, 0.0);
        w_r.front() = 0.5 * (r_nodes[1] - r_nodes[0]);
        w_r.back() = 0.5 * (r_nodes[nr - 1] - r_nodes[nr - 2]);
        for (int i = 1; i < nr - 1; ++i) w_r[i] = 0.5 * (r_nodes[i + 1] - r_nodes[i - 1]);

        // composite Simpson in log r for the integral measure (dr = r drho):
        // fourth order on the smooth metric densities, all weights positive;
        // an odd interval count gets a 3/8 block at the outer end
        {
            std::vector<double> c(nr, 0.0);
            int intervals = nr - 1;
            int simpson_end = (intervals % 2 == 0) ? intervals : intervals - 3;
            for (int i = 0; i + 2 <= simpson_end; i += 2) {
                c[i] += 1.0 / 3.0;
                c[i + 1] += 4.0 / 3.0;
                c[i + 2] += 1.0 / 3.0;
            }
            if (simpson_end < intervals) {
                c[simpson_end] += 3.0 / 8.0;
                c[simpson_end + 1] += 9.0 / 8.0;
                c[simpson_end + 2] += 9.0 / 8.0;
                c[simpson_end + 3] += 3.0 / 8.0;
            }
            w_r_quad.resize(nr);
            for (int i = 0; i < nr; ++i) w_r_quad[i] = c[i] * drho * r_nodes[i];
        }

        mu.resize(nr);
        double d4 = std::pow(cfg.delta, 4);
        for (int i = 0; i < nr; ++i) mu[i] = 1.0 + d4 / (4.0 * std::pow(r_nodes[i], 4));

        dtheta = 2.0 * M_PI / ntheta;
        dkappa = kappa_length / nkappa;

        weights.resize(size());
        for (int i = 0; i < nr; ++i)
            for (int j = 0; j < ntheta; ++j) {
                NeckPoint p = NeckPoint::polar(r_nodes[i], theta(j), 0.0);
                double sdet = flat ? std::sqrt(cfg.area_factor_A)
                                   : induced_metric(p, cfg).sqrt_det;
                double w = sdet * r_nodes[i] * w_r_quad[i] * dtheta * dkappa;
                for (int k = 0; k < nkappa; ++k) weights[index(i, j, k)] = w;
            }
    }

    std::size_t size() const {
        return static_cast<std::size_t>(n_r) * n_theta * n_kappa;
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n_theta + j) * n_kappa + k;
    }
    double theta(int j) const { return dtheta * j; }
    double kappa(int k) const { return dkappa * k; }
    NeckPoint point(int i, int j, int k) const {
        return NeckPoint::polar(r_nodes[i], theta(j), kappa(k));
    }
    double total_weight() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

using GridPtr = std::shared_ptr<const NeckGrid>;

inline GridPtr build_grid(const GluingConfig& cfg, int n_r, int n_theta, int n_kappa,
                          bool flat_metric = false, double kappa_length = 2.0 * M_PI) {
    return std::make_shared<const NeckGrid>(cfg, n_r, n_theta, n_kappa, flat_metric,
                                            kappa_length);
}

// ── Scalar fields ────────────────────────────────────────────────────────

struct ScalarField {
    GridPtr grid;
    std::vector<double> values;

    ScalarField() = default;
    explicit ScalarField(GridPtr g) : grid(std::move(g)), values(grid->size(), 0.0) {}

    static ScalarField zeros(GridPtr g) { return ScalarField(std::move(g)); }

    static ScalarField sample(GridPtr g, const std::function<double(const NeckPoint&)>& fn) {
        ScalarField f(g);
        for (int i = 0; i < g->n_r; ++i)
            for (int j = 0; j < g->n_theta; ++j)
                for (int k = 0; k < g->n_kappa; ++k)
                    f.values[g->index(i, j, k)] = fn(g->point(i, j, k));
        return f;
    }

    double& at(int i, int j, int k) { return values[grid->index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[grid->index(i, j, k)]; }

    double weighted_inner(const ScalarField& o) const {
        double s = 0.0;
        for (std::size_t n = 0; n < values.size(); ++n)
            s += grid->weights[n] * values[n] * o.values[n];
        return s;
    }
    double weighted_norm() const { return std::sqrt(weighted_inner(*this)); }
    double weighted_mean() const {
        double s = 0.0, w = 0.0;
        for (std::size_t n = 0; n < values.size(); ++n) {
            s += grid->weights[n] * values[n];
            w += grid->weights[n];
        }
        return s / w;
    }
    void project_out_mean() {
        double m = weighted_mean();
        for (double& v : values) v -= m;
    }

    ScalarField& operator+=(const ScalarField& o) {
        for (std::size_t n = 0; n < values.size(); ++n) values[n] += o.values[n];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        for (std::size_t n = 0; n < values.size(); ++n) values[n] -= o.values[n];
        return *this;
    }
    ScalarField& operator*=(double s) {
        for (double& v : values) v *= s;
        return *this;
    }
    ScalarField operator-(const ScalarField& o) const {
        ScalarField r = *this;
        r -= o;
        return r;
    }
    ScalarField operator+(const ScalarField& o) const {
        ScalarField r = *this;
        r += o;
        return r;
    }
    ScalarField operator*(double s) const {
        ScalarField r = *this;
        r *= s;
        return r;
    }
};

// ── Derivatives at a node ────────────────────────────────────────────────

// All first and second Cartesian derivatives of a grid field at node
// (i, j, k).  Differences are centered and uniform in (rho = log r, theta,
// kappa); radial boundaries use one-sided second-order stencils.  The
// polar-to-Cartesian transformation is exact.
struct NodeDerivs {
    double f;
    double fx, fy, fk;
    double fxx, fyy, fxy, fxk, fyk, fkk;

    double laplace2d() const { return fxx + fyy; }
};

namespace detail {

struct Stencil1D {
    // value, first and second derivative of a 1D sample triple/quad
    double d1, d2;
};

}  // namespace detail

inline NodeDerivs node_derivs(const ScalarField& f, int i, int j, int k) {
    const NeckGrid& g = *f.grid;
    auto val = [&](int ii, int jj, int kk) {
        jj = (jj % g.n_theta + g.n_theta) % g.n_theta;
        kk = (kk % g.n_kappa + g.n_kappa) % g.n_kappa;
        return f.at(ii, jj, kk);
    };

    double h = g.drho;
    // radial (rho) derivatives, one-sided at the boundary rings
    auto rho_d = [&](int jj, int kk) -> detail::Stencil1D {
        if (i == 0) {
            double f0 = val(0, jj, kk), f1 = val(1, jj, kk), f2 = val(2, jj, kk),
                   f3 = val(3, jj, kk);
            return {(-3 * f0 + 4 * f1 - f2) / (2 * h), (2 * f0 - 5 * f1 + 4 * f2 - f3) / (h * h)};
        }
        if (i == g.n_r - 1) {
            double f0 = val(i, jj, kk), f1 = val(i - 1, jj, kk), f2 = val(i - 2, jj, kk),
                   f3 = val(i - 3, jj, kk);
            return {(3 * f0 - 4 * f1 + f2) / (2 * h), (2 * f0 - 5 * f1 + 4 * f2 - f3) / (h * h)};
        }
        double fm = val(i - 1, jj, kk), f0 = val(i, jj, kk), fp = val(i + 1, jj, kk);
        return {(fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)};
    };

    double f0 = val(i, j, k);
    auto [f_rho, f_rhorho] = rho_d(j, k);
    double f_t = (val(i, j + 1, k) - val(i, j - 1, k)) / (2 * g.dtheta);
    double f_tt = (val(i, j + 1, k) - 2 * f0 + val(i, j - 1, k)) / (g.dtheta * g.dtheta);
    double f_k = (val(i, j, k + 1) - val(i, j, k - 1)) / (2 * g.dkappa);
    double f_kk = (val(i, j, k + 1) - 2 * f0 + val(i, j, k - 1)) / (g.dkappa * g.dkappa);

    double f_rhot = (rho_d(j + 1, k).d1 - rho_d(j - 1, k).d1) / (2 * g.dtheta);
    double f_rhok = (rho_d(j, k + 1).d1 - rho_d(j, k - 1).d1) / (2 * g.dkappa);
    double f_tk = (val(i, j + 1, k + 1) - val(i, j + 1, k - 1) - val(i, j - 1, k + 1) +
                   val(i, j - 1, k - 1)) /
                  (4 * g.dtheta * g.dkappa);

    double r = g.r_nodes[i];
    double fr = f_rho / r;
    double frr = (f_rhorho - f_rho) / (r * r);
    double frt = f_rhot / r;
    double frk = f_rhok / r;

    double c = std::cos(g.theta(j)), s = std::sin(g.theta(j));
    NodeDerivs d;
    d.f = f0;
    d.fx = c * fr - s * f_t / r;
    d.fy = s * fr + c * f_t / r;
    d.fk = f_k;
    d.fxx = c * c * frr - 2 * c * s * frt / r + s * s * f_tt / (r * r) + s * s * fr / r +
            2 * c * s * f_t / (r * r);
    d.fyy = s * s * frr + 2 * c * s * frt / r + c * c * f_tt / (r * r) + c * c * fr / r -
            2 * c * s * f_t / (r * r);
    d.fxy = c * s * frr + (c * c - s * s) * frt / r - c * s * f_tt / (r * r) - c * s * fr / r -
            (c * c - s * s) * f_t / (r * r);
    d.fxk = c * frk - s * f_tk / r;
    d.fyk = s * frk + c * f_tk / r;
    d.fkk = f_kk;
    return d;
}

// ── Weighted Sobolev norms ───────────────────────────────────────────────

enum class DerivativeMode {
    MetricAware,    // derivatives in the conformal orthonormal frame
    RawCoordinate,  // plain (x, y, kappa) coordinate derivatives
};

struct SobolevParts {
    // parts[j] = ( sum over |nu| = j of int |d^nu f|^p dvol )^{1/p}
    std::array<double, 3> parts{0.0, 0.0, 0.0};
    double total(double p, int k) const {
        double s = 0.0;
        for (int j = 0; j <= k; ++j) s += std::pow(parts[j], p);
        return std::pow(s, 1.0 / p);
    }
};

// Sum over multi-indices |nu| <= k of |d^nu f|^p against dvol_delta.
// Derivative sums skip the two radial boundary rings.  In MetricAware mode
// the x, y slots are divided by sqrt(mu) and the kappa slot by sqrt(A)
// (the conformal scale factors), matching the geometric meaning of the
// norm; RawCoordinate keeps plain coordinate partials.
inline SobolevParts sobolev_parts(const ScalarField& f, double p, int k,
                                  DerivativeMode mode = DerivativeMode::MetricAware) {
    if (p < 1.0) throw std::invalid_argument("sobolev_parts: p must be >= 1");
    if (k < 0 || k > 2) throw std::invalid_argument("sobolev_parts: k must be in {0,1,2}");
    const NeckGrid& g = *f.grid;
    double sqrtA = std::sqrt(g.cfg.area_factor_A);

    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < g.n_r; ++i) {
        bool boundary = (i == 0 || i == g.n_r - 1);
        double hxy = (mode == DerivativeMode::MetricAware) ? std::sqrt(g.mu[i]) : 1.0;
        double hk = (mode == DerivativeMode::MetricAware) ? sqrtA : 1.0;
        for (int j = 0; j < g.n_theta; ++j)
            for (int kk = 0; kk < g.n_kappa; ++kk) {
                double w = g.weights[g.index(i, j, kk)];
                double v = f.at(i, j, kk);
                s0 += w * std::pow(std::abs(v), p);
                if (k >= 1 && !boundary) {
                    NodeDerivs d = node_derivs(f, i, j, kk);
                    s1 += w * (std::pow(std::abs(d.fx / hxy), p) +
                               std::pow(std::abs(d.fy / hxy), p) +
                               std::pow(std::abs(d.fk / hk), p));
                    if (k >= 2) {
                        double hxx = hxy * hxy, hxk = hxy * hk, hkk2 = hk * hk;
                        s2 += w * (std::pow(std::abs(d.fxx / hxx), p) +
                                   std::pow(std::abs(d.fyy / hxx), p) +
                                   std::pow(std::abs(d.fkk / hkk2), p) +
                                   std::pow(std::abs(d.fxy / hxx), p) +
                                   std::pow(std::abs(d.fxk / hxk), p) +
                                   std::pow(std::abs(d.fyk / hxk), p));
                    }
                }
            }
    }
    SobolevParts out;
    out.parts[0] = std::pow(s0, 1.0 / p);
    out.parts[1] = std::pow(s1, 1.0 / p);
    out.parts[2] = std::pow(s2, 1.0 / p);
    return out;
}

inline double norm_lp_k(const ScalarField& f, double p, int k,
                        DerivativeMode mode = DerivativeMode::MetricAware) {
    return sobolev_parts(f, p, k, mode).total(p, k);
}

// ── Error norms ──────────────────────────────────────────────────────────

struct ErrorNorm {
    double l2;       // || Im xi (E1,E2,E3) ||_{L^2_delta}
    double l2_grad;  // first-derivative seminorm
    double l2_hess;  // second-derivative seminorm
};

inline ErrorNorm error_norm(const GluingConfig& cfg, const GridPtr& grid) {
    ScalarField f =
        ScalarField::sample(grid, [&](const NeckPoint& p) { return error_density(p, cfg); });
    SobolevParts parts = sobolev_parts(f, 2.0, 2);
    return {parts.parts[0], parts.parts[1], parts.parts[2]};
}

// ── CSV export ───────────────────────────────────────────────────────────

inline void write_field_csv(const ScalarField& f, std::ostream& os) {
    const NeckGrid& g = *f.grid;
    os << "r,theta,kappa,value,weight\n";
    char buf[160];
    for (int i = 0; i < g.n_r; ++i)
        for (int j = 0; j < g.n_theta; ++j)
            for (int k = 0; k < g.n_kappa; ++k) {
                std::snprintf(buf, sizeof buf, "%.16e,%.16e,%.16e,%.16e,%.16e\n", g.r_nodes[i],
                              g.theta(j), g.kappa(k), f.at(i, j, k),
                              g.weights[g.index(i, j, k)]);
                os << buf;
            }
}

inline void write_field_csv(const ScalarField& f, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_field_csv: cannot open " + path);
    write_field_csv(f, os);
}

}  // namespace slag
