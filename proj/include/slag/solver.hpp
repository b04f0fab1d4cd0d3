/*
 * solver.hpp — the nonlinear special-Lagrangian residual on graphs over
 * H_delta and the contraction iteration that removes it.
 *
 * Nodewise the equation for the graph potential F is
 *
 *   DG + (1 - det Hess G) * lap F + DG * (F_xy^2 - F_xx F_yy) = 0
 *
 * where DG = div grad G = u_x + v_y is the inhomogeneous error term
 * (evaluated through the exterior-algebra frame path, independently of
 * the closed-form density), lap is the analyst's flat Laplacian realized
 * by the assembled FlatLaplacian stiffness, and the Hessian of F is taken
 * in the Cartesian chart of the common grid.  The multiplier
 * m = 1 - det Hess G lies in [1, 1 + (1 + 1/|log sqrt(delta)|)/4] on
 * r >= delta and is folded into the operator before solving, so one
 * Poisson solve per step suffices:
 *
 *   W(h) = Q[ (DG + quad(h)) / m ]   (Q = discrete right inverse)
 *
 * The discrete Neumann neck carries a one-dimensional solvability
 * obstruction (the weighted mean of the right-hand side; the closed glued
 * manifold of the full construction has none), so the iteration solves the
 * equation in the mean-zero quotient and the per-step residual reported in
 * the trace is the quotient residual of the folded system.  The plain
 * nodewise residual, including its mean component, is what slag_residual
 * reports.
 */
#pragma once

#include <slag/operators.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace slag {

// ── Errors ───────────────────────────────────────────────────────────────

class ContractionFailure : public std::runtime_error {
public:
    ContractionFailure(const std::string& msg, double measured_constant, double first_norm,
                       double worst_ratio)
        : std::runtime_error(msg + " (measured C = " + std::to_string(measured_constant) +
                             ", ||W(0)|| = " + std::to_string(first_norm) +
                             ", worst step ratio = " + std::to_string(worst_ratio) + ")"),
          measured_constant(measured_constant), first_step_norm(first_norm),
          worst_ratio(worst_ratio) {}
    double measured_constant;
    double first_step_norm;
    double worst_ratio;
};

// ── Graph potentials ─────────────────────────────────────────────────────

// Scalar potential on the neck grid; the deformation is the graph of its
// gradient.  Gauge: zero weighted mean (potentials are defined up to a
// constant).
struct GraphPotential {
    ScalarField F;

    GraphPotential() = default;
    explicit GraphPotential(ScalarField f) : F(std::move(f)) {
        for (double v : F.values)
            if (!std::isfinite(v))
                throw std::invalid_argument("GraphPotential: non-finite value");
        F.project_out_mean();
    }
    static GraphPotential zero(const GridPtr& g) { return GraphPotential(ScalarField::zeros(g)); }
};

// ── The assembled system ─────────────────────────────────────────────────

struct SlagSystem {
    GridPtr grid;
    NeckOperator op;         // FlatLaplacian, Neumann radial BCs
    ScalarField inhom;       // Im xi(E1,E2,E3) via the frame evaluation
    ScalarField multiplier;  // 1 - det Hess G
    double multiplier_min = 0.0;
    double multiplier_max = 0.0;
};

inline SlagSystem make_system(const GluingConfig& cfg, const GridPtr& grid) {
    static const auto xi = holomorphic_three_form();
    SlagSystem sys{grid, assemble_operator(grid, OperatorKind::FlatLaplacian, RadialBC::Neumann),
                   ScalarField(grid), ScalarField(grid)};
    const NeckGrid& g = *grid;
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < g.n_r; ++i)
        for (int j = 0; j < g.n_theta; ++j) {
            NeckPoint p = g.point(i, j, 0);
            Frame3 fr = tangent_frame(p, cfg);
            double err = xi.second.evaluate({fr.E1, fr.E2, fr.E3});
            double m = 1.0 - det_hess_G(p, cfg);
            lo = std::min(lo, m);
            hi = std::max(hi, m);
            for (int k = 0; k < g.n_kappa; ++k) {
                sys.inhom.at(i, j, k) = err;
                sys.multiplier.at(i, j, k) = m;
            }
        }
    sys.multiplier_min = lo;
    sys.multiplier_max = hi;
    // det Hess G = (delta^4 / 4 r^4) beta (beta' r - beta) <= 0 for a
    // monotone radial cutoff, so m >= 1; the upper bound carries the beta'
    // term, |det| <= (1/4)(1 + r|beta'|) <= (1/4)(1 + 1/|log sqrt(delta)|)
    // on r >= delta (raw log; the smoothed blend overshoots it slightly).
    if (lo < 1.0 - 1e-12 || hi > 2.0)
        throw std::domain_error(
            "make_system: multiplier 1 - det Hess G outside [1, 2] (min " + std::to_string(lo) +
            ", max " + std::to_string(hi) + "); the fold-in step requires it positive and bounded");
    return sys;
}

// ── Residual ─────────────────────────────────────────────────────────────

struct ResidualReport {
    ScalarField residual_field;
    double l2_norm = 0.0;            // plain || R ||_{L^2_delta}
    double linear_part_norm = 0.0;   // || m * lap F ||
    double nonlinear_part_norm = 0.0;
    double inhomogeneous_norm = 0.0;
    double mean_component = 0.0;     // weighted mean of R (the solvability obstruction)
};

namespace detail {

// DG * (F_xy^2 - F_xx F_yy) nodewise
inline ScalarField quadratic_term(const ScalarField& F, const SlagSystem& sys) {
    const NeckGrid& g = *sys.grid;
    ScalarField q(sys.grid);
    for (int i = 0; i < g.n_r; ++i)
        for (int j = 0; j < g.n_theta; ++j)
            for (int k = 0; k < g.n_kappa; ++k) {
                NodeDerivs d = node_derivs(F, i, j, k);
                q.at(i, j, k) =
                    sys.inhom.at(i, j, k) * (d.fxy * d.fxy - d.fxx * d.fyy);
            }
    return q;
}

// m * lap F with the analyst sign (lap = -(d*d))
inline ScalarField linear_term(const ScalarField& F, const SlagSystem& sys) {
    ScalarField lin = sys.op.apply(F);
    for (std::size_t n = 0; n < lin.values.size(); ++n)
        lin.values[n] *= -sys.multiplier.values[n];
    return lin;
}

}  // namespace detail

inline ResidualReport slag_residual(const GraphPotential& pot, const SlagSystem& sys) {
    ScalarField lin = detail::linear_term(pot.F, sys);
    ScalarField quad = detail::quadratic_term(pot.F, sys);

    ResidualReport rep;
    rep.residual_field = sys.inhom + lin + quad;
    rep.l2_norm = rep.residual_field.weighted_norm();
    rep.linear_part_norm = lin.weighted_norm();
    rep.nonlinear_part_norm = quad.weighted_norm();
    rep.inhomogeneous_norm = sys.inhom.weighted_norm();
    rep.mean_component = rep.residual_field.weighted_mean();
    return rep;
}

// Convenience overload building the system on the fly.
inline ResidualReport slag_residual(const GraphPotential& pot, const GluingConfig& cfg,
                                    const GridPtr& grid) {
    SlagSystem sys = make_system(cfg, grid);
    return slag_residual(pot, sys);
}

// ── Linearization ────────────────────────────────────────────────────────

// The derivative of the residual map at F0: at F0 = 0 it is exactly
// h -> (1 - det Hess G) lap h; away from zero the quadratic term
// contributes its bilinear derivative.
struct LinearizedOp {
    const SlagSystem* sys;
    ScalarField F0;
    bool at_zero;

    ScalarField apply(const ScalarField& h) const {
        ScalarField out = detail::linear_term(h, *sys);
        if (!at_zero) {
            const NeckGrid& g = *sys->grid;
            for (int i = 0; i < g.n_r; ++i)
                for (int j = 0; j < g.n_theta; ++j)
                    for (int k = 0; k < g.n_kappa; ++k) {
                        NodeDerivs d0 = node_derivs(F0, i, j, k);
                        NodeDerivs dh = node_derivs(h, i, j, k);
                        out.at(i, j, k) += sys->inhom.at(i, j, k) *
                                           (2.0 * d0.fxy * dh.fxy - d0.fxx * dh.fyy -
                                            dh.fxx * d0.fyy);
                    }
        }
        return out;
    }
};

inline LinearizedOp linearization(const GraphPotential& F0, const SlagSystem& sys) {
    bool zero = true;
    for (double v : F0.F.values)
        if (v != 0.0) {
            zero = false;
            break;
        }
    return LinearizedOp{&sys, F0.F, zero};
}

// ── det Hess bound ───────────────────────────────────────────────────────

// int |det Hess G|^2 dvol_delta over the neck.
inline double det_hess_bound_check(const GluingConfig& cfg, const GridPtr& grid) {
    const NeckGrid& g = *grid;
    double total = 0.0;
    for (int i = 0; i < g.n_r; ++i)
        for (int j = 0; j < g.n_theta; ++j) {
            double dh = det_hess_G(g.point(i, j, 0), cfg);
            double per_kappa = 0.0;
            for (int k = 0; k < g.n_kappa; ++k) per_kappa += g.weights[g.index(i, j, k)];
            total += dh * dh * per_kappa;
        }
    return total;
}

// ── Contraction iteration ────────────────────────────────────────────────

// One application of the fixed-point map: solve the folded linear system
//   Delta_op F = P[(DG + quad(h)) / m]
// (P projects the weighted mean; the discrete Neumann obstruction).
inline GraphPotential contraction_step(const GraphPotential& h, const SlagSystem& sys) {
    ScalarField rhs = sys.inhom + detail::quadratic_term(h.F, sys);
    for (std::size_t n = 0; n < rhs.values.size(); ++n)
        rhs.values[n] /= sys.multiplier.values[n];
    PoissonResult sol = poisson_solve(sys.op, rhs, 1e-11);
    return GraphPotential(std::move(sol.f));
}

inline GraphPotential contraction_step(const GraphPotential& h, const GluingConfig& cfg,
                                       const GridPtr& grid) {
    SlagSystem sys = make_system(cfg, grid);
    return contraction_step(h, sys);
}

struct TraceRow {
    int iter;
    double step_norm;          // || h_k - h_{k-1} ||_{L^2_{2,delta}}
    double residual_l2;        // quotient residual of the folded system
    double contraction_ratio;  // step_norm / previous step_norm (0 for the first)
};

struct SolveResult {
    GraphPotential potential;
    ResidualReport final_report;          // plain nodewise residual at the fixed point
    std::vector<TraceRow> trace;
    double lambda1 = 0.0;                 // first nonzero eigenvalue of the operator
    double first_step_norm = 0.0;         // || W(0) ||_{L^2_{2,delta}}
    double measured_contraction_C = 0.0;  // worst ratio_k / (||h_k|| + ||h_{k-1}||)
    int iterations = 0;
};

namespace detail {

inline double quotient_residual(const ScalarField& F, const SlagSystem& sys) {
    // residual of Delta_op F = P[(DG + quad(F))/m] in the weighted norm
    ScalarField rhs = sys.inhom + quadratic_term(F, sys);
    for (std::size_t n = 0; n < rhs.values.size(); ++n)
        rhs.values[n] /= sys.multiplier.values[n];
    rhs.project_out_mean();
    ScalarField res = sys.op.apply(F) - rhs;
    res.project_out_mean();
    return res.weighted_norm();
}

}  // namespace detail

// Fixed-point iteration h_{k+1} = W(h_k) from h_0 = 0, stopping when the
// step norm (in L^2_{2,delta}) drops below tol.  Throws ContractionFailure
// when a measured step ratio reaches 1 (the contraction-mapping hypothesis
// fails for this system), and IterativeFailure when the converged quotient
// residual exceeds 10 tol / lambda1.
inline SolveResult solve_system(const SlagSystem& sys, int max_iters = 50, double tol = 1e-9) {
    const GridPtr& grid = sys.grid;
    SolveResult out;

    auto norm22 = [&](const ScalarField& f) { return norm_lp_k(f, 2.0, 2); };

    GraphPotential h = GraphPotential::zero(grid);
    double prev_step = 0.0, prev_norm = 0.0;

    out.trace.push_back({0, 0.0, detail::quotient_residual(h.F, sys), 0.0});

    for (int it = 1; it <= max_iters; ++it) {
        GraphPotential next = contraction_step(h, sys);
        double step = norm22(next.F - h.F);
        double hnorm = norm22(next.F);
        double ratio = (it >= 2 && prev_step > 0.0) ? step / prev_step : 0.0;
        if (it == 1) out.first_step_norm = step;
        if (it >= 2) {
            double denom = hnorm + prev_norm;
            if (denom > 0.0)
                out.measured_contraction_C = std::max(out.measured_contraction_C, ratio / denom);
            if (ratio >= 1.0)
                throw ContractionFailure("solve: contraction hypothesis failed",
                                         out.measured_contraction_C, out.first_step_norm, ratio);
        }
        h = std::move(next);
        out.trace.push_back({it, step, detail::quotient_residual(h.F, sys), ratio});
        out.iterations = it;
        prev_step = step;
        prev_norm = hnorm;
        if (step <= tol) break;
    }

    if (prev_step > tol)
        throw IterativeFailure("solve: fixed point not reached", prev_step, out.iterations);

    out.lambda1 = first_eigenvalue(sys.op).lambda1;
    double final_quotient = out.trace.back().residual_l2;
    if (final_quotient > 10.0 * tol / out.lambda1)
        throw IterativeFailure("solve: converged residual exceeds 10 tol / lambda1",
                               final_quotient, out.iterations);

    out.potential = h;
    out.final_report = slag_residual(h, sys);
    return out;
}

inline SolveResult solve(const GluingConfig& cfg, const GridPtr& grid, int max_iters = 50,
                         double tol = 1e-9) {
    return solve_system(make_system(cfg, grid), max_iters, tol);
}

}  // namespace slag
