/*
 * operators.hpp — the discrete Laplace–Beltrami operator on the neck and
 * the estimates built on it.
 *
 * The operator metric is the conformal neck form mu (dx^2 + dy^2) + A dk^2
 * with mu = 1 + delta^4 / (4 r^4) (the form the elliptic estimates use);
 * FlatLaplacian sets mu == 1.  Assembly is a finite-volume / Galerkin
 * stiffness on the tensor grid:
 *
 *   energy(f) = f^T S f  ~  int |grad f|_g^2 dvol_g,
 *   mass      = diagonal lumped dvol_g,
 *   Delta     = mass^{-1} S          (= d*d, positive semidefinite).
 *
 * Constants are in the kernel exactly (stiffness rows sum to zero), the
 * operator is self-adjoint in the mass inner product by construction, and
 * theta/kappa are periodic.  Radial boundary: natural Neumann, or
 * Dirichlet by constraining the two boundary rings.
 *
 * Solvers: Jacobi-preconditioned conjugate gradients for Poisson problems
 * (constants projected on the Neumann domain) and inverse power iteration
 * with constant-mode deflation for the first nonzero eigenvalue.
 */
#pragma once

#include <slag/grid.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace slag {

// ── Errors ───────────────────────────────────────────────────────────────

class IterativeFailure : public std::runtime_error {
public:
    IterativeFailure(const std::string& what, double residual, int iterations)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + " after " +
                             std::to_string(iterations) + " iterations)"),
          last_residual(residual), iterations(iterations) {}
    double last_residual;
    int iterations;
};

// ── Sparse symmetric matrix (CSR) ────────────────────────────────────────

class SparseSym {
public:
    explicit SparseSym(std::size_t n) : n_(n), diag_(n, 0.0), row_start_(n + 1, 0) {}

    // Accumulate the edge energy c (f_a - f_b)^2: diagonal += c on both
    // ends, off-diagonal -= c.  Call finalize() once after all edges.
    void add_edge(std::size_t a, std::size_t b, double c) {
        diag_[a] += c;
        diag_[b] += c;
        edges_.push_back({a, b, c});
    }

    void finalize() {
        std::vector<std::size_t> count(n_, 0);
        for (const auto& e : edges_) {
            ++count[e.a];
            ++count[e.b];
        }
        row_start_.assign(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i) row_start_[i + 1] = row_start_[i] + count[i];
        cols_.resize(row_start_[n_]);
        vals_.resize(row_start_[n_]);
        std::vector<std::size_t> fill(row_start_.begin(), row_start_.end() - 1);
        for (const auto& e : edges_) {
            cols_[fill[e.a]] = e.b;
            vals_[fill[e.a]++] = e.c;
            cols_[fill[e.b]] = e.a;
            vals_[fill[e.b]++] = e.c;
        }
        edges_.clear();
        edges_.shrink_to_fit();
    }

    std::size_t size() const { return n_; }
    double diagonal(std::size_t i) const { return diag_[i]; }

    // difference form: constants are annihilated exactly, no diagonal vs
    // off-diagonal cancellation
    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        for (std::size_t i = 0; i < n_; ++i) {
            double s = 0.0;
            for (std::size_t p = row_start_[i]; p < row_start_[i + 1]; ++p)
                s += vals_[p] * (x[i] - x[cols_[p]]);
            y[i] = s;
        }
    }

    double energy(const std::vector<double>& x) const {
        std::vector<double> y(n_);
        multiply(x, y);
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += x[i] * y[i];
        return s;
    }

    // dense copy for the small-grid oracle comparisons
    std::vector<double> dense() const {
        std::vector<double> m(n_ * n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            m[i * n_ + i] = diag_[i];
            for (std::size_t p = row_start_[i]; p < row_start_[i + 1]; ++p)
                m[i * n_ + cols_[p]] -= vals_[p];
        }
        return m;
    }

private:
    struct Edge {
        std::size_t a, b;
        double c;
    };
    std::size_t n_;
    std::vector<double> diag_;
    std::vector<Edge> edges_;
    std::vector<std::size_t> row_start_;
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
};

// ── The neck operator ────────────────────────────────────────────────────

enum class OperatorKind { LaplaceBeltrami, FlatLaplacian };
enum class RadialBC { Neumann, Dirichlet };

class NeckOperator {
public:
    GridPtr grid;
    OperatorKind kind;
    RadialBC bc;
    SparseSym stiffness;
    std::vector<double> mass;          // lumped dvol of the operator metric
    std::vector<std::uint8_t> fixed;   // 1 on constrained (Dirichlet) nodes

    NeckOperator(GridPtr g, OperatorKind kind_, RadialBC bc_)
        : grid(std::move(g)), kind(kind_), bc(bc_), stiffness(grid->size()) {
        const NeckGrid& gr = *grid;
        const GluingConfig& cfg = gr.cfg;
        double sqrtA = std::sqrt(cfg.area_factor_A);

        auto a_of = [&](double r) {
            if (kind == OperatorKind::FlatLaplacian) return 1.0;
            double d4 = std::pow(cfg.delta, 4);
            return 1.0 + d4 / (4.0 * r * r * r * r);
        };

        mass.assign(gr.size(), 0.0);
        for (int i = 0; i < gr.n_r; ++i) {
            double m = a_of(gr.r_nodes[i]) * gr.r_nodes[i] * sqrtA * gr.w_r[i] * gr.dtheta *
                       gr.dkappa;
            for (int j = 0; j < gr.n_theta; ++j)
                for (int k = 0; k < gr.n_kappa; ++k) mass[gr.index(i, j, k)] = m;
        }

        // radial edges: conductance r_mid sqrt(A) dtheta dkappa / dr
        // (the conformal factor cancels in the 2D block)
        for (int i = 0; i + 1 < gr.n_r; ++i) {
            double dr = gr.r_nodes[i + 1] - gr.r_nodes[i];
            double rm = 0.5 * (gr.r_nodes[i] + gr.r_nodes[i + 1]);
            double c = rm * sqrtA * gr.dtheta * gr.dkappa / dr;
            for (int j = 0; j < gr.n_theta; ++j)
                for (int k = 0; k < gr.n_kappa; ++k)
                    stiffness.add_edge(gr.index(i, j, k), gr.index(i + 1, j, k), c);
        }
        // theta edges: (sqrt(A)/r) w_r dkappa / dtheta, periodic
        for (int i = 0; i < gr.n_r; ++i) {
            double c = sqrtA / gr.r_nodes[i] * gr.w_r[i] * gr.dkappa / gr.dtheta;
            for (int j = 0; j < gr.n_theta; ++j)
                for (int k = 0; k < gr.n_kappa; ++k)
                    stiffness.add_edge(gr.index(i, j, k),
                                       gr.index(i, (j + 1) % gr.n_theta, k), c);
        }
        // kappa edges: a r w_r dtheta / (sqrt(A) dkappa), periodic
        for (int i = 0; i < gr.n_r; ++i) {
            double c = a_of(gr.r_nodes[i]) * gr.r_nodes[i] / sqrtA * gr.w_r[i] * gr.dtheta /
                       gr.dkappa;
            for (int j = 0; j < gr.n_theta; ++j)
                for (int k = 0; k < gr.n_kappa; ++k)
                    stiffness.add_edge(gr.index(i, j, k),
                                       gr.index(i, j, (k + 1) % gr.n_kappa), c);
        }
        stiffness.finalize();

        fixed.assign(gr.size(), 0);
        if (bc == RadialBC::Dirichlet)
            for (int j = 0; j < gr.n_theta; ++j)
                for (int k = 0; k < gr.n_kappa; ++k) {
                    fixed[gr.index(0, j, k)] = 1;
                    fixed[gr.index(gr.n_r - 1, j, k)] = 1;
                }
    }

    std::size_t size() const { return grid->size(); }

    void zero_fixed(std::vector<double>& x) const {
        if (bc == RadialBC::Neumann) return;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (fixed[i]) x[i] = 0.0;
    }

    // Delta f = mass^{-1} (stiffness f); Dirichlet nodes are held at zero.
    ScalarField apply(const ScalarField& f) const {
        ScalarField out(f.grid);
        std::vector<double> x = f.values;
        zero_fixed(x);
        stiffness.multiply(x, out.values);
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] /= mass[i];
        zero_fixed(out.values);
        return out;
    }

    double mass_inner(const std::vector<double>& a, const std::vector<double>& b) const {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!fixed[i]) s += mass[i] * a[i] * b[i];
        return s;
    }
    double mass_norm(const std::vector<double>& a) const { return std::sqrt(mass_inner(a, a)); }

    // weighted mean w.r.t. the operator mass (free nodes)
    double mean(const std::vector<double>& a) const {
        double s = 0.0, w = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!fixed[i]) {
                s += mass[i] * a[i];
                w += mass[i];
            }
        return s / w;
    }
    void project_mean(std::vector<double>& a) const {
        double m = mean(a);
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!fixed[i]) a[i] -= m;
    }
};

inline NeckOperator assemble_operator(const GridPtr& grid, OperatorKind kind,
                                      RadialBC bc = RadialBC::Neumann) {
    return NeckOperator(grid, kind, bc);
}

// ── Conjugate gradients ──────────────────────────────────────────────────

struct CgReport {
    int iterations = 0;
    double rel_residual = 0.0;
};

// Solves stiffness x = b with Jacobi preconditioning.  On the Neumann
// domain the system is consistent iff sum(b) = 0; constants are projected
// from the iterates to suppress kernel drift.  Dirichlet nodes are pinned
// to zero.
inline CgReport cg_solve(const NeckOperator& op, std::vector<double> b, std::vector<double>& x,
                         double tol = 1e-12, int max_iter = 100000) {
    std::size_t n = op.size();
    bool neumann = (op.bc == RadialBC::Neumann);
    auto project = [&](std::vector<double>& v) {
        if (!neumann) {
            // nothing: Dirichlet block is nonsingular
            return;
        }
        double s = 0.0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < n; ++i) {
            s += v[i];
            ++m;
        }
        s /= static_cast<double>(m);
        for (std::size_t i = 0; i < n; ++i) v[i] -= s;
    };

    std::vector<double> bb = std::move(b);
    if (!neumann)
        for (std::size_t i = 0; i < n; ++i)
            if (op.fixed[i]) bb[i] = 0.0;
    project(bb);

    if (x.size() != n) x.assign(n, 0.0);
    op.zero_fixed(x);

    std::vector<double> r(n), z(n), p(n), q(n);
    op.stiffness.multiply(x, q);
    op.zero_fixed(q);
    for (std::size_t i = 0; i < n; ++i) r[i] = bb[i] - q[i];
    project(r);

    double bnorm = 0.0;
    for (double v : bb) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) {
        x.assign(n, 0.0);
        return {0, 0.0};
    }

    auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i)
            out[i] = op.fixed[i] ? 0.0 : in[i] / op.stiffness.diagonal(i);
        project(out);
    };

    precond(r, z);
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

    CgReport rep;
    for (int it = 0; it < max_iter; ++it) {
        op.stiffness.multiply(p, q);
        op.zero_fixed(q);
        double pq = 0.0;
        for (std::size_t i = 0; i < n; ++i) pq += p[i] * q[i];
        if (pq <= 0.0) break;  // numerically semidefinite direction; bail to residual check
        double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if ((it + 1) % 64 == 0) project(r);
        double rnorm = 0.0;
        for (double v : r) rnorm += v * v;
        rnorm = std::sqrt(rnorm);
        rep.iterations = it + 1;
        rep.rel_residual = rnorm / bnorm;
        if (rep.rel_residual <= tol) return rep;
        precond(r, z);
        double rz_new = 0.0;
        for (std::size_t i = 0; i < n; ++i) rz_new += r[i] * z[i];
        double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    if (rep.rel_residual > tol)
        throw IterativeFailure("cg_solve: no convergence", rep.rel_residual, rep.iterations);
    return rep;
}

// ── First nonzero eigenvalue ─────────────────────────────────────────────

struct SpectralResult {
    double lambda1 = 0.0;
    ScalarField eigenfield;
    int iterations = 0;
    double residual = 0.0;
    RadialBC bc = RadialBC::Neumann;
};

namespace detail {

// Generalized pencil (S, M) with optional Dirichlet constraints; the
// eigensolver below works on this view so the exact tensor factorization
// of the neck operator (2D conformal block times the kappa circle) can be
// exploited: the full 3D pencil and its 2D marginal share the machinery.
struct Pencil {
    SparseSym S;
    std::vector<double> mass;
    std::vector<std::uint8_t> fixed;
    bool neumann;

    explicit Pencil(std::size_t n) : S(n), mass(n, 0.0), fixed(n, 0), neumann(true) {}

    std::size_t size() const { return mass.size(); }
    double inner(const std::vector<double>& a, const std::vector<double>& b) const {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!fixed[i]) s += mass[i] * a[i] * b[i];
        return s;
    }
    double norm(const std::vector<double>& a) const { return std::sqrt(inner(a, a)); }
    void project_mean(std::vector<double>& a) const {
        if (!neumann) return;
        double s = 0.0, w = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!fixed[i]) {
                s += mass[i] * a[i];
                w += mass[i];
            }
        s /= w;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!fixed[i]) a[i] -= s;
    }
    void zero_fixed(std::vector<double>& a) const {
        for (std::size_t i = 0; i < a.size(); ++i)
            if (fixed[i]) a[i] = 0.0;
    }
};

// Projected CG for (B - sigma I) y = b in mass-symmetrized coordinates,
// B = D^{-1/2} S D^{-1/2}, D = diag(mass).  For sigma below the smallest
// (deflated) eigenvalue the operator is SPD on the working subspace; the
// kernel direction u = D^{1/2} 1 is an exact eigenvector of B, so the
// Euclidean projection against u commutes with the iteration (Neumann).
// Returns false if the shifted operator is detected indefinite.
inline bool shifted_cg_sym(const Pencil& op, double sigma, const std::vector<double>& b,
                           std::vector<double>& y, double tol, int max_iter) {
    const std::size_t n = op.size();
    std::vector<double> u;
    if (op.neumann) {
        u.resize(n);
        double nn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = std::sqrt(op.mass[i]);
            nn += u[i] * u[i];
        }
        nn = std::sqrt(nn);
        for (double& v : u) v /= nn;
    }
    auto project = [&](std::vector<double>& v) {
        if (!op.neumann) return;
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += u[i] * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= d * u[i];
    };
    std::vector<double> tmp(n), q(n);
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = op.fixed[i] ? 0.0 : v[i] / std::sqrt(op.mass[i]);
        op.S.multiply(tmp, out);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = op.fixed[i] ? 0.0 : out[i] / std::sqrt(op.mass[i]) - sigma * v[i];
    };

    y.assign(n, 0.0);
    std::vector<double> r = b, z(n), p(n);
    project(r);
    double bnorm = 0.0;
    for (double v : r) bnorm += v * v;
    bnorm = std::sqrt(bnorm);
    if (bnorm == 0.0) return true;

    auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            if (op.fixed[i]) {
                out[i] = 0.0;
                continue;
            }
            double d0 = op.S.diagonal(i) / op.mass[i];
            double d = d0 - sigma;
            if (d < 0.1 * d0) d = 0.1 * d0;
            out[i] = in[i] / d;
        }
        project(out);
    };

    precond(r, z);
    p = z;
    double rz = 0.0;
    for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];
    for (int it = 0; it < max_iter; ++it) {
        apply(p, q);
        project(q);
        double pq = 0.0;
        for (std::size_t i = 0; i < n; ++i) pq += p[i] * q[i];
        if (pq <= 0.0) return false;  // sigma at or above the smallest eigenvalue
        double alpha = rz / pq;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if ((it + 1) % 64 == 0) project(r);
        double rn2 = 0.0;
        for (double v : r) rn2 += v * v;
        if (std::sqrt(rn2) <= tol * bnorm) return true;
        precond(r, z);
        double rz2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) rz2 += r[i] * z[i];
        double beta = rz2 / rz;
        rz = rz2;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    return true;  // accept the best iterate; the outer loop judges the residual
}

// cyclic Jacobi eigensolve for the tiny (block x block) Rayleigh-Ritz
// matrices; returns eigenvalues ascending, V columns the eigenvectors
inline void jacobi_eigen(std::vector<double>& a, int n, std::vector<double>& eval,
                         std::vector<double>& evec) {
    evec.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) evec[static_cast<std::size_t>(i) * n + i] = 1.0;
    auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    auto V = [&](int i, int j) -> double& { return evec[static_cast<std::size_t>(i) * n + j]; };
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(A(p, q)) < 1e-300) continue;
                double theta = 0.5 * (A(q, q) - A(p, p)) / A(p, q);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
    }
    eval.resize(n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int i, int j) { return A(i, i) < A(j, j); });
    std::vector<double> sorted_vec(evec.size());
    for (int c = 0; c < n; ++c) {
        eval[c] = A(order[c], order[c]);
        for (int r = 0; r < n; ++r)
            sorted_vec[static_cast<std::size_t>(r) * n + c] = V(r, order[c]);
    }
    evec.swap(sorted_vec);
}

struct BlockEigenResult {
    std::vector<double> lambdas;              // leading Ritz values, ascending
    std::vector<std::vector<double>> fields;  // matching Ritz vectors
    int iterations = 0;
    double residual = 0.0;  // strong residual of the leading pair
};

// Block inverse power iteration with constant-mode deflation and
// Rayleigh-Ritz extraction; once the Ritz values settle the solves switch
// to an adaptive shift-invert (S - sigma M)^{-1} with sigma trailing the
// leading Ritz value from below (Ritz values bound the true eigenvalue
// from above, and an indefiniteness detection backs the shift off).
inline BlockEigenResult block_inverse_iteration(const Pencil& op, double tol, int max_iter,
                                                std::uint64_t seed, int want = 1) {
    const std::size_t n = op.size();
    const int block = 6;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<std::vector<double>> X(block, std::vector<double>(n));
    for (auto& col : X) {
        for (double& v : col) v = dist(rng);
        op.zero_fixed(col);
        op.project_mean(col);
    }

    auto orthonormalize = [&](std::vector<std::vector<double>>& cols) {
        for (int j = 0; j < block; ++j) {
            for (int i = 0; i < j; ++i) {
                double proj = op.inner(cols[j], cols[i]);
                for (std::size_t k = 0; k < n; ++k) cols[j][k] -= proj * cols[i][k];
            }
            double nn = op.norm(cols[j]);
            if (!(nn > 0.0)) throw IterativeFailure("block_inverse_iteration: degenerate block", 1.0, 0);
            for (double& v : cols[j]) v /= nn;
        }
    };
    orthonormalize(X);

    BlockEigenResult out;
    std::vector<double> b(n), sx(n), eval, evec;
    double lambda = 0.0;
    double best = 1e300;
    int best_iter = 0;
    double sigma = 0.0;
    double residual = 1e300;
    const double plateau_cap = 1e-8;

    for (int it = 0; it < max_iter; ++it) {
        if (it >= 3 && lambda > 0.0)
            sigma = std::max(0.0, lambda * (1.0 - std::max(20.0 * residual / std::max(lambda, 1e-300), 1e-3)));

        for (int j = 0; j < block; ++j) {
            std::vector<double> y;
            for (;;) {
                for (std::size_t i = 0; i < n; ++i)
                    b[i] = op.fixed[i] ? 0.0 : std::sqrt(op.mass[i]) * X[j][i];
                std::vector<double> ysym;
                if (detail::shifted_cg_sym(op, sigma, b, ysym, 1e-12, 100000)) {
                    y.assign(n, 0.0);
                    for (std::size_t i = 0; i < n; ++i)
                        if (!op.fixed[i]) y[i] = ysym[i] / std::sqrt(op.mass[i]);
                    break;
                }
                sigma *= 0.5;  // shifted operator indefinite: back the shift off
                if (sigma < 1e-300) sigma = 0.0;
            }
            op.project_mean(y);
            X[j] = std::move(y);
        }
        orthonormalize(X);

        // Rayleigh-Ritz on the block
        std::vector<double> a(static_cast<std::size_t>(block) * block, 0.0);
        std::vector<std::vector<double>> SX(block, std::vector<double>(n));
        for (int j = 0; j < block; ++j) {
            op.S.multiply(X[j], SX[j]);
            op.zero_fixed(SX[j]);
        }
        for (int i = 0; i < block; ++i)
            for (int j = 0; j < block; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    if (!op.fixed[k]) s += X[i][k] * SX[j][k];
                a[static_cast<std::size_t>(i) * block + j] = s;
            }
        detail::jacobi_eigen(a, block, eval, evec);

        std::vector<std::vector<double>> Xr(block, std::vector<double>(n, 0.0));
        for (int c = 0; c < block; ++c)
            for (int r = 0; r < block; ++r) {
                double w = evec[static_cast<std::size_t>(r) * block + c];
                for (std::size_t k = 0; k < n; ++k) Xr[c][k] += w * X[r][k];
            }
        X.swap(Xr);
        lambda = eval[0];

        // strong residual of the leading Ritz pair, mass norm
        op.S.multiply(X[0], sx);
        op.zero_fixed(sx);
        double rnorm = 0.0, wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (op.fixed[i]) continue;
            double d = sx[i] / op.mass[i] - lambda * X[0][i];
            rnorm += op.mass[i] * d * d;
            wsum += op.mass[i] * X[0][i] * X[0][i];
        }
        residual = std::sqrt(rnorm / wsum);
        out.iterations = it + 1;
        if (residual <= tol) break;
        if (residual < 0.999 * best) {
            best = residual;
            best_iter = it;
        } else if (it - best_iter >= 15) {
            if (best <= plateau_cap) break;
            throw IterativeFailure("block_inverse_iteration: stalled above 1e-8", residual,
                                   out.iterations);
        }
    }
    if (residual > tol && residual > plateau_cap)
        throw IterativeFailure("block_inverse_iteration: no convergence", residual,
                               out.iterations);

    out.residual = residual;
    want = std::min(want, block);
    for (int j = 0; j < want; ++j) {
        out.lambdas.push_back(eval[j]);
        out.fields.push_back(X[j]);
    }
    return out;
}

// 2D marginal of the neck operator on the (r, theta) slice: the kappa
// direction separates exactly (the kappa conductance is the 2D mass over
// A dkappa^2 nodewise), so 3D eigenvalues are sums lambda_2d + lambda_kappa.
inline Pencil marginal_pencil_2d(const NeckOperator& op) {
    const NeckGrid& g = *op.grid;
    const GluingConfig& cfg = g.cfg;
    double sqrtA = std::sqrt(cfg.area_factor_A);
    auto a_of = [&](double r) {
        if (op.kind == OperatorKind::FlatLaplacian) return 1.0;
        double d4 = std::pow(cfg.delta, 4);
        return 1.0 + d4 / (4.0 * r * r * r * r);
    };
    std::size_t n2 = static_cast<std::size_t>(g.n_r) * g.n_theta;
    auto idx = [&](int i, int j) { return static_cast<std::size_t>(i) * g.n_theta + j; };

    Pencil p(n2);
    p.neumann = (op.bc == RadialBC::Neumann);
    for (int i = 0; i < g.n_r; ++i)
        for (int j = 0; j < g.n_theta; ++j)
            p.mass[idx(i, j)] = a_of(g.r_nodes[i]) * g.r_nodes[i] * sqrtA * g.w_r[i] * g.dtheta;
    for (int i = 0; i + 1 < g.n_r; ++i) {
        double dr = g.r_nodes[i + 1] - g.r_nodes[i];
        double rm = 0.5 * (g.r_nodes[i] + g.r_nodes[i + 1]);
        double c = rm * sqrtA * g.dtheta / dr;
        for (int j = 0; j < g.n_theta; ++j) p.S.add_edge(idx(i, j), idx(i + 1, j), c);
    }
    for (int i = 0; i < g.n_r; ++i) {
        double c = sqrtA / g.r_nodes[i] * g.w_r[i] / g.dtheta;
        for (int j = 0; j < g.n_theta; ++j)
            p.S.add_edge(idx(i, j), idx(i, (j + 1) % g.n_theta), c);
    }
    p.S.finalize();
    if (op.bc == RadialBC::Dirichlet)
        for (int j = 0; j < g.n_theta; ++j) {
            p.fixed[idx(0, j)] = 1;
            p.fixed[idx(g.n_r - 1, j)] = 1;
        }
    return p;
}

}  // namespace detail

// First nonzero eigenvalue of the neck operator.  The assembled stiffness
// factors exactly over the kappa circle, so the spectrum is
// { lambda_2d + (2 - 2 cos(q dkappa)) / (A dkappa^2) }; the 2D factor is
// solved by block inverse power iteration with constant-mode deflation and
// the minimizing combination is composed into a 3D eigenfield, whose
// strong residual on the full operator is what the result reports.
inline SpectralResult first_eigenvalue(const NeckOperator& op, double tol = 1e-10,
                                       int max_iter = 10000, std::uint64_t seed = 1234) {
    const NeckGrid& g = *op.grid;
    const bool neumann = (op.bc == RadialBC::Neumann);

    detail::Pencil pencil = detail::marginal_pencil_2d(op);
    detail::BlockEigenResult eig =
        detail::block_inverse_iteration(pencil, tol, max_iter, seed, 1);

    double lam_kappa1 =
        (2.0 - 2.0 * std::cos(g.dkappa)) / (g.cfg.area_factor_A * g.dkappa * g.dkappa);
    double lam_2d = eig.lambdas[0];  // first nonzero (Neumann) or ground (Dirichlet) 2D mode

    SpectralResult out;
    out.bc = op.bc;
    out.iterations = eig.iterations;
    out.eigenfield = ScalarField(op.grid);

    // Neumann: the competing modes are (2D first nonzero, q=0) and
    // (2D constant, q=1); Dirichlet has no constant mode, so the 2D ground
    // state with q=0 wins outright.
    bool kappa_mode_wins = neumann && lam_kappa1 <= lam_2d;
    if (kappa_mode_wins) {
        out.lambda1 = lam_kappa1;
        for (int i = 0; i < g.n_r; ++i)
            for (int j = 0; j < g.n_theta; ++j)
                for (int k = 0; k < g.n_kappa; ++k)
                    out.eigenfield.at(i, j, k) = std::cos(g.kappa(k));
    } else {
        out.lambda1 = lam_2d;
        for (int i = 0; i < g.n_r; ++i)
            for (int j = 0; j < g.n_theta; ++j) {
                double v = eig.fields[0][static_cast<std::size_t>(i) * g.n_theta + j];
                for (int k = 0; k < g.n_kappa; ++k) out.eigenfield.at(i, j, k) = v;
            }
    }

    // normalize in the operator mass inner product, re-center, and measure
    // the strong 3D residual of the composed field
    op.zero_fixed(out.eigenfield.values);
    if (neumann) op.project_mean(out.eigenfield.values);
    double nn = op.mass_norm(out.eigenfield.values);
    for (double& v : out.eigenfield.values) v /= nn;

    std::vector<double> sx(op.size());
    op.stiffness.multiply(out.eigenfield.values, sx);
    op.zero_fixed(sx);
    double rnorm = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < op.size(); ++i) {
        if (op.fixed[i]) continue;
        double d = sx[i] / op.mass[i] - out.lambda1 * out.eigenfield.values[i];
        rnorm += op.mass[i] * d * d;
        wsum += op.mass[i] * out.eigenfield.values[i] * out.eigenfield.values[i];
    }
    out.residual = std::sqrt(rnorm / wsum);
    if (out.residual > std::max(tol, 1e-8))
        throw IterativeFailure("first_eigenvalue: composed residual too large", out.residual,
                               out.iterations);
    return out;
}

// ── Poisson solves (the right inverse) ───────────────────────────────────

struct PoissonResult {
    ScalarField f;
    double projected_mean = 0.0;  // weighted mean removed from psi
    int iterations = 0;
    double residual = 0.0;
};

inline PoissonResult poisson_solve(const NeckOperator& op, const ScalarField& psi,
                                   double tol = 1e-10) {
    std::size_t n = op.size();
    std::vector<double> rhs = psi.values;
    PoissonResult out;
    if (op.bc == RadialBC::Neumann) {
        out.projected_mean = op.mean(rhs);
        for (double& v : rhs) v -= out.projected_mean;
    }
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = op.mass[i] * rhs[i];
    std::vector<double> x(n, 0.0);
    CgReport rep = cg_solve(op, b, x, tol * 1e-2, 200000);
    if (op.bc == RadialBC::Neumann) op.project_mean(x);
    out.f = ScalarField(op.grid);
    out.f.values = std::move(x);
    out.iterations = rep.iterations;
    out.residual = rep.rel_residual;
    return out;
}

// ── Random smooth fields for the estimate checks ─────────────────────────

namespace detail {

// Low-mode random field; `dirichlet` selects radial profiles vanishing at
// the boundary rings, otherwise profiles with vanishing radial slope.
inline ScalarField random_smooth_field(const GridPtr& grid, std::mt19937_64& rng,
                                       bool dirichlet) {
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    std::uniform_int_distribution<int> angular(0, 2);
    const NeckGrid& g = *grid;
    double lr = std::log(g.r_nodes.back() / g.r_nodes.front());

    ScalarField f(grid);
    const int n_modes = 6;
    for (int m = 0; m < n_modes; ++m) {
        double a = amp(rng);
        int radial = 1 + (m % 2);
        int nth = angular(rng), nk = angular(rng);
        double ph_t = amp(rng) * M_PI, ph_k = amp(rng) * M_PI;
        for (int i = 0; i < g.n_r; ++i) {
            double s = std::log(g.r_nodes[i] / g.r_nodes.front()) / lr;  // in [0,1]
            double rad = dirichlet ? std::sin(M_PI * radial * s)
                                   : std::cos(M_PI * radial * s);
            for (int j = 0; j < g.n_theta; ++j)
                for (int k = 0; k < g.n_kappa; ++k)
                    f.at(i, j, k) += a * rad * std::cos(nth * g.theta(j) + ph_t) *
                                     std::cos(nk * g.kappa(k) + ph_k);
        }
    }
    return f;
}

}  // namespace detail

// ── Estimate verifications ───────────────────────────────────────────────

struct PoincareReport {
    double min_ratio = 0.0;           // min ||grad h|| / ||h|| observed
    double sqrt_lambda1 = 0.0;        // sqrt of the first Dirichlet eigenvalue
    int trials = 0;
};

// Rayleigh ratios ||grad h||_{L^2} / ||h||_{L^2} of random compactly
// supported fields, plus the computed Dirichlet eigenfield (the equality
// case).  Requires a Dirichlet-assembled operator.
inline PoincareReport verify_poincare(const NeckOperator& op, int trials,
                                      std::uint64_t seed = 99) {
    if (op.bc != RadialBC::Dirichlet)
        throw std::invalid_argument("verify_poincare: needs a Dirichlet operator");
    SpectralResult lam = first_eigenvalue(op, 1e-10, 10000, seed);
    PoincareReport rep;
    rep.sqrt_lambda1 = std::sqrt(lam.lambda1);
    rep.trials = trials;
    std::mt19937_64 rng(seed);
    double best = 1e300;
    for (int t = 0; t < trials; ++t) {
        ScalarField h = detail::random_smooth_field(op.grid, rng, /*dirichlet=*/true);
        op.zero_fixed(h.values);
        double num = op.stiffness.energy(h.values);
        double den = op.mass_inner(h.values, h.values);
        if (den <= 0.0) continue;
        best = std::min(best, std::sqrt(num / den));
    }
    // the eigenfield attains the bound
    double eig_ratio = std::sqrt(op.stiffness.energy(lam.eigenfield.values) /
                                 op.mass_inner(lam.eigenfield.values, lam.eigenfield.values));
    best = std::min(best, eig_ratio);
    rep.min_ratio = best;
    return rep;
}

// Max over sources psi of ||Q psi||_{L^p} / ||psi||_{L^p}: `trials` random
// mean-zero fields plus the first kappa harmonic, which attains the
// supremum 1/lambda1 when the kappa mode is the lowest (so the reported
// constant measures the operator norm, not the luck of the draw).
inline double verify_lp_bound(const NeckOperator& op, double p, int trials,
                              std::uint64_t seed = 7) {
    if (p < 2.0 || p > 4.0) throw std::invalid_argument("verify_lp_bound: p must be in [2,4]");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    auto ratio_for = [&](const ScalarField& psi_in) {
        ScalarField psi = psi_in;
        psi.project_out_mean();
        PoissonResult sol = poisson_solve(op, psi);
        double np = norm_lp_k(psi, p, 0);
        if (np <= 0.0) return 0.0;
        return norm_lp_k(sol.f, p, 0) / np;
    };
    worst = std::max(worst, ratio_for(ScalarField::sample(op.grid, [](const NeckPoint& q) {
                         return std::cos(q.kappa);
                     })));
    for (int t = 0; t < trials; ++t)
        worst = std::max(worst, ratio_for(detail::random_smooth_field(op.grid, rng, false)));
    return worst;
}

struct EllipticReport {
    double c22 = 0.0;  // max ||f||_{L^2_2} / ||psi||_{L^2}
    double c42 = 0.0;  // max ||f||_{L^2_4} / ||psi||_{L^2_2}, with ||.||_{L^2_4}
                       // realized as ||f||_{L^2_2} + ||Delta f||_{L^2_2}
};

inline EllipticReport verify_elliptic_estimates(const NeckOperator& op, int trials,
                                                std::uint64_t seed = 21) {
    std::mt19937_64 rng(seed);
    EllipticReport rep;
    auto account = [&](const ScalarField& psi_in) {
        ScalarField psi = psi_in;
        psi.project_out_mean();
        PoissonResult sol = poisson_solve(op, psi);
        double psi_0 = norm_lp_k(psi, 2.0, 0);
        double psi_22 = norm_lp_k(psi, 2.0, 2);
        double f_22 = norm_lp_k(sol.f, 2.0, 2);
        // Delta f equals the projected psi up to solver tolerance, so the
        // composite fourth-order norm is ||f||_{2,2} + ||psi||_{2,2}
        double f_24 = f_22 + psi_22;
        if (psi_0 > 0.0) rep.c22 = std::max(rep.c22, f_22 / psi_0);
        if (psi_22 > 0.0) rep.c42 = std::max(rep.c42, f_24 / psi_22);
    };
    // deterministic anchor: the lowest kappa harmonic
    account(ScalarField::sample(op.grid, [](const NeckPoint& q) { return std::cos(q.kappa); }));
    for (int t = 0; t < trials; ++t) account(detail::random_smooth_field(op.grid, rng, false));
    return rep;
}

}  // namespace slag
