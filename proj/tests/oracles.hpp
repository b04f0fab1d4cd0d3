/*
 * oracles.hpp — independent reference computations used only by tests.
 *
 * Nothing in here may call into the code paths it checks: the wedge
 * expander enumerates sign/part combinations by hand, the dense
 * eigensolver goes through Eigen, and the radial integrals use adaptive
 * Simpson on the closed-form integrands.
 */
#pragma once

#include <slag/exterior.hpp>
#include <slag/gluing.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace oracle {

// ── Brute-force expansion of xi = prod_j (w_{a_j} + i w_{b_j}) ───────────
//
// Enumerates all 2^3 choices of real/imaginary factor, tracks the power of
// i, sorts each resulting 3-tuple with an explicit bubble parity count, and
// accumulates coefficient maps for the real and imaginary parts.

struct FormTable {
    std::map<std::array<int, 3>, double> coeff;

    double get(std::array<int, 3> idx) const {
        // bubble sort with parity
        int sign = 1;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 2 - i; ++j)
                if (idx[j] > idx[j + 1]) {
                    std::swap(idx[j], idx[j + 1]);
                    sign = -sign;
                }
        if (idx[0] == idx[1] || idx[1] == idx[2]) return 0.0;
        auto it = coeff.find(idx);
        return it == coeff.end() ? 0.0 : sign * it->second;
    }
};

inline std::pair<FormTable, FormTable> expand_holomorphic_form(
    std::array<std::pair<int, int>, 3> factors = {{{1, 5}, {2, 6}, {3, 4}}}) {
    FormTable re, im;
    for (int mask = 0; mask < 8; ++mask) {
        int ipow = 0;
        std::array<int, 3> idx{};
        for (int j = 0; j < 3; ++j) {
            bool take_im = (mask >> j) & 1;
            idx[j] = take_im ? factors[j].second : factors[j].first;
            if (take_im) ++ipow;
        }
        // sort with parity
        int sign = 1;
        std::array<int, 3> s = idx;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 2 - i; ++j)
                if (s[j] > s[j + 1]) {
                    std::swap(s[j], s[j + 1]);
                    sign = -sign;
                }
        if (s[0] == s[1] || s[1] == s[2]) continue;
        // i^ipow = {1, i, -1, -i}[ipow % 4]
        switch (ipow % 4) {
            case 0: re.coeff[s] += sign; break;
            case 1: im.coeff[s] += sign; break;
            case 2: re.coeff[s] -= sign; break;
            case 3: im.coeff[s] -= sign; break;
        }
    }
    auto prune = [](FormTable& t) {
        for (auto it = t.coeff.begin(); it != t.coeff.end();)
            it = (it->second == 0.0) ? t.coeff.erase(it) : std::next(it);
    };
    prune(re);
    prune(im);
    return {re, im};
}

// Evaluate a FormTable on a 3-frame by explicit 3x3 determinants.
inline double evaluate_table(const FormTable& t, const slag::Vec6& a, const slag::Vec6& b,
                             const slag::Vec6& c) {
    double total = 0.0;
    for (const auto& [idx, coef] : t.coeff) {
        double m[3][3];
        const slag::Vec6* rows[3] = {&a, &b, &c};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m[i][j] = (*rows[i])[idx[j] - 1];
        double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        total += coef * det;
    }
    return total;
}

// ── Adaptive Simpson quadrature for closed-form radial integrals ─────────

inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-12) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

// ── Closed-form error integrals ──────────────────────────────────────────

// Reference value of || Im xi(E1,E2,E3) ||^2_{L^2_delta}: adaptive Simpson
// in r, 512-point rectangle rule in theta (smooth periodic integrand, so
// the rectangle rule converges spectrally).  Independent of the grid
// quadrature it checks.
inline double error_l2_squared(const slag::GluingConfig& cfg, double kappa_length) {
    auto theta_avg = [&](double r) {
        const int m = 512;
        double s = 0.0;
        for (int j = 0; j < m; ++j) {
            slag::NeckPoint p = slag::NeckPoint::polar(r, 2.0 * M_PI * j / m, 0.0);
            s += slag::induced_metric(p, cfg).sqrt_det;
        }
        return s / m;
    };
    auto radial = [&](double r) {
        double e = slag::error_density(slag::NeckPoint::polar(r, 0.0, 0.0), cfg);
        return e * e * theta_avg(r) * r;
    };
    return 2.0 * M_PI * kappa_length * integrate(radial, cfg.r_inner(), cfg.r_outer(), 1e-14);
}

// ── Deterministic RNG helpers for tests ──────────────────────────────────

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97f4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline double uniform(std::uint64_t& state, double lo, double hi) {
    return lo + (hi - lo) * (splitmix64(state) >> 11) * 0x1.0p-53;
}

inline slag::Vec6 random_vec6(std::uint64_t& state, double scale = 1.0) {
    slag::Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = uniform(state, -scale, scale);
    return v;
}

}  // namespace oracle
