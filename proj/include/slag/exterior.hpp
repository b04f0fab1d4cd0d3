/*
 * exterior.hpp — constant-coefficient exterior algebra on R^6 ≅ C^3.
 *
 * Adapted coordinates (x1..x6) = (x, y, kappa, zeta, u, v).  Complex
 * structure pairs them as z1 = x + iu, z2 = y + iv, z3 = kappa + i zeta,
 * so the Kaehler form and holomorphic volume form are
 *
 *   omega = w1^w5 + w2^w6 + w3^w4
 *   xi    = (w1 + i w5) ^ (w2 + i w6) ^ (w3 + i w4)
 *
 * where w1..w6 is the dual basis.  Forms are stored sparsely on strictly
 * increasing index tuples; evaluation on a frame is a sum of signed minors.
 * Everything here is exact integer arithmetic at construction time, so the
 * calibration identity (i/2)^3 (-1)^3 xi^xibar = omega^3/3! holds to
 * machine precision.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace slag {

// ── Vec6 ─────────────────────────────────────────────────────────────────

struct Vec6 {
    std::array<double, 6> c{};

    Vec6() = default;
    Vec6(double a0, double a1, double a2, double a3, double a4, double a5)
        : c{a0, a1, a2, a3, a4, a5} {
        for (double x : c)
            if (!std::isfinite(x)) throw std::invalid_argument("Vec6: non-finite component");
    }

    static Vec6 basis(int i) {
        if (i < 1 || i > 6) throw std::invalid_argument("Vec6::basis: index must be 1..6");
        Vec6 v;
        v.c[static_cast<std::size_t>(i - 1)] = 1.0;
        return v;
    }

    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }

    Vec6 operator+(const Vec6& o) const {
        Vec6 r;
        for (int i = 0; i < 6; ++i) r.c[i] = c[i] + o.c[i];
        return r;
    }
    Vec6 operator-(const Vec6& o) const {
        Vec6 r;
        for (int i = 0; i < 6; ++i) r.c[i] = c[i] - o.c[i];
        return r;
    }
    Vec6 operator*(double s) const {
        Vec6 r;
        for (int i = 0; i < 6; ++i) r.c[i] = c[i] * s;
        return r;
    }
    double dot(const Vec6& o) const {
        double s = 0;
        for (int i = 0; i < 6; ++i) s += c[i] * o.c[i];
        return s;
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec6 operator*(double s, const Vec6& v) { return v * s; }

// ── KForm ────────────────────────────────────────────────────────────────

// Index tuples are strictly increasing subsets of {1..6}; antisymmetry is
// structural.  Degrees 1..6 are supported (wedge products of the degree-3
// forms reach the top degree in the calibration identity).
class KForm {
public:
    using Tuple = std::vector<int>;

    explicit KForm(int degree) : degree_(degree) {
        if (degree < 1 || degree > 6) throw std::invalid_argument("KForm: degree must be 1..6");
    }

    int degree() const { return degree_; }

    // Adds c * w_{idx[0]} ^ ... ^ w_{idx[k-1]}; indices may be unordered,
    // the permutation sign is absorbed into the coefficient.
    void add(std::initializer_list<int> idx, double coeff) {
        add(Tuple(idx), coeff);
    }
    void add(Tuple idx, double coeff) {
        if (static_cast<int>(idx.size()) != degree_)
            throw std::invalid_argument("KForm::add: tuple length != degree");
        for (int i : idx)
            if (i < 1 || i > 6) throw std::invalid_argument("KForm::add: index out of range 1..6");
        int sign = sort_count_sign(idx);
        if (sign == 0) return;  // repeated index: term vanishes
        double& slot = coeffs_[idx];
        slot += sign * coeff;
        if (slot == 0.0) coeffs_.erase(idx);
    }

    const std::map<Tuple, double>& terms() const { return coeffs_; }
    std::size_t term_count() const { return coeffs_.size(); }

    double coefficient(std::initializer_list<int> idx) const {
        Tuple t(idx);
        int sign = sort_count_sign(t);
        if (sign == 0) return 0.0;
        auto it = coeffs_.find(t);
        return it == coeffs_.end() ? 0.0 : sign * it->second;
    }

    KForm operator*(double s) const {
        KForm r(degree_);
        if (s == 0.0) return r;
        r.coeffs_ = coeffs_;
        for (auto& [t, c] : r.coeffs_) c *= s;
        return r;
    }
    KForm operator+(const KForm& o) const {
        if (degree_ != o.degree_) throw std::invalid_argument("KForm::+: degree mismatch");
        KForm r = *this;
        for (const auto& [t, c] : o.coeffs_) {
            double& slot = r.coeffs_[t];
            slot += c;
            if (slot == 0.0) r.coeffs_.erase(t);
        }
        return r;
    }
    KForm operator-(const KForm& o) const { return *this + o * -1.0; }

    KForm wedge(const KForm& o) const {
        int d = degree_ + o.degree_;
        if (d > 6) throw std::invalid_argument("KForm::wedge: degree sum exceeds 6");
        KForm r(d);
        for (const auto& [ta, ca] : coeffs_)
            for (const auto& [tb, cb] : o.coeffs_) {
                Tuple t = ta;
                t.insert(t.end(), tb.begin(), tb.end());
                r.add(std::move(t), ca * cb);
            }
        return r;
    }

    // Sum over stored tuples of coefficient times the minor of the frame
    // matrix picked out by the tuple.  A repeated frame vector kills the
    // value exactly (alternation is structural, not a cancellation).
    double evaluate(std::span<const Vec6> frame) const {
        if (static_cast<int>(frame.size()) != degree_)
            throw std::invalid_argument("KForm::evaluate: frame size != degree");
        for (std::size_t i = 0; i < frame.size(); ++i)
            for (std::size_t j = i + 1; j < frame.size(); ++j)
                if (frame[i].c == frame[j].c) return 0.0;
        double total = 0.0;
        for (const auto& [t, c] : coeffs_) total += c * minor_det(frame, t);
        return total;
    }
    double evaluate(std::initializer_list<Vec6> frame) const {
        std::vector<Vec6> v(frame);
        return evaluate(std::span<const Vec6>(v));
    }

    // Max absolute coefficient difference against another form of the same
    // degree (used by the calibration identity check on top-degree forms).
    double max_coeff_difference(const KForm& o) const {
        if (degree_ != o.degree_) throw std::invalid_argument("KForm: degree mismatch");
        double m = 0.0;
        for (const auto& [t, c] : coeffs_) {
            auto it = o.coeffs_.find(t);
            m = std::max(m, std::abs(c - (it == o.coeffs_.end() ? 0.0 : it->second)));
        }
        for (const auto& [t, c] : o.coeffs_)
            if (!coeffs_.count(t)) m = std::max(m, std::abs(c));
        return m;
    }

private:
    // Insertion sort; returns permutation sign, or 0 on a repeated index.
    static int sort_count_sign(Tuple& t) {
        int sign = 1;
        for (std::size_t i = 1; i < t.size(); ++i)
            for (std::size_t j = i; j > 0 && t[j] < t[j - 1]; --j) {
                std::swap(t[j], t[j - 1]);
                sign = -sign;
            }
        for (std::size_t i = 1; i < t.size(); ++i)
            if (t[i] == t[i - 1]) return 0;
        return sign;
    }

    static double minor_det(std::span<const Vec6> frame, const Tuple& cols) {
        int k = static_cast<int>(cols.size());
        switch (k) {
            case 1:
                return frame[0][cols[0] - 1];
            case 2: {
                double a = frame[0][cols[0] - 1], b = frame[0][cols[1] - 1];
                double c = frame[1][cols[0] - 1], d = frame[1][cols[1] - 1];
                return a * d - b * c;
            }
            case 3: {
                double m[3][3];
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) m[i][j] = frame[i][cols[j] - 1];
                return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            }
            default: {
                // Laplace expansion along the first row; k <= 6 so this stays tiny.
                double det = 0.0;
                double sgn = 1.0;
                for (int j = 0; j < k; ++j) {
                    Tuple sub;
                    sub.reserve(cols.size() - 1);
                    for (int l = 0; l < k; ++l)
                        if (l != j) sub.push_back(cols[l]);
                    det += sgn * frame[0][cols[j] - 1] * minor_det(frame.subspan(1), sub);
                    sgn = -sgn;
                }
                return det;
            }
        }
    }

    int degree_;
    std::map<Tuple, double> coeffs_;
};

// ── Standard forms ───────────────────────────────────────────────────────

// omega = w1^w5 + w2^w6 + w3^w4
inline KForm standard_symplectic_form() {
    KForm w(2);
    w.add({1, 5}, 1.0);
    w.add({2, 6}, 1.0);
    w.add({3, 4}, 1.0);
    return w;
}

// (Re xi, Im xi) from xi = (w1 + i w5)^(w2 + i w6)^(w3 + i w4), expanded
// symbolically once; no per-evaluation complex arithmetic.
inline std::pair<KForm, KForm> holomorphic_three_form() {
    struct C1 {  // complex 1-form: re + i*im
        KForm re, im;
    };
    auto c1 = [](int re_idx, int im_idx) {
        KForm re(1), im(1);
        re.add({re_idx}, 1.0);
        im.add({im_idx}, 1.0);
        return C1{re, im};
    };
    C1 a = c1(1, 5), b = c1(2, 6), c = c1(3, 4);

    // (a.re + i a.im)^(b.re + i b.im)
    KForm re2 = a.re.wedge(b.re) - a.im.wedge(b.im);
    KForm im2 = a.re.wedge(b.im) + a.im.wedge(b.re);
    // (...)^(c.re + i c.im)
    KForm re3 = re2.wedge(c.re) - im2.wedge(c.im);
    KForm im3 = re2.wedge(c.im) + im2.wedge(c.re);
    return {re3, im3};
}

// ── Complex structure ────────────────────────────────────────────────────

// J in the adapted basis: e1->e5, e2->e6, e3->e4 (and minus on the way
// back), matching omega(v,w) = <Jv, w>.
class ComplexStructure {
public:
    static ComplexStructure standard() {
        ComplexStructure j;
        auto set = [&](int from, int to, double s) {
            j.m_[static_cast<std::size_t>(to - 1)][static_cast<std::size_t>(from - 1)] = s;
        };
        set(1, 5, 1.0);
        set(2, 6, 1.0);
        set(3, 4, 1.0);
        set(4, 3, -1.0);
        set(5, 1, -1.0);
        set(6, 2, -1.0);
        return j;
    }

    Vec6 apply(const Vec6& v) const {
        Vec6 r;
        for (int i = 0; i < 6; ++i) {
            double s = 0.0;
            for (int k = 0; k < 6; ++k) s += m_[i][k] * v.c[k];
            r.c[i] = s;
        }
        return r;
    }

    double entry(int row, int col) const {
        return m_[static_cast<std::size_t>(row - 1)][static_cast<std::size_t>(col - 1)];
    }

private:
    ComplexStructure() {
        for (auto& row : m_) row.fill(0.0);
    }
    std::array<std::array<double, 6>, 6> m_;
};

// ── Calibration identity ─────────────────────────────────────────────────

// Residual of (-1)^{n(n-1)/2} (i/2)^n xi^xibar = omega^n/n! at n = 3,
// compared coefficient-wise as top-degree 6-forms.  With xi = R + iI and
// both of odd degree, xi^xibar = -2i R^I, so the left side is (1/4) R^I.
inline double calibration_identity_check(const KForm& omega, const KForm& xi_re,
                                         const KForm& xi_im) {
    KForm lhs = xi_re.wedge(xi_im) * 0.25;
    KForm rhs = omega.wedge(omega).wedge(omega) * (1.0 / 6.0);
    return lhs.max_coeff_difference(rhs);
}

}  // namespace slag
