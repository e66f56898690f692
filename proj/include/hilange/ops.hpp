#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rational.hpp"

namespace hilange {

using Mode = char;

// Powers of one mode inside a normal-ordered factor: raise creators, then lower annihilators.
struct ModePowers {
    int raise = 0;
    int lower = 0;
    friend auto operator<=>(const ModePowers&, const ModePowers&) = default;
};

// Normal-ordered product over modes; distinct modes commute, so the map order is canonical.
struct Monomial {
    std::map<Mode, ModePowers> factors;

    bool is_identity() const { return factors.empty(); }
    friend auto operator<=>(const Monomial&, const Monomial&) = default;
};

inline int degree(const Monomial& m) {
    int d = 0;
    for (const auto& [mode, p] : m.factors) d += p.raise + p.lower;
    return d;
}

inline Monomial adjoint(Monomial m) {
    for (auto& [mode, p] : m.factors) std::swap(p.raise, p.lower);
    return m;
}

namespace detail {

inline Rat binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    Rat r = 1;
    for (int i = 0; i < k; ++i) r = r * Rat(n - i) / Rat(i + 1);
    return r;
}

inline Rat factorial(int n) {
    Rat r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

}  // namespace detail

// Linear combination of normal-ordered monomials with exact coefficients.
// All algebra keeps exact normal form; zero terms are pruned eagerly.
class OperatorExpr {
public:
    using TermMap = std::map<Monomial, Coeff>;

    OperatorExpr() = default;
    explicit OperatorExpr(Coeff scalar) {
        if (!scalar.is_zero()) m_terms[Monomial{}] = std::move(scalar);
    }
    OperatorExpr(Monomial m, Coeff c) {
        if (!c.is_zero()) m_terms[std::move(m)] = std::move(c);
    }

    const TermMap& terms() const { return m_terms; }
    bool is_zero() const { return m_terms.empty(); }

    size_t term_count() const { return m_terms.size(); }

    int degree() const {
        int d = 0;
        for (const auto& [m, c] : m_terms) d = std::max(d, hilange::degree(m));
        return d;
    }

    void add_term(const Monomial& m, const Coeff& c) {
        if (c.is_zero()) return;
        auto it = m_terms.find(m);
        if (it == m_terms.end()) {
            m_terms.emplace(m, c);
        } else {
            it->second += c;
            if (it->second.is_zero()) m_terms.erase(it);
        }
    }

    OperatorExpr& operator+=(const OperatorExpr& o) {
        for (const auto& [m, c] : o.m_terms) add_term(m, c);
        return *this;
    }
    OperatorExpr& operator-=(const OperatorExpr& o) {
        for (const auto& [m, c] : o.m_terms) add_term(m, -c);
        return *this;
    }
    OperatorExpr operator-() const {
        OperatorExpr r;
        for (const auto& [m, c] : m_terms) r.m_terms.emplace(m, -c);
        return r;
    }
    OperatorExpr& operator*=(const Coeff& s) {
        if (s.is_zero()) {
            m_terms.clear();
            return *this;
        }
        for (auto& [m, c] : m_terms) c *= s;
        return *this;
    }

    friend OperatorExpr operator+(OperatorExpr a, const OperatorExpr& b) { return a += b; }
    friend OperatorExpr operator-(OperatorExpr a, const OperatorExpr& b) { return a -= b; }
    friend OperatorExpr operator*(OperatorExpr a, const Coeff& s) { return a *= s; }
    friend OperatorExpr operator*(const Coeff& s, OperatorExpr a) { return a *= s; }
    friend bool operator==(const OperatorExpr& a, const OperatorExpr& b) { return a.m_terms == b.m_terms; }

private:
    TermMap m_terms;
};

namespace detail {

// One mode: (ad^r1 a^l1)(ad^r2 a^l2) = sum_k k! C(l1,k) C(r2,k) ad^(r1+r2-k) a^(l1+l2-k).
inline std::vector<std::pair<ModePowers, Rat>> mode_product(const ModePowers& x, const ModePowers& y) {
    std::vector<std::pair<ModePowers, Rat>> out;
    int kmax = std::min(x.lower, y.raise);
    out.reserve(kmax + 1);
    for (int k = 0; k <= kmax; ++k) {
        Rat c = factorial(k) * binomial(x.lower, k) * binomial(y.raise, k);
        out.push_back({ModePowers{x.raise + y.raise - k, x.lower + y.lower - k}, c});
    }
    return out;
}

}  // namespace detail

// Normal-ordered product of two monomials (modes are reordered independently).
inline OperatorExpr mul(const Monomial& a, const Coeff& ca, const Monomial& b, const Coeff& cb) {
    std::vector<std::pair<Monomial, Rat>> acc{{Monomial{}, Rat(1)}};
    auto ia = a.factors.begin();
    auto ib = b.factors.begin();
    while (ia != a.factors.end() || ib != b.factors.end()) {
        Mode mode;
        ModePowers x{}, y{};
        if (ib == b.factors.end() || (ia != a.factors.end() && ia->first < ib->first)) {
            mode = ia->first;
            x = ia->second;
            ++ia;
        } else if (ia == a.factors.end() || ib->first < ia->first) {
            mode = ib->first;
            y = ib->second;
            ++ib;
        } else {
            mode = ia->first;
            x = ia->second;
            y = ib->second;
            ++ia;
            ++ib;
        }
        auto expanded = detail::mode_product(x, y);
        std::vector<std::pair<Monomial, Rat>> next;
        next.reserve(acc.size() * expanded.size());
        for (const auto& [mono, c] : acc) {
            for (const auto& [p, pc] : expanded) {
                Monomial m2 = mono;
                if (p.raise != 0 || p.lower != 0) m2.factors[mode] = p;
                next.push_back({std::move(m2), c * pc});
            }
        }
        acc = std::move(next);
    }
    OperatorExpr out;
    Coeff scale = ca * cb;
    for (auto& [m, c] : acc) out.add_term(m, scale * Coeff(c));
    return out;
}

inline OperatorExpr operator*(const OperatorExpr& a, const OperatorExpr& b) {
    OperatorExpr out;
    for (const auto& [ma, ca] : a.terms())
        for (const auto& [mb, cb] : b.terms()) out += mul(ma, ca, mb, cb);
    return out;
}

inline OperatorExpr commute(const OperatorExpr& a, const OperatorExpr& b) { return a * b - b * a; }

inline OperatorExpr adjoint(const OperatorExpr& e) {
    OperatorExpr out;
    for (const auto& [m, c] : e.terms()) out.add_term(adjoint(m), c.conj());
    return out;
}

// Elementary builders.
inline OperatorExpr annihilate(Mode m) { return {Monomial{{{m, {0, 1}}}}, Coeff(1)}; }
inline OperatorExpr create(Mode m) { return {Monomial{{{m, {1, 0}}}}, Coeff(1)}; }
inline OperatorExpr number(Mode m) { return {Monomial{{{m, {1, 1}}}}, Coeff(1)}; }
inline OperatorExpr identity() { return OperatorExpr(Coeff(1)); }
// Pair annihilator (a^2)/2 and its adjoint; ladder unit for two-quantum processes.
inline OperatorExpr pair_annihilate(Mode m) { return {Monomial{{{m, {0, 2}}}}, Coeff(Rat(1, 2))}; }
inline OperatorExpr pair_create(Mode m) { return {Monomial{{{m, {2, 0}}}}, Coeff(Rat(1, 2))}; }

inline OperatorExpr pow(const OperatorExpr& e, int n) {
    OperatorExpr r = identity();
    for (int i = 0; i < n; ++i) r = r * e;
    return r;
}

// Antinormal term: per-mode a^lower first, then ad^raise. Reuses ModePowers fields.
using AntinormalTerm = std::pair<Monomial, Coeff>;

// Rewrites into antinormal order: ad^n a^m = sum_k (-1)^k k! C(m,k) C(n,k) a^(m-k) ad^(n-k).
inline std::vector<AntinormalTerm> antinormal_terms(const OperatorExpr& e) {
    std::map<Monomial, Coeff> acc;
    for (const auto& [mono, coeff] : e.terms()) {
        std::vector<std::pair<Monomial, Rat>> parts{{Monomial{}, Rat(1)}};
        for (const auto& [mode, p] : mono.factors) {
            std::vector<std::pair<Monomial, Rat>> next;
            int kmax = std::min(p.raise, p.lower);
            for (int k = 0; k <= kmax; ++k) {
                Rat c = detail::factorial(k) * detail::binomial(p.lower, k) * detail::binomial(p.raise, k);
                if (k % 2) c = -c;
                ModePowers q{p.raise - k, p.lower - k};
                for (const auto& [m0, c0] : parts) {
                    Monomial m2 = m0;
                    if (q.raise != 0 || q.lower != 0) m2.factors[mode] = q;
                    next.push_back({std::move(m2), c0 * c});
                }
            }
            parts = std::move(next);
        }
        for (auto& [m, c] : parts) {
            Coeff add = coeff * Coeff(c);
            auto it = acc.find(m);
            if (it == acc.end()) {
                if (!add.is_zero()) acc.emplace(std::move(m), std::move(add));
            } else {
                it->second += add;
                if (it->second.is_zero()) acc.erase(it);
            }
        }
    }
    return {acc.begin(), acc.end()};
}

// Husimi-style moment: antinormal order, then a -> alpha, ad -> conj(alpha) per mode.
inline Coeff phase_space_moment(const OperatorExpr& e, const std::map<Mode, Coeff>& alpha) {
    Coeff total(Rat(0));
    for (const auto& [mono, coeff] : antinormal_terms(e)) {
        Coeff v = coeff;
        for (const auto& [mode, p] : mono.factors) {
            auto it = alpha.find(mode);
            if (it == alpha.end()) throw std::invalid_argument(std::string("phase_space_moment: no amplitude for mode ") + mode);
            for (int i = 0; i < p.lower; ++i) v *= it->second;
            for (int i = 0; i < p.raise; ++i) v *= it->second.conj();
        }
        total += v;
    }
    return total;
}

inline std::string to_string(const Monomial& m) {
    if (m.is_identity()) return "1";
    std::string s;
    for (const auto& [mode, p] : m.factors) {
        for (int i = 0; i < p.raise; ++i) s += std::string(1, mode) + "d ";
        for (int i = 0; i < p.lower; ++i) s += std::string(1, mode) + " ";
    }
    if (!s.empty()) s.pop_back();
    return s;
}

inline std::string to_string(const OperatorExpr& e) {
    if (e.is_zero()) return "0";
    std::string s;
    bool first = true;
    for (const auto& [m, c] : e.terms()) {
        if (!first) s += " + ";
        first = false;
        s += to_string(c) + "*" + to_string(m);
    }
    return s;
}

}  // namespace hilange
