#pragma once

#include <map>
#include <vector>

#include "ops.hpp"

namespace hilange {

// One mode of a word: ladder excess (creators minus annihilators) and a number-operator power.
// A word denotes ad^e n^j for e >= 0 and n^j a^|e| for e < 0; both are normal-ordered forms.
struct ModeWord {
    int excess = 0;
    int numberPow = 0;
    friend auto operator<=>(const ModeWord&, const ModeWord&) = default;
};

struct WordMonomial {
    std::map<Mode, ModeWord> factors;
    bool is_identity() const { return factors.empty(); }
    friend auto operator<=>(const WordMonomial&, const WordMonomial&) = default;
};

using WordExpr = std::map<WordMonomial, Coeff>;

namespace detail {

// Falling-factorial expansion x(x-1)...(x-p+1) as coefficients over powers of x.
inline std::vector<Rat> falling_factorial_coeffs(int p) {
    std::vector<Rat> c{Rat(1)};
    for (int k = 0; k < p; ++k) {
        std::vector<Rat> next(c.size() + 1, Rat(0));
        for (size_t i = 0; i < c.size(); ++i) {
            next[i + 1] += c[i];
            next[i] -= c[i] * Rat(k);
        }
        c = std::move(next);
    }
    return c;
}

inline Rat stirling_second(int j, int p) {
    if (j == 0 && p == 0) return 1;
    if (p <= 0 || p > j) return 0;
    static std::vector<std::vector<Rat>> cache{{Rat(1)}};
    while ((int)cache.size() <= j) {
        int row = (int)cache.size();
        std::vector<Rat> r(row + 1, Rat(0));
        for (int q = 1; q <= row; ++q) {
            Rat below = (q <= row - 1) ? cache[row - 1][q] : Rat(0);
            r[q] = Rat(q) * below + cache[row - 1][q - 1];
        }
        cache.push_back(std::move(r));
    }
    return cache[j][p];
}

}  // namespace detail

inline void word_add(WordExpr& e, const WordMonomial& w, const Coeff& c) {
    if (c.is_zero()) return;
    auto it = e.find(w);
    if (it == e.end()) {
        e.emplace(w, c);
    } else {
        it->second += c;
        if (it->second.is_zero()) e.erase(it);
    }
}

// Exact change of basis: normal-ordered monomials -> words. Per mode,
// ad^r a^l = ad^(r-l) (ad^l a^l) for r >= l (and mirrored otherwise), with the
// parenthesized factor the falling factorial of the number operator.
inline WordExpr to_words(const OperatorExpr& e) {
    WordExpr out;
    for (const auto& [mono, coeff] : e.terms()) {
        std::vector<std::pair<WordMonomial, Rat>> parts{{WordMonomial{}, Rat(1)}};
        for (const auto& [mode, p] : mono.factors) {
            int ex = p.raise - p.lower;
            int depth = std::min(p.raise, p.lower);
            auto ff = detail::falling_factorial_coeffs(depth);
            std::vector<std::pair<WordMonomial, Rat>> next;
            next.reserve(parts.size() * ff.size());
            for (const auto& [w0, c0] : parts) {
                for (size_t j = 0; j < ff.size(); ++j) {
                    if (ff[j] == 0) continue;
                    WordMonomial w = w0;
                    if (ex != 0 || j != 0) w.factors[mode] = ModeWord{ex, (int)j};
                    next.push_back({std::move(w), c0 * ff[j]});
                }
            }
            parts = std::move(next);
        }
        for (auto& [w, c] : parts) word_add(out, w, coeff * Coeff(c));
    }
    return out;
}

// Inverse map; exact because n^j expands over falling factorials with Stirling weights.
inline OperatorExpr word_to_expr(const WordMonomial& w) {
    OperatorExpr out = identity();
    for (const auto& [mode, mw] : w.factors) {
        OperatorExpr factor;
        int rbase = mw.excess > 0 ? mw.excess : 0;
        int lbase = mw.excess < 0 ? -mw.excess : 0;
        if (mw.numberPow == 0) {
            factor.add_term(Monomial{{{mode, {rbase, lbase}}}}, Coeff(1));
        } else {
            for (int p = 0; p <= mw.numberPow; ++p) {
                Rat s = detail::stirling_second(mw.numberPow, p);
                if (s == 0) continue;
                factor.add_term(Monomial{{{mode, {rbase + p, lbase + p}}}}, Coeff(s));
            }
        }
        out = out * factor;
    }
    return out;
}

inline OperatorExpr words_to_expr(const WordExpr& we) {
    OperatorExpr out;
    for (const auto& [w, c] : we) out += word_to_expr(w) * c;
    return out;
}

inline std::string to_string(const WordMonomial& w) {
    if (w.is_identity()) return "1";
    std::string s;
    for (const auto& [mode, mw] : w.factors) {
        if (mw.excess > 0) s += std::string(1, mode) + "d:" + std::to_string(mw.excess) + " ";
        if (mw.excess < 0) s += std::string(1, mode) + ":" + std::to_string(-mw.excess) + " ";
        if (mw.numberPow > 0) s += "n" + std::string(1, mode) + "^" + std::to_string(mw.numberPow) + " ";
    }
    if (!s.empty()) s.pop_back();
    return s;
}

}  // namespace hilange
