#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "words.hpp"

namespace hilange {

// Reference-state data for one mode. pairMean is <a^2>/2, kept separate from the
// amplitude so squeezed or thermal states are representable.
struct ModeMeans {
    Rat occupation;
    Coeff amplitude;
    Coeff pairMean;

    static ModeMeans coherent(const Rat& nbar) {
        auto root = exact_sqrt(nbar);
        if (!root) throw std::invalid_argument("coherent occupation must be a perfect square; use coherent_amplitude");
        return {nbar, Coeff(*root), Coeff(nbar / 2)};
    }
    static ModeMeans coherent_amplitude(const Coeff& alpha) {
        Coeff sq = alpha * alpha;
        return {alpha.norm2(), alpha, Coeff(sq.re / 2, sq.im / 2)};
    }
    // Coherent reference from occupation alone: pairMean stays the exact nbar/2,
    // the amplitude falls back to a dyadic root when nbar is not a square.
    static ModeMeans coherent_occupation(const Rat& nbar) {
        auto root = exact_sqrt(nbar);
        Coeff amp = root ? Coeff(*root) : Coeff(rat_from_double(std::sqrt(to_double(nbar))));
        return {nbar, amp, Coeff(nbar / 2)};
    }
    static ModeMeans thermal(const Rat& nbar) { return {nbar, Coeff(0), Coeff(0)}; }
};

using MeanFieldContext = std::map<Mode, ModeMeans>;

// Factorized reference expectation of a word: occupation^j per number power,
// (2 pairMean)^k amplitude^r for |excess| = 2k + r (conjugated for raising excess).
inline Coeff word_mean(const WordMonomial& w, const MeanFieldContext& ctx) {
    Coeff out(1);
    for (const auto& [mode, mw] : w.factors) {
        auto it = ctx.find(mode);
        if (it == ctx.end()) throw std::invalid_argument(std::string("no reference state for mode ") + mode);
        const ModeMeans& mm = it->second;
        for (int j = 0; j < mw.numberPow; ++j) out = out * Coeff(mm.occupation);
        int mag = mw.excess < 0 ? -mw.excess : mw.excess;
        int pairs = mag / 2;
        Coeff pm = mm.pairMean + mm.pairMean;
        Coeff am = mm.amplitude;
        if (mw.excess > 0) {
            pm = pm.conj();
            am = am.conj();
        }
        for (int k = 0; k < pairs; ++k) out = out * pm;
        if (mag % 2) out = out * am;
    }
    return out;
}

// Basis of fluctuation operators. Every element must expand to a scalar multiple
// of a single distinct word; that bijection is what the reduction rules index by.
class BasisSet {
   public:
    BasisSet(std::vector<std::string> labels, std::vector<OperatorExpr> elements)
        : m_labels(std::move(labels)), m_elements(std::move(elements)) {
        if (m_labels.size() != m_elements.size()) throw std::invalid_argument("label/element count mismatch");
        for (size_t i = 0; i < m_elements.size(); ++i) {
            WordExpr we = to_words(m_elements[i]);
            if (we.size() != 1) throw std::invalid_argument("basis element " + m_labels[i] + " is not a single word");
            const auto& [w, s] = *we.begin();
            if (w.is_identity()) throw std::invalid_argument("basis element " + m_labels[i] + " is a constant");
            if (!m_index.emplace(w, std::pair<size_t, Coeff>{i, s}).second)
                throw std::invalid_argument("basis element " + m_labels[i] + " duplicates an earlier word");
        }
    }

    size_t size() const { return m_elements.size(); }
    const std::vector<std::string>& labels() const { return m_labels; }
    const std::vector<OperatorExpr>& elements() const { return m_elements; }
    const OperatorExpr& element(size_t i) const { return m_elements.at(i); }
    const std::string& label(size_t i) const { return m_labels.at(i); }

    std::optional<size_t> index_of(const std::string& label) const {
        auto it = std::find(m_labels.begin(), m_labels.end(), label);
        if (it == m_labels.end()) return std::nullopt;
        return (size_t)(it - m_labels.begin());
    }

    // Index and word-to-element scale, or nullopt if the word is not spanned.
    std::optional<std::pair<size_t, Coeff>> lookup(const WordMonomial& w) const {
        auto it = m_index.find(w);
        if (it == m_index.end()) return std::nullopt;
        return it->second;
    }

   private:
    std::vector<std::string> m_labels;
    std::vector<OperatorExpr> m_elements;
    std::map<WordMonomial, std::pair<size_t, Coeff>> m_index;
};

struct LinearCombination {
    std::vector<Coeff> coeffs;
    Coeff constant;
};

struct ReductionError : std::runtime_error {
    explicit ReductionError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// One ladder unit: a pair quantum (|excess| 2) or a single quantum (|excess| 1) on one mode.
struct LadderUnit {
    Mode mode;
    int excess;
    friend auto operator<=>(const LadderUnit&, const LadderUnit&) = default;
};

inline std::vector<LadderUnit> ladder_units(const WordMonomial& w) {
    std::vector<LadderUnit> units;
    for (const auto& [mode, mw] : w.factors) {
        int mag = mw.excess < 0 ? -mw.excess : mw.excess;
        int sign = mw.excess < 0 ? -1 : 1;
        for (int k = 0; k < mag / 2; ++k) units.push_back({mode, 2 * sign});
        if (mag % 2) units.push_back({mode, sign});
    }
    return units;
}

inline WordMonomial remove_unit(const WordMonomial& w, const LadderUnit& u) {
    WordMonomial out = w;
    auto it = out.factors.find(u.mode);
    it->second.excess -= u.excess;
    if (it->second.excess == 0 && it->second.numberPow == 0) out.factors.erase(it);
    return out;
}

inline WordMonomial unit_word(const LadderUnit& u) {
    WordMonomial w;
    w.factors[u.mode] = ModeWord{u.excess, 0};
    return w;
}

}  // namespace detail

// Reduces one word times a coefficient onto the basis, accumulating into `out`.
// Rule order: basis pass-through; partial number substitution keeping the
// highest-degree spanned remainder; unit splitting for unspanned pure ladders;
// symmetric decoupling for unspanned number products. Expectations against the
// reference state are preserved by every branch.
namespace detail {

inline void reduce_word(const WordMonomial& w, const Coeff& c, const BasisSet& basis,
                        const MeanFieldContext& ctx, LinearCombination& out);

inline void emit_basis(const WordMonomial& w, const Coeff& c, const BasisSet& basis, LinearCombination& out) {
    auto hit = basis.lookup(w);
    if (!hit) throw ReductionError("internal: emit of unspanned word " + to_string(w));
    out.coeffs[hit->first] += c / hit->second;
}

inline void reduce_pure_ladder(const WordMonomial& w, const Coeff& c, const BasisSet& basis,
                               const MeanFieldContext& ctx, LinearCombination& out) {
    auto units = ladder_units(w);
    if (units.size() == 1) {
        // A lone unspanned quantum carries no fluctuation the basis can hold.
        out.constant += c * word_mean(w, ctx);
        return;
    }
    if (units.size() == 2) {
        const WordMonomial r0 = remove_unit(w, units[0]);
        const WordMonomial r1 = remove_unit(w, units[1]);
        if (!basis.lookup(r0) || !basis.lookup(r1))
            throw ReductionError("no pair split onto the basis for " + to_string(w));
        Coeff half(Rat(1, 2));
        emit_basis(r0, c * half * word_mean(unit_word(units[0]), ctx), basis, out);
        emit_basis(r1, c * half * word_mean(unit_word(units[1]), ctx), basis, out);
        return;
    }
    // Three or more quanta: strip one unit so that both the unit and the
    // remainder are spanned, symmetrize, and sum distinct splits at full weight.
    std::set<std::pair<WordMonomial, WordMonomial>> splits;
    for (const auto& u : units) {
        WordMonomial rest = remove_unit(w, u);
        WordMonomial uw = unit_word(u);
        if (basis.lookup(rest) && basis.lookup(uw)) splits.insert({uw, rest});
    }
    if (splits.empty()) throw ReductionError("no unit split onto the basis for " + to_string(w));
    Coeff half(Rat(1, 2));
    for (const auto& [uw, rest] : splits) {
        emit_basis(rest, c * half * word_mean(uw, ctx), basis, out);
        emit_basis(uw, c * half * word_mean(rest, ctx), basis, out);
    }
    if (splits.size() > 1) out.constant -= c * Coeff(Rat((long)splits.size() - 1)) * word_mean(w, ctx);
}

inline void reduce_pure_number(const WordMonomial& w, const Coeff& c, const BasisSet& basis,
                               const MeanFieldContext& ctx, LinearCombination& out) {
    std::vector<std::pair<Mode, int>> powers;
    int total = 0;
    for (const auto& [mode, mw] : w.factors) {
        powers.push_back({mode, mw.numberPow});
        total += mw.numberPow;
    }
    auto occupation = [&](Mode m) { return Coeff(ctx.at(m).occupation); };
    auto single = [](Mode m) {
        WordMonomial s;
        s.factors[m] = ModeWord{0, 1};
        return s;
    };
    if (total == 1) {
        out.constant += c * occupation(powers[0].first);
        return;
    }
    if (powers.size() == 2 && total == 2) {
        // Symmetric decoupling n m -> <n> m + <m> n - <n><m> when both factors are
        // spanned; plain substitution of the unspanned factor otherwise.
        Mode ma = powers[0].first, mb = powers[1].first;
        bool ha = basis.lookup(single(ma)).has_value();
        bool hb = basis.lookup(single(mb)).has_value();
        if (ha && hb) {
            emit_basis(single(ma), c * occupation(mb), basis, out);
            emit_basis(single(mb), c * occupation(ma), basis, out);
            out.constant -= c * occupation(ma) * occupation(mb);
        } else if (ha) {
            emit_basis(single(ma), c * occupation(mb), basis, out);
        } else if (hb) {
            emit_basis(single(mb), c * occupation(ma), basis, out);
        } else {
            out.constant += c * occupation(ma) * occupation(mb);
        }
        return;
    }
    if (powers.size() == 2 && total == 3) {
        // Cubic number product: pull out the factor whose removal leaves a spanned
        // pair, then 4 x y z -> <x> y z + <x><y> z + <y><z> x + <z><x> y.
        struct Choice {
            Mode x;
            WordMonomial pair;
        };
        std::vector<Choice> choices;
        for (const auto& [mode, pw] : powers) {
            WordMonomial rest = w;
            auto it = rest.factors.find(mode);
            it->second.numberPow -= 1;
            if (it->second.numberPow == 0) rest.factors.erase(it);
            bool singles_ok = basis.lookup(single(mode)).has_value();
            for (const auto& [rm, rv] : rest.factors) singles_ok = singles_ok && basis.lookup(single(rm)).has_value();
            if (singles_ok && basis.lookup(rest) &&
                std::none_of(choices.begin(), choices.end(),
                             [&](const Choice& ch) { return ch.x == mode && ch.pair == rest; }))
                choices.push_back({mode, rest});
        }
        if (!choices.empty()) {
            for (const auto& ch : choices) {
                Mode mx = ch.x;
                Mode my = ch.pair.factors.begin()->first;
                Mode mz = ch.pair.factors.rbegin()->first;
                Coeff quarter(Rat(1, 4));
                emit_basis(ch.pair, c * quarter * occupation(mx), basis, out);
                emit_basis(single(mz), c * quarter * occupation(mx) * occupation(my), basis, out);
                emit_basis(single(mx), c * quarter * occupation(my) * occupation(mz), basis, out);
                emit_basis(single(my), c * quarter * occupation(mz) * occupation(mx), basis, out);
            }
            if (choices.size() > 1)
                out.constant -= c * Coeff(Rat((long)choices.size() - 1)) * word_mean(w, ctx);
            return;
        }
    }
    // Fallback: peel one power off the mode with the largest exponent and recurse.
    auto peak = std::max_element(powers.begin(), powers.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    WordMonomial rest = w;
    auto it = rest.factors.find(peak->first);
    it->second.numberPow -= 1;
    if (it->second.numberPow == 0) rest.factors.erase(it);
    reduce_word(rest, c * occupation(peak->first), basis, ctx, out);
}

inline void reduce_word(const WordMonomial& w, const Coeff& c, const BasisSet& basis,
                        const MeanFieldContext& ctx, LinearCombination& out) {
    if (w.is_identity()) {
        out.constant += c;
        return;
    }
    if (basis.lookup(w)) {
        emit_basis(w, c, basis, out);
        return;
    }
    bool has_ladder = false;
    for (const auto& [mode, mw] : w.factors)
        if (mw.excess != 0) has_ladder = true;
    if (has_ladder) {
        // Enumerate which number powers to keep; retain the highest spanned degree.
        std::vector<std::pair<Mode, int>> numbered;
        for (const auto& [mode, mw] : w.factors)
            if (mw.numberPow > 0) numbered.push_back({mode, mw.numberPow});
        std::vector<std::pair<WordMonomial, Coeff>> best;
        int bestDegree = -1;
        std::vector<int> keep(numbered.size(), 0);
        auto visit = [&](auto&& self, size_t idx) -> void {
            if (idx == numbered.size()) {
                WordMonomial cand = w;
                Coeff factor(1);
                int degree = 0;
                for (size_t i = 0; i < numbered.size(); ++i) {
                    auto it = cand.factors.find(numbered[i].first);
                    it->second.numberPow = keep[i];
                    degree += keep[i];
                    for (int k = keep[i]; k < numbered[i].second; ++k)
                        factor = factor * Coeff(ctx.at(numbered[i].first).occupation);
                    if (it->second.numberPow == 0 && it->second.excess == 0) cand.factors.erase(it);
                }
                if (!basis.lookup(cand)) return;
                if (degree > bestDegree) {
                    bestDegree = degree;
                    best.clear();
                }
                if (degree == bestDegree) best.push_back({cand, factor});
                return;
            }
            for (keep[idx] = 0; keep[idx] <= numbered[idx].second; ++keep[idx]) self(self, idx + 1);
        };
        visit(visit, 0);
        if (!best.empty()) {
            for (const auto& [cand, factor] : best) emit_basis(cand, c * factor, basis, out);
            if (best.size() > 1)
                out.constant -= c * Coeff(Rat((long)best.size() - 1)) * word_mean(w, ctx);
            return;
        }
        // No spanned remainder at any degree: substitute every number power and
        // split the surviving ladder word.
        WordMonomial ladder = w;
        Coeff factor(1);
        for (auto it = ladder.factors.begin(); it != ladder.factors.end();) {
            for (int k = 0; k < it->second.numberPow; ++k) factor = factor * Coeff(ctx.at(it->first).occupation);
            it->second.numberPow = 0;
            it = it->second.excess == 0 ? ladder.factors.erase(it) : std::next(it);
        }
        reduce_pure_ladder(ladder, c * factor, basis, ctx, out);
        return;
    }
    reduce_pure_number(w, c, basis, ctx, out);
}

}  // namespace detail

inline LinearCombination mean_field_reduce(const OperatorExpr& expr, const BasisSet& basis,
                                           const MeanFieldContext& ctx) {
    LinearCombination out;
    out.coeffs.assign(basis.size(), Coeff(0));
    for (const auto& [w, c] : to_words(expr)) detail::reduce_word(w, c, basis, ctx, out);
    return out;
}

struct ClosureReport {
    bool closed = true;
    std::vector<std::string> failures;
};

// Every pairwise commutator of basis elements must reduce without residual.
inline ClosureReport verify_closure(const BasisSet& basis, const MeanFieldContext& ctx) {
    ClosureReport report;
    for (size_t i = 0; i < basis.size(); ++i) {
        for (size_t j = i + 1; j < basis.size(); ++j) {
            try {
                (void)mean_field_reduce(commute(basis.element(i), basis.element(j)), basis, ctx);
            } catch (const ReductionError& err) {
                report.closed = false;
                report.failures.push_back("[" + basis.label(i) + ", " + basis.label(j) + "]: " + err.what());
            }
        }
    }
    return report;
}

// Commutation data given as an explicit table rather than derived from words,
// for bases whose elements are not single words (trigonometric combinations).
struct CommutatorTable {
    std::vector<std::string> labels;
    // entries[{i,j}] for i < j; missing means zero. Affine in the basis.
    std::map<std::pair<size_t, size_t>, LinearCombination> entries;

    LinearCombination bracket(size_t i, size_t j) const {
        LinearCombination zero;
        zero.coeffs.assign(labels.size(), Coeff(0));
        if (i == j) return zero;
        auto it = entries.find({std::min(i, j), std::max(i, j)});
        if (it == entries.end()) return zero;
        LinearCombination lc = it->second;
        if (i > j) {
            for (auto& c : lc.coeffs) c = -c;
            lc.constant = -lc.constant;
        }
        return lc;
    }
};

// Checks the Jacobi identity on a tabulated algebra; constants are central, so
// only the linear parts feed nested brackets.
inline ClosureReport verify_closure(const CommutatorTable& table) {
    ClosureReport report;
    size_t n = table.labels.size();
    auto nested = [&](size_t i, const LinearCombination& lc) {
        LinearCombination acc;
        acc.coeffs.assign(n, Coeff(0));
        for (size_t k = 0; k < n; ++k) {
            if (lc.coeffs[k].is_zero()) continue;
            LinearCombination inner = table.bracket(i, k);
            for (size_t q = 0; q < n; ++q) acc.coeffs[q] += lc.coeffs[k] * inner.coeffs[q];
            acc.constant += lc.coeffs[k] * inner.constant;
        }
        return acc;
    };
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            for (size_t k = j + 1; k < n; ++k) {
                LinearCombination sum;
                sum.coeffs.assign(n, Coeff(0));
                auto add = [&](const LinearCombination& lc) {
                    for (size_t q = 0; q < n; ++q) sum.coeffs[q] += lc.coeffs[q];
                    sum.constant += lc.constant;
                };
                add(nested(i, table.bracket(j, k)));
                add(nested(j, table.bracket(k, i)));
                add(nested(k, table.bracket(i, j)));
                bool zero = sum.constant.is_zero();
                for (const auto& c : sum.coeffs) zero = zero && c.is_zero();
                if (!zero) {
                    report.closed = false;
                    report.failures.push_back("jacobi fails at (" + table.labels[i] + ", " + table.labels[j] + ", " +
                                              table.labels[k] + ")");
                }
            }
    return report;
}

}  // namespace hilange
