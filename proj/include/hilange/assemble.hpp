#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mean_field.hpp"

namespace hilange {

// Real noise coupling magnitude factor * sqrt(radicand); kept split so squared
// weights stay exact rationals.
struct NoiseWeight {
    Rat factor;
    Rat radicand;
    Rat squared() const { return factor * factor * radicand; }
    double value() const { return to_double(factor) * std::sqrt(to_double(radicand)); }
};

// d<x>/dt = M x + drive + sum over ports of weight * input(t).
struct LinearSystem {
    std::string model;
    std::vector<std::string> labels;
    std::vector<std::vector<Coeff>> M;
    std::vector<Coeff> drive;
    std::vector<std::string> ports;
    std::vector<std::map<size_t, NoiseWeight>> noise;

    size_t size() const { return labels.size(); }

    size_t port_index(const std::string& name) {
        for (size_t k = 0; k < ports.size(); ++k)
            if (ports[k] == name) return k;
        ports.push_back(name);
        return ports.size() - 1;
    }

    Eigen::MatrixXcd matrix() const {
        size_t n = size();
        Eigen::MatrixXcd out(n, n);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) out(i, j) = to_complex(M[i][j]);
        return out;
    }

    Eigen::VectorXcd drive_vector() const {
        Eigen::VectorXcd out(size());
        for (size_t i = 0; i < size(); ++i) out(i) = to_complex(drive[i]);
        return out;
    }

    Eigen::MatrixXd noise_matrix() const {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(size(), ports.size());
        for (size_t i = 0; i < size(); ++i)
            for (const auto& [k, w] : noise[i]) out(i, k) = w.value();
        return out;
    }
};

enum class ChannelScope {
    Anchored,   // damps rows sharing the anchor's single-mode factor
    ModeQuanta  // damps every row by its quanta count in the anchor's mode
};

struct DecayChannel {
    std::string port;     // noise binding id, one column of the noise matrix
    Rat rate;             // angular frequency, >= 0
    OperatorExpr anchor;  // Anchored: a basis element; ModeQuanta: a bare annihilator
    ChannelScope scope = ChannelScope::Anchored;
};

inline Coeff expectation(const OperatorExpr& e, const MeanFieldContext& ctx) {
    Coeff out(0);
    for (const auto& [w, c] : to_words(e)) out += c * word_mean(w, ctx);
    return out;
}

inline OperatorExpr heisenberg_rhs(const OperatorExpr& x, const OperatorExpr& H) {
    return commute(x, H) * Coeff(Rat(0), Rat(-1));
}

namespace detail {

inline WordMonomial single_word(const BasisSet& basis, size_t i) {
    WordExpr we = to_words(basis.element(i));
    return we.begin()->first;
}

// Mean-square reference magnitude of a one-word operator: |c|^2 times
// occupation per quantum, so fluctuating modes register their r.m.s. size.
inline Rat rms_squared(const OperatorExpr& e, const MeanFieldContext& ctx) {
    WordExpr we = to_words(e);
    if (we.empty()) return 0;
    if (we.size() != 1) throw std::invalid_argument("r.m.s. magnitude needs a one-word operator");
    const auto& [w, c] = *we.begin();
    Rat out = c.norm2();
    for (const auto& [mode, mw] : w.factors) {
        int quanta = (mw.excess < 0 ? -mw.excess : mw.excess) + 2 * mw.numberPow;
        for (int q = 0; q < quanta; ++q) out *= ctx.at(mode).occupation;
    }
    return out;
}

inline NoiseWeight weight_from_square(const Rat& square, const Rat& rate) {
    if (auto root = exact_sqrt(square)) return {*root, rate};
    return {1, square * rate};
}

}  // namespace detail

// Builds rows from the Hamiltonian by reduction, then applies decay channels.
// Anchored channels damp by half the rate times <[x, x^dagger]> of the anchor,
// identically on the adjoint partner's row, and couple both rows to the
// channel's port with that same susceptibility as noise weight. ModeQuanta
// channels damp each row by half the rate per quantum of the decaying mode and
// couple rows through the reference-state commutator magnitudes.
inline void apply_channel(LinearSystem& sys, const BasisSet& basis, const MeanFieldContext& ctx,
                          const DecayChannel& ch) {
    WordExpr anchor_words = to_words(ch.anchor);
    if (anchor_words.size() != 1)
        throw std::invalid_argument("channel anchor must be a single-word operator");
    if (ch.scope == ChannelScope::Anchored) {
        Coeff sus = expectation(commute(ch.anchor, adjoint(ch.anchor)), ctx);
        if (!sus.is_real()) throw std::invalid_argument("complex anchor susceptibility");
        Rat s = sus.re < 0 ? Rat(-sus.re) : sus.re;
        WordMonomial anchor_word = anchor_words.begin()->first;
        WordMonomial adjoint_word = to_words(adjoint(ch.anchor)).begin()->first;
        if (anchor_word.factors.size() != 1)
            throw std::invalid_argument("anchored channel needs a one-mode anchor");
        Mode anchor_mode = anchor_word.factors.begin()->first;
        for (size_t i = 0; i < basis.size(); ++i) {
            WordMonomial w = detail::single_word(basis, i);
            auto part = w.factors.find(anchor_mode);
            if (part == w.factors.end()) continue;
            WordMonomial factor;
            factor.factors[anchor_mode] = part->second;
            if (factor != anchor_word && factor != adjoint_word) continue;
            sys.M[i][i] -= Coeff(ch.rate * s / 2);
            // The adjoint partner couples to its own input line.
            if (w == anchor_word)
                sys.noise[i][sys.port_index(ch.port)] = NoiseWeight{s, ch.rate};
            else if (w == adjoint_word)
                sys.noise[i][sys.port_index(ch.port + "d")] = NoiseWeight{s, ch.rate};
        }
    } else {
        size_t port = sys.port_index(ch.port);
        const WordMonomial& zw = anchor_words.begin()->first;
        if (zw.factors.size() != 1 || zw.factors.begin()->second != ModeWord{-1, 0})
            throw std::invalid_argument("quanta channel anchor must be a bare annihilator");
        Mode mode = zw.factors.begin()->first;
        OperatorExpr z = annihilate(mode);
        for (size_t i = 0; i < basis.size(); ++i) {
            WordMonomial w = detail::single_word(basis, i);
            auto part = w.factors.find(mode);
            int quanta = 0;
            if (part != w.factors.end())
                quanta = (part->second.excess < 0 ? -part->second.excess : part->second.excess) +
                         2 * part->second.numberPow;
            if (quanta) sys.M[i][i] -= Coeff(ch.rate * Rat(quanta) / 2);
            Rat q1 = detail::rms_squared(commute(z, basis.element(i)), ctx);
            Rat q2 = detail::rms_squared(commute(z, adjoint(basis.element(i))), ctx);
            if (q1 == 0 && q2 == 0) continue;
            if (q1 != 0 && q2 != 0) {
                if (q1 != q2) throw std::invalid_argument("mixed commutator magnitudes on row " + sys.labels[i]);
                NoiseWeight base = detail::weight_from_square(q1, ch.rate);
                base.factor *= 2;
                sys.noise[i][port] = base;
            } else {
                sys.noise[i][port] = detail::weight_from_square(q1 == 0 ? q2 : q1, ch.rate);
            }
        }
    }
}

// table_rows lists rows whose M entries and drive the caller sets afterwards;
// their reductions are skipped (for bases that close only pairwise, not
// against the full Hamiltonian).
inline LinearSystem linearize_system(const OperatorExpr& H, const BasisSet& basis,
                                     const MeanFieldContext& ctx,
                                     const std::vector<DecayChannel>& channels,
                                     const std::set<size_t>& table_rows = {}) {
    LinearSystem sys;
    sys.labels = basis.labels();
    sys.M.assign(basis.size(), std::vector<Coeff>(basis.size(), Coeff(0)));
    sys.drive.assign(basis.size(), Coeff(0));
    sys.noise.assign(basis.size(), {});

    for (size_t i = 0; i < basis.size(); ++i) {
        if (table_rows.count(i)) continue;
        LinearCombination lc = mean_field_reduce(heisenberg_rhs(basis.element(i), H), basis, ctx);
        sys.M[i] = std::move(lc.coeffs);
        sys.drive[i] = lc.constant;
    }
    for (const auto& ch : channels) apply_channel(sys, basis, ctx, ch);
    return sys;
}

// Largest eigenvalue real part; negative means every fluctuation decays.
inline double stability_margin(const Eigen::MatrixXcd& M) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(M, false);
    double margin = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < M.rows(); ++i) margin = std::max(margin, solver.eigenvalues()(i).real());
    return margin;
}

inline double stability_margin(const LinearSystem& sys) { return stability_margin(sys.matrix()); }

// Fixed point of d<x>/dt = M x + drive.
inline Eigen::VectorXcd steady_state(const LinearSystem& sys) {
    return sys.matrix().colPivHouseholderQr().solve(-sys.drive_vector());
}

}  // namespace hilange
