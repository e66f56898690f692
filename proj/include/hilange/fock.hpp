#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "ops.hpp"

namespace hilange {

// Truncated number-state representation used as an independent numerical check
// on the symbolic algebra. Matrix entries near the cutoff are corrupted by
// truncation, so comparisons are restricted to a safe sub-block.
class FockSpace {
public:
    explicit FockSpace(std::map<Mode, int> cutoffs) : m_cutoffs(std::move(cutoffs)) {
        m_dim = 1;
        for (const auto& [mode, d] : m_cutoffs) {
            if (d < 1) throw std::invalid_argument("FockSpace: cutoff must be positive");
            m_dim *= d;
        }
    }

    int dim() const { return m_dim; }
    const std::map<Mode, int>& cutoffs() const { return m_cutoffs; }

    Eigen::MatrixXcd matrix(const OperatorExpr& e) const {
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(m_dim, m_dim);
        for (const auto& [mono, coeff] : e.terms()) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(1, 1);
            for (const auto& [mode, d] : m_cutoffs) {
                ModePowers p{};
                auto it = mono.factors.find(mode);
                if (it != mono.factors.end()) p = it->second;
                acc = kron(acc, mode_matrix(p, d));
            }
            for (const auto& [mode, p] : mono.factors)
                if (!m_cutoffs.count(mode))
                    throw std::invalid_argument(std::string("FockSpace: unknown mode ") + mode);
            out += to_complex(coeff) * acc;
        }
        return out;
    }

    // Indices whose occupations stay at least `margin` below every cutoff.
    std::vector<int> safe_indices(int margin) const {
        std::vector<int> out;
        for (int i = 0; i < m_dim; ++i) {
            bool ok = true;
            int rest = i;
            for (auto it = m_cutoffs.rbegin(); it != m_cutoffs.rend(); ++it) {
                int occ = rest % it->second;
                rest /= it->second;
                if (occ > it->second - 1 - margin) {
                    ok = false;
                    break;
                }
            }
            if (ok) out.push_back(i);
        }
        return out;
    }

    // Max |A-B| over the sub-block untouched by cutoff artifacts for either operand.
    double max_deviation(const OperatorExpr& a, const OperatorExpr& b) const {
        int margin = std::max(a.degree(), b.degree());
        Eigen::MatrixXcd ma = matrix(a), mb = matrix(b);
        auto idx = safe_indices(margin);
        if (idx.empty()) throw std::invalid_argument("FockSpace: cutoff too small for operand degree");
        double worst = 0.0;
        for (int r : idx)
            for (int c : idx) worst = std::max(worst, std::abs(ma(r, c) - mb(r, c)));
        return worst;
    }

    bool agree(const OperatorExpr& a, const OperatorExpr& b, double tol = 1e-10) const {
        return max_deviation(a, b) <= tol;
    }

private:
    static Eigen::MatrixXd mode_matrix(const ModePowers& p, int d) {
        // <i| ad^r a^l |j>: nonzero for i = j - l + r, j >= l, with the usual ladder factors.
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
        for (int j = p.lower; j < d; ++j) {
            int i = j - p.lower + p.raise;
            if (i < 0 || i >= d) continue;
            double v = 1.0;
            for (int k = 0; k < p.lower; ++k) v *= std::sqrt(double(j - k));
            for (int k = 0; k < p.raise; ++k) v *= std::sqrt(double(j - p.lower + 1 + k));
            m(i, j) = v;
        }
        return m;
    }

    static Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        return out;
    }

    std::map<Mode, int> m_cutoffs;
    int m_dim;
};

}  // namespace hilange
