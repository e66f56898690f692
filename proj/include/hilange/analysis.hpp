#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "models.hpp"
#include "spectral.hpp"

namespace hilange {

// Zero-delay second-order correlation from the equal-time pair correlators
// Psi(0) and Upsilon(0) of the single-quantum input field.
inline double g2_zero(double nbar, double Psi0, double Upsilon0) {
    if (!(nbar > 0)) throw std::invalid_argument("g2 needs a positive occupation");
    return 2.0 / (nbar * nbar) * Psi0 * (Psi0 + Upsilon0) - (4.0 * nbar + 2.0) / (nbar * nbar);
}

// Same quantity from an integrated pair-operator output density.
inline double g2_zero_from_spectrum(const SpectrumResult& sr, double nbar,
                                    const std::string& label = "c") {
    if (!(nbar > 0)) throw std::invalid_argument("g2 needs a positive occupation");
    double integral = spectrum_integral(sr, label).value;
    return 4.0 / (nbar * nbar) * integral - (4.0 * nbar + 2.0) / (nbar * nbar);
}

// Occupation where g2(0) = 1 for unit Gaussian correlators: the positive root
// of nbar^2 + 4 nbar - 2 = 0.
inline double laser_threshold_occupation() { return std::sqrt(6.0) - 2.0; }

struct BistabilityPoint {
    double sweep = 0;
    std::array<std::complex<double>, 3> roots{};  // branch-continued amplitudes
    std::array<double, 3> occupations{};
    std::array<bool, 3> physical{};  // real positive occupation root
    size_t physical_count = 0;
};

struct BistabilityCurve {
    char axis = 'a';  // 'a': drive amplitude, 'D': pump detuning
    std::vector<BistabilityPoint> points;
};

// Steady-state photon-number branches along a parameter sweep, ordered by
// nearest-neighbor continuation so S-curve branches stay contiguous.
inline BistabilityCurve bistability_curve(ModelParams p, char axis, const std::vector<double>& sweep) {
    if (axis != 'a' && axis != 'D') throw std::invalid_argument("sweep axis must be 'a' or 'D'");
    if (sweep.empty()) throw std::invalid_argument("sweep needs at least one point");
    BistabilityCurve out;
    out.axis = axis;
    for (double v : sweep) {
        if (axis == 'a')
            p.alpha = Coeff(rat_from_double(v));
        else
            p.Delta = rat_from_double(v);
        CubicSolution sol = photon_number_cubic(p);

        std::array<std::complex<double>, 3> roots;
        std::array<double, 3> occ;
        std::array<bool, 3> phys;
        for (size_t i = 0; i < 3; ++i) {
            roots[i] = sol.companion[i].root;
            occ[i] = sol.companion[i].nbar;
            phys[i] = sol.companion[i].real_positive;
        }

        std::array<size_t, 3> order{0, 1, 2};
        if (out.points.empty()) {
            std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                if (roots[a].real() != roots[b].real()) return roots[a].real() < roots[b].real();
                return roots[a].imag() < roots[b].imag();
            });
        } else {
            const auto& prev = out.points.back().roots;
            double best = std::numeric_limits<double>::infinity();
            std::array<size_t, 3> perm{0, 1, 2};
            std::sort(perm.begin(), perm.end());
            do {
                double cost = 0;
                for (size_t i = 0; i < 3; ++i) cost += std::abs(roots[perm[i]] - prev[i]);
                if (cost < best) {
                    best = cost;
                    order = perm;
                }
            } while (std::next_permutation(perm.begin(), perm.end()));
        }

        BistabilityPoint pt;
        pt.sweep = v;
        for (size_t i = 0; i < 3; ++i) {
            pt.roots[i] = roots[order[i]];
            pt.occupations[i] = occ[order[i]];
            pt.physical[i] = phys[order[i]];
            if (pt.physical[i]) ++pt.physical_count;
        }
        out.points.push_back(pt);
    }
    return out;
}

struct AsymmetryReport {
    double detuning = 0;
    double probe_plus = 0, probe_minus = 0;      // read-out frequencies
    double density_plus = 0, density_minus = 0;  // optical output densities there
    double ratio = 0;                            // density_plus / density_minus
};

namespace detail {

// Quadratic through the three grid points nearest w, evaluated at w.
inline double parabolic_read(const std::vector<double>& x, const std::vector<double>& y, double w) {
    if (x.size() < 3) throw std::invalid_argument("read-out needs at least three grid points");
    if (w < x.front() || w > x.back())
        throw std::invalid_argument("read-out frequency " + num17(w) + " is outside the grid");
    size_t i = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < x.size(); ++k) {
        double d = std::abs(x[k] - w);
        if (d < best) {
            best = d;
            i = k;
        }
    }
    i = std::clamp<size_t>(i, 1, x.size() - 2);
    double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    double l0 = (w - x1) * (w - x2) / ((x0 - x1) * (x0 - x2));
    double l1 = (w - x0) * (w - x2) / ((x1 - x0) * (x1 - x2));
    double l2 = (w - x0) * (w - x1) / ((x2 - x0) * (x2 - x1));
    return y[i - 1] * l0 + y[i] * l1 + y[i + 1] * l2;
}

}  // namespace detail

// Optical output density at probe frequencies +/- Omega for the cross-basis
// optomechanical model under strictly symmetric input densities: vacuum on the
// optical channels, a flat thermal floor on the mechanical one.
inline AsymmetryReport sideband_asymmetry(const ModelParams& p, const FrequencyGrid& grid) {
    LinearSystem sys = om_std_2_system(p);
    NoiseBook book{{"vac", NoiseModel::vacuum()}, {"mech", NoiseModel::thermal(to_double(p.mbar))}};
    std::map<std::string, std::string> bindings;
    for (const auto& port : sys.ports) bindings[port] = port == "b" ? "mech" : "vac";

    SpectrumResult sr;
    try {
        sr = output_spectra(sys, book, bindings, grid);
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string("sideband read-out failed: ") + e.what());
    }

    AsymmetryReport rep;
    rep.detuning = to_double(p.Delta);
    rep.probe_plus = to_double(p.Omega);
    rep.probe_minus = -rep.probe_plus;
    const auto& optical = sr.port("a");
    rep.density_plus = detail::parabolic_read(sr.omega, optical, rep.probe_plus);
    rep.density_minus = detail::parabolic_read(sr.omega, optical, rep.probe_minus);
    if (!(std::abs(rep.density_minus) > 1e-15))
        throw std::runtime_error("sideband ratio undefined: lower-sideband density below floor");
    rep.ratio = rep.density_plus / rep.density_minus;
    return rep;
}

// Husimi moment with one shared coherent amplitude: antinormal order, then
// a -> alpha and ad -> conj(alpha) in every mode.
inline std::complex<double> q_moment(const OperatorExpr& expr, std::complex<double> alpha) {
    std::map<Mode, Coeff> amp;
    Coeff a(rat_from_double(alpha.real()), rat_from_double(alpha.imag()));
    for (const auto& [mono, c] : expr.terms()) {
        (void)c;
        for (const auto& [mode, pw] : mono.factors) {
            (void)pw;
            amp.emplace(mode, a);
        }
    }
    return to_complex(phase_space_moment(expr, amp));
}

}  // namespace hilange
