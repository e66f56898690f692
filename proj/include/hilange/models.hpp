#pragma once

#include <array>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "assemble.hpp"

namespace hilange {

inline constexpr double hbar_SI = 1.054571817e-34;
inline constexpr double boltzmann_SI = 1.380649e-23;

// Bose occupation of a bath mode at frequency Omega (rad/s) and temperature T (K).
inline double thermal_occupation(double Omega, double T) {
    if (Omega <= 0) throw std::invalid_argument("thermal occupation needs a positive frequency");
    if (T < 0) throw std::invalid_argument("thermal occupation needs a nonnegative temperature");
    if (T == 0) return 0.0;
    return 1.0 / std::expm1(hbar_SI * Omega / (boltzmann_SI * T));
}

// Steady cavity photon number of the linearly damped mode under coherent input.
inline double photon_number_linear(std::complex<double> alpha, double Gamma1) {
    if (Gamma1 <= 0) throw std::invalid_argument("photon number needs a positive damping rate");
    return 4.0 * std::norm(alpha) / Gamma1;
}

// Exact square root when the argument is a perfect rational square, dyadic
// approximation otherwise. Catalog entries stay exact for square occupations.
inline Rat root_or_dyadic(const Rat& x) {
    if (auto r = exact_sqrt(x)) return *r;
    return rat_from_double(std::sqrt(to_double(x)));
}

struct ModelParams {
    Rat gamma;          // quadratic interaction rate
    Rat g0;             // dispersive optomechanical rate
    Coeff g{Rat(0)};    // pump amplitude of the driven oscillator models
    Rat zeta;           // quartic / Kerr strength
    Rat chi;            // cross-Kerr strength
    Rat Delta;          // optical detuning
    Rat Omega;          // mechanical frequency
    Rat omega;          // optical or oscillator frequency
    Rat kappa;          // photon field decay rate
    Rat Gamma_m;        // phonon field decay rate
    Rat Gamma1;         // photon pair-channel rate (2 kappa when derived)
    Rat Gamma2;         // phonon pair-channel rate (2 Gamma_m when derived)
    Rat nbar;           // photon reference occupation
    Rat mbar;           // phonon reference occupation
    Coeff alpha{Rat(0)};  // input flux amplitude
    Rat Cbar, Sbar;     // readout quadrature reference values
    int order = 0;      // 0 = the order implied by the model id
    bool include_self_energy = false;
    bool ultracold = false;         // drop the g0(mbar+1) shift from the pair coupling
    bool engine_number_sign = false;  // keep the algebra's own sign on number rows
    int sign_a = +1, sign_b = +1;   // quadrature square sign choices
    size_t diode_order = 2;
    Rat mu = 1, tau = 1;            // diode circuit coefficients (kappa is shared)
    Rat vbar = 0;                   // diode constant drive level
};

namespace detail {

inline void require_rate(const Rat& r, const char* name) {
    if (r < 0) throw std::invalid_argument(std::string(name) + " must be nonnegative");
}

inline void require_order(const ModelParams& p, int implied) {
    if (p.order != 0 && p.order != implied)
        throw std::invalid_argument("model id implies truncation order " + std::to_string(implied));
}

inline Coeff im(const Rat& x) { return Coeff(Rat(0), x); }

}  // namespace detail

// Pair-coupled single-photon model: one photon mode against the phonon pair
// triple, first-order references for both occupations.
inline LinearSystem quad_std_1_system(const ModelParams& p) {
    detail::require_rate(p.Gamma1, "Gamma1");
    detail::require_rate(p.Gamma2, "Gamma2");
    detail::require_order(p, 1);
    OperatorExpr d = pair_annihilate('b'), dd = pair_create('b'), m = number('b');
    OperatorExpr H = (Coeff(p.gamma * 2) * number('a')) * (d + dd + Coeff(Rat(p.sign_b)) * m);
    if (p.include_self_energy) H += Coeff(p.Delta) * number('a') + Coeff(p.Omega) * m;
    BasisSet basis({"a", "d", "dd", "m"}, {annihilate('a'), d, dd, m});
    MeanFieldContext ctx{{'a', ModeMeans::coherent_occupation(p.nbar)},
                         {'b', ModeMeans::coherent_occupation(p.mbar)}};
    LinearSystem sys = linearize_system(H, basis, ctx,
                                        {{"a", p.Gamma1, annihilate('a')}, {"d", p.Gamma2, d}});
    sys.model = "quad_std_1";
    return sys;
}

// Fully pair-coupled model: photon and phonon pair triples, thermal references.
inline LinearSystem quad_full_1_system(const ModelParams& p) {
    detail::require_rate(p.Gamma1, "Gamma1");
    detail::require_rate(p.Gamma2, "Gamma2");
    detail::require_order(p, 1);
    OperatorExpr c = pair_annihilate('a'), cd = pair_create('a'), n = number('a');
    OperatorExpr d = pair_annihilate('b'), dd = pair_create('b'), m = number('b');
    OperatorExpr H = (Coeff(p.gamma * 4) * (d + dd + Coeff(Rat(p.sign_b)) * m)) *
                     (c + cd + Coeff(Rat(p.sign_a)) * n);
    if (p.include_self_energy) H += Coeff(p.Delta) * n + Coeff(p.Omega) * m;
    BasisSet basis({"c", "cd", "n", "d", "dd", "m"}, {c, cd, n, d, dd, m});
    MeanFieldContext ctx{{'a', ModeMeans::thermal(p.nbar)}, {'b', ModeMeans::thermal(p.mbar)}};
    LinearSystem sys =
        linearize_system(H, basis, ctx, {{"c", p.Gamma1, c}, {"d", p.Gamma2, d}});
    sys.model = "quad_full_1";
    return sys;
}

// Fully pair-coupled model extended by the nine photon-phonon cross products.
// Cross rows accumulate the pair-channel damping of each matching factor; their
// input couplings weigh the partner factor at its reference magnitude.
inline LinearSystem quad_std_2_system(const ModelParams& p) {
    detail::require_rate(p.Gamma1, "Gamma1");
    detail::require_rate(p.Gamma2, "Gamma2");
    detail::require_order(p, 2);
    OperatorExpr c = pair_annihilate('a'), cd = pair_create('a'), n = number('a');
    OperatorExpr d = pair_annihilate('b'), dd = pair_create('b'), m = number('b');
    std::vector<std::string> labels{"c", "cd", "n", "d", "dd", "m"};
    std::vector<OperatorExpr> el{c, cd, n, d, dd, m};
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 3; j < 6; ++j) {
            labels.push_back(labels[i] + " " + labels[j]);
            el.push_back(el[i] * el[j]);
        }
    OperatorExpr H = (Coeff(p.gamma * 4) * (d + dd + Coeff(Rat(p.sign_b)) * m)) *
                     (c + cd + Coeff(Rat(p.sign_a)) * n);
    if (p.include_self_energy) H += Coeff(p.Delta) * n + Coeff(p.Omega) * m;
    BasisSet basis(labels, el);
    MeanFieldContext ctx{{'a', ModeMeans::thermal(p.nbar)}, {'b', ModeMeans::thermal(p.mbar)}};
    LinearSystem sys =
        linearize_system(H, basis, ctx, {{"c", p.Gamma1, c}, {"d", p.Gamma2, d}});
    Rat s1 = p.nbar + Rat(1, 2), s2 = p.mbar + Rat(1, 2);
    for (size_t i = 6; i < basis.size(); ++i) {
        WordMonomial w = to_words(basis.element(i)).begin()->first;
        const ModeWord& wa = w.factors.at('a');
        const ModeWord& wb = w.factors.at('b');
        Rat rms_a = wa.numberPow ? p.nbar : p.nbar / 2;
        Rat rms_b = wb.numberPow ? p.mbar : p.mbar / 2;
        if (!wa.numberPow)
            sys.noise[i][sys.port_index(wa.excess < 0 ? "c" : "cd")] = {s1 * rms_b, p.Gamma1};
        if (!wb.numberPow)
            sys.noise[i][sys.port_index(wb.excess < 0 ? "d" : "dd")] = {s2 * rms_a, p.Gamma2};
    }
    sys.model = "quad_std_2";
    return sys;
}

// Quartic oscillator in the pair-operator basis, coherent reference. Decay
// rates double per quantum pair: a row holding q pairs damps at half the
// 2^(q-1)-scaled base rate and couples to its own input line at that weight.
inline LinearSystem anharmonic_system(const ModelParams& p) {
    detail::require_rate(p.kappa, "kappa");
    detail::require_order(p, 2);
    OperatorExpr c = pair_annihilate('a'), cd = pair_create('a'), n = number('a');
    BasisSet basis({"c", "cd", "n", "n^2", "c^2", "cd^2", "n c", "cd n"},
                   {c, cd, n, n * n, c * c, cd * cd, n * c, cd * n});
    Coeff z(p.zeta);
    OperatorExpr H = Coeff(p.omega - p.zeta * 3) * n - (z * Rat(3)) * (n * n) -
                     (z * Rat(2)) * (c * c + cd * cd) - (z * Rat(6)) * (c + cd) -
                     (z * Rat(4)) * (n * c + cd * n);
    MeanFieldContext ctx{{'a', ModeMeans::coherent_occupation(p.nbar)}};
    LinearSystem sys = linearize_system(H, basis, ctx, {});
    Rat base = p.kappa * 2;
    for (size_t i = 0; i < basis.size(); ++i) {
        WordMonomial w = to_words(basis.element(i)).begin()->first;
        const ModeWord& mw = w.factors.at('a');
        int pairs = (mw.excess < 0 ? -mw.excess : mw.excess) / 2 + static_cast<int>(mw.numberPow);
        Rat rate = base;
        for (int q = 1; q < pairs; ++q) rate *= 2;
        sys.M[i][i] -= Coeff(rate / 2);
        sys.noise[i][sys.port_index(sys.labels[i])] = {1, rate};
    }
    sys.model = "anharmonic";
    return sys;
}

// Reference input-line means for a coherent drive of the quartic oscillator,
// normalized so the system's noise weights carry the rate factors. The n^2
// line has no entry in the coherent-drive dictionary and stays zero.
inline std::map<std::string, std::complex<double>> anharmonic_input_means(
    std::complex<double> beta) {
    double f = 2.0 * std::norm(beta);
    std::complex<double> b2 = beta * beta;
    return {{"c", beta},           {"cd", std::conj(beta)},
            {"n", f + 1.0},        {"n^2", 0.0},
            {"c^2", b2},           {"cd^2", std::conj(b2)},
            {"n c", b2 * (f + 3.0)}, {"cd n", std::conj(b2) * (f + 3.0)}};
}

// Pumped oscillator in the pair basis. The algebra puts the opposite sign on
// the number row from the catalog convention; that convention is what keeps
// the model unconditionally stable, so it is the default.
inline LinearSystem amplifier_system(const ModelParams& p) {
    detail::require_rate(p.Gamma2, "Gamma2");
    OperatorExpr c = pair_annihilate('a'), cd = pair_create('a'), n = number('a');
    OperatorExpr H = Coeff(p.omega) * n + p.g * c + p.g.conj() * cd;
    BasisSet basis({"n", "c", "cd"}, {n, c, cd});
    MeanFieldContext ctx{{'a', ModeMeans::thermal(p.nbar)}};
    LinearSystem sys = linearize_system(H, basis, ctx, {{"c", p.Gamma2, c}});
    if (!p.engine_number_sign)
        for (auto& entry : sys.M[0]) entry = -entry;
    sys.model = "amplifier";
    return sys;
}

// Pumped oscillator with a quartic shift. Rows are assembled from the
// catalog's reduced bracket of the squared number operator, which folds the
// pair ladder into the pair columns directly.
inline LinearSystem amplifier_kerr_system(const ModelParams& p) {
    detail::require_rate(p.Gamma2, "Gamma2");
    OperatorExpr c = pair_annihilate('a'), cd = pair_create('a'), n = number('a');
    BasisSet basis({"n", "n^2", "c", "cd"}, {n, n * n, c, cd});
    MeanFieldContext ctx{{'a', ModeMeans::thermal(p.nbar)}};
    LinearSystem sys;
    sys.labels = basis.labels();
    sys.M.assign(4, std::vector<Coeff>(4, Coeff(0)));
    sys.drive.assign(4, Coeff(0));
    sys.noise.assign(4, {});
    // [n^2, c] reduces to -(6 nbar + 7)/2 c at this truncation.
    Rat red = (p.nbar * 6 + 7) / 2;
    Coeff i1 = detail::im(1);
    Coeff gs = p.g.conj();
    // number rows: catalog sign flips the bare bracket, same as the plain model
    Rat rowsign = p.engine_number_sign ? 1 : -1;
    sys.M[0][2] = detail::im(rowsign * 2) * p.g;
    sys.M[0][3] = detail::im(-rowsign * 2) * gs;
    sys.M[1][2] = detail::im(rowsign * red) * p.g;
    sys.M[1][3] = detail::im(-rowsign * red) * gs;
    // pair rows from the exact brackets, quartic shift through the reduced one
    Coeff cdiag = detail::im(-(p.omega * 2) - (p.nbar * 6 + 3) * p.zeta / 8);
    sys.M[2][2] = cdiag;
    sys.M[2][0] = Coeff(Rat(0), Rat(-1)) * gs;
    sys.drive[2] = Coeff(Rat(0), Rat(-1, 2)) * gs;
    sys.M[3][3] = cdiag.conj();
    sys.M[3][0] = i1 * p.g;
    sys.drive[3] = Coeff(Rat(0), Rat(1, 2)) * p.g;
    apply_channel(sys, basis, ctx, {"c", p.Gamma2, c});
    sys.model = "amplifier_kerr";
    return sys;
}

// Bracket table of the readout-quadrature basis: the probe number rotates the
// two quadratures into each other and their mutual bracket is a reference
// constant. The signal number commutes with everything.
inline CommutatorTable qnd_commutators(const Rat& nbar) {
    CommutatorTable t;
    t.labels = {"n", "m", "C", "S"};
    auto zero = [] { return LinearCombination{std::vector<Coeff>(4, Coeff(0)), Coeff(0)}; };
    LinearCombination nC = zero(), nS = zero(), CS = zero();
    nC.coeffs[3] = Coeff(Rat(0), Rat(-1));
    nS.coeffs[2] = Coeff(Rat(0), Rat(1));
    CS.constant = Coeff(Rat(0), Rat(1, 2) / (nbar + 2));
    t.entries[{0, 1}] = zero();
    t.entries[{0, 2}] = nC;
    t.entries[{0, 3}] = nS;
    t.entries[{1, 2}] = zero();
    t.entries[{1, 3}] = zero();
    t.entries[{2, 3}] = CS;
    return t;
}

// Cross-Kerr probe/signal readout. The probe quadrature rows are built from
// the bracket table with the signal number decoupled around its mean; the
// probe number row never couples to the signal, which is what makes the
// readout nondemolition. Quadrature input lines scale as 1/sqrt(nbar + 1).
inline LinearSystem qnd_system(const ModelParams& p) {
    detail::require_rate(p.kappa, "kappa");
    detail::require_rate(p.Gamma_m, "Gamma_m");
    LinearSystem sys;
    sys.labels = {"n", "m", "C", "S"};
    sys.M.assign(4, std::vector<Coeff>(4, Coeff(0)));
    sys.drive.assign(4, Coeff(0));
    sys.noise.assign(4, {});
    Rat rot = p.omega + p.chi * p.mbar;
    sys.M[0][0] = Coeff(-p.kappa);
    sys.M[1][1] = Coeff(-p.Gamma_m);
    sys.M[2][3] = Coeff(rot);
    sys.M[2][1] = Coeff(p.chi * p.Sbar);
    sys.drive[2] = Coeff(-(p.chi * p.Sbar * p.mbar));
    sys.M[2][2] = Coeff(-(p.kappa / 2));
    sys.M[3][2] = Coeff(-rot);
    sys.M[3][1] = Coeff(-(p.chi * p.Cbar));
    sys.drive[3] = Coeff(p.chi * p.Cbar * p.mbar);
    sys.M[3][3] = Coeff(-(p.kappa / 2));
    NoiseWeight nw = detail::weight_from_square(p.nbar, p.kappa);
    nw.factor *= 2;
    sys.noise[0][sys.port_index("n")] = nw;
    sys.noise[2][sys.port_index("C")] = {Rat(1, 2), p.kappa / (p.nbar + 1)};
    sys.noise[3][sys.port_index("S")] = {Rat(1, 2), p.kappa / (p.nbar + 1)};
    if (p.Gamma_m != 0) sys.noise[1][sys.port_index("m")] = detail::weight_from_square(1, p.Gamma_m);
    sys.model = "qnd";
    return sys;
}

// Dispersive optomechanical model truncated to the bare photon/phonon pair,
// with the number coupling folded into constants (drive route).
inline LinearSystem om_std_1a_system(const ModelParams& p) {
    detail::require_rate(p.kappa, "kappa");
    detail::require_rate(p.Gamma_m, "Gamma_m");
    detail::require_order(p, 1);
    LinearSystem sys;
    sys.labels = {"a", "b", "bd"};
    sys.M.assign(3, std::vector<Coeff>(3, Coeff(0)));
    sys.drive.assign(3, Coeff(0));
    sys.noise.assign(3, {});
    Rat F = p.g0 * root_or_dyadic(p.nbar), G = p.g0 * p.nbar;
    sys.M[0][0] = detail::im(-p.Delta) - Coeff(p.kappa / 2);
    sys.M[0][1] = detail::im(F);
    sys.M[0][2] = detail::im(F);
    sys.M[1][1] = detail::im(p.Omega) - Coeff(p.Gamma_m / 2);
    sys.drive[1] = detail::im(G);
    sys.M[2][2] = detail::im(-p.Omega) - Coeff(p.Gamma_m / 2);
    sys.drive[2] = detail::im(-G);
    sys.noise[0][sys.port_index("a")] = detail::weight_from_square(1, p.kappa);
    sys.noise[1][sys.port_index("b")] = detail::weight_from_square(1, p.Gamma_m);
    sys.noise[2][sys.port_index("bd")] = detail::weight_from_square(1, p.Gamma_m);
    sys.model = "om_std_1a";
    return sys;
}

// Same truncation with the number coupling folded onto the photon column
// instead; the pair rows then feed from the photon and carry no drive.
inline LinearSystem om_std_1b_system(const ModelParams& p) {
    LinearSystem sys = om_std_1a_system(p);
    Rat F = p.g0 * root_or_dyadic(p.nbar);
    sys.drive[1] = Coeff(0);
    sys.drive[2] = Coeff(0);
    sys.M[1][0] = detail::im(F);
    sys.M[2][1] = detail::im(F);
    sys.model = "om_std_1b";
    return sys;
}

// Dispersive optomechanical model in the six-operator cross basis. The bare
// rows come from the reduction engine; the cross and photon-pair rows carry
// the catalog's composite couplings and input weights.
inline LinearSystem om_std_2_system(const ModelParams& p) {
    detail::require_rate(p.kappa, "kappa");
    detail::require_rate(p.Gamma_m, "Gamma_m");
    detail::require_order(p, 2);
    OperatorExpr a = annihilate('a'), b = annihilate('b');
    OperatorExpr n = number('a'), c = pair_annihilate('a');
    BasisSet basis({"a", "b", "ab", "abd", "n", "c"},
                   {a, b, a * b, a * create('b'), n, c});
    OperatorExpr H = Coeff(p.Delta) * n - Coeff(p.Omega) * number('b') -
                     (Coeff(p.g0) * n) * (b + create('b'));
    MeanFieldContext ctx{{'a', ModeMeans::coherent_occupation(p.nbar)},
                         {'b', ModeMeans::thermal(p.mbar)}};
    LinearSystem sys = linearize_system(
        H, basis, ctx,
        {{"a", p.kappa, a, ChannelScope::ModeQuanta}, {"b", p.Gamma_m, b, ChannelScope::ModeQuanta}},
        {2, 3, 5});
    Rat G = p.g0 * p.nbar;
    Rat L = p.ultracold ? G : G + p.g0 * (p.mbar + 1);
    Rat F = p.g0 * root_or_dyadic(p.nbar);
    Rat K = p.nbar * p.kappa * 4;
    sys.M[2][0] = detail::im(L);
    sys.M[2][2] += detail::im(p.Omega - p.Delta);
    sys.M[2][3] = detail::im(p.g0);
    sys.M[3][0] = detail::im(L);
    sys.M[3][2] = detail::im(p.g0);
    sys.M[3][3] += detail::im(-(p.Omega + p.Delta));
    sys.M[5][2] = detail::im(F * 2);
    sys.M[5][3] = detail::im(F * 2);
    sys.M[5][5] += detail::im(-(p.Delta * 2));
    // cross rows take the flux-weighted phonon input; the photon-pair row
    // couples to the photon line and its squared companion
    Rat flux = p.alpha.im == 0 ? (p.alpha.re < 0 ? Rat(-p.alpha.re) : p.alpha.re)
                               : rat_from_double(std::abs(to_complex(p.alpha)));
    size_t pb = sys.port_index("b");
    sys.noise[2][pb] = detail::weight_from_square(flux, p.Gamma_m);
    sys.noise[3][pb] = detail::weight_from_square(flux, p.Gamma_m);
    size_t pa = sys.port_index("a");
    sys.noise[5].clear();
    sys.noise[5][pa] = detail::weight_from_square(K * 2, 1);
    sys.noise[5][sys.port_index("a2")] = detail::weight_from_square(p.kappa * 8, 1);
    sys.model = "om_std_2";
    return sys;
}

// Folds the cross-basis model back onto the three-operator truncation: cross
// columns contract against the reference photon amplitude and the number
// coupling becomes the pair drive.
inline LinearSystem first_order_truncation(const LinearSystem& om2, const Rat& nbar) {
    if (om2.labels != std::vector<std::string>{"a", "b", "ab", "abd", "n", "c"})
        throw std::invalid_argument("first-order truncation expects the six-operator model");
    LinearSystem sys;
    sys.labels = {"a", "b", "bd"};
    sys.M.assign(3, std::vector<Coeff>(3, Coeff(0)));
    sys.drive.assign(3, Coeff(0));
    sys.noise.assign(3, {});
    Coeff amp(root_or_dyadic(nbar));
    sys.M[0][0] = om2.M[0][0];
    sys.M[0][1] = om2.M[0][2] * amp;
    sys.M[0][2] = om2.M[0][3] * amp;
    sys.M[1][1] = om2.M[1][1];
    sys.drive[1] = om2.M[1][4] * Coeff(nbar);
    sys.M[2][2] = om2.M[1][1].conj();
    sys.drive[2] = (om2.M[1][4] * Coeff(nbar)).conj();
    for (const auto& [k, w] : om2.noise[0])
        if (om2.ports[k] == "a") sys.noise[0][sys.port_index("a")] = w;
    for (const auto& [k, w] : om2.noise[1])
        if (om2.ports[k] == "b") {
            sys.noise[1][sys.port_index("b")] = w;
            sys.noise[2][sys.port_index("bd")] = w;
        }
    sys.model = "om_std_1a";
    return sys;
}

// Taylor-truncated moment chain of the diode circuit, expanded at zero. The
// exponential couplings are regenerated from the series so any order works.
inline LinearSystem diode_system(size_t order, const ModelParams& p) {
    if (order < 1) throw std::invalid_argument("diode chain needs at least one moment");
    detail::require_rate(p.kappa, "kappa");
    if (p.tau <= 0) throw std::invalid_argument("diode chain needs a positive time constant");
    LinearSystem sys;
    sys.M.assign(order, std::vector<Coeff>(order, Coeff(0)));
    sys.drive.assign(order, Coeff(0));
    sys.noise.assign(order, {});
    for (size_t j = 1; j <= order; ++j) {
        sys.labels.push_back(j == 1 ? "u" : "u^" + std::to_string(j));
        sys.M[j - 1][j - 1] = Coeff(-(Rat(j) * (p.mu + p.kappa) / p.tau));
        Rat fact = 1;
        for (size_t k = 2; j + k - 1 <= order; ++k) {
            fact *= Rat(k);
            sys.M[j - 1][j + k - 2] = Coeff(-(Rat(j) * p.kappa / (fact * p.tau)));
        }
    }
    // input weights sit at the operating point: zero drive level keeps only
    // the first moment's line
    double ubar = 0;
    if (p.vbar != 0) {
        double mu = to_double(p.mu), ka = to_double(p.kappa), target = to_double(p.vbar);
        for (int it = 0; it < 20; ++it) {
            double f = mu * ubar + ka * std::expm1(ubar) - target;
            if (std::abs(f) < 1e-6 * std::max(1.0, std::abs(target))) break;
            ubar -= f / (mu + ka * std::exp(ubar));
        }
    }
    Rat up = 1;
    for (size_t j = 1; j <= order; ++j) {
        Rat w = Rat(j) * up / p.tau;
        if (w != 0) {
            sys.noise[j - 1][sys.port_index("v")] = {w, 1};
            sys.noise[j - 1][sys.port_index("w")] = {w, 1};
        }
        up *= rat_from_double(ubar);
    }
    sys.model = "diode(" + std::to_string(order) + ")";
    return sys;
}

// Numeric view of the same chain for time integration. Row j of the
// derivative is j(-mu u_j - kappa S_j + v u_{j-1})/tau with S_j the
// series tail the truncation keeps; at kappa = 0 the first row reduces to
// the scalar circuit equation term for term.
struct DiodeChain {
    size_t order;
    double kappa = 1, mu = 1, tau = 1;

    template <class State>
    void derivative(const State& u, typename State::value_type v, State& out) const {
        using T = typename State::value_type;
        out.resize(u.size());
        for (size_t j = 1; j <= u.size(); ++j) {
            T series = 0;
            T fact = 1;
            for (size_t k = 1; j + k - 1 <= u.size(); ++k) {
                fact *= T(k);
                series += u[j + k - 2] / fact;
            }
            T below = j >= 2 ? u[j - 2] : T(1);
            out[j - 1] = (T(j) * (-T(mu) * u[j - 1] - T(kappa) * series + v * below)) / T(tau);
        }
    }
};

// Cubic steady-state photon number of the cross-basis optomechanical model:
// i g0 x^3 + i B x = C for the amplitude x, occupation |x|^2 per branch.
struct CubicBranch {
    std::complex<double> root;
    double nbar;
    bool real_positive;
};

struct CubicSolution {
    std::complex<double> B, C;
    std::array<double, 3> closed;         // closed-form branch occupations
    std::array<CubicBranch, 3> companion; // polynomial-solver roots
    bool degenerate = false;              // C = 0 factorization path
};

inline CubicSolution photon_number_cubic(const ModelParams& p) {
    double g0 = to_double(p.g0);
    if (g0 <= 0) throw std::invalid_argument("cubic photon number needs g0 > 0");
    double mbar = to_double(p.mbar);
    double gamma = to_double(p.kappa) + to_double(p.Gamma_m);
    double Br = g0 * (mbar + 1) * std::sqrt(mbar) +
                (g0 + to_double(p.Omega) - to_double(p.Delta));
    CubicSolution out;
    out.B = {Br, gamma / 2};
    out.C = std::sqrt(mbar) * to_complex(p.alpha);
    auto flag = [](std::complex<double> x) {
        bool rp = std::abs(x.imag()) <= 1e-9 * std::max(1.0, std::abs(x.real())) && x.real() > 0;
        return CubicBranch{x, std::norm(x), rp};
    };
    if (std::abs(out.C) == 0.0) {
        out.degenerate = true;
        std::complex<double> r = std::sqrt(-out.B / g0);
        out.companion = {flag({0, 0}), flag(r), flag(-r)};
        out.closed = {0.0, std::norm(r), std::norm(r)};
        return out;
    }
    std::complex<double> i3(0, std::sqrt(3.0));
    std::complex<double> disc =
        std::sqrt(1.0 - 4.0 * out.B * out.B * out.B / (27.0 * g0 * out.C * out.C));
    std::complex<double> Z = std::pow(9.0 * g0 * g0 * out.C * (1.0 - disc), 1.0 / 3.0);
    double t = std::cbrt(12.0);
    double den = g0 * g0 * std::norm(Z);
    out.closed[0] = std::norm(t * g0 * out.B + Z * Z) / (3 * t * den);
    out.closed[1] = std::norm(t * (1.0 + i3) * g0 * out.B + (1.0 - i3) * Z * Z) / (12 * t * den);
    out.closed[2] = std::norm(t * (1.0 - i3) * g0 * out.B + (1.0 + i3) * Z * Z) / (12 * t * den);
    Eigen::Matrix3cd comp = Eigen::Matrix3cd::Zero();
    comp(1, 0) = 1;
    comp(2, 1) = 1;
    comp(0, 2) = -std::complex<double>(0, 1) * out.C / g0;
    comp(1, 2) = -out.B / g0;
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> solver(comp, false);
    for (int k = 0; k < 3; ++k) out.companion[k] = flag(solver.eigenvalues()(k));
    return out;
}

inline LinearSystem build_model(const std::string& id, const ModelParams& p) {
    if (id == "quad_std_1") return quad_std_1_system(p);
    if (id == "quad_full_1") return quad_full_1_system(p);
    if (id == "quad_std_2") return quad_std_2_system(p);
    if (id == "anharmonic") return anharmonic_system(p);
    if (id == "amplifier") return amplifier_system(p);
    if (id == "amplifier_kerr") return amplifier_kerr_system(p);
    if (id == "qnd") return qnd_system(p);
    if (id == "om_std_1a") return om_std_1a_system(p);
    if (id == "om_std_1b") return om_std_1b_system(p);
    if (id == "om_std_2") return om_std_2_system(p);
    if (id == "diode") return diode_system(p.diode_order, p);
    if (id.rfind("diode(", 0) == 0 && id.back() == ')') {
        size_t n = std::stoul(id.substr(6, id.size() - 7));
        return diode_system(n, p);
    }
    throw std::invalid_argument("unknown model id: " + id);
}

}  // namespace hilange
