#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "assemble.hpp"
#include "util.hpp"

namespace hilange {

// Uniform angular-frequency grid, rad/s.
struct FrequencyGrid {
    double w_min = -1.0;
    double w_max = 1.0;
    size_t count = 4001;

    void validate() const {
        if (!std::isfinite(w_min) || !std::isfinite(w_max) || !(w_min < w_max))
            throw std::invalid_argument("frequency grid needs finite w_min < w_max");
        if (count < 2) throw std::invalid_argument("frequency grid needs at least two points");
    }

    double step() const { return (w_max - w_min) / double(count - 1); }

    std::vector<double> points() const {
        validate();
        std::vector<double> out(count);
        for (size_t k = 0; k < count; ++k) out[k] = w_min + step() * double(k);
        return out;
    }

    size_t nearest(double w) const {
        validate();
        double idx = std::round((w - w_min) / step());
        return (size_t)std::clamp(idx, 0.0, double(count - 1));
    }
};

// Stationary input noise density. Atomic kinds carry their parameters; composite
// kinds reference other entries of a NoiseBook by id.
struct NoiseModel {
    enum class Kind { Vacuum, Thermal, CoherentGaussian, Squared, Product };

    Kind kind = Kind::Vacuum;
    double occupation = 0;  // Thermal
    double linewidth = 0;   // CoherentGaussian: dimensionless chi > 0, sigma = chi * carrier
    double carrier = 0;     // CoherentGaussian: center frequency > 0
    double amplitude = 1;   // CoherentGaussian: integral weight
    double scale = 1;       // Squared prefactor
    std::string base;       // Squared base, Product left factor
    std::string base2;      // Product right factor

    static NoiseModel vacuum() { return {}; }

    static NoiseModel thermal(double n_th) {
        if (!(n_th >= 0)) throw std::invalid_argument("thermal noise needs occupation >= 0");
        NoiseModel m;
        m.kind = Kind::Thermal;
        m.occupation = n_th;
        return m;
    }

    static NoiseModel coherent_gaussian(double chi, double omega, double amplitude = 1) {
        if (!(chi > 0)) throw std::invalid_argument("gaussian noise needs linewidth > 0");
        if (!(omega > 0)) throw std::invalid_argument("gaussian noise needs carrier > 0");
        if (!(amplitude > 0)) throw std::invalid_argument("gaussian noise needs amplitude > 0");
        NoiseModel m;
        m.kind = Kind::CoherentGaussian;
        m.linewidth = chi;
        m.carrier = omega;
        m.amplitude = amplitude;
        return m;
    }

    static NoiseModel squared(std::string base, double scale) {
        if (!(scale > 0)) throw std::invalid_argument("squared noise needs scale > 0");
        NoiseModel m;
        m.kind = Kind::Squared;
        m.base = std::move(base);
        m.scale = scale;
        return m;
    }

    static NoiseModel product(std::string left, std::string right) {
        NoiseModel m;
        m.kind = Kind::Product;
        m.base = std::move(left);
        m.base2 = std::move(right);
        return m;
    }
};

using NoiseBook = std::map<std::string, NoiseModel>;

// Squared-Gaussian integral weight that reproduces the pair-field line shape of
// a unit single-quantum line with relative width chi.
inline double pair_field_scale(double chi) { return 2.0 * chi * chi / std::numbers::pi; }

// Quadrature window used when a composite density has no closed form.
struct ConvolutionWindow {
    double lo = 0;
    double hi = 0;
    size_t count = 4001;
};

namespace detail {

inline double gaussian_line(double w, double center, double sigma, double weight) {
    double z = (w - center) / sigma;
    return weight / (std::sqrt(2.0 * std::numbers::pi) * sigma) * std::exp(-0.5 * z * z);
}

inline double noise_density(const NoiseBook& book, const NoiseModel& nm, double w,
                            const ConvolutionWindow& win, std::vector<std::string>& stack);

inline const NoiseModel& noise_lookup(const NoiseBook& book, const std::string& id,
                                      const std::vector<std::string>& stack) {
    if (std::find(stack.begin(), stack.end(), id) != stack.end())
        throw std::runtime_error("noise model cycle through '" + id + "'");
    auto it = book.find(id);
    if (it == book.end()) throw std::invalid_argument("unknown noise model '" + id + "'");
    return it->second;
}

inline double noise_density_id(const NoiseBook& book, const std::string& id, double w,
                               const ConvolutionWindow& win, std::vector<std::string>& stack) {
    const NoiseModel& nm = noise_lookup(book, id, stack);
    stack.push_back(id);
    double out = noise_density(book, nm, w, win, stack);
    stack.pop_back();
    return out;
}

// (f * g)(w) by trapezoid quadrature over the window; the left factor is
// truncated to the window, so constant densities pick up the finite-window mass.
inline double convolve(const NoiseBook& book, const std::string& f, const std::string& g, double w,
                       const ConvolutionWindow& win, std::vector<std::string>& stack) {
    if (!(win.lo < win.hi) || win.count < 2)
        throw std::invalid_argument("composite noise density needs a quadrature window");
    double h = (win.hi - win.lo) / double(win.count - 1);
    double acc = 0;
    for (size_t k = 0; k < win.count; ++k) {
        double u = win.lo + h * double(k);
        double term = noise_density_id(book, f, u, win, stack) * noise_density_id(book, g, w - u, win, stack);
        acc += (k == 0 || k + 1 == win.count) ? 0.5 * term : term;
    }
    return acc * h;
}

inline double noise_density(const NoiseBook& book, const NoiseModel& nm, double w,
                            const ConvolutionWindow& win, std::vector<std::string>& stack) {
    switch (nm.kind) {
        case NoiseModel::Kind::Vacuum:
            return 1.0;
        case NoiseModel::Kind::Thermal:
            return nm.occupation + 0.5;
        case NoiseModel::Kind::CoherentGaussian:
            return gaussian_line(w, nm.carrier, nm.linewidth * nm.carrier, nm.amplitude);
        case NoiseModel::Kind::Squared: {
            const NoiseModel& base = noise_lookup(book, nm.base, stack);
            if (base.kind == NoiseModel::Kind::CoherentGaussian) {
                double sigma = std::sqrt(2.0) * base.linewidth * base.carrier;
                return nm.scale *
                       gaussian_line(w, 2.0 * base.carrier, sigma, base.amplitude * base.amplitude);
            }
            return nm.scale * convolve(book, nm.base, nm.base, w, win, stack);
        }
        case NoiseModel::Kind::Product:
            return convolve(book, nm.base, nm.base2, w, win, stack);
    }
    throw std::logic_error("unhandled noise kind");
}

}  // namespace detail

inline double input_noise_spectrum(const NoiseBook& book, const std::string& id, double w,
                                   const ConvolutionWindow& win = {}) {
    std::vector<std::string> stack;
    return detail::noise_density_id(book, id, w, win, stack);
}

// Atomic models only; composite kinds need the book overload.
inline double input_noise_spectrum(const NoiseModel& nm, double w) {
    if (nm.kind == NoiseModel::Kind::Squared || nm.kind == NoiseModel::Kind::Product)
        throw std::invalid_argument("composite noise model needs a NoiseBook");
    NoiseBook none;
    std::vector<std::string> stack;
    return detail::noise_density(none, nm, w, {}, stack);
}

namespace detail {

struct FrequencyResponse {
    Eigen::MatrixXcd resolvent_noise;  // (iwI + M)^{-1} W, elements x ports
    Eigen::MatrixXcd scattering;       // I + W^T (iwI + M)^{-1} W, ports x ports
};

inline FrequencyResponse frequency_response(const LinearSystem& sys, double w) {
    Eigen::MatrixXcd A = sys.matrix();
    A.diagonal().array() += std::complex<double>(0.0, w);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(A);
    if (!lu.isInvertible())
        throw std::runtime_error("frequency response singular at w = " + num17(w));
    Eigen::MatrixXcd W = sys.noise_matrix().cast<std::complex<double>>();
    FrequencyResponse out;
    out.resolvent_noise = lu.solve(W);
    out.scattering = Eigen::MatrixXcd::Identity(W.cols(), W.cols()) + W.transpose() * out.resolvent_noise;
    return out;
}

}  // namespace detail

// Output spectral densities on a uniform grid: one array per basis element
// (noise routed through the resolvent) and one per channel port (scattering).
struct SpectrumResult {
    std::string model;
    std::vector<double> omega;
    std::vector<std::string> labels;
    std::vector<std::vector<double>> element_density;
    std::vector<std::string> ports;
    std::vector<std::vector<double>> port_density;
    std::string metadata;

    const std::vector<double>& element(const std::string& label) const {
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return element_density[i];
        throw std::invalid_argument("no spectrum column for element '" + label + "'");
    }

    const std::vector<double>& port(const std::string& name) const {
        for (size_t k = 0; k < ports.size(); ++k)
            if (ports[k] == name) return port_density[k];
        throw std::invalid_argument("no spectrum column for port '" + name + "'");
    }
};

inline Eigen::MatrixXcd scattering_matrix(const LinearSystem& sys, double w) {
    return detail::frequency_response(sys, w).scattering;
}

inline SpectrumResult output_spectra(const LinearSystem& sys, const NoiseBook& book,
                                     const std::map<std::string, std::string>& bindings,
                                     const FrequencyGrid& grid) {
    grid.validate();
    for (const auto& p : sys.ports)
        if (!bindings.count(p)) throw std::invalid_argument("channel '" + p + "' has no noise binding");
    for (const auto& [p, id] : bindings) {
        if (std::find(sys.ports.begin(), sys.ports.end(), p) == sys.ports.end())
            throw std::invalid_argument("binding names unknown channel '" + p + "'");
        (void)id;
    }

    const size_t n = sys.size(), k = sys.ports.size(), pts = grid.count;
    SpectrumResult out;
    out.model = sys.model;
    out.omega = grid.points();
    out.labels = sys.labels;
    out.ports = sys.ports;
    out.element_density.assign(n, std::vector<double>(pts, 0.0));
    out.port_density.assign(k, std::vector<double>(pts, 0.0));

    ConvolutionWindow win{grid.w_min, grid.w_max, grid.count};

    auto sweep = [&](size_t lo, size_t hi) {
        std::vector<double> din(k);
        for (size_t p = lo; p < hi; ++p) {
            double w = out.omega[p];
            for (size_t j = 0; j < k; ++j) {
                din[j] = input_noise_spectrum(book, bindings.at(sys.ports[j]), w, win);
                if (!std::isfinite(din[j]) || din[j] < -1e-12)
                    throw std::runtime_error("input density invalid at w = " + num17(w));
            }
            detail::FrequencyResponse fr = detail::frequency_response(sys, w);
            for (size_t i = 0; i < n; ++i) {
                double acc = 0;
                for (size_t j = 0; j < k; ++j) acc += std::norm(fr.resolvent_noise(i, j)) * din[j];
                if (!std::isfinite(acc) || acc < -1e-12)
                    throw std::runtime_error("output density invalid at w = " + num17(w));
                out.element_density[i][p] = acc < 0 ? 0 : acc;
            }
            for (size_t i = 0; i < k; ++i) {
                double acc = 0;
                for (size_t j = 0; j < k; ++j) acc += std::norm(fr.scattering(i, j)) * din[j];
                if (!std::isfinite(acc) || acc < -1e-12)
                    throw std::runtime_error("output density invalid at w = " + num17(w));
                out.port_density[i][p] = acc < 0 ? 0 : acc;
            }
        }
    };

    size_t workers = std::min(detail::thread_cap(), pts);
    if (workers <= 1) {
        sweep(0, pts);
    } else {
        // disjoint index ranges, so the result is identical to the serial sweep
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(workers);
        size_t chunk = (pts + workers - 1) / workers;
        for (size_t t = 0; t < workers; ++t) {
            size_t lo = t * chunk, hi = std::min(pts, lo + chunk);
            pool.emplace_back([&, lo, hi, t] {
                try {
                    sweep(lo, hi);
                } catch (...) {
                    errs[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }

    detail::Fnv1a hash;
    hash.str(sys.model);
    for (const auto& l : sys.labels) hash.str(l);
    for (const auto& row : sys.M)
        for (const auto& c : row) {
            hash.num(to_double(c.re));
            hash.num(to_double(c.im));
        }
    for (const auto& c : sys.drive) {
        hash.num(to_double(c.re));
        hash.num(to_double(c.im));
    }
    for (size_t i = 0; i < n; ++i)
        for (const auto& [j, wgt] : sys.noise[i]) {
            hash.num(double(j));
            hash.num(wgt.value());
        }
    for (const auto& p : sys.ports) {
        hash.str(p);
        hash.str(bindings.at(p));
    }
    hash.num(grid.w_min);
    hash.num(grid.w_max);
    hash.num(double(grid.count));

    std::string meta = "{\"model\":\"" + sys.model + "\",\"params_hash\":\"" + hash.hex() +
                       "\",\"grid\":{\"w_min\":" + num17(grid.w_min) + ",\"w_max\":" + num17(grid.w_max) +
                       ",\"count\":" + std::to_string(grid.count) + "},\"edge_density\":{";
    for (size_t j = 0; j < k; ++j) {
        double lo = input_noise_spectrum(book, bindings.at(sys.ports[j]), grid.w_min, win);
        double hi = input_noise_spectrum(book, bindings.at(sys.ports[j]), grid.w_max, win);
        meta += (j ? "," : "") + std::string("\"") + sys.ports[j] + "\":[" + num17(lo) + "," + num17(hi) + "]";
    }
    meta += "}}";
    out.metadata = meta;
    return out;
}

struct IntegralEstimate {
    double value = 0;
    double error = 0;  // trapezoid refinement gap |T(h) - T(2h)|
};

inline IntegralEstimate trapezoid_integral(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("integral needs two matched arrays of length >= 2");
    auto trap = [&](size_t stride) {
        double acc = 0;
        size_t prev = 0;
        for (size_t k = stride; k < x.size(); k += stride) {
            acc += 0.5 * (y[prev] + y[k]) * (x[k] - x[prev]);
            prev = k;
        }
        if (prev != x.size() - 1) acc += 0.5 * (y[prev] + y.back()) * (x.back() - x[prev]);
        return acc;
    };
    IntegralEstimate out;
    out.value = trap(1);
    out.error = std::abs(out.value - trap(2));
    return out;
}

// Column by name, element labels first, then channel ports.
inline const std::vector<double>& spectrum_column(const SpectrumResult& sr, const std::string& name) {
    for (size_t i = 0; i < sr.labels.size(); ++i)
        if (sr.labels[i] == name) return sr.element_density[i];
    for (size_t k = 0; k < sr.ports.size(); ++k)
        if (sr.ports[k] == name) return sr.port_density[k];
    throw std::invalid_argument("no spectrum column '" + name + "'");
}

inline IntegralEstimate spectrum_integral(const SpectrumResult& sr, const std::string& label) {
    return trapezoid_integral(sr.omega, spectrum_column(sr, label));
}

inline void write_spectrum_csv(std::ostream& os, const SpectrumResult& sr) {
    os << "omega_rad_s";
    for (const auto& l : sr.labels) os << ',' << l;
    os << '\n';
    for (size_t p = 0; p < sr.omega.size(); ++p) {
        os << num17(sr.omega[p]);
        for (size_t i = 0; i < sr.labels.size(); ++i) os << ',' << num17(sr.element_density[i][p]);
        os << '\n';
    }
}

inline void write_port_csv(std::ostream& os, const SpectrumResult& sr) {
    os << "omega_rad_s";
    for (const auto& p : sr.ports) os << ',' << p;
    os << '\n';
    for (size_t p = 0; p < sr.omega.size(); ++p) {
        os << num17(sr.omega[p]);
        for (size_t i = 0; i < sr.ports.size(); ++i) os << ',' << num17(sr.port_density[i][p]);
        os << '\n';
    }
}

}  // namespace hilange
