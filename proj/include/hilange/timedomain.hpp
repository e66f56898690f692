#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "assemble.hpp"
#include "models.hpp"
#include "util.hpp"

namespace hilange {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One independent stream per trajectory; the mapping is part of run metadata.
inline uint64_t trajectory_seed(uint64_t seed, uint64_t index) {
    return splitmix64(seed + 0x9e3779b97f4a7c15ULL * index);
}

// Box-Muller over mt19937_64, bit-reproducible across platforms unlike
// std::normal_distribution.
struct NormalSampler {
    std::mt19937_64 eng;
    bool have_spare = false;
    double spare = 0;

    explicit NormalSampler(uint64_t seed) : eng(seed) {}

    double uniform_open() { return (double(eng() >> 11) + 1.0) * 0x1.0p-53; }  // (0, 1]

    double next() {
        if (have_spare) {
            have_spare = false;
            return spare;
        }
        double r = std::sqrt(-2.0 * std::log(uniform_open()));
        double th = 2.0 * std::numbers::pi * uniform_open();
        spare = r * std::sin(th);
        have_spare = true;
        return r * std::cos(th);
    }
};

// v(t) = V0 exp(-alpha t) sin(omega t); defaults put the carrier at 1 kHz with
// omega = 2 pi alpha.
template <class T>
struct ExpSineDrive {
    T V0 = T(1);
    T alpha = T(1000);
    T omega = T(2000) * std::numbers::pi_v<T>;
    T operator()(T t) const { return V0 * std::exp(-alpha * t) * std::sin(omega * t); }
};

using DriveWaveform = ExpSineDrive<double>;

struct SdeRun {
    double dt = 1e-4;
    double horizon = 1.0;
    size_t trajectories = 1;
    uint64_t seed = 0;
    std::map<std::string, double> noise_scale;  // per-channel multiplier, default 1
    std::string drive_port;                     // waveform enters through this channel column
    DriveWaveform drive{};
    std::vector<std::complex<double>> initial;  // empty = zeros
};

struct EnsembleResult {
    std::vector<double> t;
    std::vector<std::string> labels;
    std::vector<std::vector<std::complex<double>>> mean;  // [element][step]
    std::vector<std::vector<double>> variance;            // [element][step], sample variance of |x - mean|
    std::vector<std::string> warnings;
    std::string metadata;
};

// Euler-Maruyama ensemble; every channel consumes one normal per step, so the
// stream layout depends only on seed, trajectory index, and channel count.
inline EnsembleResult integrate_sde(const LinearSystem& sys, const SdeRun& run) {
    if (!(run.dt > 0) || !std::isfinite(run.dt)) throw std::invalid_argument("sde run needs dt > 0");
    if (!(run.horizon >= run.dt)) throw std::invalid_argument("sde run needs horizon >= dt");
    if (run.trajectories == 0) throw std::invalid_argument("sde run needs at least one trajectory");
    const size_t n = sys.size(), k = sys.ports.size();
    const size_t steps = (size_t)std::llround(run.horizon / run.dt);

    std::vector<double> scale(k, 1.0);
    for (const auto& [name, s] : run.noise_scale) {
        auto it = std::find(sys.ports.begin(), sys.ports.end(), name);
        if (it == sys.ports.end())
            throw std::invalid_argument("noise scale names unknown channel '" + name + "'");
        scale[size_t(it - sys.ports.begin())] = s;
    }
    long drive_col = -1;
    if (!run.drive_port.empty()) {
        auto it = std::find(sys.ports.begin(), sys.ports.end(), run.drive_port);
        if (it == sys.ports.end())
            throw std::invalid_argument("drive names unknown channel '" + run.drive_port + "'");
        drive_col = it - sys.ports.begin();
        // the drive column is a deterministic source unless a scale is given
        if (!run.noise_scale.count(run.drive_port)) scale[size_t(drive_col)] = 0.0;
    }
    if (!run.initial.empty() && run.initial.size() != n)
        throw std::invalid_argument("initial state size does not match the system");

    const Eigen::MatrixXcd M = sys.matrix();
    const Eigen::VectorXcd d = sys.drive_vector();
    const Eigen::MatrixXcd W = sys.noise_matrix().cast<std::complex<double>>();
    Eigen::VectorXcd x0 = Eigen::VectorXcd::Zero(n);
    for (size_t i = 0; i < run.initial.size(); ++i) x0(long(i)) = run.initial[i];

    EnsembleResult out;
    out.labels = sys.labels;
    out.t.resize(steps + 1);
    for (size_t s = 0; s <= steps; ++s) out.t[s] = double(s) * run.dt;

    double margin = stability_margin(sys);
    if (margin > 0 && run.horizon > 10.0 / margin)
        out.warnings.push_back("unstable system: max Re eig = " + num17(margin) + " over horizon " +
                               num17(run.horizon));

    // fixed 64-trajectory chunks + pairwise fold keep the reduction order
    // independent of the worker count
    const size_t CHUNK = 64;
    const size_t n_chunks = (run.trajectories + CHUNK - 1) / CHUNK;
    const size_t cols = steps + 1;
    std::vector<Eigen::MatrixXcd> chunk_sum(n_chunks);
    std::vector<Eigen::MatrixXd> chunk_sq(n_chunks);

    auto run_chunk = [&](size_t ci) {
        Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(long(n), long(cols));
        Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(long(n), long(cols));
        const double sdt = std::sqrt(run.dt);
        const size_t lo = ci * CHUNK, hi = std::min(run.trajectories, lo + CHUNK);
        for (size_t traj = lo; traj < hi; ++traj) {
            NormalSampler rng(trajectory_seed(run.seed, traj));
            Eigen::VectorXcd x = x0;
            sum.col(0) += x;
            sq.col(0) += x.cwiseAbs2();
            for (size_t s = 0; s < steps; ++s) {
                double t = double(s) * run.dt;
                Eigen::VectorXcd incr = M * x + d;
                if (drive_col >= 0) incr += W.col(drive_col) * run.drive(t);
                x += run.dt * incr;
                for (size_t j = 0; j < k; ++j) {
                    double xi = rng.next();
                    if (scale[j] != 0.0) x += W.col(long(j)) * (xi * sdt * scale[j]);
                }
                for (size_t i = 0; i < n; ++i)
                    if (!std::isfinite(x(long(i)).real()) || !std::isfinite(x(long(i)).imag()))
                        throw std::runtime_error("trajectory " + std::to_string(traj) +
                                                 " diverged at step " + std::to_string(s + 1));
                sum.col(long(s + 1)) += x;
                sq.col(long(s + 1)) += x.cwiseAbs2();
            }
        }
        chunk_sum[ci] = std::move(sum);
        chunk_sq[ci] = std::move(sq);
    };

    size_t workers = std::min(detail::thread_cap(), n_chunks);
    if (workers <= 1) {
        for (size_t ci = 0; ci < n_chunks; ++ci) run_chunk(ci);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errs(workers);
        std::atomic<size_t> next{0};
        for (size_t t = 0; t < workers; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (size_t ci = next.fetch_add(1); ci < n_chunks; ci = next.fetch_add(1))
                        run_chunk(ci);
                } catch (...) {
                    errs[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);
    }

    for (size_t span = 1; span < n_chunks; span *= 2)
        for (size_t i = 0; i + span < n_chunks; i += 2 * span) {
            chunk_sum[i] += chunk_sum[i + span];
            chunk_sq[i] += chunk_sq[i + span];
        }

    const double T = double(run.trajectories);
    out.mean.assign(n, std::vector<std::complex<double>>(cols));
    out.variance.assign(n, std::vector<double>(cols, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t s = 0; s < cols; ++s) {
            std::complex<double> m = chunk_sum[0](long(i), long(s)) / T;
            out.mean[i][s] = m;
            if (run.trajectories > 1) {
                double v = (chunk_sq[0](long(i), long(s)) - T * std::norm(m)) / (T - 1.0);
                out.variance[i][s] = v < 0 ? 0 : v;
            }
        }

    out.metadata = std::string("{\"generator\":\"mt19937_64 box-muller\",") +
                   "\"trajectory_seed\":\"splitmix64(seed + 0x9e3779b97f4a7c15 * index)\"," +
                   "\"seed\":" + std::to_string(run.seed) + ",\"dt\":" + num17(run.dt) +
                   ",\"horizon\":" + num17(run.horizon) +
                   ",\"trajectories\":" + std::to_string(run.trajectories) + "}";
    return out;
}

// Classic RK4 over an indexable state; the drive is sampled once per stage so
// every model sees identical inputs.
template <class T, class Model, class Drive>
inline std::vector<std::vector<T>> integrate_chain(const Model& model, size_t dim, Drive&& drive,
                                                   T dt, size_t steps) {
    if (!(dt > T(0))) throw std::invalid_argument("integrator needs dt > 0");
    if (dim == 0) throw std::invalid_argument("integrator needs a nonempty state");
    std::vector<T> x(dim, T(0)), k1, k2, k3, k4, tmp(dim);
    std::vector<std::vector<T>> series;
    series.reserve(steps + 1);
    series.push_back(x);
    const T half = dt / T(2);
    for (size_t s = 0; s < steps; ++s) {
        T t = T(s) * dt;
        T v1 = drive(t), v2 = drive(t + half), v4 = drive(t + dt);
        model.derivative(x, v1, k1);
        for (size_t i = 0; i < dim; ++i) tmp[i] = x[i] + half * k1[i];
        model.derivative(tmp, v2, k2);
        for (size_t i = 0; i < dim; ++i) tmp[i] = x[i] + half * k2[i];
        model.derivative(tmp, v2, k3);
        for (size_t i = 0; i < dim; ++i) tmp[i] = x[i] + dt * k3[i];
        model.derivative(tmp, v4, k4);
        for (size_t i = 0; i < dim; ++i)
            x[i] = x[i] + (dt / T(6)) * (k1[i] + T(2) * k2[i] + T(2) * k3[i] + k4[i]);
        for (size_t i = 0; i < dim; ++i)
            if (!std::isfinite(double(x[i])))
                throw std::runtime_error("state diverged at step " + std::to_string(s + 1));
        series.push_back(x);
    }
    return series;
}

// Scalar reference tau u' = -mu u - kappa (e^u - 1) + v(t), written with the
// same row arithmetic as DiodeChain so the kappa = 0 control matches it bit
// for bit.
template <class T>
struct DiodeReference {
    T mu = T(1), kappa = T(1), tau = T(1);

    template <class State>
    void derivative(const State& u, typename State::value_type v, State& out) const {
        using S = typename State::value_type;
        out.resize(u.size());
        out[0] = (-S(mu) * u[0] - S(kappa) * std::expm1(u[0]) + v) / S(tau);
    }
};

template <class T>
inline std::vector<T> diode_reference_series(T mu, T kappa, T tau, const ExpSineDrive<T>& v, T dt,
                                             size_t steps) {
    DiodeReference<T> ref{mu, kappa, tau};
    auto series = integrate_chain(ref, 1, v, dt, steps);
    std::vector<T> out(series.size());
    for (size_t i = 0; i < series.size(); ++i) out[i] = series[i][0];
    return out;
}

inline std::vector<double> integrate_ode_meanfield(double mu, double kappa, double tau,
                                                   const DriveWaveform& v, double dt, size_t steps) {
    return diode_reference_series<double>(mu, kappa, tau, v, dt, steps);
}

struct ConvergenceRow {
    size_t order;
    double max_error;  // max |u1(chain) - u(reference)| over the horizon
};

// Truncated chains against the exact scalar reference, both RK4 at the same
// step in extended precision so only the truncation error survives.
inline std::vector<ConvergenceRow> truncation_convergence(const std::vector<size_t>& orders,
                                                          double mu, double kappa, double tau,
                                                          const DriveWaveform& v, double dt,
                                                          double horizon) {
    for (size_t N : orders)
        if (N < 2) throw std::invalid_argument("truncation study needs orders >= 2");
    if (!(dt > 0) || !(horizon >= dt)) throw std::invalid_argument("truncation study needs horizon >= dt > 0");
    using LD = long double;
    const size_t steps = (size_t)std::llround(horizon / dt);
    const ExpSineDrive<LD> drive{(LD)v.V0, (LD)v.alpha, (LD)v.omega};
    const auto ref = diode_reference_series<LD>((LD)mu, (LD)kappa, (LD)tau, drive, (LD)dt, steps);
    std::vector<ConvergenceRow> rows;
    for (size_t N : orders) {
        DiodeChain chain{N, kappa, mu, tau};
        auto series = integrate_chain(chain, N, drive, (LD)dt, steps);
        LD worst = 0;
        for (size_t s = 0; s < series.size(); ++s)
            worst = std::max(worst, std::abs(series[s][0] - ref[s]));
        rows.push_back({N, double(worst)});
    }
    return rows;
}

// RK4 mean path of dx/dt = M x + drive, the deterministic reference for
// ensemble means.
inline std::vector<Eigen::VectorXcd> integrate_ode_linear(const LinearSystem& sys,
                                                          const Eigen::VectorXcd& x0, double dt,
                                                          size_t steps) {
    if (!(dt > 0)) throw std::invalid_argument("integrator needs dt > 0");
    const Eigen::MatrixXcd M = sys.matrix();
    const Eigen::VectorXcd d = sys.drive_vector();
    auto f = [&](const Eigen::VectorXcd& x) { return Eigen::VectorXcd(M * x + d); };
    std::vector<Eigen::VectorXcd> out;
    out.reserve(steps + 1);
    out.push_back(x0);
    Eigen::VectorXcd x = x0;
    for (size_t s = 0; s < steps; ++s) {
        Eigen::VectorXcd k1 = f(x);
        Eigen::VectorXcd k2 = f(x + (dt / 2) * k1);
        Eigen::VectorXcd k3 = f(x + (dt / 2) * k2);
        Eigen::VectorXcd k4 = f(x + dt * k3);
        x += (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
        out.push_back(x);
    }
    return out;
}

inline void write_timeseries_csv(std::ostream& os, const EnsembleResult& er) {
    os << "t_s";
    for (const auto& l : er.labels) os << ',' << l << "_mean_re," << l << "_mean_im," << l << "_var";
    os << '\n';
    for (size_t s = 0; s < er.t.size(); ++s) {
        os << num17(er.t[s]);
        for (size_t i = 0; i < er.labels.size(); ++i)
            os << ',' << num17(er.mean[i][s].real()) << ',' << num17(er.mean[i][s].imag()) << ','
               << num17(er.variance[i][s]);
        os << '\n';
    }
}

}  // namespace hilange
