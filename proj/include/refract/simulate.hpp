#pragma once

// Monte Carlo engine for the controlled withdrawal dynamics.
//
// Purpose: verification of the analytic pipeline by an independent route.
// Paths follow the Euler–Maruyama discretization of
//
//     dX = (mu(X) - l(X)) dt + sigma(X) dW,      l(x) in [0, F(x)],
//
// absorbed at the origin, and the estimated payoff is the discounted
// withdrawal stream  E[ sum_k e^{-q t_k} l(X_k) dt ].
//
// Determinism contract: every path draws from a counter-based stream keyed
// by (seed, path index), so an estimate is bitwise-identical for a fixed
// (seed, dt, n_paths) no matter how the paths are partitioned across
// workers.  All reductions are fixed-shape pairwise sums over path index.
//
// Known discretization bias, by design: absorption is detected by endpoint
// sign only (no bridge correction) and the withdrawal indicator uses the
// step's left endpoint.  Both are O(sqrt(dt)) effects, controlled in the
// test suite by the dt-halving self-consistency check.  The horizon
// truncation at t_max contributes at most sup F / q * e^{-q t_max}, which
// is reported in the tail_bound field rather than folded into std_error.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "refract/error.hpp"
#include "refract/model.hpp"

namespace refract {

/// Knobs of one Monte Carlo run.
struct SimConfig {
    double dt = 1e-3;            ///< step size, must lie in (0, 1e-2]
    long long n_paths = 100000;  ///< independent paths
    double t_max = 0.0;          ///< horizon; 0 = derive ceil(13.8 / q) so e^{-q t_max} <= 1e-6
    std::uint64_t seed = 1;      ///< stream key, combined with each path index
    double x0 = 1.0;             ///< common starting point
};

/// Sample statistics of one simulated payoff.
struct PayoffEstimate {
    double mean = 0.0;
    double std_error = 0.0;  ///< sample standard deviation / sqrt(n_paths)
    long long n_paths = 0;
    double absorbed_fraction = 0.0;
    double mean_absorption_time = 0.0;  ///< over absorbed paths; 0 when none absorbed
    double tail_bound = 0.0;            ///< truncation budget sup F / q * e^{-q t_max}
    long long admissibility_violations = 0;  ///< policy evaluations outside [0, F(x)]
};

/// A general withdrawal policy: rate(x) proposes the withdrawal speed at x.
/// Admissibility 0 <= rate(x) <= F(x) is enforced at every evaluation: the
/// engine clamps the proposal into the band and counts each violation.
struct Policy {
    std::function<double(double)> rate;
};

namespace detail_sim {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// 64-bit finalizer with full avalanche (the SplitMix64 mixer).
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

/// Counter-based stream: draw j of stream (seed, path) is
/// mix64(key(seed, path) + j * golden).  No state beyond the counter, so a
/// path's draws depend only on its own key — the partitioning of paths
/// across workers cannot change any stream.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path)
        : key_(mix64(seed ^ mix64(path + kGolden))) {}

    /// Uniform draw in (0, 1] (never 0, so log() below is finite).
    double uniform() {
        const std::uint64_t z = mix64(key_ + ++counter_ * kGolden);
        return static_cast<double>((z >> 11) + 1) * 0x1.0p-53;
    }

    /// Standard normal via the Box–Muller pair; the twin is cached so each
    /// draw costs half a (log, sqrt, sin, cos) group on average.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        constexpr double two_pi = 6.283185307179586476925286766559;
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = two_pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Fixed-shape pairwise sum: the addition tree depends only on n, never on
/// evaluation order, so concurrent producers cannot perturb the result.
inline double pairwise_sum(const double* a, std::size_t n) {
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(a, h) + pairwise_sum(a + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& a) {
    return a.empty() ? 0.0 : pairwise_sum(a.data(), a.size());
}

/// SimConfig with the horizon made concrete and step count fixed.
struct ResolvedSim {
    double dt = 0.0;
    long long n_paths = 0;
    double t_max = 0.0;
    std::uint64_t seed = 0;
    double x0 = 0.0;
    long long n_steps = 0;
};

inline ResolvedSim resolve_config(const SimConfig& cfg, double q) {
    if (!(cfg.dt > 0.0) || !(cfg.dt <= 1e-2))
        raise(Errc::validation,
              "simulation step dt = " + std::to_string(cfg.dt) + " must lie in (0, 1e-2]");
    if (cfg.n_paths < 1) raise(Errc::validation, "n_paths must be at least 1");
    if (!std::isfinite(cfg.x0)) raise(Errc::validation, "starting point x0 must be finite");
    ResolvedSim rs;
    rs.dt = cfg.dt;
    rs.n_paths = cfg.n_paths;
    rs.seed = cfg.seed;
    rs.x0 = cfg.x0;
    rs.t_max = cfg.t_max == 0.0 ? std::ceil(13.8 / q) : cfg.t_max;
    if (!(q * rs.t_max >= 13.8 - 1e-9))
        raise(Errc::validation, "horizon too short: q * t_max = " + std::to_string(q * rs.t_max) +
                                    " must be at least 13.8 so the discounted tail is <= 1e-6");
    rs.n_steps = static_cast<long long>(std::ceil(rs.t_max / rs.dt - 1e-9));
    return rs;
}

/// Run fn(lo, hi) over a partition of [0, n) on n_workers threads
/// (0 = hardware concurrency).  Safe because every fn call writes only to
/// path slots in [lo, hi).
template <class Fn>
inline void run_partitioned(long long n, int n_workers, const Fn& fn) {
    int w = n_workers > 0 ? n_workers : static_cast<int>(std::thread::hardware_concurrency());
    if (w < 1) w = 1;
    if (static_cast<long long>(w) > n) w = static_cast<int>(n);
    if (w == 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(w));
    for (int i = 0; i < w; ++i) {
        const long long lo = n * i / w;
        const long long hi = n * (i + 1) / w;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

/// One controlled path: Euler–Maruyama with left-endpoint coefficients and
/// withdrawal rate, endpoint-sign absorption.  rate(x, F, violations) gives
/// the applied withdrawal speed.  Writes the discounted payoff and the
/// absorption time (-1 when the path survives to t_max).
template <class RateFn>
inline void controlled_path(const ExtendedModel& m, const ResolvedSim& rs, std::uint64_t path,
                            const RateFn& rate, double& payoff_out, double& t_abs_out,
                            long long& violations_out) {
    PathRng rng(rs.seed, path);
    double x = rs.x0;
    double payoff = 0.0;
    double t_abs = -1.0;
    long long violations = 0;
    if (x <= 0.0) {
        t_abs = 0.0;  // ruined before withdrawing anything
    } else {
        const double sqdt = std::sqrt(rs.dt);
        const double df = std::exp(-m.q() * rs.dt);
        double disc = 1.0;
        for (long long k = 0; k < rs.n_steps; ++k) {
            const Coeffs c = m.eval_coeffs(x);
            const double l = rate(x, c.F, violations);
            payoff += disc * l * rs.dt;
            x += (c.mu - l) * rs.dt + c.sigma * sqdt * rng.normal();
            disc *= df;
            if (x <= 0.0) {
                t_abs = static_cast<double>(k + 1) * rs.dt;
                break;
            }
        }
    }
    payoff_out = payoff;
    t_abs_out = t_abs;
    violations_out = violations;
}

/// Reduce per-path results into the reported estimate (fixed-shape sums).
inline PayoffEstimate reduce_paths(const ExtendedModel& m, const ResolvedSim& rs,
                                   const std::vector<double>& payoff,
                                   const std::vector<double>& t_abs,
                                   const std::vector<long long>& violations) {
    const auto n = static_cast<std::size_t>(rs.n_paths);
    PayoffEstimate est;
    est.n_paths = rs.n_paths;
    est.mean = pairwise_sum(payoff) / static_cast<double>(n);

    std::vector<double> scratch(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = payoff[i] - est.mean;
        scratch[i] = d * d;
    }
    const double var = n > 1 ? pairwise_sum(scratch) / static_cast<double>(n - 1) : 0.0;
    est.std_error = std::sqrt(var / static_cast<double>(n));

    long long absorbed = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool hit = t_abs[i] >= 0.0;
        absorbed += hit ? 1 : 0;
        scratch[i] = hit ? t_abs[i] : 0.0;
    }
    est.absorbed_fraction = static_cast<double>(absorbed) / static_cast<double>(n);
    est.mean_absorption_time =
        absorbed > 0 ? pairwise_sum(scratch) / static_cast<double>(absorbed) : 0.0;

    for (long long v : violations) est.admissibility_violations += v;

    const double f_sup = m.eval_coeffs(m.x_hi()).F;  // F is nondecreasing
    est.tail_bound = f_sup / m.q() * std::exp(-m.q() * rs.t_max);
    return est;
}

template <class RateFn>
inline PayoffEstimate run_controlled(const ExtendedModel& m, const ResolvedSim& rs,
                                     const RateFn& rate, int n_workers) {
    const auto n = static_cast<std::size_t>(rs.n_paths);
    std::vector<double> payoff(n), t_abs(n);
    std::vector<long long> violations(n);
    run_partitioned(rs.n_paths, n_workers, [&](long long lo, long long hi) {
        for (long long p = lo; p < hi; ++p) {
            const auto i = static_cast<std::size_t>(p);
            controlled_path(m, rs, static_cast<std::uint64_t>(p), rate, payoff[i], t_abs[i],
                            violations[i]);
        }
    });
    return reduce_paths(m, rs, payoff, t_abs, violations);
}

}  // namespace detail_sim

/// Estimate the performance of the refraction strategy with barrier b:
/// withdraw at the full bound F(x) while x >= b, nothing below.
inline PayoffEstimate simulate_refraction(const ExtendedModel& m, double b, const SimConfig& cfg,
                                          int n_workers = 0) {
    if (!(b >= 0.0))
        raise(Errc::validation, "refraction barrier must be nonnegative, got " + std::to_string(b));
    const detail_sim::ResolvedSim rs = detail_sim::resolve_config(cfg, m.q());
    return detail_sim::run_controlled(
        m, rs, [b](double x, double f, long long&) { return x >= b ? f : 0.0; }, n_workers);
}

/// Estimate the performance of a general policy.  Proposals outside
/// [0, F(x)] are clamped and counted in admissibility_violations.
inline PayoffEstimate simulate_policy(const ExtendedModel& m, const Policy& p,
                                      const SimConfig& cfg, int n_workers = 0) {
    if (!p.rate) raise(Errc::validation, "policy has no rate function");
    const detail_sim::ResolvedSim rs = detail_sim::resolve_config(cfg, m.q());
    return detail_sim::run_controlled(
        m, rs,
        [&p](double x, double f, long long& violations) {
            double l = p.rate(x);
            if (l < 0.0) {
                l = 0.0;
                ++violations;
            } else if (l > f) {
                l = f;
                ++violations;
            }
            return l;
        },
        n_workers);
}

/// Estimate E_x[e^{-q kappa_b}; kappa_b < kappa_0] for the *uncontrolled*
/// diffusion dY = mu(Y) dt + sigma(Y) dW: the discounted probability of
/// rising to b before ruining at 0.  The analytic value is psi(x) / psi(b).
/// In the estimate, absorbed_fraction is the fraction of paths that reached
/// b and mean_absorption_time their mean hitting time.
inline PayoffEstimate simulate_passage_up(const ExtendedModel& m, double x0, double b,
                                          const SimConfig& cfg, int n_workers = 0) {
    if (!(b > 0.0)) raise(Errc::validation, "upward passage level must be positive");
    SimConfig local = cfg;
    local.x0 = x0;
    const detail_sim::ResolvedSim rs = detail_sim::resolve_config(local, m.q());
    const auto n = static_cast<std::size_t>(rs.n_paths);
    std::vector<double> value(n), t_hit(n);
    detail_sim::run_partitioned(rs.n_paths, n_workers, [&](long long lo, long long hi) {
        const double sqdt = std::sqrt(rs.dt);
        const double df = std::exp(-m.q() * rs.dt);
        for (long long p = lo; p < hi; ++p) {
            detail_sim::PathRng rng(rs.seed, static_cast<std::uint64_t>(p));
            double x = rs.x0, disc = 1.0, val = 0.0, th = -1.0;
            if (x >= b) {
                val = 1.0;  // already at or above the level
                th = 0.0;
            } else if (x > 0.0) {
                for (long long k = 0; k < rs.n_steps; ++k) {
                    const Coeffs c = m.eval_coeffs(x);
                    x += c.mu * rs.dt + c.sigma * sqdt * rng.normal();
                    disc *= df;
                    if (x >= b) {
                        val = disc;
                        th = static_cast<double>(k + 1) * rs.dt;
                        break;
                    }
                    if (x <= 0.0) break;  // ruin first: contributes zero
                }
            }
            const auto i = static_cast<std::size_t>(p);
            value[i] = val;
            t_hit[i] = th;
        }
    });
    std::vector<long long> no_violations(n, 0);
    PayoffEstimate est = detail_sim::reduce_paths(m, rs, value, t_hit, no_violations);
    est.tail_bound = std::exp(-m.q() * rs.t_max);  // each path contributes at most this after t_max
    return est;
}

/// Estimate E_x[e^{-q tau_b}] for the *full-withdrawal* diffusion
/// dX = (mu(X) - F(X)) dt + sigma(X) dW: the discounted first passage down
/// to b from x0 > b.  The analytic value is phi(x) / phi(b).
inline PayoffEstimate simulate_passage_down(const ExtendedModel& m, double x0, double b,
                                            const SimConfig& cfg, int n_workers = 0) {
    if (!(b >= 0.0)) raise(Errc::validation, "downward passage level must be nonnegative");
    SimConfig local = cfg;
    local.x0 = x0;
    const detail_sim::ResolvedSim rs = detail_sim::resolve_config(local, m.q());
    const auto n = static_cast<std::size_t>(rs.n_paths);
    std::vector<double> value(n), t_hit(n);
    detail_sim::run_partitioned(rs.n_paths, n_workers, [&](long long lo, long long hi) {
        const double sqdt = std::sqrt(rs.dt);
        const double df = std::exp(-m.q() * rs.dt);
        for (long long p = lo; p < hi; ++p) {
            detail_sim::PathRng rng(rs.seed, static_cast<std::uint64_t>(p));
            double x = rs.x0, disc = 1.0, val = 0.0, th = -1.0;
            if (x <= b) {
                val = 1.0;
                th = 0.0;
            } else {
                for (long long k = 0; k < rs.n_steps; ++k) {
                    const Coeffs c = m.eval_coeffs(x);
                    x += (c.mu - c.F) * rs.dt + c.sigma * sqdt * rng.normal();
                    disc *= df;
                    if (x <= b) {
                        val = disc;
                        th = static_cast<double>(k + 1) * rs.dt;
                        break;
                    }
                }
            }
            const auto i = static_cast<std::size_t>(p);
            value[i] = val;
            t_hit[i] = th;
        }
    });
    std::vector<long long> no_violations(n, 0);
    PayoffEstimate est = detail_sim::reduce_paths(m, rs, value, t_hit, no_violations);
    est.tail_bound = std::exp(-m.q() * rs.t_max);
    return est;
}

/// One sampled point of the discounted-state decay curve.
struct DecayPoint {
    double horizon = 0.0;
    double estimate = 0.0;  ///< e^{-q T} * mean |X_T|
};

/// Decay curve plus the exponential rate fitted through its points.
struct TransversalityReport {
    std::vector<DecayPoint> points;
    double fitted_rate = 0.0;  ///< least-squares slope of -log(estimate) vs T
};

/// Estimate e^{-q T} E|X_T| for the full-withdrawal diffusion *without*
/// absorption (the extension below 0 keeps the coefficients affine) across
/// the given horizons, with common random numbers: one walk per path,
/// sampled at every horizon.  The discounted state must decay for the
/// infinite-horizon payoffs to be meaningful; the fitted rate should be at
/// least q minus the drift's slope at the origin.
inline TransversalityReport transversality_check(const ExtendedModel& m, const SimConfig& cfg,
                                                 const std::vector<double>& horizons,
                                                 int n_workers = 0) {
    if (!(cfg.dt > 0.0) || !(cfg.dt <= 1e-2))
        raise(Errc::validation,
              "simulation step dt = " + std::to_string(cfg.dt) + " must lie in (0, 1e-2]");
    if (cfg.n_paths < 1) raise(Errc::validation, "n_paths must be at least 1");
    if (horizons.empty()) raise(Errc::validation, "at least one horizon is required");
    std::vector<long long> steps;
    steps.reserve(horizons.size());
    for (double t : horizons) {
        if (!(t > 0.0)) raise(Errc::validation, "horizons must be positive");
        const auto k = static_cast<long long>(std::llround(t / cfg.dt));
        if (k < 1 || (!steps.empty() && k <= steps.back()))
            raise(Errc::validation, "horizons must be increasing and resolvable by dt");
        steps.push_back(k);
    }

    const auto n = static_cast<std::size_t>(cfg.n_paths);
    const std::size_t nh = horizons.size();
    std::vector<std::vector<double>> abs_state(nh, std::vector<double>(n));
    detail_sim::run_partitioned(cfg.n_paths, n_workers, [&](long long lo, long long hi) {
        const double sqdt = std::sqrt(cfg.dt);
        const long long last = steps.back();
        for (long long p = lo; p < hi; ++p) {
            detail_sim::PathRng rng(cfg.seed, static_cast<std::uint64_t>(p));
            double x = cfg.x0;
            std::size_t next = 0;
            for (long long k = 1; k <= last; ++k) {
                const Coeffs c = m.eval_coeffs(x);
                x += (c.mu - c.F) * cfg.dt + c.sigma * sqdt * rng.normal();
                if (k == steps[next]) {
                    abs_state[next][static_cast<std::size_t>(p)] = std::abs(x);
                    ++next;
                }
            }
        }
    });

    TransversalityReport report;
    report.points.reserve(nh);
    for (std::size_t i = 0; i < nh; ++i) {
        const double mean = detail_sim::pairwise_sum(abs_state[i]) / static_cast<double>(n);
        report.points.push_back({horizons[i], std::exp(-m.q() * horizons[i]) * mean});
    }

    // Least-squares fit of log(estimate) against T; the decay rate is the
    // negated slope.  A nonpositive estimate (possible only in degenerate
    // zero-noise corners) makes the fit meaningless: report no decay.
    double st = 0.0, sy = 0.0;
    for (const auto& pt : report.points) {
        if (!(pt.estimate > 0.0)) {
            report.fitted_rate = 0.0;
            return report;
        }
        st += pt.horizon;
        sy += std::log(pt.estimate);
    }
    const auto nn = static_cast<double>(nh);
    double num = 0.0, den = 0.0;
    for (const auto& pt : report.points) {
        const double dt_ = pt.horizon - st / nn;
        num += dt_ * (std::log(pt.estimate) - sy / nn);
        den += dt_ * dt_;
    }
    report.fitted_rate = den > 0.0 ? -num / den : 0.0;
    return report;
}

}  // namespace refract
