#pragma once

// Continuation of a motion from two seed points: one step of the learned
// second-order recursion, then a stochastic search that moves only the newest
// point until every learned law is back within kappa * sigma of its target.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mechlaw/errors.hpp"
#include "mechlaw/feature_bank.hpp"
#include "mechlaw/law_extractor.hpp"
#include "mechlaw/linalg.hpp"

namespace mechlaw {

struct RecursionConfig {
    std::size_t steps = 1000;
    double tol_mult = 3.0;  // kappa
    std::size_t max_projection_iters = 200;
    /// First trial displacement per coordinate, as a fraction of dt * (training v-range).
    double initial_step_fraction = 1e-3;
    /// Absolute first trial displacement; overrides the fraction when > 0.
    double initial_step = 0.0;
    double step_shrink = 0.5;
    /// Step multiplier after an accepted move; 1 keeps the step non-increasing.
    double step_grow = 2.0;
    /// Also try the vertex of the parabola fitted to D along each direction.
    bool parabolic_candidate = true;
    std::uint64_t seed = 1;
    /// Abort once any scaled coordinate (x or v) exceeds this in magnitude.
    double divergence_bound = 10.0;
    bool projection = true;
    bool continue_on_projection_failure = false;

    void validate() const {
        detail::require(steps >= 1, "recursion: steps must be >= 1");
        detail::require(tol_mult > 0.0, "recursion: tol_mult must be > 0");
        detail::require(step_shrink > 0.0 && step_shrink < 1.0, "recursion: step_shrink must be in (0, 1)");
        detail::require(step_grow >= 1.0, "recursion: step_grow must be >= 1");
        detail::require(initial_step_fraction > 0.0 || initial_step > 0.0,
                        "recursion: projection step must be positive");
        detail::require(divergence_bound > 0.0, "recursion: divergence_bound must be > 0");
    }
};

enum class ContinuationStatus { completed, diverged, projection_failed };

[[nodiscard]] inline std::string to_string(ContinuationStatus s) {
    switch (s) {
        case ContinuationStatus::completed: return "completed";
        case ContinuationStatus::diverged: return "diverged";
        case ContinuationStatus::projection_failed: return "projection_failed";
    }
    return "unknown";
}

struct ContinuationResult {
    std::vector<Vector> states;           // includes both seeds
    std::vector<Vector> deviations;       // per emitted step: |C_k - target_k| / sigma_k
    std::vector<std::size_t> projection_iters;
    std::size_t projection_failures = 0;  // only > 0 when failures are tolerated
    Vector targets;
    ContinuationStatus status = ContinuationStatus::completed;
    std::string message;
};

/// Scale used for the conservation tolerance of a law: the worst
/// per-trajectory spread seen in training.
[[nodiscard]] inline double tolerance_sigma(const ConservedLaw& law) {
    const double s = std::max(law.sigma_worst, law.sigma);
    return s > 0.0 ? s : std::numeric_limits<double>::min();
}

/// x_{n+1} = 2 x_n - x_{n-1} + dt^2 f(x_n, (x_n - x_{n-1}) / dt).
[[nodiscard]] inline Vector step_eom(const LawModel& m, std::span<const double> x_n,
                                     std::span<const double> x_nm1) {
    detail::require(x_n.size() == m.dim() && x_nm1.size() == m.dim(), "step_eom: dimension mismatch");
    const double dt = m.dt;
    const WrapFlags& wrap = m.wrap();
    const Vector d = wrap.difference(x_n, x_nm1);
    Vector v(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) v[i] = d[i] / dt;
    const Vector f = evaluate_force(m, x_n, v);
    Vector out(x_n.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = wrap[i] ? wrap_angle(x_n[i] + d[i] + dt * dt * f[i])
                         : 2.0 * x_n[i] - x_nm1[i] + dt * dt * f[i];
        if (!std::isfinite(out[i])) throw DivergenceError("step_eom: non-finite state", 0.0);
    }
    return out;
}

/// Law values at the pair (x_{n+1}, x_n), i.e. with v = (x_{n+1} - x_n) / dt.
[[nodiscard]] inline Vector laws_at_pair(const LawModel& m, std::span<const double> x_next,
                                         std::span<const double> x_n) {
    Vector v = m.wrap().difference(x_next, x_n);
    for (double& c : v) c /= m.dt;
    return evaluate_laws(m, x_next, v);
}

/// Deviation of each law from its target in units of tolerance_sigma.
[[nodiscard]] inline Vector law_deviations(const LawModel& m, std::span<const double> values,
                                           std::span<const double> targets) {
    Vector d(values.size());
    for (std::size_t k = 0; k < values.size(); ++k)
        d[k] = std::abs(values[k] - targets[k]) / tolerance_sigma(m.laws[k]);
    return d;
}

struct ProjectionOutcome {
    Vector x;
    std::size_t iterations = 0;
    bool converged = true;
    Vector deviations;
    std::vector<double> objective_trace;  // D after each accepted move, starting value first
};

/// Random-direction search on x_{n+1} (x_n fixed) minimizing
/// D = sum_k ((C_k - target_k) / sigma_k)^2 until every |C_k - target_k| <= kappa sigma_k.
[[nodiscard]] inline ProjectionOutcome project(const LawModel& m, std::span<const double> targets,
                                               std::span<const double> x_next,
                                               std::span<const double> x_n,
                                               const RecursionConfig& cfg, Rng& rng) {
    detail::require(targets.size() == m.laws.size(), "project: one target per law required");
    detail::require(x_next.size() == m.dim() && x_n.size() == m.dim(), "project: dimension mismatch");
    const std::size_t n = m.dim();
    const WrapFlags& wrap = m.wrap();

    auto objective = [&](std::span<const double> x, Vector& dev) {
        dev = law_deviations(m, laws_at_pair(m, x, x_n), targets);
        double s = 0.0;
        for (double d : dev) s += d * d;
        return s;
    };
    auto within = [&](const Vector& dev) {
        return std::all_of(dev.begin(), dev.end(), [&](double d) { return d <= cfg.tol_mult; });
    };

    ProjectionOutcome out;
    out.x.assign(x_next.begin(), x_next.end());
    double best = objective(out.x, out.deviations);
    out.objective_trace.push_back(best);
    if (within(out.deviations)) return out;

    Vector unit_scale(n, 1.0);
    if (cfg.initial_step <= 0.0) {
        const Vector vr = m.bank.scaler.v_range();
        for (std::size_t i = 0; i < n; ++i)
            unit_scale[i] = m.dt * (vr[i] > 0.0 ? vr[i] : 1.0) * cfg.initial_step_fraction;
    } else {
        std::fill(unit_scale.begin(), unit_scale.end(), cfg.initial_step);
    }

    Vector dir(n), plus(n), minus(n), vertex(n), dev_p, dev_m, dev_v;
    auto point_at = [&](double t, Vector& p) {
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = out.x[i] + t * unit_scale[i] * dir[i];
            if (wrap[i]) p[i] = wrap_angle(p[i]);
        }
    };

    double step = 1.0;
    while (out.iterations < cfg.max_projection_iters) {
        ++out.iterations;
        double len = 0.0;
        for (auto& c : dir) {
            c = rng.normal();
            len += c * c;
        }
        len = std::sqrt(len);
        for (auto& c : dir) c /= len;
        point_at(step, plus);
        point_at(-step, minus);
        const double dp = objective(plus, dev_p);
        const double dm = objective(minus, dev_m);

        // Third candidate: vertex of the parabola through the three samples.
        double dv = std::numeric_limits<double>::infinity();
        if (cfg.parabolic_candidate) {
            const double curv = dp + dm - 2.0 * best;
            if (curv > 0.0) {
                const double t = 0.5 * step * (dm - dp) / curv;
                if (std::isfinite(t) && t != 0.0) {
                    point_at(t, vertex);
                    dv = objective(vertex, dev_v);
                }
            }
        }

        const double cand = std::min({dp, dm, dv});
        if (cand < best) {
            if (dv == cand) {
                out.x = vertex;
                out.deviations = dev_v;
            } else if (dp == cand) {
                out.x = plus;
                out.deviations = dev_p;
            } else {
                out.x = minus;
                out.deviations = dev_m;
            }
            best = cand;
            out.objective_trace.push_back(best);
            if (within(out.deviations)) return out;
            step *= cfg.step_grow;
        } else {
            step *= cfg.step_shrink;
        }
    }
    out.converged = false;
    return out;
}

/// Runs the recursion for cfg.steps steps starting from the seed pair (x0, x1).
/// Law targets are the law values at the seed pair.
[[nodiscard]] inline ContinuationResult continue_motion(const LawModel& m,
                                                        std::span<const double> x0,
                                                        std::span<const double> x1,
                                                        const RecursionConfig& cfg) {
    cfg.validate();
    detail::require(x0.size() == m.dim() && x1.size() == m.dim(), "continue_motion: seed dimension mismatch");
    for (std::size_t i = 0; i < x0.size(); ++i)
        detail::require(std::isfinite(x0[i]) && std::isfinite(x1[i]), "continue_motion: non-finite seed");

    ContinuationResult res;
    res.states.emplace_back(x0.begin(), x0.end());
    res.states.emplace_back(x1.begin(), x1.end());
    res.targets = laws_at_pair(m, x1, x0);
    res.states.reserve(cfg.steps + 2);

    const Scaler& sc = m.bank.scaler;
    auto out_of_bounds = [&](std::span<const double> x, std::span<const double> prev) {
        Vector v = m.wrap().difference(x, prev);
        for (double& c : v) c /= m.dt;
        const Vector xs = sc.scale_x(m.wrap().wrap(x));
        const Vector vs = sc.scale_v(v);
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (!(std::abs(xs[i]) <= cfg.divergence_bound) || !(std::abs(vs[i]) <= cfg.divergence_bound))
                return true;
        return false;
    };

    Rng rng(cfg.seed);
    for (std::size_t k = 0; k < cfg.steps; ++k) {
        const Vector& xn = res.states[res.states.size() - 1];
        const Vector& xp = res.states[res.states.size() - 2];
        Vector next;
        try {
            next = step_eom(m, xn, xp);
        } catch (const DivergenceError&) {
            res.status = ContinuationStatus::diverged;
            res.message = "non-finite state at step " + std::to_string(k + 2);
            return res;
        }

        std::size_t iters = 0;
        Vector dev;
        bool failed = false;
        if (cfg.projection && !m.laws.empty()) {
            ProjectionOutcome p = project(m, res.targets, next, xn, cfg, rng);
            next = std::move(p.x);
            iters = p.iterations;
            dev = std::move(p.deviations);
            failed = !p.converged;
        } else {
            dev = law_deviations(m, laws_at_pair(m, next, xn), res.targets);
        }

        const bool bad = out_of_bounds(next, xn);
        res.states.push_back(std::move(next));
        res.deviations.push_back(std::move(dev));
        res.projection_iters.push_back(iters);
        if (bad) {
            res.status = ContinuationStatus::diverged;
            res.message = "state left the divergence bound at step " + std::to_string(k + 2);
            return res;
        }
        if (failed) {
            ++res.projection_failures;
            if (!cfg.continue_on_projection_failure) {
                res.status = ContinuationStatus::projection_failed;
                res.message = "projection did not reach tolerance at step " + std::to_string(k + 2);
                return res;
            }
        }
    }
    return res;
}

}  // namespace mechlaw
