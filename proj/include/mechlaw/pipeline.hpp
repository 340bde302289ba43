#pragma once

// End-to-end steps shared by the command-line tool and the acceptance suite:
// simulate -> build dataset -> train -> continue, plus the two-solver chaos
// check and the linear-oscillator demo.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mechlaw/analytic.hpp"
#include "mechlaw/config.hpp"
#include "mechlaw/dataset.hpp"
#include "mechlaw/dynamics.hpp"
#include "mechlaw/feature_bank.hpp"
#include "mechlaw/law_extractor.hpp"
#include "mechlaw/metrics.hpp"
#include "mechlaw/recursion.hpp"

namespace mechlaw {

[[nodiscard]] inline std::string trajectory_label(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "traj_%02zu", i);
    return buf;
}

/// Ground truth for every configured initial condition.
[[nodiscard]] inline std::vector<Trajectory> simulate(const ExperimentConfig& cfg,
                                                      IntegratorMethod method = IntegratorMethod::high_order,
                                                      std::optional<double> t_end = std::nullopt) {
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < cfg.initial_conditions.size(); ++i) {
        const auto& ic = cfg.initial_conditions[i];
        out.push_back(integrate(cfg.system, ic.x, ic.v, t_end.value_or(cfg.t_end), cfg.dt, method,
                                cfg.integrator, trajectory_label(i)));
    }
    return out;
}

struct TrainingOutcome {
    LawModel model;
    Dataset dataset;
    double force_precision = 0.0;
    std::vector<LawConservation> conservation;
    Report report;
};

[[nodiscard]] inline TrainingOutcome train_model(const ExperimentConfig& cfg,
                                                 std::span<const Trajectory> trajs) {
    detail::require(!trajs.empty(), "train: no trajectories given");
    TrainingOutcome out;
    out.dataset = build_dataset(trajs, cfg.wrap_flags());
    detail::require(!out.dataset.samples.empty(), "train: no usable samples (all trajectories too short)");
    detail::require(std::abs(out.dataset.dt - cfg.dt) <= 1e-12 * cfg.dt,
                    "train: trajectory dt differs from the configured dt");
    {
        const Matrix a = out.dataset.accelerations();
        if (std::all_of(a.data().begin(), a.data().end(), [](double v) { return v == 0.0; }))
            throw DegenerateModel("train: every acceleration in the training set is zero");
    }
    out.model = train(out.dataset, cfg.training);
    out.model.config_hash = config_hash(cfg);

    const Matrix f = feature_matrix(out.model.bank, out.dataset);
    const Matrix pred = multiply(f, out.model.force.weights);
    out.force_precision = force_precision(pred, out.dataset.accelerations());
    out.conservation = conservation_report(out.model, out.dataset);

    Report& r = out.report;
    r.set("config_hash", out.model.config_hash);
    r.set("n_samples", static_cast<double>(out.dataset.size()));
    r.set("n_trajectories", static_cast<double>(out.dataset.boundaries.size()));
    r.set("skipped_trajectories", static_cast<double>(out.dataset.skipped_trajectories));
    r.set("n_feat", static_cast<double>(out.model.bank.n_feat()));
    r.set("force_precision_pct", out.force_precision);
    for (std::size_t c = 0; c < out.dataset.dim(); ++c)
        r.set("force_precision_pct.x" + std::to_string(c + 1),
              force_precision_component(pred, out.dataset.accelerations(), c));
    r.set("force_spectrum_kept", static_cast<double>(out.model.force.spectrum_kept));
    for (std::size_t k = 0; k < out.model.laws.size(); ++k) {
        const std::string p = "law" + std::to_string(k + 1) + ".";
        const auto& law = out.model.laws[k];
        const auto& cons = out.conservation[k];
        r.set(p + "eigenvalue", law.eigenvalue);
        r.set(p + "sigma", law.sigma);
        r.set(p + "sigma_worst", law.sigma_worst);
        r.set(p + "pooled_abs_mean", cons.pooled_abs_mean);
        if (cons.normalized) r.set(p + "conservation_normalized", *cons.normalized);
        else r.set(p + "conservation_normalized", "undefined (zero mean)");
        // How well the law tells the training motions apart: spread of the
        // per-trajectory means in units of sigma.
        if (cons.mean_per_traj.size() > 1 && law.sigma > 0.0) {
            const auto [lo, hi] = std::minmax_element(cons.mean_per_traj.begin(), cons.mean_per_traj.end());
            r.set(p + "mean_separation_sigma", (*hi - *lo) / law.sigma);
        }
    }
    return out;
}

struct ContinuationOutcome {
    ContinuationResult result;
    Trajectory trajectory;  // the emitted states, same dt as the model
    std::optional<ReconstructionError> reconstruction;  // over the overlap with the reference
    double max_amplitude = 0.0;       // max |x| over the continuation (wrapped)
    double max_speed = 0.0;           // max |v proxy| over the continuation
    double reference_amplitude = 0.0; // max |x| of the reference trajectory
    double training_max_speed = 0.0;  // largest |v| seen in training
    double max_deviation = 0.0;       // largest law deviation in sigma units
    Report report;
};

/// Largest |value| covered by an affine map's [-1, 1] image.
[[nodiscard]] inline double map_extent(const AffineMap& m) {
    if (m.degenerate) return std::abs(m.invert(0.0));
    return std::max(std::abs(m.invert(-1.0)), std::abs(m.invert(1.0)));
}

/// Continues `reference` from its first two samples and compares against it.
[[nodiscard]] inline ContinuationOutcome run_continuation(const LawModel& model,
                                                          const Trajectory& reference,
                                                          const RecursionConfig& rc) {
    detail::require(reference.size() >= 2, "continue: reference needs at least two samples");
    detail::require(std::abs(reference.dt - model.dt) <= 1e-12 * model.dt,
                    "continue: reference dt differs from the model dt");
    ContinuationOutcome out;
    out.result = continue_motion(model, reference.states[0], reference.states[1], rc);
    out.trajectory.dt = model.dt;
    out.trajectory.states = out.result.states;
    out.trajectory.label = "continuation";

    const WrapFlags& wrap = model.wrap();
    for (std::size_t n = 0; n < out.trajectory.size(); ++n) {
        for (double x : wrap.wrap(out.trajectory.states[n])) out.max_amplitude = std::max(out.max_amplitude, std::abs(x));
        if (n > 0) {
            const Vector d = wrap.difference(out.trajectory.states[n], out.trajectory.states[n - 1]);
            for (double c : d) out.max_speed = std::max(out.max_speed, std::abs(c) / model.dt);
        }
    }
    for (const auto& s : reference.states)
        for (double x : wrap.wrap(s)) out.reference_amplitude = std::max(out.reference_amplitude, std::abs(x));
    for (const auto& m : model.bank.scaler.v_maps) out.training_max_speed = std::max(out.training_max_speed, map_extent(m));
    for (const auto& dev : out.result.deviations)
        for (double d : dev) out.max_deviation = std::max(out.max_deviation, d);

    const std::size_t overlap = std::min(reference.size(), out.trajectory.size());
    if (overlap >= 3) {
        Trajectory a = out.trajectory, b = reference;
        a.states.resize(overlap);
        b.states.resize(overlap);
        try {
            out.reconstruction = reconstruction_error(a, b, wrap);
        } catch (const InvalidInput&) {
            // constant reference: no meaningful relative error
        }
    }

    Report& r = out.report;
    r.set("config_hash", model.config_hash);
    r.set("status", to_string(out.result.status));
    if (!out.result.message.empty()) r.set("status_message", out.result.message);
    r.set("projection", rc.projection ? "on" : "off");
    r.set("steps_requested", static_cast<double>(rc.steps));
    r.set("states_emitted", static_cast<double>(out.result.states.size()));
    r.set("projection_failures", static_cast<double>(out.result.projection_failures));
    r.set("max_law_deviation_sigma", out.max_deviation);
    r.set("tol_mult", rc.tol_mult);
    r.set("max_amplitude", out.max_amplitude);
    r.set("reference_amplitude", out.reference_amplitude);
    r.set("max_speed", out.max_speed);
    r.set("training_max_speed", out.training_max_speed);
    r.set("bounded", out.result.status != ContinuationStatus::diverged &&
                             out.max_speed <= 5.0 * out.training_max_speed
                         ? "true" : "false");
    if (out.reconstruction) {
        r.set("reconstruction_window_samples", static_cast<double>(overlap));
        r.set("reconstruction_error_pct", out.reconstruction->pooled);
        for (std::size_t i = 0; i < out.reconstruction->per_dim.size(); ++i)
            r.set("reconstruction_error_pct.x" + std::to_string(i + 1), out.reconstruction->per_dim[i]);
    }
    return out;
}

struct ChaosOutcome {
    Trajectory high;
    Trajectory medium;
    std::optional<double> divergence_time;     // any coordinate
    std::optional<double> divergence_time_x1;  // first coordinate only
    Report report;
};

[[nodiscard]] inline Trajectory first_coordinate(const Trajectory& t) {
    Trajectory out = t;
    for (auto& s : out.states) s.resize(1);
    return out;
}

/// Integrates initial condition `cfg.continue_from` with both integrators.
[[nodiscard]] inline ChaosOutcome run_chaos(const ExperimentConfig& cfg) {
    const auto& ic = cfg.initial_conditions.at(cfg.continue_from);
    ChaosOutcome out;
    IntegratorOptions opt = cfg.integrator;
    opt.rtol = cfg.chaos.rtol;
    opt.atol = cfg.chaos.atol;
    opt.dense_output = true;
    out.high = integrate(cfg.system, ic.x, ic.v, cfg.chaos.t_end, cfg.dt, IntegratorMethod::high_order,
                         opt, "high_order");
    out.medium = integrate(cfg.system, ic.x, ic.v, cfg.chaos.t_end, cfg.dt, IntegratorMethod::medium_order,
                           opt, "medium_order");
    out.divergence_time = divergence_time(out.high, out.medium, cfg.chaos.threshold);
    out.divergence_time_x1 = divergence_time(first_coordinate(out.high), first_coordinate(out.medium),
                                             cfg.chaos.threshold);
    Report& r = out.report;
    r.set("config_hash", config_hash(cfg));
    r.set("system", to_string(cfg.system.kind));
    r.set("threshold", cfg.chaos.threshold);
    r.set("t_end", cfg.chaos.t_end);
    r.set("rtol", cfg.chaos.rtol);
    r.set("atol", cfg.chaos.atol);
    r.set("divergence_time", out.divergence_time ? format_double(*out.divergence_time) : "none");
    r.set("divergence_time_x1", out.divergence_time_x1 ? format_double(*out.divergence_time_x1) : "none");
    return out;
}

struct OscillatorDemo {
    TrainingOutcome training;
    double force_vs_analytic_pct = 0.0;  // learned force vs -Z(k) omega^2 x
    double energy_fit_r2 = 0.0;          // best affine fit of law 1 to the discrete energy
    double analytic_energy_relative_std = 0.0;
    Report report;
};

/// Trains on sampled harmonic motions and compares with the exact discrete results.
[[nodiscard]] inline OscillatorDemo run_oscillator_demo(const ExperimentConfig& cfg) {
    detail::require(cfg.system.kind == SystemKind::harmonic, "demo-oscillator: needs a harmonic system");
    const auto trajs = simulate(cfg);
    OscillatorDemo out;
    out.training = train_model(cfg, trajs);
    const auto& ds = out.training.dataset;
    const analytic::HarmonicSpec hs{cfg.system.param("omega"), cfg.dt};

    const Matrix f = feature_matrix(out.training.model.bank, ds);
    const Matrix pred = multiply(f, out.training.model.force.weights);
    Matrix exact(ds.size(), 1);
    Vector energy(ds.size());
    for (std::size_t n = 0; n < ds.size(); ++n) {
        exact(n, 0) = analytic::harmonic_discrete_force(hs, ds.samples[n].x[0]);
        energy[n] = analytic::discrete_energy(hs, ds.samples[n].x[0], ds.samples[n].v[0]);
    }
    out.force_vs_analytic_pct = force_precision(pred, exact);

    const Vector c = multiply(f, out.training.model.laws.front().weights);
    double me = 0.0, mc = 0.0;
    for (std::size_t n = 0; n < c.size(); ++n) {
        me += energy[n];
        mc += c[n];
    }
    me /= static_cast<double>(c.size());
    mc /= static_cast<double>(c.size());
    double see = 0.0, scc = 0.0, sec = 0.0;
    for (std::size_t n = 0; n < c.size(); ++n) {
        see += (energy[n] - me) * (energy[n] - me);
        scc += (c[n] - mc) * (c[n] - mc);
        sec += (energy[n] - me) * (c[n] - mc);
    }
    out.energy_fit_r2 = (see > 0.0 && scc > 0.0) ? sec * sec / (see * scc) : 0.0;

    double worst = 0.0;
    for (auto [b, e] : ds.boundaries) {
        double m = 0.0, s = 0.0;
        for (std::size_t n = b; n < e; ++n) m += energy[n];
        m /= static_cast<double>(e - b);
        for (std::size_t n = b; n < e; ++n) s += (energy[n] - m) * (energy[n] - m);
        if (m != 0.0) worst = std::max(worst, std::sqrt(s / static_cast<double>(e - b)) / std::abs(m));
    }
    out.analytic_energy_relative_std = worst;

    out.report = out.training.report;
    out.report.set("omega", hs.omega);
    out.report.set("k", hs.k());
    out.report.set("z_factor", analytic::z_factor(hs.k()));
    out.report.set("force_vs_analytic_pct", out.force_vs_analytic_pct);
    out.report.set("law1_vs_discrete_energy_r2", out.energy_fit_r2);
    out.report.set("discrete_energy_relative_std", out.analytic_energy_relative_std);
    return out;
}

}  // namespace mechlaw
