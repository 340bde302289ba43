#pragma once

// Experiment configuration (JSON). Every object is checked against its list of
// allowed keys; anything unrecognized is a validation error.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mechlaw/dataset.hpp"
#include "mechlaw/dynamics.hpp"
#include "mechlaw/errors.hpp"
#include "mechlaw/feature_bank.hpp"
#include "mechlaw/io.hpp"
#include "mechlaw/law_extractor.hpp"
#include "mechlaw/recursion.hpp"

namespace mechlaw {

struct InitialCondition {
    Vector x;
    Vector v;
};

struct ChaosSettings {
    double threshold = 0.1;  // in x units (rad for the pendula)
    double t_end = 50.0;
    // Loose tolerances with free-running steps: the solvers' own truncation
    // errors seed the divergence.
    double rtol = 1e-3;
    double atol = 1e-6;
};

struct ExperimentConfig {
    std::string name = "experiment";
    SystemSpec system;
    std::vector<InitialCondition> initial_conditions;
    double dt = 0.1;
    double t_end = 10.0;
    IntegratorOptions integrator;
    bool wrap_angles = true;
    TrainOptions training;
    RecursionConfig recursion;
    /// Which initial condition seeds the continuation (0-based).
    std::size_t continue_from = 0;
    ChaosSettings chaos;
    std::string output_dir = "out";

    [[nodiscard]] WrapFlags wrap_flags() const {
        return wrap_angles ? WrapFlags::from_dims(system.dim(), system.periodic_dims)
                           : WrapFlags::none(system.dim());
    }

    /// Replaces the feature-bank seed and the projection seed.
    void override_seed(std::uint64_t seed) {
        training.bank.seed = seed;
        recursion.seed = seed;
    }

    void validate() const {
        system.validate();
        detail::require(std::isfinite(dt) && dt > 0.0, "config: dt must be > 0");
        detail::require(std::isfinite(t_end) && t_end >= 3.0 * dt - 1e-12,
                        "config: t_end must be >= 3*dt");
        detail::require(!initial_conditions.empty(), "config: at least one initial condition required");
        for (const auto& ic : initial_conditions) {
            detail::require(ic.x.size() == system.dim() && ic.v.size() == system.dim(),
                            "config: initial condition dimension does not match the system");
            for (std::size_t i = 0; i < ic.x.size(); ++i)
                detail::require(std::isfinite(ic.x[i]) && std::isfinite(ic.v[i]),
                                "config: initial conditions must be finite");
        }
        detail::require(integrator.rtol > 0.0 && integrator.atol >= 0.0, "config: integrator tolerances");
        detail::require(training.bank.n_feat >= 1, "config: n_feat must be >= 1");
        detail::require(training.bank.w03 > 0.0, "config: w03 must be > 0");
        detail::require(training.bank.margin >= 0.0, "config: margin must be >= 0");
        detail::require(training.n_laws >= 1 && training.n_laws <= training.bank.n_feat,
                        "config: n_laws must be in [1, n_feat]");
        detail::require(training.k_sep >= 1, "config: k_sep must be >= 1");
        detail::require(training.cutoff_eps > 0.0 && training.cutoff_eps < 1.0,
                        "config: cutoff_eps must be in (0, 1)");
        recursion.validate();
        detail::require(continue_from < initial_conditions.size(), "config: continue_from out of range");
        detail::require(chaos.threshold > 0.0 && chaos.t_end >= 3.0 * dt, "config: chaos settings");
        detail::require(chaos.rtol > 0.0 && chaos.atol >= 0.0, "config: chaos tolerances");
    }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw InvalidInput("config: '" + where + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, _] : j.items())
        if (!ok.count(k)) throw InvalidInput("config: unknown key '" + where + "." + k + "'");
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput("config: bad value for '" + where + "." + key + "'");
    }
}

}  // namespace detail

[[nodiscard]] inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::read_opt;
    ExperimentConfig c;
    check_keys(j, "root", {"name", "system", "initial_conditions", "dt", "t_end", "integrator",
                           "wrap_angles", "features", "laws", "force", "recursion", "continue_from",
                           "chaos", "output_dir"});
    read_opt(j, "name", c.name, "root");

    if (!j.contains("system")) throw InvalidInput("config: 'system' is required");
    const auto& s = j.at("system");
    check_keys(s, "system", {"kind", "params"});
    std::string kind;
    read_opt(s, "kind", kind, "system");
    c.system.kind = system_kind_from_string(kind);
    std::map<std::string, double> params;
    read_opt(s, "params", params, "system");
    switch (c.system.kind) {
        case SystemKind::harmonic:
            for (const auto& [k, _] : params)
                if (k != "omega") throw InvalidInput("config: unknown key 'system.params." + k + "'");
            c.system = SystemSpec::harmonic(params.count("omega") ? params["omega"] : 1.0);
            break;
        case SystemKind::gravity_pendulum:
            if (!params.empty()) throw InvalidInput("config: gravity_pendulum takes no parameters");
            c.system = SystemSpec::gravity_pendulum();
            break;
        case SystemKind::double_pendulum: {
            for (const auto& [k, _] : params)
                if (k != "l1" && k != "l2" && k != "total_mass" && k != "m2" && k != "g")
                    throw InvalidInput("config: unknown key 'system.params." + k + "'");
            auto get = [&](const char* k, double d) { return params.count(k) ? params[k] : d; };
            c.system = SystemSpec::double_pendulum(get("l1", 1.0), get("l2", 1.0), get("total_mass", 3.0),
                                                   get("m2", 1.0), get("g", 1.0));
            break;
        }
    }

    if (j.contains("initial_conditions")) {
        const auto& ics = j.at("initial_conditions");
        if (!ics.is_array()) throw InvalidInput("config: 'initial_conditions' must be an array");
        for (const auto& ic : ics) {
            check_keys(ic, "initial_conditions[]", {"x", "v"});
            InitialCondition out;
            read_opt(ic, "x", out.x, "initial_conditions[]");
            read_opt(ic, "v", out.v, "initial_conditions[]");
            c.initial_conditions.push_back(std::move(out));
        }
    }
    read_opt(j, "dt", c.dt, "root");
    read_opt(j, "t_end", c.t_end, "root");
    read_opt(j, "wrap_angles", c.wrap_angles, "root");
    read_opt(j, "continue_from", c.continue_from, "root");
    read_opt(j, "output_dir", c.output_dir, "root");

    if (j.contains("integrator")) {
        const auto& g = j.at("integrator");
        check_keys(g, "integrator", {"rtol", "atol", "max_steps"});
        read_opt(g, "rtol", c.integrator.rtol, "integrator");
        read_opt(g, "atol", c.integrator.atol, "integrator");
        read_opt(g, "max_steps", c.integrator.max_steps, "integrator");
    }
    if (j.contains("features")) {
        const auto& f = j.at("features");
        check_keys(f, "features", {"n_feat", "w03", "seed", "margin", "space"});
        read_opt(f, "n_feat", c.training.bank.n_feat, "features");
        read_opt(f, "w03", c.training.bank.w03, "features");
        read_opt(f, "seed", c.training.bank.seed, "features");
        read_opt(f, "margin", c.training.bank.margin, "features");
        std::string space = to_string(c.training.bank.space);
        read_opt(f, "space", space, "features");
        c.training.bank.space = feature_space_from_string(space);
    }
    if (j.contains("laws")) {
        const auto& l = j.at("laws");
        check_keys(l, "laws", {"n_laws", "k_sep"});
        read_opt(l, "n_laws", c.training.n_laws, "laws");
        read_opt(l, "k_sep", c.training.k_sep, "laws");
    }
    if (j.contains("force")) {
        const auto& f = j.at("force");
        check_keys(f, "force", {"cutoff_eps"});
        read_opt(f, "cutoff_eps", c.training.cutoff_eps, "force");
    }
    if (j.contains("recursion")) {
        const auto& r = j.at("recursion");
        check_keys(r, "recursion",
                   {"steps", "tol_mult", "max_projection_iters", "initial_step_fraction", "initial_step",
                    "step_shrink", "step_grow", "parabolic_candidate", "seed", "divergence_bound", "projection",
                    "continue_on_projection_failure"});
        auto& rc = c.recursion;
        read_opt(r, "steps", rc.steps, "recursion");
        read_opt(r, "tol_mult", rc.tol_mult, "recursion");
        read_opt(r, "max_projection_iters", rc.max_projection_iters, "recursion");
        read_opt(r, "initial_step_fraction", rc.initial_step_fraction, "recursion");
        read_opt(r, "initial_step", rc.initial_step, "recursion");
        read_opt(r, "step_shrink", rc.step_shrink, "recursion");
        read_opt(r, "step_grow", rc.step_grow, "recursion");
        read_opt(r, "parabolic_candidate", rc.parabolic_candidate, "recursion");
        read_opt(r, "seed", rc.seed, "recursion");
        read_opt(r, "divergence_bound", rc.divergence_bound, "recursion");
        read_opt(r, "projection", rc.projection, "recursion");
        read_opt(r, "continue_on_projection_failure", rc.continue_on_projection_failure, "recursion");
    }
    if (j.contains("chaos")) {
        const auto& ch = j.at("chaos");
        check_keys(ch, "chaos", {"threshold", "t_end", "rtol", "atol"});
        read_opt(ch, "threshold", c.chaos.threshold, "chaos");
        read_opt(ch, "t_end", c.chaos.t_end, "chaos");
        read_opt(ch, "rtol", c.chaos.rtol, "chaos");
        read_opt(ch, "atol", c.chaos.atol, "chaos");
    }
    c.validate();
    return c;
}

/// Canonical JSON form; its hash identifies the run.
[[nodiscard]] inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    using nlohmann::json;
    json params = json::object();
    if (c.system.kind == SystemKind::harmonic) {
        params["omega"] = c.system.param("omega");
    } else if (c.system.kind == SystemKind::double_pendulum) {
        params = {{"l1", c.system.param("l1")}, {"l2", c.system.param("l2")},
                  {"total_mass", c.system.param("m1") + c.system.param("m2")},
                  {"m2", c.system.param("m2")}, {"g", c.system.param("g")}};
    }
    json ics = json::array();
    for (const auto& ic : c.initial_conditions) ics.push_back({{"x", ic.x}, {"v", ic.v}});
    const auto& r = c.recursion;
    return {
        {"name", c.name},
        {"system", {{"kind", to_string(c.system.kind)}, {"params", params}}},
        {"initial_conditions", ics},
        {"dt", c.dt},
        {"t_end", c.t_end},
        {"integrator", {{"rtol", c.integrator.rtol}, {"atol", c.integrator.atol},
                        {"max_steps", c.integrator.max_steps}}},
        {"wrap_angles", c.wrap_angles},
        {"features", {{"n_feat", c.training.bank.n_feat}, {"w03", c.training.bank.w03},
                      {"seed", c.training.bank.seed}, {"margin", c.training.bank.margin},
                      {"space", to_string(c.training.bank.space)}}},
        {"laws", {{"n_laws", c.training.n_laws}, {"k_sep", c.training.k_sep}}},
        {"force", {{"cutoff_eps", c.training.cutoff_eps}}},
        {"recursion", {{"steps", r.steps}, {"tol_mult", r.tol_mult},
                       {"max_projection_iters", r.max_projection_iters},
                       {"initial_step_fraction", r.initial_step_fraction},
                       {"initial_step", r.initial_step}, {"step_shrink", r.step_shrink},
                       {"step_grow", r.step_grow},
                       {"parabolic_candidate", r.parabolic_candidate},
                       {"seed", r.seed}, {"divergence_bound", r.divergence_bound},
                       {"projection", r.projection},
                       {"continue_on_projection_failure", r.continue_on_projection_failure}}},
        {"continue_from", c.continue_from},
        {"chaos", {{"threshold", c.chaos.threshold}, {"t_end", c.chaos.t_end},
                   {"rtol", c.chaos.rtol}, {"atol", c.chaos.atol}}},
        {"output_dir", c.output_dir},
    };
}

/// Hash of everything that affects results (the output directory is excluded).
[[nodiscard]] inline std::string config_hash(const ExperimentConfig& c) {
    auto j = config_to_json(c);
    j.erase("output_dir");
    return fnv1a_hex(j.dump());
}

[[nodiscard]] inline ExperimentConfig load_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path), nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInput("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

}  // namespace mechlaw
