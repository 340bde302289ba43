// mechlaw: learn conserved quantities and the discrete force of sampled
// mechanical motions, then continue the motion from two seed points.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mechlaw/config.hpp"
#include "mechlaw/io.hpp"
#include "mechlaw/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mechlaw;

namespace {

enum ExitCode : int {
    exit_ok = 0,
    exit_error = 1,
    exit_validation = 2,
    exit_degenerate = 3,
    exit_projection_failed = 4,
    exit_diverged = 5,
};

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool no_projection = false;
    std::vector<std::string> inputs;
    std::string model_path;
    std::string reference_path;
    std::optional<std::size_t> steps;
};

ExperimentConfig load(const Options& o) {
    if (o.config_path.empty()) throw InvalidInput("--config is required");
    ExperimentConfig cfg = load_config(o.config_path);
    if (o.seed) cfg.override_seed(*o.seed);
    if (o.no_projection) cfg.recursion.projection = false;
    if (o.steps) cfg.recursion.steps = *o.steps;
    cfg.validate();
    return cfg;
}

fs::path out_dir(const Options& o, const ExperimentConfig& cfg) {
    fs::path dir = o.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(o.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    return dir;
}

void write_report(const fs::path& path, const Report& r) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << "# mechlaw report\n" << r.to_text();
}

int cmd_simulate(const Options& o) {
    const auto cfg = load(o);
    const auto dir = out_dir(o, cfg);
    const std::string hash = config_hash(cfg);
    for (const auto& tr : simulate(cfg)) {
        const auto path = dir / (tr.label + ".csv");
        write_trajectory_csv(path.string(), tr, hash);
        std::cout << path.string() << "\n";
    }
    return exit_ok;
}

int cmd_train(const Options& o) {
    const auto cfg = load(o);
    if (o.inputs.empty()) throw InvalidInput("train: at least one trajectory file is required");
    std::vector<Trajectory> trajs;
    for (const auto& p : o.inputs) {
        trajs.push_back(read_trajectory_csv(p));
        trajs.back().label = p;
    }
    const auto dir = out_dir(o, cfg);
    const auto res = train_model(cfg, trajs);
    save_model((dir / "model.json").string(), res.model);
    write_dataset_csv((dir / "dataset.csv").string(), res.dataset, res.model.config_hash);
    write_report(dir / "train_report.txt", res.report);
    std::cout << res.report.to_text();
    return exit_ok;
}

int cmd_continue(const Options& o) {
    const auto cfg = load(o);
    if (o.model_path.empty()) throw InvalidInput("continue: --model is required");
    const LawModel model = load_model(o.model_path);
    detail::require(model.dim() == cfg.system.dim(), "continue: model dimension does not match the config");
    Trajectory reference;
    if (!o.reference_path.empty()) {
        reference = read_trajectory_csv(o.reference_path);
    } else {
        const auto& ic = cfg.initial_conditions[cfg.continue_from];
        reference = integrate(cfg.system, ic.x, ic.v, cfg.t_end, cfg.dt, IntegratorMethod::high_order,
                              cfg.integrator, trajectory_label(cfg.continue_from));
    }
    const auto dir = out_dir(o, cfg);
    const auto res = run_continuation(model, reference, cfg.recursion);
    write_continuation_csv((dir / "continuation.csv").string(), res.result, model.dt, model.laws.size(),
                           model.config_hash);
    write_report(dir / "continue_report.txt", res.report);
    std::cout << res.report.to_text();
    switch (res.result.status) {
        case ContinuationStatus::completed: return exit_ok;
        case ContinuationStatus::diverged: return exit_diverged;
        case ContinuationStatus::projection_failed: return exit_projection_failed;
    }
    return exit_error;
}

int cmd_chaos(const Options& o) {
    const auto cfg = load(o);
    const auto dir = out_dir(o, cfg);
    const auto res = run_chaos(cfg);
    const std::string hash = config_hash(cfg);
    write_trajectory_csv((dir / "chaos_high_order.csv").string(), res.high, hash);
    write_trajectory_csv((dir / "chaos_medium_order.csv").string(), res.medium, hash);

    std::ofstream os(dir / "chaos_comparison.csv", std::ios::binary);
    if (!os) throw IoError("cannot write chaos_comparison.csv");
    os << "# mechlaw chaos comparison config_hash=" << hash << "\n" << "t";
    const std::size_t n = res.high.dim();
    for (const char* p : {"hi_x", "med_x"})
        for (std::size_t i = 0; i < n; ++i) os << "," << p << (i + 1);
    os << ",max_abs_diff\n";
    for (std::size_t k = 0; k < std::min(res.high.size(), res.medium.size()); ++k) {
        os << format_double(static_cast<double>(k) * cfg.dt);
        double worst = 0.0;
        for (double x : res.high.states[k]) os << "," << format_double(x);
        for (std::size_t i = 0; i < n; ++i) {
            os << "," << format_double(res.medium.states[k][i]);
            worst = std::max(worst, std::abs(res.high.states[k][i] - res.medium.states[k][i]));
        }
        os << "," << format_double(worst) << "\n";
    }
    write_report(dir / "chaos_report.txt", res.report);
    std::cout << res.report.to_text();
    return exit_ok;
}

int cmd_oscillator(const Options& o) {
    ExperimentConfig cfg;
    if (!o.config_path.empty()) {
        cfg = load(o);
    } else {
        cfg.name = "harmonic";
        cfg.system = SystemSpec::harmonic(1.0);
        cfg.dt = 0.1;
        cfg.t_end = 20.0;
        cfg.initial_conditions = {{{0.0}, {0.5}}, {{0.0}, {1.0}}, {{0.0}, {1.5}}, {{0.0}, {2.0}}};
        cfg.training.bank.n_feat = 100;
        cfg.training.bank.w03 = 2.0;
        if (o.seed) cfg.override_seed(*o.seed);
        cfg.validate();
    }
    const auto dir = out_dir(o, cfg);
    const auto res = run_oscillator_demo(cfg);
    save_model((dir / "model.json").string(), res.training.model);
    write_report(dir / "oscillator_report.txt", res.report);
    std::cout << res.report.to_text();
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learn conserved quantities and discrete forces from sampled motions"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub, bool config_required = true) {
        auto* c = sub->add_option("--config", o.config_path, "experiment config (JSON)");
        if (config_required) c->required();
        sub->add_option("--out", o.out_dir, "output directory (default: config output_dir)");
        sub->add_option("--seed", o.seed, "override the feature and projection seeds");
    };

    auto* sim = app.add_subcommand("simulate", "integrate every initial condition to a trajectory CSV");
    common(sim);
    auto* tr = app.add_subcommand("train", "fit conserved laws and the discrete force");
    common(tr);
    tr->add_option("trajectories", o.inputs, "trajectory CSV files");
    auto* cont = app.add_subcommand("continue", "continue a motion with the trained model");
    common(cont);
    cont->add_option("--model", o.model_path, "model file")->required();
    cont->add_option("--reference", o.reference_path,
                     "trajectory CSV giving the seeds and the ground truth (default: simulate continue_from)");
    cont->add_option("--steps", o.steps, "number of recursion steps");
    cont->add_flag("--no-projection", o.no_projection, "disable the conservation projection");
    auto* chaos = app.add_subcommand("chaos-demo", "compare two integrators on the same initial condition");
    common(chaos);
    auto* osc = app.add_subcommand("demo-oscillator", "train on the linear oscillator and compare with exact results");
    common(osc, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_validation;
    }

    try {
        if (*sim) return cmd_simulate(o);
        if (*tr) return cmd_train(o);
        if (*cont) return cmd_continue(o);
        if (*chaos) return cmd_chaos(o);
        if (*osc) return cmd_oscillator(o);
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_validation;
    } catch (const DegenerateModel& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_degenerate;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_diverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}
