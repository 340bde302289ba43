#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>

#include "mechlaw/config.hpp"
#include "mechlaw/io.hpp"
#include "mechlaw/pipeline.hpp"
#include "test_support.hpp"

using namespace mechlaw;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("mechlaw_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    [[nodiscard]] std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
}

std::string preset(const std::string& name) { return std::string(MECHLAW_PRESET_DIR) + "/" + name; }

nlohmann::json minimal_config() {
    return nlohmann::json::parse(R"({
        "system": {"kind": "harmonic", "params": {"omega": 1.0}},
        "initial_conditions": [{"x": [0.0], "v": [1.0]}],
        "dt": 0.1, "t_end": 5.0
    })");
}

LawModel small_model() {
    ExperimentConfig cfg = config_from_json(minimal_config());
    cfg.training.bank.n_feat = 20;
    const auto trajs = simulate(cfg, IntegratorMethod::high_order);
    return train_model(cfg, trajs).model;
}

}  // namespace

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        const std::string s = format_double(v);
        EXPECT_EQ(std::stod(s), v) << s;
    }
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(TrajectoryCsv, RoundTripIsExact) {
    TempDir dir;
    Trajectory t;
    t.dt = 0.02;
    t.label = "traj_00";
    t.states = {{0.1, 1.0 / 3.0}, {-2.0, 1e-17}, {3.14159, -0.0}};
    write_trajectory_csv(dir.file("t.csv"), t, "abc");
    const std::string text = slurp(dir.file("t.csv"));
    EXPECT_NE(text.find("config_hash=abc"), std::string::npos);
    EXPECT_NE(text.find("\nt,x1,x2\n"), std::string::npos);
    const Trajectory r = read_trajectory_csv(dir.file("t.csv"));
    EXPECT_EQ(r.states, t.states);
    EXPECT_EQ(r.dt, t.dt);
    EXPECT_EQ(r.label, "traj_00");
}

TEST(TrajectoryCsv, PlainFileInfersDt) {
    TempDir dir;
    spit(dir.file("p.csv"), "t,x1\n0,0.0\n0.5,1.0\n1.0,2.0\n");
    const Trajectory r = read_trajectory_csv(dir.file("p.csv"));
    EXPECT_DOUBLE_EQ(r.dt, 0.5);
    EXPECT_EQ(r.size(), 3u);
}

TEST(TrajectoryCsv, MalformedInputIsAnIoError) {
    TempDir dir;
    spit(dir.file("a.csv"), "time,x1\n0,1\n");
    EXPECT_THROW((void)read_trajectory_csv(dir.file("a.csv")), IoError);
    spit(dir.file("b.csv"), "t,x1\n0,1\n0.1,1,2\n");
    EXPECT_THROW((void)read_trajectory_csv(dir.file("b.csv")), IoError);
    spit(dir.file("c.csv"), "t,x1\n0,abc\n");
    EXPECT_THROW((void)read_trajectory_csv(dir.file("c.csv")), IoError);
    try {
        (void)read_trajectory_csv(dir.file("missing.csv"));
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("missing.csv"), std::string::npos);
    }
}

TEST(DatasetCsv, HeaderAndRows) {
    TempDir dir;
    const std::vector<Trajectory> ts{testing_support::from_values({0.0, 1.0, 4.0, 9.0}, 1.0)};
    const Dataset ds = build_dataset(ts, WrapFlags::none(1));
    write_dataset_csv(dir.file("d.csv"), ds);
    std::istringstream is(slurp(dir.file("d.csv")));
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line.rfind("# mechlaw dataset", 0), 0u);
    std::getline(is, line);
    EXPECT_EQ(line, "traj,n,x1,v1,a1");
    std::getline(is, line);
    EXPECT_EQ(line, "0,1,1,1,2");
}

TEST(ContinuationCsv, SeedRowsAndStatus) {
    TempDir dir;
    ContinuationResult r;
    r.states = {{0.0}, {0.1}, {0.2}};
    r.deviations = {{0.5, 1.5}};
    r.projection_iters = {7};
    r.status = ContinuationStatus::diverged;
    write_continuation_csv(dir.file("c.csv"), r, 0.1, 2);
    std::istringstream is(slurp(dir.file("c.csv")));
    std::vector<std::string> lines;
    for (std::string l; std::getline(is, l);) lines.push_back(l);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[1], "n,t,x1,dev_law1,dev_law2,proj_iters,status");
    EXPECT_EQ(lines[2], "0,0,0,0,0,0,seed");
    EXPECT_EQ(lines[4], "2,0.20000000000000001,0.20000000000000001,0.5,1.5,7,diverged");
}

TEST(ModelFile, RoundTripIsBitExact) {
    TempDir dir;
    LawModel m = small_model();
    m.config_hash = "0123456789abcdef";
    save_model(dir.file("m.json"), m);
    const LawModel r = load_model(dir.file("m.json"));
    EXPECT_EQ(r.bank.centers_x, m.bank.centers_x);
    EXPECT_EQ(r.bank.centers_v, m.bank.centers_v);
    EXPECT_EQ(r.bank.scaler, m.bank.scaler);
    EXPECT_EQ(r.bank.w03, m.bank.w03);
    EXPECT_EQ(r.force.weights, m.force.weights);
    ASSERT_EQ(r.laws.size(), m.laws.size());
    for (std::size_t k = 0; k < m.laws.size(); ++k) {
        EXPECT_EQ(r.laws[k].weights, m.laws[k].weights);
        EXPECT_EQ(r.laws[k].sigma, m.laws[k].sigma);
        EXPECT_EQ(r.laws[k].sigma_worst, m.laws[k].sigma_worst);
    }
    EXPECT_EQ(r.dt, m.dt);
    EXPECT_EQ(r.config_hash, m.config_hash);
    save_model(dir.file("m2.json"), r);
    EXPECT_EQ(slurp(dir.file("m.json")), slurp(dir.file("m2.json")));
    // Predictions agree exactly.
    EXPECT_EQ(evaluate_force(r, Vector{0.3}, Vector{0.2}), evaluate_force(m, Vector{0.3}, Vector{0.2}));
}

TEST(ModelFile, RejectsWrongFormatOrVersion) {
    TempDir dir;
    const LawModel m = small_model();
    auto j = model_to_json(m);
    EXPECT_EQ(j.at("format"), "mechlaw-model");
    j["version"] = 99;
    spit(dir.file("v.json"), j.dump());
    EXPECT_THROW((void)load_model(dir.file("v.json")), Error);
    j = model_to_json(m);
    j["format"] = "something-else";
    spit(dir.file("f.json"), j.dump());
    EXPECT_THROW((void)load_model(dir.file("f.json")), Error);
    spit(dir.file("g.json"), "{not json");
    EXPECT_THROW((void)load_model(dir.file("g.json")), Error);
}

TEST(Config, PresetsLoadAndValidate) {
    const auto g = load_config(preset("gravity_pendulum.json"));
    EXPECT_EQ(g.system.kind, SystemKind::gravity_pendulum);
    EXPECT_EQ(g.initial_conditions.size(), 5u);
    EXPECT_EQ(g.training.bank.n_feat, 100u);
    EXPECT_EQ(g.training.bank.w03, 2.0);
    EXPECT_EQ(g.dt, 0.1);

    const auto d = load_config(preset("double_pendulum.json"));
    EXPECT_EQ(d.system.kind, SystemKind::double_pendulum);
    EXPECT_EQ(d.initial_conditions.size(), 3u);
    EXPECT_EQ(d.training.bank.n_feat, 1000u);
    EXPECT_EQ(d.training.bank.w03, 3.0);
    EXPECT_EQ(d.dt, 0.02);
    EXPECT_EQ(d.recursion.steps, 10000u);
    EXPECT_EQ(d.training.n_laws, 2u);

    const auto h = load_config(preset("harmonic.json"));
    EXPECT_FALSE(h.wrap_angles);
}

TEST(Config, UnknownKeysRejectedAtEveryLevel) {
    auto check = [](const std::function<void(nlohmann::json&)>& mutate, const std::string& key) {
        auto j = minimal_config();
        mutate(j);
        try {
            (void)config_from_json(j);
            FAIL() << "accepted " << key;
        } catch (const InvalidInput& e) {
            EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
        }
    };
    check([](auto& j) { j["bogus"] = 1; }, "bogus");
    check([](auto& j) { j["recursion"] = {{"stepz", 5}}; }, "stepz");
    check([](auto& j) { j["features"] = {{"nfeat", 5}}; }, "nfeat");
    check([](auto& j) { j["system"]["params"]["gamma"] = 1.0; }, "gamma");
    check([](auto& j) { j["initial_conditions"][0]["a"] = {0.0}; }, "a");
    check([](auto& j) { j["chaos"] = {{"tend", 5.0}}; }, "tend");
}

TEST(Config, ValidationErrors) {
    auto bad = [](const std::function<void(nlohmann::json&)>& mutate) {
        auto j = minimal_config();
        mutate(j);
        EXPECT_THROW((void)config_from_json(j), InvalidInput) << j.dump();
    };
    bad([](auto& j) { j["dt"] = -0.1; });
    bad([](auto& j) { j["dt"] = "fast"; });
    bad([](auto& j) { j["initial_conditions"] = nlohmann::json::array(); });
    bad([](auto& j) { j["initial_conditions"][0]["x"] = {0.0, 1.0}; });
    bad([](auto& j) { j["system"]["kind"] = "triple_pendulum"; });
    bad([](auto& j) { j.erase("system"); });
    bad([](auto& j) { j["continue_from"] = 3; });
    bad([](auto& j) { j["recursion"] = {{"step_shrink", 1.5}}; });
    bad([](auto& j) { j["features"] = {{"n_feat", 0}}; });
}

TEST(Config, JsonRoundTripAndHash) {
    const auto c = load_config(preset("double_pendulum.json"));
    const auto back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);

    ExperimentConfig moved = c;
    moved.output_dir = "/elsewhere";
    EXPECT_EQ(config_hash(moved), config_hash(c));

    ExperimentConfig reseeded = c;
    reseeded.override_seed(5);
    EXPECT_NE(config_hash(reseeded), config_hash(c));
    EXPECT_EQ(reseeded.training.bank.seed, 5u);
    EXPECT_EQ(reseeded.recursion.seed, 5u);
}

TEST(Config, CommentsAllowedInFiles) {
    TempDir dir;
    spit(dir.file("c.json"), "// experiment\n" + minimal_config().dump(2));
    EXPECT_NO_THROW((void)load_config(dir.file("c.json")));
    spit(dir.file("bad.json"), "{ \"dt\": ");
    EXPECT_THROW((void)load_config(dir.file("bad.json")), InvalidInput);
}

TEST(Fnv1a, KnownVectors) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
