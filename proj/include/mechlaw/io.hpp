#pragma once

// File formats: trajectory / dataset / continuation CSVs (17 significant
// digits, '#' provenance line first) and the versioned JSON model file.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mechlaw/dataset.hpp"
#include "mechlaw/dynamics.hpp"
#include "mechlaw/errors.hpp"
#include "mechlaw/feature_bank.hpp"
#include "mechlaw/law_extractor.hpp"
#include "mechlaw/recursion.hpp"

namespace mechlaw {

/// I/O failure; carries the offending path in the message.
class IoError : public Error {
public:
    using Error::Error;
};

inline constexpr int model_format_version = 1;

[[nodiscard]] inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// 64-bit FNV-1a, rendered as 16 hex digits.
[[nodiscard]] inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    return os;
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const std::string& path) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("'" + path + "': malformed number '" + s + "'");
    }
}

// Values of "# key=value key=value" provenance lines.
inline std::string provenance_value(const std::string& line, const std::string& key) {
    const std::string needle = key + "=";
    for (const auto& tok : split(line.substr(1), ' '))
        if (tok.rfind(needle, 0) == 0) return tok.substr(needle.size());
    return {};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trajectory CSV: header `t,x1..xN`.

inline void write_trajectory_csv(const std::string& path, const Trajectory& tr,
                                 const std::string& config_hash = {}) {
    auto os = detail::open_out(path);
    os << "# mechlaw trajectory label=" << (tr.label.empty() ? "-" : tr.label)
       << " dt=" << format_double(tr.dt) << " config_hash=" << (config_hash.empty() ? "-" : config_hash)
       << "\n";
    os << "t";
    for (std::size_t i = 0; i < tr.dim(); ++i) os << ",x" << (i + 1);
    os << "\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        os << format_double(static_cast<double>(k) * tr.dt);
        for (double x : tr.states[k]) os << "," << format_double(x);
        os << "\n";
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

[[nodiscard]] inline Trajectory read_trajectory_csv(const std::string& path) {
    std::istringstream is(detail::read_file(path));
    Trajectory tr;
    std::string line;
    std::vector<double> times;
    bool header_seen = false;
    std::size_t dim = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (auto dt = detail::provenance_value(line, "dt"); !dt.empty())
                tr.dt = detail::parse_double(dt, path);
            if (auto lbl = detail::provenance_value(line, "label"); !lbl.empty() && lbl != "-")
                tr.label = lbl;
            continue;
        }
        auto cells = detail::split(line, ',');
        if (!header_seen) {
            if (cells.size() < 2 || cells[0] != "t") throw IoError("'" + path + "': expected header t,x1..xN");
            dim = cells.size() - 1;
            header_seen = true;
            continue;
        }
        if (cells.size() != dim + 1) throw IoError("'" + path + "': ragged row");
        times.push_back(detail::parse_double(cells[0], path));
        Vector x(dim);
        for (std::size_t i = 0; i < dim; ++i) x[i] = detail::parse_double(cells[i + 1], path);
        tr.states.push_back(std::move(x));
    }
    if (!header_seen) throw IoError("'" + path + "': missing header");
    if (tr.dt == 0.0 && times.size() >= 2) tr.dt = times[1] - times[0];
    if (tr.label.empty()) tr.label = path;
    return tr;
}

// ---------------------------------------------------------------------------
// Dataset CSV: header `traj,n,x1..xN,v1..vN,a1..aN`.

inline void write_dataset_csv(const std::string& path, const Dataset& ds,
                              const std::string& config_hash = {}) {
    auto os = detail::open_out(path);
    os << "# mechlaw dataset dt=" << format_double(ds.dt)
       << " config_hash=" << (config_hash.empty() ? "-" : config_hash) << "\n";
    os << "traj,n";
    for (const char* p : {"x", "v", "a"})
        for (std::size_t i = 0; i < ds.dim(); ++i) os << "," << p << (i + 1);
    os << "\n";
    for (const auto& s : ds.samples) {
        os << s.traj_id << "," << s.step;
        for (const Vector* v : {&s.x, &s.v, &s.a})
            for (double c : *v) os << "," << format_double(c);
        os << "\n";
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Continuation CSV: header `n,t,x1..xN,dev_law1..dev_lawk,proj_iters,status`.

inline void write_continuation_csv(const std::string& path, const ContinuationResult& res,
                                   double dt, std::size_t n_laws,
                                   const std::string& config_hash = {}) {
    auto os = detail::open_out(path);
    os << "# mechlaw continuation status=" << to_string(res.status)
       << " config_hash=" << (config_hash.empty() ? "-" : config_hash) << "\n";
    const std::size_t dim = res.states.empty() ? 0 : res.states.front().size();
    os << "n,t";
    for (std::size_t i = 0; i < dim; ++i) os << ",x" << (i + 1);
    for (std::size_t k = 0; k < n_laws; ++k) os << ",dev_law" << (k + 1);
    os << ",proj_iters,status\n";
    for (std::size_t n = 0; n < res.states.size(); ++n) {
        os << n << "," << format_double(static_cast<double>(n) * dt);
        for (double x : res.states[n]) os << "," << format_double(x);
        std::string status = "seed";
        std::size_t iters = 0;
        if (n >= 2) {
            const auto& dev = res.deviations[n - 2];
            for (std::size_t k = 0; k < n_laws; ++k) os << "," << format_double(k < dev.size() ? dev[k] : 0.0);
            iters = res.projection_iters[n - 2];
            status = "ok";
            if (n + 1 == res.states.size() && res.status != ContinuationStatus::completed)
                status = to_string(res.status);
        } else {
            for (std::size_t k = 0; k < n_laws; ++k) os << ",0";
        }
        os << "," << iters << "," << status << "\n";
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Model file (JSON).

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()},
            {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.data().size()) throw IoError("model: matrix payload size mismatch");
    std::copy(data.begin(), data.end(), m.data().begin());
    return m;
}

inline nlohmann::json maps_to_json(const std::vector<AffineMap>& maps) {
    auto arr = nlohmann::json::array();
    for (const auto& m : maps)
        arr.push_back({{"offset", m.offset}, {"gain", m.gain}, {"degenerate", m.degenerate}});
    return arr;
}

inline std::vector<AffineMap> maps_from_json(const nlohmann::json& j) {
    std::vector<AffineMap> out;
    for (const auto& e : j)
        out.push_back({e.at("offset").get<double>(), e.at("gain").get<double>(),
                       e.at("degenerate").get<bool>()});
    return out;
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json model_to_json(const LawModel& m) {
    using nlohmann::json;
    json laws = json::array();
    for (const auto& l : m.laws)
        laws.push_back({{"weights", l.weights},
                        {"eigenvalue", l.eigenvalue},
                        {"sigma", l.sigma},
                        {"sigma_worst", l.sigma_worst},
                        {"mean_per_traj", l.mean_per_traj}});
    std::vector<bool> wrap = m.bank.scaler.wrap.flags;
    return {
        {"format", "mechlaw-model"},
        {"version", model_format_version},
        {"dt", m.dt},
        {"seed", m.seed},
        {"config_hash", m.config_hash},
        {"bank",
         {{"seed", m.bank.seed},
          {"w03", m.bank.w03},
          {"margin", m.bank.margin},
          {"space", to_string(m.bank.space)},
          {"centers_x", detail::matrix_to_json(m.bank.centers_x)},
          {"centers_v", detail::matrix_to_json(m.bank.centers_v)},
          {"scaler",
           {{"x", detail::maps_to_json(m.bank.scaler.x_maps)},
            {"v", detail::maps_to_json(m.bank.scaler.v_maps)},
            {"wrap", wrap}}}}},
        {"laws", laws},
        {"force",
         {{"weights", detail::matrix_to_json(m.force.weights)},
          {"cutoff_eps", m.force.cutoff_eps},
          {"spectrum_kept", m.force.spectrum_kept},
          {"training_residual", m.force.training_residual}}},
    };
}

[[nodiscard]] inline LawModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "mechlaw-model") throw IoError("model: wrong format tag");
        const int version = j.at("version").get<int>();
        if (version != model_format_version)
            throw IoError("model: unsupported version " + std::to_string(version));
        LawModel m;
        m.dt = j.at("dt").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_hash = j.at("config_hash").get<std::string>();
        const auto& b = j.at("bank");
        m.bank.seed = b.at("seed").get<std::uint64_t>();
        m.bank.w03 = b.at("w03").get<double>();
        m.bank.margin = b.at("margin").get<double>();
        m.bank.space = feature_space_from_string(b.at("space").get<std::string>());
        m.bank.centers_x = detail::matrix_from_json(b.at("centers_x"));
        m.bank.centers_v = detail::matrix_from_json(b.at("centers_v"));
        const auto& sc = b.at("scaler");
        m.bank.scaler.x_maps = detail::maps_from_json(sc.at("x"));
        m.bank.scaler.v_maps = detail::maps_from_json(sc.at("v"));
        m.bank.scaler.wrap.flags = sc.at("wrap").get<std::vector<bool>>();
        for (const auto& l : j.at("laws")) {
            ConservedLaw law;
            law.weights = l.at("weights").get<Vector>();
            law.eigenvalue = l.at("eigenvalue").get<double>();
            law.sigma = l.at("sigma").get<double>();
            law.sigma_worst = l.at("sigma_worst").get<double>();
            law.mean_per_traj = l.at("mean_per_traj").get<Vector>();
            m.laws.push_back(std::move(law));
        }
        const auto& f = j.at("force");
        m.force.weights = detail::matrix_from_json(f.at("weights"));
        m.force.cutoff_eps = f.at("cutoff_eps").get<double>();
        m.force.spectrum_kept = f.at("spectrum_kept").get<std::size_t>();
        m.force.training_residual = f.at("training_residual").get<Vector>();

        const std::size_t nf = m.bank.centers_x.rows();
        const std::size_t dim = m.bank.centers_x.cols();
        bool ok = m.bank.centers_v.rows() == nf && m.bank.centers_v.cols() == dim &&
                  m.bank.scaler.x_maps.size() == dim && m.bank.scaler.v_maps.size() == dim &&
                  m.bank.scaler.wrap.size() == dim && m.force.weights.rows() == nf &&
                  m.force.weights.cols() == dim && m.dt > 0.0;
        for (const auto& l : m.laws) ok = ok && l.weights.size() == nf;
        if (!ok) throw IoError("model: inconsistent dimensions");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("model: malformed file: ") + e.what());
    }
}

inline void save_model(const std::string& path, const LawModel& m) {
    auto os = detail::open_out(path);
    os << model_to_json(m).dump(1) << "\n";
    if (!os) throw IoError("write failed for '" + path + "'");
}

[[nodiscard]] inline LawModel load_model(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("'" + path + "': " + e.what());
    }
    return model_from_json(j);
}

}  // namespace mechlaw
