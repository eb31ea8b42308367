#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cemreg/bench.hpp"
#include "cemreg/cem.hpp"
#include "cemreg/point_cloud.hpp"

namespace cemreg {

inline constexpr const char* kToolName = "cemreg";
inline constexpr const char* kToolVersion = "0.1.0";

using json = nlohmann::json;

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : std::runtime_error("parse error: " + path + ":" + std::to_string(line) + ": " + what) {}
};

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CloudFormat { kPlyAscii, kXyz };

inline CloudFormat detect_format(const std::string& path) {
    const auto dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    for (auto& c : ext) c = static_cast<char>(std::tolower(c));
    return ext == "ply" ? CloudFormat::kPlyAscii : CloudFormat::kXyz;
}

namespace detail {

inline bool parse_double(const std::string& token, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(token, &used);
        return used == token.size();
    } catch (...) {
        return false;
    }
}

inline PointCloud load_xyz(std::istream& in, const std::string& path) {
    PointCloud cloud;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        if (tokens.empty()) continue;
        if (tokens.size() != 3)
            throw ParseError(path, lineno, "expected 3 coordinates, got " + std::to_string(tokens.size()));
        Eigen::Vector3d p;
        for (int d = 0; d < 3; ++d)
            if (!parse_double(tokens[static_cast<std::size_t>(d)], p[d]))
                throw ParseError(path, lineno, "non-numeric token '" + tokens[static_cast<std::size_t>(d)] + "'");
        cloud.points.push_back(p);
    }
    if (cloud.points.empty()) throw ParseError(path, lineno, "no points in file");
    return cloud;
}

// ASCII PLY subset: element vertex with float x, y, z; extra per-vertex
// properties and non-vertex elements are skipped.
inline PointCloud load_ply_ascii(std::istream& in, const std::string& path) {
    std::string line;
    std::size_t lineno = 0;

    auto next_line = [&](const char* context) {
        if (!std::getline(in, line)) throw ParseError(path, lineno, std::string("unexpected end of file in ") + context);
        ++lineno;
        return line;
    };

    if (next_line("header") != "ply") throw ParseError(path, lineno, "missing 'ply' magic");

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> properties;  // per-vertex scalar property names, in order
    };
    std::vector<Element> elements;
    bool format_ok = false;
    while (true) {
        std::istringstream ls(next_line("header"));
        std::string keyword;
        ls >> keyword;
        if (keyword == "comment" || keyword.empty()) continue;
        if (keyword == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt != "ascii") throw ParseError(path, lineno, "only ascii PLY is supported");
            format_ok = true;
        } else if (keyword == "element") {
            Element el;
            if (!(ls >> el.name >> el.count)) throw ParseError(path, lineno, "malformed element line");
            elements.push_back(el);
        } else if (keyword == "property") {
            if (elements.empty()) throw ParseError(path, lineno, "property before any element");
            std::string type, name;
            ls >> type;
            if (type == "list") {
                // variable-length property; whole data lines are skipped anyway
                elements.back().properties.push_back("list");
            } else {
                if (!(ls >> name)) throw ParseError(path, lineno, "malformed property line");
                elements.back().properties.push_back(name);
            }
        } else if (keyword == "end_header") {
            break;
        } else {
            throw ParseError(path, lineno, "unknown header keyword '" + keyword + "'");
        }
    }
    if (!format_ok) throw ParseError(path, lineno, "missing format line");

    PointCloud cloud;
    bool found_vertex = false;
    for (const auto& el : elements) {
        if (el.name != "vertex") {
            for (std::size_t i = 0; i < el.count; ++i) next_line(el.name.c_str());
            continue;
        }
        found_vertex = true;
        if (el.count == 0) throw ParseError(path, lineno, "zero vertices");
        int ix = -1, iy = -1, iz = -1;
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
            if (el.properties[p] == "x") ix = static_cast<int>(p);
            if (el.properties[p] == "y") iy = static_cast<int>(p);
            if (el.properties[p] == "z") iz = static_cast<int>(p);
        }
        if (ix < 0 || iy < 0 || iz < 0)
            throw ParseError(path, lineno, "vertex element lacks x, y, z properties");
        for (std::size_t i = 0; i < el.count; ++i) {
            std::istringstream ls(next_line("vertex data"));
            std::vector<std::string> tokens;
            std::string tok;
            while (ls >> tok) tokens.push_back(tok);
            if (tokens.size() < el.properties.size())
                throw ParseError(path, lineno, "vertex line has too few values");
            Eigen::Vector3d p;
            const int idx[3] = {ix, iy, iz};
            for (int d = 0; d < 3; ++d)
                if (!parse_double(tokens[static_cast<std::size_t>(idx[d])], p[d]))
                    throw ParseError(path, lineno, "non-numeric vertex coordinate");
            cloud.points.push_back(p);
        }
    }
    if (!found_vertex) throw ParseError(path, lineno, "no vertex element");
    return cloud;
}

}  // namespace detail

inline PointCloud load_cloud(const std::string& path, CloudFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return format == CloudFormat::kPlyAscii ? detail::load_ply_ascii(in, path)
                                            : detail::load_xyz(in, path);
}

inline PointCloud load_cloud(const std::string& path) { return load_cloud(path, detect_format(path)); }

inline void save_cloud_xyz(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.precision(17);
    for (const auto& p : cloud.points) out << p.x() << " " << p.y() << " " << p.z() << "\n";
}

struct RunConfig {
    CemConfig cem;
    std::string prior = "fixed";  // "fixed" or "correspondence"
    Vector6d prior_mu0 = Vector6d::Zero();
    Vector6d prior_sigma0 = (Vector6d() << 1, 1, 1, 0.5, 0.5, 0.5).finished();
    double prior_logit_scale = 1000.0;
    double prior_sigma_scale_rotation = 0.5;
    double prior_sigma_scale_translation = 0.5;
    bool normalize = false;
    bool final_icp = false;
    double loss_mu = 0.01;

    void validate() const {
        cem.validate();
        if (prior != "fixed" && prior != "correspondence")
            throw ConfigError("config: prior must be 'fixed' or 'correspondence'");
        if (prior_sigma0.minCoeff() < 0.0) throw ConfigError("config: prior_sigma0 must be nonnegative");
        if (!(prior_logit_scale > 0.0)) throw ConfigError("config: prior_logit_scale must be positive");
        if (!(loss_mu > 0.0)) throw ConfigError("config: loss_mu must be positive");
    }
};

namespace detail {

template <typename T>
T get_typed(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: type mismatch at /" + key);
    }
}

inline Vector6d get_vector6(const json& j, const std::string& key) {
    const auto v = get_typed<std::vector<double>>(j, key);
    if (v.size() != 6) throw ConfigError("config: /" + key + " must have 6 entries");
    Vector6d out;
    for (int i = 0; i < 6; ++i) out[i] = v[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace detail

inline RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config: root must be a JSON object");
    static const std::vector<std::string> known = {
        "iterations", "population", "future_iterations", "alpha", "epsilon", "elite_count",
        "update_mode", "score_scale", "sigma_floor", "rng_seed", "icp_max_iterations",
        "icp_mse_tolerance", "prior", "prior_mu0", "prior_sigma0", "prior_logit_scale",
        "prior_sigma_scale_rotation", "prior_sigma_scale_translation", "normalize", "final_icp",
        "loss_mu"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("config: unknown key '" + key + "'");
    }

    RunConfig cfg;
    using detail::get_typed;
    if (j.contains("iterations")) cfg.cem.iterations = get_typed<int>(j, "iterations");
    if (j.contains("population")) cfg.cem.population = get_typed<int>(j, "population");
    if (j.contains("future_iterations"))
        cfg.cem.future_iterations = get_typed<int>(j, "future_iterations");
    if (j.contains("alpha")) cfg.cem.alpha = get_typed<double>(j, "alpha");
    if (j.contains("epsilon")) cfg.cem.epsilon = get_typed<double>(j, "epsilon");
    if (j.contains("elite_count")) cfg.cem.elite_count = get_typed<int>(j, "elite_count");
    if (j.contains("update_mode")) {
        const auto mode = get_typed<std::string>(j, "update_mode");
        if (mode == "sparsemax")
            cfg.cem.update_mode = UpdateMode::kSparsemax;
        else if (mode == "hard_topk")
            cfg.cem.update_mode = UpdateMode::kHardTopK;
        else
            throw ConfigError("config: update_mode must be 'sparsemax' or 'hard_topk'");
    }
    if (j.contains("score_scale")) cfg.cem.score_scale = get_typed<double>(j, "score_scale");
    if (j.contains("sigma_floor")) cfg.cem.sigma_floor = get_typed<double>(j, "sigma_floor");
    if (j.contains("rng_seed")) cfg.cem.rng_seed = get_typed<std::uint64_t>(j, "rng_seed");
    if (j.contains("icp_max_iterations"))
        cfg.cem.icp.max_iterations = get_typed<int>(j, "icp_max_iterations");
    if (j.contains("icp_mse_tolerance"))
        cfg.cem.icp.mse_tolerance = get_typed<double>(j, "icp_mse_tolerance");
    if (j.contains("prior")) cfg.prior = get_typed<std::string>(j, "prior");
    if (j.contains("prior_mu0")) cfg.prior_mu0 = detail::get_vector6(j, "prior_mu0");
    if (j.contains("prior_sigma0")) cfg.prior_sigma0 = detail::get_vector6(j, "prior_sigma0");
    if (j.contains("prior_logit_scale"))
        cfg.prior_logit_scale = get_typed<double>(j, "prior_logit_scale");
    if (j.contains("prior_sigma_scale_rotation"))
        cfg.prior_sigma_scale_rotation = get_typed<double>(j, "prior_sigma_scale_rotation");
    if (j.contains("prior_sigma_scale_translation"))
        cfg.prior_sigma_scale_translation = get_typed<double>(j, "prior_sigma_scale_translation");
    if (j.contains("normalize")) cfg.normalize = get_typed<bool>(j, "normalize");
    if (j.contains("final_icp")) cfg.final_icp = get_typed<bool>(j, "final_icp");
    if (j.contains("loss_mu")) cfg.loss_mu = get_typed<double>(j, "loss_mu");

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline json config_to_json(const RunConfig& cfg) {
    json j;
    j["iterations"] = cfg.cem.iterations;
    j["population"] = cfg.cem.population;
    j["future_iterations"] = cfg.cem.future_iterations;
    j["alpha"] = cfg.cem.alpha;
    j["epsilon"] = cfg.cem.epsilon;
    j["elite_count"] = cfg.cem.elite_count;
    j["update_mode"] = cfg.cem.update_mode == UpdateMode::kSparsemax ? "sparsemax" : "hard_topk";
    j["score_scale"] = cfg.cem.score_scale;
    j["sigma_floor"] = cfg.cem.sigma_floor;
    j["rng_seed"] = cfg.cem.rng_seed;
    j["icp_max_iterations"] = cfg.cem.icp.max_iterations;
    j["icp_mse_tolerance"] = cfg.cem.icp.mse_tolerance;
    j["prior"] = cfg.prior;
    j["prior_mu0"] = std::vector<double>(cfg.prior_mu0.data(), cfg.prior_mu0.data() + 6);
    j["prior_sigma0"] = std::vector<double>(cfg.prior_sigma0.data(), cfg.prior_sigma0.data() + 6);
    j["prior_logit_scale"] = cfg.prior_logit_scale;
    j["prior_sigma_scale_rotation"] = cfg.prior_sigma_scale_rotation;
    j["prior_sigma_scale_translation"] = cfg.prior_sigma_scale_translation;
    j["normalize"] = cfg.normalize;
    j["final_icp"] = cfg.final_icp;
    j["loss_mu"] = cfg.loss_mu;
    return j;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

namespace detail {

inline json motion_to_json(const RigidMotion& m) {
    constexpr double rad2deg = 180.0 / std::numbers::pi;
    json j;
    j["euler_rad"] = std::vector<double>{m.euler.e.x(), m.euler.e.y(), m.euler.e.z()};
    j["euler_deg"] = std::vector<double>{m.euler.e.x() * rad2deg, m.euler.e.y() * rad2deg,
                                         m.euler.e.z() * rad2deg};
    j["translation"] = std::vector<double>{m.translation.x(), m.translation.y(), m.translation.z()};
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot[static_cast<std::size_t>(3 * r + c)] = m.rotation(r, c);
    j["rotation_matrix_row_major"] = rot;
    return j;
}

inline RigidMotion motion_from_json(const json& j) {
    const auto e = j.at("euler_rad").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    return RigidMotion(EulerAngles(e.at(0), e.at(1), e.at(2)),
                       Eigen::Vector3d(t.at(0), t.at(1), t.at(2)));
}

inline json trace_to_json(const CemTrace& trace) {
    json j;
    j["score_scale"] = trace.score_scale;
    json iters = json::array();
    for (const auto& it : trace.iterations) {
        json rec;
        rec["best_score"] = it.best_score;
        rec["mean_score"] = it.mean_score;
        rec["support_size"] = it.support_size;
        rec["mu"] = std::vector<double>(it.mu.data(), it.mu.data() + 6);
        rec["sigma"] = std::vector<double>(it.sigma.data(), it.sigma.data() + 6);
        iters.push_back(rec);
    }
    j["iterations"] = iters;
    return j;
}

}  // namespace detail

struct RegistrationReport {
    RunConfig config;
    RigidMotion predicted;
    double final_d_mc = 0.0;
    double final_chamfer = 0.0;
    double robust_loss = 0.0;
    CemTrace trace;
    bool prior_fallback = false;
    double total_sec = 0.0;
};

inline json report_to_json(const RegistrationReport& r) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["config"] = config_to_json(r.config);
    j["seeds"] = {{"rng_seed", r.config.cem.rng_seed}};
    j["predicted"] = detail::motion_to_json(r.predicted);
    j["metrics"] = {{"d_mc", r.final_d_mc},
                    {"chamfer", r.final_chamfer},
                    {"robust_loss", r.robust_loss},
                    {"robust_loss_mu", r.config.loss_mu}};
    j["trace"] = detail::trace_to_json(r.trace);
    j["prior_fallback"] = r.prior_fallback;
    j["timing"] = {{"total_sec", r.total_sec}};
    return j;
}

inline json bench_report_to_json(const BenchReport& report, const RunConfig& cfg, int cases,
                                 std::uint64_t seed, const CaseSpec& base_spec) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["config"] = config_to_json(cfg);
    j["bench"] = {{"cases", cases},
                  {"seed", seed},
                  {"num_points", base_spec.num_points},
                  {"rotation_range_deg", {base_spec.rotation_lo_deg, base_spec.rotation_hi_deg}},
                  {"translation_range", {base_spec.translation_lo, base_spec.translation_hi}},
                  {"keep_fraction", base_spec.keep_fraction},
                  {"noise_sigma", base_spec.noise_sigma},
                  {"noise_clip", base_spec.noise_clip}};
    json case_list = json::array();
    for (const auto& c : report.cases) {
        json cj;
        cj["index"] = c.index;
        cj["seed"] = c.seed;
        cj["failed"] = c.failed;
        if (c.failed) {
            cj["message"] = c.message;
        } else {
            cj["truth"] = detail::motion_to_json(c.truth);
            cj["predicted"] = detail::motion_to_json(c.predicted);
            cj["error"] = {{"rmse_rotation_deg", c.error.rmse_rotation_deg},
                           {"mae_rotation_deg", c.error.mae_rotation_deg},
                           {"rmse_translation", c.error.rmse_translation},
                           {"mae_translation", c.error.mae_translation}};
            cj["d_mc"] = c.final_d_mc;
            cj["prior_fallback"] = c.prior_fallback;
        }
        cj["runtime_sec"] = c.runtime_sec;
        case_list.push_back(cj);
    }
    j["cases"] = case_list;
    const auto& a = report.aggregate;
    j["aggregate"] = {{"rmse_rotation_deg_pooled", a.rmse_rotation_deg_pooled},
                      {"rmse_rotation_deg_per_case", a.rmse_rotation_deg_per_case},
                      {"mae_rotation_deg", a.mae_rotation_deg},
                      {"rmse_translation_pooled", a.rmse_translation_pooled},
                      {"rmse_translation_per_case", a.rmse_translation_per_case},
                      {"mae_translation", a.mae_translation},
                      {"median_rotation_mae_deg", a.median_rotation_mae_deg},
                      {"median_translation_mae", a.median_translation_mae}};
    j["failed_cases"] = report.failed_cases;
    return j;
}

inline void save_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace cemreg
