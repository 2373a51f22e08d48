#include "psm/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace psm {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

// pulls a field if present, enforcing the JSON type loosely via get<>
template <typename T>
void read_field(const json& j, const char* key, T& into) {
    if (!j.contains(key)) return;
    try {
        into = j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(std::string("config field '") + key + "' has the wrong type");
    }
}

void read_vec3(const json& j, const char* key, Vec3& into) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != 3) {
        fail(std::string("config field '") + key + "' must be an array of 3 numbers");
    }
    for (int i = 0; i < 3; ++i) {
        if (!arr[i].is_number()) {
            fail(std::string("config field '") + key + "' must be numeric");
        }
        into[i] = arr[i].get<double>();
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& scope) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) fail("unknown config key '" + scope + key + "'");
    }
}

FilterMode parse_mode(const std::string& s) {
    if (s == "zero_phase") return FilterMode::ZeroPhase;
    if (s == "causal") return FilterMode::Causal;
    fail("filter mode must be 'zero_phase' or 'causal', got '" + s + "'");
}

ClassifyMode parse_classify(const std::string& s) {
    if (s == "instantaneous") return ClassifyMode::Instantaneous;
    if (s == "windowed") return ClassifyMode::Windowed;
    fail("classify mode must be 'instantaneous' or 'windowed', got '" + s + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail("config root must be a JSON object");

    RunConfig cfg;
    PipelineConfig& p = cfg.pipeline;
    reject_unknown(j,
                   {"rate", "filter", "kalman", "gravity", "model", "search", "weights",
                    "thresholds", "window", "band", "classify_mode", "grid", "stream"},
                   "");

    read_field(j, "rate", p.rate);
    read_field(j, "gravity", p.gravity);

    if (j.contains("filter")) {
        const auto& f = j.at("filter");
        reject_unknown(f, {"cutoff_hz", "order", "kaiser_beta", "mode", "accel", "gyro"},
                       "filter.");
        read_field(f, "cutoff_hz", p.fir.cutoff);
        read_field(f, "order", p.fir.order);
        read_field(f, "kaiser_beta", p.fir.kaiser_beta);
        if (f.contains("mode")) p.filter_mode = parse_mode(f.at("mode").get<std::string>());
        read_field(f, "accel", p.filter_accel);
        read_field(f, "gyro", p.filter_gyro);
    }
    if (j.contains("kalman")) {
        const auto& k = j.at("kalman");
        reject_unknown(k, {"q_angle", "q_bias", "r_measure"}, "kalman.");
        read_field(k, "q_angle", p.kalman.q_angle);
        read_field(k, "q_bias", p.kalman.q_bias);
        read_field(k, "r_measure", p.kalman.r_measure);
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown(m,
                       {"mass", "length", "base_radius", "stiffness", "damping", "gravity",
                        "gravity_axis"},
                       "model.");
        read_field(m, "mass", p.model.mass);
        read_field(m, "length", p.model.length);
        read_field(m, "base_radius", p.model.base_radius);
        read_vec3(m, "stiffness", p.model.stiffness);
        read_vec3(m, "damping", p.model.damping);
        read_field(m, "gravity", p.model.gravity);
        read_field(m, "gravity_axis", p.model.gravity_axis);
    }
    if (j.contains("search")) {
        const auto& s = j.at("search");
        reject_unknown(s, {"radius_theta", "radius_omega"}, "search.");
        read_field(s, "radius_theta", p.radius_theta);
        read_field(s, "radius_omega", p.radius_omega);
    }
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        reject_unknown(w, {"position", "velocity"}, "weights.");
        read_field(w, "position", p.weights.position_weight);
        read_field(w, "velocity", p.weights.velocity_weight);
    }
    if (j.contains("thresholds")) {
        const auto& t = j.at("thresholds");
        reject_unknown(t,
                       {"safe_level", "caution_peak", "warning_level", "hazard_level",
                        "normalized_safe_fraction"},
                       "thresholds.");
        read_field(t, "safe_level", p.thresholds.safe_level);
        read_field(t, "caution_peak", p.thresholds.caution_peak);
        read_field(t, "warning_level", p.thresholds.warning_level);
        read_field(t, "hazard_level", p.thresholds.hazard_level);
        read_field(t, "normalized_safe_fraction", p.thresholds.normalized_safe_fraction);
    }
    if (j.contains("window")) {
        const auto& w = j.at("window");
        reject_unknown(w, {"seconds", "hop_seconds"}, "window.");
        read_field(w, "seconds", p.window_seconds);
        read_field(w, "hop_seconds", p.hop_seconds);
    }
    if (j.contains("band")) {
        const auto& b = j.at("band");
        reject_unknown(b, {"low_hz", "high_hz"}, "band.");
        read_field(b, "low_hz", p.band.low);
        read_field(b, "high_hz", p.band.high);
    }
    if (j.contains("classify_mode")) {
        p.classify_mode = parse_classify(j.at("classify_mode").get<std::string>());
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        reject_unknown(g,
                       {"theta_min", "theta_max", "omega_min", "omega_max", "n_theta",
                        "n_omega", "smoothing_sigma"},
                       "grid.");
        read_field(g, "theta_min", cfg.grid.theta_min);
        read_field(g, "theta_max", cfg.grid.theta_max);
        read_field(g, "omega_min", cfg.grid.omega_min);
        read_field(g, "omega_max", cfg.grid.omega_max);
        read_field(g, "n_theta", cfg.grid.n_theta);
        read_field(g, "n_omega", cfg.grid.n_omega);
        read_field(g, "smoothing_sigma", cfg.grid.smoothing_sigma);
    }
    if (j.contains("stream")) {
        const auto& s = j.at("stream");
        reject_unknown(s, {"queue_capacity", "stats_interval"}, "stream.");
        read_field(s, "queue_capacity", cfg.queue_capacity);
        read_field(s, "stats_interval", cfg.stats_interval);
    }

    validate(cfg);
    return cfg;
}

void validate(const RunConfig& cfg) {
    try {
        validate(cfg.pipeline);
        validate(cfg.grid);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (cfg.queue_capacity == 0) {
        throw ConfigError("stream queue capacity must be at least 1");
    }
    if (!(cfg.stats_interval > 0.0)) {
        throw ConfigError("stats interval must be positive");
    }
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& cfg) {
    const PipelineConfig& p = cfg.pipeline;
    ordered_json j;
    j["rate"] = p.rate;
    j["filter"] = {{"cutoff_hz", p.fir.cutoff},
                   {"order", p.fir.order},
                   {"kaiser_beta", p.fir.kaiser_beta},
                   {"mode", p.filter_mode == FilterMode::ZeroPhase ? "zero_phase" : "causal"},
                   {"accel", p.filter_accel},
                   {"gyro", p.filter_gyro}};
    j["kalman"] = {{"q_angle", p.kalman.q_angle},
                   {"q_bias", p.kalman.q_bias},
                   {"r_measure", p.kalman.r_measure}};
    j["gravity"] = p.gravity;
    j["model"] = {{"mass", p.model.mass},
                  {"length", p.model.length},
                  {"base_radius", p.model.base_radius},
                  {"stiffness", p.model.stiffness},
                  {"damping", p.model.damping},
                  {"gravity", p.model.gravity},
                  {"gravity_axis", p.model.gravity_axis}};
    j["search"] = {{"radius_theta", p.radius_theta}, {"radius_omega", p.radius_omega}};
    j["weights"] = {{"position", p.weights.position_weight},
                    {"velocity", p.weights.velocity_weight}};
    j["thresholds"] = {{"safe_level", p.thresholds.safe_level},
                       {"caution_peak", p.thresholds.caution_peak},
                       {"warning_level", p.thresholds.warning_level},
                       {"hazard_level", p.thresholds.hazard_level},
                       {"normalized_safe_fraction", p.thresholds.normalized_safe_fraction}};
    j["window"] = {{"seconds", p.window_seconds}, {"hop_seconds", p.hop_seconds}};
    j["band"] = {{"low_hz", p.band.low}, {"high_hz", p.band.high}};
    j["classify_mode"] =
        p.classify_mode == ClassifyMode::Instantaneous ? "instantaneous" : "windowed";
    j["grid"] = {{"theta_min", cfg.grid.theta_min},     {"theta_max", cfg.grid.theta_max},
                 {"omega_min", cfg.grid.omega_min},     {"omega_max", cfg.grid.omega_max},
                 {"n_theta", cfg.grid.n_theta},         {"n_omega", cfg.grid.n_omega},
                 {"smoothing_sigma", cfg.grid.smoothing_sigma}};
    j["stream"] = {{"queue_capacity", cfg.queue_capacity},
                   {"stats_interval", cfg.stats_interval}};
    return j.dump(2) + "\n";
}

}  // namespace psm
