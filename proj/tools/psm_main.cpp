#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include "psm/config.hpp"
#include "psm/dataset.hpp"
#include "psm/dsp.hpp"
#include "psm/metrics.hpp"
#include "psm/model.hpp"
#include "psm/pipeline.hpp"
#include "psm/report.hpp"
#include "psm/stream.hpp"
#include "psm/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- helpers

void print_error(const std::string& type, const std::string& message,
                 const std::string& kind = {}) {
    ordered_json j;
    j["error"] = type;
    if (!kind.empty()) j["kind"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << "\n";
}

const char* kind_name(psm::ValidationError::Kind k) {
    using K = psm::ValidationError::Kind;
    switch (k) {
        case K::TooShort: return "too_short";
        case K::NonMonotonicTime: return "non_monotonic_time";
        case K::NegativeTime: return "negative_time";
        case K::NonFinite: return "non_finite";
        case K::GyroOutOfRange: return "gyro_out_of_range";
        case K::RateMismatch: return "rate_mismatch";
    }
    return "?";
}

const char* kind_name(psm::StreamError::Kind k) {
    using K = psm::StreamError::Kind;
    switch (k) {
        case K::MalformedHeader: return "malformed_header";
        case K::MalformedRow: return "malformed_row";
        case K::SinkClosed: return "sink_closed";
        case K::ConnectFailed: return "connect_failed";
        case K::MissingArtifact: return "missing_artifact";
    }
    return "?";
}

const char* kind_name(psm::DatasetError::Kind k) {
    using K = psm::DatasetError::Kind;
    switch (k) {
        case K::InvalidSpec: return "invalid_spec";
        case K::EmptyInput: return "empty_input";
        case K::AllOutOfRange: return "all_out_of_range";
        case K::CorruptDataset: return "corrupt_dataset";
        case K::VersionMismatch: return "version_mismatch";
    }
    return "?";
}

// exit codes: 0 ok, 2 config, 3 data, 4 stream/io
int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const psm::ConfigError& e) {
        print_error("ConfigError", e.what());
        return 2;
    } catch (const psm::ValidationError& e) {
        print_error("ValidationError", e.what(), kind_name(e.kind()));
        return 3;
    } catch (const psm::DatasetError& e) {
        print_error("DatasetError", e.what(), kind_name(e.kind()));
        return 3;
    } catch (const psm::DspError& e) {
        print_error("DspError", e.what());
        return 3;
    } catch (const psm::ModelError& e) {
        print_error("ModelError", e.what());
        return 3;
    } catch (const psm::MetricsError& e) {
        print_error("MetricsError", e.what());
        return 3;
    } catch (const psm::StreamError& e) {
        print_error("StreamError", e.what(), kind_name(e.kind()));
        return e.kind() == psm::StreamError::Kind::MissingArtifact ? 3 : 4;
    } catch (const std::invalid_argument& e) {
        print_error("ConfigError", e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error("InternalError", e.what());
        return 1;
    }
}

std::string iso_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// filter + fuse a whole trace with the pipeline's conditioning settings
psm::MotionTrace condition_trace(const psm::MotionTrace& trace, const psm::PipelineConfig& cfg,
                                 psm::FusionDiagnostics* diag = nullptr) {
    psm::validate_trace(trace);
    psm::MotionTrace work = trace;
    if (std::abs(trace.nominal_rate - cfg.rate) > 1e-6 * cfg.rate) {
        work = psm::resample(trace, cfg.rate);
    }
    if (cfg.filter_accel || cfg.filter_gyro) {
        psm::FirSpec fir = cfg.fir;
        fir.sample_rate = cfg.rate;
        const auto coeffs = psm::design_kaiser_lowpass(fir);
        const auto apply = cfg.filter_mode == psm::FilterMode::ZeroPhase
                               ? psm::apply_fir
                               : psm::apply_fir_causal;
        std::vector<double> chan(work.samples.size());
        for (int c = 0; c < 6; ++c) {
            const bool wanted = c < 3 ? cfg.filter_accel : cfg.filter_gyro;
            if (!wanted) continue;
            for (std::size_t i = 0; i < work.samples.size(); ++i) {
                chan[i] = c < 3 ? work.samples[i].accel[c] : work.samples[i].gyro[c - 3];
            }
            const auto filtered = apply(chan, coeffs);
            for (std::size_t i = 0; i < work.samples.size(); ++i) {
                (c < 3 ? work.samples[i].accel[c] : work.samples[i].gyro[c - 3]) = filtered[i];
            }
        }
    }
    return psm::estimate_orientation(work, cfg.kalman, cfg.gravity, diag);
}

ordered_json verdict_counts(const std::vector<psm::SafetyVerdict>& verdicts) {
    std::size_t n_safe = 0, n_caution = 0, n_warning = 0, n_hazard = 0;
    for (const auto& v : verdicts) {
        switch (v.cls) {
            case psm::SafetyClass::Safe: ++n_safe; break;
            case psm::SafetyClass::Caution: ++n_caution; break;
            case psm::SafetyClass::Warning: ++n_warning; break;
            case psm::SafetyClass::Hazard: ++n_hazard; break;
        }
    }
    return ordered_json{{"safe", n_safe},
                        {"caution", n_caution},
                        {"warning", n_warning},
                        {"hazard", n_hazard}};
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string task = "fastening";
    std::string intensity = "medium";
    double duration = 20.0;
    double rate = 40.0;
    std::uint64_t seed = 1;
    double accel_noise = psm::NoiseSpec{}.accel_sigma;
    double gyro_noise = psm::NoiseSpec{}.gyro_sigma;
    double gyro_bias = psm::NoiseSpec{}.gyro_bias;
    bool no_gravity = false;
    bool spikes = false;
    bool no_spikes = false;
    bool no_speed_scaling = false;
    bool suite = false;
    std::string out;
};

void write_scenario(const psm::ScenarioSpec& spec, const psm::SynthResult& result,
                    const fs::path& dir) {
    fs::create_directories(dir);
    psm::write_trace_csv(result.trace, (dir / "trace.csv").string());

    std::string truth;
    truth.reserve(result.true_orient.size() * 96 + 32);
    truth += "t,ox,oy,oz,wx,wy,wz\n";
    for (std::size_t i = 0; i < result.true_orient.size(); ++i) {
        psm::detail::append_double(truth, result.trace.samples[i].t);
        for (int ax = 0; ax < 3; ++ax) {
            truth.push_back(',');
            psm::detail::append_double(truth, result.true_orient[i][ax]);
        }
        for (int ax = 0; ax < 3; ++ax) {
            truth.push_back(',');
            psm::detail::append_double(truth, result.true_rate[i][ax]);
        }
        truth.push_back('\n');
    }
    std::ofstream tf(dir / "ground_truth.csv", std::ios::binary | std::ios::trunc);
    tf.write(truth.data(), static_cast<std::streamsize>(truth.size()));

    ordered_json j;
    j["task"] = psm::to_string(spec.task);
    j["intensity"] = psm::to_string(spec.intensity);
    j["duration_s"] = spec.duration;
    j["rate_hz"] = spec.rate;
    j["seed"] = spec.seed;
    j["noise"] = {{"accel_sigma", spec.noise.accel_sigma},
                  {"gyro_sigma", spec.noise.gyro_sigma},
                  {"gyro_bias", spec.noise.gyro_bias}};
    j["gravity_included"] = spec.gravity_included;
    j["gravity"] = spec.gravity;
    j["spikes"] = spec.spikes ? json(*spec.spikes) : json(nullptr);
    j["speed_scaling"] = spec.speed_scaling;
    json wins = json::array();
    for (const auto& [a, b] : result.spike_windows) wins.push_back({a, b});
    j["spike_windows"] = wins;
    std::ofstream jf(dir / "scenario.json", std::ios::binary | std::ios::trunc);
    jf << j.dump(2) << "\n";
}

void cmd_synth(const SynthArgs& args) {
    if (args.out.empty()) throw psm::ConfigError("synth needs --out");
    psm::ScenarioSpec spec;
    const auto task = psm::task_from_string(args.task);
    const auto intensity = psm::intensity_from_string(args.intensity);
    if (!task) throw psm::ConfigError("unknown task '" + args.task + "'");
    if (!intensity) throw psm::ConfigError("unknown intensity '" + args.intensity + "'");
    spec.task = *task;
    spec.intensity = *intensity;
    spec.duration = args.duration;
    spec.rate = args.rate;
    spec.seed = args.seed;
    spec.noise = {args.accel_noise, args.gyro_noise, args.gyro_bias};
    spec.gravity_included = !args.no_gravity;
    if (args.spikes && args.no_spikes) {
        throw psm::ConfigError("--spikes and --no-spikes are mutually exclusive");
    }
    if (args.spikes) spec.spikes = true;
    if (args.no_spikes) spec.spikes = false;
    spec.speed_scaling = !args.no_speed_scaling;
    if (!(spec.duration > 0.0) || !(spec.rate > 0.0)) {
        throw psm::ConfigError("duration and rate must be positive");
    }

    ordered_json summary;
    if (args.suite) {
        json entries = json::array();
        for (psm::Task t : {psm::Task::Fastening, psm::Task::Inspection, psm::Task::PickPlace}) {
            for (psm::Intensity in :
                 {psm::Intensity::Low, psm::Intensity::Medium, psm::Intensity::High}) {
                for (std::uint64_t s : {spec.seed, spec.seed + 1}) {
                    psm::ScenarioSpec one = spec;
                    one.task = t;
                    one.intensity = in;
                    one.seed = s;
                    const auto result = psm::generate(one);
                    const std::string name = std::string(psm::to_string(t)) + "_" +
                                             psm::to_string(in) + "_seed" + std::to_string(s);
                    write_scenario(one, result, fs::path(args.out) / name);
                    entries.push_back(name);
                }
            }
        }
        summary["suite"] = entries;
    } else {
        const auto result = psm::generate(spec);
        write_scenario(spec, result, args.out);
        summary["samples"] = result.trace.samples.size();
        summary["spike_windows"] = result.spike_windows.size();
    }
    summary["out"] = args.out;
    std::cout << summary.dump(2) << "\n";
}

// ---------------------------------------------------------------- build-dataset

struct BuildArgs {
    std::vector<std::string> traces;
    std::string traces_dir;
    std::string out;
    std::string config;
    bool include_high = false;
    bool stamp = false;
};

void cmd_build_dataset(const BuildArgs& args) {
    if (args.out.empty()) throw psm::ConfigError("build-dataset needs --out");
    psm::RunConfig cfg = args.config.empty() ? psm::RunConfig{} : psm::load_run_config(args.config);

    std::vector<std::string> paths = args.traces;
    if (!args.traces_dir.empty()) {
        std::vector<std::string> found;
        for (const auto& entry : fs::directory_iterator(args.traces_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".csv") {
                found.push_back(entry.path().string());
            }
        }
        std::sort(found.begin(), found.end());
        paths.insert(paths.end(), found.begin(), found.end());
    }
    if (paths.empty()) {
        throw psm::DatasetError(psm::DatasetError::Kind::EmptyInput,
                                "no input traces given (use --trace or --traces-dir)");
    }

    std::vector<psm::MotionTrace> fused;
    std::size_t skipped_high = 0;
    for (const auto& p : paths) {
        psm::MotionTrace trace = psm::read_trace_csv(p);
        if (!args.include_high && trace.label &&
            trace.label->intensity == psm::Intensity::High) {
            ++skipped_high;
            continue;
        }
        fused.push_back(condition_trace(trace, cfg.pipeline));
    }
    if (fused.empty()) {
        throw psm::DatasetError(psm::DatasetError::Kind::EmptyInput,
                                "every input trace was excluded; nothing to build from");
    }

    psm::SafetyDataset ds = psm::build_distribution(fused, cfg.grid);
    if (args.stamp) ds.meta().built_at = iso_utc_now();
    psm::save_dataset_file(ds, args.out);

    ordered_json j;
    j["out"] = args.out;
    j["grid"] = {{"n_theta", ds.spec().n_theta}, {"n_omega", ds.spec().n_omega}};
    j["total_samples"] = ds.meta().total_samples;
    j["clamped_samples"] = ds.meta().clamped_samples;
    j["sources"] = ds.meta().source_labels;
    j["skipped_high"] = skipped_high;
    std::cout << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
    std::string trace;
    std::string dataset;
    std::string out;
    std::string config;
};

void cmd_analyze(const AnalyzeArgs& args) {
    if (args.trace.empty() || args.dataset.empty() || args.out.empty()) {
        throw psm::ConfigError("analyze needs --trace, --dataset and --out");
    }
    psm::RunConfig cfg = args.config.empty() ? psm::RunConfig{} : psm::load_run_config(args.config);

    const psm::MotionTrace trace = psm::read_trace_csv(args.trace);
    auto dataset = std::make_shared<psm::SafetyDataset>(psm::load_dataset_file(args.dataset));

    const psm::AnalysisResult result = psm::analyze_trace(trace, cfg.pipeline, dataset);

    fs::create_directories(args.out);
    const fs::path dir(args.out);
    psm::write_errors_csv(result, trace.label, (dir / "errors.csv").string());
    psm::write_verdicts_jsonl(result.verdicts, (dir / "verdicts.jsonl").string());
    {
        std::ofstream f(dir / "freq_report.json", std::ios::binary | std::ios::trunc);
        f << psm::freq_report_json(result.freq);
    }
    psm::write_reference_csv(result, (dir / "reference.csv").string());
    psm::write_spectra_csv(result, cfg.pipeline.rate, (dir / "spectra.csv").string());
    {
        std::ofstream f(dir / "config.json", std::ios::binary | std::ios::trunc);
        f << psm::dump_run_config(cfg);
    }

    ordered_json j;
    j["trace"] = args.trace;
    j["samples"] = result.samples_in;
    j["rows"] = result.rows.size();
    j["verdicts"] = verdict_counts(result.verdicts);
    double max_e = 0.0;
    for (const auto& r : result.rows) max_e = std::max(max_e, r.e_imp);
    j["max_e_imp"] = max_e;
    j["freq"] = {{"e_m_theta", result.freq.e_m_theta}, {"e_m_omega", result.freq.e_m_omega}};
    j["fusion"] = {{"degenerate_updates", result.fusion.degenerate_updates},
                   {"min_covariance_eig", result.fusion.min_covariance_eig}};
    j["out"] = args.out;
    std::cout << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- stream

struct StreamArgs {
    std::string dataset;
    std::string connect;
    std::string out = "-";
    std::string config;
};

int open_tcp(const std::string& endpoint) {
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos) {
        throw psm::ConfigError("--connect expects host:port");
    }
    const std::string host = endpoint.substr(0, colon);
    const std::string port = endpoint.substr(colon + 1);

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    // a short retry ladder: the sensor bridge often comes up after us
    for (int attempt = 0; attempt < 5; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200 << (attempt - 1)));
        }
        if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || !res) continue;
        for (addrinfo* ai = res; ai; ai = ai->ai_next) {
            const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
                freeaddrinfo(res);
                return fd;
            }
            ::close(fd);
        }
        freeaddrinfo(res);
        res = nullptr;
    }
    throw psm::StreamError(psm::StreamError::Kind::ConnectFailed,
                           "could not connect to " + endpoint + " after 5 attempts");
}

struct StreamCounters {
    std::uint64_t lines = 0;
    std::uint64_t decoded = 0;
    std::uint64_t decode_errors = 0;
    std::uint64_t non_monotonic = 0;
    std::uint64_t dropped = 0;
    std::uint64_t verdicts = 0;
};

ordered_json stats_json(const StreamCounters& c, double elapsed) {
    return ordered_json{{"lines", c.lines},
                        {"decoded", c.decoded},
                        {"decode_errors", c.decode_errors},
                        {"non_monotonic", c.non_monotonic},
                        {"queue_dropped", c.dropped},
                        {"verdicts", c.verdicts},
                        {"elapsed_s", elapsed}};
}

void cmd_stream(const StreamArgs& args) {
    if (args.dataset.empty()) throw psm::ConfigError("stream needs --dataset");
    psm::RunConfig cfg = args.config.empty() ? psm::RunConfig{} : psm::load_run_config(args.config);
    auto dataset = std::make_shared<psm::SafetyDataset>(psm::load_dataset_file(args.dataset));

    std::ofstream file_out;
    const bool to_stdout = args.out == "-" || args.out.empty();
    if (!to_stdout) {
        file_out.open(args.out, std::ios::binary | std::ios::trunc);
        if (!file_out) {
            throw psm::StreamError(psm::StreamError::Kind::MalformedHeader,
                                   "cannot open " + args.out + " for writing");
        }
    }
    std::ostream& out = to_stdout ? std::cout : file_out;

    psm::AnalysisPipeline pipe(cfg.pipeline, dataset);
    StreamCounters counters;
    pipe.on_verdict([&](const psm::SafetyVerdict& v) {
        out << psm::verdict_json_line(v) << "\n";
        ++counters.verdicts;
    });

    // The transports here (pipe, TCP) are flow-controlled byte streams, so the
    // reader waits for queue room instead of evicting: backpressure reaches the
    // sender and the verdict stream stays lossless. Eviction under pacing
    // pressure is replay()'s job.
    psm::BoundedQueue<std::string> queue(cfg.queue_capacity);
    std::atomic<std::uint64_t> line_count{0};

    int fd = -1;
    if (!args.connect.empty()) fd = open_tcp(args.connect);

    std::thread reader([&] {
        if (fd < 0) {
            std::string line;
            while (std::getline(std::cin, line)) {
                ++line_count;
                if (!queue.push_wait(std::move(line))) break;
            }
        } else {
            std::string acc;
            char buf[4096];
            bool open = true;
            while (open) {
                const ssize_t n = ::read(fd, buf, sizeof(buf));
                if (n <= 0) break;
                acc.append(buf, static_cast<std::size_t>(n));
                std::size_t pos;
                while ((pos = acc.find('\n')) != std::string::npos) {
                    ++line_count;
                    open = queue.push_wait(acc.substr(0, pos));
                    if (!open) break;
                    acc.erase(0, pos + 1);
                }
            }
            if (open && !acc.empty()) {
                ++line_count;
                queue.push_wait(std::move(acc));
            }
            ::close(fd);
        }
        queue.close();
    });

    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    auto last_stats = start;
    double last_t = -std::numeric_limits<double>::infinity();

    while (auto line = queue.pop()) {
        std::string_view sv(*line);
        while (!sv.empty() && (sv.back() == '\r' || sv.back() == '\n')) sv.remove_suffix(1);
        // trace files double as live input: pass comments and the header through
        if (sv.empty() || sv.front() == '#' || sv == "t,ax,ay,az,gx,gy,gz" ||
            sv == "t,ax,ay,az,gx,gy,gz,ox,oy,oz") {
            continue;
        }
        const auto dec = psm::decode_frame(sv);
        if (!dec.sample) {
            ++counters.decode_errors;
        } else if (dec.sample->t <= last_t) {
            ++counters.non_monotonic;  // stale or duplicated frame: skip it
        } else {
            last_t = dec.sample->t;
            pipe.push(*dec.sample);
            ++counters.decoded;
        }
        const auto now = clock::now();
        if (std::chrono::duration<double>(now - last_stats).count() >= cfg.stats_interval) {
            counters.lines = line_count.load();
            std::cerr << stats_json(counters,
                                    std::chrono::duration<double>(now - start).count())
                             .dump()
                      << "\n";
            last_stats = now;
        }
    }
    reader.join();
    pipe.finish();
    out.flush();

    counters.lines = line_count.load();
    const double elapsed = std::chrono::duration<double>(clock::now() - start).count();
    ordered_json final_stats = stats_json(counters, elapsed);
    final_stats["final"] = true;
    std::cerr << final_stats.dump() << "\n";
}

// ---------------------------------------------------------------- report

struct ReportArgs {
    std::vector<std::string> analysis;
    std::string out;
    std::string config;
};

void cmd_report(const ReportArgs& args) {
    if (args.analysis.empty() || args.out.empty()) {
        throw psm::ConfigError("report needs at least one --analysis and --out");
    }
    psm::RunConfig cfg = args.config.empty() ? psm::RunConfig{} : psm::load_run_config(args.config);

    static const char* kArtifacts[] = {"errors.csv", "verdicts.jsonl", "freq_report.json",
                                       "reference.csv"};

    struct Session {
        std::string name;
        std::string dir;
        psm::ErrorsFile errors;
        ordered_json freq;
        ordered_json verdicts;
    };
    std::vector<Session> sessions;

    for (const auto& dir : args.analysis) {
        for (const char* a : kArtifacts) {
            if (!fs::exists(fs::path(dir) / a)) {
                throw psm::StreamError(psm::StreamError::Kind::MissingArtifact,
                                       std::string(a) + " missing in " + dir);
            }
        }
        Session s;
        s.dir = dir;
        s.name = fs::path(dir).filename().string();
        if (s.name.empty()) s.name = fs::path(dir).parent_path().filename().string();
        s.errors = psm::read_errors_csv((fs::path(dir) / "errors.csv").string());

        {
            std::ifstream f(fs::path(dir) / "freq_report.json");
            try {
                s.freq = ordered_json::parse(f);
            } catch (const json::exception& e) {
                throw psm::StreamError(psm::StreamError::Kind::MalformedRow,
                                       "freq_report.json unreadable in " + dir + ": " + e.what());
            }
        }
        {
            std::ifstream f(fs::path(dir) / "verdicts.jsonl");
            std::size_t n_safe = 0, n_caution = 0, n_warning = 0, n_hazard = 0;
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(f, line)) {
                ++line_no;
                if (line.empty()) continue;
                json v;
                try {
                    v = json::parse(line);
                } catch (const json::exception&) {
                    throw psm::StreamError(psm::StreamError::Kind::MalformedRow,
                                           "bad verdict line " + std::to_string(line_no) +
                                               " in " + dir,
                                           line_no);
                }
                const std::string cls = v.value("class", "");
                if (cls == "safe") ++n_safe;
                else if (cls == "caution") ++n_caution;
                else if (cls == "warning") ++n_warning;
                else if (cls == "hazard") ++n_hazard;
            }
            s.verdicts = ordered_json{{"safe", n_safe},
                                      {"caution", n_caution},
                                      {"warning", n_warning},
                                      {"hazard", n_hazard}};
        }
        sessions.push_back(std::move(s));
    }

    std::vector<std::vector<double>> series;
    series.reserve(sessions.size());
    for (const auto& s : sessions) series.push_back(s.errors.e_imp);
    const psm::NormalizedSessions normalized = psm::normalize_session(series);

    fs::create_directories(args.out);
    const fs::path out_dir(args.out);

    const double safe_frac = cfg.pipeline.thresholds.normalized_safe_fraction;
    ordered_json session_infos = json::array();
    std::map<std::string, std::vector<double>> task_means;
    std::vector<std::string> outputs;

    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto& s = sessions[i];
        const auto& norm = normalized.series[i];
        double mean = 0.0, peak = 0.0;
        for (double v : norm) {
            mean += v;
            peak = std::max(peak, v);
        }
        if (!norm.empty()) mean /= static_cast<double>(norm.size());

        const std::string norm_name = s.name + "_normalized.csv";
        std::string body = "t,e_imp_normalized\n";
        for (std::size_t k = 0; k < norm.size(); ++k) {
            psm::detail::append_double(body, s.errors.t[k]);
            body.push_back(',');
            psm::detail::append_double(body, norm[k]);
            body.push_back('\n');
        }
        std::ofstream nf(out_dir / norm_name, std::ios::binary | std::ios::trunc);
        nf.write(body.data(), static_cast<std::streamsize>(body.size()));
        outputs.push_back(norm_name);

        std::string label = "unlabeled";
        std::string task = "unlabeled";
        if (s.errors.label) {
            task = psm::to_string(s.errors.label->task);
            label = task + std::string(",") + psm::to_string(s.errors.label->intensity);
        }
        task_means[task].push_back(mean);

        ordered_json info;
        info["name"] = s.name;
        info["label"] = label;
        info["rows"] = norm.size();
        info["mean_normalized"] = mean;
        info["max_normalized"] = peak;
        info["below_safe_fraction"] = mean < safe_frac;
        info["verdict_counts"] = s.verdicts;
        info["freq"] = s.freq;
        session_infos.push_back(info);
    }

    ordered_json per_task;
    for (const auto& [task, means] : task_means) {
        double m = 0.0;
        for (double v : means) m += v;
        m /= static_cast<double>(means.size());
        double var = 0.0;
        for (double v : means) var += (v - m) * (v - m);
        var /= static_cast<double>(means.size());
        per_task[task] = {{"sessions", means.size()},
                          {"mean_normalized", m},
                          {"variance_normalized", var}};
    }

    ordered_json summary;
    summary["session_max"] = normalized.session_max;
    summary["normalized_safe_fraction"] = safe_frac;
    summary["sessions"] = session_infos;
    summary["per_task"] = per_task;
    {
        std::ofstream f(out_dir / "summary.json", std::ios::binary | std::ios::trunc);
        f << summary.dump(2) << "\n";
    }
    outputs.push_back("summary.json");

    ordered_json manifest;
    ordered_json msessions = ordered_json::array();
    for (const auto& s : sessions) {
        ordered_json artifacts = ordered_json::array();
        for (const char* a : kArtifacts) artifacts.push_back(a);
        msessions.push_back(
            ordered_json{{"name", s.name}, {"dir", s.dir}, {"artifacts", artifacts}});
    }
    manifest["sessions"] = msessions;
    outputs.push_back("manifest.json");
    manifest["outputs"] = outputs;
    {
        std::ofstream f(out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
        f << manifest.dump(2) << "\n";
    }

    std::cout << summary.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "psm: predictive safety monitor for wrist-worn IMU streams.\n"
        "Evaluates arm motion against a learned safe-state distribution using a\n"
        "spring-damper pendulum reference and windowed impedance errors."};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* cmd_s = app.add_subcommand(
        "synth", "Generate labeled IMU scenarios (trace, ground truth, scenario spec).");
    cmd_s->add_option("--task", synth.task, "fastening | inspection | pick_place")
        ->capture_default_str();
    cmd_s->add_option("--intensity", synth.intensity, "low | medium | high")
        ->capture_default_str();
    cmd_s->add_option("--duration", synth.duration, "seconds")->capture_default_str();
    cmd_s->add_option("--rate", synth.rate, "sample rate in Hz")->capture_default_str();
    cmd_s->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
    cmd_s->add_option("--accel-noise", synth.accel_noise, "accel noise sigma, m/s^2")
        ->capture_default_str();
    cmd_s->add_option("--gyro-noise", synth.gyro_noise, "gyro noise sigma, rad/s")
        ->capture_default_str();
    cmd_s->add_option("--gyro-bias", synth.gyro_bias, "constant gyro bias, rad/s")
        ->capture_default_str();
    cmd_s->add_flag("--no-gravity", synth.no_gravity, "omit the gravity component from accel");
    cmd_s->add_flag("--spikes", synth.spikes, "force velocity spikes on");
    cmd_s->add_flag("--no-spikes", synth.no_spikes, "force velocity spikes off");
    cmd_s->add_flag("--no-speed-scaling", synth.no_speed_scaling,
                    "intensity scales amplitude only");
    cmd_s->add_flag("--suite", synth.suite,
                    "emit all 9 task/intensity pairs for two seeds (seed, seed+1)");
    cmd_s->add_option("--out", synth.out, "output directory")->required();

    BuildArgs build;
    auto* cmd_b = app.add_subcommand(
        "build-dataset",
        "Fuse recorded traces and build the safe-state probability grid.\n"
        "High-intensity labeled traces are excluded unless --include-high is given.");
    cmd_b->add_option("--trace", build.traces, "input trace CSV (repeatable)");
    cmd_b->add_option("--traces-dir", build.traces_dir, "directory of *.csv traces");
    cmd_b->add_option("--out", build.out, "output dataset path")->required();
    cmd_b->add_option("--config", build.config, "run configuration JSON");
    cmd_b->add_flag("--include-high", build.include_high, "keep high-intensity traces");
    cmd_b->add_flag("--stamp", build.stamp,
                    "record the build time (off by default so rebuilds stay byte-identical)");

    AnalyzeArgs analyze;
    auto* cmd_a = app.add_subcommand(
        "analyze",
        "Evaluate a recorded trace against a dataset and write the session artifacts.\n"
        "Defaults: 21-tap Kaiser low-pass at 10 Hz cutoff (kept below the 20 Hz\n"
        "Nyquist limit of the 40 Hz pipeline) and a 10-20 Hz spectral report band\n"
        "(the upper half of the representable range at that rate).");
    cmd_a->add_option("--trace", analyze.trace, "input trace CSV")->required();
    cmd_a->add_option("--dataset", analyze.dataset, "safety dataset file")->required();
    cmd_a->add_option("--out", analyze.out, "output directory")->required();
    cmd_a->add_option("--config", analyze.config, "run configuration JSON");

    StreamArgs stream;
    auto* cmd_st = app.add_subcommand(
        "stream",
        "Evaluate a live feed (stdin by default, or --connect host:port) and emit\n"
        "verdict JSONL as windows complete. Progress counters go to stderr.");
    cmd_st->add_option("--dataset", stream.dataset, "safety dataset file")->required();
    cmd_st->add_option("--connect", stream.connect, "TCP endpoint host:port");
    cmd_st->add_option("--out", stream.out, "verdict JSONL path, '-' for stdout")
        ->capture_default_str();
    cmd_st->add_option("--config", stream.config, "run configuration JSON");

    ReportArgs report;
    auto* cmd_r = app.add_subcommand(
        "report",
        "Summarize one or more analyze outputs: cross-session normalization,\n"
        "per-task statistics, manifest of inputs and outputs.");
    cmd_r->add_option("--analysis", report.analysis, "analyze output directory (repeatable)")
        ->required();
    cmd_r->add_option("--out", report.out, "report output directory")->required();
    cmd_r->add_option("--config", report.config, "run configuration JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("ConfigError", e.what());
        return 2;
    }

    if (cmd_s->parsed()) return run_guarded([&] { cmd_synth(synth); });
    if (cmd_b->parsed()) return run_guarded([&] { cmd_build_dataset(build); });
    if (cmd_a->parsed()) return run_guarded([&] { cmd_analyze(analyze); });
    if (cmd_st->parsed()) return run_guarded([&] { cmd_stream(stream); });
    if (cmd_r->parsed()) return run_guarded([&] { cmd_report(report); });
    return 2;
}
