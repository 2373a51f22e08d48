#include "psm/stream.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <vector>

namespace psm {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

constexpr std::string_view kHeaderBase = "t,ax,ay,az,gx,gy,gz";
constexpr std::string_view kHeaderOrient = "t,ax,ay,az,gx,gy,gz,ox,oy,oz";

}  // namespace

DecodeResult decode_frame(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
        line.remove_suffix(1);
    }
    if (line.empty()) return {std::nullopt, "empty line"};
    if (line.front() == '#') return {std::nullopt, "comment"};

    const auto fields = split_fields(line);
    if (fields.size() != 7 && fields.size() != 10) {
        return {std::nullopt,
                "expected 7 or 10 fields, got " + std::to_string(fields.size())};
    }
    double vals[10];
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (!detail::parse_double(fields[i], vals[i])) {
            return {std::nullopt, "field " + std::to_string(i) + " is not a number"};
        }
        if (!std::isfinite(vals[i])) {
            return {std::nullopt, "field " + std::to_string(i) + " is not finite"};
        }
    }
    if (vals[0] < 0.0) return {std::nullopt, "negative timestamp"};
    for (int a = 0; a < 3; ++a) {
        if (std::abs(vals[4 + a]) >= kMaxPlausibleGyro) {
            return {std::nullopt, "angular rate out of plausible range"};
        }
    }
    ImuSample s;
    s.t = vals[0];
    s.accel = {vals[1], vals[2], vals[3]};
    s.gyro = {vals[4], vals[5], vals[6]};
    if (fields.size() == 10) s.orient = Vec3{vals[7], vals[8], vals[9]};
    return {s, {}};
}

std::string encode_frame(const ImuSample& sample) {
    std::string row;
    row.reserve(160);
    detail::append_double(row, sample.t);
    for (int a = 0; a < 3; ++a) {
        row.push_back(',');
        detail::append_double(row, sample.accel[a]);
    }
    for (int a = 0; a < 3; ++a) {
        row.push_back(',');
        detail::append_double(row, sample.gyro[a]);
    }
    if (sample.orient) {
        for (int a = 0; a < 3; ++a) {
            row.push_back(',');
            detail::append_double(row, (*sample.orient)[a]);
        }
    }
    return row;
}

MotionTrace read_trace_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw StreamError(StreamError::Kind::MalformedHeader, "cannot open " + path);
    }
    MotionTrace trace;
    std::optional<double> rate;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    bool with_orient = false;

    while (std::getline(f, line)) {
        ++line_no;
        std::string_view sv(line);
        while (!sv.empty() && (sv.back() == '\r' || sv.back() == '\n')) sv.remove_suffix(1);
        if (sv.empty()) continue;
        if (sv.front() == '#') {
            std::string_view body = sv.substr(1);
            while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
            if (body.starts_with("rate=")) {
                double r;
                if (!detail::parse_double(body.substr(5), r) || !(r > 0.0)) {
                    throw StreamError(StreamError::Kind::MalformedHeader,
                                      "bad rate comment at line " + std::to_string(line_no),
                                      line_no);
                }
                rate = r;
            } else if (body.starts_with("label=")) {
                const auto payload = body.substr(6);
                const auto comma = payload.find(',');
                if (comma == std::string_view::npos) {
                    throw StreamError(StreamError::Kind::MalformedHeader,
                                      "bad label comment at line " + std::to_string(line_no),
                                      line_no);
                }
                const auto task = task_from_string(payload.substr(0, comma));
                const auto intensity = intensity_from_string(payload.substr(comma + 1));
                if (!task || !intensity) {
                    throw StreamError(StreamError::Kind::MalformedHeader,
                                      "unknown label at line " + std::to_string(line_no),
                                      line_no);
                }
                trace.label = TraceLabel{*task, *intensity};
            }
            continue;  // unrecognized comments pass through silently
        }
        if (!header_seen) {
            if (sv == kHeaderBase) {
                with_orient = false;
            } else if (sv == kHeaderOrient) {
                with_orient = true;
            } else {
                throw StreamError(StreamError::Kind::MalformedHeader,
                                  "unexpected header at line " + std::to_string(line_no),
                                  line_no);
            }
            header_seen = true;
            continue;
        }
        auto dec = decode_frame(sv);
        if (!dec.sample) {
            throw StreamError(StreamError::Kind::MalformedRow,
                              "line " + std::to_string(line_no) + ": " + dec.error, line_no);
        }
        const bool row_orient = dec.sample->orient.has_value();
        if (row_orient != with_orient) {
            throw StreamError(StreamError::Kind::MalformedRow,
                              "line " + std::to_string(line_no) +
                                  ": field count does not match header",
                              line_no);
        }
        trace.samples.push_back(std::move(*dec.sample));
    }
    if (!header_seen) {
        throw StreamError(StreamError::Kind::MalformedHeader, "no header row in " + path);
    }
    if (rate) {
        trace.nominal_rate = *rate;
    } else if (trace.samples.size() >= 2) {
        // fall back to the median interval
        std::vector<double> dts;
        dts.reserve(trace.samples.size() - 1);
        for (std::size_t i = 1; i < trace.samples.size(); ++i) {
            dts.push_back(trace.samples[i].t - trace.samples[i - 1].t);
        }
        std::nth_element(dts.begin(), dts.begin() + dts.size() / 2, dts.end());
        const double med = dts[dts.size() / 2];
        if (med > 0.0) trace.nominal_rate = 1.0 / med;
    }
    validate_trace(trace);
    return trace;
}

void write_trace_csv(const MotionTrace& trace, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);  // binary keeps LF endings
    if (!f) {
        throw StreamError(StreamError::Kind::MalformedHeader, "cannot open " + path + " for writing");
    }
    bool with_orient = !trace.samples.empty();
    for (const auto& s : trace.samples) with_orient = with_orient && s.orient.has_value();

    std::string out;
    out.reserve(trace.samples.size() * 96 + 128);
    out += "# rate=";
    detail::append_double(out, trace.nominal_rate);
    out.push_back('\n');
    if (trace.label) {
        out += "# label=";
        out += to_string(trace.label->task);
        out.push_back(',');
        out += to_string(trace.label->intensity);
        out.push_back('\n');
    }
    out += with_orient ? kHeaderOrient : kHeaderBase;
    out.push_back('\n');
    for (const auto& s : trace.samples) {
        ImuSample row = s;
        if (!with_orient) row.orient.reset();
        out += encode_frame(row);
        out.push_back('\n');
    }
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) {
        throw StreamError(StreamError::Kind::MalformedHeader, "short write to " + path);
    }
}

ReplayReport replay(const MotionTrace& trace, double speed,
                    const std::function<bool(const ImuSample&)>& sink,
                    std::size_t queue_capacity) {
    if (!(speed > 0.0)) {
        throw std::invalid_argument("replay: speed must be positive");
    }
    using clock = std::chrono::steady_clock;

    // Unpaced replay is a plain loop: nothing to decouple from, so delivery
    // is synchronous, in order, and lossless.
    if (!std::isfinite(speed)) {
        const auto start = clock::now();
        ReplayReport report;
        for (const auto& s : trace.samples) {
            if (!sink(s)) {
                report.wall_time = std::chrono::duration<double>(clock::now() - start).count();
                throw StreamError(StreamError::Kind::SinkClosed,
                                  "sink refused a sample after " +
                                      std::to_string(report.delivered) + " deliveries");
            }
            ++report.delivered;
        }
        report.wall_time = std::chrono::duration<double>(clock::now() - start).count();
        return report;
    }

    struct Entry {
        ImuSample sample;
        clock::time_point enqueued;
    };

    BoundedQueue<Entry> queue(queue_capacity);
    std::atomic<std::uint64_t> dropped{0};
    std::atomic<bool> abort{false};
    const auto start = clock::now();

    std::thread producer([&] {
        const double t0 = trace.samples.empty() ? 0.0 : trace.samples.front().t;
        for (const auto& s : trace.samples) {
            if (abort.load(std::memory_order_relaxed)) break;
            const auto due = start + std::chrono::duration_cast<clock::duration>(
                                         std::chrono::duration<double>((s.t - t0) / speed));
            std::this_thread::sleep_until(due);
            dropped += queue.push(Entry{s, clock::now()});
        }
        queue.close();
    });

    ReplayReport report;
    bool closed_by_sink = false;
    while (auto entry = queue.pop()) {
        const auto now = clock::now();
        const double latency =
            std::chrono::duration<double>(now - entry->enqueued).count();
        report.max_latency = std::max(report.max_latency, latency);
        if (!sink(entry->sample)) {
            closed_by_sink = true;
            abort.store(true, std::memory_order_relaxed);
            break;
        }
        ++report.delivered;
    }
    producer.join();
    report.dropped = dropped.load();
    report.wall_time = std::chrono::duration<double>(clock::now() - start).count();
    if (closed_by_sink) {
        throw StreamError(StreamError::Kind::SinkClosed,
                          "sink refused a sample after " + std::to_string(report.delivered) +
                              " deliveries");
    }
    return report;
}

}  // namespace psm
