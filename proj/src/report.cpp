#include "psm/report.hpp"

#include <fstream>

#include <json.hpp>

#include "psm/stream.hpp"

namespace psm {

namespace {

void write_text(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw StreamError(StreamError::Kind::MalformedHeader,
                          "cannot open " + path + " for writing");
    }
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!f) {
        throw StreamError(StreamError::Kind::MalformedHeader, "short write to " + path);
    }
}

}  // namespace

std::string verdict_json_line(const SafetyVerdict& verdict) {
    nlohmann::ordered_json j;
    j["t"] = verdict.trigger_time;
    j["class"] = to_string(verdict.cls);
    j["e_imp"] = verdict.trigger_value;
    j["metric"] = to_string(verdict.metric);
    return j.dump();
}

void write_verdicts_jsonl(const std::vector<SafetyVerdict>& verdicts, const std::string& path) {
    std::string body;
    body.reserve(verdicts.size() * 80);
    for (const auto& v : verdicts) {
        body += verdict_json_line(v);
        body.push_back('\n');
    }
    write_text(path, body);
}

void write_errors_csv(const AnalysisResult& result, std::optional<TraceLabel> label,
                      const std::string& path) {
    std::string body;
    body.reserve(result.rows.size() * 80 + 64);
    if (label) {
        body += "# label=";
        body += to_string(label->task);
        body.push_back(',');
        body += to_string(label->intensity);
        body.push_back('\n');
    }
    body += "t,e_theta,e_omega,e_imp\n";
    for (const auto& r : result.rows) {
        detail::append_double(body, r.t);
        body.push_back(',');
        detail::append_double(body, r.e_theta);
        body.push_back(',');
        detail::append_double(body, r.e_omega);
        body.push_back(',');
        detail::append_double(body, r.e_imp);
        body.push_back('\n');
    }
    write_text(path, body);
}

void write_reference_csv(const AnalysisResult& result, const std::string& path) {
    std::string body;
    body.reserve(result.reference.size() * 160 + 128);
    body += "t,ref_x,ref_y,ref_z,ref_rate_x,ref_rate_y,ref_rate_z,"
            "meas_x,meas_y,meas_z,target_theta_g,target_omega,no_mass\n";
    for (std::size_t i = 0; i < result.reference.size(); ++i) {
        const PsmState& st = result.reference[i];
        detail::append_double(body, st.t);
        for (int ax = 0; ax < 3; ++ax) {
            body.push_back(',');
            detail::append_double(body, st.theta[ax]);
        }
        for (int ax = 0; ax < 3; ++ax) {
            body.push_back(',');
            detail::append_double(body, st.theta_dot[ax]);
        }
        for (int ax = 0; ax < 3; ++ax) {
            body.push_back(',');
            detail::append_double(body, result.fused_orient[i][ax]);
        }
        body.push_back(',');
        detail::append_double(body, result.targets[i].theta_g);
        body.push_back(',');
        detail::append_double(body, result.targets[i].omega);
        body.push_back(',');
        body.push_back(i < result.rows.size() && result.rows[i].no_mass ? '1' : '0');
        body.push_back('\n');
    }
    write_text(path, body);
}

void write_spectra_csv(const AnalysisResult& result, double sample_rate,
                       const std::string& path) {
    std::vector<double> eth(result.rows.size()), eom(result.rows.size());
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        eth[i] = result.rows[i].e_theta;
        eom[i] = result.rows[i].e_omega;
    }
    std::string body = "freq_hz,mag_e_theta,mag_e_omega\n";
    if (eth.size() >= 2) {
        const Spectrum st = dft_magnitude(eth, sample_rate);
        const Spectrum so = dft_magnitude(eom, sample_rate);
        for (std::size_t k = 0; k < st.freqs.size(); ++k) {
            detail::append_double(body, st.freqs[k]);
            body.push_back(',');
            detail::append_double(body, st.mags[k]);
            body.push_back(',');
            detail::append_double(body, so.mags[k]);
            body.push_back('\n');
        }
    }
    write_text(path, body);
}

std::string freq_report_json(const FrequencyErrorReport& report) {
    nlohmann::ordered_json j;
    j["e_m_theta"] = report.e_m_theta;
    j["e_m_omega"] = report.e_m_omega;
    j["band_low_hz"] = report.band.low;
    j["band_high_hz"] = report.band.high;
    j["window_samples"] = report.n;
    return j.dump(2) + "\n";
}

ErrorsFile read_errors_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) {
        throw StreamError(StreamError::Kind::MissingArtifact, "cannot open " + path);
    }
    ErrorsFile out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(f, line)) {
        ++line_no;
        std::string_view sv(line);
        while (!sv.empty() && (sv.back() == '\r' || sv.back() == '\n')) sv.remove_suffix(1);
        if (sv.empty()) continue;
        if (sv.front() == '#') {
            if (sv.starts_with("# label=")) {
                const auto payload = sv.substr(8);
                const auto comma = payload.find(',');
                if (comma != std::string_view::npos) {
                    const auto task = task_from_string(payload.substr(0, comma));
                    const auto intensity = intensity_from_string(payload.substr(comma + 1));
                    if (task && intensity) out.label = TraceLabel{*task, *intensity};
                }
            }
            continue;
        }
        if (!header_seen) {
            if (sv != "t,e_theta,e_omega,e_imp") {
                throw StreamError(StreamError::Kind::MalformedHeader,
                                  "unexpected errors header in " + path, line_no);
            }
            header_seen = true;
            continue;
        }
        double cols[4];
        std::size_t start = 0;
        for (int c = 0; c < 4; ++c) {
            const auto pos = sv.find(',', start);
            const auto field = pos == std::string_view::npos ? sv.substr(start)
                                                             : sv.substr(start, pos - start);
            if (!detail::parse_double(field, cols[c]) ||
                (c < 3 && pos == std::string_view::npos)) {
                throw StreamError(StreamError::Kind::MalformedRow,
                                  "bad errors row at line " + std::to_string(line_no), line_no);
            }
            start = pos + 1;
        }
        out.t.push_back(cols[0]);
        out.e_imp.push_back(cols[3]);
    }
    if (!header_seen) {
        throw StreamError(StreamError::Kind::MalformedHeader, "no header row in " + path);
    }
    return out;
}

}  // namespace psm
