#include "psm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace psm {

void validate(const PipelineConfig& config) {
    if (!(config.rate > 0.0)) {
        throw ConfigError("pipeline rate must be positive");
    }
    if (!(config.window_seconds > 0.0) || !(config.hop_seconds > 0.0) ||
        config.hop_seconds > config.window_seconds) {
        throw ConfigError("window/hop must be positive with hop <= window");
    }
    if (!(config.gravity > 0.0)) {
        throw ConfigError("gravity must be positive");
    }
    if (!(config.radius_theta > 0.0) || !(config.radius_omega > 0.0)) {
        throw ConfigError("search radii must be positive");
    }
    try {
        FirSpec fir = config.fir;
        fir.sample_rate = config.rate;
        if (config.filter_accel || config.filter_gyro) design_kaiser_lowpass(fir);
        validate(config.model);
        validate(config.weights);
        validate(config.thresholds);
        if (!(config.band.low > 0.0) || !(config.band.high > config.band.low) ||
            config.band.high > config.rate / 2.0 + 1e-12) {
            throw ConfigError("frequency band must satisfy 0 < low < high <= rate/2");
        }
        if (!(config.kalman.q_angle > 0.0) || !(config.kalman.q_bias > 0.0) ||
            !(config.kalman.r_measure > 0.0)) {
            throw ConfigError("kalman gains must be strictly positive");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
}

AnalysisPipeline::AnalysisPipeline(const PipelineConfig& config,
                                   std::shared_ptr<const SafetyDataset> dataset)
    : cfg_(config),
      dataset_(std::move(dataset)),
      kx_(config.kalman),
      ky_(config.kalman),
      kz_(config.kalman),
      predictor_(config.model, dataset_, config.radius_theta, config.radius_omega) {
    validate(cfg_);
    cfg_.fir.sample_rate = cfg_.rate;
    coeffs_ = design_kaiser_lowpass(cfg_.fir);
    stages_.resize(6);
    stage_out_.resize(6);
    for (int c = 0; c < 6; ++c) {
        const bool wanted = c < 3 ? cfg_.filter_accel : cfg_.filter_gyro;
        if (wanted) stages_[c].emplace(coeffs_, cfg_.filter_mode);
    }
    window_len_ = static_cast<std::size_t>(std::llround(cfg_.window_seconds * cfg_.rate));
    hop_len_ = static_cast<std::size_t>(std::llround(cfg_.hop_seconds * cfg_.rate));
    window_len_ = std::max<std::size_t>(window_len_, 1);
    hop_len_ = std::max<std::size_t>(hop_len_, 1);
    fusion_.min_covariance_eig = std::numeric_limits<double>::infinity();
}

void AnalysisPipeline::push(const ImuSample& raw) {
    if (finished_) {
        throw StreamError(StreamError::Kind::SinkClosed, "pipeline already finished");
    }
    ++samples_in_;
    pending_.push_back(raw);
    for (int c = 0; c < 6; ++c) {
        if (!stages_[c]) continue;
        const double v = c < 3 ? raw.accel[c] : raw.gyro[c - 3];
        stages_[c]->push(v, stage_out_[c]);
    }
    consume_ready();
}

void AnalysisPipeline::consume_ready() {
    // every active stage runs the same kernel, so they emit in lockstep;
    // with no stages at all the raw sample is ready immediately
    std::size_t avail = pending_.size();
    for (int c = 0; c < 6; ++c) {
        if (stages_[c]) avail = std::min(avail, stage_out_[c].size());
    }
    for (std::size_t i = 0; i < avail; ++i) {
        ImuSample fused = pending_.front();
        pending_.pop_front();
        for (int c = 0; c < 6; ++c) {
            if (!stages_[c]) continue;
            const double v = stage_out_[c][i];
            if (c < 3) {
                fused.accel[c] = v;
            } else {
                fused.gyro[c - 3] = v;
            }
        }
        handle_fused(fused);
    }
    if (avail > 0) {
        for (int c = 0; c < 6; ++c) {
            if (stages_[c]) {
                stage_out_[c].erase(stage_out_[c].begin(),
                                    stage_out_[c].begin() + static_cast<long>(avail));
            }
        }
    }
}

void AnalysisPipeline::handle_fused(const ImuSample& conditioned) {
    ImuSample fused = conditioned;
    const Vec3& a = fused.accel;
    const double anorm = std::hypot(a[0], a[1], a[2]);
    const double floor = 0.1 * cfg_.gravity;

    if (!fusion_started_) {
        if (anorm >= floor) {
            kx_.seed(std::atan2(a[1], a[2]));
            ky_.seed(std::atan2(-a[0], std::hypot(a[1], a[2])));
        } else {
            kx_.seed(0.0);
            ky_.seed(0.0);
            ++fusion_.degenerate_updates;
        }
        kz_.seed(0.0);
        fusion_started_ = true;
    } else {
        const double dt = fused.t - prev_t_;
        kx_.predict(0.5 * (prev_gyro_[0] + fused.gyro[0]), dt);
        ky_.predict(0.5 * (prev_gyro_[1] + fused.gyro[1]), dt);
        kz_.predict(0.5 * (prev_gyro_[2] + fused.gyro[2]), dt);
        if (anorm >= floor) {
            kx_.update(std::atan2(a[1], a[2]));
            ky_.update(std::atan2(-a[0], std::hypot(a[1], a[2])));
        } else {
            ++fusion_.degenerate_updates;
        }
    }
    prev_gyro_ = fused.gyro;
    prev_t_ = fused.t;
    fused.orient = Vec3{kx_.angle(), ky_.angle(), kz_.angle()};
    fusion_.min_covariance_eig =
        std::min({fusion_.min_covariance_eig, kx_.min_covariance_eig(),
                  ky_.min_covariance_eig(), kz_.min_covariance_eig()});
    fusion_.bias_estimate = Vec3{kx_.bias(), ky_.bias(), kz_.bias()};
    ++fused_count_;

    const auto ref = predictor_.observe(fused);

    const Vec3& o = *fused.orient;
    double dth = 0.0, dom = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
        const double et = o[ax] - ref.state.theta[ax];
        const double ew = fused.gyro[ax] - ref.state.theta_dot[ax];
        dth += et * et;
        dom += ew * ew;
    }
    ts_.push_back(fused.t);
    eth_.push_back(std::sqrt(dth));
    eom_.push_back(std::sqrt(dom));
    flags_.push_back(ref.no_mass ? 1 : 0);
    fused_orient_.push_back(o);
    reference_.push_back(ref.state);
    targets_.push_back(ref.target);

    emit_windows(false);
}

void AnalysisPipeline::emit_windows(bool final_flush) {
    const std::size_t count = ts_.size();
    std::size_t w_begin = 0, w_end = 0;
    bool have_window = false;

    if (!final_flush) {
        if (count < window_len_) return;
        if ((count - window_len_) % hop_len_ != 0) return;
        w_begin = count - window_len_;
        w_end = count;
        have_window = true;
    } else {
        if (emitted_ >= count) return;
        w_begin = count > window_len_ ? count - window_len_ : 0;
        w_end = count;
        have_window = w_end > w_begin;
    }
    if (!have_window) return;

    const std::span<const double> th(eth_.data() + w_begin, w_end - w_begin);
    const std::span<const double> om(eom_.data() + w_begin, w_end - w_begin);
    const std::vector<double> imp = impedance_error(th, om, cfg_.weights);

    // fill impedance values for rows not yet published
    const std::size_t first_new = std::max(emitted_, w_begin);
    for (std::size_t i = first_new; i < w_end; ++i) {
        ErrorRow row;
        row.t = ts_[i];
        row.e_theta = eth_[i];
        row.e_omega = eom_[i];
        row.e_imp = imp[i - w_begin];
        row.no_mass = flags_[i] != 0;
        rows_.push_back(row);
        if (row_cb_) row_cb_(row);
    }

    VerdictContext ctx{cfg_.label, cfg_.weights};
    std::vector<SafetyVerdict> fresh;
    if (cfg_.classify_mode == ClassifyMode::Instantaneous) {
        fresh = classify(std::span<const double>(ts_.data() + first_new, w_end - first_new),
                         std::span<const double>(imp.data() + (first_new - w_begin),
                                                 w_end - first_new),
                         std::span<const std::uint8_t>(flags_.data() + first_new,
                                                       w_end - first_new),
                         cfg_.thresholds, ClassifyMode::Instantaneous, ctx);
    } else {
        fresh = classify(std::span<const double>(ts_.data() + w_begin, w_end - w_begin),
                         std::span<const double>(imp.data(), imp.size()),
                         std::span<const std::uint8_t>(flags_.data() + w_begin,
                                                       w_end - w_begin),
                         cfg_.thresholds, ClassifyMode::Windowed, ctx);
    }
    for (auto& v : fresh) {
        verdicts_.push_back(v);
        if (verdict_cb_) verdict_cb_(v);
    }
    emitted_ = w_end;
}

void AnalysisPipeline::finish() {
    if (finished_) return;
    for (int c = 0; c < 6; ++c) {
        if (stages_[c]) stages_[c]->finish(stage_out_[c]);
    }
    consume_ready();
    emit_windows(true);
    finished_ = true;
}

AnalysisResult AnalysisPipeline::take_result() {
    AnalysisResult r;
    r.rows = std::move(rows_);
    r.verdicts = std::move(verdicts_);
    r.fused_orient = std::move(fused_orient_);
    r.reference = std::move(reference_);
    r.targets = std::move(targets_);
    r.fusion = fusion_;
    if (!std::isfinite(r.fusion.min_covariance_eig)) r.fusion.min_covariance_eig = 0.0;
    r.samples_in = samples_in_;
    return r;
}

AnalysisResult analyze_trace(const MotionTrace& trace, const PipelineConfig& config,
                             std::shared_ptr<const SafetyDataset> dataset) {
    validate_trace(trace);
    const MotionTrace* input = &trace;
    MotionTrace resampled;
    if (std::abs(trace.nominal_rate - config.rate) > 1e-6 * config.rate) {
        resampled = resample(trace, config.rate);
        input = &resampled;
    }

    PipelineConfig cfg = config;
    if (!cfg.label) cfg.label = input->label;
    AnalysisPipeline pipe(cfg, std::move(dataset));
    for (const auto& s : input->samples) pipe.push(s);
    pipe.finish();
    AnalysisResult result = pipe.take_result();

    // session-level spectral report over both error series
    if (result.rows.size() >= 2) {
        std::vector<double> eth(result.rows.size()), eom(result.rows.size());
        for (std::size_t i = 0; i < result.rows.size(); ++i) {
            eth[i] = result.rows[i].e_theta;
            eom[i] = result.rows[i].e_omega;
        }
        const auto n_window = static_cast<std::size_t>(
            std::llround(cfg.window_seconds * cfg.rate));
        result.freq.band = cfg.band;
        result.freq.n = n_window;
        result.freq.e_m_theta = frequency_error(eth, cfg.rate, cfg.band, n_window);
        result.freq.e_m_omega = frequency_error(eom, cfg.rate, cfg.band, n_window);
    }
    return result;
}

}  // namespace psm
