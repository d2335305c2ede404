#include "stvig/decision.hpp"

#include <cmath>
#include <stdexcept>

namespace stvig {

namespace {
constexpr double kEps = 1e-6;
}

void DecisionConfig::validate() const {
    if (tau < 0.0) throw std::invalid_argument("DecisionConfig: tau must be >= 0");
    if (rate <= 0.0) throw std::invalid_argument("DecisionConfig: rate must be > 0");
    const double ratio = tau / rate;
    if (std::abs(ratio - std::round(ratio)) > kEps)
        throw std::invalid_argument("DecisionConfig: tau must be an integer multiple of rate");
    if (!(dt > 0.0 && dt < 1.0)) throw std::invalid_argument("DecisionConfig: dt must lie in (0, 1)");
}

int DecisionConfig::window_samples() const {
    return static_cast<int>(std::llround(tau / rate)) + 1;
}

void ProbabilityTrace::validate(double expected_rate) const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.probability < 0.0 || s.probability > 1.0)
            throw std::invalid_argument("ProbabilityTrace: probability outside [0, 1]");
        if (i > 0) {
            const double gap = s.time - samples[i - 1].time;
            if (gap <= 0.0 || std::abs(gap - expected_rate) > kEps)
                throw std::invalid_argument("ProbabilityTrace: sample spacing " + std::to_string(gap) +
                                            " does not match detection rate " + std::to_string(expected_rate));
        }
    }
}

std::vector<ProbabilitySample> accumulate(const ProbabilityTrace& trace, const DecisionConfig& config) {
    config.validate();
    trace.validate(config.rate);
    const int w = config.window_samples();
    std::vector<ProbabilitySample> out;
    if (static_cast<int>(trace.samples.size()) < w) return out;
    out.reserve(trace.samples.size() - w + 1);
    for (std::size_t i = static_cast<std::size_t>(w) - 1; i < trace.samples.size(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < w; ++j) sum += trace.samples[i - static_cast<std::size_t>(j)].probability;
        const double ap = config.mode == AccumulateMode::Mean ? sum / w : sum;
        out.push_back({trace.samples[i].time, ap});
    }
    return out;
}

std::optional<double> detect_onset(const std::vector<ProbabilitySample>& ap_series, double dt) {
    for (const auto& s : ap_series)
        if (s.probability > dt) return s.time;
    return std::nullopt;
}

std::pair<double, double> latencies(double t_onset, const SeizureAnnotation& ann) {
    ann.validate();
    return {t_onset - ann.eeg_onset, t_onset - ann.clinical_onset};
}

DetectionOutcome decide(const ProbabilityTrace& trace, const DecisionConfig& config) {
    DetectionOutcome out;
    const auto ap = accumulate(trace, config);
    const auto onset = detect_onset(ap, config.dt);
    if (!onset) return out;
    out.detected = true;
    out.t_onset = *onset;
    if (trace.annotation) {
        const auto [eo, co] = latencies(*onset, *trace.annotation);
        out.l_eo = eo;
        out.l_co = co;
    }
    return out;
}

double evaluate_fdr(const std::vector<ProbabilityTrace>& interictal_traces, const DecisionConfig& config) {
    double hours = 0.0;
    int alarms = 0;
    for (const auto& trace : interictal_traces) {
        if (trace.samples.empty()) continue;
        hours += (trace.samples.size() * config.rate) / 3600.0;
        if (decide(trace, config).detected) ++alarms;
    }
    if (hours <= 0.0) throw std::invalid_argument("evaluate_fdr: zero-duration input");
    return alarms / hours;
}

double evaluate_sensitivity(const std::vector<ProbabilityTrace>& seizure_traces, const DecisionConfig& config) {
    if (seizure_traces.empty()) throw std::invalid_argument("evaluate_sensitivity: no traces");
    int detected = 0;
    for (const auto& trace : seizure_traces)
        if (decide(trace, config).detected) ++detected;
    return static_cast<double>(detected) / static_cast<double>(seizure_traces.size());
}

StreamingDetector::StreamingDetector(const DecisionConfig& config) : config_(config) {
    config_.validate();
}

std::optional<double> StreamingDetector::append(double time, double probability) {
    if (probability < 0.0 || probability > 1.0)
        throw std::invalid_argument("StreamingDetector: probability outside [0, 1]");
    if (last_time_ && std::abs((time - *last_time_) - config_.rate) > kEps)
        throw std::invalid_argument("StreamingDetector: sample spacing does not match detection rate");
    last_time_ = time;

    const int w = config_.window_samples();
    window_.push_back(probability);
    if (static_cast<int>(window_.size()) > w) window_.pop_front();
    if (static_cast<int>(window_.size()) < w) {
        current_ap_.reset();
        return std::nullopt;
    }
    double sum = 0.0;
    for (double p : window_) sum += p;
    const double ap = config_.mode == AccumulateMode::Mean ? sum / w : sum;
    current_ap_ = ap;
    if (!alarmed_ && ap > config_.dt) {
        alarmed_ = true;
        onset_ = time;
        return time;
    }
    return std::nullopt;
}

}  // namespace stvig
