#pragma once

#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stvig/labeling.hpp"

namespace stvig {

enum class AccumulateMode {
    Mean,  // AP is the window mean; DT stays on the probability scale
    Sum,   // literal running sum over the window
};

struct DecisionConfig {
    double tau = 3.0;   // accumulation period, seconds
    double rate = 0.5;  // spacing between successive clip probabilities
    double dt = 0.3;    // decision threshold
    AccumulateMode mode = AccumulateMode::Mean;

    void validate() const;
    /// Inclusive window length in samples: tau / rate + 1.
    int window_samples() const;
};

struct ProbabilitySample {
    double time = 0.0;
    double probability = 0.0;
};

struct ProbabilityTrace {
    std::vector<ProbabilitySample> samples;
    std::optional<SeizureAnnotation> annotation;

    void validate(double expected_rate) const;
};

struct DetectionOutcome {
    bool detected = false;
    std::optional<double> t_onset;
    std::optional<double> l_eo;  // t_onset - eeg_onset
    std::optional<double> l_co;  // t_onset - clinical_onset, negative = early alarm
};

/// Accumulative probabilities: one (time, AP) pair per input sample from the
/// first full window on.
std::vector<ProbabilitySample> accumulate(const ProbabilityTrace& trace, const DecisionConfig& config);

/// Earliest time with AP strictly above the threshold.
std::optional<double> detect_onset(const std::vector<ProbabilitySample>& ap_series, double dt);

/// Signed latencies of a detected onset against the annotation.
std::pair<double, double> latencies(double t_onset, const SeizureAnnotation& ann);

DetectionOutcome decide(const ProbabilityTrace& trace, const DecisionConfig& config);

/// False alarms per hour across interictal traces; at most one alarm is
/// counted per trace (the first one ends the episode).
double evaluate_fdr(const std::vector<ProbabilityTrace>& interictal_traces, const DecisionConfig& config);

/// Detected seizures / total seizures.
double evaluate_sensitivity(const std::vector<ProbabilityTrace>& seizure_traces, const DecisionConfig& config);

/// Incremental detector over an append-only probability stream. One
/// instance per monitored stream; append and inspection must not be called
/// concurrently on the same instance.
class StreamingDetector {
  public:
    explicit StreamingDetector(const DecisionConfig& config);

    /// Feeds one sample; returns the onset time if this sample triggers the
    /// first alarm.
    std::optional<double> append(double time, double probability);

    bool alarmed() const { return alarmed_; }
    std::optional<double> onset_time() const { return onset_; }
    std::optional<double> current_ap() const { return current_ap_; }

  private:
    DecisionConfig config_;
    std::deque<double> window_;
    bool alarmed_ = false;
    std::optional<double> onset_;
    std::optional<double> current_ap_;
    std::optional<double> last_time_;
};

}  // namespace stvig
