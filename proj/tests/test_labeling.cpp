#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "stvig/labeling.hpp"

using namespace stvig;

namespace {
const SeizureAnnotation kAnn{100.0, 120.0, 600.0};
const LabelKind kKinds[] = {LabelKind::Linear, LabelKind::Sigmoid, LabelKind::Exponential};
}  // namespace

TEST_CASE("labels hit the endpoints exactly for every family") {
    for (auto kind : kKinds) {
        CHECK(label_at(kAnn.eeg_onset, kAnn, kind) == 0.0);
        CHECK(label_at(kAnn.clinical_onset, kAnn, kind) == 1.0);
        CHECK(label_at(0.0, kAnn, kind) == 0.0);
        CHECK(label_at(kAnn.recording_end, kAnn, kind) == 1.0);
    }
}

TEST_CASE("exponential midpoint closed form, k = 5") {
    const double mid = label_at(110.0, kAnn, LabelKind::Exponential, 5.0);
    CHECK(mid == doctest::Approx((std::exp(2.5) - 1.0) / (std::exp(5.0) - 1.0)).epsilon(1e-12));
    CHECK(std::abs(mid - 0.07586) < 1e-5);
}

TEST_CASE("labels are monotone nondecreasing and continuous across the transition") {
    for (auto kind : kKinds) {
        double prev = -1.0;
        for (double t = 95.0; t <= 125.0; t += 0.01) {
            const double v = label_at(t, kAnn, kind);
            CHECK(v >= prev - 1e-12);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            if (t > 100.0 && t < 120.0) {
                const double step = std::abs(v - label_at(t - 0.01, kAnn, kind));
                CHECK(step < 0.01);  // no jumps inside the transition
            }
            prev = v;
        }
    }
}

TEST_CASE("period assignment follows the clip end time") {
    CHECK(period_at(50.0, kAnn) == Period::Interictal);
    CHECK(period_at(kAnn.eeg_onset, kAnn) == Period::Interictal);  // label 0 there
    CHECK(period_at(110.0, kAnn) == Period::Transition);
    CHECK(period_at(kAnn.clinical_onset, kAnn) == Period::Ictal);
    CHECK(period_at(200.0, kAnn) == Period::Ictal);
}

TEST_CASE("annotation validation") {
    SeizureAnnotation bad{120.0, 100.0, 600.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(label_at(50.0, bad, LabelKind::Linear), std::invalid_argument);
    CHECK_THROWS_AS(label_at(601.0, kAnn, LabelKind::Linear), std::invalid_argument);
}

TEST_CASE("segment_clips stride arithmetic") {
    const auto clips = segment_clips(kAnn, "rec");

    SUBCASE("event clips start at EEG onset with a 1 s stride") {
        std::vector<const LabeledClip*> events;
        for (const auto& c : clips)
            if (c.start >= kAnn.eeg_onset - 1e-9) events.push_back(&c);
        REQUIRE(!events.empty());
        // the 20 s transition contributes 20 clips with ends eeg+5 .. eeg+24
        for (int k = 0; k < 20; ++k) {
            CHECK(events[k]->start == doctest::Approx(100.0 + k));
            CHECK(events[k]->end == doctest::Approx(105.0 + k));
        }
        // 1 s stride throughout
        for (std::size_t k = 1; k < events.size(); ++k)
            CHECK(events[k]->start - events[k - 1]->start == doctest::Approx(1.0));
    }

    SUBCASE("interictal clips never overlap and end before EEG onset") {
        std::vector<const LabeledClip*> inter;
        for (const auto& c : clips)
            if (c.period == Period::Interictal) inter.push_back(&c);
        REQUIRE(!inter.empty());
        for (std::size_t k = 1; k < inter.size(); ++k)
            CHECK(inter[k]->start >= inter[k - 1]->end - 1e-9);
        for (const auto* c : inter) CHECK(c->end <= kAnn.eeg_onset + 1e-9);
    }

    SUBCASE("a clip ending exactly at clinical onset is ictal with label 1") {
        const auto it = std::find_if(clips.begin(), clips.end(), [](const LabeledClip& c) {
            return std::abs(c.end - 120.0) < 1e-9;
        });
        REQUIRE(it != clips.end());
        CHECK(it->period == Period::Ictal);
        CHECK(it->label == 1.0);
    }

    SUBCASE("ictal coverage stops two minutes after clinical onset") {
        double max_end = 0.0;
        for (const auto& c : clips) max_end = std::max(max_end, c.end);
        CHECK(max_end == doctest::Approx(kAnn.clinical_onset + 120.0));
        // every second of that ictal window lies inside some clip
        for (double t = kAnn.clinical_onset; t <= kAnn.clinical_onset + 120.0; t += 1.0) {
            const bool covered = std::any_of(clips.begin(), clips.end(), [t](const LabeledClip& c) {
                return c.start - 1e-9 <= t && t <= c.end + 1e-9;
            });
            CHECK(covered);
        }
    }

    SUBCASE("interictal window is capped at 30 minutes before EEG onset") {
        SeizureAnnotation longAnn{3600.0, 3620.0, 4000.0};
        const auto lc = segment_clips(longAnn, "rec2");
        double min_start = 1e18;
        for (const auto& c : lc) min_start = std::min(min_start, c.start);
        CHECK(min_start == doctest::Approx(1800.0));
    }

    SUBCASE("transition labels are strictly inside (0,1)") {
        for (const auto& c : clips) {
            if (c.period == Period::Transition) {
                CHECK(c.label > 0.0);
                CHECK(c.label < 1.0);
            } else {
                CHECK((c.label == 0.0 || c.label == 1.0));
            }
        }
    }
}

TEST_CASE("segment_clips rejects a too-short recording") {
    SeizureAnnotation ann{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(segment_clips(ann, "r"), std::invalid_argument);
}

TEST_CASE("stratified split") {
    std::vector<LabeledClip> clips;
    auto push = [&clips](Period p, int n) {
        for (int i = 0; i < n; ++i) {
            LabeledClip c;
            c.recording = "r";
            c.start = clips.size();
            c.end = c.start + 5;
            c.period = p;
            c.label = p == Period::Interictal ? 0.0 : (p == Period::Ictal ? 1.0 : 0.5);
            clips.push_back(c);
        }
    };
    push(Period::Interictal, 10);
    push(Period::Transition, 6);
    push(Period::Ictal, 4);

    const auto split = split_train_val(clips, 0.7, 42);
    int inter_train = 0, inter_val = 0;
    for (const auto& c : split.train)
        if (c.period == Period::Interictal) ++inter_train;
    for (const auto& c : split.val)
        if (c.period == Period::Interictal) ++inter_val;
    CHECK(inter_train == 7);
    CHECK(inter_val == 3);
    CHECK(split.train.size() + split.val.size() == clips.size());

    SUBCASE("same seed gives the identical split") {
        const auto again = split_train_val(clips, 0.7, 42);
        REQUIRE(again.train.size() == split.train.size());
        for (std::size_t i = 0; i < split.train.size(); ++i)
            CHECK(again.train[i].start == split.train[i].start);
    }

    SUBCASE("different seed reshuffles") {
        const auto other = split_train_val(clips, 0.7, 43);
        bool any_differ = false;
        for (std::size_t i = 0; i < split.train.size(); ++i)
            any_differ = any_differ || other.train[i].start != split.train[i].start;
        CHECK(any_differ);
    }

    SUBCASE("degenerate ratios are rejected") {
        CHECK_THROWS_AS(split_train_val(clips, 1.0, 1), std::invalid_argument);
        CHECK_THROWS_AS(split_train_val(clips, 0.0, 1), std::invalid_argument);
    }

    SUBCASE("an empty period is rejected by name") {
        std::vector<LabeledClip> no_ictal(clips.begin(), clips.begin() + 16);
        CHECK_THROWS_WITH_AS(split_train_val(no_ictal, 0.7, 1), doctest::Contains("ictal"),
                             std::invalid_argument);
    }
}
