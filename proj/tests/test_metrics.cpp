#include "ksrl/metrics.hpp"
#include "ksrl/rng.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace ksrl;

namespace {

ReferenceTable small_table() {
    ReferenceTable t;
    t.set("a", 0.0, 10.0);
    t.set("b", 1.0, 5.0);
    t.set("c", -2.0, 2.0);
    t.set("d", 0.0, 100.0);
    return t;
}

}  // namespace

TEST(Scoring, CappedNormalisedAnchors) {
    const ReferenceTable t = small_table();
    EXPECT_EQ(capped_normalised(10.0, t, "a"), 100.0);
    EXPECT_EQ(capped_normalised(0.0, t, "a"), 0.0);
    EXPECT_EQ(capped_normalised(25.0, t, "a"), 100.0);  // capped
    EXPECT_EQ(capped_normalised(5.0, t, "a"), 50.0);
    EXPECT_LT(capped_normalised(-1.0, t, "a"), 0.0);  // no floor below random
}

TEST(Scoring, CappedNormalisedMonotone) {
    const ReferenceTable t = small_table();
    double prev = -1e9;
    for (double ret = -5.0; ret <= 30.0; ret += 0.25) {
        const double s = capped_normalised(ret, t, "a");
        EXPECT_GE(s, prev);
        EXPECT_LE(s, 100.0);
        prev = s;
    }
}

TEST(Scoring, MissingTaskErrors) {
    const ReferenceTable t = small_table();
    EXPECT_THROW(capped_normalised(1.0, t, "nope"), ConfigError);
}

TEST(Scoring, SuiteScoreAnchors) {
    const ReferenceTable t = small_table();
    ScoreWindow w(1000);
    w.record("a", 10, 10.0);
    w.record("b", 10, 5.0);
    w.record("c", 10, 2.0);
    w.record("d", 10, 100.0);
    EXPECT_EQ(suite_score(w, t, {"a", "b", "c", "d"}, 10), 100.0);

    ScoreWindow half(1000);
    half.record("a", 10, 10.0);
    half.record("b", 10, 5.0);
    half.record("c", 10, -2.0);
    half.record("d", 10, 0.0);
    EXPECT_EQ(suite_score(half, t, {"a", "b", "c", "d"}, 10), 50.0);
}

TEST(Scoring, SuiteScoreFourTaskMixedOracle) {
    const ReferenceTable t = small_table();
    ScoreWindow w(1000);
    w.record("a", 10, 5.0);    // 50
    w.record("b", 10, 5.0);    // 100
    w.record("c", 10, 0.0);    // 50
    w.record("d", 10, 200.0);  // capped 100
    const double oracle = (50.0 + 100.0 + 50.0 + 100.0) / 4.0;
    EXPECT_NEAR(suite_score(w, t, {"a", "b", "c", "d"}, 10), oracle, 1e-12);
}

TEST(Scoring, SuiteScoreInvariantUnderReordering) {
    const ReferenceTable t = small_table();
    ScoreWindow w(1000);
    w.record("a", 10, 3.0);
    w.record("b", 10, 4.0);
    w.record("c", 10, 1.0);
    w.record("d", 10, 42.0);
    const double s1 = suite_score(w, t, {"a", "b", "c", "d"}, 10);
    const double s2 = suite_score(w, t, {"d", "c", "b", "a"}, 10);
    EXPECT_EQ(s1, s2);
}

TEST(Scoring, TaskWithNoEpisodeEverScoresZero) {
    const ReferenceTable t = small_table();
    ScoreWindow w(1000);
    w.record("a", 10, 10.0);  // 100
    // b, c, d never complete an episode
    EXPECT_NEAR(suite_score(w, t, {"a", "b", "c", "d"}, 10), 25.0, 1e-12);
}

TEST(Window, TrailingWindowOnly) {
    ScoreWindow w(100);
    w.record("t", 10, 1.0);
    w.record("t", 50, 2.0);
    w.record("t", 120, 3.0);
    EXPECT_NEAR(w.windowed_return("t", 120).value(), 2.5, 1e-12);  // frames 50 and 120
    EXPECT_NEAR(w.windowed_return("t", 160).value(), 3.0, 1e-12);  // frame 120 only
}

TEST(Window, FallsBackToLastKnownWindow) {
    ScoreWindow w(100);
    w.record("t", 50, 2.0);
    w.record("t", 120, 3.0);
    // far in the future: current window empty, report the last known one
    EXPECT_NEAR(w.windowed_return("t", 5000).value(), 2.5, 1e-12);
    EXPECT_FALSE(w.windowed_return("never", 5000).has_value());
}

TEST(Window, RejectsNonMonotoneStamps) {
    ScoreWindow w(100);
    w.record("t", 50, 1.0);
    EXPECT_THROW(w.record("t", 40, 1.0), CallerError);
    EXPECT_THROW(ScoreWindow(0), ConfigError);
}

TEST(FramesToScore, Basics) {
    const std::vector<std::pair<uint64_t, double>> stream = {
        {100, 5.0}, {200, 12.0}, {300, 8.0}, {400, 30.0}};
    EXPECT_EQ(frames_to_score(stream, 1000.0), std::nullopt);
    EXPECT_EQ(frames_to_score(stream, 0.0).value(), 100u);
    EXPECT_EQ(frames_to_score(stream, 10.0).value(), 200u);
    EXPECT_EQ(frames_to_score(stream, 30.0).value(), 400u);
}

TEST(FramesToScore, MatchesIndependentScan) {
    Rng rng(31);
    std::vector<std::pair<uint64_t, double>> stream;
    uint64_t f = 0;
    for (int i = 0; i < 200; ++i) {
        f += 1 + rng.uniform_int(50);
        stream.push_back({f, rng.uniform(0.0, 100.0)});
    }
    for (double threshold : {5.0, 33.3, 66.6, 99.0}) {
        std::optional<uint64_t> oracle;
        for (const auto& [fr, sc] : stream) {
            if (sc >= threshold) {
                oracle = fr;
                break;
            }
        }
        EXPECT_EQ(frames_to_score(stream, threshold), oracle);
    }
}

TEST(FramesToScore, MonotoneInThreshold) {
    Rng rng(32);
    std::vector<std::pair<uint64_t, double>> stream;
    uint64_t f = 0;
    for (int i = 0; i < 100; ++i) {
        f += 10;
        stream.push_back({f, rng.uniform(0.0, 50.0)});
    }
    std::optional<uint64_t> prev;
    bool prev_set = false;
    for (double threshold = 0.0; threshold <= 60.0; threshold += 2.5) {
        const auto cur = frames_to_score(stream, threshold);
        if (prev_set) {
            if (!prev.has_value()) {
                EXPECT_FALSE(cur.has_value());
            } else if (cur.has_value()) {
                EXPECT_GE(cur.value(), prev.value());
            }
        }
        prev = cur;
        prev_set = true;
    }
}

TEST(FramesToScore, RejectsUnorderedStream) {
    const std::vector<std::pair<uint64_t, double>> stream = {{200, 1.0}, {100, 2.0}};
    EXPECT_THROW(frames_to_score(stream, 50.0), CallerError);
}

TEST(ReferenceTableIO, RoundTrip) {
    ReferenceTable t = small_table();
    t.add_warning("expert on c barely beat random");
    const std::string text = serialize_reference_table(t);
    const ReferenceTable back = parse_reference_table(text);
    EXPECT_EQ(back, t);
    ASSERT_EQ(back.warnings().size(), 1u);
    EXPECT_EQ(back.warnings()[0], "expert on c barely beat random");
    EXPECT_EQ(serialize_reference_table(back), text);
}

TEST(ReferenceTableIO, RejectsBadInputs) {
    EXPECT_THROW(parse_reference_table("not-a-table\n"), ConfigError);
    EXPECT_THROW(parse_reference_table("ksrl-reference-table v1\ntask notanumber 3\n"), ConfigError);
    ReferenceTable t;
    EXPECT_THROW(t.set("x", 5.0, 5.0), ConfigError);
    EXPECT_THROW(t.set("x", 5.0, 4.0), ConfigError);
}

TEST(ReferenceTableIO, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "ksrl_reftable_test.txt";
    const ReferenceTable t = small_table();
    save_reference_table(path, t);
    EXPECT_EQ(load_reference_table(path), t);
    std::filesystem::remove(path);
}

TEST(MetricRecordIO, JsonRoundTrip) {
    MetricRecord r;
    r.member_id = 3;
    r.frames = 123456;
    r.windowed_return = {{"sparse-goal", 1.25}, {"tag-1", 0.5}};
    r.mean_capped_score = 42.5;
    r.lambda = {0.9, 0.1};
    r.learning_rate = 3e-4;
    r.entropy_cost = 0.01;
    r.loss.policy_gradient_loss = -0.2;
    r.loss.value_loss = 1.5;
    r.loss.entropy_loss = -1.3;
    r.loss.distill_loss = {0.7, 0.0};
    r.loss.total = 0.123;

    const nlohmann::json j = to_json(r);
    const MetricRecord back = metric_record_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.member_id, r.member_id);
    EXPECT_EQ(back.frames, r.frames);
    EXPECT_EQ(back.windowed_return, r.windowed_return);
    EXPECT_EQ(back.mean_capped_score, r.mean_capped_score);
    EXPECT_EQ(back.lambda, r.lambda);
    EXPECT_EQ(back.learning_rate, r.learning_rate);
    EXPECT_EQ(back.entropy_cost, r.entropy_cost);
    EXPECT_EQ(back.loss.policy_gradient_loss, r.loss.policy_gradient_loss);
    EXPECT_EQ(back.loss.value_loss, r.loss.value_loss);
    EXPECT_EQ(back.loss.entropy_loss, r.loss.entropy_loss);
    EXPECT_EQ(back.loss.distill_loss, r.loss.distill_loss);
    EXPECT_EQ(back.loss.total, r.loss.total);
}

TEST(MetricRecordIO, RejectsMalformedRecord) {
    EXPECT_THROW(metric_record_from_json(nlohmann::json::parse(R"({"member_id": 1})")),
                 ConfigError);
}

TEST(MetricRecordIO, PbtEventJson) {
    PbtEvent e;
    e.round = 2;
    e.member_id = 1;
    e.action = "copied-from";
    e.peer_id = 3;
    e.hypers.learning_rate = 1e-3;
    e.hypers.distill_per_teacher = {1.0};
    const nlohmann::json j = to_json(e);
    EXPECT_EQ(j.at("round").get<uint64_t>(), 2u);
    EXPECT_EQ(j.at("peer_id").get<int>(), 3);
    EXPECT_EQ(j.at("action").get<std::string>(), "copied-from");
    EXPECT_EQ(j.at("hypers").at("distill_per_teacher").get<Vec>(), Vec{1.0});

    PbtEvent ex = e;
    ex.action = "explored";
    ex.peer_id = -1;
    EXPECT_FALSE(to_json(ex).contains("peer_id"));
}
