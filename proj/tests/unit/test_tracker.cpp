#include "metrack/synthetic.hpp"
#include "metrack/tracker.hpp"

#include <doctest.h>

#include <numeric>

using namespace metrack;

namespace {

TrackerConfig small_config() {
    TrackerConfig cfg;
    cfg.n_particles = 60;
    cfg.triplets_per_frame = 60;
    cfg.sampler.capacity = 40;
    cfg.rng_seed = 5;
    return cfg;
}

SyntheticSequence short_sequence(int frames, std::uint64_t seed = 3) {
    TranslationSequenceConfig sc;
    sc.frames = frames;
    sc.width = 128;
    sc.height = 80;
    sc.start_y = 28;
    sc.seed = seed;
    return make_translation_sequence(sc);
}

}  // namespace

TEST_CASE("score is a logistic of the residual terms") {
    CHECK(score_from_residuals(0.0, 0.0, 1.0, 1.0, 0.0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    // Large foreground residual and small background residual push the score below 1/2.
    CHECK(score_from_residuals(50.0, 0.0, 1.0, 1.0, 0.1) < 0.5);
    // Monotone: a smaller foreground residual never lowers the score.
    CHECK(score_from_residuals(0.5, 1.0, 1.0, 1.0, 0.1) > score_from_residuals(1.0, 1.0, 1.0, 1.0, 0.1));
}

TEST_CASE("propagation noise and scale clamping") {
    Rng rng(1);
    std::vector<Particle> ps(4000, Particle{{10.0, 20.0, 1.0}, 0.0});
    propagate(ps, TransitionSigma{}, rng);
    double mx = 0, sx = 0;
    for (const Particle& p : ps) mx += p.state.cx;
    mx /= ps.size();
    for (const Particle& p : ps) sx += (p.state.cx - mx) * (p.state.cx - mx);
    sx = std::sqrt(sx / ps.size());
    CHECK(mx == doctest::Approx(10.0).epsilon(0.05));
    CHECK(sx == doctest::Approx(10.0).epsilon(0.05));

    std::vector<Particle> big(100, Particle{{0, 0, 4.99}, 0.0});
    propagate(big, TransitionSigma{0, 0, 2.0}, rng);
    for (const Particle& p : big) {
        CHECK(p.state.scale <= kMaxScale);
        CHECK(p.state.scale >= kMinScale);
        CHECK(p.state.cx == 0.0);
    }
}

TEST_CASE("MAP estimate is the heaviest particle, first on ties") {
    std::vector<Particle> ps = {{{1, 1, 1}, 0.2}, {{2, 2, 1}, 0.5}, {{3, 3, 1}, 0.5}};
    CHECK(estimate_map(ps).cx == 2.0);
    CHECK_THROWS_AS(estimate_map({}), InputError);
}

TEST_CASE("training sample geometry") {
    const SyntheticSequence seq = short_sequence(1);
    Rng rng(2);
    const BoundingBox box{40, 28, 24, 24};
    const auto samples = select_training_samples(seq.frames[0], box, FeatureMode::Hog405, rng);
    REQUIRE(samples.size() == 13);
    CHECK(samples[0].box == box);
    int pos = 0;
    for (const LabeledSample& s : samples) {
        const double dist = std::hypot(s.box.cx() - box.cx(), s.box.cy() - box.cy());
        if (s.label == SampleLabel::Foreground) {
            ++pos;
            CHECK(dist <= 0.1 * 24 + 1e-9);
        } else {
            CHECK(dist >= 24 - 1e-9);
            CHECK(dist <= 48 + 1e-9);
        }
        CHECK(s.feature.size() == kHogDim);
    }
    CHECK(pos == 5);
}

TEST_CASE("tracker init validates its inputs") {
    const SyntheticSequence seq = short_sequence(1);
    TrackerConfig cfg = small_config();
    CHECK_THROWS_AS(Tracker::init(seq.frames[0], {120, 10, 24, 24}, cfg), InputError);
    CHECK_THROWS_AS(Tracker::init(seq.frames[0], {10, 10, 0, 24}, cfg), InputError);
    cfg.n_particles = 0;
    CHECK_THROWS_AS(Tracker::init(seq.frames[0], {10, 10, 24, 24}, cfg), InputError);
    cfg = small_config();
    cfg.sampler.q_factor = 0.9;
    CHECK_THROWS_AS(Tracker::init(seq.frames[0], {10, 10, 24, 24}, cfg), InputError);
}

TEST_CASE("tracking keeps caches consistent with buffers and follows the object") {
    const SyntheticSequence seq = short_sequence(15);
    const TrackerConfig cfg = small_config();
    Tracker t = Tracker::init(seq.frames[0], seq.ground_truth.at(0), cfg);
    CHECK(t.fg_buffer().size() == 5);
    CHECK(t.bg_buffer().size() == 8);
    CHECK(t.consistency_error() < 1e-8);
    for (int i = 1; i < 15; ++i) {
        t.step(seq.frames[static_cast<std::size_t>(i)]);
        CHECK(t.consistency_error() < 1e-6);
        CHECK(t.metric().asymmetry() == 0.0);
        const double weight_sum = std::accumulate(
            t.particles().begin(), t.particles().end(), 0.0,
            [](double s, const Particle& p) { return s + p.weight; });
        CHECK(weight_sum == doctest::Approx(1.0));
    }
    CHECK(t.fg_buffer().size() <= 40);
    CHECK(t.bg_buffer().size() == 40);
    const BoundingBox gt = seq.ground_truth.at(14);
    CHECK(std::hypot(t.current_box().cx() - gt.cx(), t.current_box().cy() - gt.cy()) < 8.0);
}

TEST_CASE("same seed gives identical trajectories") {
    const SyntheticSequence seq = short_sequence(6);
    TrackerConfig cfg = small_config();
    cfg.structured = StructuredConfig{};
    auto run = [&] {
        Tracker t = Tracker::init(seq.frames[0], seq.ground_truth.at(0), cfg);
        std::vector<ObjectState> out;
        for (std::size_t i = 1; i < seq.frames.size(); ++i) out.push_back(t.step(seq.frames[i]));
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("a blank frame keeps the previous state and skips learning") {
    const SyntheticSequence seq = short_sequence(3);
    Tracker t = Tracker::init(seq.frames[0], seq.ground_truth.at(0), small_config());
    t.step(seq.frames[1]);
    const ObjectState before = t.state();
    const std::size_t fg = t.fg_buffer().size();
    t.step(GrayFrame(128, 80, 0.5));
    CHECK(t.last_diagnostics().uniform_reweight);
    CHECK(t.state() == before);
    CHECK(t.fg_buffer().size() == fg);
}

TEST_CASE("raw pixel mode runs with 1024-dim features") {
    const SyntheticSequence seq = short_sequence(3);
    TrackerConfig cfg = small_config();
    cfg.feature_mode = FeatureMode::RawPixels;
    Tracker t = Tracker::init(seq.frames[0], seq.ground_truth.at(0), cfg);
    t.step(seq.frames[1]);
    CHECK(t.metric().dim() == kRawDim);
    CHECK(t.consistency_error() < 1e-6);
}
