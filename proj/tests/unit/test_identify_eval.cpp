#include "metrack/eval.hpp"
#include "metrack/identify.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace metrack;

TEST_CASE("class residual: template column, orthogonal target, dense oracle") {
    Rng rng(3);
    const Mat templates = oracle::random_gaussian(10, 3, rng);
    const TemplateClass tc("a", templates);
    const MetricMatrix id = MetricMatrix::identity(10);
    CHECK(class_residual(id, tc, templates.col(1)) < 1e-10);

    Mat e = Mat::Zero(4, 1);
    e(0, 0) = 1.0;
    Vec y = Vec::Zero(4);
    y[2] = 3.0;
    CHECK(class_residual(MetricMatrix::identity(4), TemplateClass("b", e), y) ==
          doctest::Approx(9.0));

    const MetricMatrix m(oracle::random_spd(10, 0.5, 2.0, rng));
    const Vec target = oracle::random_gaussian(10, 1, rng);
    const double want = oracle::whitened_ols(templates, m.matrix(), target).residual;
    CHECK(std::abs(class_residual(m, tc, target) - want) <= 1e-8 * std::max(1.0, want));
    // The cache follows a changed metric.
    CHECK(std::abs(class_residual(id, tc, target) -
                   oracle::whitened_ols(templates, id.matrix(), target).residual) < 1e-8);

    CHECK_THROWS_AS(TemplateClass("empty", Mat(10, 0)), InputError);
}

TEST_CASE("ledger accumulation and classification") {
    IdentityLedger ledger = IdentityLedger::empty(3);
    Vec r(3);
    r << 3, 1, 2;
    ledger = accumulate(ledger, r, 0.0);
    CHECK(ledger.cumulative.isZero(0.0));
    ledger = accumulate(ledger, r, 1.0);
    CHECK(ledger.cumulative == r);
    CHECK(classify(ledger) == 1);
    CHECK(classify(IdentityLedger::empty(1)) == 0);

    Vec tie(3);
    tie << 1, 1, 1;
    CHECK(classify(accumulate(IdentityLedger::empty(3), tie, 1.0)) == 0);
    CHECK_THROWS_AS(accumulate(IdentityLedger::empty(2), r, 1.0), InputError);
}

TEST_CASE("ledger equals re-summation and is invariant to weight rescaling") {
    Rng rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    IdentityLedger a = IdentityLedger::empty(4);
    IdentityLedger b = IdentityLedger::empty(4);
    Vec prev = a.cumulative;
    for (int i = 0; i < 50; ++i) {
        Vec r(4);
        for (int k = 0; k < 4; ++k) r[k] = u(rng);
        const double w = u(rng);
        a = accumulate(a, r, w);
        b = accumulate(b, r, 7.5 * w);
        CHECK((a.cumulative.array() >= prev.array()).all());
        prev = a.cumulative;
        CHECK(classify(a) == classify(b));
    }
    Vec resum = Vec::Zero(4);
    for (const LedgerFrame& f : a.per_frame) resum += f.weight * f.residuals;
    CHECK((resum - a.cumulative).cwiseAbs().maxCoeff() <= 1e-9);

    Eigen::Index scan = 0;
    for (Eigen::Index k = 1; k < 4; ++k) {
        if (a.cumulative[k] < a.cumulative[scan]) scan = k;
    }
    CHECK(classify(a) == scan);
}

TEST_CASE("occlusion detection") {
    const std::vector<double> short_hist(5, 1.0);
    CHECK_FALSE(detect_occlusion(100.0, short_hist));
    const std::vector<double> hist(12, 2.0);
    CHECK_FALSE(detect_occlusion(2.0, hist));
    CHECK(detect_occlusion(8.0, hist, 3.0));
    CHECK_FALSE(detect_occlusion(6.0, hist, 3.0));
    const std::vector<double> even = {1, 2, 3, 10};
    CHECK(median(even) == 2.5);

    OcclusionMonitor monitor;
    for (int i = 0; i < 10; ++i) CHECK_FALSE(monitor.observe(1.0 + 0.01 * i));
    CHECK(monitor.observe(10.0));
    CHECK(monitor.observe(10.0));  // flagged values stay out of the history
    CHECK(monitor.history().size() == 10);
    CHECK_FALSE(monitor.observe(1.02));
    CHECK_THROWS_AS(OcclusionMonitor(OcclusionConfig{3.0, 5, 10}), InputError);

    const MetricMatrix id = MetricMatrix::identity(3);
    CHECK(relative_residual(0.0, id, Vec::Zero(3)) == 1.0);
    CHECK(relative_residual(1.0, id, Vec::Constant(3, 1.0)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("centre location error") {
    const BoundingBox a{0, 0, 10, 10};
    CHECK(cle(a, a) == 0.0);
    CHECK(cle(a, {3, 4, 10, 10}) == doctest::Approx(5.0));
    CHECK(cle({0, 0, 4, 4}, {0, 0, 10, 10}) == doctest::Approx(std::hypot(3.0, 3.0)));
}

TEST_CASE("summarize matches a recomputation and skips frames without ground truth") {
    BoxSequence gt;
    BoxSequence preds;
    Rng rng(12);
    std::uniform_real_distribution<double> u(0.0, 20.0);
    for (int f = 0; f < 30; ++f) {
        gt[f] = {u(rng), u(rng), 10, 10};
        preds[f] = {gt[f].x + u(rng) / 4, gt[f].y - u(rng) / 4, 10, 10};
    }
    preds[40] = {0, 0, 5, 5};
    const SequenceReport r = summarize(preds, gt);
    CHECK(r.frames_evaluated == 30);
    CHECK(r.frames_missing_gt == 1);
    double cs = 0, vs = 0;
    int ok = 0;
    for (int f = 0; f < 30; ++f) {
        cs += std::hypot(preds[f].cx() - gt[f].cx(), preds[f].cy() - gt[f].cy());
        const double v = oracle::iou(preds[f], gt[f]);
        vs += v;
        ok += v > 0.5 ? 1 : 0;
    }
    CHECK(r.mean_cle == doctest::Approx(cs / 30));
    CHECK(r.mean_vor == doctest::Approx(vs / 30));
    CHECK(r.success_rate == doctest::Approx(ok / 30.0));

    const SequenceReport perfect = summarize(gt, gt);
    CHECK(perfect.mean_cle == 0.0);
    CHECK(perfect.success_rate == 1.0);
    BoxSequence far;
    for (const auto& [f, b] : gt) far[f] = {b.x + 100, b.y, b.w, b.h};
    CHECK(summarize(far, gt).success_rate == 0.0);
}

TEST_CASE("box CSV parsing") {
    const BoxSequence s = parse_boxes_csv("frame,x,y,w,h\n0,1,2,3,4\n2,1.5,2,3,4\n", "t");
    CHECK(s.size() == 2);
    CHECK(s.at(2).x == 1.5);
    CHECK(parse_boxes_csv(format_boxes_csv(s), "round") == s);
    CHECK_THROWS_AS(parse_boxes_csv("0,1,2,3,4\n", "t"), InputError);
    CHECK_THROWS_AS(parse_boxes_csv("frame,x,y,w,h\n1,1,2,3,4\n1,1,2,3,4\n", "t"), InputError);
    CHECK_THROWS_AS(parse_boxes_csv("frame,x,y,w,h\n1,1,2,3\n", "t"), InputError);
    CHECK_THROWS_AS(parse_boxes_csv("frame,x,y,w,h\n1,a,2,3,4\n", "t"), InputError);
    CHECK_THROWS_AS(parse_boxes_csv("", "t"), InputError);
}
