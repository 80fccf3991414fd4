#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "falldet/selection.hpp"

using namespace falldet;
using pipeline::ViewKind;
using pipeline::Window;
using pipeline::WindowLabel;
using selection::MethodConfig;
using selection::PipelineConfig;
using selection::ProxySplit;
using selection::SelectionConfig;

namespace {

Window cluster_window(std::mt19937_64& rng, std::size_t n, double center,
                      double spread) {
    std::uniform_real_distribution<double> u(center - spread, center + spread);
    Window w;
    w.subject_id = "s1";
    w.view = ViewKind::SixRaw;
    w.channels.assign(pipeline::kNumChannels, std::vector<double>(n));
    for (auto& ch : w.channels)
        for (double& v : ch) v = u(rng);
    return w;
}

// Tight normal cluster plus a few far-off windows; the outliers are what a
// proxy split should reject.
std::vector<Window> clustered_windows(std::size_t normals, std::size_t outliers,
                                      std::uint64_t seed = 1, std::size_t n = 8) {
    std::mt19937_64 rng(seed);
    std::vector<Window> ws;
    for (std::size_t i = 0; i < normals; ++i)
        ws.push_back(cluster_window(rng, n, 0.5, 0.05));
    for (std::size_t i = 0; i < outliers; ++i)
        ws.push_back(cluster_window(rng, n, 8.0, 0.05));
    return ws;
}

MethodConfig quick_method(threshold::ThresholdKind kind =
                              threshold::ThresholdKind::RRE) {
    MethodConfig m;
    m.view = ViewKind::Monolithic;
    m.kind = kind;
    m.hidden_units = 4;
    m.train.epochs = 3;
    return m;
}

PipelineConfig synth_pipeline(threshold::ThresholdKind kind,
                              ViewKind view = ViewKind::Monolithic) {
    PipelineConfig cfg;
    cfg.method = quick_method(kind);
    cfg.method.view = view;
    cfg.method.hidden_units = 8;
    cfg.window.window_seconds = 0.16;  // 16-sample windows keep training fast
    cfg.sel.rho = 1.5;
    cfg.sel.seed = 7;
    cfg.method.train.seed = 7;
    return cfg;
}

std::vector<pipeline::SensorRecording> small_dataset(std::size_t subjects = 3,
                                                     std::uint64_t seed = 3) {
    pipeline::SynthConfig cfg;
    cfg.subjects = subjects;
    cfg.duration_s = 30.0;
    cfg.noise_rate = 0.01;
    cfg.fall_count = 4;
    cfg.seed = seed;
    return pipeline::generate_synthetic(cfg);
}

}  // namespace

TEST_CASE("SelectionConfig invariants") {
    SelectionConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.rho = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SelectionConfig{};
    cfg.omega_grid.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SelectionConfig{};
    cfg.k_folds = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(selection::default_grid().size() == 10);
}

TEST_CASE("proxy_split partitions the input windows") {
    auto ws = clustered_windows(30, 4);
    for (std::size_t i = 0; i < ws.size(); ++i)
        ws[i].subject_id = std::to_string(i);
    nn::TrainConfig train;
    train.epochs = 3;
    const ProxySplit split = selection::proxy_split(ws, 1.5, nn::Arch::AE, train, 4);
    CHECK(split.nonfalls.size() + split.proxy_falls.size() == ws.size());
    CHECK_FALSE(split.proxy_falls.empty());

    // Order within each part follows the input order.
    const auto ordered = [](const std::vector<Window>& part) {
        for (std::size_t i = 1; i < part.size(); ++i)
            if (std::stoul(part[i - 1].subject_id) >= std::stoul(part[i].subject_id))
                return false;
        return true;
    };
    CHECK(ordered(split.nonfalls));
    CHECK(ordered(split.proxy_falls));

    CHECK_THROWS_AS(selection::proxy_split({}, 1.5, nn::Arch::AE, train, 4),
                    InputError);
}

TEST_CASE("proxy_split with a huge rho rejects nothing") {
    const auto ws = clustered_windows(20, 2);
    nn::TrainConfig train;
    train.epochs = 2;
    const ProxySplit split =
        selection::proxy_split(ws, 1e9, nn::Arch::AE, train, 4);
    CHECK(split.proxy_falls.empty());
    CHECK(split.nonfalls.size() == ws.size());
}

TEST_CASE("proxy_split on identical windows rejects nothing") {
    std::mt19937_64 rng(2);
    const Window w = cluster_window(rng, 8, 0.5, 0.0);
    const std::vector<Window> ws(12, w);
    nn::TrainConfig train;
    train.epochs = 2;
    const ProxySplit split = selection::proxy_split(ws, 0.5, nn::Arch::AE, train, 4);
    CHECK(split.proxy_falls.empty());
}

namespace {

// The two non-fall prototypes alternate which one carries the per-dimension
// maximum, so a clamped far-out fall becomes the all-ones vector, which is
// off both prototypes in half its dimensions.
Window checker_window(bool odd, std::size_t n = 8) {
    Window w;
    w.subject_id = "s1";
    w.view = ViewKind::SixRaw;
    w.channels.assign(pipeline::kNumChannels, std::vector<double>(n));
    for (std::size_t c = 0; c < pipeline::kNumChannels; ++c)
        for (std::size_t i = 0; i < n; ++i)
            w.channels[c][i] =
                0.45 + (((c * n + i) % 2 == (odd ? 1u : 0u)) ? 0.2 : 0.0);
    return w;
}

Window flat_window(double value, std::size_t n = 8) {
    Window w;
    w.subject_id = "s1";
    w.view = ViewKind::SixRaw;
    w.channels.assign(pipeline::kNumChannels, std::vector<double>(n, value));
    return w;
}

// Every non-fall is one of two prototypes, so each omega fold sees both in
// training and no held-out non-fall can ever beat the training maximum; the
// proxy falls clamp to the all-ones vector, far from either prototype. The
// split is separable at every omega on the grid once the members are trained
// long enough to actually fit the two prototypes.
ProxySplit separable_split() {
    ProxySplit split;
    for (std::size_t i = 0; i < 18; ++i) {
        split.nonfalls.push_back(checker_window(false));
        split.nonfalls.push_back(checker_window(true));
    }
    for (std::size_t i = 0; i < 6; ++i)
        split.proxy_falls.push_back(flat_window(8.0));
    return split;
}

MethodConfig separable_method() {
    MethodConfig m = quick_method();
    m.train.epochs = 300;
    return m;
}

}  // namespace

TEST_CASE("tune_omega on a separable split reaches a perfect fold gmean") {
    const ProxySplit split = separable_split();
    SelectionConfig cfg;
    cfg.seed = 1;
    const auto result = selection::tune_omega(split, cfg, separable_method());
    CHECK(result.cv_gmean.size() == cfg.omega_grid.size());
    double best = 0.0;
    for (const auto& [omega, g] : result.cv_gmean) best = std::max(best, g);
    CHECK(best == doctest::Approx(1.0));
    CHECK(std::count(cfg.omega_grid.begin(), cfg.omega_grid.end(),
                     result.best_omega) == 1);
}

TEST_CASE("tune_omega single-point grid returns that point") {
    SelectionConfig cfg;
    cfg.omega_grid = {1.7239};
    CHECK(selection::tune_omega(separable_split(), cfg, separable_method())
              .best_omega == 1.7239);
}

TEST_CASE("tune_omega error cases") {
    const auto ws = clustered_windows(24, 2, 9);
    ProxySplit split;
    split.nonfalls.assign(ws.begin(), ws.begin() + 24);
    split.proxy_falls.assign(ws.begin() + 24, ws.end());
    SelectionConfig cfg;

    // Two proxy falls cannot fill three folds.
    CHECK_THROWS_AS(selection::tune_omega(split, cfg, quick_method()),
                    SelectionError);

    ProxySplit empty_proxy;
    empty_proxy.nonfalls = split.nonfalls;
    CHECK_THROWS_WITH_AS(selection::tune_omega(empty_proxy, cfg, quick_method()),
                         doctest::Contains("smaller rho"), SelectionError);

    CHECK_THROWS_AS(selection::tune_omega(
                        split, cfg, quick_method(threshold::ThresholdKind::MaxRE)),
                    ConfigError);
}

TEST_CASE("tune_omega is deterministic") {
    const auto ws = clustered_windows(30, 6, 11);
    ProxySplit split;
    split.nonfalls.assign(ws.begin(), ws.begin() + 30);
    split.proxy_falls.assign(ws.begin() + 30, ws.end());
    SelectionConfig cfg;
    cfg.seed = 4;
    const auto a = selection::tune_omega(split, cfg, quick_method());
    const auto b = selection::tune_omega(split, cfg, quick_method());
    CHECK(a.best_omega == b.best_omega);
    CHECK(a.cv_gmean == b.cv_gmean);
}

TEST_CASE("fit_final_detector trains on the non-falls") {
    const auto ws = clustered_windows(20, 0, 13);
    const auto detector =
        selection::fit_final_detector(ws, 1.5, quick_method());
    CHECK(detector.members.size() == 1);
    CHECK(*detector.members[0].threshold.omega == 1.5);
    CHECK_THROWS_AS(selection::fit_final_detector({}, 1.5, quick_method()),
                    InputError);
}

TEST_CASE("audit hook observes every window entering selection") {
    const auto ws = clustered_windows(16, 0, 15);
    std::size_t seen = 0;
    selection::set_audit_hook([&](const Window&) { ++seen; });
    nn::TrainConfig train;
    train.epochs = 2;
    selection::proxy_split(ws, 1e9, nn::Arch::AE, train, 4);
    CHECK(seen == ws.size());
    selection::set_audit_hook(nullptr);
}

TEST_CASE("selection stages refuse fall-labeled windows") {
    auto ws = clustered_windows(16, 0, 17);
    ws[3].label = WindowLabel::Fall;
    nn::TrainConfig train;
    train.epochs = 2;
    CHECK_THROWS_AS(selection::proxy_split(ws, 1.5, nn::Arch::AE, train, 4),
                    ConfigError);
    CHECK_THROWS_AS(selection::fit_final_detector(ws, 1.5, quick_method()),
                    ConfigError);
}

TEST_CASE("loocv produces one fold per usable subject plus a mean row") {
    const auto dataset = small_dataset();
    const auto labels = pipeline::synthetic_label_map();
    const auto cfg = synth_pipeline(threshold::ThresholdKind::RRE);
    const auto report = selection::loocv(dataset, labels, cfg, 3);
    CHECK(report.folds.size() == 3);
    CHECK(report.skipped.empty());
    const auto rows = selection::loocv_rows(report, cfg);
    REQUIRE(rows.size() == 4);
    CHECK(rows.back().fold == "mean");
    CHECK(rows.back().method == "rre");

    double tpr = 0.0, gmean = 0.0;
    for (const auto& f : report.folds) {
        tpr += f.metrics.tpr;
        gmean += f.metrics.gmean;
        REQUIRE(f.omega.has_value());
    }
    CHECK(report.mean_tpr == doctest::Approx(tpr / 3.0).epsilon(1e-12));
    CHECK(report.mean_gmean == doctest::Approx(gmean / 3.0).epsilon(1e-12));
    CHECK(report.gmean_of_means ==
          doctest::Approx(std::sqrt(report.mean_tpr * (1.0 - report.mean_fpr))));
}

TEST_CASE("loocv skips subjects without falls") {
    auto dataset = small_dataset();
    // Strip every fall sample from the last subject.
    auto& rec = dataset.back();
    std::erase_if(rec.samples,
                  [](const pipeline::SensorSample& s) { return s.label == "fall"; });
    const auto report = selection::loocv(dataset, pipeline::synthetic_label_map(),
                                         synth_pipeline(threshold::ThresholdKind::RRE));
    CHECK(report.folds.size() == 2);
    REQUIRE(report.skipped.size() == 1);
    CHECK(report.skipped[0].find(rec.subject_id) == 0);
    CHECK(report.skipped[0].find("no fall windows") != std::string::npos);
}

TEST_CASE("loocv rejects degenerate datasets") {
    auto dataset = small_dataset(2);
    const auto labels = pipeline::synthetic_label_map();
    const auto cfg = synth_pipeline(threshold::ThresholdKind::RRE);
    dataset.pop_back();
    CHECK_THROWS_AS(selection::loocv(dataset, labels, cfg), ConfigError);
}

TEST_CASE("loocv on mirrored subjects yields identical folds") {
    auto dataset = small_dataset(1, 21);
    auto clone = dataset[0];
    clone.subject_id = "subj_copy";
    dataset.push_back(clone);
    const auto report =
        selection::loocv(dataset, pipeline::synthetic_label_map(),
                         synth_pipeline(threshold::ThresholdKind::MaxRE));
    REQUIRE(report.folds.size() == 2);
    CHECK(report.folds[0].metrics.tpr == report.folds[1].metrics.tpr);
    CHECK(report.folds[0].metrics.fpr == report.folds[1].metrics.fpr);
    CHECK(report.folds[0].metrics.gmean == report.folds[1].metrics.gmean);
}

TEST_CASE("maxre folds carry no omega and ocnn runs end to end") {
    const auto dataset = small_dataset();
    const auto labels = pipeline::synthetic_label_map();

    auto cfg = synth_pipeline(threshold::ThresholdKind::MaxRE);
    const auto report = selection::loocv(dataset, labels, cfg);
    for (const auto& f : report.folds) CHECK_FALSE(f.omega.has_value());

    cfg.method.ocnn = true;
    const auto ocnn_report = selection::loocv(dataset, labels, cfg);
    CHECK(ocnn_report.folds.size() == 3);
    CHECK(selection::loocv_rows(ocnn_report, cfg)[0].method == "ocnn");
}

TEST_CASE("rho_sweep at a single point matches a standalone loocv") {
    const auto dataset = small_dataset();
    const auto labels = pipeline::synthetic_label_map();
    const auto cfg = synth_pipeline(threshold::ThresholdKind::RRE);

    const auto sweep = selection::rho_sweep(dataset, labels, cfg, {1.5}, 3);
    PipelineConfig at_rho = cfg;
    at_rho.sel.rho = 1.5;
    const auto direct =
        selection::loocv_rows(selection::loocv(dataset, labels, at_rho, 3), at_rho);
    REQUIRE(sweep.size() == direct.size());
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        CHECK(sweep[i].fold == direct[i].fold);
        CHECK(sweep[i].tpr == direct[i].tpr);
        CHECK(sweep[i].fpr == direct[i].fpr);
        CHECK(sweep[i].gmean == direct[i].gmean);
        CHECK(sweep[i].omega == direct[i].omega);
    }

    CHECK_THROWS_AS(selection::rho_sweep(dataset, labels, cfg, {}), ConfigError);
}
