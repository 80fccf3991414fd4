#include "falldet/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

namespace falldet::selection {

namespace {

AuditHook g_audit_hook;

void audit_windows(const std::vector<pipeline::Window>& windows) {
    for (const pipeline::Window& w : windows) {
        if (g_audit_hook) g_audit_hook(w);
        if (w.label == pipeline::WindowLabel::Fall)
            throw ConfigError(
                "a fall-labeled window reached the model-selection pipeline; "
                "tuning must see normal activities only");
    }
}

// Seeded shuffle + round-robin assignment into k folds.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k,
                                                 std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng() % i]);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
    return folds;
}

// Per-member training state shared by every omega on one fold.
struct TrainedMember {
    std::string channel_id;
    pipeline::Scaler scaler;
    std::vector<std::vector<double>> scaled_vectors;
    std::shared_ptr<nn::AEModel> model;
    std::vector<double> errors;
    nn::TrainConfig train_cfg;
    std::vector<nn::LayerSpec> specs;
};

std::vector<TrainedMember> train_members(const std::vector<pipeline::Window>& windows,
                                         const MethodConfig& method) {
    std::vector<pipeline::Window> converted;
    converted.reserve(windows.size());
    for (const pipeline::Window& w : windows)
        converted.push_back(pipeline::to_view(w, method.view));
    const std::size_t n_channels = converted.front().channels.size();
    const auto ids = ensemble::channel_ids(method.view);

    std::vector<TrainedMember> members(n_channels);
    for (std::size_t c = 0; c < n_channels; ++c) {
        TrainedMember& m = members[c];
        m.channel_id = ids[c];
        m.scaled_vectors.reserve(converted.size());
        std::vector<std::vector<double>> raw;
        raw.reserve(converted.size());
        for (const pipeline::Window& w : converted) raw.push_back(w.channels[c]);
        m.scaler = pipeline::fit_scaler(raw);
        for (const auto& v : raw)
            m.scaled_vectors.push_back(pipeline::apply_scaler(m.scaler, v));
        m.train_cfg = method.train;
        m.train_cfg.seed = method.train.seed + c;
        m.specs = nn::standard_specs(m.scaled_vectors.front().size(), method.arch,
                                     method.hidden_units);
        m.model = std::make_shared<nn::AEModel>(
            nn::train(nn::init_model(m.specs, method.arch, m.train_cfg.seed),
                      m.scaled_vectors, m.train_cfg));
        m.errors.reserve(m.scaled_vectors.size());
        for (const auto& v : m.scaled_vectors)
            m.errors.push_back(nn::reconstruction_error(*m.model, v));
    }
    return members;
}

// Detector for one omega built from pre-trained members. Only the threshold
// fit depends on omega (IRE additionally retrains on the omega inliers).
ensemble::Detector detector_for_omega(const std::vector<TrainedMember>& members,
                                      const MethodConfig& method, double omega) {
    ensemble::Detector detector;
    detector.view = method.view;
    detector.arch = method.arch;
    for (const TrainedMember& m : members) {
        ensemble::Member member;
        member.channel_id = m.channel_id;
        member.scaler = m.scaler;
        member.train_cfg = m.train_cfg;
        switch (method.kind) {
            case threshold::ThresholdKind::MaxRE:
                member.threshold = threshold::max_re(m.errors);
                member.threshold.model = m.model;
                break;
            case threshold::ThresholdKind::StdRE:
                member.threshold = threshold::std_re(m.errors);
                member.threshold.model = m.model;
                break;
            case threshold::ThresholdKind::RRE:
                member.threshold = threshold::rre(m.errors, omega);
                member.threshold.model = m.model;
                break;
            case threshold::ThresholdKind::IRE:
                member.threshold = threshold::ire_from_stage_a(
                    m.scaled_vectors, m.errors, omega, m.specs, method.arch,
                    m.train_cfg);
                break;
        }
        detector.members.push_back(std::move(member));
    }
    return detector;
}

metrics::EvalMetrics evaluate_detector(const ensemble::Detector& detector,
                                       const std::vector<pipeline::Window>& negatives,
                                       const std::vector<pipeline::Window>& positives) {
    metrics::ConfusionCounts counts;
    for (const pipeline::Window& w : negatives) {
        if (ensemble::detect(detector, w).verdict == pipeline::WindowLabel::Fall)
            ++counts.fp;
        else ++counts.tn;
    }
    for (const pipeline::Window& w : positives) {
        if (ensemble::detect(detector, w).verdict == pipeline::WindowLabel::Fall)
            ++counts.tp;
        else ++counts.fn;
    }
    return metrics::gmean(counts);
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < jobs; ++t) {
        workers.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::vector<double> default_grid() {
    return {0.001, 0.01, 0.1, 0.5, 1.0, 1.5, 1.7239, 2.0, 2.5, 3.0};
}

void SelectionConfig::validate() const {
    if (!(rho > 0.0)) throw ConfigError("rho must be > 0");
    if (omega_grid.empty()) throw ConfigError("omega grid is empty");
    if (rho_grid.empty()) throw ConfigError("rho grid is empty");
    if (k_folds < 2) throw ConfigError("k_folds must be >= 2");
}

std::string MethodConfig::method_name() const {
    return ocnn ? "ocnn" : threshold::kind_name(kind);
}

void set_audit_hook(AuditHook hook) { g_audit_hook = std::move(hook); }

ProxySplit proxy_split(const std::vector<pipeline::Window>& normal_windows, double rho,
                       nn::Arch arch, const nn::TrainConfig& train_cfg,
                       std::size_t hidden_units) {
    if (normal_windows.empty()) throw InputError("proxy_split: no windows");
    if (!(rho > 0.0)) throw InputError("proxy_split: rho must be > 0");
    audit_windows(normal_windows);

    // One AE over the full normal data (monolithic view) scores every window.
    std::vector<std::vector<double>> vectors;
    vectors.reserve(normal_windows.size());
    for (const pipeline::Window& w : normal_windows)
        vectors.push_back(pipeline::monolithic_vector(w).channels.front());
    const pipeline::Scaler scaler = pipeline::fit_scaler(vectors);
    for (auto& v : vectors) v = pipeline::apply_scaler(scaler, v);

    const auto specs = nn::standard_specs(vectors.front().size(), arch, hidden_units);
    const nn::AEModel model =
        nn::train(nn::init_model(specs, arch, train_cfg.seed), vectors, train_cfg);
    std::vector<double> errors;
    errors.reserve(vectors.size());
    for (const auto& v : vectors) errors.push_back(nn::reconstruction_error(model, v));

    const std::vector<bool> mask = threshold::iqr_outlier_mask(errors, rho);
    ProxySplit split;
    for (std::size_t i = 0; i < normal_windows.size(); ++i) {
        if (mask[i]) split.proxy_falls.push_back(normal_windows[i]);
        else split.nonfalls.push_back(normal_windows[i]);
    }
    return split;
}

SelectionResult tune_omega(const ProxySplit& split, const SelectionConfig& cfg,
                           const MethodConfig& method) {
    cfg.validate();
    if (!threshold::kind_uses_omega(method.kind) || method.ocnn)
        throw ConfigError("tune_omega applies to RRE/IRE only");
    if (split.nonfalls.empty()) throw SelectionError("tune_omega: no non-fall windows");
    if (split.proxy_falls.empty())
        throw SelectionError(
            "tune_omega: no proxy falls were rejected; use a smaller rho");
    audit_windows(split.nonfalls);
    audit_windows(split.proxy_falls);
    if (cfg.k_folds > split.proxy_falls.size() || cfg.k_folds > split.nonfalls.size())
        throw SelectionError("tune_omega: not enough windows to fill " +
                             std::to_string(cfg.k_folds) + " folds");

    std::mt19937_64 rng(cfg.seed);
    const auto nonfall_folds = make_folds(split.nonfalls.size(), cfg.k_folds, rng);
    const auto proxy_folds = make_folds(split.proxy_falls.size(), cfg.k_folds, rng);

    std::vector<double> grid = cfg.omega_grid;
    std::sort(grid.begin(), grid.end());
    std::vector<double> gmean_sum(grid.size(), 0.0);

    for (std::size_t fold = 0; fold < cfg.k_folds; ++fold) {
        std::vector<pipeline::Window> train_windows;
        for (std::size_t other = 0; other < cfg.k_folds; ++other) {
            if (other == fold) continue;
            for (std::size_t idx : nonfall_folds[other])
                train_windows.push_back(split.nonfalls[idx]);
        }
        std::vector<pipeline::Window> test_negatives, test_positives;
        for (std::size_t idx : nonfall_folds[fold])
            test_negatives.push_back(split.nonfalls[idx]);
        for (std::size_t idx : proxy_folds[fold])
            test_positives.push_back(split.proxy_falls[idx]);

        const auto members = train_members(train_windows, method);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const auto detector = detector_for_omega(members, method, grid[g]);
            gmean_sum[g] +=
                evaluate_detector(detector, test_negatives, test_positives).gmean;
        }
    }

    SelectionResult result;
    double best = -1.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double mean = gmean_sum[g] / static_cast<double>(cfg.k_folds);
        result.cv_gmean.emplace_back(grid[g], mean);
        if (mean > best) {  // strict: ties keep the smaller omega
            best = mean;
            result.best_omega = grid[g];
        }
    }
    return result;
}

ensemble::Detector fit_final_detector(const std::vector<pipeline::Window>& nonfalls,
                                      double best_omega, const MethodConfig& method) {
    if (nonfalls.empty()) throw InputError("fit_final_detector: no non-fall windows");
    audit_windows(nonfalls);
    ensemble::BuildConfig build;
    build.arch = method.arch;
    build.threshold_kind = method.kind;
    build.omega = best_omega;
    build.train = method.train;
    build.hidden_units = method.hidden_units;
    return ensemble::build_detector(nonfalls, method.view, build);
}

LoocvReport loocv(const std::vector<pipeline::SensorRecording>& dataset,
                  const pipeline::LabelMap& labels, const PipelineConfig& cfg,
                  std::size_t jobs) {
    cfg.sel.validate();
    std::vector<std::string> subjects;
    std::map<std::string, std::vector<pipeline::Window>> windows_by_subject;
    for (const auto& rec : dataset) {
        auto windows = pipeline::slide_windows(rec, cfg.window, labels);
        auto& dest = windows_by_subject[rec.subject_id];
        if (dest.empty()) subjects.push_back(rec.subject_id);
        dest.insert(dest.end(), windows.begin(), windows.end());
    }
    if (subjects.size() < 2) throw ConfigError("loocv needs at least 2 subjects");

    struct FoldOutcome {
        bool evaluated = false;
        std::string skip_reason;
        FoldResult result;
    };
    std::vector<FoldOutcome> outcomes(subjects.size());

    parallel_for(subjects.size(), jobs, [&](std::size_t si) {
        const std::string& subject = subjects[si];
        FoldOutcome& outcome = outcomes[si];
        const auto& test_windows = windows_by_subject[subject];
        std::size_t test_falls = 0;
        for (const auto& w : test_windows)
            if (w.label == pipeline::WindowLabel::Fall) ++test_falls;
        if (test_falls == 0) {
            outcome.skip_reason = "no fall windows for the held-out subject";
            return;
        }
        if (test_falls == test_windows.size()) {
            outcome.skip_reason = "no normal windows for the held-out subject";
            return;
        }

        // Only normal activities from the other subjects are used for training.
        std::vector<pipeline::Window> train_normals;
        for (const std::string& other : subjects) {
            if (other == subject) continue;
            for (const auto& w : windows_by_subject[other])
                if (w.label == pipeline::WindowLabel::Normal)
                    train_normals.push_back(w);
        }
        if (train_normals.empty()) {
            outcome.skip_reason = "no normal training windows";
            return;
        }

        const ProxySplit split = proxy_split(train_normals, cfg.sel.rho,
                                             cfg.method.arch, cfg.method.train,
                                             cfg.method.hidden_units);
        if (split.nonfalls.empty())
            throw SelectionError("loocv: every training window was rejected; "
                                 "increase rho");

        std::vector<pipeline::WindowLabel> predictions, truth;
        std::optional<double> chosen_omega;
        if (cfg.method.ocnn) {
            audit_windows(split.nonfalls);
            std::vector<std::vector<double>> vectors;
            for (const auto& w : split.nonfalls)
                vectors.push_back(pipeline::monolithic_vector(w).channels.front());
            pipeline::Scaler scaler = pipeline::fit_scaler(vectors);
            for (auto& v : vectors) v = pipeline::apply_scaler(scaler, v);
            const auto specs = nn::standard_specs(
                vectors.front().size(), cfg.method.arch, cfg.method.hidden_units);
            auto encoder = std::make_shared<nn::AEModel>(
                nn::train(nn::init_model(specs, cfg.method.arch, cfg.method.train.seed),
                          vectors, cfg.method.train));
            const auto model =
                ocnn::fit_ocnn(std::move(encoder), std::move(scaler), vectors);
            for (const auto& w : test_windows) {
                predictions.push_back(ocnn::ocnn_classify_raw(
                    model, pipeline::monolithic_vector(w).channels.front()));
                truth.push_back(w.label);
            }
        } else {
            double omega = 0.0;
            if (threshold::kind_uses_omega(cfg.method.kind)) {
                const SelectionResult tuned = tune_omega(split, cfg.sel, cfg.method);
                omega = tuned.best_omega;
                chosen_omega = omega;
            }
            const ensemble::Detector detector =
                fit_final_detector(split.nonfalls, omega, cfg.method);
            for (const auto& w : test_windows) {
                predictions.push_back(ensemble::detect(detector, w).verdict);
                truth.push_back(w.label);
            }
        }

        outcome.evaluated = true;
        outcome.result.subject = subject;
        outcome.result.metrics = metrics::gmean(metrics::confusion(predictions, truth));
        outcome.result.omega = chosen_omega;
    });

    LoocvReport report;
    for (std::size_t si = 0; si < subjects.size(); ++si) {
        if (outcomes[si].evaluated) report.folds.push_back(outcomes[si].result);
        else report.skipped.push_back(subjects[si] + ": " + outcomes[si].skip_reason);
    }
    if (report.folds.empty())
        throw SelectionError("loocv: no subject had both fall and normal windows");
    for (const FoldResult& f : report.folds) {
        report.mean_tpr += f.metrics.tpr;
        report.mean_fpr += f.metrics.fpr;
        report.mean_gmean += f.metrics.gmean;
    }
    const double n = static_cast<double>(report.folds.size());
    report.mean_tpr /= n;
    report.mean_fpr /= n;
    report.mean_gmean /= n;
    report.gmean_of_means = std::sqrt(report.mean_tpr * (1.0 - report.mean_fpr));
    return report;
}

std::vector<metrics::ResultRow> loocv_rows(const LoocvReport& report,
                                           const PipelineConfig& cfg) {
    std::vector<metrics::ResultRow> rows;
    const std::string method = cfg.method.method_name();
    const std::string arch = cfg.method.arch == nn::Arch::AE ? "ae" : "sae";
    const std::string view = pipeline::view_name(cfg.method.view);
    for (const FoldResult& f : report.folds) {
        metrics::ResultRow row;
        row.method = method;
        row.arch = arch;
        row.view = view;
        row.rho = cfg.sel.rho;
        row.omega = f.omega;
        row.fold = f.subject;
        row.tpr = f.metrics.tpr;
        row.fpr = f.metrics.fpr;
        row.gmean = f.metrics.gmean;
        rows.push_back(std::move(row));
    }
    metrics::ResultRow mean;
    mean.method = method;
    mean.arch = arch;
    mean.view = view;
    mean.rho = cfg.sel.rho;
    mean.fold = "mean";
    mean.tpr = report.mean_tpr;
    mean.fpr = report.mean_fpr;
    mean.gmean = report.mean_gmean;
    rows.push_back(std::move(mean));
    return rows;
}

std::vector<metrics::ResultRow> rho_sweep(
    const std::vector<pipeline::SensorRecording>& dataset,
    const pipeline::LabelMap& labels, const PipelineConfig& cfg,
    const std::vector<double>& rho_grid, std::size_t jobs) {
    if (rho_grid.empty()) throw ConfigError("rho grid is empty");
    std::vector<metrics::ResultRow> rows;
    for (double rho : rho_grid) {
        PipelineConfig point = cfg;
        point.sel.rho = rho;
        const LoocvReport report = loocv(dataset, labels, point, jobs);
        const auto point_rows = loocv_rows(report, point);
        rows.insert(rows.end(), point_rows.begin(), point_rows.end());
    }
    return rows;
}

}  // namespace falldet::selection
