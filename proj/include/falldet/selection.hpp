#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "falldet/ensemble.hpp"
#include "falldet/metrics.hpp"
#include "falldet/nn.hpp"
#include "falldet/ocnn.hpp"
#include "falldet/pipeline.hpp"
#include "falldet/threshold.hpp"

namespace falldet::selection {

std::vector<double> default_grid();

struct SelectionConfig {
    double rho = 1.5;
    std::vector<double> omega_grid = default_grid();
    std::size_t k_folds = 3;
    std::vector<double> rho_grid = default_grid();
    std::uint64_t seed = 0;

    void validate() const;
};

// One detector configuration under evaluation. When `ocnn` is set the
// threshold kind is ignored and the one-class nearest-neighbour baseline runs
// on monolithic bottleneck features instead.
struct MethodConfig {
    pipeline::ViewKind view = pipeline::ViewKind::SixRaw;
    nn::Arch arch = nn::Arch::AE;
    threshold::ThresholdKind kind = threshold::ThresholdKind::RRE;
    bool ocnn = false;
    std::size_t hidden_units = 31;
    nn::TrainConfig train;

    std::string method_name() const;
};

struct PipelineConfig {
    MethodConfig method;
    pipeline::WindowConfig window;
    SelectionConfig sel;
};

// Observation hook for every window entering proxy_split, tune_omega, or the
// final threshold fit; used to audit that no real fall ever reaches them.
using AuditHook = std::function<void(const pipeline::Window&)>;
void set_audit_hook(AuditHook hook);

struct ProxySplit {
    std::vector<pipeline::Window> nonfalls;
    std::vector<pipeline::Window> proxy_falls;
};

// Trains an autoencoder on the full normal data and rejects the windows whose
// reconstruction error falls outside the rho IQR fence as proxy falls.
ProxySplit proxy_split(const std::vector<pipeline::Window>& normal_windows, double rho,
                       nn::Arch arch, const nn::TrainConfig& train_cfg,
                       std::size_t hidden_units = 31);

struct SelectionResult {
    double best_omega = 0.0;
    // (omega, mean gmean over folds), in ascending omega order.
    std::vector<std::pair<double, double>> cv_gmean;
};

// K-fold cross-validation of the omega grid on the proxy split; ties go to
// the smaller omega.
SelectionResult tune_omega(const ProxySplit& split, const SelectionConfig& cfg,
                           const MethodConfig& method);

// Retrains on the non-falls and fits the configured threshold at best_omega.
ensemble::Detector fit_final_detector(const std::vector<pipeline::Window>& nonfalls,
                                      double best_omega, const MethodConfig& method);

struct FoldResult {
    std::string subject;
    metrics::EvalMetrics metrics;
    std::optional<double> omega;  // tuned omega for RRE/IRE
};

struct LoocvReport {
    std::vector<FoldResult> folds;
    std::vector<std::string> skipped;  // "subject: reason"
    double mean_tpr = 0.0;
    double mean_fpr = 0.0;
    double mean_gmean = 0.0;      // mean of per-fold gmeans
    double gmean_of_means = 0.0;  // sqrt(mean TPR * (1 - mean FPR))
};

LoocvReport loocv(const std::vector<pipeline::SensorRecording>& dataset,
                  const pipeline::LabelMap& labels, const PipelineConfig& cfg,
                  std::size_t jobs = 1);

std::vector<metrics::ResultRow> loocv_rows(const LoocvReport& report,
                                           const PipelineConfig& cfg);

// One loocv run per rho; emits per-fold rows plus a mean row per rho.
std::vector<metrics::ResultRow> rho_sweep(
    const std::vector<pipeline::SensorRecording>& dataset,
    const pipeline::LabelMap& labels, const PipelineConfig& cfg,
    const std::vector<double>& rho_grid, std::size_t jobs = 1);

}  // namespace falldet::selection
