#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "falldet/nn.hpp"
#include "falldet/pipeline.hpp"

namespace falldet::threshold {

enum class ThresholdKind { MaxRE, StdRE, RRE, IRE };

struct IqrFence {
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double omega = 0.0;

    double upper() const { return q3 + omega * iqr; }
    double lower() const { return q1 - omega * iqr; }
};

// A fitted decision rule. `model` is the autoencoder errors are computed
// against; for IRE this is the model retrained on inliers.
struct ThresholdModel {
    ThresholdKind kind = ThresholdKind::MaxRE;
    double value = 0.0;
    std::optional<double> omega;
    std::shared_ptr<const nn::AEModel> model;
};

// Linear interpolation between order statistics at rank (m-1)p+1.
std::pair<double, double> quartiles(const std::vector<double>& errors);

IqrFence iqr_fence(const std::vector<double>& errors, double omega);

// mask[i] true iff errors[i] lies strictly outside the fence.
std::vector<bool> iqr_outlier_mask(const std::vector<double>& errors, double omega);

ThresholdModel max_re(const std::vector<double>& errors);
// mean + 3 sample standard deviations (denominator m-1; 0 when m = 1).
ThresholdModel std_re(const std::vector<double>& errors);
// Max of the errors surviving IQR rejection; upper fence if all are rejected.
ThresholdModel rre(const std::vector<double>& errors, double omega);

// Train on everything, reject IQR outliers, retrain on the inliers, and take
// the retrained model's max inlier error as the threshold.
ThresholdModel ire(const std::vector<std::vector<double>>& train_vectors, double omega,
                   const std::vector<nn::LayerSpec>& ae_spec, nn::Arch arch,
                   const nn::TrainConfig& train_cfg);

// Second stage of ire for a caller that already trained the stage-A model and
// has its per-vector errors.
ThresholdModel ire_from_stage_a(const std::vector<std::vector<double>>& train_vectors,
                                const std::vector<double>& stage_a_errors, double omega,
                                const std::vector<nn::LayerSpec>& ae_spec, nn::Arch arch,
                                const nn::TrainConfig& train_cfg);

// Fall iff the reconstruction error strictly exceeds the threshold.
pipeline::WindowLabel classify(const ThresholdModel& threshold,
                               const std::vector<double>& x);

const char* kind_name(ThresholdKind kind);
ThresholdKind kind_from_name(const std::string& name);
bool kind_uses_omega(ThresholdKind kind);

}  // namespace falldet::threshold
