#include "falldet/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace falldet::threshold {

namespace {

double interpolated_quantile(const std::vector<double>& sorted, double p) {
    const double rank = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::pair<double, double> quartiles(const std::vector<double>& errors) {
    if (errors.empty()) throw InputError("quartiles: empty list");
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    return {interpolated_quantile(sorted, 0.25), interpolated_quantile(sorted, 0.75)};
}

IqrFence iqr_fence(const std::vector<double>& errors, double omega) {
    if (omega < 0.0) throw InputError("omega must be >= 0");
    const auto [q1, q3] = quartiles(errors);
    return IqrFence{q1, q3, q3 - q1, omega};
}

std::vector<bool> iqr_outlier_mask(const std::vector<double>& errors, double omega) {
    const IqrFence fence = iqr_fence(errors, omega);
    std::vector<bool> mask(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i)
        mask[i] = errors[i] > fence.upper() || errors[i] < fence.lower();
    return mask;
}

ThresholdModel max_re(const std::vector<double>& errors) {
    if (errors.empty()) throw InputError("max_re: empty list");
    ThresholdModel t;
    t.kind = ThresholdKind::MaxRE;
    t.value = *std::max_element(errors.begin(), errors.end());
    return t;
}

ThresholdModel std_re(const std::vector<double>& errors) {
    if (errors.empty()) throw InputError("std_re: empty list");
    const double m = static_cast<double>(errors.size());
    const double mean = std::accumulate(errors.begin(), errors.end(), 0.0) / m;
    double sd = 0.0;
    if (errors.size() > 1) {
        double ss = 0.0;
        for (double e : errors) ss += (e - mean) * (e - mean);
        sd = std::sqrt(ss / (m - 1.0));
    }
    ThresholdModel t;
    t.kind = ThresholdKind::StdRE;
    t.value = mean + 3.0 * sd;
    return t;
}

ThresholdModel rre(const std::vector<double>& errors, double omega) {
    const IqrFence fence = iqr_fence(errors, omega);
    double best = -std::numeric_limits<double>::infinity();
    for (double e : errors)
        if (!(e > fence.upper() || e < fence.lower())) best = std::max(best, e);
    ThresholdModel t;
    t.kind = ThresholdKind::RRE;
    t.omega = omega;
    t.value = std::isfinite(best) ? best : fence.upper();
    return t;
}

ThresholdModel ire(const std::vector<std::vector<double>>& train_vectors, double omega,
                   const std::vector<nn::LayerSpec>& ae_spec, nn::Arch arch,
                   const nn::TrainConfig& train_cfg) {
    if (train_vectors.empty()) throw InputError("ire: empty training set");
    const nn::AEModel stage_a =
        nn::train(nn::init_model(ae_spec, arch, train_cfg.seed), train_vectors, train_cfg);
    std::vector<double> errors;
    errors.reserve(train_vectors.size());
    for (const auto& x : train_vectors)
        errors.push_back(nn::reconstruction_error(stage_a, x));
    return ire_from_stage_a(train_vectors, errors, omega, ae_spec, arch, train_cfg);
}

ThresholdModel ire_from_stage_a(const std::vector<std::vector<double>>& train_vectors,
                                const std::vector<double>& stage_a_errors, double omega,
                                const std::vector<nn::LayerSpec>& ae_spec, nn::Arch arch,
                                const nn::TrainConfig& train_cfg) {
    if (train_vectors.size() != stage_a_errors.size())
        throw InputError("ire: errors/vectors length mismatch");
    const std::vector<bool> mask = iqr_outlier_mask(stage_a_errors, omega);
    std::vector<std::vector<double>> inliers;
    for (std::size_t i = 0; i < train_vectors.size(); ++i)
        if (!mask[i]) inliers.push_back(train_vectors[i]);
    if (inliers.empty())
        throw SelectionError("ire: every training vector was rejected as an outlier");

    // Same spec and seed as stage A so only the inlier filtering differs.
    nn::AEModel stage_b =
        nn::train(nn::init_model(ae_spec, arch, train_cfg.seed), inliers, train_cfg);
    double value = 0.0;
    for (const auto& x : inliers)
        value = std::max(value, nn::reconstruction_error(stage_b, x));

    ThresholdModel t;
    t.kind = ThresholdKind::IRE;
    t.omega = omega;
    t.value = value;
    t.model = std::make_shared<nn::AEModel>(std::move(stage_b));
    return t;
}

pipeline::WindowLabel classify(const ThresholdModel& threshold,
                               const std::vector<double>& x) {
    if (!threshold.model) throw ConfigError("classify: threshold has no model attached");
    const double err = nn::reconstruction_error(*threshold.model, x);
    return err > threshold.value ? pipeline::WindowLabel::Fall
                                 : pipeline::WindowLabel::Normal;
}

const char* kind_name(ThresholdKind kind) {
    switch (kind) {
        case ThresholdKind::MaxRE: return "maxre";
        case ThresholdKind::StdRE: return "stdre";
        case ThresholdKind::RRE: return "rre";
        case ThresholdKind::IRE: return "ire";
    }
    return "?";
}

ThresholdKind kind_from_name(const std::string& name) {
    if (name == "maxre") return ThresholdKind::MaxRE;
    if (name == "stdre") return ThresholdKind::StdRE;
    if (name == "rre") return ThresholdKind::RRE;
    if (name == "ire") return ThresholdKind::IRE;
    throw ConfigError("unknown threshold kind '" + name + "'");
}

bool kind_uses_omega(ThresholdKind kind) {
    return kind == ThresholdKind::RRE || kind == ThresholdKind::IRE;
}

}  // namespace falldet::threshold
