#include "falldet/ocnn.hpp"

#include <cmath>
#include <limits>

namespace falldet::ocnn {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

// Nearest point to `x` among train_features, optionally excluding one index.
std::pair<std::size_t, double> nearest(const std::vector<std::vector<double>>& points,
                                       const std::vector<double>& x,
                                       std::size_t exclude) {
    std::size_t best = points.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i == exclude) continue;
        const double d = sq_dist(points[i], x);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return {best, std::sqrt(best_d)};
}

}  // namespace

std::vector<double> encode(const nn::AEModel& encoder, const std::vector<double>& x) {
    const nn::ForwardResult fr = nn::forward(encoder, x);
    return fr.hidden[encoder.bottleneck_layer()];
}

OcnnModel fit_ocnn(std::shared_ptr<const nn::AEModel> encoder, pipeline::Scaler scaler,
                   const std::vector<std::vector<double>>& scaled_train_vectors,
                   double ratio_threshold) {
    if (scaled_train_vectors.size() < 2)
        throw ConfigError("ocnn needs at least 2 training points");
    if (!(ratio_threshold > 0.0)) throw ConfigError("ratio_threshold must be > 0");
    OcnnModel model;
    model.scaler = std::move(scaler);
    model.ratio_threshold = ratio_threshold;
    model.train_features.reserve(scaled_train_vectors.size());
    for (const auto& x : scaled_train_vectors)
        model.train_features.push_back(encode(*encoder, x));
    model.encoder = std::move(encoder);
    return model;
}

pipeline::WindowLabel ocnn_classify(const OcnnModel& model,
                                    const std::vector<double>& feature) {
    if (model.train_features.size() < 2)
        throw ConfigError("ocnn needs at least 2 training points");
    if (feature.size() != model.train_features.front().size())
        throw InputError("ocnn: feature dimension mismatch");
    const auto [z, d1] = nearest(model.train_features, feature, model.train_features.size());
    const auto [z2, d2] = nearest(model.train_features, model.train_features[z], z);
    (void)z2;
    if (d2 == 0.0)
        return d1 > 0.0 ? pipeline::WindowLabel::Fall : pipeline::WindowLabel::Normal;
    return d1 / d2 > model.ratio_threshold ? pipeline::WindowLabel::Fall
                                           : pipeline::WindowLabel::Normal;
}

pipeline::WindowLabel ocnn_classify_raw(const OcnnModel& model,
                                        const std::vector<double>& raw) {
    const std::vector<double> scaled = pipeline::apply_scaler(model.scaler, raw);
    return ocnn_classify(model, encode(*model.encoder, scaled));
}

}  // namespace falldet::ocnn
