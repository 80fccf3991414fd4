#pragma once

#include <memory>
#include <vector>

#include "falldet/nn.hpp"
#include "falldet/pipeline.hpp"

namespace falldet::ocnn {

// One-class nearest neighbour over autoencoder bottleneck features: a test
// point is an outlier when its nearest-neighbour distance is large relative
// to that neighbour's own nearest-neighbour distance.
struct OcnnModel {
    std::shared_ptr<const nn::AEModel> encoder;
    pipeline::Scaler scaler;
    std::vector<std::vector<double>> train_features;
    double ratio_threshold = 1.0;
};

// Deepest hidden-layer activations (the 31-unit bottleneck for the standard
// layouts); input must already be scaled.
std::vector<double> encode(const nn::AEModel& encoder, const std::vector<double>& x);

OcnnModel fit_ocnn(std::shared_ptr<const nn::AEModel> encoder, pipeline::Scaler scaler,
                   const std::vector<std::vector<double>>& scaled_train_vectors,
                   double ratio_threshold = 1.0);

pipeline::WindowLabel ocnn_classify(const OcnnModel& model,
                                    const std::vector<double>& feature);

// Scales a raw vector, encodes it, and classifies.
pipeline::WindowLabel ocnn_classify_raw(const OcnnModel& model,
                                        const std::vector<double>& raw);

}  // namespace falldet::ocnn
