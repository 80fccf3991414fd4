#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "falldet/common.hpp"

namespace falldet::nn {

enum class Activation { Sigmoid, Linear };

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::Sigmoid;
};

enum class Arch { AE, SAE };

// One dense layer; weights are row-major out_dim x in_dim.
struct Layer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::Sigmoid;
    std::vector<double> weights;
    std::vector<double> bias;
};

struct AEModel {
    Arch arch = Arch::AE;
    std::vector<Layer> layers;

    std::size_t input_dim() const { return layers.front().in_dim; }
    std::size_t output_dim() const { return layers.back().out_dim; }
    // Index of the narrowest (deepest) hidden layer in a mirrored stack.
    std::size_t bottleneck_layer() const { return layers.size() / 2 - 1; }
    std::vector<std::size_t> dims() const;
};

struct TrainConfig {
    std::size_t epochs = 10;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    double sparsity_target = 0.05;
    double sparsity_weight = 1.0;
    double l2_weight = 0.001;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ForwardResult {
    std::vector<std::vector<double>> hidden;  // one entry per hidden layer
    std::vector<double> output;
};

struct Gradients {
    // Parallel to AEModel::layers.
    std::vector<std::vector<double>> weight_grads;
    std::vector<std::vector<double>> bias_grads;
};

using Batch = std::vector<std::vector<double>>;

double sigmoid(double z);

// Uniform weights in +-1/sqrt(in_dim), zero biases, deterministic in seed.
AEModel init_model(const std::vector<LayerSpec>& specs, Arch arch, std::uint64_t seed);

ForwardResult forward(const AEModel& model, std::span<const double> x);

// Squared Euclidean distance between x and its reconstruction.
double reconstruction_error(const AEModel& model, std::span<const double> x);

// Mean squared reconstruction error + KL sparsity penalty + L2 weight decay.
double batch_loss(const AEModel& model, const Batch& batch, const TrainConfig& cfg);

Gradients backprop_gradients(const AEModel& model, const Batch& batch, const TrainConfig& cfg);

// Mini-batch gradient descent with a seeded per-epoch shuffle.
AEModel train(AEModel model, const Batch& data, const TrainConfig& cfg);

// Max relative error between analytic and central-difference gradients.
double gradient_check(const AEModel& model, const Batch& batch, const TrainConfig& cfg,
                      double eps);

// Standard layer layouts: AE d->31->d, SAE d->d/2->31->d/2->d.
std::vector<LayerSpec> standard_specs(std::size_t input_dim, Arch arch,
                                      std::size_t hidden_units = 31);

void save_model(const AEModel& model, const TrainConfig& cfg, std::ostream& out);
AEModel load_model(std::istream& in, TrainConfig* cfg_out = nullptr);

}  // namespace falldet::nn
