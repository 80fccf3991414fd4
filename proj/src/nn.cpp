#include "falldet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace falldet::nn {

namespace {

// mt19937_64 bits mapped to [0,1) directly so streams are reproducible
// independent of the library's distribution implementation.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

constexpr double kActClamp = 1e-12;

double activate(double z, Activation act) {
    return act == Activation::Sigmoid ? sigmoid(z) : z;
}

double activate_deriv(double a, Activation act) {
    return act == Activation::Sigmoid ? a * (1.0 - a) : 1.0;
}

void check_input_dim(const AEModel& model, std::span<const double> x) {
    if (x.size() != model.input_dim()) {
        throw InputError("input length " + std::to_string(x.size()) +
                         " does not match model input dimension " +
                         std::to_string(model.input_dim()));
    }
}

void check_batch(const AEModel& model, const Batch& batch) {
    if (batch.empty()) throw InputError("empty batch");
    for (const auto& x : batch) check_input_dim(model, x);
}

// Activations of every layer for every sample: acts[l][s] is the output of
// layer l for sample s.
std::vector<std::vector<std::vector<double>>> forward_all(const AEModel& model,
                                                          const Batch& batch) {
    std::vector<std::vector<std::vector<double>>> acts(model.layers.size());
    for (std::size_t l = 0; l < model.layers.size(); ++l)
        acts[l].resize(batch.size());
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const std::vector<double>* cur = &batch[s];
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            const Layer& layer = model.layers[l];
            std::vector<double> out(layer.out_dim);
            for (std::size_t i = 0; i < layer.out_dim; ++i) {
                double z = layer.bias[i];
                const double* w = &layer.weights[i * layer.in_dim];
                for (std::size_t j = 0; j < layer.in_dim; ++j) z += w[j] * (*cur)[j];
                out[i] = activate(z, layer.activation);
            }
            acts[l][s] = std::move(out);
            cur = &acts[l][s];
        }
    }
    return acts;
}

// Mean activation per unit for each hidden layer (empty vector for layers the
// sparsity penalty does not apply to).
std::vector<std::vector<double>> mean_hidden_activations(
    const AEModel& model, const std::vector<std::vector<std::vector<double>>>& acts,
    std::size_t batch_size) {
    std::vector<std::vector<double>> means(model.layers.size());
    for (std::size_t l = 0; l + 1 < model.layers.size(); ++l) {
        if (model.layers[l].activation != Activation::Sigmoid) continue;
        std::vector<double> m(model.layers[l].out_dim, 0.0);
        for (std::size_t s = 0; s < batch_size; ++s)
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += acts[l][s][i];
        for (double& v : m) v /= static_cast<double>(batch_size);
        means[l] = std::move(m);
    }
    return means;
}

double kl_bernoulli(double p, double q) {
    q = std::clamp(q, kActClamp, 1.0 - kActClamp);
    double term = 0.0;
    if (p > 0.0) term += p * std::log(p / q);
    if (p < 1.0) term += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
    return term;
}

}  // namespace

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<std::size_t> AEModel::dims() const {
    std::vector<std::size_t> d;
    d.push_back(layers.front().in_dim);
    for (const Layer& l : layers) d.push_back(l.out_dim);
    return d;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(sparsity_target > 0.0 && sparsity_target < 1.0))
        throw ConfigError("sparsity_target must be in (0,1)");
    if (sparsity_weight < 0.0) throw ConfigError("sparsity_weight must be >= 0");
    if (l2_weight < 0.0) throw ConfigError("l2_weight must be >= 0");
}

AEModel init_model(const std::vector<LayerSpec>& specs, Arch arch, std::uint64_t seed) {
    if (specs.empty()) throw ConfigError("model needs at least one layer");
    for (const LayerSpec& s : specs)
        if (s.in_dim < 1 || s.out_dim < 1)
            throw ConfigError("layer dimensions must be >= 1");
    for (std::size_t i = 0; i + 1 < specs.size(); ++i) {
        if (specs[i].out_dim != specs[i + 1].in_dim)
            throw ConfigError("layer " + std::to_string(i) + " out_dim " +
                              std::to_string(specs[i].out_dim) + " != layer " +
                              std::to_string(i + 1) + " in_dim " +
                              std::to_string(specs[i + 1].in_dim));
    }
    if (specs.back().out_dim != specs.front().in_dim)
        throw ConfigError("reconstruction dimension " + std::to_string(specs.back().out_dim) +
                          " does not match input dimension " +
                          std::to_string(specs.front().in_dim));

    std::mt19937_64 rng(seed);
    AEModel model;
    model.arch = arch;
    for (const LayerSpec& s : specs) {
        Layer layer;
        layer.in_dim = s.in_dim;
        layer.out_dim = s.out_dim;
        layer.activation = s.activation;
        layer.weights.resize(s.in_dim * s.out_dim);
        layer.bias.assign(s.out_dim, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(s.in_dim));
        for (double& w : layer.weights) w = (2.0 * next_unit(rng) - 1.0) * scale;
        model.layers.push_back(std::move(layer));
    }
    return model;
}

ForwardResult forward(const AEModel& model, std::span<const double> x) {
    check_input_dim(model, x);
    ForwardResult result;
    std::vector<double> cur(x.begin(), x.end());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const Layer& layer = model.layers[l];
        std::vector<double> out(layer.out_dim);
        for (std::size_t i = 0; i < layer.out_dim; ++i) {
            double z = layer.bias[i];
            const double* w = &layer.weights[i * layer.in_dim];
            for (std::size_t j = 0; j < layer.in_dim; ++j) z += w[j] * cur[j];
            out[i] = activate(z, layer.activation);
        }
        if (l + 1 < model.layers.size()) result.hidden.push_back(out);
        cur = std::move(out);
    }
    result.output = std::move(cur);
    return result;
}

double reconstruction_error(const AEModel& model, std::span<const double> x) {
    ForwardResult fr = forward(model, x);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - fr.output[i];
        err += d * d;
    }
    return err;
}

double batch_loss(const AEModel& model, const Batch& batch, const TrainConfig& cfg) {
    check_batch(model, batch);
    const auto acts = forward_all(model, batch);
    const std::size_t m = batch.size();
    const std::size_t last = model.layers.size() - 1;

    double recon = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
        const auto& y = acts[last][s];
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = batch[s][i] - y[i];
            recon += d * d;
        }
    }
    recon /= static_cast<double>(m);

    double sparsity = 0.0;
    if (cfg.sparsity_weight > 0.0) {
        const auto means = mean_hidden_activations(model, acts, m);
        for (const auto& layer_means : means)
            for (double q : layer_means) sparsity += kl_bernoulli(cfg.sparsity_target, q);
    }

    double l2 = 0.0;
    if (cfg.l2_weight > 0.0) {
        for (const Layer& layer : model.layers)
            for (double w : layer.weights) l2 += w * w;
    }

    return recon + cfg.sparsity_weight * sparsity + cfg.l2_weight * l2;
}

Gradients backprop_gradients(const AEModel& model, const Batch& batch,
                             const TrainConfig& cfg) {
    check_batch(model, batch);
    const auto acts = forward_all(model, batch);
    const std::size_t m = batch.size();
    const std::size_t n_layers = model.layers.size();
    const double inv_m = 1.0 / static_cast<double>(m);

    Gradients grads;
    grads.weight_grads.resize(n_layers);
    grads.bias_grads.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        grads.weight_grads[l].assign(model.layers[l].weights.size(), 0.0);
        grads.bias_grads[l].assign(model.layers[l].bias.size(), 0.0);
    }

    // d(sparsity penalty)/d(mean activation) per hidden unit; shared by all
    // samples since the mean couples the batch.
    std::vector<std::vector<double>> sparsity_grad(n_layers);
    if (cfg.sparsity_weight > 0.0) {
        const auto means = mean_hidden_activations(model, acts, m);
        for (std::size_t l = 0; l + 1 < n_layers; ++l) {
            if (means[l].empty()) continue;
            sparsity_grad[l].resize(means[l].size());
            for (std::size_t i = 0; i < means[l].size(); ++i) {
                const double q = std::clamp(means[l][i], kActClamp, 1.0 - kActClamp);
                sparsity_grad[l][i] =
                    cfg.sparsity_weight *
                    (-cfg.sparsity_target / q + (1.0 - cfg.sparsity_target) / (1.0 - q));
            }
        }
    }

    std::vector<double> delta, next_delta;
    for (std::size_t s = 0; s < m; ++s) {
        const auto& y = acts[n_layers - 1][s];
        delta.resize(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double dLda = 2.0 * (y[i] - batch[s][i]) * inv_m;
            delta[i] = dLda * activate_deriv(y[i], model.layers[n_layers - 1].activation);
        }
        for (std::size_t li = n_layers; li-- > 0;) {
            const Layer& layer = model.layers[li];
            const std::vector<double>& input =
                li == 0 ? batch[s] : acts[li - 1][s];
            auto& wg = grads.weight_grads[li];
            auto& bg = grads.bias_grads[li];
            for (std::size_t i = 0; i < layer.out_dim; ++i) {
                bg[i] += delta[i];
                double* row = &wg[i * layer.in_dim];
                for (std::size_t j = 0; j < layer.in_dim; ++j)
                    row[j] += delta[i] * input[j];
            }
            if (li == 0) break;
            next_delta.assign(layer.in_dim, 0.0);
            for (std::size_t i = 0; i < layer.out_dim; ++i) {
                const double* w = &layer.weights[i * layer.in_dim];
                for (std::size_t j = 0; j < layer.in_dim; ++j)
                    next_delta[j] += w[j] * delta[i];
            }
            // Entering hidden layer li-1: add the sparsity term and apply the
            // activation derivative.
            const auto& prev_act = acts[li - 1][s];
            if (!sparsity_grad[li - 1].empty()) {
                for (std::size_t j = 0; j < next_delta.size(); ++j)
                    next_delta[j] += sparsity_grad[li - 1][j] * inv_m;
            }
            for (std::size_t j = 0; j < next_delta.size(); ++j)
                next_delta[j] *=
                    activate_deriv(prev_act[j], model.layers[li - 1].activation);
            delta = next_delta;
        }
    }

    if (cfg.l2_weight > 0.0) {
        for (std::size_t l = 0; l < n_layers; ++l)
            for (std::size_t k = 0; k < model.layers[l].weights.size(); ++k)
                grads.weight_grads[l][k] += 2.0 * cfg.l2_weight * model.layers[l].weights[k];
    }
    return grads;
}

AEModel train(AEModel model, const Batch& data, const TrainConfig& cfg) {
    cfg.validate();
    check_batch(model, data);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    Batch batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with raw generator draws; keeps shuffles reproducible.
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(order[i - 1], order[j]);
        }
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
            const Gradients g = backprop_gradients(model, batch, cfg);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto& layer = model.layers[l];
                for (std::size_t k = 0; k < layer.weights.size(); ++k)
                    layer.weights[k] -= cfg.learning_rate * g.weight_grads[l][k];
                for (std::size_t k = 0; k < layer.bias.size(); ++k)
                    layer.bias[k] -= cfg.learning_rate * g.bias_grads[l][k];
            }
        }
    }
    return model;
}

double gradient_check(const AEModel& model, const Batch& batch, const TrainConfig& cfg,
                      double eps) {
    if (!(eps > 0.0)) throw InputError("eps must be > 0");
    const Gradients analytic = backprop_gradients(model, batch, cfg);

    AEModel probe = model;
    double max_rel = 0.0;
    auto probe_param = [&](double& param, double analytic_grad) {
        const double saved = param;
        param = saved + eps;
        const double plus = batch_loss(probe, batch, cfg);
        param = saved - eps;
        const double minus = batch_loss(probe, batch, cfg);
        param = saved;
        const double numeric = (plus - minus) / (2.0 * eps);
        const double denom = std::max(1e-12, std::abs(analytic_grad) + std::abs(numeric));
        max_rel = std::max(max_rel, std::abs(analytic_grad - numeric) / denom);
    };
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        for (std::size_t k = 0; k < probe.layers[l].weights.size(); ++k)
            probe_param(probe.layers[l].weights[k], analytic.weight_grads[l][k]);
        for (std::size_t k = 0; k < probe.layers[l].bias.size(); ++k)
            probe_param(probe.layers[l].bias[k], analytic.bias_grads[l][k]);
    }
    return max_rel;
}

std::vector<LayerSpec> standard_specs(std::size_t input_dim, Arch arch,
                                      std::size_t hidden_units) {
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    std::vector<LayerSpec> specs;
    if (arch == Arch::AE) {
        specs.push_back({input_dim, hidden_units, Activation::Sigmoid});
        specs.push_back({hidden_units, input_dim, Activation::Sigmoid});
    } else {
        const std::size_t mid = input_dim / 2;
        if (mid <= hidden_units)
            throw ConfigError("input too small for the stacked layout");
        specs.push_back({input_dim, mid, Activation::Sigmoid});
        specs.push_back({mid, hidden_units, Activation::Sigmoid});
        specs.push_back({hidden_units, mid, Activation::Sigmoid});
        specs.push_back({mid, input_dim, Activation::Sigmoid});
    }
    return specs;
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* act_name(Activation a) {
    return a == Activation::Sigmoid ? "sigmoid" : "linear";
}

Activation act_from_name(const std::string& name) {
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "linear") return Activation::Linear;
    throw DataError("unknown activation '" + name + "'");
}

}  // namespace

void save_model(const AEModel& model, const TrainConfig& cfg, std::ostream& out) {
    out << "falldet-model 1\n";
    out << "arch " << (model.arch == Arch::AE ? "ae" : "sae") << "\n";
    out << "layers " << model.layers.size() << "\n";
    for (const Layer& layer : model.layers) {
        out << "layer " << layer.in_dim << " " << layer.out_dim << " "
            << act_name(layer.activation) << "\n";
        out << "W";
        for (double w : layer.weights) out << " " << fmt17(w);
        out << "\nb";
        for (double b : layer.bias) out << " " << fmt17(b);
        out << "\n";
    }
    out << "train " << cfg.epochs << " " << fmt17(cfg.learning_rate) << " "
        << cfg.batch_size << " " << fmt17(cfg.sparsity_target) << " "
        << fmt17(cfg.sparsity_weight) << " " << fmt17(cfg.l2_weight) << " " << cfg.seed
        << "\n";
    out << "end-model\n";
}

AEModel load_model(std::istream& in, TrainConfig* cfg_out) {
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "falldet-model" || version != 1)
        throw DataError("not a falldet model stream");
    AEModel model;
    std::string arch;
    in >> tag >> arch;
    if (tag != "arch") throw DataError("model stream: expected arch");
    if (arch == "ae") model.arch = Arch::AE;
    else if (arch == "sae") model.arch = Arch::SAE;
    else throw DataError("unknown arch '" + arch + "'");
    std::size_t n_layers = 0;
    in >> tag >> n_layers;
    if (tag != "layers") throw DataError("model stream: expected layers");
    for (std::size_t l = 0; l < n_layers; ++l) {
        Layer layer;
        std::string act;
        in >> tag >> layer.in_dim >> layer.out_dim >> act;
        if (tag != "layer") throw DataError("model stream: expected layer");
        layer.activation = act_from_name(act);
        layer.weights.resize(layer.in_dim * layer.out_dim);
        layer.bias.resize(layer.out_dim);
        in >> tag;
        if (tag != "W") throw DataError("model stream: expected W");
        for (double& w : layer.weights) in >> w;
        in >> tag;
        if (tag != "b") throw DataError("model stream: expected b");
        for (double& b : layer.bias) in >> b;
        model.layers.push_back(std::move(layer));
    }
    TrainConfig cfg;
    in >> tag >> cfg.epochs >> cfg.learning_rate >> cfg.batch_size >>
        cfg.sparsity_target >> cfg.sparsity_weight >> cfg.l2_weight >> cfg.seed;
    if (tag != "train") throw DataError("model stream: expected train");
    in >> tag;
    if (tag != "end-model") throw DataError("model stream: missing end-model");
    if (!in) throw DataError("truncated model stream");
    if (cfg_out) *cfg_out = cfg;
    return model;
}

}  // namespace falldet::nn
