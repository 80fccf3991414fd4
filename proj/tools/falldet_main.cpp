#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "falldet/ensemble.hpp"
#include "falldet/metrics.hpp"
#include "falldet/nn.hpp"
#include "falldet/pipeline.hpp"
#include "falldet/selection.hpp"
#include "falldet/threshold.hpp"

namespace fs = std::filesystem;
using namespace falldet;

namespace {

struct CommonOpts {
    std::string data_path;
    std::string labels_path;
    std::string view = "6ce";
    std::string arch = "ae";
    std::string threshold_name = "rre";
    double window_seconds = 1.28;
    double rho = 1.5;
    std::vector<double> omega_grid = selection::default_grid();
    std::vector<double> rho_grid = selection::default_grid();
    std::size_t k_folds = 3;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string out_dir = "out";
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts, bool needs_data) {
    auto* data = cmd->add_option("--data", opts.data_path, "Input sensor CSV");
    auto* labels =
        cmd->add_option("--labels", opts.labels_path, "Label map file (label,normal|fall)");
    if (needs_data) {
        data->required();
        labels->required();
    }
    cmd->add_option("--view", opts.view, "Detector view: monolithic, 6ce, or 2ce")
        ->check(CLI::IsMember({"monolithic", "6ce", "2ce"}))
        ->capture_default_str();
    cmd->add_option("--arch", opts.arch, "Autoencoder depth: ae or sae")
        ->check(CLI::IsMember({"ae", "sae"}))
        ->capture_default_str();
    cmd->add_option("--threshold", opts.threshold_name,
                    "Decision rule: maxre, stdre, rre, ire, or ocnn")
        ->capture_default_str();
    cmd->add_option("--window-seconds", opts.window_seconds, "Sliding window length")
        ->capture_default_str();
    cmd->add_option("--rho", opts.rho, "Proxy-fall rejection rate")
        ->capture_default_str();
    cmd->add_option("--omega-grid", opts.omega_grid, "Omega candidates")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--rho-grid", opts.rho_grid, "Rho candidates for sweeps")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--k-folds", opts.k_folds, "Internal CV folds")
        ->capture_default_str();
    cmd->add_option("--seed", opts.seed, "Base RNG seed")->capture_default_str();
    cmd->add_option("--jobs", opts.jobs, "Max parallel folds")->capture_default_str();
    cmd->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
}

selection::PipelineConfig make_pipeline_config(const CommonOpts& opts) {
    selection::PipelineConfig cfg;
    if (opts.threshold_name == "ocnn") {
        cfg.method.ocnn = true;
        cfg.method.view = pipeline::ViewKind::Monolithic;
    } else {
        cfg.method.kind = threshold::kind_from_name(opts.threshold_name);
        cfg.method.view = pipeline::view_from_name(opts.view);
    }
    cfg.method.arch = opts.arch == "sae" ? nn::Arch::SAE : nn::Arch::AE;
    cfg.method.train.seed = opts.seed;
    cfg.window.window_seconds = opts.window_seconds;
    cfg.sel.rho = opts.rho;
    cfg.sel.omega_grid = opts.omega_grid;
    cfg.sel.rho_grid = opts.rho_grid;
    cfg.sel.k_folds = opts.k_folds;
    cfg.sel.seed = opts.seed;
    return cfg;
}

void print_report(const selection::LoocvReport& report) {
    std::printf("%-10s %8s %8s %8s\n", "fold", "tpr", "fpr", "gmean");
    for (const auto& f : report.folds)
        std::printf("%-10s %8.4f %8.4f %8.4f\n", f.subject.c_str(), f.metrics.tpr,
                    f.metrics.fpr, f.metrics.gmean);
    std::printf("%-10s %8.4f %8.4f %8.4f\n", "mean", report.mean_tpr, report.mean_fpr,
                report.mean_gmean);
    std::printf("gmean of mean rates: %.4f\n", report.gmean_of_means);
    for (const auto& s : report.skipped)
        std::printf("skipped %s\n", s.c_str());
}

int run_synth(const CommonOpts& opts, const pipeline::SynthConfig& synth) {
    const auto recordings = pipeline::generate_synthetic(synth);
    fs::create_directories(opts.out_dir);
    const std::string data_path = (fs::path(opts.out_dir) / "data.csv").string();
    const std::string labels_path = (fs::path(opts.out_dir) / "labels.csv").string();
    pipeline::write_csv(recordings, data_path);
    pipeline::write_label_map(pipeline::synthetic_label_map(), labels_path);
    std::size_t samples = 0, falls = 0;
    for (const auto& rec : recordings) {
        samples += rec.samples.size();
        for (const auto& s : rec.samples)
            if (s.label == "fall") ++falls;
    }
    std::printf("wrote %s (%zu subjects, %zu samples, %zu fall samples)\n",
                data_path.c_str(), recordings.size(), samples, falls);
    std::printf("wrote %s\n", labels_path.c_str());
    return 0;
}

int run_train(const CommonOpts& opts) {
    const auto dataset = pipeline::load_csv(opts.data_path);
    const auto labels = pipeline::load_label_map(opts.labels_path);
    const auto cfg = make_pipeline_config(opts);
    if (cfg.method.ocnn)
        throw ConfigError("'train' serializes threshold detectors; use loocv for ocnn");

    std::vector<pipeline::Window> normals;
    for (const auto& rec : dataset)
        for (auto& w : pipeline::slide_windows(rec, cfg.window, labels))
            if (w.label == pipeline::WindowLabel::Normal) normals.push_back(std::move(w));

    const auto split = selection::proxy_split(normals, cfg.sel.rho, cfg.method.arch,
                                              cfg.method.train, cfg.method.hidden_units);
    double omega = 0.0;
    if (threshold::kind_uses_omega(cfg.method.kind)) {
        const auto tuned = selection::tune_omega(split, cfg.sel, cfg.method);
        omega = tuned.best_omega;
        std::printf("tuned omega: %g\n", omega);
    }
    const auto detector =
        selection::fit_final_detector(split.nonfalls, omega, cfg.method);
    fs::create_directories(opts.out_dir);
    const std::string model_path = (fs::path(opts.out_dir) / "detector.txt").string();
    ensemble::save_detector(detector, model_path);
    std::printf("trained %zu member(s) on %zu non-fall windows (%zu proxy falls held out)\n",
                detector.members.size(), split.nonfalls.size(),
                split.proxy_falls.size());
    for (const auto& m : detector.members)
        std::printf("  %-10s threshold %.6g\n", m.channel_id.c_str(),
                    m.threshold.value);
    std::printf("wrote %s\n", model_path.c_str());
    return 0;
}

int run_loocv(const CommonOpts& opts) {
    const auto dataset = pipeline::load_csv(opts.data_path);
    const auto labels = pipeline::load_label_map(opts.labels_path);
    const auto cfg = make_pipeline_config(opts);
    const auto report = selection::loocv(dataset, labels, cfg, opts.jobs);
    print_report(report);
    fs::create_directories(opts.out_dir);
    const std::string csv_path = (fs::path(opts.out_dir) / "results.csv").string();
    metrics::export_results_csv(selection::loocv_rows(report, cfg), csv_path);
    std::printf("wrote %s\n", csv_path.c_str());
    return 0;
}

int run_sweep(const CommonOpts& opts, const std::vector<std::string>& methods) {
    const auto dataset = pipeline::load_csv(opts.data_path);
    const auto labels = pipeline::load_label_map(opts.labels_path);
    std::vector<metrics::ResultRow> rows;
    for (const std::string& method : methods) {
        CommonOpts method_opts = opts;
        method_opts.threshold_name = method;
        const auto cfg = make_pipeline_config(method_opts);
        const auto method_rows =
            selection::rho_sweep(dataset, labels, cfg, opts.rho_grid, opts.jobs);
        rows.insert(rows.end(), method_rows.begin(), method_rows.end());
    }
    fs::create_directories(opts.out_dir);
    const std::string csv_path = (fs::path(opts.out_dir) / "sweep.csv").string();
    const std::string svg_path = (fs::path(opts.out_dir) / "sweep.svg").string();
    metrics::export_results_csv(rows, csv_path);
    metrics::export_sweep_svg(rows, svg_path);
    std::printf("wrote %s\n", csv_path.c_str());
    std::printf("wrote %s\n", svg_path.c_str());
    return 0;
}

int run_gradcheck(std::uint64_t seed, std::size_t nets, double eps) {
    if (!(eps > 0.0)) throw ConfigError("--eps must be > 0");
    if (nets < 1) throw ConfigError("--nets must be >= 1");
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < nets; ++i) {
        const std::size_t in_dim = 2 + rng() % 9;   // up to 10
        const std::size_t hidden = 1 + rng() % 5;   // up to 5
        const std::size_t batch_size = 1 + rng() % 8;
        const std::vector<nn::LayerSpec> specs = {
            {in_dim, hidden, nn::Activation::Sigmoid},
            {hidden, in_dim, nn::Activation::Sigmoid}};
        const nn::AEModel model = nn::init_model(specs, nn::Arch::AE, rng());
        nn::Batch batch(batch_size, std::vector<double>(in_dim));
        for (auto& x : batch)
            for (double& v : x)
                v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        nn::TrainConfig cfg;
        cfg.seed = rng();
        worst = std::max(worst, nn::gradient_check(model, batch, cfg, eps));
    }
    std::printf("max relative gradient error over %zu nets: %.3g\n", nets, worst);
    if (worst >= 1e-4) {
        std::fprintf(stderr, "gradient check FAILED (>= 1e-4)\n");
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-class fall detection with autoencoder ensembles"};
    app.name("falldet");
    app.require_subcommand(1);
    app.set_config("--config", "", "Read key=value defaults from a file");

    CommonOpts opts;
    pipeline::SynthConfig synth;

    auto* synth_cmd =
        app.add_subcommand("synth", "Generate a synthetic labeled sensor dataset");
    synth_cmd->add_option("--subjects", synth.subjects, "Number of subjects")
        ->capture_default_str();
    synth_cmd->add_option("--duration", synth.duration_s, "Seconds per subject")
        ->capture_default_str();
    synth_cmd->add_option("--noise-rate", synth.noise_rate,
                          "Fraction of normal samples replaced by spikes")
        ->capture_default_str();
    synth_cmd->add_option("--falls", synth.fall_count, "Fall events per subject")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
    synth_cmd->add_option("--out", opts.out_dir, "Output directory")
        ->capture_default_str();

    auto* train_cmd =
        app.add_subcommand("train", "Train a detector on all normal windows");
    add_common_flags(train_cmd, opts, true);

    auto* loocv_cmd =
        app.add_subcommand("loocv", "Leave-one-subject-out cross-validation");
    add_common_flags(loocv_cmd, opts, true);

    std::vector<std::string> sweep_methods = {"rre"};
    auto* sweep_cmd = app.add_subcommand("sweep", "LOOCV across the rho grid");
    add_common_flags(sweep_cmd, opts, true);
    sweep_cmd
        ->add_option("--methods", sweep_methods,
                     "Methods to sweep (maxre, stdre, rre, ire, ocnn)")
        ->delimiter(',')
        ->capture_default_str();

    std::uint64_t gc_seed = 0;
    std::size_t gc_nets = 100;
    double gc_eps = 1e-5;
    auto* gradcheck_cmd = app.add_subcommand(
        "gradcheck", "Compare analytic and finite-difference gradients");
    gradcheck_cmd->add_option("--seed", gc_seed, "RNG seed")->capture_default_str();
    gradcheck_cmd->add_option("--nets", gc_nets, "Number of random nets")
        ->capture_default_str();
    gradcheck_cmd->add_option("--eps", gc_eps, "Finite-difference step")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        if (synth_cmd->parsed()) return run_synth(opts, synth);
        if (train_cmd->parsed()) return run_train(opts);
        if (loocv_cmd->parsed()) return run_loocv(opts);
        if (sweep_cmd->parsed()) return run_sweep(opts, sweep_methods);
        if (gradcheck_cmd->parsed()) return run_gradcheck(gc_seed, gc_nets, gc_eps);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const InputError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 1;
    } catch (const SelectionError& e) {
        std::fprintf(stderr, "selection error: %s\n", e.what());
        return 1;
    } catch (const MetricError& e) {
        std::fprintf(stderr, "metric error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
