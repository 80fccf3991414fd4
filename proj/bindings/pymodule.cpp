#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "falldet/ensemble.hpp"
#include "falldet/metrics.hpp"
#include "falldet/nn.hpp"
#include "falldet/pipeline.hpp"
#include "falldet/selection.hpp"
#include "falldet/threshold.hpp"

namespace py = pybind11;
using namespace falldet;

namespace {

nn::Arch arch_from_name(const std::string& name) {
    if (name == "ae") return nn::Arch::AE;
    if (name == "sae") return nn::Arch::SAE;
    throw ConfigError("unknown arch '" + name + "'");
}

selection::PipelineConfig make_config(const std::string& view, const std::string& arch,
                                      const std::string& threshold_name,
                                      double window_seconds, double rho,
                                      std::size_t k_folds, std::uint64_t seed) {
    selection::PipelineConfig cfg;
    if (threshold_name == "ocnn") {
        cfg.method.ocnn = true;
        cfg.method.view = pipeline::ViewKind::Monolithic;
    } else {
        cfg.method.kind = threshold::kind_from_name(threshold_name);
        cfg.method.view = pipeline::view_from_name(view);
    }
    cfg.method.arch = arch_from_name(arch);
    cfg.method.train.seed = seed;
    cfg.window.window_seconds = window_seconds;
    cfg.sel.rho = rho;
    cfg.sel.k_folds = k_folds;
    cfg.sel.seed = seed;
    return cfg;
}

py::dict row_to_dict(const metrics::ResultRow& r) {
    py::dict d;
    d["method"] = r.method;
    d["arch"] = r.arch;
    d["view"] = r.view;
    d["rho"] = r.rho;
    d["omega"] = r.omega ? py::object(py::float_(*r.omega)) : py::object(py::none());
    d["fold"] = r.fold;
    d["tpr"] = r.tpr;
    d["fpr"] = r.fpr;
    d["gmean"] = r.gmean;
    return d;
}

}  // namespace

PYBIND11_MODULE(_falldet, m) {
    m.doc() = "One-class fall detection with autoencoder ensembles";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<InputError>(m, "InputError");
    py::register_exception<DataError>(m, "DataError");
    py::register_exception<SelectionError>(m, "SelectionError");
    py::register_exception<MetricError>(m, "MetricError");

    py::class_<nn::AEModel>(m, "AEModel")
        .def_property_readonly("dims", &nn::AEModel::dims)
        .def("forward",
             [](const nn::AEModel& model, const std::vector<double>& x) {
                 const auto fr = nn::forward(model, x);
                 return py::make_tuple(fr.hidden, fr.output);
             })
        .def("reconstruction_error",
             [](const nn::AEModel& model, const std::vector<double>& x) {
                 return nn::reconstruction_error(model, x);
             });

    m.def(
        "train_autoencoder",
        [](const nn::Batch& data, const std::string& arch, std::size_t hidden_units,
           std::size_t epochs, double learning_rate, std::uint64_t seed) {
            nn::TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.learning_rate = learning_rate;
            cfg.seed = seed;
            const nn::Arch a = arch_from_name(arch);
            const auto specs = nn::standard_specs(data.at(0).size(), a, hidden_units);
            return nn::train(nn::init_model(specs, a, seed), data, cfg);
        },
        py::arg("data"), py::arg("arch") = "ae", py::arg("hidden_units") = 31,
        py::arg("epochs") = 10, py::arg("learning_rate") = 0.1, py::arg("seed") = 0);

    m.def("quartiles", &threshold::quartiles, py::arg("errors"));
    m.def("iqr_outlier_mask", &threshold::iqr_outlier_mask, py::arg("errors"),
          py::arg("omega"));
    m.def("max_re", [](const std::vector<double>& e) { return threshold::max_re(e).value; },
          py::arg("errors"));
    m.def("std_re", [](const std::vector<double>& e) { return threshold::std_re(e).value; },
          py::arg("errors"));
    m.def("rre",
          [](const std::vector<double>& e, double omega) {
              return threshold::rre(e, omega).value;
          },
          py::arg("errors"), py::arg("omega"));

    m.def(
        "majority_vote",
        [](const std::vector<bool>& fall_votes) {
            std::vector<pipeline::WindowLabel> verdicts;
            for (bool v : fall_votes)
                verdicts.push_back(v ? pipeline::WindowLabel::Fall
                                     : pipeline::WindowLabel::Normal);
            return ensemble::majority_vote(verdicts) == pipeline::WindowLabel::Fall;
        },
        py::arg("fall_votes"), "True when the fall votes win or tie.");

    m.def(
        "gmean",
        [](std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
            const auto e = metrics::gmean(metrics::ConfusionCounts{tp, fp, tn, fn});
            py::dict d;
            d["tpr"] = e.tpr;
            d["fpr"] = e.fpr;
            d["tnr"] = e.tnr;
            d["gmean"] = e.gmean;
            return d;
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));

    m.def(
        "generate_synthetic_csv",
        [](const std::string& data_path, const std::string& labels_path,
           std::size_t subjects, double duration_s, double noise_rate,
           std::size_t fall_count, std::uint64_t seed) {
            pipeline::SynthConfig cfg;
            cfg.subjects = subjects;
            cfg.duration_s = duration_s;
            cfg.noise_rate = noise_rate;
            cfg.fall_count = fall_count;
            cfg.seed = seed;
            pipeline::write_csv(pipeline::generate_synthetic(cfg), data_path);
            pipeline::write_label_map(pipeline::synthetic_label_map(), labels_path);
        },
        py::arg("data_path"), py::arg("labels_path"), py::arg("subjects") = 5,
        py::arg("duration_s") = 60.0, py::arg("noise_rate") = 0.01,
        py::arg("fall_count") = 10, py::arg("seed") = 0);

    m.def(
        "loocv",
        [](const std::string& data_path, const std::string& labels_path,
           const std::string& view, const std::string& arch,
           const std::string& threshold_name, double window_seconds, double rho,
           std::size_t k_folds, std::uint64_t seed, std::size_t jobs) {
            const auto dataset = pipeline::load_csv(data_path);
            const auto labels = pipeline::load_label_map(labels_path);
            const auto cfg = make_config(view, arch, threshold_name, window_seconds,
                                         rho, k_folds, seed);
            const auto report = selection::loocv(dataset, labels, cfg, jobs);
            py::list rows;
            for (const auto& r : selection::loocv_rows(report, cfg))
                rows.append(row_to_dict(r));
            return rows;
        },
        py::arg("data_path"), py::arg("labels_path"), py::arg("view") = "6ce",
        py::arg("arch") = "ae", py::arg("threshold") = "rre",
        py::arg("window_seconds") = 1.28, py::arg("rho") = 1.5,
        py::arg("k_folds") = 3, py::arg("seed") = 0, py::arg("jobs") = 1);

    m.def(
        "rho_sweep",
        [](const std::string& data_path, const std::string& labels_path,
           const std::string& view, const std::string& arch,
           const std::string& threshold_name, double window_seconds,
           const std::vector<double>& rho_grid, std::size_t k_folds,
           std::uint64_t seed, std::size_t jobs) {
            const auto dataset = pipeline::load_csv(data_path);
            const auto labels = pipeline::load_label_map(labels_path);
            const auto cfg = make_config(view, arch, threshold_name, window_seconds,
                                         1.5, k_folds, seed);
            py::list rows;
            for (const auto& r :
                 selection::rho_sweep(dataset, labels, cfg, rho_grid, jobs))
                rows.append(row_to_dict(r));
            return rows;
        },
        py::arg("data_path"), py::arg("labels_path"), py::arg("view") = "6ce",
        py::arg("arch") = "ae", py::arg("threshold") = "rre",
        py::arg("window_seconds") = 1.28,
        py::arg("rho_grid") = selection::default_grid(), py::arg("k_folds") = 3,
        py::arg("seed") = 0, py::arg("jobs") = 1);

    m.attr("DEFAULT_GRID") = selection::default_grid();
    m.attr("__version__") = "1.0.0";
}
