#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "falldet/common.hpp"
#include "falldet/pipeline.hpp"

namespace falldet::metrics {

// Fall is the positive class.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
};

struct EvalMetrics {
    double tpr = 0.0;
    double fpr = 0.0;
    double tnr = 0.0;
    double gmean = 0.0;
};

ConfusionCounts confusion(const std::vector<pipeline::WindowLabel>& predictions,
                          const std::vector<pipeline::WindowLabel>& labels);

// gmean = sqrt(TPR * (1 - FPR)). Throws MetricError when a class is absent.
EvalMetrics gmean(const ConfusionCounts& counts);

// One row of the results table; fold is a subject id or "mean".
struct ResultRow {
    std::string method;
    std::string arch;
    std::string view;
    double rho = 0.0;
    std::optional<double> omega;
    std::string fold;
    double tpr = 0.0;
    double fpr = 0.0;
    double gmean = 0.0;
};

void export_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> parse_results_csv(const std::string& path);

// Three-panel SVG (TPR, FPR, gmean vs rho, log-x, one polyline per method)
// built from the mean rows of a sweep table.
void export_sweep_svg(const std::vector<ResultRow>& rows, const std::string& path);

}  // namespace falldet::metrics
