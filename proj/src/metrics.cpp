#include "falldet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace falldet::metrics {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw DataError("results csv: non-numeric " + what + " '" + s + "'");
    return v;
}

constexpr const char* kHeader = "method,arch,view,rho,omega,fold,tpr,fpr,gmean";

}  // namespace

ConfusionCounts confusion(const std::vector<pipeline::WindowLabel>& predictions,
                          const std::vector<pipeline::WindowLabel>& labels) {
    if (predictions.size() != labels.size())
        throw InputError("confusion: predictions/labels length mismatch");
    if (predictions.empty()) throw InputError("confusion: empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool actual_fall = labels[i] == pipeline::WindowLabel::Fall;
        const bool predicted_fall = predictions[i] == pipeline::WindowLabel::Fall;
        if (actual_fall && predicted_fall) ++c.tp;
        else if (actual_fall) ++c.fn;
        else if (predicted_fall) ++c.fp;
        else ++c.tn;
    }
    return c;
}

EvalMetrics gmean(const ConfusionCounts& counts) {
    if (counts.tp + counts.fn == 0)
        throw MetricError("gmean undefined: no fall (positive) examples");
    if (counts.tn + counts.fp == 0)
        throw MetricError("gmean undefined: no normal (negative) examples");
    EvalMetrics m;
    m.tpr = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
    m.fpr = static_cast<double>(counts.fp) / static_cast<double>(counts.fp + counts.tn);
    m.tnr = 1.0 - m.fpr;
    m.gmean = std::sqrt(m.tpr * m.tnr);
    return m;
}

void export_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    if (rows.empty()) throw InputError("export_results_csv: no rows");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << kHeader << "\n";
    for (const ResultRow& r : rows) {
        out << r.method << "," << r.arch << "," << r.view << "," << fmt17(r.rho) << ",";
        if (r.omega) out << fmt17(*r.omega);
        out << "," << r.fold << "," << fmt17(r.tpr) << "," << fmt17(r.fpr) << ","
            << fmt17(r.gmean) << "\n";
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<ResultRow> parse_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kHeader)
        throw DataError("results csv: bad header in '" + path + "'");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (fields.size() != 9)
            throw DataError("results csv: expected 9 fields, got " +
                            std::to_string(fields.size()));
        ResultRow r;
        r.method = fields[0];
        r.arch = fields[1];
        r.view = fields[2];
        r.rho = parse_double(fields[3], "rho");
        if (!fields[4].empty()) r.omega = parse_double(fields[4], "omega");
        r.fold = fields[5];
        r.tpr = parse_double(fields[6], "tpr");
        r.fpr = parse_double(fields[7], "fpr");
        r.gmean = parse_double(fields[8], "gmean");
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

struct Panel {
    const char* title;
    double ResultRow::* field;
};

}  // namespace

void export_sweep_svg(const std::vector<ResultRow>& rows, const std::string& path) {
    if (rows.empty()) throw InputError("export_sweep_svg: no rows");

    // method -> rho -> metric, mean rows only (fall back to all rows if the
    // table carries no explicit mean rows).
    std::vector<ResultRow> mean_rows;
    for (const ResultRow& r : rows)
        if (r.fold == "mean") mean_rows.push_back(r);
    if (mean_rows.empty()) mean_rows = rows;

    std::map<std::string, std::map<double, ResultRow>> by_method;
    double rho_min = 1e300, rho_max = -1e300;
    for (const ResultRow& r : mean_rows) {
        if (!(r.rho > 0.0))
            throw InputError("export_sweep_svg: rho must be positive for a log axis");
        by_method[r.method][r.rho] = r;
        rho_min = std::min(rho_min, r.rho);
        rho_max = std::max(rho_max, r.rho);
    }
    if (rho_max <= rho_min) rho_max = rho_min * 10.0;

    static const std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c",
                                                       "#9467bd", "#ff7f0e", "#8c564b"};
    const Panel panels[3] = {{"TPR", &ResultRow::tpr},
                             {"FPR", &ResultRow::fpr},
                             {"gmean", &ResultRow::gmean}};

    constexpr double panel_w = 360, panel_h = 280, margin_l = 52, margin_b = 44,
                     margin_t = 30, margin_r = 14, gap = 24, legend_h = 28;
    const double total_w = 3 * (panel_w + gap) - gap + 10;
    const double total_h = panel_h + legend_h + 10;

    const double lmin = std::log10(rho_min), lmax = std::log10(rho_max);
    auto x_of = [&](double panel_x0, double rho) {
        const double plot_w = panel_w - margin_l - margin_r;
        return panel_x0 + margin_l + (std::log10(rho) - lmin) / (lmax - lmin) * plot_w;
    };
    auto y_of = [&](double value) {
        const double plot_h = panel_h - margin_t - margin_b;
        return margin_t + (1.0 - std::clamp(value, 0.0, 1.0)) * plot_h;
    };

    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << total_w << "\" height=\"" << total_h << "\" font-family=\"sans-serif\" "
        << "font-size=\"11\">\n";

    for (int p = 0; p < 3; ++p) {
        const double x0 = p * (panel_w + gap);
        out << "<g>\n";
        out << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"16\" text-anchor=\"middle\">"
            << panels[p].title << " vs rho</text>\n";
        // axes
        out << "<line x1=\"" << x0 + margin_l << "\" y1=\"" << y_of(0.0) << "\" x2=\""
            << x0 + panel_w - margin_r << "\" y2=\"" << y_of(0.0)
            << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << x0 + margin_l << "\" y1=\"" << y_of(0.0) << "\" x2=\""
            << x0 + margin_l << "\" y2=\"" << y_of(1.0) << "\" stroke=\"black\"/>\n";
        for (double tick = 0.0; tick <= 1.0001; tick += 0.25) {
            out << "<text x=\"" << x0 + margin_l - 6 << "\" y=\"" << y_of(tick) + 4
                << "\" text-anchor=\"end\">" << fmt3(tick) << "</text>\n";
        }
        // x ticks at the swept rho values (thinned when the grid is dense)
        const auto& first_series = by_method.begin()->second;
        std::size_t tick_i = 0;
        const std::size_t tick_step = first_series.size() > 6 ? 3 : 1;
        for (const auto& [rho, row] : first_series) {
            if (tick_i++ % tick_step == 0) {
                out << "<text x=\"" << x_of(x0, rho) << "\" y=\"" << y_of(0.0) + 16
                    << "\" text-anchor=\"middle\">" << fmt3(rho) << "</text>\n";
            }
        }
        out << "<text x=\"" << x0 + panel_w / 2 << "\" y=\"" << panel_h - 6
            << "\" text-anchor=\"middle\">rho (log scale)</text>\n";

        std::size_t color_idx = 0;
        for (const auto& [method, series] : by_method) {
            out << "<polyline fill=\"none\" stroke=\""
                << kColors[color_idx % kColors.size()] << "\" stroke-width=\"1.5\" "
                << "points=\"";
            for (const auto& [rho, row] : series)
                out << x_of(x0, rho) << "," << y_of(row.*(panels[p].field)) << " ";
            out << "\"/>\n";
            ++color_idx;
        }
        out << "</g>\n";
    }

    // legend
    double lx = 10;
    std::size_t color_idx = 0;
    for (const auto& [method, series] : by_method) {
        const double ly = panel_h + legend_h / 2.0;
        out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24
            << "\" y2=\"" << ly << "\" stroke=\"" << kColors[color_idx % kColors.size()]
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << lx + 30 << "\" y=\"" << ly + 4 << "\">" << method
            << "</text>\n";
        lx += 30 + 10 + 8.0 * static_cast<double>(method.size()) + 20;
        ++color_idx;
    }
    out << "</svg>\n";
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace falldet::metrics
