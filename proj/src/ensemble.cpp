#include "falldet/ensemble.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace falldet::ensemble {

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_training_windows(const std::vector<pipeline::Window>& windows) {
    if (windows.empty()) throw ConfigError("empty training set");
    const std::size_t n = windows.front().samples_per_channel();
    for (const pipeline::Window& w : windows) {
        if (w.label != pipeline::WindowLabel::Normal)
            throw ConfigError(
                "training set contains a fall-labeled window; one-class training "
                "uses normal activities only");
        if (w.view != pipeline::ViewKind::SixRaw)
            throw InputError("training windows must be SixRaw");
        if (w.samples_per_channel() != n)
            throw ConfigError("inconsistent window lengths in training set");
    }
}

}  // namespace

std::vector<std::string> channel_ids(pipeline::ViewKind view) {
    switch (view) {
        case pipeline::ViewKind::Monolithic: return {"mono"};
        case pipeline::ViewKind::SixRaw:
            return {pipeline::kChannelNames.begin(), pipeline::kChannelNames.end()};
        case pipeline::ViewKind::TwoMagnitude: return {"accel_mag", "gyro_mag"};
    }
    throw ConfigError("bad view");
}

Member build_member(const std::string& channel_id,
                    const std::vector<std::vector<double>>& scaled_vectors,
                    pipeline::Scaler scaler, const BuildConfig& cfg,
                    std::uint64_t member_seed) {
    if (scaled_vectors.empty()) throw ConfigError("empty training set");
    nn::TrainConfig train_cfg = cfg.train;
    train_cfg.seed = member_seed;
    const auto specs =
        nn::standard_specs(scaled_vectors.front().size(), cfg.arch, cfg.hidden_units);

    Member member;
    member.channel_id = channel_id;
    member.scaler = std::move(scaler);
    member.train_cfg = train_cfg;

    if (cfg.threshold_kind == threshold::ThresholdKind::IRE) {
        member.threshold =
            threshold::ire(scaled_vectors, cfg.omega, specs, cfg.arch, train_cfg);
        return member;
    }

    auto model = std::make_shared<nn::AEModel>(
        nn::train(nn::init_model(specs, cfg.arch, train_cfg.seed), scaled_vectors,
                  train_cfg));
    std::vector<double> errors;
    errors.reserve(scaled_vectors.size());
    for (const auto& x : scaled_vectors)
        errors.push_back(nn::reconstruction_error(*model, x));

    switch (cfg.threshold_kind) {
        case threshold::ThresholdKind::MaxRE:
            member.threshold = threshold::max_re(errors);
            break;
        case threshold::ThresholdKind::StdRE:
            member.threshold = threshold::std_re(errors);
            break;
        case threshold::ThresholdKind::RRE:
            member.threshold = threshold::rre(errors, cfg.omega);
            break;
        case threshold::ThresholdKind::IRE: break;  // handled above
    }
    member.threshold.model = std::move(model);
    return member;
}

Detector build_monolithic(const std::vector<pipeline::Window>& train_windows,
                          const BuildConfig& cfg) {
    check_training_windows(train_windows);
    std::vector<std::vector<double>> vectors;
    vectors.reserve(train_windows.size());
    for (const pipeline::Window& w : train_windows)
        vectors.push_back(pipeline::monolithic_vector(w).channels.front());
    pipeline::Scaler scaler = pipeline::fit_scaler(vectors);
    for (auto& v : vectors) v = pipeline::apply_scaler(scaler, v);

    Detector detector;
    detector.view = pipeline::ViewKind::Monolithic;
    detector.arch = cfg.arch;
    detector.members.push_back(
        build_member("mono", vectors, std::move(scaler), cfg, cfg.train.seed));
    return detector;
}

Detector build_channel_ensemble(const std::vector<pipeline::Window>& train_windows,
                                pipeline::ViewKind view, const BuildConfig& cfg) {
    if (view == pipeline::ViewKind::Monolithic)
        throw ConfigError("channel ensembles need the 6ce or 2ce view");
    check_training_windows(train_windows);
    std::vector<pipeline::Window> converted;
    converted.reserve(train_windows.size());
    for (const pipeline::Window& w : train_windows)
        converted.push_back(pipeline::to_view(w, view));

    const auto ids = channel_ids(view);
    Detector detector;
    detector.view = view;
    detector.arch = cfg.arch;
    for (std::size_t c = 0; c < ids.size(); ++c) {
        std::vector<std::vector<double>> vectors;
        vectors.reserve(converted.size());
        for (const pipeline::Window& w : converted) vectors.push_back(w.channels[c]);
        pipeline::Scaler scaler = pipeline::fit_scaler(vectors);
        for (auto& v : vectors) v = pipeline::apply_scaler(scaler, v);
        // Distinct member seeds so ensemble members do not share initial weights.
        detector.members.push_back(
            build_member(ids[c], vectors, std::move(scaler), cfg, cfg.train.seed + c));
    }
    return detector;
}

Detector build_detector(const std::vector<pipeline::Window>& train_windows,
                        pipeline::ViewKind view, const BuildConfig& cfg) {
    return view == pipeline::ViewKind::Monolithic
               ? build_monolithic(train_windows, cfg)
               : build_channel_ensemble(train_windows, view, cfg);
}

pipeline::WindowLabel majority_vote(const std::vector<pipeline::WindowLabel>& verdicts) {
    if (verdicts.empty()) throw InputError("majority_vote: no verdicts");
    std::size_t falls = 0;
    for (pipeline::WindowLabel v : verdicts)
        if (v == pipeline::WindowLabel::Fall) ++falls;
    const std::size_t normals = verdicts.size() - falls;
    return falls >= normals ? pipeline::WindowLabel::Fall
                            : pipeline::WindowLabel::Normal;
}

Decision detect(const Detector& detector, const pipeline::Window& window) {
    pipeline::Window viewed =
        window.view == detector.view ? window : pipeline::to_view(window, detector.view);
    if (viewed.channels.size() != detector.members.size())
        throw InputError("window/detector channel count mismatch");

    Decision decision;
    std::vector<pipeline::WindowLabel> verdicts;
    for (std::size_t c = 0; c < detector.members.size(); ++c) {
        const Member& member = detector.members[c];
        const std::vector<double> scaled =
            pipeline::apply_scaler(member.scaler, viewed.channels[c]);
        const double err = nn::reconstruction_error(*member.threshold.model, scaled);
        const auto verdict = err > member.threshold.value
                                 ? pipeline::WindowLabel::Fall
                                 : pipeline::WindowLabel::Normal;
        decision.per_member.push_back({member.channel_id, err, verdict});
        verdicts.push_back(verdict);
        if (verdict == pipeline::WindowLabel::Fall) ++decision.votes_fall;
        else ++decision.votes_normal;
    }
    decision.verdict = majority_vote(verdicts);
    return decision;
}

void save_detector(const Detector& detector, std::ostream& out) {
    out << "falldet-ensemble 1\n";
    out << "view " << pipeline::view_name(detector.view) << "\n";
    out << "arch " << (detector.arch == nn::Arch::AE ? "ae" : "sae") << "\n";
    out << "vote majority-ties-fall\n";
    out << "members " << detector.members.size() << "\n";
    for (const Member& m : detector.members) {
        out << "member " << m.channel_id << "\n";
        out << "threshold " << threshold::kind_name(m.threshold.kind) << " "
            << fmt17(m.threshold.value) << " ";
        if (m.threshold.omega) out << fmt17(*m.threshold.omega);
        else out << "none";
        out << "\n";
        out << "scaler " << m.scaler.mins.size() << "\nmins";
        for (double v : m.scaler.mins) out << " " << fmt17(v);
        out << "\nmaxs";
        for (double v : m.scaler.maxs) out << " " << fmt17(v);
        out << "\n";
        nn::save_model(*m.threshold.model, m.train_cfg, out);
    }
    out << "end-ensemble\n";
}

void save_detector(const Detector& detector, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    save_detector(detector, out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

Detector load_detector(std::istream& in) {
    std::string tag, value;
    int version = 0;
    in >> tag >> version;
    if (tag != "falldet-ensemble" || version != 1)
        throw DataError("not a falldet ensemble stream");
    Detector detector;
    in >> tag >> value;
    if (tag != "view") throw DataError("ensemble stream: expected view");
    detector.view = pipeline::view_from_name(value);
    in >> tag >> value;
    if (tag != "arch") throw DataError("ensemble stream: expected arch");
    detector.arch = value == "sae" ? nn::Arch::SAE : nn::Arch::AE;
    in >> tag >> value;
    if (tag != "vote") throw DataError("ensemble stream: expected vote");
    std::size_t count = 0;
    in >> tag >> count;
    if (tag != "members") throw DataError("ensemble stream: expected members");
    for (std::size_t c = 0; c < count; ++c) {
        Member m;
        in >> tag >> m.channel_id;
        if (tag != "member") throw DataError("ensemble stream: expected member");
        std::string kind, omega;
        in >> tag >> kind >> m.threshold.value >> omega;
        if (tag != "threshold") throw DataError("ensemble stream: expected threshold");
        m.threshold.kind = threshold::kind_from_name(kind);
        if (omega != "none") m.threshold.omega = std::strtod(omega.c_str(), nullptr);
        std::size_t dim = 0;
        in >> tag >> dim;
        if (tag != "scaler") throw DataError("ensemble stream: expected scaler");
        m.scaler.mins.resize(dim);
        m.scaler.maxs.resize(dim);
        in >> tag;
        if (tag != "mins") throw DataError("ensemble stream: expected mins");
        for (double& v : m.scaler.mins) in >> v;
        in >> tag;
        if (tag != "maxs") throw DataError("ensemble stream: expected maxs");
        for (double& v : m.scaler.maxs) in >> v;
        m.threshold.model = std::make_shared<nn::AEModel>(nn::load_model(in, &m.train_cfg));
        detector.members.push_back(std::move(m));
    }
    in >> tag;
    if (tag != "end-ensemble") throw DataError("ensemble stream: missing end-ensemble");
    if (!in) throw DataError("truncated ensemble stream");
    return detector;
}

Detector load_detector_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return load_detector(in);
}

}  // namespace falldet::ensemble
