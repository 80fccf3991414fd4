#include "falldet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace falldet::pipeline {

const std::array<const char*, kNumChannels> kChannelNames = {"ax", "ay", "az",
                                                             "wx", "wy", "wz"};

namespace {

constexpr const char* kCsvHeader = "subject_id,label,t,ax,ay,az,wx,wy,wz";

double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * next_unit(rng);
}

// Box-Muller; consumes two draws per call.
double gaussian(std::mt19937_64& rng, double sigma) {
    const double u1 = std::max(next_unit(rng), 1e-300);
    const double u2 = next_unit(rng);
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_number(const std::string& s, std::size_t row, const std::string& column) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw DataError("row " + std::to_string(row) + ": non-numeric value '" + s +
                        "' in column " + column);
    return v;
}

}  // namespace

std::size_t WindowConfig::window_len(double sample_rate_hz) const {
    const auto len =
        static_cast<std::size_t>(std::llround(window_seconds * sample_rate_hz));
    if (len < 2) throw ConfigError("window length must be at least 2 samples");
    return len;
}

std::vector<SensorRecording> load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader)
        throw DataError("'" + path + "': header must be '" + std::string(kCsvHeader) +
                        "', got '" + line + "'");

    std::vector<SensorRecording> recordings;
    std::map<std::string, std::size_t> index;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_row(line);
        if (fields.size() != 9)
            throw DataError("row " + std::to_string(row) + ": expected 9 fields, got " +
                            std::to_string(fields.size()));
        SensorSample sample;
        sample.label = fields[1];
        sample.t = parse_number(fields[2], row, "t");
        for (std::size_t c = 0; c < kNumChannels; ++c)
            sample.ch[c] = parse_number(fields[3 + c], row, kChannelNames[c]);

        auto it = index.find(fields[0]);
        if (it == index.end()) {
            it = index.emplace(fields[0], recordings.size()).first;
            recordings.push_back(SensorRecording{fields[0], 100.0, {}});
        }
        recordings[it->second].samples.push_back(std::move(sample));
    }
    if (recordings.empty()) throw DataError("'" + path + "' has no data rows");
    for (auto& rec : recordings) {
        if (rec.samples.size() >= 2) {
            const double dt = rec.samples[1].t - rec.samples[0].t;
            if (dt > 0.0) rec.sample_rate_hz = 1.0 / dt;
        }
    }
    return recordings;
}

void write_csv(const std::vector<SensorRecording>& recordings, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << kCsvHeader << "\n";
    for (const auto& rec : recordings) {
        for (const auto& s : rec.samples) {
            out << rec.subject_id << "," << s.label << "," << fmt17(s.t);
            for (double v : s.ch) out << "," << fmt17(v);
            out << "\n";
        }
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

LabelMap load_label_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    LabelMap map;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto pos = line.rfind(',');
        if (pos == std::string::npos)
            throw DataError("label map row " + std::to_string(row) +
                            ": expected 'label,normal|fall'");
        const std::string label = line.substr(0, pos);
        const std::string cls = line.substr(pos + 1);
        if (cls == "normal") map[label] = WindowLabel::Normal;
        else if (cls == "fall") map[label] = WindowLabel::Fall;
        else
            throw DataError("label map row " + std::to_string(row) + ": unknown class '" +
                            cls + "'");
    }
    if (map.empty()) throw DataError("label map '" + path + "' is empty");
    return map;
}

void write_label_map(const LabelMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& [label, cls] : map)
        out << label << "," << (cls == WindowLabel::Fall ? "fall" : "normal") << "\n";
}

std::vector<Window> slide_windows(const SensorRecording& rec, const WindowConfig& cfg,
                                  const LabelMap& labels) {
    if (!(cfg.overlap_fraction >= 0.0 && cfg.overlap_fraction < 1.0))
        throw ConfigError("overlap_fraction must be in [0,1)");
    const std::size_t len = cfg.window_len(rec.sample_rate_hz);
    const auto stride = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(static_cast<double>(len) * (1.0 - cfg.overlap_fraction))));

    std::vector<Window> windows;
    if (rec.samples.size() < len) return windows;
    for (std::size_t start = 0; start + len <= rec.samples.size(); start += stride) {
        Window w;
        w.subject_id = rec.subject_id;
        w.view = ViewKind::SixRaw;
        w.channels.assign(kNumChannels, std::vector<double>(len));
        std::size_t fall_samples = 0;
        for (std::size_t i = 0; i < len; ++i) {
            const SensorSample& s = rec.samples[start + i];
            const auto it = labels.find(s.label);
            if (it == labels.end())
                throw DataError("unknown activity label '" + s.label +
                                "' (not in label map)");
            if (it->second == WindowLabel::Fall) ++fall_samples;
            for (std::size_t c = 0; c < kNumChannels; ++c) w.channels[c][i] = s.ch[c];
        }
        const bool is_fall = cfg.fall_label_rule == FallLabelRule::Any
                                 ? fall_samples > 0
                                 : 2 * fall_samples > len;
        w.label = is_fall ? WindowLabel::Fall : WindowLabel::Normal;
        windows.push_back(std::move(w));
    }
    return windows;
}

Window monolithic_vector(const Window& w) {
    if (w.view != ViewKind::SixRaw)
        throw InputError("monolithic_vector requires a SixRaw window");
    Window out;
    out.subject_id = w.subject_id;
    out.label = w.label;
    out.view = ViewKind::Monolithic;
    std::vector<double> flat;
    flat.reserve(kNumChannels * w.samples_per_channel());
    for (const auto& ch : w.channels) flat.insert(flat.end(), ch.begin(), ch.end());
    out.channels.push_back(std::move(flat));
    return out;
}

Window magnitude_channels(const Window& w) {
    if (w.view != ViewKind::SixRaw)
        throw InputError("magnitude_channels requires a SixRaw window");
    Window out;
    out.subject_id = w.subject_id;
    out.label = w.label;
    out.view = ViewKind::TwoMagnitude;
    const std::size_t n = w.samples_per_channel();
    std::vector<double> accel(n), gyro(n);
    for (std::size_t i = 0; i < n; ++i) {
        accel[i] = std::sqrt(w.channels[0][i] * w.channels[0][i] +
                             w.channels[1][i] * w.channels[1][i] +
                             w.channels[2][i] * w.channels[2][i]);
        gyro[i] = std::sqrt(w.channels[3][i] * w.channels[3][i] +
                            w.channels[4][i] * w.channels[4][i] +
                            w.channels[5][i] * w.channels[5][i]);
    }
    out.channels.push_back(std::move(accel));
    out.channels.push_back(std::move(gyro));
    return out;
}

Window to_view(const Window& w, ViewKind view) {
    if (w.view == view) return w;
    switch (view) {
        case ViewKind::Monolithic: return monolithic_vector(w);
        case ViewKind::TwoMagnitude: return magnitude_channels(w);
        case ViewKind::SixRaw: break;
    }
    throw InputError("cannot convert window view");
}

Scaler fit_scaler(const std::vector<std::vector<double>>& training) {
    if (training.empty()) throw InputError("fit_scaler: empty training set");
    const std::size_t dim = training.front().size();
    Scaler scaler;
    scaler.mins.assign(dim, std::numeric_limits<double>::infinity());
    scaler.maxs.assign(dim, -std::numeric_limits<double>::infinity());
    for (const auto& x : training) {
        if (x.size() != dim) throw InputError("fit_scaler: inconsistent dimensions");
        for (std::size_t i = 0; i < dim; ++i) {
            scaler.mins[i] = std::min(scaler.mins[i], x[i]);
            scaler.maxs[i] = std::max(scaler.maxs[i], x[i]);
        }
    }
    return scaler;
}

std::vector<double> apply_scaler(const Scaler& scaler, const std::vector<double>& x) {
    if (x.size() != scaler.mins.size())
        throw InputError("apply_scaler: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double range = scaler.maxs[i] - scaler.mins[i];
        if (range <= 0.0) {
            out[i] = 0.5;  // constant training dimension
        } else {
            out[i] = std::clamp((x[i] - scaler.mins[i]) / range, 0.0, 1.0);
        }
    }
    return out;
}

namespace {

const std::array<const char*, 3> kActivityLabels = {"walking", "sitting", "standing"};
const std::array<double, 3> kActivityScale = {1.0, 0.5, 0.3};

constexpr std::size_t kBurstLen = 8;   // spurious-glitch burst, 0.08 s at 100 Hz
constexpr std::size_t kFallLen = 100;  // fall transient, 1.0 s at 100 Hz

}  // namespace

std::vector<SensorRecording> generate_synthetic(const SynthConfig& cfg) {
    if (cfg.subjects < 1) throw ConfigError("subjects must be >= 1");
    if (!(cfg.duration_s > 0.0)) throw ConfigError("duration_s must be > 0");
    if (!(cfg.noise_rate >= 0.0 && cfg.noise_rate < 1.0))
        throw ConfigError("noise_rate must be in [0,1)");
    if (!(cfg.sample_rate_hz > 0.0)) throw ConfigError("sample_rate_hz must be > 0");

    std::mt19937_64 rng(cfg.seed);
    std::vector<SensorRecording> recordings;
    const auto n_samples =
        static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate_hz));
    if (n_samples < kFallLen + kBurstLen)
        throw ConfigError("duration too short for synthetic events");

    for (std::size_t s = 0; s < cfg.subjects; ++s) {
        SensorRecording rec;
        char id[16];
        std::snprintf(id, sizeof(id), "subj%02zu", s + 1);
        rec.subject_id = id;
        rec.sample_rate_hz = cfg.sample_rate_hz;
        rec.samples.resize(n_samples);

        // Per-channel mixture of three low-frequency sinusoids.
        std::array<std::array<double, 3>, kNumChannels> freq, amp, phase;
        for (std::size_t c = 0; c < kNumChannels; ++c) {
            for (std::size_t k = 0; k < 3; ++k) {
                freq[c][k] = uniform(rng, 0.3, 2.0);
                amp[c][k] = uniform(rng, 0.2, 0.6);
                phase[c][k] = uniform(rng, 0.0, 2.0 * M_PI);
            }
        }

        const std::size_t block = static_cast<std::size_t>(10.0 * cfg.sample_rate_hz);
        for (std::size_t i = 0; i < n_samples; ++i) {
            SensorSample& sample = rec.samples[i];
            const double t = static_cast<double>(i) / cfg.sample_rate_hz;
            sample.t = t;
            const std::size_t activity = (i / std::max<std::size_t>(block, 1)) % 3;
            sample.label = kActivityLabels[activity];
            for (std::size_t c = 0; c < kNumChannels; ++c) {
                double v = 0.0;
                for (std::size_t k = 0; k < 3; ++k)
                    v += amp[c][k] * std::sin(2.0 * M_PI * freq[c][k] * t + phase[c][k]);
                v *= kActivityScale[activity];
                if (c == 2) v += 1.0;  // gravity offset on az
                sample.ch[c] = v + gaussian(rng, 0.03);
            }
        }

        std::vector<bool> occupied(n_samples, false);
        auto claim = [&](std::size_t start, std::size_t len) {
            for (std::size_t i = start; i < start + len; ++i)
                if (occupied[i]) return false;
            for (std::size_t i = start; i < start + len; ++i) occupied[i] = true;
            return true;
        };

        // Fall transients: decaying high-amplitude oscillations on all channels.
        for (std::size_t f = 0; f < cfg.fall_count; ++f) {
            std::size_t start = 0;
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                start = static_cast<std::size_t>(
                    uniform(rng, 0.0, static_cast<double>(n_samples - kFallLen)));
                placed = claim(start, kFallLen);
            }
            if (!placed) continue;
            std::array<double, kNumChannels> fall_amp;
            for (double& a : fall_amp) a = uniform(rng, 2.4, 3.2);
            for (std::size_t i = 0; i < kFallLen; ++i) {
                SensorSample& sample = rec.samples[start + i];
                sample.label = "fall";
                const double u = static_cast<double>(i) / kFallLen;
                const double envelope = std::sin(M_PI * u);
                for (std::size_t c = 0; c < kNumChannels; ++c) {
                    sample.ch[c] = fall_amp[c] * envelope *
                                       std::sin(2.0 * M_PI * 6.0 * u + 0.7 * c) +
                                   gaussian(rng, 0.05);
                }
            }
        }

        // Spurious data, two shapes:
        //   - isolated saturated samples, independently per channel, with an
        //     expected count of noise_rate * n_samples per channel;
        //   - a couple of short all-channel glitch bursts (a saturating
        //     sensor dropout) on top of that.
        if (cfg.noise_rate > 0.0) {
            for (std::size_t i = 0; i < n_samples; ++i) {
                if (occupied[i]) continue;  // keep fall transients intact
                SensorSample& sample = rec.samples[i];
                for (std::size_t c = 0; c < kNumChannels; ++c) {
                    if (next_unit(rng) < cfg.noise_rate) {
                        const double sign = next_unit(rng) < 0.5 ? -1.0 : 1.0;
                        sample.ch[c] = sign * uniform(rng, 6.5, 8.0);
                    }
                }
            }
            const auto n_bursts = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(
                       static_cast<double>(n_samples) / (60.0 * cfg.sample_rate_hz))));
            for (std::size_t bidx = 0; bidx < n_bursts; ++bidx) {
                std::size_t start = 0;
                bool placed = false;
                for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                    start = static_cast<std::size_t>(
                        uniform(rng, 0.0, static_cast<double>(n_samples - kBurstLen)));
                    placed = claim(start, kBurstLen);
                }
                if (!placed) break;
                for (std::size_t i = 0; i < kBurstLen; ++i) {
                    SensorSample& sample = rec.samples[start + i];
                    for (std::size_t c = 0; c < kNumChannels; ++c) {
                        const double sign = next_unit(rng) < 0.5 ? -1.0 : 1.0;
                        sample.ch[c] = sign * uniform(rng, 6.5, 8.0);
                    }
                }
            }
        }

        recordings.push_back(std::move(rec));
    }
    return recordings;
}

LabelMap synthetic_label_map() {
    LabelMap map;
    for (const char* label : kActivityLabels) map[label] = WindowLabel::Normal;
    map["fall"] = WindowLabel::Fall;
    return map;
}

const char* view_name(ViewKind view) {
    switch (view) {
        case ViewKind::Monolithic: return "monolithic";
        case ViewKind::SixRaw: return "6ce";
        case ViewKind::TwoMagnitude: return "2ce";
    }
    return "?";
}

ViewKind view_from_name(const std::string& name) {
    if (name == "monolithic") return ViewKind::Monolithic;
    if (name == "6ce") return ViewKind::SixRaw;
    if (name == "2ce") return ViewKind::TwoMagnitude;
    throw ConfigError("unknown view '" + name + "'");
}

}  // namespace falldet::pipeline
