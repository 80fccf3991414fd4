#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "falldet/common.hpp"

namespace falldet::pipeline {

inline constexpr std::size_t kNumChannels = 6;
// Fixed channel order: ax, ay, az, wx, wy, wz.
extern const std::array<const char*, kNumChannels> kChannelNames;

enum class WindowLabel { Normal, Fall };

struct SensorSample {
    double t = 0.0;
    std::array<double, kNumChannels> ch{};
    std::string label;
};

struct SensorRecording {
    std::string subject_id;
    double sample_rate_hz = 100.0;
    std::vector<SensorSample> samples;
};

// Maps free-form activity labels to the two window classes.
using LabelMap = std::map<std::string, WindowLabel>;

enum class FallLabelRule { Majority, Any };

struct WindowConfig {
    double window_seconds = 1.28;
    double overlap_fraction = 0.5;
    FallLabelRule fall_label_rule = FallLabelRule::Majority;

    std::size_t window_len(double sample_rate_hz) const;
};

enum class ViewKind { Monolithic, SixRaw, TwoMagnitude };

struct Window {
    std::string subject_id;
    WindowLabel label = WindowLabel::Normal;
    ViewKind view = ViewKind::SixRaw;
    // Monolithic: 1 vector of length 6n; SixRaw: 6 of length n;
    // TwoMagnitude: 2 of length n.
    std::vector<std::vector<double>> channels;

    std::size_t samples_per_channel() const { return channels.front().size(); }
};

struct Scaler {
    std::vector<double> mins;
    std::vector<double> maxs;
};

std::vector<SensorRecording> load_csv(const std::string& path);
void write_csv(const std::vector<SensorRecording>& recordings, const std::string& path);

// One "label,normal|fall" line per activity label; '#' comments allowed.
LabelMap load_label_map(const std::string& path);
void write_label_map(const LabelMap& map, const std::string& path);

std::vector<Window> slide_windows(const SensorRecording& rec, const WindowConfig& cfg,
                                  const LabelMap& labels);

Window monolithic_vector(const Window& w);
Window magnitude_channels(const Window& w);
// Converts a SixRaw window to the requested view (identity for SixRaw).
Window to_view(const Window& w, ViewKind view);

Scaler fit_scaler(const std::vector<std::vector<double>>& training);
std::vector<double> apply_scaler(const Scaler& scaler, const std::vector<double>& x);

struct SynthConfig {
    std::size_t subjects = 5;
    double duration_s = 60.0;
    double noise_rate = 0.01;
    std::size_t fall_count = 10;
    std::uint64_t seed = 0;
    double sample_rate_hz = 100.0;
};

// Desk-scale stand-in for a wearable dataset: sinusoidal daily activities,
// burst-shaped spurious spikes, and short high-amplitude fall transients.
std::vector<SensorRecording> generate_synthetic(const SynthConfig& cfg);
// Label map matching the labels generate_synthetic emits.
LabelMap synthetic_label_map();

const char* view_name(ViewKind view);
ViewKind view_from_name(const std::string& name);

}  // namespace falldet::pipeline
