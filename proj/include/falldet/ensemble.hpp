#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "falldet/nn.hpp"
#include "falldet/pipeline.hpp"
#include "falldet/threshold.hpp"

namespace falldet::ensemble {

struct Member {
    std::string channel_id;
    threshold::ThresholdModel threshold;  // owns the model errors run against
    pipeline::Scaler scaler;
    nn::TrainConfig train_cfg;  // echoed into the serialized model block
};

// A monolithic detector is the 1-member case; 6_CE has 6 members, 2_CE has 2.
struct Detector {
    pipeline::ViewKind view = pipeline::ViewKind::Monolithic;
    nn::Arch arch = nn::Arch::AE;
    std::vector<Member> members;
};

struct MemberVote {
    std::string channel_id;
    double error = 0.0;
    pipeline::WindowLabel verdict = pipeline::WindowLabel::Normal;
};

struct Decision {
    pipeline::WindowLabel verdict = pipeline::WindowLabel::Normal;
    std::size_t votes_fall = 0;
    std::size_t votes_normal = 0;
    std::vector<MemberVote> per_member;
};

struct BuildConfig {
    nn::Arch arch = nn::Arch::AE;
    threshold::ThresholdKind threshold_kind = threshold::ThresholdKind::RRE;
    double omega = 1.5;  // used by RRE/IRE only
    nn::TrainConfig train;
    std::size_t hidden_units = 31;
};

// Trains one member on already scaled per-channel vectors; the scaler must be
// the one that produced them.
Member build_member(const std::string& channel_id,
                    const std::vector<std::vector<double>>& scaled_vectors,
                    pipeline::Scaler scaler, const BuildConfig& cfg,
                    std::uint64_t member_seed);

// train_windows are SixRaw, all normal-labeled.
Detector build_monolithic(const std::vector<pipeline::Window>& train_windows,
                          const BuildConfig& cfg);
Detector build_channel_ensemble(const std::vector<pipeline::Window>& train_windows,
                                pipeline::ViewKind view, const BuildConfig& cfg);
Detector build_detector(const std::vector<pipeline::Window>& train_windows,
                        pipeline::ViewKind view, const BuildConfig& cfg);

// Member channel ids for a view: {mono}, {ax..wz}, or {accel_mag, gyro_mag}.
std::vector<std::string> channel_ids(pipeline::ViewKind view);

// Ties are falls: fall iff votes_fall >= votes_normal.
pipeline::WindowLabel majority_vote(const std::vector<pipeline::WindowLabel>& verdicts);

// Accepts a SixRaw window (converted to the detector view) or a window already
// in the detector's view.
Decision detect(const Detector& detector, const pipeline::Window& window);

void save_detector(const Detector& detector, std::ostream& out);
void save_detector(const Detector& detector, const std::string& path);
Detector load_detector(std::istream& in);
Detector load_detector_file(const std::string& path);

}  // namespace falldet::ensemble
