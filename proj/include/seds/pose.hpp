#pragma once

// Pose sequences, frame quality filtering, and clip planning.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "seds/topology.hpp"

namespace seds {

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// [F x 49 x 3] keypoints: x, y in [0,1], confidence in [0,1].
struct PoseSequence {
    std::size_t frames = 0;
    double fps = 24.0;
    std::vector<double> keypoints;  // frames * kTotalPoints * 3

    double& at(std::size_t f, std::size_t k, std::size_t c) {
        return keypoints[(f * kTotalPoints + k) * 3 + c];
    }
    double at(std::size_t f, std::size_t k, std::size_t c) const {
        return keypoints[(f * kTotalPoints + k) * 3 + c];
    }

    void validate() const {
        if (frames < 1) throw DataError("pose sequence must have at least one frame");
        if (keypoints.size() != frames * kTotalPoints * 3)
            throw DataError("pose sequence buffer size mismatch");
        for (double v : keypoints)
            if (!std::isfinite(v)) throw DataError("non-finite pose coordinate");
    }
};

struct FilterResult {
    PoseSequence sequence;
    std::vector<std::size_t> retained;  // retained index -> original frame index
};

inline double hand_mean_confidence(const PoseSequence& p, std::size_t frame, std::size_t offset) {
    double s = 0.0;
    for (std::size_t k = 0; k < kHandPoints; ++k) s += p.at(frame, offset + k, 2);
    return s / static_cast<double>(kHandPoints);
}

// Drops frames where the mean confidence of either hand group falls below
// min_conf. Throws if fewer than one clip length of frames survives.
inline FilterResult filter_frames(const PoseSequence& p, double min_conf) {
    if (min_conf < 0.0 || min_conf > 1.0) throw DataError("min_conf must lie in [0,1]");
    FilterResult out;
    out.sequence.fps = p.fps;
    for (std::size_t f = 0; f < p.frames; ++f) {
        if (hand_mean_confidence(p, f, kLeftHandOffset) < min_conf ||
            hand_mean_confidence(p, f, kRightHandOffset) < min_conf)
            continue;
        out.retained.push_back(f);
        out.sequence.keypoints.insert(
            out.sequence.keypoints.end(), p.keypoints.begin() + f * kTotalPoints * 3,
            p.keypoints.begin() + (f + 1) * kTotalPoints * 3);
    }
    out.sequence.frames = out.retained.size();
    if (out.sequence.frames < kClipLen)
        throw DataError("fewer than " + std::to_string(kClipLen) +
                        " frames survive quality filtering (" +
                        std::to_string(out.sequence.frames) + ")");
    return out;
}

struct ClipPlan {
    std::size_t num_candidates = 0;          // C = F_kept - 15
    std::vector<std::size_t> starts;         // T selected clip starts, nondecreasing
    std::vector<std::uint8_t> valid;         // length T; 0 marks padded repeats
};

// Sliding window of 16 retained frames with stride 1; T starts picked at equal
// intervals. When fewer than T candidates exist, all are taken and the last is
// repeated with valid=0.
inline ClipPlan plan_clips(std::size_t frames_kept, std::size_t t) {
    if (frames_kept < kClipLen)
        throw DataError("cannot plan clips for " + std::to_string(frames_kept) + " frames");
    if (t < 1) throw DataError("clip count must be positive");
    ClipPlan plan;
    plan.num_candidates = frames_kept - (kClipLen - 1);
    std::size_t c = plan.num_candidates;
    if (c < t) {
        for (std::size_t i = 0; i < c; ++i) {
            plan.starts.push_back(i);
            plan.valid.push_back(1);
        }
        for (std::size_t i = c; i < t; ++i) {
            plan.starts.push_back(c - 1);
            plan.valid.push_back(0);
        }
    } else if (t == 1) {
        plan.starts.push_back((c - 1) / 2);
        plan.valid.push_back(1);
    } else {
        for (std::size_t i = 0; i < t; ++i) {
            double pos = static_cast<double>(i) * static_cast<double>(c - 1) /
                         static_cast<double>(t - 1);
            plan.starts.push_back(static_cast<std::size_t>(std::llround(pos)));
            plan.valid.push_back(1);
        }
    }
    return plan;
}

}  // namespace seds
