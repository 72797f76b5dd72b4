#pragma once

// Manifest ingestion, tokenization, and batch assembly.

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seds/pose.hpp"
#include "seds/synth.hpp"
#include "seds/tensor_io.hpp"

namespace seds {

constexpr std::size_t kDefaultClips = 64;   // maximum clips per video
constexpr std::size_t kDefaultWords = 32;   // maximum text length

struct SampleRecord {
    std::string id;
    std::string split;
    std::string pose_file;
    std::string rgb_file;
    std::vector<std::string> text;
    std::vector<std::size_t> gloss_ids;
};

struct Dataset {
    std::string root;
    std::vector<std::string> vocab;
    std::map<std::string, std::size_t> token_ids;
    std::vector<SampleRecord> samples;
    SyntheticSpec spec;
    std::uint64_t seed = 0;

    std::vector<std::size_t> split_indices(const std::string& split) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < samples.size(); ++i)
            if (samples[i].split == split) out.push_back(i);
        return out;
    }
};

inline Dataset load_manifest(const std::string& dir) {
    std::ifstream is(dir + "/manifest.json");
    if (!is) throw IoError("cannot open manifest: " + dir + "/manifest.json");
    nlohmann::json j;
    is >> j;
    Dataset ds;
    ds.root = dir;
    ds.seed = j.value("seed", 0ULL);
    if (j.contains("spec")) ds.spec = j["spec"].get<SyntheticSpec>();
    ds.vocab = j.at("vocab").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < ds.vocab.size(); ++i) ds.token_ids[ds.vocab[i]] = i;
    for (const auto& rec : j.at("samples")) {
        SampleRecord s;
        s.id = rec.at("id").get<std::string>();
        s.split = rec.value("split", "train");
        s.pose_file = rec.at("pose_file").get<std::string>();
        s.rgb_file = rec.at("rgb_file").get<std::string>();
        s.text = rec.at("text").get<std::vector<std::string>>();
        if (rec.contains("gloss_ids")) s.gloss_ids = rec["gloss_ids"].get<std::vector<std::size_t>>();
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// Whitespace/gloss-id tokens mapped through the manifest vocabulary,
// truncated to max_len.
inline std::vector<std::size_t> tokenize(const Dataset& ds, const std::vector<std::string>& words,
                                         std::size_t max_len) {
    std::vector<std::size_t> ids;
    for (const auto& w : words) {
        if (ids.size() >= max_len) break;
        auto it = ds.token_ids.find(w);
        if (it == ds.token_ids.end()) throw DataError("unknown token '" + w + "'");
        ids.push_back(it->second);
    }
    if (ids.empty()) throw DataError("empty token sequence");
    return ids;
}

template <typename T>
struct BatchSample {
    std::string id;
    PoseSequence pose;              // quality-filtered frames
    std::vector<std::size_t> retained;
    ClipPlan plan;
    Tensor<T> rgb_clips;            // [T x kRgbDim], constant (no grad)
    std::vector<std::size_t> tokens;
    std::vector<T> clip_mask;       // length T, from plan.valid
};

template <typename T>
struct Batch {
    std::vector<BatchSample<T>> samples;
    std::size_t clips = 0;   // T
    std::size_t max_words = 0;
};

template <typename T>
BatchSample<T> load_sample(const Dataset& ds, std::size_t index, std::size_t clips,
                           std::size_t max_words, double min_conf) {
    if (index >= ds.samples.size()) throw DataError("sample index out of range");
    const SampleRecord& rec = ds.samples[index];
    BatchSample<T> out;
    out.id = rec.id;
    try {
        Tensor<double> pose_t = load_sedt<double>(ds.root + "/" + rec.pose_file);
        if (pose_t.rank() != 3 || pose_t.dim(1) != kTotalPoints || pose_t.dim(2) != 3)
            throw DataError("unexpected pose tensor shape");
        PoseSequence raw;
        raw.frames = pose_t.dim(0);
        raw.keypoints = pose_t.data();
        raw.validate();

        FilterResult fr;
        try {
            fr = filter_frames(raw, min_conf);
        } catch (const DataError&) {
            // too few frames survive: fall back to the unfiltered sequence
            fr.sequence = raw;
            fr.retained.resize(raw.frames);
            for (std::size_t i = 0; i < raw.frames; ++i) fr.retained[i] = i;
        }
        out.pose = std::move(fr.sequence);
        out.retained = std::move(fr.retained);
        out.plan = plan_clips(out.pose.frames, clips);

        Tensor<double> rgb_t = load_sedt<double>(ds.root + "/" + rec.rgb_file);
        if (rgb_t.rank() != 2 || rgb_t.dim(1) != kRgbDim || rgb_t.dim(0) != raw.frames)
            throw DataError("unexpected RGB tensor shape");
        // clip feature = mean of its 16 retained frames' per-frame features
        std::vector<T> clip_feats(clips * kRgbDim, T(0));
        for (std::size_t t = 0; t < clips; ++t) {
            std::size_t start = out.plan.starts[t];
            for (std::size_t f = 0; f < kClipLen; ++f) {
                std::size_t orig = out.retained[start + f];
                for (std::size_t c = 0; c < kRgbDim; ++c)
                    clip_feats[t * kRgbDim + c] +=
                        static_cast<T>(rgb_t.data()[orig * kRgbDim + c]);
            }
        }
        for (auto& v : clip_feats) v /= T(kClipLen);
        out.rgb_clips = Tensor<T>::from({clips, kRgbDim}, std::move(clip_feats));
        out.tokens = tokenize(ds, rec.text, max_words);
        out.clip_mask.assign(out.plan.valid.begin(), out.plan.valid.end());
    } catch (const IoError& e) {
        throw DataError("sample '" + rec.id + "': " + e.what());
    } catch (const ShapeError& e) {
        throw DataError("sample '" + rec.id + "': " + e.what());
    }
    return out;
}

template <typename T>
Batch<T> load_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                    std::size_t clips = kDefaultClips, std::size_t max_words = kDefaultWords,
                    double min_conf = 0.3) {
    if (indices.empty()) throw DataError("empty batch");
    Batch<T> b;
    b.clips = clips;
    for (std::size_t idx : indices) {
        b.samples.push_back(load_sample<T>(ds, idx, clips, max_words, min_conf));
        b.max_words = std::max(b.max_words, b.samples.back().tokens.size());
    }
    return b;
}

}  // namespace seds
