#pragma once

// Synthetic paired text/pose/RGB-feature corpus. Every sample is a pure
// function of (spec, seed, split, index); gloss prototypes are a pure
// function of (spec, seed, gloss id).

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seds/pose.hpp"
#include "seds/random.hpp"
#include "seds/tensor_io.hpp"
#include "seds/topology.hpp"

namespace seds {

constexpr std::size_t kRgbDim = 1024;

struct SyntheticSpec {
    std::size_t vocab_glosses = 20;      // G
    std::size_t min_glosses = 2;         // glosses per sample, inclusive range
    std::size_t max_glosses = 4;
    double pose_noise = 0.0;             // sigma on keypoint x/y
    double rgb_noise = 0.0;              // sigma on per-frame RGB features
    double nuisance_strength = 0.0;      // sample-constant RGB offset scale
    double signer_offset = 0.0;          // global +/- shift range on x/y
    double signer_scale = 0.0;           // global scale jitter, 1 +/- this
    double low_conf_prob = 0.0;          // chance a frame gets low hand confidence
    double permute_prob = 0.0;           // chance of swapping adjacent text tokens
    double filler_prob = 0.0;            // chance of inserting a filler token
    std::size_t num_fillers = 5;
    std::size_t rgb_cluster_size = 1;    // glosses sharing one RGB appearance cluster
    double rgb_cluster_sep = 1.0;        // scale of the within-cluster distinguishing part
    std::size_t n_train = 200;
    std::size_t n_val = 50;
    std::size_t n_test = 50;
    std::uint64_t seed = 0;

    void validate() const {
        if (vocab_glosses < 2) throw DataError("need at least 2 glosses");
        if (min_glosses < 1 || max_glosses < min_glosses)
            throw DataError("bad glosses-per-sample range");
        if (pose_noise < 0 || rgb_noise < 0 || nuisance_strength < 0)
            throw DataError("noise scales must be nonnegative");
    }
};

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"vocab_glosses", s.vocab_glosses},
                       {"min_glosses", s.min_glosses},
                       {"max_glosses", s.max_glosses},
                       {"pose_noise", s.pose_noise},
                       {"rgb_noise", s.rgb_noise},
                       {"nuisance_strength", s.nuisance_strength},
                       {"signer_offset", s.signer_offset},
                       {"signer_scale", s.signer_scale},
                       {"low_conf_prob", s.low_conf_prob},
                       {"permute_prob", s.permute_prob},
                       {"filler_prob", s.filler_prob},
                       {"num_fillers", s.num_fillers},
                       {"rgb_cluster_size", s.rgb_cluster_size},
                       {"rgb_cluster_sep", s.rgb_cluster_sep},
                       {"n_train", s.n_train},
                       {"n_val", s.n_val},
                       {"n_test", s.n_test},
                       {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s.vocab_glosses = j.value("vocab_glosses", s.vocab_glosses);
    s.min_glosses = j.value("min_glosses", s.min_glosses);
    s.max_glosses = j.value("max_glosses", s.max_glosses);
    s.pose_noise = j.value("pose_noise", s.pose_noise);
    s.rgb_noise = j.value("rgb_noise", s.rgb_noise);
    s.nuisance_strength = j.value("nuisance_strength", s.nuisance_strength);
    s.signer_offset = j.value("signer_offset", s.signer_offset);
    s.signer_scale = j.value("signer_scale", s.signer_scale);
    s.low_conf_prob = j.value("low_conf_prob", s.low_conf_prob);
    s.permute_prob = j.value("permute_prob", s.permute_prob);
    s.filler_prob = j.value("filler_prob", s.filler_prob);
    s.num_fillers = j.value("num_fillers", s.num_fillers);
    s.rgb_cluster_size = j.value("rgb_cluster_size", s.rgb_cluster_size);
    s.rgb_cluster_sep = j.value("rgb_cluster_sep", s.rgb_cluster_sep);
    s.n_train = j.value("n_train", s.n_train);
    s.n_val = j.value("n_val", s.n_val);
    s.n_test = j.value("n_test", s.n_test);
    s.seed = j.value("seed", s.seed);
}

// One gloss prototype: a short keypoint trajectory plus an RGB direction.
struct GlossPrototype {
    std::size_t length = 0;                // frames, 16..24
    std::vector<double> keypoints;         // [length x 49 x 3]
    std::vector<double> rgb;               // [kRgbDim]
};

namespace detail {

// Neutral skeleton layout in image-normalized coordinates.
inline void neutral_frame(std::vector<double>& kp, std::size_t frame_off) {
    auto set = [&](std::size_t k, double x, double y) {
        kp[frame_off + k * 3 + 0] = x;
        kp[frame_off + k * 3 + 1] = y;
        kp[frame_off + k * 3 + 2] = 1.0;
    };
    // body
    set(kBodyOffset + 0, 0.50, 0.18);   // nose
    set(kBodyOffset + 1, 0.40, 0.32);   // shoulders
    set(kBodyOffset + 2, 0.60, 0.32);
    set(kBodyOffset + 3, 0.35, 0.48);   // elbows
    set(kBodyOffset + 4, 0.65, 0.48);
    set(kBodyOffset + 5, 0.38, 0.62);   // wrists
    set(kBodyOffset + 6, 0.62, 0.62);
    // hands fan out from each wrist
    auto hand = [&](std::size_t off, double wx, double wy, double dir) {
        set(off + 0, wx, wy);
        for (std::size_t f = 0; f < 5; ++f)
            for (std::size_t s = 0; s < 4; ++s) {
                double spread = (static_cast<double>(f) - 2.0) * 0.015;
                double reach = 0.02 * static_cast<double>(s + 1);
                set(off + 1 + f * 4 + s, wx + dir * spread, wy + reach);
            }
    };
    hand(kLeftHandOffset, 0.38, 0.62, 1.0);
    hand(kRightHandOffset, 0.62, 0.62, -1.0);
}

}  // namespace detail

inline GlossPrototype make_gloss_prototype(const SyntheticSpec& spec, std::size_t gloss_id) {
    Rng rng(mix_seed(spec.seed, 0x67'6c'6f'73'00ULL + gloss_id));
    GlossPrototype proto;
    proto.length = static_cast<std::size_t>(rng.uniform_int(16, 24));
    proto.keypoints.assign(proto.length * kTotalPoints * 3, 0.0);

    // Each gloss holds a distinctive static posture (handshape and arm
    // placement) with sinusoidal motion layered on top; the static part is
    // what survives temporal pooling.
    std::vector<double> base_x(kTotalPoints), base_y(kTotalPoints);
    std::vector<double> amp_x(kTotalPoints), amp_y(kTotalPoints), phase(kTotalPoints),
        freq(kTotalPoints);
    for (std::size_t k = 0; k < kTotalPoints; ++k) {
        base_x[k] = rng.uniform(-0.08, 0.08);
        base_y[k] = rng.uniform(-0.08, 0.08);
        amp_x[k] = rng.uniform(-0.06, 0.06);
        amp_y[k] = rng.uniform(-0.06, 0.06);
        phase[k] = rng.uniform(0.0, 6.283185307179586);
        freq[k] = rng.uniform(0.5, 2.0);
    }
    for (std::size_t f = 0; f < proto.length; ++f) {
        std::size_t off = f * kTotalPoints * 3;
        detail::neutral_frame(proto.keypoints, off);
        double t = static_cast<double>(f) / static_cast<double>(proto.length);
        for (std::size_t k = 0; k < kTotalPoints; ++k) {
            double w = std::sin(6.283185307179586 * freq[k] * t + phase[k]);
            proto.keypoints[off + k * 3 + 0] += base_x[k] + amp_x[k] * w;
            proto.keypoints[off + k * 3 + 1] += base_y[k] + amp_y[k] * w;
        }
    }
    // RGB appearance: glosses within one cluster share a dominant direction
    // and differ only by a scaled unique component.
    proto.rgb.resize(kRgbDim);
    for (auto& v : proto.rgb) v = rng.normal();
    if (spec.rgb_cluster_size > 1) {
        Rng crng(mix_seed(spec.seed, 0xc1'a5'00ULL + gloss_id / spec.rgb_cluster_size));
        for (auto& v : proto.rgb) v = crng.normal() + spec.rgb_cluster_sep * v;
    }
    return proto;
}

struct SyntheticSample {
    std::vector<std::size_t> gloss_ids;
    std::vector<std::string> text_tokens;
    PoseSequence pose;
    std::vector<double> rgb;  // [frames x kRgbDim], per-frame features
};

inline std::string gloss_token(std::size_t g) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "g%03zu", g);
    return buf;
}

inline std::string filler_token(std::size_t f) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "f%03zu", f);
    return buf;
}

inline SyntheticSample make_sample(const SyntheticSpec& spec,
                                   const std::vector<GlossPrototype>& protos,
                                   std::uint64_t split_tag, std::size_t index) {
    Rng rng(mix_seed(spec.seed, splitmix64(split_tag) ^ (0x73'61'6d'70ULL + index)));
    SyntheticSample s;
    std::size_t n =
        static_cast<std::size_t>(rng.uniform_int(static_cast<long>(spec.min_glosses),
                                                 static_cast<long>(spec.max_glosses)));
    for (std::size_t i = 0; i < n; ++i)
        s.gloss_ids.push_back(
            static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(spec.vocab_glosses - 1))));

    // text: gloss tokens, optional adjacent swaps and filler insertions
    for (std::size_t g : s.gloss_ids) s.text_tokens.push_back(gloss_token(g));
    for (std::size_t i = 0; i + 1 < s.text_tokens.size(); ++i)
        if (rng.uniform() < spec.permute_prob) std::swap(s.text_tokens[i], s.text_tokens[i + 1]);
    if (spec.filler_prob > 0.0 && spec.num_fillers > 0) {
        std::vector<std::string> with_fillers;
        for (const auto& tok : s.text_tokens) {
            if (rng.uniform() < spec.filler_prob)
                with_fillers.push_back(filler_token(static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<long>(spec.num_fillers - 1)))));
            with_fillers.push_back(tok);
        }
        s.text_tokens = std::move(with_fillers);
    }

    // pose: concatenated prototypes + jitter + one signer offset/scale
    double dx = rng.uniform(-spec.signer_offset, spec.signer_offset);
    double dy = rng.uniform(-spec.signer_offset, spec.signer_offset);
    double sc = 1.0 + rng.uniform(-spec.signer_scale, spec.signer_scale);
    std::size_t frames = 0;
    for (std::size_t g : s.gloss_ids) frames += protos[g].length;
    s.pose.frames = frames;
    s.pose.keypoints.assign(frames * kTotalPoints * 3, 0.0);
    s.rgb.assign(frames * kRgbDim, 0.0);

    std::vector<double> nuisance(kRgbDim, 0.0);
    for (auto& v : nuisance) v = rng.normal() * spec.nuisance_strength;

    std::size_t frame = 0;
    for (std::size_t g : s.gloss_ids) {
        const GlossPrototype& p = protos[g];
        for (std::size_t f = 0; f < p.length; ++f, ++frame) {
            bool low_conf = rng.uniform() < spec.low_conf_prob;
            for (std::size_t k = 0; k < kTotalPoints; ++k) {
                double x = p.keypoints[(f * kTotalPoints + k) * 3 + 0];
                double y = p.keypoints[(f * kTotalPoints + k) * 3 + 1];
                x = 0.5 + sc * (x - 0.5) + dx + rng.normal() * spec.pose_noise;
                y = 0.5 + sc * (y - 0.5) + dy + rng.normal() * spec.pose_noise;
                double conf = low_conf ? rng.uniform(0.0, 0.15) : rng.uniform(0.75, 1.0);
                s.pose.at(frame, k, 0) = x;
                s.pose.at(frame, k, 1) = y;
                s.pose.at(frame, k, 2) = conf;
            }
            for (std::size_t c = 0; c < kRgbDim; ++c)
                s.rgb[frame * kRgbDim + c] =
                    p.rgb[c] + nuisance[c] + rng.normal() * spec.rgb_noise;
        }
    }
    return s;
}

// Writes manifest.json plus per-sample SEDT pose and RGB feature files.
inline void synth_dataset(const SyntheticSpec& spec, const std::string& out_dir) {
    spec.validate();
    std::size_t n_train = spec.n_train, n_val = spec.n_val, n_test = spec.n_test;
    if (n_train < 1 || n_val < 1 || n_test < 1) throw DataError("split sizes must be >= 1");
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "samples");

    std::vector<GlossPrototype> protos;
    for (std::size_t g = 0; g < spec.vocab_glosses; ++g)
        protos.push_back(make_gloss_prototype(spec, g));

    nlohmann::json manifest;
    manifest["seed"] = spec.seed;
    manifest["spec"] = spec;
    std::vector<std::string> vocab = {"<pad>"};
    for (std::size_t g = 0; g < spec.vocab_glosses; ++g) vocab.push_back(gloss_token(g));
    for (std::size_t f = 0; f < spec.num_fillers; ++f) vocab.push_back(filler_token(f));
    manifest["vocab"] = vocab;

    nlohmann::json samples = nlohmann::json::array();
    auto emit_split = [&](const std::string& split, std::uint64_t tag, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            SyntheticSample s = make_sample(spec, protos, tag, i);
            std::string id = split + "_" + std::to_string(i);
            std::string pose_rel = "samples/" + id + "_pose.sedt";
            std::string rgb_rel = "samples/" + id + "_rgb.sedt";
            save_sedt(out_dir + "/" + pose_rel,
                      Tensor<double>::from({s.pose.frames, kTotalPoints, 3},
                                           std::vector<double>(s.pose.keypoints)));
            std::vector<float> rgb32(s.rgb.begin(), s.rgb.end());
            save_sedt(out_dir + "/" + rgb_rel,
                      Tensor<float>::from({s.pose.frames, kRgbDim}, std::move(rgb32)));
            nlohmann::json rec;
            rec["id"] = id;
            rec["split"] = split;
            rec["pose_file"] = pose_rel;
            rec["rgb_file"] = rgb_rel;
            rec["text"] = s.text_tokens;
            rec["gloss_ids"] = s.gloss_ids;
            samples.push_back(std::move(rec));
        }
    };
    emit_split("train", 1, n_train);
    emit_split("val", 2, n_val);
    emit_split("test", 3, n_test);
    manifest["samples"] = std::move(samples);

    std::ofstream os(out_dir + "/manifest.json");
    if (!os) throw IoError("cannot write manifest in " + out_dir);
    os << manifest.dump(2) << "\n";
}

}  // namespace seds
