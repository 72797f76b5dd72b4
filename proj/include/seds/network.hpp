#pragma once

// Full dual-stream network: pose and RGB encoders, per-modality interaction
// transformers, text encoder, fusion module, learnable temperature; plus the
// loss assembly and checkpoint save/load.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seds/dataset.hpp"
#include "seds/fusion.hpp"
#include "seds/model.hpp"
#include "seds/objectives.hpp"
#include "seds/tensor_io.hpp"

namespace seds {

template <typename T>
struct StreamFeatures {
    Tensor<T> f_p;  // pose stream after interaction [T x D]
    Tensor<T> f_r;  // RGB stream after interaction [T x D]
    Tensor<T> f_v;  // fused video representation [T x D]
    Tensor<T> f_w;  // word features [L x D]
    Mask clip_mask;
    Mask word_mask;
};

template <typename T>
struct Model {
    ModelConfig cfg;
    ParamStore<T> params;
    SkeletonTopology topo;
    PoseEncoder<T> pose_enc;
    RgbAdapter<T> rgb_adapter;
    InteractionTransformer<T> interact_p, interact_r;
    TextEncoder<T> text_enc;
    FusionModule<T> fusion;
    Tensor<T> log_tau;

    explicit Model(const ModelConfig& c, std::uint64_t init_seed)
        : cfg(c), params(init_seed), topo(default_topology()) {
        if (cfg.text_vocab == 0) throw ConfigError("model: text_vocab must be set");
        pose_enc = PoseEncoder<T>::create(params, cfg, topo);
        rgb_adapter = RgbAdapter<T>::create(params, cfg);
        interact_p = InteractionTransformer<T>::create(params, "interact_p", cfg);
        interact_r = InteractionTransformer<T>::create(params, "interact_r", cfg);
        text_enc = TextEncoder<T>::create(params, cfg);
        fusion = FusionModule<T>::create(params, cfg);
        // exp-scale temperature starts at 14.29
        log_tau = params.constant("tau.log", {1}, static_cast<T>(std::log(14.29)));
    }

    Tensor<T> tau() const { return exp_t(log_tau); }

    StreamFeatures<T> forward(const BatchSample<T>& s) const {
        StreamFeatures<T> out;
        out.clip_mask.resize(s.clip_mask.size());
        for (std::size_t i = 0; i < s.clip_mask.size(); ++i)
            out.clip_mask[i] = s.clip_mask[i] != T(0);
        out.word_mask.assign(s.tokens.size(), 1);

        // zero padded clip rows before and after each stage so padding can
        // never leak through residual paths
        Tensor<T> p0 = scale_rows(pose_enc(s.pose, s.plan), s.clip_mask);
        Tensor<T> r0 = scale_rows(rgb_adapter(s.rgb_clips), s.clip_mask);
        out.f_p = scale_rows(interact_p(p0, out.clip_mask), s.clip_mask);
        out.f_r = scale_rows(interact_r(r0, out.clip_mask), s.clip_mask);
        out.f_v = scale_rows(fusion(out.f_p, out.f_r, out.clip_mask), s.clip_mask);
        out.f_w = text_enc(s.tokens);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Loss assembly

template <typename T>
struct LossParts {
    Tensor<T> total, tv, tp, tr, pr;
};

template <typename T>
Tensor<T> maybe_normalize(const Tensor<T>& x, bool cosine) {
    return cosine ? l2_normalize_rows(x) : x;
}

template <typename T>
LossParts<T> compute_loss(const Model<T>& model, const std::vector<StreamFeatures<T>>& feats,
                          T alpha, T beta, bool cosine) {
    std::size_t b = feats.size();
    if (b < 2) throw ShapeError("compute_loss: need at least two samples");
    std::vector<Tensor<T>> vs, ps, rs, ws;
    std::vector<Mask> cms, wms;
    for (const auto& f : feats) {
        vs.push_back(maybe_normalize(f.f_v, cosine));
        ps.push_back(maybe_normalize(f.f_p, cosine));
        rs.push_back(maybe_normalize(f.f_r, cosine));
        ws.push_back(maybe_normalize(f.f_w, cosine));
        cms.push_back(f.clip_mask);
        wms.push_back(f.word_mask);
    }
    Tensor<T> tau = model.tau();
    auto [m_tv, m_vt] = batch_similarity(vs, ws, cms, wms);
    auto [m_tp, m_pt] = batch_similarity(ps, ws, cms, wms);
    auto [m_tr, m_rt] = batch_similarity(rs, ws, cms, wms);
    auto [m_pr, m_rp] = batch_pose_rgb_similarity(ps, rs, cms);
    LossParts<T> parts;
    parts.tv = infonce_pair(m_tv, m_vt, tau);
    parts.tp = infonce_pair(m_tp, m_pt, tau);
    parts.tr = infonce_pair(m_tr, m_rt, tau);
    parts.pr = infonce_pair(m_pr, m_rp, tau);
    parts.total = joint_loss(tva_loss(parts.tv, parts.tp, parts.tr, alpha), parts.pr, beta);
    return parts;
}

// ---------------------------------------------------------------------------
// Scoring without gradients: pairwise fine-grained matrices over a split.

// scores[i*b+j] = score of text i against video j
template <typename T>
struct ScorePair {
    std::vector<T> t2v;  // text-side aggregation
    std::vector<T> v2t;  // video-side aggregation
    std::size_t b = 0;
};

template <typename T>
ScorePair<T> score_matrix(const std::vector<Tensor<T>>& videos,
                          const std::vector<Tensor<T>>& texts,
                          const std::vector<Mask>& clip_masks,
                          const std::vector<Mask>& word_masks) {
    std::size_t b = videos.size();
    ScorePair<T> out;
    out.b = b;
    out.t2v.assign(b * b, T(0));
    out.v2t.assign(b * b, T(0));
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            auto s = fine_grained_eval(videos[j].data(), texts[i].data(), videos[j].rows(),
                                       texts[i].rows(), videos[j].cols(), clip_masks[j],
                                       word_masks[i]);
            out.t2v[i * b + j] = s.m_t2k;
            out.v2t[i * b + j] = s.m_k2t;
        }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: parameter archive plus a JSON sidecar with the config.

template <typename T>
void save_params(const Model<T>& model, const std::string& path) {
    std::vector<std::pair<std::string, Tensor<T>>> entries;
    for (const auto& [name, t] : model.params.entries()) entries.emplace_back(name, t);
    save_archive(path, entries);
}

template <typename T>
void load_params(Model<T>& model, const std::string& path) {
    auto entries = load_archive<T>(path);
    std::size_t matched = 0;
    for (const auto& [name, t] : entries) {
        Tensor<T>* p = model.params.find(name);
        if (!p) throw IoError("checkpoint parameter '" + name + "' not in model");
        if (p->shape() != t.shape())
            throw IoError("checkpoint parameter '" + name + "' has shape " +
                          shape_str(t.shape()) + ", expected " + shape_str(p->shape()));
        std::copy(t.data().begin(), t.data().end(), p->data().begin());
        ++matched;
    }
    if (matched != model.params.entries().size())
        throw IoError("checkpoint is missing parameters");
}

}  // namespace seds
