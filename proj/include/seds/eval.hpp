#pragma once

// Checkpoint loading and retrieval evaluation over a dataset split.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seds/metrics.hpp"
#include "seds/network.hpp"
#include "seds/trainer.hpp"

namespace seds {

template <typename T>
struct LoadedCheckpoint {
    TrainConfig cfg;
    Model<T> model;
    std::string path;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path);
    std::ifstream ms(path + ".json");
    if (!ms) throw IoError("checkpoint metadata not found: " + path + ".json");
    nlohmann::json meta;
    ms >> meta;
    TrainConfig cfg = meta.at("train_config").get<TrainConfig>();
    LoadedCheckpoint<T> out{cfg, Model<T>(cfg.model, 0), path};
    load_params(out.model, path);
    return out;
}

struct EvalResult {
    RetrievalReport t2v;
    RetrievalReport v2t;
    std::vector<std::string> ids;
};

template <typename T>
struct SplitFeatures {
    std::vector<std::string> ids;
    std::vector<StreamFeatures<T>> feats;
};

template <typename T>
SplitFeatures<T> extract_features(const LoadedCheckpoint<T>& ck, const Dataset& ds,
                                  const std::string& split) {
    SplitFeatures<T> out;
    auto idx = ds.split_indices(split);
    if (idx.empty()) throw DataError("split '" + split + "' has no samples");
    for (std::size_t i : idx) {
        BatchSample<T> s = load_sample<T>(ds, i, ck.cfg.model.clips, ck.cfg.model.max_words,
                                          ck.cfg.min_conf);
        out.ids.push_back(s.id);
        out.feats.push_back(ck.model.forward(s));
    }
    return out;
}

template <typename T>
const Tensor<T>& modality_stream(const StreamFeatures<T>& f, const std::string& modality) {
    if (modality == "fused") return f.f_v;
    if (modality == "pose") return f.f_p;
    if (modality == "rgb") return f.f_r;
    throw ConfigError("unknown modality '" + modality + "'");
}

template <typename T>
EvalResult evaluate(const LoadedCheckpoint<T>& ck, const Dataset& ds, const std::string& split,
                    const std::string& modality = "fused") {
    SplitFeatures<T> sf = extract_features(ck, ds, split);
    std::vector<Tensor<T>> vids, txts;
    std::vector<Mask> cms, wms;
    for (const auto& f : sf.feats) {
        vids.push_back(maybe_normalize(modality_stream(f, modality), ck.cfg.cosine_scores));
        txts.push_back(maybe_normalize(f.f_w, ck.cfg.cosine_scores));
        cms.push_back(f.clip_mask);
        wms.push_back(f.word_mask);
    }
    ScorePair<T> sp = score_matrix(vids, txts, cms, wms);
    // v2t ranks video queries over texts: column view of the video-side scores
    std::vector<T> v2t(sp.b * sp.b);
    for (std::size_t i = 0; i < sp.b; ++i)
        for (std::size_t j = 0; j < sp.b; ++j) v2t[j * sp.b + i] = sp.v2t[i * sp.b + j];
    EvalResult res;
    res.ids = sf.ids;
    res.t2v = make_report(rank_queries(sp.t2v, sp.b), "t2v");
    res.v2t = make_report(rank_queries(v2t, sp.b), "v2t");
    for (auto* rep : {&res.t2v, &res.v2t}) {
        rep->checkpoint = ck.path;
        rep->split = split;
        rep->modality = modality;
    }
    return res;
}

// Dump the fine-grained similarity matrices of selected samples against their
// own text: one SEDT per stream plus a JSON sidecar with the scalar scores.
template <typename T>
void export_similarities(const LoadedCheckpoint<T>& ck, const Dataset& ds,
                         const std::string& split, const std::vector<std::string>& ids,
                         const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    SplitFeatures<T> sf = extract_features(ck, ds, split);
    nlohmann::json side = nlohmann::json::array();
    for (const auto& want : ids) {
        std::size_t pos = sf.ids.size();
        for (std::size_t i = 0; i < sf.ids.size(); ++i)
            if (sf.ids[i] == want) pos = i;
        if (pos == sf.ids.size())
            throw DataError("sample '" + want + "' not in split '" + split + "'");
        const StreamFeatures<T>& f = sf.feats[pos];
        Tensor<T> txt = maybe_normalize(f.f_w, ck.cfg.cosine_scores);
        nlohmann::json entry{{"id", want}, {"split", split}};
        for (const std::string& m : {std::string("pose"), std::string("rgb"),
                                     std::string("fused")}) {
            Tensor<T> vid = maybe_normalize(modality_stream(f, m), ck.cfg.cosine_scores);
            auto s = fine_grained_eval(vid.data(), txt.data(), vid.rows(), txt.rows(),
                                       vid.cols(), f.clip_mask, f.word_mask);
            Tensor<T> e = Tensor<T>::from({vid.rows(), txt.rows()}, std::vector<T>(s.e));
            std::string file = out_dir + "/sim_" + want + "_" + m + ".sedt";
            save_sedt(file, e);
            entry[m] = {{"file", file}, {"m_t2k", s.m_t2k}, {"m_k2t", s.m_k2t}};
        }
        side.push_back(entry);
    }
    std::ofstream os(out_dir + "/similarities.json");
    os << side.dump(2) << "\n";
}

}  // namespace seds
