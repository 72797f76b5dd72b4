#pragma once

// Optimizer, learning-rate schedule, and the deterministic training loop.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seds/metrics.hpp"
#include "seds/network.hpp"
#include "seds/random.hpp"

namespace seds {

struct TrainConfig {
    ModelConfig model;
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    std::uint64_t seed = 1;
    double alpha = 0.8;        // weight on the single-stream text losses
    double beta = 0.4;         // weight on the pose-RGB loss
    double lr_main = 1e-4;     // encoders, fusion, adapter, temperature
    double lr_aux = 1e-5;      // interaction transformers and text encoder
    double warmup_frac = 0.1;  // fraction of total steps spent in linear warmup
    bool cosine_scores = true; // L2-normalize features before similarity
    double min_conf = 0.3;     // frame quality threshold
    std::string precision = "f64";
    std::string val_split = "val";
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"model", c.model},
                       {"batch_size", c.batch_size},
                       {"epochs", c.epochs},
                       {"seed", c.seed},
                       {"alpha", c.alpha},
                       {"beta", c.beta},
                       {"lr_main", c.lr_main},
                       {"lr_aux", c.lr_aux},
                       {"warmup_frac", c.warmup_frac},
                       {"cosine_scores", c.cosine_scores},
                       {"min_conf", c.min_conf},
                       {"precision", c.precision},
                       {"val_split", c.val_split}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (j.contains("model")) j.at("model").get_to(c.model);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.lr_main = j.value("lr_main", c.lr_main);
    c.lr_aux = j.value("lr_aux", c.lr_aux);
    c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
    c.cosine_scores = j.value("cosine_scores", c.cosine_scores);
    c.min_conf = j.value("min_conf", c.min_conf);
    c.precision = j.value("precision", c.precision);
    c.val_split = j.value("val_split", c.val_split);
}

// Interaction transformers and the text encoder train on the smaller rate;
// everything else (pose GCN, fusion, RGB adapter, temperature) on the main one.
inline bool is_aux_param(const std::string& name) {
    return name.rfind("interact_p.", 0) == 0 || name.rfind("interact_r.", 0) == 0 ||
           name.rfind("text.", 0) == 0;
}

// Linear warmup to the base rate, then cosine decay to zero.
inline double lr_scale(std::size_t step, std::size_t total_steps, double warmup_frac) {
    if (total_steps == 0) return 0.0;
    auto warm = static_cast<std::size_t>(
        std::ceil(warmup_frac * static_cast<double>(total_steps)));
    if (warm > 0 && step < warm)
        return static_cast<double>(step + 1) / static_cast<double>(warm);
    std::size_t rest = total_steps > warm ? total_steps - warm : 1;
    double u = static_cast<double>(step - warm) / static_cast<double>(rest);
    return 0.5 * (1.0 + std::cos(u * 3.14159265358979323846));
}

template <typename T>
class Adam {
public:
    explicit Adam(const Model<T>& model, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const auto& [name, t] : model.params.entries()) {
            m_.emplace_back(t.numel(), 0.0);
            v_.emplace_back(t.numel(), 0.0);
        }
    }

    // lr per parameter is group_rate * schedule scale
    void step(Model<T>& model, double lr_main, double lr_aux) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        std::size_t idx = 0;
        for (auto& [name, p] : model.params.entries()) {
            double lr = is_aux_param(name) ? lr_aux : lr_main;
            auto& m = m_[idx];
            auto& v = v_[idx];
            ++idx;
            auto& val = p.data();
            auto& grad = p.grad();
            for (std::size_t i = 0; i < val.size(); ++i) {
                double g = static_cast<double>(grad[i]);
                if (!std::isfinite(g))
                    throw NumericError("non-finite gradient in parameter '" + name + "'");
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                double upd = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
                val[i] -= static_cast<T>(lr * upd);
            }
        }
    }

    std::size_t steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct TrainResult {
    std::string best_checkpoint;
    std::string last_checkpoint;
    double best_val_r1 = -1.0;
    double final_loss = 0.0;
    std::size_t steps = 0;
};

namespace detail {

template <typename T>
double split_t2v_r1(const Model<T>& model, const Dataset& ds,
                    const std::vector<std::size_t>& indices, const TrainConfig& cfg) {
    std::vector<Tensor<T>> vids, txts;
    std::vector<Mask> cms, wms;
    for (std::size_t idx : indices) {
        BatchSample<T> s =
            load_sample<T>(ds, idx, cfg.model.clips, cfg.model.max_words, cfg.min_conf);
        StreamFeatures<T> f = model.forward(s);
        vids.push_back(maybe_normalize(f.f_v, cfg.cosine_scores));
        txts.push_back(maybe_normalize(f.f_w, cfg.cosine_scores));
        cms.push_back(f.clip_mask);
        wms.push_back(f.word_mask);
    }
    ScorePair<T> sp = score_matrix(vids, txts, cms, wms);
    auto ranks = rank_queries(sp.t2v, sp.b);
    return make_report(ranks, "t2v").r1;
}

template <typename T>
void save_checkpoint(const Model<T>& model, const TrainConfig& cfg, const std::string& path,
                     std::size_t epoch, std::size_t step, double val_r1,
                     const std::string& rng_state) {
    save_params(model, path);
    nlohmann::json meta{{"epoch", epoch},
                        {"step", step},
                        {"val_r1", val_r1},
                        {"rng_state", rng_state},
                        {"train_config", cfg}};
    std::ofstream os(path + ".json");
    os << meta.dump(2) << "\n";
}

}  // namespace detail

// Deterministic end-to-end training. Writes to out_dir:
//   config.json, metrics.jsonl, ckpt_last.seda(+.json), ckpt_best.seda(+.json)
template <typename T>
TrainResult train_model(const Dataset& ds, const TrainConfig& cfg_in,
                        const std::string& out_dir) {
    TrainConfig cfg = cfg_in;
    if (cfg.model.text_vocab == 0) cfg.model.text_vocab = ds.vocab.size();
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream os(out_dir + "/config.json");
        os << nlohmann::json(cfg).dump(2) << "\n";
    }
    std::ofstream log(out_dir + "/metrics.jsonl");

    Model<T> model(cfg.model, mix_seed(cfg.seed, 0xA11CE));
    Adam<T> opt(model);
    Rng shuffle_rng(mix_seed(cfg.seed, 0x5EED));

    std::vector<std::size_t> train_idx = ds.split_indices("train");
    std::vector<std::size_t> val_idx = ds.split_indices(cfg.val_split);
    if (train_idx.empty()) throw DataError("no training samples in manifest");
    std::size_t steps_per_epoch =
        (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;
    std::size_t total_steps = steps_per_epoch * cfg.epochs;
    const T log_tau_cap = static_cast<T>(std::log(100.0));

    TrainResult res;
    res.best_checkpoint = out_dir + "/ckpt_best.seda";
    res.last_checkpoint = out_dir + "/ckpt_last.seda";
    std::size_t step = 0;
    double last_loss = 0.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        shuffle_rng.shuffle(order.begin(), order.end());
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            std::size_t bend = std::min(order.size(), b0 + cfg.batch_size);
            std::vector<std::size_t> idx(order.begin() + b0, order.begin() + bend);
            if (idx.size() < 2) continue;  // a trailing singleton has no negatives
            Batch<T> batch =
                load_batch<T>(ds, idx, cfg.model.clips, cfg.model.max_words, cfg.min_conf);
            std::vector<StreamFeatures<T>> feats;
            for (const auto& s : batch.samples) feats.push_back(model.forward(s));
            LossParts<T> parts = compute_loss(model, feats, static_cast<T>(cfg.alpha),
                                              static_cast<T>(cfg.beta), cfg.cosine_scores);
            double l_total = static_cast<double>(parts.total.item());
            double l_tv = static_cast<double>(parts.tv.item());
            double l_tp = static_cast<double>(parts.tp.item());
            double l_tr = static_cast<double>(parts.tr.item());
            double l_pr = static_cast<double>(parts.pr.item());
            double recon = l_tv + cfg.alpha * (l_tp + l_tr) + cfg.beta * l_pr;
            if (!std::isfinite(l_total))
                throw NumericError("non-finite loss at step " + std::to_string(step) +
                                   "; last epoch checkpoint kept");
            if (std::abs(recon - l_total) > 1e-9 * std::max(1.0, std::abs(l_total)))
                throw NumericError("loss components do not sum to the total");

            for (auto& [name, p] : model.params.entries()) p.zero_grad();
            parts.total.backward();
            double s = lr_scale(step, total_steps, cfg.warmup_frac);
            opt.step(model, cfg.lr_main * s, cfg.lr_aux * s);
            // keep the exp-scale temperature at or below 100
            auto& lt = model.log_tau.data();
            if (lt[0] > log_tau_cap) lt[0] = log_tau_cap;

            nlohmann::json line{{"epoch", epoch},
                                {"step", step},
                                {"loss_total", l_total},
                                {"loss_tv", l_tv},
                                {"loss_tp", l_tp},
                                {"loss_tr", l_tr},
                                {"loss_pr", l_pr},
                                {"lr_main", cfg.lr_main * s},
                                {"lr_aux", cfg.lr_aux * s}};
            log << line.dump() << "\n";
            last_loss = l_total;
            ++step;
        }

        double val_r1 = -1.0;
        if (!val_idx.empty()) val_r1 = detail::split_t2v_r1(model, ds, val_idx, cfg);
        nlohmann::json eline{{"epoch", epoch}, {"step", step}, {"val_r1", val_r1}};
        log << eline.dump() << "\n";
        log.flush();

        std::string rng_state = shuffle_rng.state();
        detail::save_checkpoint(model, cfg, res.last_checkpoint, epoch, step, val_r1,
                                rng_state);
        if (val_idx.empty() || val_r1 >= res.best_val_r1) {
            res.best_val_r1 = val_r1;
            detail::save_checkpoint(model, cfg, res.best_checkpoint, epoch, step, val_r1,
                                    rng_state);
        }
    }
    res.final_loss = last_loss;
    res.steps = step;
    return res;
}

}  // namespace seds
