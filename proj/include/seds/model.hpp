#pragma once

// Model configuration, parameter store, and the three encoders:
// pose GCN encoder with temporal fusion, RGB feature adapter, and the
// text encoder, plus the shared interaction transformer blocks.

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seds/dataset.hpp"
#include "seds/random.hpp"
#include "seds/tensor.hpp"
#include "seds/topology.hpp"

namespace seds {

enum class FusionVariant { CGAF, AddMlp, ConcateMlp, ConcateTrans, CrossAtten };

inline std::string to_string(FusionVariant v) {
    switch (v) {
        case FusionVariant::CGAF: return "cgaf";
        case FusionVariant::AddMlp: return "add_mlp";
        case FusionVariant::ConcateMlp: return "concate_mlp";
        case FusionVariant::ConcateTrans: return "concate_trans";
        case FusionVariant::CrossAtten: return "cross_atten";
    }
    return "cgaf";
}

inline FusionVariant fusion_variant_from(const std::string& s) {
    if (s == "cgaf") return FusionVariant::CGAF;
    if (s == "add_mlp") return FusionVariant::AddMlp;
    if (s == "concate_mlp") return FusionVariant::ConcateMlp;
    if (s == "concate_trans") return FusionVariant::ConcateTrans;
    if (s == "cross_atten") return FusionVariant::CrossAtten;
    throw std::invalid_argument("unknown fusion variant '" + s + "'");
}

struct FusionConfig {
    FusionVariant variant = FusionVariant::CGAF;
    std::size_t n_neighbors = 7;
    double offset_clip = 0.0;  // 0 means use n_neighbors as the clip radius
    bool scaled_dot = true;    // q.k / sqrt(D); false selects the literal unscaled form
    std::size_t heads = 1;
    std::size_t layers = 2;

    double clip_radius() const {
        return offset_clip > 0.0 ? offset_clip : static_cast<double>(n_neighbors);
    }
};

struct ModelConfig {
    std::size_t d_model = 64;    // D
    std::size_t d_group = 32;    // per-group GCN output dim D_g
    std::size_t gcn_depth = 2;
    std::size_t tr_depth = 2;    // interaction transformer depth
    std::size_t tr_heads = 4;
    std::size_t tr_ff = 0;       // 0 -> 4 * d_model
    bool anchor_norm = true;
    std::size_t text_vocab = 0;  // filled from the manifest when 0
    std::size_t text_depth = 2;
    std::size_t clips = 16;      // T
    std::size_t max_words = 32;  // L
    FusionConfig fusion;

    std::size_t ff_dim() const { return tr_ff ? tr_ff : 4 * d_model; }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"d_model", c.d_model},
                       {"d_group", c.d_group},
                       {"gcn_depth", c.gcn_depth},
                       {"tr_depth", c.tr_depth},
                       {"tr_heads", c.tr_heads},
                       {"tr_ff", c.tr_ff},
                       {"anchor_norm", c.anchor_norm},
                       {"text_vocab", c.text_vocab},
                       {"text_depth", c.text_depth},
                       {"clips", c.clips},
                       {"max_words", c.max_words},
                       {"fusion",
                        {{"variant", to_string(c.fusion.variant)},
                         {"n_neighbors", c.fusion.n_neighbors},
                         {"offset_clip", c.fusion.offset_clip},
                         {"scaled_dot", c.fusion.scaled_dot},
                         {"heads", c.fusion.heads},
                         {"layers", c.fusion.layers}}}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.d_model = j.value("d_model", c.d_model);
    c.d_group = j.value("d_group", c.d_group);
    c.gcn_depth = j.value("gcn_depth", c.gcn_depth);
    c.tr_depth = j.value("tr_depth", c.tr_depth);
    c.tr_heads = j.value("tr_heads", c.tr_heads);
    c.tr_ff = j.value("tr_ff", c.tr_ff);
    c.anchor_norm = j.value("anchor_norm", c.anchor_norm);
    c.text_vocab = j.value("text_vocab", c.text_vocab);
    c.text_depth = j.value("text_depth", c.text_depth);
    c.clips = j.value("clips", c.clips);
    c.max_words = j.value("max_words", c.max_words);
    if (j.contains("fusion")) {
        const auto& f = j["fusion"];
        c.fusion.variant = fusion_variant_from(f.value("variant", to_string(c.fusion.variant)));
        c.fusion.n_neighbors = f.value("n_neighbors", c.fusion.n_neighbors);
        c.fusion.offset_clip = f.value("offset_clip", c.fusion.offset_clip);
        c.fusion.scaled_dot = f.value("scaled_dot", c.fusion.scaled_dot);
        c.fusion.heads = f.value("heads", c.fusion.heads);
        c.fusion.layers = f.value("layers", c.fusion.layers);
    }
}

// ---------------------------------------------------------------------------
// Parameter store: insertion-ordered named leaf tensors.

template <typename T>
class ParamStore {
public:
    explicit ParamStore(std::uint64_t init_seed = 0) : rng_(init_seed) {}

    Tensor<T> uniform(const std::string& name, Shape shape, double fan_in, double fan_out) {
        double s = std::sqrt(6.0 / (fan_in + fan_out));
        Tensor<T> t = Tensor<T>::zeros(shape, true);
        for (auto& v : t.data()) v = static_cast<T>(rng_.uniform(-s, s));
        add(name, t);
        return t;
    }

    Tensor<T> normal(const std::string& name, Shape shape, double stddev) {
        Tensor<T> t = Tensor<T>::zeros(shape, true);
        for (auto& v : t.data()) v = static_cast<T>(rng_.normal(0.0, stddev));
        add(name, t);
        return t;
    }

    Tensor<T> constant(const std::string& name, Shape shape, T value) {
        Tensor<T> t = Tensor<T>::full(shape, value, true);
        add(name, t);
        return t;
    }

    void add(const std::string& name, const Tensor<T>& t) {
        for (const auto& [n, _] : params_)
            if (n == name) throw std::invalid_argument("duplicate parameter '" + name + "'");
        params_.emplace_back(name, t);
    }

    const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return params_; }
    std::vector<std::pair<std::string, Tensor<T>>>& entries() { return params_; }

    Tensor<T>* find(const std::string& name) {
        for (auto& [n, t] : params_)
            if (n == name) return &t;
        return nullptr;
    }

private:
    Rng rng_;
    std::vector<std::pair<std::string, Tensor<T>>> params_;
};

template <typename T>
struct Linear {
    Tensor<T> w, b;

    static Linear create(ParamStore<T>& ps, const std::string& name, std::size_t in,
                         std::size_t out) {
        Linear l;
        l.w = ps.uniform(name + ".w", {in, out}, in, out);
        l.b = ps.constant(name + ".b", {out}, T(0));
        return l;
    }

    Tensor<T> operator()(const Tensor<T>& x) const { return add_rowvec(matmul(x, w), b); }
};

template <typename T>
struct LayerNormP {
    Tensor<T> gain, bias;

    static LayerNormP create(ParamStore<T>& ps, const std::string& name, std::size_t d) {
        LayerNormP l;
        l.gain = ps.constant(name + ".gain", {d}, T(1));
        l.bias = ps.constant(name + ".bias", {d}, T(0));
        return l;
    }

    Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gain, bias); }
};

// ---------------------------------------------------------------------------
// GCN layer (one graph convolution over a keypoint group)

template <typename T>
struct GcnLayer {
    std::vector<T> a_hat;  // normalized adjacency, [K x K]
    std::size_t k = 0;
    Tensor<T> w;
    bool apply_relu = true;

    static GcnLayer create(ParamStore<T>& ps, const std::string& name, const GroupTopology& g,
                           std::size_t in, std::size_t out) {
        GcnLayer l;
        l.k = g.num_points;
        auto a = g.normalized_adjacency();
        l.a_hat.assign(a.begin(), a.end());
        l.w = ps.uniform(name + ".w", {in, out}, in, out);
        return l;
    }
};

// f may hold one frame [K x D_in] or F stacked frames [F*K x D_in].
template <typename T>
Tensor<T> gcn_forward(const GcnLayer<T>& layer, const Tensor<T>& f) {
    if (f.rank() != 2 || f.rows() % layer.k != 0 || f.cols() != layer.w.rows())
        throw ShapeError("gcn_forward: feature shape " + shape_str(f.shape()) +
                         " incompatible with K=" + std::to_string(layer.k));
    Tensor<T> mixed = matmul(adjacency_mix(layer.a_hat, layer.k, f), layer.w);
    return layer.apply_relu ? relu(mixed) : mixed;
}

// ---------------------------------------------------------------------------
// Transformer encoder block (pre-norm), used by interaction and text encoders.

template <typename T>
struct TransformerBlock {
    LayerNormP<T> ln1, ln2;
    Linear<T> q, k, v, o, ff1, ff2;
    std::size_t heads = 1;

    static TransformerBlock create(ParamStore<T>& ps, const std::string& name, std::size_t d,
                                   std::size_t ff, std::size_t heads) {
        TransformerBlock b;
        b.heads = heads;
        b.ln1 = LayerNormP<T>::create(ps, name + ".ln1", d);
        b.ln2 = LayerNormP<T>::create(ps, name + ".ln2", d);
        b.q = Linear<T>::create(ps, name + ".q", d, d);
        b.k = Linear<T>::create(ps, name + ".k", d, d);
        b.v = Linear<T>::create(ps, name + ".v", d, d);
        b.o = Linear<T>::create(ps, name + ".o", d, d);
        b.ff1 = Linear<T>::create(ps, name + ".ff1", d, ff);
        b.ff2 = Linear<T>::create(ps, name + ".ff2", ff, d);
        return b;
    }

    // key_mask: length-T validity of key positions; padded keys are excluded
    // from every softmax so they cannot influence valid outputs.
    Tensor<T> operator()(const Tensor<T>& x, const std::vector<std::uint8_t>& key_mask) const {
        std::size_t t = x.rows(), d = x.cols();
        if (key_mask.size() != t) throw ShapeError("transformer: mask length mismatch");
        if (d % heads != 0) throw ShapeError("transformer: d_model not divisible by heads");
        std::size_t dh = d / heads;
        Tensor<T> h = ln1(x);
        Tensor<T> qs = q(h), ks = k(h), vs = v(h);
        Mask score_mask(t * t, 0);
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < t; ++j) score_mask[i * t + j] = key_mask[j];
        std::vector<Tensor<T>> head_outs;
        T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));
        for (std::size_t hd = 0; hd < heads; ++hd) {
            Tensor<T> qh = slice_cols(qs, hd * dh, dh);
            Tensor<T> kh = slice_cols(ks, hd * dh, dh);
            Tensor<T> vh = slice_cols(vs, hd * dh, dh);
            Tensor<T> scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
            Tensor<T> attn = softmax2d(scores, 1, &score_mask);
            head_outs.push_back(matmul(attn, vh));
        }
        Tensor<T> merged = heads == 1 ? head_outs[0] : concat_cols(head_outs);
        Tensor<T> x1 = add(x, o(merged));
        Tensor<T> h2 = ln2(x1);
        return add(x1, ff2(gelu(ff1(h2))));
    }
};

// ---------------------------------------------------------------------------
// Pose encoder

template <typename T>
struct PoseEncoder {
    std::vector<GcnLayer<T>> hand_layers;  // shared by both hands
    std::vector<GcnLayer<T>> body_layers;
    Linear<T> conv1, conv2;  // 1D convs over clip frames, kernel 5 stride 2 pad 2
    Linear<T> proj;          // 3*D_g -> D
    bool anchor_norm = true;
    std::size_t d_group = 0;

    static PoseEncoder create(ParamStore<T>& ps, const ModelConfig& cfg,
                              const SkeletonTopology& topo) {
        PoseEncoder e;
        e.anchor_norm = cfg.anchor_norm;
        e.d_group = cfg.d_group;
        std::size_t in = 3;
        for (std::size_t l = 0; l < cfg.gcn_depth; ++l) {
            e.hand_layers.push_back(GcnLayer<T>::create(
                ps, "pose.gcn_hand." + std::to_string(l), topo.hand, in, cfg.d_group));
            e.body_layers.push_back(GcnLayer<T>::create(
                ps, "pose.gcn_body." + std::to_string(l), topo.body, in, cfg.d_group));
            in = cfg.d_group;
        }
        std::size_t c = 3 * cfg.d_group;
        e.conv1 = Linear<T>::create(ps, "pose.tconv1", 5 * c, c);
        e.conv2 = Linear<T>::create(ps, "pose.tconv2", 5 * c, c);
        e.proj = Linear<T>::create(ps, "pose.proj", c, cfg.d_model);
        return e;
    }

    // Layer-0 input per keypoint is (x, y, confidence), optionally
    // anchor-relative: hands relative to their wrist, body relative to the nose.
    Tensor<T> group_input(const PoseSequence& p, std::size_t offset, std::size_t count,
                          std::size_t anchor_local) const {
        std::vector<T> v(p.frames * count * 3);
        for (std::size_t f = 0; f < p.frames; ++f) {
            double ax = 0.0, ay = 0.0;
            if (anchor_norm) {
                ax = p.at(f, offset + anchor_local, 0);
                ay = p.at(f, offset + anchor_local, 1);
            }
            for (std::size_t k = 0; k < count; ++k) {
                v[(f * count + k) * 3 + 0] = static_cast<T>(p.at(f, offset + k, 0) - ax);
                v[(f * count + k) * 3 + 1] = static_cast<T>(p.at(f, offset + k, 1) - ay);
                v[(f * count + k) * 3 + 2] = static_cast<T>(p.at(f, offset + k, 2));
            }
        }
        return Tensor<T>::from({p.frames * count, 3}, std::move(v));
    }

    // filtered pose + clip plan -> f^{p'} [T x D]
    Tensor<T> operator()(const PoseSequence& p, const ClipPlan& plan) const {
        Tensor<T> left = group_input(p, kLeftHandOffset, kHandPoints, 0);
        Tensor<T> right = group_input(p, kRightHandOffset, kHandPoints, 0);
        Tensor<T> body = group_input(p, kBodyOffset, kBodyPoints, 0);
        for (const auto& l : hand_layers) {
            left = gcn_forward(l, left);
            right = gcn_forward(l, right);
        }
        for (const auto& l : body_layers) body = gcn_forward(l, body);
        // per-frame group feature = mean over the group's keypoints
        Tensor<T> fl = block_mean_rows(left, kHandPoints);
        Tensor<T> fr = block_mean_rows(right, kHandPoints);
        Tensor<T> fb = block_mean_rows(body, kBodyPoints);
        Tensor<T> frames = concat_cols<T>({fl, fr, fb});  // [F x 3*D_g]

        // gather each clip's 16 frames
        std::vector<std::size_t> idx;
        idx.reserve(plan.starts.size() * kClipLen);
        for (std::size_t start : plan.starts)
            for (std::size_t f = 0; f < kClipLen; ++f) idx.push_back(start + f);
        Tensor<T> clips = gather_rows(frames, idx);  // [T*16 x 3*D_g]

        // temporal fusion: 16 -> 8 -> 4 -> mean-pool -> 1
        Tensor<T> c1 = relu(conv1(im2col_blocked(clips, kClipLen, 5, 2, 2)));
        Tensor<T> c2 = relu(conv2(im2col_blocked(c1, 8, 5, 2, 2)));
        Tensor<T> pooled = block_mean_rows(c2, 4);  // [T x 3*D_g]
        return proj(pooled);
    }
};

// ---------------------------------------------------------------------------
// RGB adapter: the only trainable map before the RGB interaction transformer.

template <typename T>
struct RgbAdapter {
    Linear<T> proj;

    static RgbAdapter create(ParamStore<T>& ps, const ModelConfig& cfg) {
        RgbAdapter a;
        a.proj = Linear<T>::create(ps, "rgb.adapter", kRgbDim, cfg.d_model);
        return a;
    }

    Tensor<T> operator()(const Tensor<T>& feats) const { return proj(feats); }
};

// ---------------------------------------------------------------------------
// Interaction transformer (per modality)

template <typename T>
struct InteractionTransformer {
    Tensor<T> pos;  // learned absolute positions [T_max x D]
    std::vector<TransformerBlock<T>> blocks;

    static InteractionTransformer create(ParamStore<T>& ps, const std::string& name,
                                         const ModelConfig& cfg) {
        InteractionTransformer tr;
        tr.pos = ps.normal(name + ".pos", {cfg.clips, cfg.d_model}, 0.02);
        for (std::size_t l = 0; l < cfg.tr_depth; ++l)
            tr.blocks.push_back(TransformerBlock<T>::create(
                ps, name + ".block." + std::to_string(l), cfg.d_model, cfg.ff_dim(),
                cfg.tr_heads));
        return tr;
    }

    Tensor<T> operator()(const Tensor<T>& x, const std::vector<std::uint8_t>& mask) const {
        if (x.rows() > pos.rows()) throw ShapeError("interaction: sequence longer than positions");
        Tensor<T> h = add(x, slice_rows(pos, 0, x.rows()));
        for (const auto& b : blocks) h = b(h, mask);
        return h;
    }
};

// ---------------------------------------------------------------------------
// Text encoder

template <typename T>
struct TextEncoder {
    Tensor<T> embed;  // [V x D]
    Tensor<T> pos;    // [L_max x D]
    std::vector<TransformerBlock<T>> blocks;
    LayerNormP<T> ln_f;
    Linear<T> proj;

    static TextEncoder create(ParamStore<T>& ps, const ModelConfig& cfg) {
        TextEncoder te;
        te.embed = ps.normal("text.embed", {cfg.text_vocab, cfg.d_model}, 0.02);
        te.pos = ps.normal("text.pos", {cfg.max_words, cfg.d_model}, 0.02);
        for (std::size_t l = 0; l < cfg.text_depth; ++l)
            te.blocks.push_back(TransformerBlock<T>::create(
                ps, "text.block." + std::to_string(l), cfg.d_model, cfg.ff_dim(), cfg.tr_heads));
        te.ln_f = LayerNormP<T>::create(ps, "text.ln_f", cfg.d_model);
        te.proj = Linear<T>::create(ps, "text.proj", cfg.d_model, cfg.d_model);
        return te;
    }

    // tokens already truncated to max_words; returns f^w [L x D]
    Tensor<T> operator()(const std::vector<std::size_t>& tokens) const {
        if (tokens.empty()) throw ShapeError("encode_text: empty token sequence");
        if (tokens.size() > pos.rows()) throw ShapeError("encode_text: too many tokens");
        Tensor<T> h = add(gather_rows(embed, tokens), slice_rows(pos, 0, tokens.size()));
        std::vector<std::uint8_t> mask(tokens.size(), 1);
        for (const auto& b : blocks) h = b(h, mask);
        return proj(ln_f(h));
    }
};

}  // namespace seds
