#pragma once

// Cross Gloss Attention Fusion: offset-based local cross attention between
// the pose and RGB streams, two-stage MLP fusion, and the baseline fusion
// variants used for ablations.

#include <cmath>
#include <string>
#include <vector>

#include "seds/model.hpp"
#include "seds/tensor.hpp"

namespace seds {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// One gloss-attention layer: q/k/v projections, an offset projection that
// bends a constant local window of N positions per query, interpolated
// sampling of keys/values at the adjusted positions, then a transformer-style
// residual + feed-forward wrapper (pre-norm).
template <typename T>
struct GlossAttentionLayer {
    LayerNormP<T> ln_q, ln_kv, ln2;
    Linear<T> q, k, v, o, ff1, ff2;
    Tensor<T> w_o;  // [D x N] offset projection, zero-initialized
    std::size_t n_neighbors = 7;
    double clip_radius = 7.0;
    bool scaled_dot = true;
    std::size_t heads = 1;

    static GlossAttentionLayer create(ParamStore<T>& ps, const std::string& name,
                                      const ModelConfig& cfg) {
        GlossAttentionLayer l;
        l.n_neighbors = cfg.fusion.n_neighbors;
        l.clip_radius = cfg.fusion.clip_radius();
        l.scaled_dot = cfg.fusion.scaled_dot;
        l.heads = cfg.fusion.heads;
        std::size_t d = cfg.d_model;
        l.ln_q = LayerNormP<T>::create(ps, name + ".ln_q", d);
        l.ln_kv = LayerNormP<T>::create(ps, name + ".ln_kv", d);
        l.ln2 = LayerNormP<T>::create(ps, name + ".ln2", d);
        l.q = Linear<T>::create(ps, name + ".q", d, d);
        l.k = Linear<T>::create(ps, name + ".k", d, d);
        l.v = Linear<T>::create(ps, name + ".v", d, d);
        l.o = Linear<T>::create(ps, name + ".o", d, d);
        l.ff1 = Linear<T>::create(ps, name + ".ff1", d, cfg.ff_dim());
        l.ff2 = Linear<T>::create(ps, name + ".ff2", cfg.ff_dim(), d);
        l.w_o = ps.constant(name + ".w_o", {d, cfg.fusion.n_neighbors}, T(0));
        return l;
    }

    // Constant window positions: P[t][i] = t - floor(N/2) + i.
    Tensor<T> constant_positions(std::size_t t_len) const {
        std::vector<T> p(t_len * n_neighbors);
        long half = static_cast<long>(n_neighbors / 2);
        for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t i = 0; i < n_neighbors; ++i)
                p[t * n_neighbors + i] =
                    static_cast<T>(static_cast<long>(t) - half + static_cast<long>(i));
        return Tensor<T>::from({t_len, n_neighbors}, std::move(p));
    }

    // Adjusted positions (P + clip(O)) mod T for given projected queries.
    Tensor<T> adjusted_positions(const Tensor<T>& q_proj) const {
        std::size_t t_len = q_proj.rows();
        Tensor<T> offsets = clip(matmul(q_proj, w_o), static_cast<T>(-clip_radius),
                                 static_cast<T>(clip_radius));
        return wrap_mod(add(constant_positions(t_len), offsets), static_cast<T>(t_len));
    }

    // Raw attention output h (no residual/out-proj), from projected q/k/v.
    Tensor<T> attention_core(const Tensor<T>& qp, const Tensor<T>& kp,
                             const Tensor<T>& vp) const {
        std::size_t t_len = qp.rows(), d = qp.cols();
        if (n_neighbors > t_len)
            throw ConfigError("gloss attention: N=" + std::to_string(n_neighbors) +
                              " exceeds sequence length " + std::to_string(t_len));
        if (d % heads != 0) throw ConfigError("gloss attention: d_model not divisible by heads");
        std::size_t dh = d / heads;
        Tensor<T> pos_hat = adjusted_positions(qp);
        std::vector<Tensor<T>> outs;
        for (std::size_t hd = 0; hd < heads; ++hd) {
            Tensor<T> qh = heads == 1 ? qp : slice_cols(qp, hd * dh, dh);
            Tensor<T> kh = heads == 1 ? kp : slice_cols(kp, hd * dh, dh);
            Tensor<T> vh = heads == 1 ? vp : slice_cols(vp, hd * dh, dh);
            Tensor<T> k_hat = interp_gather(kh, pos_hat);
            Tensor<T> v_hat = interp_gather(vh, pos_hat);
            Tensor<T> scores = rowdot3(k_hat, qh);
            if (scaled_dot) scores = scale(scores, T(1) / std::sqrt(static_cast<T>(dh)));
            Tensor<T> weights = softmax2d(scores, 1);
            outs.push_back(weight3(v_hat, weights));
        }
        return heads == 1 ? outs[0] : concat_cols(outs);
    }

    // Full block: cross gloss attention from f_q into f_kv with residual,
    // pre-norm and feed-forward.
    Tensor<T> operator()(const Tensor<T>& f_q, const Tensor<T>& f_kv,
                         const std::vector<std::uint8_t>& mask) const {
        check_same_shape(f_q, f_kv, "gloss_attention");
        if (mask.size() != f_q.rows()) throw ShapeError("gloss_attention: mask length mismatch");
        bool any = false;
        for (auto m : mask) any = any || m;
        if (!any) throw NumericError("gloss_attention: all positions masked");
        Tensor<T> hq = ln_q(f_q);
        Tensor<T> hkv = ln_kv(f_kv);
        Tensor<T> h = attention_core(q(hq), k(hkv), v(hkv));
        Tensor<T> x = add(f_q, o(h));
        return add(x, ff2(gelu(ff1(ln2(x)))));
    }
};

// Stage-2 fusion head: MLP on [f_hat_p, f_hat_r] plus both residuals.
template <typename T>
struct FusionHead {
    Linear<T> fc1, fc2;  // 2D -> 2D -> D, GELU between

    static FusionHead create(ParamStore<T>& ps, const std::string& name, std::size_t d) {
        FusionHead h;
        h.fc1 = Linear<T>::create(ps, name + ".fc1", 2 * d, 2 * d);
        h.fc2 = Linear<T>::create(ps, name + ".fc2", 2 * d, d);
        return h;
    }

    Tensor<T> operator()(const Tensor<T>& f_hat_p, const Tensor<T>& f_hat_r) const {
        Tensor<T> mlp = fc2(gelu(fc1(concat_cols<T>({f_hat_p, f_hat_r}))));
        return add(mlp, add(f_hat_p, f_hat_r));
    }
};

// ---------------------------------------------------------------------------
// Fusion module: CGAF by default, or one of the baseline variants.

template <typename T>
struct FusionModule {
    FusionVariant variant = FusionVariant::CGAF;
    // CGAF
    std::vector<GlossAttentionLayer<T>> p2r;  // queries pose, keys/values RGB
    std::vector<GlossAttentionLayer<T>> r2p;
    FusionHead<T> head;
    // AddMlp / ConcateMlp
    Linear<T> mlp1, mlp2;
    // ConcateTrans
    TransformerBlock<T> trans;
    // CrossAtten
    TransformerBlock<T> cross_p, cross_r;

    static FusionModule create(ParamStore<T>& ps, const ModelConfig& cfg) {
        FusionModule m;
        m.variant = cfg.fusion.variant;
        std::size_t d = cfg.d_model;
        switch (m.variant) {
            case FusionVariant::CGAF:
                for (std::size_t l = 0; l < cfg.fusion.layers; ++l) {
                    m.p2r.push_back(GlossAttentionLayer<T>::create(
                        ps, "fusion.p2r." + std::to_string(l), cfg));
                    m.r2p.push_back(GlossAttentionLayer<T>::create(
                        ps, "fusion.r2p." + std::to_string(l), cfg));
                }
                m.head = FusionHead<T>::create(ps, "fusion.head", d);
                break;
            case FusionVariant::AddMlp:
                m.mlp1 = Linear<T>::create(ps, "fusion.mlp1", d, d);
                m.mlp2 = Linear<T>::create(ps, "fusion.mlp2", d, d);
                break;
            case FusionVariant::ConcateMlp:
                m.mlp1 = Linear<T>::create(ps, "fusion.mlp1", 2 * d, 2 * d);
                m.mlp2 = Linear<T>::create(ps, "fusion.mlp2", 2 * d, d);
                break;
            case FusionVariant::ConcateTrans:
                m.trans = TransformerBlock<T>::create(ps, "fusion.trans", d, cfg.ff_dim(),
                                                      cfg.fusion.heads);
                break;
            case FusionVariant::CrossAtten:
                m.cross_p = TransformerBlock<T>::create(ps, "fusion.cross_p", d, cfg.ff_dim(),
                                                        cfg.fusion.heads);
                m.cross_r = TransformerBlock<T>::create(ps, "fusion.cross_r", d, cfg.ff_dim(),
                                                        cfg.fusion.heads);
                break;
        }
        return m;
    }

    // Stage 1 of CGAF: both cross-attention stacks.
    std::pair<Tensor<T>, Tensor<T>> cgaf_stage1(const Tensor<T>& f_p, const Tensor<T>& f_r,
                                                const std::vector<std::uint8_t>& mask) const {
        Tensor<T> fp = f_p, fr = f_r;
        for (const auto& l : p2r) fp = l(fp, f_r, mask);
        for (const auto& l : r2p) fr = l(fr, f_p, mask);
        return {fp, fr};
    }

    Tensor<T> cgaf_fuse(const Tensor<T>& f_p, const Tensor<T>& f_r,
                        const std::vector<std::uint8_t>& mask) const {
        auto [fp_hat, fr_hat] = cgaf_stage1(f_p, f_r, mask);
        return head(fp_hat, fr_hat);
    }

    // Standard bidirectional cross attention built from a transformer block's
    // projections, full (non-local) attention.
    Tensor<T> cross_attend(const TransformerBlock<T>& b, const Tensor<T>& f_q,
                           const Tensor<T>& f_kv, const std::vector<std::uint8_t>& mask) const {
        std::size_t t = f_q.rows(), d = f_q.cols();
        std::size_t dh = d / b.heads;
        Tensor<T> hq = b.ln1(f_q);
        Tensor<T> hk = b.ln1(f_kv);
        Tensor<T> qs = b.q(hq), ks = b.k(hk), vs = b.v(hk);
        Mask score_mask(t * t, 0);
        for (std::size_t i = 0; i < t; ++i)
            for (std::size_t j = 0; j < t; ++j) score_mask[i * t + j] = mask[j];
        std::vector<Tensor<T>> outs;
        for (std::size_t hd = 0; hd < b.heads; ++hd) {
            Tensor<T> qh = slice_cols(qs, hd * dh, dh);
            Tensor<T> kh = slice_cols(ks, hd * dh, dh);
            Tensor<T> vh = slice_cols(vs, hd * dh, dh);
            Tensor<T> scores = scale(matmul(qh, transpose(kh)),
                                     T(1) / std::sqrt(static_cast<T>(dh)));
            outs.push_back(matmul(softmax2d(scores, 1, &score_mask), vh));
        }
        Tensor<T> merged = b.heads == 1 ? outs[0] : concat_cols(outs);
        Tensor<T> x = add(f_q, b.o(merged));
        return add(x, b.ff2(gelu(b.ff1(b.ln2(x)))));
    }

    Tensor<T> operator()(const Tensor<T>& f_p, const Tensor<T>& f_r,
                         const std::vector<std::uint8_t>& mask) const {
        check_same_shape(f_p, f_r, "fuse");
        switch (variant) {
            case FusionVariant::CGAF:
                return cgaf_fuse(f_p, f_r, mask);
            case FusionVariant::AddMlp: {
                Tensor<T> x = add(f_p, f_r);
                return add(x, mlp2(gelu(mlp1(x))));
            }
            case FusionVariant::ConcateMlp:
                return mlp2(gelu(mlp1(concat_cols<T>({f_p, f_r}))));
            case FusionVariant::ConcateTrans: {
                std::size_t t = f_p.rows();
                Tensor<T> both = concat_rows<T>({f_p, f_r});
                std::vector<std::uint8_t> m2(mask);
                m2.insert(m2.end(), mask.begin(), mask.end());
                Tensor<T> mixed = trans(both, m2);
                return add(slice_rows(mixed, 0, t), slice_rows(mixed, t, t));
            }
            case FusionVariant::CrossAtten:
                return add(cross_attend(cross_p, f_p, f_r, mask),
                           cross_attend(cross_r, f_r, f_p, mask));
        }
        throw ConfigError("unknown fusion variant");
    }
};

}  // namespace seds
