#pragma once

// Fine-grained text-video similarity, the pose-RGB fine-grained matching
// score, InfoNCE, and the joint loss. The scalar similarity scores are
// implemented as single graph nodes with analytic backward passes; the
// matrix-level quantities are also exposed for export and inspection.

#include <cmath>
#include <vector>

#include "seds/tensor.hpp"

namespace seds {

enum class ScoreDir { T2K, K2T };
enum class PrDir { P2R, R2P };

namespace fg {

// E[i,j] = a[i] . b[j]
template <typename T>
std::vector<T> dot_matrix(const std::vector<T>& a, const std::vector<T>& b, std::size_t ta,
                          std::size_t tb, std::size_t d) {
    std::vector<T> e(ta * tb, T(0));
    for (std::size_t i = 0; i < ta; ++i)
        for (std::size_t j = 0; j < tb; ++j) {
            T s = T(0);
            for (std::size_t c = 0; c < d; ++c) s += a[i * d + c] * b[j * d + c];
            e[i * tb + j] = s;
        }
    return e;
}

// Column softmax over valid rows, for valid columns; masked entries stay 0.
template <typename T>
std::vector<T> col_softmax(const std::vector<T>& e, std::size_t m, std::size_t n,
                           const Mask& row_mask, const Mask& col_mask) {
    std::vector<T> c(m * n, T(0));
    for (std::size_t j = 0; j < n; ++j) {
        if (!col_mask[j]) continue;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t i = 0; i < m; ++i)
            if (row_mask[i]) mx = std::max(mx, e[i * n + j]);
        T sum = T(0);
        for (std::size_t i = 0; i < m; ++i)
            if (row_mask[i]) {
                c[i * n + j] = std::exp(e[i * n + j] - mx);
                sum += c[i * n + j];
            }
        for (std::size_t i = 0; i < m; ++i)
            if (row_mask[i]) c[i * n + j] /= sum;
    }
    return c;
}

template <typename T>
std::vector<T> row_softmax(const std::vector<T>& e, std::size_t m, std::size_t n,
                           const Mask& row_mask, const Mask& col_mask) {
    std::vector<T> r(m * n, T(0));
    for (std::size_t i = 0; i < m; ++i) {
        if (!row_mask[i]) continue;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (col_mask[j]) mx = std::max(mx, e[i * n + j]);
        T sum = T(0);
        for (std::size_t j = 0; j < n; ++j)
            if (col_mask[j]) {
                r[i * n + j] = std::exp(e[i * n + j] - mx);
                sum += r[i * n + j];
            }
        for (std::size_t j = 0; j < n; ++j)
            if (col_mask[j]) r[i * n + j] /= sum;
    }
    return r;
}

inline std::size_t count_valid(const Mask& m) {
    std::size_t c = 0;
    for (auto v : m) c += v ? 1 : 0;
    return c;
}

}  // namespace fg

// Matrix-level view of the fine-grained text-video score (E^k and friends).
template <typename T>
struct FineGrainedScore {
    std::size_t clips = 0, words = 0;
    std::vector<T> e;        // [T x L]
    std::vector<T> e_col;    // column softmax
    std::vector<T> e_row;    // row softmax
    std::vector<T> e_t2k;    // E .* E_col
    std::vector<T> e_k2t;    // E .* E_row
    std::vector<T> agg_t2k;  // [L] column sums of e_t2k
    std::vector<T> agg_k2t;  // [T] row sums of e_k2t
    T m_t2k = T(0), m_k2t = T(0);
};

// Non-differentiating evaluation from raw (already normalized) features.
template <typename T>
FineGrainedScore<T> fine_grained_eval(const std::vector<T>& a, const std::vector<T>& b,
                                      std::size_t clips, std::size_t words, std::size_t d,
                                      const Mask& clip_mask, const Mask& word_mask) {
    if (fg::count_valid(clip_mask) == 0 || fg::count_valid(word_mask) == 0)
        throw NumericError("fine_grained: no valid clips or words");
    FineGrainedScore<T> s;
    s.clips = clips;
    s.words = words;
    s.e = fg::dot_matrix(a, b, clips, words, d);
    s.e_col = fg::col_softmax(s.e, clips, words, clip_mask, word_mask);
    s.e_row = fg::row_softmax(s.e, clips, words, clip_mask, word_mask);
    s.e_t2k.assign(clips * words, T(0));
    s.e_k2t.assign(clips * words, T(0));
    for (std::size_t i = 0; i < clips * words; ++i) {
        s.e_t2k[i] = s.e[i] * s.e_col[i];
        s.e_k2t[i] = s.e[i] * s.e_row[i];
    }
    s.agg_t2k.assign(words, T(0));
    s.agg_k2t.assign(clips, T(0));
    for (std::size_t i = 0; i < clips; ++i)
        for (std::size_t j = 0; j < words; ++j) {
            if (clip_mask[i] && word_mask[j]) {
                s.agg_t2k[j] += s.e_t2k[i * words + j];
                s.agg_k2t[i] += s.e_k2t[i * words + j];
            }
        }
    std::size_t nv_w = fg::count_valid(word_mask), nv_c = fg::count_valid(clip_mask);
    for (std::size_t j = 0; j < words; ++j)
        if (word_mask[j]) s.m_t2k += s.agg_t2k[j];
    for (std::size_t i = 0; i < clips; ++i)
        if (clip_mask[i]) s.m_k2t += s.agg_k2t[i];
    s.m_t2k /= static_cast<T>(nv_w);
    s.m_k2t /= static_cast<T>(nv_c);
    return s;
}

// Differentiable scalar fine-grained score between clip features f_k [T x D]
// and word features f_w [L x D]. Inputs are expected pre-normalized when
// cosine semantics are wanted.
template <typename T>
Tensor<T> fine_grained_score(const Tensor<T>& f_k, const Tensor<T>& f_w, const Mask& clip_mask,
                             const Mask& word_mask, ScoreDir dir) {
    if (f_k.rank() != 2 || f_w.rank() != 2 || f_k.cols() != f_w.cols())
        throw ShapeError("fine_grained_score: incompatible feature shapes");
    std::size_t t = f_k.rows(), l = f_w.rows(), d = f_k.cols();
    if (clip_mask.size() != t || word_mask.size() != l)
        throw ShapeError("fine_grained_score: mask length mismatch");
    FineGrainedScore<T> s =
        fine_grained_eval(f_k.data(), f_w.data(), t, l, d, clip_mask, word_mask);
    T value = dir == ScoreDir::T2K ? s.m_t2k : s.m_k2t;
    return make_op<T>(
        {1}, {value}, {f_k, f_w},
        [t, l, d, clip_mask, word_mask, dir](TensorNode<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            FineGrainedScore<T> s =
                fine_grained_eval(pa.value, pb.value, t, l, d, clip_mask, word_mask);
            T g = self.grad[0];
            // dM/dE, then chain into both feature matrices
            std::vector<T> de(t * l, T(0));
            if (dir == ScoreDir::T2K) {
                T inv = T(1) / static_cast<T>(fg::count_valid(word_mask));
                for (std::size_t p = 0; p < t; ++p)
                    for (std::size_t q = 0; q < l; ++q) {
                        if (!clip_mask[p] || !word_mask[q]) continue;
                        de[p * l + q] = g * inv * s.e_col[p * l + q] *
                                        (T(1) + s.e[p * l + q] - s.agg_t2k[q]);
                    }
            } else {
                T inv = T(1) / static_cast<T>(fg::count_valid(clip_mask));
                for (std::size_t p = 0; p < t; ++p)
                    for (std::size_t q = 0; q < l; ++q) {
                        if (!clip_mask[p] || !word_mask[q]) continue;
                        de[p * l + q] = g * inv * s.e_row[p * l + q] *
                                        (T(1) + s.e[p * l + q] - s.agg_k2t[p]);
                    }
            }
            for (std::size_t p = 0; p < t; ++p)
                for (std::size_t q = 0; q < l; ++q) {
                    T dq = de[p * l + q];
                    if (dq == T(0)) continue;
                    for (std::size_t c = 0; c < d; ++c) {
                        if (pa.requires_grad) pa.grad[p * d + c] += dq * pb.value[q * d + c];
                        if (pb.requires_grad) pb.grad[q * d + c] += dq * pa.value[p * d + c];
                    }
                }
        });
}

// ---------------------------------------------------------------------------
// Pose-RGB fine-grained matching score (clip-clip level, diagonal aggregation)

template <typename T>
struct PoseRgbScore {
    std::size_t clips = 0;
    std::vector<T> v;       // [T x T]
    std::vector<T> v_col;   // column softmax of V
    std::vector<T> v_row;   // row softmax of V
    std::vector<T> w_p2r;   // V .* V_col
    std::vector<T> w_r2p;   // V .* V_row
    T s_p2r = T(0), s_r2p = T(0);
};

template <typename T>
PoseRgbScore<T> pose_rgb_eval(const std::vector<T>& a, const std::vector<T>& b, std::size_t t,
                              std::size_t d, const Mask& mask) {
    if (fg::count_valid(mask) == 0) throw NumericError("pose_rgb: no valid clips");
    PoseRgbScore<T> s;
    s.clips = t;
    s.v = fg::dot_matrix(a, b, t, t, d);
    s.v_col = fg::col_softmax(s.v, t, t, mask, mask);
    s.v_row = fg::row_softmax(s.v, t, t, mask, mask);
    s.w_p2r.assign(t * t, T(0));
    s.w_r2p.assign(t * t, T(0));
    for (std::size_t i = 0; i < t * t; ++i) {
        s.w_p2r[i] = s.v[i] * s.v_col[i];
        s.w_r2p[i] = s.v[i] * s.v_row[i];
    }
    // S_p2r: diagonal weighted by a row-wise softmax of W_p2r
    std::vector<T> rr = fg::row_softmax(s.w_p2r, t, t, mask, mask);
    for (std::size_t i = 0; i < t; ++i)
        if (mask[i]) s.s_p2r += s.w_p2r[i * t + i] * rr[i * t + i];
    // S_r2p: diagonal weighted by a column-wise softmax of W_r2p (ji indexing)
    std::vector<T> cc = fg::col_softmax(s.w_r2p, t, t, mask, mask);
    for (std::size_t i = 0; i < t; ++i)
        if (mask[i]) s.s_r2p += s.w_r2p[i * t + i] * cc[i * t + i];
    return s;
}

template <typename T>
Tensor<T> pose_rgb_score(const Tensor<T>& f_p, const Tensor<T>& f_r, const Mask& mask,
                         PrDir dir) {
    if (f_p.rank() != 2 || f_p.shape() != f_r.shape())
        throw ShapeError("pose_rgb_score: streams must share shape");
    std::size_t t = f_p.rows(), d = f_p.cols();
    if (mask.size() != t) throw ShapeError("pose_rgb_score: mask length mismatch");
    PoseRgbScore<T> s = pose_rgb_eval(f_p.data(), f_r.data(), t, d, mask);
    T value = dir == PrDir::P2R ? s.s_p2r : s.s_r2p;
    return make_op<T>(
        {1}, {value}, {f_p, f_r}, [t, d, mask, dir](TensorNode<T>& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            PoseRgbScore<T> s = pose_rgb_eval(pa.value, pb.value, t, d, mask);
            T g = self.grad[0];
            // dS/dW, then dW/dV through the elementwise softmax product,
            // then into both feature matrices.
            std::vector<T> dw(t * t, T(0));
            std::vector<T> dv(t * t, T(0));
            if (dir == PrDir::P2R) {
                std::vector<T> rr = fg::row_softmax(s.w_p2r, t, t, mask, mask);
                for (std::size_t p = 0; p < t; ++p)
                    for (std::size_t q = 0; q < t; ++q) {
                        if (!mask[p] || !mask[q]) continue;
                        T v = (p == q ? rr[p * t + p] : T(0)) +
                              s.w_p2r[p * t + p] * rr[p * t + p] *
                                  ((p == q ? T(1) : T(0)) - rr[p * t + q]);
                        dw[p * t + q] = g * v;
                    }
                // W = V .* col_softmax(V): chain down each column
                for (std::size_t q = 0; q < t; ++q) {
                    if (!mask[q]) continue;
                    T acc = T(0);
                    for (std::size_t i = 0; i < t; ++i)
                        if (mask[i]) acc += dw[i * t + q] * s.w_p2r[i * t + q];
                    for (std::size_t p = 0; p < t; ++p) {
                        if (!mask[p]) continue;
                        dv[p * t + q] = s.v_col[p * t + q] *
                                        (dw[p * t + q] * (T(1) + s.v[p * t + q]) - acc);
                    }
                }
            } else {
                std::vector<T> cc = fg::col_softmax(s.w_r2p, t, t, mask, mask);
                for (std::size_t p = 0; p < t; ++p)
                    for (std::size_t q = 0; q < t; ++q) {
                        if (!mask[p] || !mask[q]) continue;
                        T v = (p == q ? cc[p * t + p] : T(0)) +
                              s.w_r2p[q * t + q] * cc[q * t + q] *
                                  ((p == q ? T(1) : T(0)) - cc[p * t + q]);
                        dw[p * t + q] = g * v;
                    }
                // W = V .* row_softmax(V): chain along each row
                for (std::size_t p = 0; p < t; ++p) {
                    if (!mask[p]) continue;
                    T acc = T(0);
                    for (std::size_t j = 0; j < t; ++j)
                        if (mask[j]) acc += dw[p * t + j] * s.w_r2p[p * t + j];
                    for (std::size_t q = 0; q < t; ++q) {
                        if (!mask[q]) continue;
                        dv[p * t + q] = s.v_row[p * t + q] *
                                        (dw[p * t + q] * (T(1) + s.v[p * t + q]) - acc);
                    }
                }
            }
            for (std::size_t p = 0; p < t; ++p)
                for (std::size_t q = 0; q < t; ++q) {
                    T dq = dv[p * t + q];
                    if (dq == T(0)) continue;
                    for (std::size_t c = 0; c < d; ++c) {
                        if (pa.requires_grad) pa.grad[p * d + c] += dq * pb.value[q * d + c];
                        if (pb.requires_grad) pb.grad[q * d + c] += dq * pa.value[p * d + c];
                    }
                }
        });
}

// ---------------------------------------------------------------------------
// Batch-level similarity matrices and InfoNCE

// M[i][j] holds the score of text i against video j (or the video-side score
// of the same pairing for K2T).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> batch_similarity(const std::vector<Tensor<T>>& videos,
                                                 const std::vector<Tensor<T>>& texts,
                                                 const std::vector<Mask>& clip_masks,
                                                 const std::vector<Mask>& word_masks) {
    std::size_t b = videos.size();
    if (b < 1 || texts.size() != b) throw ShapeError("batch_similarity: bad batch");
    std::vector<Tensor<T>> t2k, k2t;
    t2k.reserve(b * b);
    k2t.reserve(b * b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            t2k.push_back(fine_grained_score(videos[j], texts[i], clip_masks[j], word_masks[i],
                                             ScoreDir::T2K));
            k2t.push_back(fine_grained_score(videos[j], texts[i], clip_masks[j], word_masks[i],
                                             ScoreDir::K2T));
        }
    return {stack_scalars(t2k, b, b), stack_scalars(k2t, b, b)};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> batch_pose_rgb_similarity(const std::vector<Tensor<T>>& poses,
                                                          const std::vector<Tensor<T>>& rgbs,
                                                          const std::vector<Mask>& clip_masks) {
    std::size_t b = poses.size();
    if (b < 1 || rgbs.size() != b) throw ShapeError("batch_pose_rgb_similarity: bad batch");
    std::vector<Tensor<T>> p2r, r2p;
    for (std::size_t m = 0; m < b; ++m)
        for (std::size_t n = 0; n < b; ++n) {
            // score of pose stream m against RGB stream n; masks must agree on
            // the valid clip set, so intersect them
            Mask mm(clip_masks[m].size());
            for (std::size_t i = 0; i < mm.size(); ++i)
                mm[i] = clip_masks[m][i] && clip_masks[n][i];
            p2r.push_back(pose_rgb_score(poses[m], rgbs[n], mm, PrDir::P2R));
            r2p.push_back(pose_rgb_score(poses[m], rgbs[n], mm, PrDir::R2P));
        }
    return {stack_scalars(p2r, b, b), stack_scalars(r2p, b, b)};
}

enum class NceDir { Row, Col };

// InfoNCE over a [B x B] score matrix with matched pairs on the diagonal.
// Row direction normalizes over each row (the paper's L_t2k); Col uses the
// ji-indexed denominator (the paper's L_k2t).
template <typename T>
Tensor<T> infonce(const Tensor<T>& m, const Tensor<T>& tau, NceDir dir) {
    if (m.rank() != 2 || m.rows() != m.cols())
        throw ShapeError("infonce: square matrix required, got " + shape_str(m.shape()));
    if (tau.item() <= T(0)) throw NumericError("infonce: temperature must be positive");
    Tensor<T> scaled = mul_scalar(dir == NceDir::Row ? m : transpose(m), tau);
    return mean(sub(logsumexp_rows(scaled), diag(scaled)));
}

// Symmetric InfoNCE pair: 1/2 (row + col).
template <typename T>
Tensor<T> infonce_pair(const Tensor<T>& m_t2k, const Tensor<T>& m_k2t, const Tensor<T>& tau) {
    return scale(add(infonce(m_t2k, tau, NceDir::Row), infonce(m_k2t, tau, NceDir::Col)),
                 T(0.5));
}

// L_tva = L_t-v + alpha (L_t-p + L_t-r)
template <typename T>
Tensor<T> tva_loss(const Tensor<T>& l_tv, const Tensor<T>& l_tp, const Tensor<T>& l_tr,
                   T alpha) {
    return add(l_tv, scale(add(l_tp, l_tr), alpha));
}

// L = L_tva + beta L_p-r
template <typename T>
Tensor<T> joint_loss(const Tensor<T>& l_tva, const Tensor<T>& l_pr, T beta) {
    return add(l_tva, scale(l_pr, beta));
}

}  // namespace seds
