#pragma once

// Central-difference gradient verification for primitive ops, encoder
// stacks, fusion, and the training objectives.

#include <functional>
#include <string>
#include <vector>

#include "seds/fusion.hpp"
#include "seds/network.hpp"
#include "seds/objectives.hpp"
#include "seds/random.hpp"
#include "seds/tensor.hpp"

namespace seds {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    double tolerance = 0.0;
    bool pass() const { return max_rel_err < tolerance; }
};

// Compares reverse-mode gradients of a scalar-valued graph builder against
// central differences on every element of every leaf.
inline GradCheckResult grad_check(
    const std::string& name,
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
    std::vector<Tensor<double>> leaves, double tolerance, double eps = 1e-6) {
    GradCheckResult res;
    res.name = name;
    res.tolerance = tolerance;
    for (auto& l : leaves) {
        l.set_requires_grad(true);
        l.zero_grad();
    }
    Tensor<double> root = f(leaves);
    root.backward();
    for (auto& l : leaves) {
        for (std::size_t i = 0; i < l.data().size(); ++i) {
            double orig = l.data()[i];
            l.data()[i] = orig + eps;
            double up = f(leaves).item();
            l.data()[i] = orig - eps;
            double dn = f(leaves).item();
            l.data()[i] = orig;
            double fd = (up - dn) / (2.0 * eps);
            double an = l.grad()[i];
            double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.checked;
        }
    }
    return res;
}

namespace gc {

inline Tensor<double> rand_tensor(Rng& rng, Shape shape, double scale = 1.0) {
    Tensor<double> t = Tensor<double>::zeros(shape);
    for (auto& v : t.data()) v = rng.normal(0.0, scale);
    return t;
}

// Fixed random weighting turns any tensor output into a scalar without
// losing per-element gradient signal.
inline Tensor<double> weighted_sum(const Tensor<double>& x, std::uint64_t salt) {
    Rng rng(mix_seed(salt, 0x57u));
    Tensor<double> w = rand_tensor(rng, x.shape());
    return sum(mul(x, w));
}

inline std::vector<GradCheckResult> check_tensor_ops(std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    Rng rng(mix_seed(seed, 1));
    const double tol = 1e-5;
    auto ws = [](const Tensor<double>& t) { return weighted_sum(t, 99); };

    out.push_back(grad_check(
        "add/mul/scale",
        [&](const std::vector<Tensor<double>>& l) {
            return ws(add(scale(mul(l[0], l[1]), 0.7), sub(l[0], l[1])));
        },
        {rand_tensor(rng, {3, 4}), rand_tensor(rng, {3, 4})}, tol));
    out.push_back(grad_check(
        "matmul/transpose",
        [&](const std::vector<Tensor<double>>& l) {
            return ws(matmul(l[0], transpose(l[1])));
        },
        {rand_tensor(rng, {3, 4}), rand_tensor(rng, {5, 4})}, tol));
    out.push_back(grad_check(
        "relu/gelu/exp/log",
        [&](const std::vector<Tensor<double>>& l) {
            return ws(add(gelu(l[0]), log_t(add_const(exp_t(relu(l[0])), 0.5))));
        },
        {rand_tensor(rng, {4, 3})}, tol));
    out.push_back(grad_check(
        "softmax rows+cols",
        [&](const std::vector<Tensor<double>>& l) {
            Mask m{1, 1, 0, 1, 1, 1, 1, 0, 1, 1, 1, 1};
            return ws(add(softmax2d(l[0], 1, &m), softmax2d(l[0], 0, &m)));
        },
        {rand_tensor(rng, {3, 4})}, tol));
    out.push_back(grad_check(
        "layer_norm",
        [&](const std::vector<Tensor<double>>& l) {
            return ws(layer_norm(l[0], l[1], l[2]));
        },
        {rand_tensor(rng, {3, 6}), rand_tensor(rng, {6}), rand_tensor(rng, {6})}, tol));
    out.push_back(grad_check(
        "l2_normalize_rows",
        [&](const std::vector<Tensor<double>>& l) { return ws(l2_normalize_rows(l[0])); },
        {rand_tensor(rng, {4, 5})}, tol));
    out.push_back(grad_check(
        "logsumexp/diag/mean",
        [&](const std::vector<Tensor<double>>& l) {
            return mean(sub(logsumexp_rows(l[0]), diag(l[0])));
        },
        {rand_tensor(rng, {4, 4})}, tol));
    out.push_back(grad_check(
        "slices/concat/gather",
        [&](const std::vector<Tensor<double>>& l) {
            Tensor<double> c = concat_cols<double>({slice_cols(l[0], 0, 2), slice_cols(l[0], 2, 2)});
            Tensor<double> r = concat_rows<double>({slice_rows(c, 0, 2), slice_rows(c, 2, 2)});
            return ws(gather_rows(r, {0, 3, 1, 1}));
        },
        {rand_tensor(rng, {4, 4})}, tol));
    {
        // keep positions away from integers so central differences stay valid
        Tensor<double> pos = Tensor<double>::zeros({4, 3});
        for (auto& v : pos.data()) v = rng.uniform(0.1, 5.9);
        out.push_back(grad_check(
            "interp_gather/rowdot3/weight3",
            [&](const std::vector<Tensor<double>>& l) {
                Tensor<double> k3 = interp_gather(l[0], l[1]);
                Tensor<double> sc = softmax2d(rowdot3(k3, l[2]), 1);
                return weighted_sum(weight3(interp_gather(l[0], l[1]), sc), 7);
            },
            {rand_tensor(rng, {6, 5}), pos, rand_tensor(rng, {4, 5})}, tol));
    }
    out.push_back(grad_check(
        "im2col/block_mean",
        [&](const std::vector<Tensor<double>>& l) {
            return ws(block_mean_rows(im2col_blocked(l[0], 8, 5, 2, 2), 4));
        },
        {rand_tensor(rng, {16, 3})}, tol));
    out.push_back(grad_check(
        "clip/wrap/mul_scalar",
        [&](const std::vector<Tensor<double>>& l) {
            return weighted_sum(wrap_mod(mul_scalar(clip(l[0], -1.5, 1.5), l[1]), 4.0), 3);
        },
        {rand_tensor(rng, {3, 3}), Tensor<double>::scalar(1.3)}, tol));
    return out;
}

inline std::vector<GradCheckResult> check_objectives(std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    Rng rng(mix_seed(seed, 2));
    const double tol = 1e-4;
    Mask cm{1, 1, 1, 0, 1}, wm{1, 1, 0, 1};
    out.push_back(grad_check(
        "fine_grained_score t2k",
        [&](const std::vector<Tensor<double>>& l) {
            return fine_grained_score(l2_normalize_rows(l[0]), l2_normalize_rows(l[1]), cm, wm,
                                      ScoreDir::T2K);
        },
        {rand_tensor(rng, {5, 6}), rand_tensor(rng, {4, 6})}, tol));
    out.push_back(grad_check(
        "fine_grained_score k2t",
        [&](const std::vector<Tensor<double>>& l) {
            return fine_grained_score(l2_normalize_rows(l[0]), l2_normalize_rows(l[1]), cm, wm,
                                      ScoreDir::K2T);
        },
        {rand_tensor(rng, {5, 6}), rand_tensor(rng, {4, 6})}, tol));
    out.push_back(grad_check(
        "pose_rgb_score p2r",
        [&](const std::vector<Tensor<double>>& l) {
            return pose_rgb_score(l2_normalize_rows(l[0]), l2_normalize_rows(l[1]), cm,
                                  PrDir::P2R);
        },
        {rand_tensor(rng, {5, 6}), rand_tensor(rng, {5, 6})}, tol));
    out.push_back(grad_check(
        "pose_rgb_score r2p",
        [&](const std::vector<Tensor<double>>& l) {
            return pose_rgb_score(l2_normalize_rows(l[0]), l2_normalize_rows(l[1]), cm,
                                  PrDir::R2P);
        },
        {rand_tensor(rng, {5, 6}), rand_tensor(rng, {5, 6})}, tol));
    out.push_back(grad_check(
        "infonce batched",
        [&](const std::vector<Tensor<double>>& l) {
            std::vector<Tensor<double>> vids, txts;
            std::vector<Mask> cms, wms;
            for (std::size_t i = 0; i < 3; ++i) {
                vids.push_back(l2_normalize_rows(slice_rows(l[0], i * 4, 4)));
                txts.push_back(l2_normalize_rows(slice_rows(l[1], i * 3, 3)));
                cms.push_back({1, 1, 1, 1});
                wms.push_back({1, 1, 1});
            }
            auto [m1, m2] = batch_similarity(vids, txts, cms, wms);
            return infonce_pair(m1, m2, exp_t(l[2]));
        },
        {rand_tensor(rng, {12, 5}), rand_tensor(rng, {9, 5}),
         Tensor<double>::scalar(std::log(6.0))},
        tol));
    return out;
}

inline std::vector<GradCheckResult> check_encoders(std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    const double tol = 1e-4;
    ModelConfig cfg;
    cfg.d_model = 8;
    cfg.d_group = 4;
    cfg.gcn_depth = 1;
    cfg.tr_depth = 1;
    cfg.tr_heads = 2;
    cfg.text_vocab = 9;
    cfg.text_depth = 1;
    cfg.clips = 3;
    cfg.max_words = 5;
    cfg.fusion.n_neighbors = 3;
    cfg.fusion.layers = 1;
    Model<double> model(cfg, mix_seed(seed, 3));
    Rng rng(mix_seed(seed, 4));

    // tiny pose sequence: 18 frames -> 3 candidate clips
    PoseSequence pose;
    pose.frames = 18;
    pose.keypoints.resize(pose.frames * kTotalPoints * 3);
    for (auto& v : pose.keypoints) v = rng.uniform(0.1, 0.9);
    ClipPlan plan = plan_clips(pose.frames, cfg.clips);

    {
        // perturb a handful of pose-encoder weights through the full stack
        std::vector<Tensor<double>> leaves = {*model.params.find("pose.gcn_hand.0.w"),
                                              *model.params.find("pose.proj.w"),
                                              *model.params.find("pose.tconv1.b")};
        out.push_back(grad_check(
            "pose encoder params",
            [&](const std::vector<Tensor<double>>&) {
                return weighted_sum(model.pose_enc(pose, plan), 11);
            },
            leaves, tol));
    }
    {
        std::vector<std::size_t> tokens{1, 4, 7, 2};
        std::vector<Tensor<double>> leaves = {*model.params.find("text.embed"),
                                              *model.params.find("text.block.0.q.w"),
                                              *model.params.find("text.proj.w")};
        out.push_back(grad_check(
            "text encoder params",
            [&](const std::vector<Tensor<double>>&) {
                return weighted_sum(model.text_enc(tokens), 13);
            },
            leaves, tol));
    }
    {
        Tensor<double> x = rand_tensor(rng, {3, 8}, 0.5);
        Mask m{1, 1, 0};
        std::vector<Tensor<double>> leaves = {x, *model.params.find("interact_p.pos"),
                                              *model.params.find("interact_p.block.0.ff1.w")};
        out.push_back(grad_check(
            "interaction transformer",
            [&](const std::vector<Tensor<double>>& l) {
                return weighted_sum(model.interact_p(l[0], m), 17);
            },
            leaves, tol));
    }
    return out;
}

inline std::vector<GradCheckResult> check_fusion(std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    const double tol = 1e-4;
    Rng rng(mix_seed(seed, 5));
    for (FusionVariant v :
         {FusionVariant::CGAF, FusionVariant::AddMlp, FusionVariant::ConcateMlp,
          FusionVariant::ConcateTrans, FusionVariant::CrossAtten}) {
        ModelConfig cfg;
        cfg.d_model = 6;
        cfg.text_vocab = 4;
        cfg.clips = 5;
        cfg.fusion.variant = v;
        cfg.fusion.n_neighbors = 3;
        cfg.fusion.layers = 1;
        cfg.fusion.heads = 1;
        ParamStore<double> ps(mix_seed(seed, 6));
        FusionModule<double> fm = FusionModule<double>::create(ps, cfg);
        // nudge the zero-initialized offset weights so their gradient path is live
        if (v == FusionVariant::CGAF)
            for (auto& [name, p] : ps.entries())
                if (name.find(".w_o") != std::string::npos)
                    for (auto& x : p.data()) x = rng.normal(0.0, 0.05);
        Mask m{1, 1, 1, 1, 0};
        Tensor<double> fp = rand_tensor(rng, {5, 6}, 0.5);
        Tensor<double> fr = rand_tensor(rng, {5, 6}, 0.5);
        std::vector<Tensor<double>> leaves = {fp, fr};
        for (auto& [name, p] : ps.entries())
            if (name.find(".w") != std::string::npos && leaves.size() < 5) leaves.push_back(p);
        out.push_back(grad_check(
            "fusion " + to_string(v),
            [&](const std::vector<Tensor<double>>& l) {
                return weighted_sum(fm(l[0], l[1], m), 19);
            },
            leaves, tol));
    }
    return out;
}

}  // namespace gc

inline std::vector<GradCheckResult> run_gradchecks(const std::string& module,
                                                   std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    auto append = [&](std::vector<GradCheckResult> v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    if (module == "all" || module == "tensor") append(gc::check_tensor_ops(seed));
    if (module == "all" || module == "objectives") append(gc::check_objectives(seed));
    if (module == "all" || module == "encoders") append(gc::check_encoders(seed));
    if (module == "all" || module == "fusion") append(gc::check_fusion(seed));
    if (out.empty()) throw ConfigError("unknown gradcheck module '" + module + "'");
    return out;
}

}  // namespace seds
