// Acceptance suite: one pass/fail line per shipped guarantee.
//
//   argv[1] = path to the CLI binary
//   argv[2] = path to the shipped configs directory
//
// Criteria 6 and 7 exercise the CLI end to end on the shipped desk-scale
// configuration; everything else drives the library directly against
// independent oracles.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seds/eval.hpp"
#include "seds/gradcheck.hpp"
#include "seds/synth.hpp"
#include "seds/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace seds;

namespace {

int g_failures = 0;

void report(int num, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %d. %s: %s\n", pass ? "PASS" : "FAIL", num, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

int run_cli(const std::string& cmd) { return std::system(cmd.c_str()); }

std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

json read_json(const std::string& path) {
    std::ifstream is(path);
    json j;
    is >> j;
    return j;
}

// ---------------------------------------------------------------------------
// Independent oracles (naive loops, unstabilized softmax)

std::vector<double> naive_col_softmax(const std::vector<double>& e, std::size_t m,
                                      std::size_t n, const Mask& rm, const Mask& cm) {
    std::vector<double> out(m * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (!cm[j]) continue;
        double denom = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            if (rm[i]) denom += std::exp(e[i * n + j]);
        for (std::size_t i = 0; i < m; ++i)
            if (rm[i]) out[i * n + j] = std::exp(e[i * n + j]) / denom;
    }
    return out;
}

std::vector<double> naive_row_softmax(const std::vector<double>& e, std::size_t m,
                                      std::size_t n, const Mask& rm, const Mask& cm) {
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (!rm[i]) continue;
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (cm[j]) denom += std::exp(e[i * n + j]);
        for (std::size_t j = 0; j < n; ++j)
            if (cm[j]) out[i * n + j] = std::exp(e[i * n + j]) / denom;
    }
    return out;
}

std::pair<double, double> oracle_fine(const std::vector<double>& a,
                                      const std::vector<double>& b, std::size_t t,
                                      std::size_t l, std::size_t d, const Mask& cm,
                                      const Mask& wm) {
    std::vector<double> e(t * l, 0.0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < l; ++j)
            for (std::size_t c = 0; c < d; ++c) e[i * l + j] += a[i * d + c] * b[j * d + c];
    auto col = naive_col_softmax(e, t, l, cm, wm);
    auto row = naive_row_softmax(e, t, l, cm, wm);
    double m1 = 0.0, m2 = 0.0;
    std::size_t nw = 0, nc = 0;
    for (std::size_t j = 0; j < l; ++j) {
        if (!wm[j]) continue;
        ++nw;
        for (std::size_t i = 0; i < t; ++i)
            if (cm[i]) m1 += e[i * l + j] * col[i * l + j];
    }
    for (std::size_t i = 0; i < t; ++i) {
        if (!cm[i]) continue;
        ++nc;
        for (std::size_t j = 0; j < l; ++j)
            if (wm[j]) m2 += e[i * l + j] * row[i * l + j];
    }
    return {m1 / static_cast<double>(nw), m2 / static_cast<double>(nc)};
}

std::pair<double, double> oracle_pose_rgb(const std::vector<double>& a,
                                          const std::vector<double>& b, std::size_t t,
                                          std::size_t d, const Mask& m) {
    std::vector<double> v(t * t, 0.0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < t; ++j)
            for (std::size_t c = 0; c < d; ++c) v[i * t + j] += a[i * d + c] * b[j * d + c];
    auto col = naive_col_softmax(v, t, t, m, m);
    auto row = naive_row_softmax(v, t, t, m, m);
    std::vector<double> w1(t * t), w2(t * t);
    for (std::size_t i = 0; i < t * t; ++i) {
        w1[i] = v[i] * col[i];
        w2[i] = v[i] * row[i];
    }
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        if (!m[i]) continue;
        double den1 = 0.0, den2 = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
            if (!m[j]) continue;
            den1 += std::exp(w1[i * t + j]);
            den2 += std::exp(w2[j * t + i]);
        }
        s1 += w1[i * t + i] * std::exp(w1[i * t + i]) / den1;
        s2 += w2[i * t + i] * std::exp(w2[i * t + i]) / den2;
    }
    return {s1, s2};
}

std::vector<double> dense_local_attention(const std::vector<double>& q,
                                          const std::vector<double>& k,
                                          const std::vector<double>& v, std::size_t t,
                                          std::size_t d, std::size_t n, bool scaled) {
    std::vector<double> out(t * d, 0.0);
    long half = static_cast<long>(n / 2);
    for (std::size_t i = 0; i < t; ++i) {
        std::vector<double> scores(n);
        for (std::size_t w = 0; w < n; ++w) {
            long j = ((static_cast<long>(i) - half + static_cast<long>(w)) %
                          static_cast<long>(t) +
                      static_cast<long>(t)) %
                     static_cast<long>(t);
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += q[i * d + c] * k[j * d + c];
            scores[w] = scaled ? s / std::sqrt(static_cast<double>(d)) : s;
        }
        double mx = *std::max_element(scores.begin(), scores.end());
        double denom = 0.0;
        for (double s : scores) denom += std::exp(s - mx);
        for (std::size_t w = 0; w < n; ++w) {
            long j = ((static_cast<long>(i) - half + static_cast<long>(w)) %
                          static_cast<long>(t) +
                      static_cast<long>(t)) %
                     static_cast<long>(t);
            double a = std::exp(scores[w] - mx) / denom;
            for (std::size_t c = 0; c < d; ++c) out[i * d + c] += a * v[j * d + c];
        }
    }
    return out;
}

Mask random_mask(Rng& rng, std::size_t n) {
    Mask m(n);
    bool any = false;
    for (auto& v : m) {
        v = rng.uniform() < 0.75 ? 1 : 0;
        any = any || v;
    }
    if (!any) m[rng.uniform_int(0, static_cast<long>(n) - 1)] = 1;
    return m;
}

Tensor<double> rand_mat(Rng& rng, std::size_t r, std::size_t c, double s = 1.0) {
    Tensor<double> t = Tensor<double>::zeros({r, c});
    for (auto& v : t.data()) v = rng.normal(0.0, s);
    return t;
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient checks, primitives and the composed training path

bool composed_path_check(std::uint64_t seed, double& worst) {
    ModelConfig mc;
    mc.d_model = 8;
    mc.d_group = 4;
    mc.gcn_depth = 1;
    mc.tr_depth = 1;
    mc.tr_heads = 2;
    mc.text_vocab = 9;
    mc.text_depth = 1;
    mc.clips = 3;
    mc.max_words = 5;
    mc.fusion.n_neighbors = 3;
    mc.fusion.layers = 1;
    Model<double> model(mc, mix_seed(seed, 0xACC));
    Rng rng(mix_seed(seed, 0xACD));
    // take the offset projection off its zero init so its positions are not
    // exactly integral (interpolation is kinked there and finite differences
    // would straddle the kink)
    for (auto& [name, p] : model.params.entries())
        if (name.find(".w_o") != std::string::npos)
            for (auto& x : p.data()) x = rng.normal(0.0, 0.05);

    std::vector<BatchSample<double>> batch(2);
    for (auto& s : batch) {
        s.pose.frames = 18;
        s.pose.keypoints.resize(s.pose.frames * kTotalPoints * 3);
        for (auto& v : s.pose.keypoints) v = rng.uniform(0.1, 0.9);
        s.plan = plan_clips(s.pose.frames, mc.clips);
        std::vector<double> rgb(mc.clips * kRgbDim);
        for (auto& v : rgb) v = rng.normal(0.0, 1.0);
        s.rgb_clips = Tensor<double>::from({mc.clips, kRgbDim}, std::move(rgb));
        s.clip_mask.assign(s.plan.valid.begin(), s.plan.valid.end());
    }
    batch[0].tokens = {1, 4, 7};
    batch[1].tokens = {2, 5};

    std::vector<Tensor<double>> leaves = {*model.params.find("pose.tconv1.b"),
                                          *model.params.find("pose.gcn_hand.0.w"),
                                          *model.params.find("fusion.p2r.0.w_o"),
                                          model.log_tau};
    auto r = grad_check(
        "pose encoder -> fusion -> joint loss",
        [&](const std::vector<Tensor<double>>&) {
            std::vector<StreamFeatures<double>> feats;
            for (const auto& s : batch) feats.push_back(model.forward(s));
            return compute_loss(model, feats, 0.8, 0.4, true).total;
        },
        leaves, 1e-4);
    worst = std::max(worst, r.max_rel_err);
    return r.pass();
}

void criterion_1() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (const auto& r : run_gradchecks("all", seed)) {
            ok = ok && r.pass();
            worst = std::max(worst, r.max_rel_err);
        }
        ok = composed_path_check(seed, worst) && ok;
    }
    double dt = seconds_since(t0);
    ok = ok && dt < 120.0;
    report(1, "gradient checks (primitives + composed path, 10 seeds)", ok,
           fmt("max rel err %.2e, %.1fs", worst, dt));
}

// Criterion 2: brute-force oracle equivalence of the similarity scores

void criterion_2() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(4242);
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        std::size_t t = rng.uniform_int(1, 6), l = rng.uniform_int(1, 6);
        std::size_t d = rng.uniform_int(2, 5);
        std::vector<double> a(t * d), b(l * d);
        for (auto& v : a) v = rng.normal(0.0, 1.0);
        for (auto& v : b) v = rng.normal(0.0, 1.0);
        Mask cm = random_mask(rng, t), wm = random_mask(rng, l);
        auto fa = Tensor<double>::from({t, d}, std::vector<double>(a));
        auto fb = Tensor<double>::from({l, d}, std::vector<double>(b));
        auto [w1, w2] = oracle_fine(a, b, t, l, d, cm, wm);
        worst = std::max(
            worst, std::abs(fine_grained_score(fa, fb, cm, wm, ScoreDir::T2K).item() - w1));
        worst = std::max(
            worst, std::abs(fine_grained_score(fa, fb, cm, wm, ScoreDir::K2T).item() - w2));
    }
    for (int c = 0; c < 100; ++c) {
        std::size_t t = rng.uniform_int(1, 6), d = rng.uniform_int(2, 5);
        std::vector<double> a(t * d), b(t * d);
        for (auto& v : a) v = rng.normal(0.0, 1.0);
        for (auto& v : b) v = rng.normal(0.0, 1.0);
        Mask m = random_mask(rng, t);
        auto fa = Tensor<double>::from({t, d}, std::vector<double>(a));
        auto fb = Tensor<double>::from({t, d}, std::vector<double>(b));
        auto [w1, w2] = oracle_pose_rgb(a, b, t, d, m);
        worst = std::max(worst,
                         std::abs(pose_rgb_score(fa, fb, m, PrDir::P2R).item() - w1));
        worst = std::max(worst,
                         std::abs(pose_rgb_score(fa, fb, m, PrDir::R2P).item() - w2));
    }
    double dt = seconds_since(t0);
    bool ok = worst < 1e-9 && dt < 10.0;
    report(2, "similarity scores match brute-force oracles (100 masked cases)", ok,
           fmt("max abs diff %.2e, %.2fs", worst, dt));
}

// Criterion 3: closed-form spot values

void criterion_3() {
    auto fk = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    Mask m{1, 1};
    double s_fine = fine_grained_score(fk, fk, m, m, ScoreDir::T2K).item();
    double s_pr = pose_rgb_score(fk, fk, m, PrDir::P2R).item();
    double nce = infonce(Tensor<double>::full({2, 2}, 0.37), Tensor<double>::scalar(1.0),
                         NceDir::Row)
                     .item();
    bool ok = std::abs(s_fine - 0.73106) < 1e-5 && std::abs(s_pr - 0.98698) < 1e-5 &&
              std::abs(nce - std::log(2.0)) < 1e-9;
    report(3, "identity-matrix spot values", ok,
           fmt("fine %.6f, pose-rgb %.6f, uniform nce-ln2 %.1e", s_fine, s_pr,
               nce - std::log(2.0)));
}

// Criterion 4: gloss-attention degeneracies

void criterion_4() {
    bool ok = true;
    std::string why;
    Rng rng(777);
    // (a) zero offsets + integer positions == dense circular local attention
    double worst = 0.0;
    for (std::size_t n : {1ULL, 3ULL, 5ULL, 7ULL}) {
        ModelConfig cfg;
        cfg.d_model = 6;
        cfg.text_vocab = 4;
        cfg.clips = 9;
        cfg.fusion.n_neighbors = n;
        cfg.fusion.layers = 1;
        ParamStore<double> ps(mix_seed(1, n));
        auto layer = GlossAttentionLayer<double>::create(ps, "f", cfg);
        Tensor<double> q = rand_mat(rng, 9, 6), k = rand_mat(rng, 9, 6),
                       v = rand_mat(rng, 9, 6);
        Tensor<double> h = layer.attention_core(q, k, v);
        auto want = dense_local_attention(q.data(), k.data(), v.data(), 9, 6, n, true);
        for (std::size_t i = 0; i < want.size(); ++i)
            worst = std::max(worst, std::abs(h.data()[i] - want[i]));
    }
    ok = ok && worst < 1e-9;
    // (b) single neighbor passes values through at the raw attention stage
    double worst_pass = 0.0;
    {
        ModelConfig cfg;
        cfg.d_model = 6;
        cfg.text_vocab = 4;
        cfg.clips = 5;
        cfg.fusion.n_neighbors = 1;
        cfg.fusion.layers = 1;
        ParamStore<double> ps(99);
        auto layer = GlossAttentionLayer<double>::create(ps, "f", cfg);
        Tensor<double> q = rand_mat(rng, 5, 6), k = rand_mat(rng, 5, 6),
                       v = rand_mat(rng, 5, 6);
        Tensor<double> h = layer.attention_core(q, k, v);
        for (std::size_t i = 0; i < v.data().size(); ++i)
            worst_pass = std::max(worst_pass, std::abs(h.data()[i] - v.data()[i]));
        ok = ok && worst_pass < 1e-12;
    }
    // (c) adjusted positions stay inside [0, T) for 1000 random draws
    bool in_range = true;
    {
        ModelConfig cfg;
        cfg.d_model = 6;
        cfg.text_vocab = 4;
        cfg.clips = 11;
        cfg.fusion.n_neighbors = 7;
        cfg.fusion.layers = 1;
        ParamStore<double> ps(101);
        auto layer = GlossAttentionLayer<double>::create(ps, "f", cfg);
        for (auto& v : layer.w_o.data()) v = rng.normal(0.0, 2.0);
        for (int c = 0; c < 1000; ++c) {
            Tensor<double> q = rand_mat(rng, 11, 6, 2.0);
            Tensor<double> pos = layer.adjusted_positions(q);
            for (double p : pos.data()) in_range = in_range && p >= 0.0 && p < 11.0;
        }
        ok = ok && in_range;
    }
    report(4, "gloss-attention degeneracies (dense oracle, passthrough, wrap)", ok,
           fmt("dense diff %.2e, passthrough diff %.2e, wrap %s", worst, worst_pass,
               in_range ? "in-range" : "OUT OF RANGE"));
}

// Criterion 9: ranking and report agree with exhaustive oracles

void criterion_9() {
    bool ok = true;
    Rng rng(2121);
    for (int c = 0; c < 50 && ok; ++c) {
        std::size_t b = rng.uniform_int(1, 12);
        std::vector<double> scores(b * b);
        for (auto& s : scores) s = static_cast<double>(rng.uniform_int(0, 4));
        std::vector<std::size_t> want(b);
        for (std::size_t i = 0; i < b; ++i) {
            std::vector<std::size_t> order(b);
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                return scores[i * b + x] > scores[i * b + y];
            });
            for (std::size_t pos = 0; pos < b; ++pos)
                if (order[pos] == i) want[i] = pos + 1;
        }
        ok = ok && rank_queries(scores, b) == want;
        // recall/median agreement with a direct count on the oracle ranks
        auto rep = make_report(want, "t2v");
        std::size_t hit1 = 0, hit5 = 0, hit10 = 0;
        for (auto r : want) {
            hit1 += r <= 1;
            hit5 += r <= 5;
            hit10 += r <= 10;
        }
        std::vector<std::size_t> sorted = want;
        std::sort(sorted.begin(), sorted.end());
        double med = b % 2 ? static_cast<double>(sorted[b / 2])
                           : 0.5 * static_cast<double>(sorted[b / 2 - 1] + sorted[b / 2]);
        ok = ok && rep.r1 == 100.0 * static_cast<double>(hit1) / static_cast<double>(b);
        ok = ok && rep.r5 == 100.0 * static_cast<double>(hit5) / static_cast<double>(b);
        ok = ok && rep.r10 == 100.0 * static_cast<double>(hit10) / static_cast<double>(b);
        ok = ok && rep.medr == med;
    }
    {
        std::size_t b = 8;
        std::vector<double> scores(b * b, 0.0);
        for (std::size_t i = 0; i < b; ++i) scores[i * b + i] = 1.0;
        auto rep = make_report(rank_queries(scores, b), "t2v");
        ok = ok && rep.r1 == 100.0 && rep.medr == 1.0;
    }
    report(9, "retrieval metrics match exhaustive oracles", ok, "50 random + identity");
}

// Criterion 5: one-batch memorization

void criterion_5(const fs::path& work, const json& base_cfg) {
    auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec spec;
    spec.vocab_glosses = 8;
    spec.min_glosses = 2;
    spec.max_glosses = 3;
    spec.pose_noise = 0.01;
    spec.rgb_noise = 0.1;
    spec.nuisance_strength = 0.1;
    spec.signer_offset = 0.02;
    spec.signer_scale = 0.05;
    spec.low_conf_prob = 0.05;
    spec.permute_prob = 0.1;
    spec.filler_prob = 0.1;
    spec.n_train = 8;
    spec.n_val = 1;
    spec.n_test = 1;
    spec.seed = 7;
    fs::path data = work / "memorize_data";
    synth_dataset(spec, data.string());
    Dataset ds = load_manifest(data.string());

    json jc = base_cfg;
    jc.merge_patch(json{{"batch_size", 8},
                        {"epochs", 200},
                        {"seed", 3},
                        {"lr_main", 1e-3},
                        {"lr_aux", 1e-3},
                        {"val_split", "train"}});
    TrainConfig cfg = jc.get<TrainConfig>();
    TrainResult tr = train_model<double>(ds, cfg, (work / "memorize_run").string());
    auto ck = load_checkpoint<double>(tr.last_checkpoint);
    EvalResult res = evaluate(ck, ds, "train", "fused");
    double dt = seconds_since(t0);
    bool ok = res.t2v.r1 == 100.0 && res.v2t.r1 == 100.0 && dt < 180.0;
    report(5, "one-batch memorization (B=8, 200 steps)", ok,
           fmt("train t2v R@1 %.0f, v2t R@1 %.0f, %.0fs", res.t2v.r1, res.v2t.r1, dt));
}

// Criterion 8: bit-identical reruns

void criterion_8(const fs::path& work) {
    SyntheticSpec spec;
    spec.vocab_glosses = 6;
    spec.min_glosses = 2;
    spec.max_glosses = 3;
    spec.pose_noise = 0.01;
    spec.rgb_noise = 0.05;
    spec.nuisance_strength = 0.1;
    spec.low_conf_prob = 0.05;
    spec.n_train = 6;
    spec.n_val = 3;
    spec.n_test = 3;
    spec.seed = 17;
    fs::path data = work / "determinism_data";
    synth_dataset(spec, data.string());
    Dataset ds = load_manifest(data.string());

    TrainConfig cfg;
    cfg.model.d_model = 16;
    cfg.model.d_group = 8;
    cfg.model.gcn_depth = 1;
    cfg.model.tr_depth = 1;
    cfg.model.tr_heads = 2;
    cfg.model.text_depth = 1;
    cfg.model.clips = 4;
    cfg.model.max_words = 6;
    cfg.model.fusion.n_neighbors = 3;
    cfg.model.fusion.layers = 1;
    cfg.batch_size = 3;
    cfg.epochs = 3;
    cfg.seed = 11;
    fs::path a = work / "determinism_a", b = work / "determinism_b";
    TrainResult r1 = train_model<double>(ds, cfg, a.string());
    TrainResult r2 = train_model<double>(ds, cfg, b.string());
    bool ok = read_file(r1.last_checkpoint) == read_file(r2.last_checkpoint) &&
              read_file(r1.best_checkpoint) == read_file(r2.best_checkpoint) &&
              read_file((a / "metrics.jsonl").string()) ==
                  read_file((b / "metrics.jsonl").string());
    EvalResult e1 = evaluate(load_checkpoint<double>(r1.best_checkpoint), ds, "test");
    EvalResult e2 = evaluate(load_checkpoint<double>(r2.best_checkpoint), ds, "test");
    ok = ok && e1.t2v.ranks == e2.t2v.ranks && e1.v2t.ranks == e2.v2t.ranks;
    report(8, "identical seed/config/data reruns are bit-identical", ok,
           "checkpoints, metrics log, eval ranks");
}

// Criteria 6 and 7: the shipped desk-scale configuration

struct DeskResults {
    double fused_r1 = -1.0;
    double fused_medr = -1.0;
    double pose_r1 = -1.0;
    double rgb_r1 = -1.0;
    double train_seconds = 0.0;
    bool ok = false;
};

DeskResults run_desk_pipeline(const std::string& cli, const fs::path& configs,
                              const fs::path& work) {
    DeskResults out;
    fs::path data = work / "desk_data", run = work / "desk_run";
    std::string synth_cmd = cli + " synth --spec " + (configs / "synth_desk.json").string() +
                            " --out " + data.string() + " > " +
                            (work / "synth.log").string() + " 2>&1";
    if (run_cli(synth_cmd) != 0) return out;
    auto t0 = std::chrono::steady_clock::now();
    std::string train_cmd = cli + " train --config " +
                            (configs / "train_desk.json").string() + " --data " +
                            data.string() + " --out " + run.string() + " > " +
                            (run.string() + ".train.log") + " 2>&1";
    if (run_cli(train_cmd) != 0) return out;
    out.train_seconds = seconds_since(t0);
    for (const std::string& m : {std::string("fused"), std::string("pose"),
                                 std::string("rgb")}) {
        std::string eval_cmd = cli + " eval --ckpt " + (run / "ckpt_best.seda").string() +
                               " --data " + data.string() + " --split test --modality " + m +
                               " --out " + run.string() + " > " +
                               (run.string() + ".eval_" + m + ".log") + " 2>&1";
        if (run_cli(eval_cmd) != 0) return out;
        json j = read_json((run / ("eval_test_" + m + ".json")).string());
        double r1 = j.at("t2v").at("r1").get<double>();
        if (m == "fused") {
            out.fused_r1 = r1;
            out.fused_medr = j.at("t2v").at("medr").get<double>();
        } else if (m == "pose") {
            out.pose_r1 = r1;
        } else {
            out.rgb_r1 = r1;
        }
    }
    out.ok = true;
    return out;
}

double train_and_score(const Dataset& ds, TrainConfig cfg, const fs::path& dir) {
    TrainResult tr = train_model<double>(ds, cfg, dir.string());
    auto ck = load_checkpoint<double>(tr.best_checkpoint);
    return evaluate(ck, ds, "test", "fused").t2v.r1;
}

void criteria_6_and_7(const std::string& cli, const fs::path& configs,
                      const fs::path& work) {
    DeskResults desk = run_desk_pipeline(cli, configs, work);
    bool c6 = desk.ok && desk.fused_r1 >= 80.0 && desk.fused_medr == 1.0 &&
              desk.train_seconds < 900.0;
    report(6, "shipped desk config generalizes (test t2v R@1 >= 80, MedR 1)", c6,
           desk.ok ? fmt("R@1 %.0f, MedR %.1f, train %.0fs", desk.fused_r1, desk.fused_medr,
                         desk.train_seconds)
                   : "pipeline failed (see logs in the work dir)");

    bool c7a = desk.ok && desk.fused_r1 >= std::max(desk.pose_r1, desk.rgb_r1);
    report(7, "(a) fusion at least matches the best single stream", c7a,
           desk.ok ? fmt("fused %.0f vs pose %.0f / rgb %.0f", desk.fused_r1, desk.pose_r1,
                         desk.rgb_r1)
                   : "desk pipeline failed");

    if (!desk.ok) {
        report(7, "(b) cross-modal loss helps (majority of 3 seeds)", false,
               "desk pipeline failed");
        report(7, "(c) gloss attention at least matches cross-attention", false,
               "desk pipeline failed");
        return;
    }

    Dataset ds = load_manifest((work / "desk_data").string());
    TrainConfig base = read_json((configs / "train_desk.json").string()).get<TrainConfig>();

    // (b) with-beta vs without-beta across seeds 1..3; the shipped run above
    // already is the seed-1 with-beta arm
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        TrainConfig cb = base, c0 = base;
        cb.seed = c0.seed = seed;
        c0.beta = 0.0;
        double with_beta =
            (seed == base.seed)
                ? desk.fused_r1
                : train_and_score(ds, cb, work / ("beta_s" + std::to_string(seed)));
        double no_beta =
            train_and_score(ds, c0, work / ("nobeta_s" + std::to_string(seed)));
        wins += with_beta > no_beta ? 1 : 0;
        detail += fmt("s%llu %.0f/%.0f ", static_cast<unsigned long long>(seed), with_beta,
                      no_beta);
    }
    report(7, "(b) cross-modal loss helps (majority of 3 seeds)", wins >= 2,
           detail + fmt("-> %d/3 strict wins", wins));

    // (c) same seed/config with the cross-attention fusion variant
    TrainConfig cx = base;
    cx.model.fusion.variant = FusionVariant::CrossAtten;
    double cross = train_and_score(ds, cx, work / "cross_atten");
    report(7, "(c) gloss attention at least matches cross-attention", desk.fused_r1 >= cross,
           fmt("gloss-attention %.0f vs cross-attention %.0f", desk.fused_r1, cross));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: %s <cli-binary> <configs-dir>\n", argv[0]);
        return 2;
    }
    std::string cli = argv[1];
    fs::path configs = argv[2];
    fs::path work = fs::temp_directory_path() / "seds_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    json base_cfg = read_json((configs / "train_desk.json").string());

    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_9();
    criterion_5(work, base_cfg);
    criterion_8(work);
    criteria_6_and_7(cli, configs, work);

    if (g_failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d acceptance check(s) failed\n", g_failures);
    return 1;
}
