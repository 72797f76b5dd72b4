#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seds/fusion.hpp"
#include "seds/gradcheck.hpp"
#include "seds/random.hpp"

using namespace seds;

namespace {

ModelConfig small_cfg(FusionVariant v, std::size_t t, std::size_t n, std::size_t d = 6) {
    ModelConfig cfg;
    cfg.d_model = d;
    cfg.text_vocab = 4;
    cfg.clips = t;
    cfg.fusion.variant = v;
    cfg.fusion.n_neighbors = n;
    cfg.fusion.layers = 1;
    cfg.fusion.heads = 1;
    return cfg;
}

Tensor<double> rand_mat(Rng& rng, std::size_t r, std::size_t c, double s = 1.0) {
    Tensor<double> t = Tensor<double>::zeros({r, c});
    for (auto& v : t.data()) v = rng.normal(0.0, s);
    return t;
}

// Dense oracle: local window attention with integer circular neighbors.
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

}  // namespace

TEST_CASE("zero offsets reduce gloss attention to dense local attention") {
    Rng rng(7);
    for (std::size_t n : {1ULL, 3ULL, 5ULL, 7ULL}) {
        ModelConfig cfg = small_cfg(FusionVariant::CGAF, 9, n);
        ParamStore<double> ps(11);
        auto layer = GlossAttentionLayer<double>::create(ps, "f", cfg);
        // w_o is zero-initialized, so adjusted positions are the raw window
        Tensor<double> q = rand_mat(rng, 9, 6), k = rand_mat(rng, 9, 6),
                       v = rand_mat(rng, 9, 6);
        Tensor<double> h = layer.attention_core(q, k, v);
        auto want = dense_local_attention(q.data(), k.data(), v.data(), 9, 6, n, true);
        for (std::size_t i = 0; i < want.size(); ++i) {
            INFO("n=" << n << " elem " << i);
            CHECK_THAT(h.data()[i], Catch::Matchers::WithinAbs(want[i], 1e-9));
        }
    }
}

TEST_CASE("single-neighbor attention passes values through") {
    Rng rng(8);
    ModelConfig cfg = small_cfg(FusionVariant::CGAF, 5, 1);
    ParamStore<double> ps(12);
    auto layer = GlossAttentionLayer<double>::create(ps, "f", cfg);
    Tensor<double> q = rand_mat(rng, 5, 6), k = rand_mat(rng, 5, 6), v = rand_mat(rng, 5, 6);
    Tensor<double> h = layer.attention_core(q, k, v);
    for (std::size_t i = 0; i < v.data().size(); ++i)
        CHECK_THAT(h.data()[i], Catch::Matchers::WithinAbs(v.data()[i], 1e-12));
}

TEST_CASE("adjusted positions always land in [0, T)") {
    Rng rng(9);
    ModelConfig cfg = small_cfg(FusionVariant::CGAF, 11, 7);
    ParamStore<double> ps(13);
    auto layer = GlossAttentionLayer<double>::create(ps, "f", cfg);
    for (auto& v : layer.w_o.data()) v = rng.normal(0.0, 2.0);  // large random offsets
    for (int c = 0; c < 1000; ++c) {
        Tensor<double> q = rand_mat(rng, 11, 6, 2.0);
        Tensor<double> pos = layer.adjusted_positions(q);
        for (double p : pos.data()) {
            REQUIRE(p >= 0.0);
            REQUIRE(p < 11.0);
        }
    }
}

TEST_CASE("offsets are clipped to the window radius") {
    ModelConfig cfg = small_cfg(FusionVariant::CGAF, 20, 3);
    cfg.fusion.offset_clip = 2.0;
    ParamStore<double> ps(14);
    auto layer = GlossAttentionLayer<double>::create(ps, "f", cfg);
    for (auto& v : layer.w_o.data()) v = 100.0;  // would push offsets far past the clip
    Rng rng(10);
    Tensor<double> q = rand_mat(rng, 20, 6);
    Tensor<double> pos = layer.adjusted_positions(q);
    Tensor<double> base = layer.constant_positions(20);
    for (std::size_t i = 0; i < pos.data().size(); ++i) {
        double delta = pos.data()[i] - std::fmod(base.data()[i] + 20.0, 20.0);
        if (delta > 10.0) delta -= 20.0;
        if (delta < -10.0) delta += 20.0;
        CHECK(std::abs(delta) <= 2.0 + 1e-12);
    }
}

TEST_CASE("window larger than the sequence is rejected") {
    ModelConfig cfg = small_cfg(FusionVariant::CGAF, 4, 7);
    ParamStore<double> ps(15);
    auto layer = GlossAttentionLayer<double>::create(ps, "f", cfg);
    Rng rng(11);
    Tensor<double> q = rand_mat(rng, 4, 6);
    CHECK_THROWS_AS(layer.attention_core(q, q, q), ConfigError);
}

TEST_CASE("all fusion variants produce [T x D] and reject an all-masked input") {
    Rng rng(12);
    for (FusionVariant v :
         {FusionVariant::CGAF, FusionVariant::AddMlp, FusionVariant::ConcateMlp,
          FusionVariant::ConcateTrans, FusionVariant::CrossAtten}) {
        ModelConfig cfg = small_cfg(v, 5, 3);
        ParamStore<double> ps(16);
        auto fm = FusionModule<double>::create(ps, cfg);
        Tensor<double> fp = rand_mat(rng, 5, 6), fr = rand_mat(rng, 5, 6);
        Mask m{1, 1, 1, 1, 0};
        Tensor<double> out = fm(fp, fr, m);
        REQUIRE(out.shape() == Shape{5, 6});
        if (v == FusionVariant::CGAF) {
            Mask none{0, 0, 0, 0, 0};
            CHECK_THROWS_AS(fm(fp, fr, none), NumericError);
        }
    }
}

TEST_CASE("AddMlp with a zeroed MLP reduces to f_p + f_r") {
    Rng rng(13);
    ModelConfig cfg = small_cfg(FusionVariant::AddMlp, 4, 3);
    ParamStore<double> ps(17);
    auto fm = FusionModule<double>::create(ps, cfg);
    for (auto& [name, p] : ps.entries())
        if (name.rfind("fusion.mlp", 0) == 0)
            for (auto& x : p.data()) x = 0.0;
    Tensor<double> fp = rand_mat(rng, 4, 6), fr = rand_mat(rng, 4, 6);
    Mask m{1, 1, 1, 1};
    Tensor<double> out = fm(fp, fr, m);
    for (std::size_t i = 0; i < out.data().size(); ++i)
        CHECK_THAT(out.data()[i],
                   Catch::Matchers::WithinAbs(fp.data()[i] + fr.data()[i], 1e-9));
}

TEST_CASE("fusion gradients agree with central differences") {
    for (const auto& r : gc::check_fusion(5)) {
        INFO(r.name);
        CHECK(r.max_rel_err < 1e-4);
    }
}
