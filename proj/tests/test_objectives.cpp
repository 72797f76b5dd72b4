#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seds/gradcheck.hpp"
#include "seds/objectives.hpp"
#include "seds/random.hpp"

using namespace seds;

namespace {

// Independent reimplementation of the fine-grained scores with naive loops
// and unstabilized softmax.
struct Oracle {
    static std::vector<double> naive_col_softmax(const std::vector<double>& e, std::size_t m,
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

    static std::vector<double> naive_row_softmax(const std::vector<double>& e, std::size_t m,
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

    // text-side and video-side fine-grained scores
    static std::pair<double, double> fine(const std::vector<double>& a,
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

    static std::pair<double, double> pose_rgb(const std::vector<double>& a,
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
                den1 += std::exp(w1[i * t + j]);  // over row i
                den2 += std::exp(w2[j * t + i]);  // over column i
            }
            s1 += w1[i * t + i] * std::exp(w1[i * t + i]) / den1;
            s2 += w2[i * t + i] * std::exp(w2[i * t + i]) / den2;
        }
        return {s1, s2};
    }
};

Mask random_mask(Rng& rng, std::size_t n) {
    Mask m(n);
    bool any = false;
    for (auto& v : m) {
        v = rng.uniform() < 0.75 ? 1 : 0;
        any = any || v;
    }
    if (!any) m[rng.uniform_int(0, n - 1)] = 1;
    return m;
}

}  // namespace

TEST_CASE("fine-grained score matches a brute-force oracle on 100 masked cases") {
    Rng rng(42);
    for (int c = 0; c < 100; ++c) {
        std::size_t t = rng.uniform_int(1, 6), l = rng.uniform_int(1, 6);
        std::size_t d = rng.uniform_int(2, 5);
        std::vector<double> a(t * d), b(l * d);
        for (auto& v : a) v = rng.normal(0.0, 1.0);
        for (auto& v : b) v = rng.normal(0.0, 1.0);
        Mask cm = random_mask(rng, t), wm = random_mask(rng, l);
        auto fa = Tensor<double>::from({t, d}, std::vector<double>(a));
        auto fb = Tensor<double>::from({l, d}, std::vector<double>(b));
        double got1 = fine_grained_score(fa, fb, cm, wm, ScoreDir::T2K).item();
        double got2 = fine_grained_score(fa, fb, cm, wm, ScoreDir::K2T).item();
        auto [want1, want2] = Oracle::fine(a, b, t, l, d, cm, wm);
        CHECK_THAT(got1, Catch::Matchers::WithinAbs(want1, 1e-9));
        CHECK_THAT(got2, Catch::Matchers::WithinAbs(want2, 1e-9));
    }
}

TEST_CASE("pose-RGB score matches a brute-force oracle on 100 masked cases") {
    Rng rng(43);
    for (int c = 0; c < 100; ++c) {
        std::size_t t = rng.uniform_int(1, 6), d = rng.uniform_int(2, 5);
        std::vector<double> a(t * d), b(t * d);
        for (auto& v : a) v = rng.normal(0.0, 1.0);
        for (auto& v : b) v = rng.normal(0.0, 1.0);
        Mask m = random_mask(rng, t);
        auto fa = Tensor<double>::from({t, d}, std::vector<double>(a));
        auto fb = Tensor<double>::from({t, d}, std::vector<double>(b));
        double got1 = pose_rgb_score(fa, fb, m, PrDir::P2R).item();
        double got2 = pose_rgb_score(fa, fb, m, PrDir::R2P).item();
        auto [want1, want2] = Oracle::pose_rgb(a, b, t, d, m);
        CHECK_THAT(got1, Catch::Matchers::WithinAbs(want1, 1e-9));
        CHECK_THAT(got2, Catch::Matchers::WithinAbs(want2, 1e-9));
    }
}

TEST_CASE("identity similarity spot values") {
    // orthonormal rows: E = I_2
    auto fk = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    auto fw = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    Mask m{1, 1};
    double s = fine_grained_score(fk, fw, m, m, ScoreDir::T2K).item();
    double expect = std::exp(1.0) / (std::exp(1.0) + 1.0);
    CHECK_THAT(s, Catch::Matchers::WithinAbs(expect, 1e-12));
    CHECK_THAT(s, Catch::Matchers::WithinAbs(0.73106, 1e-5));

    double pr = pose_rgb_score(fk, fw, m, PrDir::P2R).item();
    double diag = expect;
    double soft = std::exp(diag) / (std::exp(diag) + 1.0);
    CHECK_THAT(pr, Catch::Matchers::WithinAbs(2.0 * diag * soft, 1e-12));
    CHECK_THAT(pr, Catch::Matchers::WithinAbs(0.98698, 1e-5));
    CHECK_THAT(pose_rgb_score(fk, fw, m, PrDir::R2P).item(),
               Catch::Matchers::WithinAbs(pr, 1e-12));
}

TEST_CASE("InfoNCE of a uniform 2x2 matrix at unit temperature is ln 2") {
    auto m = Tensor<double>::full({2, 2}, 0.37);
    auto tau = Tensor<double>::scalar(1.0);
    CHECK_THAT(infonce(m, tau, NceDir::Row).item(),
               Catch::Matchers::WithinAbs(std::log(2.0), 1e-9));
    CHECK_THAT(infonce(m, tau, NceDir::Col).item(),
               Catch::Matchers::WithinAbs(std::log(2.0), 1e-9));
}

TEST_CASE("InfoNCE prefers a dominant diagonal") {
    auto good = Tensor<double>::from({2, 2}, {5, 0, 0, 5});
    auto bad = Tensor<double>::from({2, 2}, {0, 5, 5, 0});
    auto tau = Tensor<double>::scalar(1.0);
    CHECK(infonce(good, tau, NceDir::Row).item() < infonce(bad, tau, NceDir::Row).item());
    CHECK_THROWS_AS(infonce(good, Tensor<double>::scalar(0.0), NceDir::Row), NumericError);
}

TEST_CASE("loss composition is exactly total = tv + alpha (tp + tr) + beta pr") {
    auto tv = Tensor<double>::scalar(1.25), tp = Tensor<double>::scalar(0.5);
    auto tr = Tensor<double>::scalar(0.75), pr = Tensor<double>::scalar(2.0);
    auto total = joint_loss(tva_loss(tv, tp, tr, 0.8), pr, 0.4);
    CHECK_THAT(total.item(), Catch::Matchers::WithinAbs(1.25 + 0.8 * 1.25 + 0.4 * 2.0, 1e-12));
}

TEST_CASE("degenerate masks raise") {
    auto fa = Tensor<double>::from({2, 2}, {1, 0, 0, 1});
    Mask none{0, 0}, ok{1, 1};
    CHECK_THROWS_AS(fine_grained_score(fa, fa, none, ok, ScoreDir::T2K), NumericError);
    CHECK_THROWS_AS(pose_rgb_score(fa, fa, none, PrDir::P2R), NumericError);
}

TEST_CASE("objective gradients agree with central differences") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        for (const auto& r : gc::check_objectives(seed)) {
            INFO(r.name << " seed " << seed);
            CHECK(r.max_rel_err < 1e-4);
        }
    }
}
