#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "seds/metrics.hpp"
#include "seds/random.hpp"

using namespace seds;

namespace {

// Oracle rank via stable sort on (score desc, index asc).
std::vector<std::size_t> sort_ranks(const std::vector<double>& scores, std::size_t b) {
    std::vector<std::size_t> ranks(b);
    for (std::size_t i = 0; i < b; ++i) {
        std::vector<std::size_t> order(b);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return scores[i * b + x] > scores[i * b + y];
        });
        for (std::size_t pos = 0; pos < b; ++pos)
            if (order[pos] == i) ranks[i] = pos + 1;
    }
    return ranks;
}

}  // namespace

TEST_CASE("rank_queries matches a stable-sort oracle on random matrices") {
    Rng rng(21);
    for (int c = 0; c < 50; ++c) {
        std::size_t b = rng.uniform_int(1, 12);
        std::vector<double> scores(b * b);
        // quantized scores force plenty of ties
        for (auto& s : scores) s = static_cast<double>(rng.uniform_int(0, 4));
        CHECK(rank_queries(scores, b) == sort_ranks(scores, b));
    }
}

TEST_CASE("tie goes to the lower index") {
    // query 0: item 1 ties the match at 0 -> rank counts only lower indices
    std::vector<double> scores{0.5, 0.5, 0.1, 0.9, 0.5, 0.2, 0.3, 0.3, 0.3};
    auto r = rank_queries(scores, 3);
    CHECK(r[0] == 1);  // index 1 ties but is higher-indexed
    CHECK(r[1] == 2);  // index 0 with 0.9 beats the 0.5 match
    CHECK(r[2] == 3);  // indices 0 and 1 tie at 0.3 and are lower-indexed
}

TEST_CASE("recall and median rank") {
    std::vector<std::size_t> ranks{1, 1, 2, 6, 11, 3};
    auto rep = make_report(ranks, "t2v");
    CHECK_THAT(rep.r1, Catch::Matchers::WithinAbs(100.0 * 2 / 6, 1e-12));
    CHECK_THAT(rep.r5, Catch::Matchers::WithinAbs(100.0 * 4 / 6, 1e-12));
    CHECK_THAT(rep.r10, Catch::Matchers::WithinAbs(100.0 * 5 / 6, 1e-12));
    CHECK_THAT(rep.medr, Catch::Matchers::WithinAbs(2.5, 1e-12));  // midpoint of {2,3}
    auto odd = make_report({5, 1, 9}, "t2v");
    CHECK_THAT(odd.medr, Catch::Matchers::WithinAbs(5.0, 1e-12));
}

TEST_CASE("identity score matrix gives perfect retrieval") {
    std::size_t b = 8;
    std::vector<double> scores(b * b, 0.0);
    for (std::size_t i = 0; i < b; ++i) scores[i * b + i] = 1.0;
    auto rep = make_report(rank_queries(scores, b), "t2v");
    CHECK(rep.r1 == 100.0);
    CHECK(rep.medr == 1.0);
}

TEST_CASE("report JSON round-trip") {
    RetrievalReport rep = make_report({1, 2, 3}, "v2t");
    rep.checkpoint = "ck.seda";
    rep.split = "test";
    rep.modality = "fused";
    nlohmann::json j = rep;
    auto back = j.get<RetrievalReport>();
    CHECK(back.direction == "v2t");
    CHECK(back.ranks == rep.ranks);
    CHECK(back.medr == rep.medr);
    CHECK(back.modality == "fused");
}
