#pragma once

// Retrieval metrics: ranks, recall@K, median rank, and report serialization.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seds/tensor.hpp"

namespace seds {

// Rank of the matched item (diagonal entry) for every query row of a
// [B x B] score matrix, higher score = better. Ties are broken by item
// index: an equal-scoring item with a lower index outranks the match.
template <typename T>
std::vector<std::size_t> rank_queries(const std::vector<T>& scores, std::size_t b) {
    if (scores.size() != b * b) throw ShapeError("rank_queries: bad matrix size");
    std::vector<std::size_t> ranks(b);
    for (std::size_t i = 0; i < b; ++i) {
        T own = scores[i * b + i];
        std::size_t r = 1;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            T s = scores[i * b + j];
            if (s > own || (s == own && j < i)) ++r;
        }
        ranks[i] = r;
    }
    return ranks;
}

struct RetrievalReport {
    std::string direction;   // "t2v" or "v2t"
    double r1 = 0, r5 = 0, r10 = 0;
    double medr = 0;
    std::vector<std::size_t> ranks;
    std::string checkpoint;
    std::string split;
    std::string modality;
};

inline RetrievalReport make_report(const std::vector<std::size_t>& ranks,
                                   const std::string& direction) {
    RetrievalReport rep;
    rep.direction = direction;
    rep.ranks = ranks;
    std::size_t b = ranks.size();
    if (b == 0) throw ShapeError("make_report: empty rank list");
    std::size_t c1 = 0, c5 = 0, c10 = 0;
    for (auto r : ranks) {
        c1 += r <= 1;
        c5 += r <= 5;
        c10 += r <= 10;
    }
    rep.r1 = 100.0 * static_cast<double>(c1) / static_cast<double>(b);
    rep.r5 = 100.0 * static_cast<double>(c5) / static_cast<double>(b);
    rep.r10 = 100.0 * static_cast<double>(c10) / static_cast<double>(b);
    std::vector<std::size_t> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    if (b % 2 == 1)
        rep.medr = static_cast<double>(sorted[b / 2]);
    else
        rep.medr = 0.5 * (static_cast<double>(sorted[b / 2 - 1]) +
                          static_cast<double>(sorted[b / 2]));
    return rep;
}

inline void to_json(nlohmann::json& j, const RetrievalReport& r) {
    j = nlohmann::json{{"direction", r.direction}, {"r1", r.r1},   {"r5", r.r5},
                       {"r10", r.r10},             {"medr", r.medr}, {"ranks", r.ranks},
                       {"checkpoint", r.checkpoint}, {"split", r.split},
                       {"modality", r.modality}};
}

inline void from_json(const nlohmann::json& j, RetrievalReport& r) {
    j.at("direction").get_to(r.direction);
    j.at("r1").get_to(r.r1);
    j.at("r5").get_to(r.r5);
    j.at("r10").get_to(r.r10);
    j.at("medr").get_to(r.medr);
    j.at("ranks").get_to(r.ranks);
    r.checkpoint = j.value("checkpoint", "");
    r.split = j.value("split", "");
    r.modality = j.value("modality", "");
}

}  // namespace seds
