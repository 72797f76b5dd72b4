#pragma once

// Skeleton keypoint groups and their graph structure.
// Layout of the 49 keypoints per frame: [0,21) left hand, [21,42) right hand,
// [42,49) body. Hands share one topology; local index 0 is the wrist.
// Body local indices: 0 nose, 1/2 shoulders, 3/4 elbows, 5/6 wrists.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace seds {

constexpr std::size_t kHandPoints = 21;
constexpr std::size_t kBodyPoints = 7;
constexpr std::size_t kTotalPoints = 2 * kHandPoints + kBodyPoints;  // 49
constexpr std::size_t kLeftHandOffset = 0;
constexpr std::size_t kRightHandOffset = kHandPoints;
constexpr std::size_t kBodyOffset = 2 * kHandPoints;
constexpr std::size_t kClipLen = 16;

struct GroupTopology {
    std::size_t num_points = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<double> adjacency;  // [K x K], symmetric, zero diagonal, 0/1

    // Lambda^{-1/2} (A + I) Lambda^{-1/2}
    std::vector<double> normalized_adjacency() const {
        std::size_t k = num_points;
        std::vector<double> a_hat(k * k, 0.0);
        std::vector<double> deg(k, 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                deg[i] += adjacency[i * k + j] + (i == j ? 1.0 : 0.0);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                double aij = adjacency[i * k + j] + (i == j ? 1.0 : 0.0);
                a_hat[i * k + j] = aij / std::sqrt(deg[i] * deg[j]);
            }
        return a_hat;
    }
};

inline GroupTopology make_group(std::size_t num_points,
                                std::vector<std::pair<std::size_t, std::size_t>> edges) {
    GroupTopology g;
    g.num_points = num_points;
    g.edges = std::move(edges);
    g.adjacency.assign(num_points * num_points, 0.0);
    for (auto [i, j] : g.edges) {
        if (i >= num_points || j >= num_points || i == j)
            throw std::invalid_argument("bad skeleton edge");
        g.adjacency[i * num_points + j] = 1.0;
        g.adjacency[j * num_points + i] = 1.0;
    }
    return g;
}

struct SkeletonTopology {
    GroupTopology hand;  // shared by both hands
    GroupTopology body;
};

// Hand: wrist at 0, five chains of four joints each.
// Body: nose-shoulder edges plus shoulder-elbow-wrist chains.
inline SkeletonTopology default_topology() {
    std::vector<std::pair<std::size_t, std::size_t>> hand_edges;
    for (std::size_t f = 0; f < 5; ++f) {
        std::size_t base = 1 + f * 4;
        hand_edges.emplace_back(0, base);
        hand_edges.emplace_back(base, base + 1);
        hand_edges.emplace_back(base + 1, base + 2);
        hand_edges.emplace_back(base + 2, base + 3);
    }
    std::vector<std::pair<std::size_t, std::size_t>> body_edges = {
        {0, 1}, {0, 2}, {1, 3}, {3, 5}, {2, 4}, {4, 6}};
    SkeletonTopology topo;
    topo.hand = make_group(kHandPoints, std::move(hand_edges));
    topo.body = make_group(kBodyPoints, std::move(body_edges));
    return topo;
}

}  // namespace seds
