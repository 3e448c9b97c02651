#ifndef ECODQN_EXACT_HPP
#define ECODQN_EXACT_HPP

#include <optional>

#include "ecodqn/graph.hpp"

namespace ecodqn {

inline constexpr std::size_t kMaxExactVertices = 26;
inline constexpr std::size_t kMaxEliminationWidth = 22;

struct ExactResult {
    Membership membership;
    double cut = 0.0;
};

/// Exhaustive maximum cut. Vertex 0 is pinned outside S (cuts are symmetric
/// under complement) and the remaining 2^(n-1) assignments are walked in
/// Gray-code order so each step is a single incremental flip.
/// Throws ConfigError above kMaxExactVertices vertices.
ExactResult brute_force_opt(const Graph &g);

/// Induced width of the greedy min-fill elimination order, or nullopt as soon
/// as it is known to exceed `limit`.
std::optional<std::size_t> elimination_width(const Graph &g, std::size_t limit = kMaxEliminationWidth);

/// Exact maximum cut by max-sum variable elimination along the min-fill order.
/// Cost is O(n 2^width); nullopt when the width exceeds `max_width`.
std::optional<ExactResult> elimination_opt(const Graph &g, std::size_t max_width = kMaxEliminationWidth);

/// Brute force up to kMaxExactVertices, elimination above; nullopt if neither applies.
std::optional<ExactResult> exact_opt(const Graph &g);

} // namespace ecodqn

#endif // ECODQN_EXACT_HPP
