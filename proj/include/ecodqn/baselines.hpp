#ifndef ECODQN_BASELINES_HPP
#define ECODQN_BASELINES_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "ecodqn/graph.hpp"

namespace ecodqn {

struct SolveResult {
    Membership membership;
    double cut = 0.0;
    std::size_t steps = 0;
    std::size_t restart = 0;
};

/// Greedy additions from the empty set while some addition improves the cut.
SolveResult mca_irrev(const Graph &g);

/// Greedy flips (either direction) from a random start until locally optimal.
SolveResult mca_rev(const Graph &g, std::uint64_t seed);

/// Greedy flips from a given start.
SolveResult mca_rev_from(const Graph &g, Membership start);

using Solver = std::function<SolveResult(const Graph &, std::uint64_t seed)>;

/// Best of `episodes` independent runs; restart i uses derive_seed(seed, i).
/// Ties keep the earliest restart. When `cuts` is given it receives every
/// restart's cut in order.
SolveResult multi_restart(const Solver &solver, const Graph &g, std::size_t episodes, std::uint64_t seed,
                          std::vector<double> *cuts = nullptr);

/// Best of MCA-irrev and `restarts` MCA-rev runs.
SolveResult mca_best(const Graph &g, std::size_t restarts, std::uint64_t seed);

/// Random start where each vertex joins S with probability 1/2.
Membership random_membership(std::size_t n, std::uint64_t seed);

} // namespace ecodqn

#endif // ECODQN_BASELINES_HPP
