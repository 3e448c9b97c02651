#include "ecodqn/baselines.hpp"

#include "ecodqn/error.hpp"
#include "ecodqn/rng.hpp"

namespace ecodqn {

Membership random_membership(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Membership s(n);
    for (std::size_t v = 0; v < n; ++v) s.set(v, coin(rng, 0.5));
    return s;
}

SolveResult mca_irrev(const Graph &g) {
    SolveResult r;
    r.membership = Membership(g.num_vertices());
    GainVector gains = compute_gains(g, r.membership);
    for (;;) {
        Vertex best = 0;
        double best_gain = 0.0;
        bool found = false;
        for (Vertex v = 0; v < g.num_vertices(); ++v) {
            if (!r.membership[v] && gains[v] > best_gain) {
                best = v;
                best_gain = gains[v];
                found = true;
            }
        }
        if (!found) break;
        r.cut += apply_flip(g, r.membership, gains, best);
        ++r.steps;
    }
    return r;
}

SolveResult mca_rev_from(const Graph &g, Membership start) {
    SolveResult r;
    r.membership = std::move(start);
    r.cut = cut_value(g, r.membership);
    GainVector gains = compute_gains(g, r.membership);
    for (;;) {
        Vertex best = 0;
        double best_gain = 0.0;
        bool found = false;
        for (Vertex v = 0; v < g.num_vertices(); ++v) {
            if (gains[v] > best_gain) {
                best = v;
                best_gain = gains[v];
                found = true;
            }
        }
        if (!found) break;
        r.cut += apply_flip(g, r.membership, gains, best);
        ++r.steps;
    }
    return r;
}

SolveResult mca_rev(const Graph &g, std::uint64_t seed) {
    return mca_rev_from(g, random_membership(g.num_vertices(), seed));
}

SolveResult multi_restart(const Solver &solver, const Graph &g, std::size_t episodes, std::uint64_t seed,
                          std::vector<double> *cuts) {
    if (episodes < 1) throw ConfigError("multi_restart needs at least one episode");
    if (cuts) cuts->clear();
    SolveResult best;
    for (std::size_t i = 0; i < episodes; ++i) {
        SolveResult r = solver(g, derive_seed(seed, i));
        r.restart = i;
        if (cuts) cuts->push_back(r.cut);
        if (i == 0 || r.cut > best.cut) best = std::move(r);
    }
    return best;
}

SolveResult mca_best(const Graph &g, std::size_t restarts, std::uint64_t seed) {
    SolveResult best = mca_irrev(g);
    if (restarts > 0) {
        SolveResult rev = multi_restart(mca_rev, g, restarts, seed);
        if (rev.cut > best.cut) best = std::move(rev);
    }
    return best;
}

} // namespace ecodqn
