#include "ecodqn/exact.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <vector>

#include "ecodqn/error.hpp"

namespace ecodqn {

ExactResult brute_force_opt(const Graph &g) {
    const std::size_t n = g.num_vertices();
    if (n > kMaxExactVertices)
        throw ConfigError("exact solver is capped at " + std::to_string(kMaxExactVertices) + " vertices, got " +
                          std::to_string(n));
    if (n == 0) return {Membership(0), 0.0};

    Membership s(n);
    GainVector gains = compute_gains(g, s);
    double cut = 0.0;
    double best = 0.0;
    std::uint64_t best_code = 0;
    const std::uint64_t states = std::uint64_t{1} << (n - 1);
    for (std::uint64_t i = 1; i < states; ++i) {
        const auto v = static_cast<Vertex>(std::countr_zero(i) + 1);
        cut += apply_flip(g, s, gains, v);
        if (cut > best) {
            best = cut;
            best_code = i ^ (i >> 1);
        }
    }

    ExactResult r;
    r.membership = Membership(n);
    for (std::size_t b = 0; b + 1 < n; ++b)
        if ((best_code >> b) & 1) r.membership.set(b + 1, true);
    r.cut = cut_value(g, r.membership);
    return r;
}

namespace {

// Greedy min-fill order; ties to smaller degree, then lower index.
std::optional<std::vector<Vertex>> min_fill_order(const Graph &g, std::size_t limit, std::size_t &width) {
    const std::size_t n = g.num_vertices();
    std::vector<std::vector<Vertex>> adj(n);
    for (Vertex v = 0; v < n; ++v) {
        auto nb = g.neighbors(v);
        adj[v].assign(nb.begin(), nb.end());
    }
    std::vector<std::uint8_t> gone(n, 0);
    auto linked = [&](Vertex a, Vertex b) { return std::binary_search(adj[a].begin(), adj[a].end(), b); };
    auto fill = [&](Vertex v) {
        std::size_t f = 0;
        const auto &a = adj[v];
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = i + 1; j < a.size(); ++j)
                if (!linked(a[i], a[j])) ++f;
        return f;
    };

    std::vector<Vertex> order;
    order.reserve(n);
    width = 0;
    for (std::size_t step = 0; step < n; ++step) {
        Vertex pick = 0;
        std::size_t best_fill = std::numeric_limits<std::size_t>::max(), best_deg = best_fill;
        for (Vertex v = 0; v < n; ++v) {
            if (gone[v]) continue;
            const std::size_t d = adj[v].size();
            if (d > limit) continue;
            const std::size_t f = fill(v);
            if (f < best_fill || (f == best_fill && d < best_deg)) {
                pick = v;
                best_fill = f;
                best_deg = d;
            }
        }
        if (best_deg > limit) return std::nullopt; // every remaining vertex is too wide
        width = std::max(width, best_deg);
        const std::vector<Vertex> nb = adj[pick];
        for (Vertex a : nb) {
            auto &l = adj[a];
            l.erase(std::lower_bound(l.begin(), l.end(), pick));
            for (Vertex b : nb) {
                if (b == a) continue;
                auto it = std::lower_bound(l.begin(), l.end(), b);
                if (it == l.end() || *it != b) l.insert(it, b);
            }
        }
        adj[pick].clear();
        gone[pick] = 1;
        order.push_back(pick);
    }
    return order;
}

struct Factor {
    std::vector<Vertex> scope; // ascending; bit i of a table index is scope[i]
    std::vector<double> table;
};

struct Eliminated {
    Vertex var;
    std::vector<Vertex> scope;
    std::vector<std::uint8_t> choice;
};

} // namespace

std::optional<std::size_t> elimination_width(const Graph &g, std::size_t limit) {
    std::size_t width = 0;
    if (!min_fill_order(g, limit, width)) return std::nullopt;
    return width;
}

std::optional<ExactResult> elimination_opt(const Graph &g, std::size_t max_width) {
    const std::size_t n = g.num_vertices();
    std::size_t width = 0;
    auto order = min_fill_order(g, max_width, width);
    if (!order) return std::nullopt;

    std::vector<Factor> factors;
    std::vector<std::vector<std::size_t>> touching(n);
    std::vector<std::uint8_t> alive;
    auto add = [&](Factor f) {
        for (Vertex v : f.scope) touching[v].push_back(factors.size());
        factors.push_back(std::move(f));
        alive.push_back(1);
    };
    for (const auto &e : g.edges()) {
        const Vertex a = std::min(e.u, e.v), b = std::max(e.u, e.v);
        add({{a, b}, {0.0, e.weight, e.weight, 0.0}});
    }

    std::vector<Eliminated> trail;
    trail.reserve(n);
    for (Vertex x : *order) {
        std::vector<std::size_t> bucket;
        std::vector<Vertex> scope;
        for (std::size_t fi : touching[x]) {
            if (!alive[fi]) continue;
            alive[fi] = 0;
            bucket.push_back(fi);
            for (Vertex v : factors[fi].scope)
                if (v != x) scope.push_back(v);
        }
        std::sort(scope.begin(), scope.end());
        scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
        const std::size_t s = scope.size();

        // For each bucket factor, the bit of each of its variables in the extended index (x is bit s).
        std::vector<std::vector<std::size_t>> bits(bucket.size());
        for (std::size_t k = 0; k < bucket.size(); ++k)
            for (Vertex v : factors[bucket[k]].scope)
                bits[k].push_back(v == x ? s
                                         : static_cast<std::size_t>(std::lower_bound(scope.begin(), scope.end(), v) -
                                                                    scope.begin()));

        const std::size_t size = std::size_t{1} << s;
        Factor out{scope, std::vector<double>(size)};
        Eliminated rec{x, scope, std::vector<std::uint8_t>(size)};
        for (std::size_t a = 0; a < size; ++a) {
            double val[2] = {0.0, 0.0};
            for (std::size_t xv = 0; xv < 2; ++xv) {
                const std::size_t ext = a | (xv << s);
                for (std::size_t k = 0; k < bucket.size(); ++k) {
                    std::size_t idx = 0;
                    for (std::size_t i = 0; i < bits[k].size(); ++i) idx |= ((ext >> bits[k][i]) & 1) << i;
                    val[xv] += factors[bucket[k]].table[idx];
                }
            }
            rec.choice[a] = val[1] > val[0] ? 1 : 0;
            out.table[a] = std::max(val[0], val[1]);
        }
        for (std::size_t fi : bucket) {
            factors[fi].table.clear();
            factors[fi].table.shrink_to_fit();
        }
        if (s > 0) add(std::move(out));
        trail.push_back(std::move(rec));
    }

    ExactResult r;
    r.membership = Membership(n);
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) {
        std::size_t a = 0;
        for (std::size_t i = 0; i < it->scope.size(); ++i) a |= std::size_t{r.membership[it->scope[i]]} << i;
        if (it->choice[a]) r.membership.set(it->var, true);
    }
    r.cut = cut_value(g, r.membership);
    return r;
}

std::optional<ExactResult> exact_opt(const Graph &g) {
    if (g.num_vertices() <= kMaxExactVertices) return brute_force_opt(g);
    return elimination_opt(g);
}

} // namespace ecodqn
