#ifndef ECODQN_GRAPH_HPP
#define ECODQN_GRAPH_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ecodqn {

using Vertex = std::uint32_t;

struct Edge {
    Vertex u;
    Vertex v;
    double weight;

    friend bool operator==(const Edge &, const Edge &) = default;
};

/**
 * Undirected, signed-weighted graph stored as compressed adjacency lists.
 *
 * Immutable once constructed. Neighbor lists are sorted by ascending index so
 * every traversal visits neighbors in the same order.
 */
class Graph {
public:
    Graph() = default;

    /// Validates and builds a graph. Rejects self-loops, duplicate pairs,
    /// out-of-range endpoints and non-finite weights (DataError).
    static Graph from_edges(std::size_t num_vertices, std::span<const Edge> edges);

    std::size_t num_vertices() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t num_edges() const noexcept { return neighbors_.size() / 2; }

    std::span<const Vertex> neighbors(Vertex v) const noexcept {
        return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    std::span<const double> weights(Vertex v) const noexcept {
        return {weights_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    std::size_t degree(Vertex v) const noexcept { return offsets_[v + 1] - offsets_[v]; }

    /// Weight of edge (u, v), or 0 when absent.
    double weight(Vertex u, Vertex v) const noexcept;

    /// Each undirected edge once, u < v, in lexicographic order.
    std::vector<Edge> edges() const;

    /// Relabels vertex v as perm[v].
    Graph permuted(std::span<const Vertex> perm) const;

    /// FNV-1a over the serialized edge list; identifies instances in the run registry.
    std::uint64_t content_hash() const;

    friend bool operator==(const Graph &, const Graph &) = default;

private:
    std::vector<std::size_t> offsets_;
    std::vector<Vertex> neighbors_;
    std::vector<double> weights_;
};

/// Solution set S as one byte per vertex (1 = in S).
class Membership {
public:
    Membership() = default;
    explicit Membership(std::size_t n) : bits_(n, 0) {}
    explicit Membership(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

    std::size_t size() const noexcept { return bits_.size(); }
    bool operator[](std::size_t v) const noexcept { return bits_[v] != 0; }
    void set(std::size_t v, bool in) noexcept { bits_[v] = in ? 1 : 0; }
    void flip(std::size_t v) noexcept { bits_[v] ^= 1; }

    std::size_t count() const noexcept;
    Membership complement() const;
    std::size_t hamming(const Membership &other) const noexcept;
    std::uint64_t fingerprint() const noexcept;

    const std::vector<std::uint8_t> &bits() const noexcept { return bits_; }

    friend bool operator==(const Membership &, const Membership &) = default;

private:
    std::vector<std::uint8_t> bits_;
};

using GainVector = std::vector<double>;

Graph generate_er(std::size_t n, double p, std::uint64_t seed);

/// Preferential attachment. The first `attach` vertices start unconnected,
/// vertex `attach` links to all of them, and every later vertex links to
/// `attach` distinct earlier vertices drawn proportionally to degree.
/// Produces exactly attach * (n - attach) edges and a connected graph.
Graph generate_ba(std::size_t n, std::size_t attach, std::uint64_t seed);

/// Replaces each weight by +1 or -1 with equal probability.
Graph assign_signed_weights(const Graph &g, std::uint64_t seed);

/// GSet text: "n m" header then m lines "u v w", 1-indexed.
Graph parse_gset(std::string_view text);
Graph read_graph_file(const std::string &path);

std::string serialize_graph(const Graph &g);
Graph deserialize_graph(std::string_view text);
void write_graph_file(const Graph &g, const std::string &path);

double cut_value(const Graph &g, const Membership &s);
GainVector compute_gains(const Graph &g, const Membership &s);

/// Toggles v in place, keeps gains consistent, returns the cut change.
double apply_flip(const Graph &g, Membership &s, GainVector &gains, Vertex v);

enum class GraphFamily { ER, BA };

/// A random instance distribution: family, size, and whether weights are signed.
struct GraphSpec {
    GraphFamily family = GraphFamily::ER;
    std::size_t vertices = 20;
    double er_p = 0.15;
    std::size_t ba_attach = 2;
    bool signed_weights = true;

    /// Generates one instance; topology and signs use independent sub-seeds.
    Graph sample(std::uint64_t seed) const;
    void validate() const;

    friend bool operator==(const GraphSpec &, const GraphSpec &) = default;
};

std::string to_string(GraphFamily f);
GraphFamily parse_graph_family(std::string_view s);

} // namespace ecodqn

#endif // ECODQN_GRAPH_HPP
