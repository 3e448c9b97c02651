#include "ecodqn/graph.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ecodqn/error.hpp"
#include "ecodqn/rng.hpp"

namespace ecodqn {

Graph Graph::from_edges(std::size_t num_vertices, std::span<const Edge> edges) {
    if (num_vertices == 0) throw DataError("graph must have at least one vertex");

    std::vector<std::size_t> degree(num_vertices, 0);
    for (const Edge &e : edges) {
        if (e.u >= num_vertices || e.v >= num_vertices)
            throw DataError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ") out of range");
        if (e.u == e.v) throw DataError("self-loop at vertex " + std::to_string(e.u));
        if (!std::isfinite(e.weight)) throw DataError("non-finite edge weight");
        ++degree[e.u];
        ++degree[e.v];
    }

    Graph g;
    g.offsets_.assign(num_vertices + 1, 0);
    for (std::size_t v = 0; v < num_vertices; ++v) g.offsets_[v + 1] = g.offsets_[v] + degree[v];

    std::vector<std::pair<Vertex, double>> slots(g.offsets_.back());
    std::vector<std::size_t> cursor(g.offsets_.begin(), g.offsets_.end() - 1);
    for (const Edge &e : edges) {
        slots[cursor[e.u]++] = {e.v, e.weight};
        slots[cursor[e.v]++] = {e.u, e.weight};
    }

    g.neighbors_.resize(slots.size());
    g.weights_.resize(slots.size());
    for (std::size_t v = 0; v < num_vertices; ++v) {
        auto first = slots.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v]);
        auto last = slots.begin() + static_cast<std::ptrdiff_t>(g.offsets_[v + 1]);
        std::sort(first, last, [](const auto &a, const auto &b) { return a.first < b.first; });
        auto dup = std::adjacent_find(first, last, [](const auto &a, const auto &b) { return a.first == b.first; });
        if (dup != last)
            throw DataError("duplicate edge (" + std::to_string(v) + ", " + std::to_string(dup->first) + ")");
        for (auto it = first; it != last; ++it) {
            const auto i = static_cast<std::size_t>(it - slots.begin());
            g.neighbors_[i] = it->first;
            g.weights_[i] = it->second;
        }
    }
    return g;
}

double Graph::weight(Vertex u, Vertex v) const noexcept {
    auto nb = neighbors(u);
    auto it = std::lower_bound(nb.begin(), nb.end(), v);
    if (it == nb.end() || *it != v) return 0.0;
    return weights(u)[static_cast<std::size_t>(it - nb.begin())];
}

std::vector<Edge> Graph::edges() const {
    std::vector<Edge> out;
    out.reserve(num_edges());
    for (Vertex u = 0; u < num_vertices(); ++u) {
        auto nb = neighbors(u);
        auto w = weights(u);
        for (std::size_t i = 0; i < nb.size(); ++i)
            if (u < nb[i]) out.push_back({u, nb[i], w[i]});
    }
    return out;
}

Graph Graph::permuted(std::span<const Vertex> perm) const {
    if (perm.size() != num_vertices()) throw DataError("permutation size mismatch");
    auto es = edges();
    for (Edge &e : es) {
        e.u = perm[e.u];
        e.v = perm[e.v];
    }
    return from_edges(num_vertices(), es);
}

std::uint64_t Graph::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t x) {
        for (int i = 0; i < 8; ++i) {
            h ^= (x >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    feed(num_vertices());
    for (const Edge &e : edges()) {
        feed(e.u);
        feed(e.v);
        feed(std::bit_cast<std::uint64_t>(e.weight));
    }
    return h;
}

std::size_t Membership::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Membership Membership::complement() const {
    Membership out(*this);
    for (auto &b : out.bits_) b ^= 1;
    return out;
}

std::size_t Membership::hamming(const Membership &other) const noexcept {
    std::size_t d = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) d += bits_[i] != other.bits_[i];
    return d;
}

std::uint64_t Membership::fingerprint() const noexcept {
    std::uint64_t h = mix64(bits_.size());
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        word |= static_cast<std::uint64_t>(bits_[i] & 1) << (i % 64);
        if (i % 64 == 63) {
            h = mix64(h ^ word);
            word = 0;
        }
    }
    return mix64(h ^ word);
}

Graph generate_er(std::size_t n, double p, std::uint64_t seed) {
    if (n < 2) throw ConfigError("ER graph needs n >= 2");
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("ER edge probability must lie in [0, 1]");
    Rng rng(seed);
    std::vector<Edge> edges;
    for (Vertex u = 0; u < n; ++u)
        for (Vertex v = u + 1; v < n; ++v)
            if (coin(rng, p)) edges.push_back({u, v, 1.0});
    return Graph::from_edges(n, edges);
}

Graph generate_ba(std::size_t n, std::size_t attach, std::uint64_t seed) {
    if (attach < 1) throw ConfigError("BA attachment count must be >= 1");
    if (n <= attach) throw ConfigError("BA graph needs n > attach");
    Rng rng(seed);
    std::vector<Edge> edges;
    edges.reserve(attach * (n - attach));
    // Each endpoint appears once per incident edge, so uniform draws from this
    // pool are degree-proportional.
    std::vector<Vertex> pool;
    std::vector<Vertex> targets(attach);
    std::iota(targets.begin(), targets.end(), Vertex{0});
    std::vector<std::uint8_t> picked(n, 0);
    for (auto source = static_cast<Vertex>(attach); source < n; ++source) {
        for (Vertex t : targets) {
            edges.push_back({std::min(source, t), std::max(source, t), 1.0});
            pool.push_back(t);
            pool.push_back(source);
        }
        for (Vertex t : targets) picked[t] = 0;
        targets.clear();
        while (targets.size() < attach) {
            Vertex t = pool[uniform_index(rng, pool.size())];
            if (!picked[t]) {
                picked[t] = 1;
                targets.push_back(t);
            }
        }
        std::sort(targets.begin(), targets.end());
    }
    return Graph::from_edges(n, edges);
}

Graph assign_signed_weights(const Graph &g, std::uint64_t seed) {
    Rng rng(seed);
    auto es = g.edges();
    for (Edge &e : es) e.weight = coin(rng, 0.5) ? 1.0 : -1.0;
    return Graph::from_edges(g.num_vertices(), es);
}

namespace {

class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}

    /// Next non-blank line; false at end of input.
    bool next(std::string_view &line) {
        while (pos_ < text_.size()) {
            auto end = text_.find('\n', pos_);
            if (end == std::string_view::npos) end = text_.size();
            line = text_.substr(pos_, end - pos_);
            pos_ = end + 1;
            ++number_;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.find_first_not_of(" \t") != std::string_view::npos) return true;
        }
        return false;
    }

    std::size_t number() const noexcept { return number_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t number_ = 0;
};

std::vector<std::string_view> tokens(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view tok, T &out) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && ptr == tok.data() + tok.size();
}

} // namespace

Graph parse_gset(std::string_view text) {
    LineReader reader(text);
    std::string_view line;
    if (!reader.next(line)) throw ParseError(1, "missing header");
    auto head = tokens(line);
    std::size_t n = 0, m = 0;
    if (head.size() != 2 || !parse_number(head[0], n) || !parse_number(head[1], m))
        throw ParseError(reader.number(), "malformed header, expected \"n m\"");
    if (n == 0) throw ParseError(reader.number(), "vertex count must be positive");

    std::vector<Edge> edges;
    edges.reserve(m);
    std::vector<std::pair<Vertex, Vertex>> seen;
    seen.reserve(m);
    std::vector<std::size_t> line_of;
    line_of.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        if (!reader.next(line))
            throw ParseError(reader.number() + 1, "expected " + std::to_string(m) + " edges, found " + std::to_string(k));
        auto tok = tokens(line);
        std::size_t u = 0, v = 0;
        double w = 0.0;
        if (tok.size() != 3 || !parse_number(tok[0], u) || !parse_number(tok[1], v) || !parse_number(tok[2], w))
            throw ParseError(reader.number(), "malformed edge line, expected \"u v w\"");
        if (u < 1 || u > n || v < 1 || v > n) throw ParseError(reader.number(), "vertex index out of range [1, n]");
        if (u == v) throw ParseError(reader.number(), "self-loop");
        if (!std::isfinite(w)) throw ParseError(reader.number(), "non-finite weight");
        auto a = static_cast<Vertex>(std::min(u, v) - 1);
        auto b = static_cast<Vertex>(std::max(u, v) - 1);
        edges.push_back({a, b, w});
        seen.emplace_back(a, b);
        line_of.push_back(reader.number());
    }
    if (reader.next(line)) throw ParseError(reader.number(), "more edge lines than the header declares");

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return seen[i] != seen[j] ? seen[i] < seen[j] : line_of[i] < line_of[j];
    });
    for (std::size_t i = 1; i < order.size(); ++i)
        if (seen[order[i]] == seen[order[i - 1]]) throw ParseError(line_of[order[i]], "duplicate edge");

    return Graph::from_edges(n, edges);
}

Graph read_graph_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open graph file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_gset(buf.str());
    } catch (const ParseError &e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string serialize_graph(const Graph &g) {
    std::string out = std::to_string(g.num_vertices()) + " " + std::to_string(g.num_edges()) + "\n";
    char buf[64];
    for (const Edge &e : g.edges()) {
        out += std::to_string(e.u + 1);
        out += ' ';
        out += std::to_string(e.v + 1);
        out += ' ';
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, e.weight);
        out.append(buf, ptr);
        out += '\n';
    }
    return out;
}

Graph deserialize_graph(std::string_view text) {
    return parse_gset(text);
}

void write_graph_file(const Graph &g, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write graph file " + path);
    out << serialize_graph(g);
}

double cut_value(const Graph &g, const Membership &s) {
    if (s.size() != g.num_vertices()) throw DataError("membership length does not match graph");
    double cut = 0.0;
    for (Vertex u = 0; u < g.num_vertices(); ++u) {
        auto nb = g.neighbors(u);
        auto w = g.weights(u);
        for (std::size_t i = 0; i < nb.size(); ++i)
            if (u < nb[i] && s[u] != s[nb[i]]) cut += w[i];
    }
    return cut;
}

GainVector compute_gains(const Graph &g, const Membership &s) {
    if (s.size() != g.num_vertices()) throw DataError("membership length does not match graph");
    GainVector gains(g.num_vertices(), 0.0);
    for (Vertex v = 0; v < g.num_vertices(); ++v) {
        auto nb = g.neighbors(v);
        auto w = g.weights(v);
        double acc = 0.0;
        for (std::size_t i = 0; i < nb.size(); ++i) acc += s[v] == s[nb[i]] ? w[i] : -w[i];
        gains[v] = acc;
    }
    return gains;
}

double apply_flip(const Graph &g, Membership &s, GainVector &gains, Vertex v) {
    if (v >= g.num_vertices()) throw DataError("flip of vertex " + std::to_string(v) + " out of range");
    const double delta = gains[v];
    s.flip(v);
    gains[v] = -delta;
    auto nb = g.neighbors(v);
    auto w = g.weights(v);
    for (std::size_t i = 0; i < nb.size(); ++i) {
        // After the flip, a neighbor on the same side lost a cut edge it could
        // regain; one on the other side gained a cut edge it would lose.
        gains[nb[i]] += s[nb[i]] == s[v] ? 2.0 * w[i] : -2.0 * w[i];
    }
    return delta;
}

void GraphSpec::validate() const {
    if (family == GraphFamily::ER) {
        if (vertices < 2) throw ConfigError("ER graphs need at least 2 vertices");
        if (!(er_p >= 0.0 && er_p <= 1.0)) throw ConfigError("er_p must lie in [0, 1]");
    } else {
        if (ba_attach < 1) throw ConfigError("ba_attach must be >= 1");
        if (vertices <= ba_attach) throw ConfigError("BA graphs need vertices > ba_attach");
    }
}

Graph GraphSpec::sample(std::uint64_t seed) const {
    Graph g = family == GraphFamily::ER ? generate_er(vertices, er_p, derive_seed(seed, "topology"))
                                        : generate_ba(vertices, ba_attach, derive_seed(seed, "topology"));
    return signed_weights ? assign_signed_weights(g, derive_seed(seed, "signs")) : g;
}

std::string to_string(GraphFamily f) {
    return f == GraphFamily::ER ? "er" : "ba";
}

GraphFamily parse_graph_family(std::string_view s) {
    if (s == "er" || s == "ER") return GraphFamily::ER;
    if (s == "ba" || s == "BA") return GraphFamily::BA;
    throw ConfigError("unknown graph family '" + std::string(s) + "' (expected er or ba)");
}

} // namespace ecodqn
