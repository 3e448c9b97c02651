#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ecodqn/environment.hpp"
#include "ecodqn/error.hpp"
#include "ecodqn/qnet.hpp"
#include "oracles.hpp"

using namespace ecodqn;

namespace {

using Vec = std::vector<double>;

double relu(double x) { return x > 0.0 ? x : 0.0; }

// y = x * M for a row-major block view.
Vec mul(const Vec &x, const Matrix &M) {
    Vec y(static_cast<std::size_t>(M.cols()), 0.0);
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) y[j] += x[i] * M(i, j);
    return y;
}

Vec relu(Vec v) {
    for (auto &x : v) x = relu(x);
    return v;
}

Vec cat(const Vec &a, const Vec &b) {
    Vec r = a;
    r.insert(r.end(), b.begin(), b.end());
    return r;
}

// Scalar-loop version of the network over edge-list neighbourhoods.
Vec naive_forward(const QNetParams &p, const Graph &g, const Matrix &obs) {
    const std::size_t nv = g.num_vertices(), n = p.dims.embedding, K = p.dims.rounds;
    std::vector<std::vector<std::pair<std::size_t, double>>> nbr(nv);
    for (const auto &e : g.edges()) {
        nbr[e.u].push_back({e.v, e.weight});
        nbr[e.v].push_back({e.u, e.weight});
    }
    for (auto &l : nbr) std::sort(l.begin(), l.end());
    auto x = [&](std::size_t v) { return Vec(obs.row(v).data(), obs.row(v).data() + obs.cols()); };

    std::vector<Vec> mu(nv), xi(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        mu[v] = relu(mul(x(v), p.theta1));
        Vec acc(n - 1, 0.0);
        for (auto [u, w] : nbr[v]) {
            Vec in = cat({w}, x(u));
            Vec h = relu(mul(in, p.theta2));
            for (std::size_t i = 0; i < n - 1; ++i) acc[i] += h[i];
        }
        if (!nbr[v].empty())
            for (auto &a : acc) a /= static_cast<double>(nbr[v].size());
        xi[v] = relu(mul(cat(acc, {static_cast<double>(nbr[v].size())}), p.theta3));
    }
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<Vec> next(nv);
        for (std::size_t v = 0; v < nv; ++v) {
            Vec agg(n, 0.0);
            for (auto [u, w] : nbr[v])
                for (std::size_t i = 0; i < n; ++i) agg[i] += w * mu[u][i];
            if (!nbr[v].empty())
                for (auto &a : agg) a /= static_cast<double>(nbr[v].size());
            Vec m = relu(mul(cat(agg, xi[v]), p.theta4[k]));
            next[v] = relu(mul(cat(mu[v], m), p.theta5[k]));
        }
        mu = std::move(next);
    }
    Vec pooled(n, 0.0);
    for (std::size_t v = 0; v < nv; ++v)
        for (std::size_t i = 0; i < n; ++i) pooled[i] += mu[v][i];
    for (auto &a : pooled) a /= static_cast<double>(nv);
    Vec pa = relu(mul(pooled, p.theta6));
    Vec q(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        Vec z = cat(pa, mu[v]);
        q[v] = 0.0;
        for (std::size_t i = 0; i < 2 * n; ++i) q[v] += p.theta7[static_cast<Eigen::Index>(i)] * z[i];
    }
    return q;
}

Matrix random_obs(std::size_t rows, std::size_t cols, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

double rel_err(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

} // namespace

TEST(QNetParams, BlockShapesAndOrder) {
    const QNetDims d{7, 64, 3};
    QNetParams p = init_params(d, 1);
    const auto blocks = p.blocks();
    const std::vector<std::tuple<std::string, long, long>> expect = {
        {"theta1", 7, 64},    {"theta2", 8, 63},    {"theta3", 64, 64},   {"theta4_0", 128, 64},
        {"theta4_1", 128, 64}, {"theta4_2", 128, 64}, {"theta5_0", 128, 64}, {"theta5_1", 128, 64},
        {"theta5_2", 128, 64}, {"theta6", 64, 64},   {"theta7", 128, 1}};
    ASSERT_EQ(blocks.size(), expect.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        EXPECT_EQ(blocks[i].name, std::get<0>(expect[i]));
        EXPECT_EQ(blocks[i].rows, std::get<1>(expect[i]));
        EXPECT_EQ(blocks[i].cols, std::get<2>(expect[i]));
        EXPECT_EQ(blocks[i].values.size(), static_cast<std::size_t>(blocks[i].rows * blocks[i].cols));
        total += blocks[i].values.size();
    }
    EXPECT_EQ(p.parameter_count(), total);
    EXPECT_TRUE(p.all_finite());
}

TEST(QNetParams, InitBoundsAndDeterminism) {
    const QNetDims d{7, 16, 2};
    QNetParams a = init_params(d, 5), b = init_params(d, 5), c = init_params(d, 6);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    for (const auto &blk : a.blocks()) {
        const double fan_out = blk.cols == 1 ? 1.0 : static_cast<double>(blk.cols);
        const double bound = std::sqrt(6.0 / (static_cast<double>(blk.rows) + fan_out));
        double lo = 1e9, hi = -1e9;
        for (double v : blk.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        EXPECT_GE(lo, -bound) << blk.name;
        EXPECT_LE(hi, bound) << blk.name;
        // Spread over most of the range, not a constant.
        if (blk.values.size() > 100) EXPECT_GT(hi - lo, bound) << blk.name;
    }
}

TEST(QNetParams, ZerosGiveZeroQ) {
    std::mt19937_64 rng(3);
    Graph g = oracle::random_signed_graph(9, 0.5, rng);
    QNetParams p = QNetParams::zeros({});
    Vector q = forward(p, g, random_obs(9, 7, rng));
    ASSERT_EQ(q.size(), 9);
    for (Eigen::Index i = 0; i < q.size(); ++i) EXPECT_EQ(q[i], 0.0);
}

TEST(Forward, MatchesScalarTranscription) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t nv = 2 + rng() % 12;
        Graph g = oracle::random_signed_graph(nv, 0.4, rng);
        QNetParams p = init_params({7, 12, static_cast<std::size_t>(1 + trial % 3)}, rng());
        Matrix obs = random_obs(nv, 7, rng);
        Vector q = forward(p, g, obs);
        Vec ref = naive_forward(p, g, obs);
        for (std::size_t v = 0; v < nv; ++v) EXPECT_NEAR(q[v], ref[v], 1e-12 * (1.0 + std::abs(ref[v])));
    }
}

TEST(Forward, SingleIsolatedVertexByHand) {
    // m=1, n=2, K=1: every block is small enough to write out.
    QNetParams p = QNetParams::zeros({1, 2, 1});
    p.theta1 << 0.5, -1.0;          // 1x2
    p.theta2 << 9.0, 9.0;           // 2x1, unused: no neighbours
    p.theta3 << 1.0, 0.0, 0.0, 1.0; // 2x2
    p.theta4[0] = Matrix::Zero(4, 2);
    p.theta4[0](0, 0) = 3.0;        // neighbour mean is zero
    p.theta4[0](2, 1) = 2.0;        // picks xi
    p.theta5[0] = Matrix::Zero(4, 2);
    p.theta5[0](0, 0) = 1.0;
    p.theta5[0](3, 1) = 1.0;
    p.theta6 << 2.0, 0.0, 0.0, -1.0;
    p.theta7 << 1.0, 1.0, 0.5, 0.25;
    Graph g = Graph::from_edges(1, std::span<const Edge>{});
    Matrix obs(1, 1);
    obs << 2.0;
    // mu0 = relu([1, -2]) = [1, 0]
    // xi  = relu([0, |N|=0] * theta3) = [0, 0]
    // msg = relu([0, 0, 0, 0] * theta4) = [0, 0]
    // mu1 = relu([1, 0, 0, 0] * theta5) = [1, 0]
    // pool = relu([1, 0] * theta6) = [2, 0]
    // Q = [2, 0].[1, 1] + [1, 0].[0.5, 0.25] = 2.5
    Vector q = forward(p, g, obs);
    ASSERT_EQ(q.size(), 1);
    EXPECT_DOUBLE_EQ(q[0], 2.5);

    obs << -1.0;
    // mu0 = relu([-0.5, 1]) = [0, 1]; mu1 = relu([0, 1, 0, 0] * theta5) = [0, 0]; Q = 0
    EXPECT_DOUBLE_EQ(forward(p, g, obs)[0], 0.0);
}

TEST(Forward, IsolatedVerticesUseZeroMeans) {
    std::mt19937_64 rng(2);
    const Edge e{0, 1, -1.0};
    Graph g = Graph::from_edges(5, std::span(&e, 1));
    QNetParams p = init_params({7, 8, 2}, 4);
    Matrix obs = random_obs(5, 7, rng);
    Vector q = forward(p, g, obs);
    Vec ref = naive_forward(p, g, obs);
    for (std::size_t v = 0; v < 5; ++v) {
        EXPECT_TRUE(std::isfinite(q[v]));
        EXPECT_NEAR(q[v], ref[v], 1e-12 * (1.0 + std::abs(ref[v])));
    }
}

TEST(Forward, ObservationShapeMismatch) {
    std::mt19937_64 rng(1);
    Graph g = oracle::random_signed_graph(4, 0.5, rng);
    QNetParams p = init_params({}, 0);
    EXPECT_THROW(forward(p, g, Matrix::Zero(3, 7)), DataError);
    EXPECT_THROW(forward(p, g, Matrix::Zero(4, 6)), DataError);
}

TEST(Forward, PermutationEquivariance) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t nv = 3 + rng() % 20;
        Graph g = oracle::random_signed_graph(nv, 0.3, rng);
        QNetParams p = init_params({}, rng());
        Matrix obs = random_obs(nv, 7, rng);

        std::vector<Vertex> pi(nv);
        std::iota(pi.begin(), pi.end(), 0);
        std::shuffle(pi.begin(), pi.end(), rng);
        std::vector<Edge> pe;
        for (const auto &ed : g.edges()) pe.push_back({pi[ed.u], pi[ed.v], ed.weight});
        Graph pg = Graph::from_edges(nv, pe);
        Matrix pobs(nv, 7);
        for (std::size_t v = 0; v < nv; ++v) pobs.row(pi[v]) = obs.row(v);

        Vector q = forward(p, g, obs), pq = forward(p, pg, pobs);
        for (std::size_t v = 0; v < nv; ++v) EXPECT_LE(rel_err(q[v], pq[pi[v]]), 1e-6);
    }
}

TEST(Forward, BitwiseDeterministic) {
    std::mt19937_64 rng(8);
    Graph g = oracle::random_signed_graph(15, 0.4, rng);
    QNetParams p = init_params({}, 3);
    Matrix obs = random_obs(15, 7, rng);
    Vector a = forward(p, g, obs);
    ForwardCache cache;
    forward(p, g, obs, cache);
    Vector b = forward(p, g, obs, cache);
    for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(Forward, TwoComponentsInteractOnlyThroughPooling) {
    std::mt19937_64 rng(21);
    std::vector<Edge> edges = {{0, 1, 1}, {1, 2, -1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, -1}};
    Graph g = Graph::from_edges(6, edges);
    QNetParams p = init_params({}, 9);
    Matrix obs = random_obs(6, 7, rng);
    Matrix obs2 = obs;
    obs2.row(0) = random_obs(1, 7, rng).row(0);
    obs2.row(2) = random_obs(1, 7, rng).row(0);

    Vector a = forward(p, g, obs), b = forward(p, g, obs2);
    bool moved = false;
    for (int v = 3; v < 6; ++v) moved |= a[v] != b[v];
    EXPECT_TRUE(moved);

    p.theta6.setZero();
    a = forward(p, g, obs);
    b = forward(p, g, obs2);
    for (int v = 3; v < 6; ++v) EXPECT_EQ(a[v], b[v]);
}

TEST(Backward, ZeroErrorGivesZeroGradient) {
    std::mt19937_64 rng(4);
    Graph g = oracle::random_signed_graph(6, 0.6, rng);
    QNetParams p = init_params({}, 1);
    GradientSet gr = backward(p, g, random_obs(6, 7, rng), 2, 0.0);
    for (const auto &b : gr.blocks())
        for (double v : b.values) EXPECT_EQ(v, 0.0);
}

TEST(Backward, MatchesCentralDifferencesOnEveryBlock) {
    std::mt19937_64 rng(31);
    Graph g = oracle::random_signed_graph(6, 0.6, rng);
    // Sparse network so the FD sweep stays quick; shape rules are the same.
    QNetParams p = init_params({7, 10, 2}, 77);
    Matrix obs = random_obs(6, 7, rng);
    const Vertex a = 3;
    const double h = 1e-4;
    GradientSet gr = backward(p, g, obs, a, 1.0);

    auto pb = p.blocks();
    auto gb = gr.blocks();
    std::size_t checked = 0, bad = 0;
    for (std::size_t b = 0; b < pb.size(); ++b) {
        std::size_t block_checked = 0;
        for (std::size_t i = 0; i < pb[b].values.size(); ++i) {
            const double orig = pb[b].values[i];
            pb[b].values[i] = orig + h;
            const double up = forward(p, g, obs)[a];
            pb[b].values[i] = orig - h;
            const double dn = forward(p, g, obs)[a];
            pb[b].values[i] = orig;
            const double fd = (up - dn) / (2 * h);
            const double an = gb[b].values[i];
            if (std::abs(an) <= 1e-8 && std::abs(fd) <= 1e-8) continue;
            ++checked;
            ++block_checked;
            if (rel_err(fd, an) > 1e-4) {
                ++bad;
                ADD_FAILURE() << pb[b].name << "[" << i << "] fd=" << fd << " analytic=" << an;
            }
        }
        EXPECT_GT(block_checked, 0u) << pb[b].name;
    }
    EXPECT_EQ(bad, 0u);
    EXPECT_GT(checked, 100u);
}

TEST(Backward, AccumulatesScaledByError) {
    std::mt19937_64 rng(5);
    Graph g = oracle::random_signed_graph(7, 0.5, rng);
    QNetParams p = init_params({7, 8, 2}, 2);
    Matrix obs = random_obs(7, 7, rng);
    GradientSet one = backward(p, g, obs, 1, 1.0);
    GradientSet acc = QNetParams::zeros(p.dims);
    ForwardCache c;
    forward(p, g, obs, c);
    backward(p, g, c, 1, 0.5, acc);
    backward(p, g, c, 1, -2.0, acc);
    auto ob = one.blocks();
    auto ab = acc.blocks();
    for (std::size_t b = 0; b < ob.size(); ++b)
        for (std::size_t i = 0; i < ob[b].values.size(); ++i)
            EXPECT_NEAR(ab[b].values[i], -1.5 * ob[b].values[i], 1e-12);
}

TEST(Backward, OtherComponentOnlyReachedThroughPooling) {
    // Action vertex in component {0,1,2}; the readout and message blocks see
    // vertices 3..5 only via the pooled mean, so with theta6 zeroed the
    // per-edge encoder gradient must not change when component B's features do.
    std::vector<Edge> edges = {{0, 1, 1}, {1, 2, -1}, {3, 4, 1}, {4, 5, -1}};
    Graph g = Graph::from_edges(6, edges);
    std::mt19937_64 rng(6);
    QNetParams p = init_params({7, 8, 2}, 12);
    p.theta6.setZero();
    Matrix obs = random_obs(6, 7, rng), obs2 = obs;
    for (int v = 3; v < 6; ++v) obs2.row(v) = random_obs(1, 7, rng).row(0);
    GradientSet a = backward(p, g, obs, 0, 1.0), b = backward(p, g, obs2, 0, 1.0);
    auto ab = a.blocks(), bb = b.blocks();
    for (std::size_t k = 0; k + 2 < ab.size(); ++k) // all but theta6/theta7 (pooled terms)
        for (std::size_t i = 0; i < ab[k].values.size(); ++i)
            EXPECT_EQ(ab[k].values[i], bb[k].values[i]) << ab[k].name;
}

TEST(GreedyAction, Examples) {
    const std::vector<std::uint8_t> all3(3, 1), all2(2, 1);
    EXPECT_EQ(greedy_action(std::vector<double>{0.1, 0.9, 0.3}, all3), 1u);
    EXPECT_EQ(greedy_action(std::vector<double>{0.5, 0.5}, all2), 0u);
    EXPECT_EQ(greedy_action(std::vector<double>{0.9, 0.1}, std::vector<std::uint8_t>{0, 1}), 1u);
    EXPECT_EQ(greedy_action(std::vector<double>{-3, -1, -1}, all3), 1u);
}

TEST(GreedyAction, EmptyMaskRejected) {
    EXPECT_THROW(greedy_action(std::vector<double>{1.0, 2.0}, std::vector<std::uint8_t>{0, 0}), DataError);
    EXPECT_THROW(greedy_action(std::vector<double>{1.0, 2.0}, std::vector<std::uint8_t>{1}), DataError);
}
