#include "ecodqn/qnet.hpp"

#include <cmath>
#include <limits>

#include "ecodqn/error.hpp"
#include "ecodqn/rng.hpp"

namespace ecodqn {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t x) {
    return static_cast<Index>(x);
}

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived> &x) {
    return x.cwiseMax(0.0);
}

// Zeroes entries of `grad` whose pre-activation was not strictly positive.
template <typename G, typename P>
void relu_backward(Eigen::MatrixBase<G> &grad, const Eigen::MatrixBase<P> &pre) {
    grad = (pre.array() > 0.0).select(grad, 0.0);
}

void fill_uniform(std::span<double> values, double limit, Rng &rng) {
    for (double &x : values) x = (2.0 * uniform01(rng) - 1.0) * limit;
}

} // namespace

QNetParams QNetParams::zeros(const QNetDims &dims) {
    if (dims.obs_width < 1 || dims.embedding < 2 || dims.rounds < 1)
        throw ConfigError("network dims need m >= 1, n >= 2, K >= 1");
    const Index m = idx(dims.obs_width), n = idx(dims.embedding);
    QNetParams p;
    p.dims = dims;
    p.theta1 = Matrix::Zero(m, n);
    p.theta2 = Matrix::Zero(m + 1, n - 1);
    p.theta3 = Matrix::Zero(n, n);
    p.theta4.assign(dims.rounds, Matrix::Zero(2 * n, n));
    p.theta5.assign(dims.rounds, Matrix::Zero(2 * n, n));
    p.theta6 = Matrix::Zero(n, n);
    p.theta7 = Vector::Zero(2 * n);
    return p;
}

std::vector<QNetParams::Block> QNetParams::blocks() {
    std::vector<Block> out;
    auto add = [&out](std::string name, auto &m) {
        out.push_back({std::move(name), {m.data(), static_cast<std::size_t>(m.size())}, m.rows(), m.cols()});
    };
    add("theta1", theta1);
    add("theta2", theta2);
    add("theta3", theta3);
    for (std::size_t k = 0; k < theta4.size(); ++k) add("theta4_" + std::to_string(k), theta4[k]);
    for (std::size_t k = 0; k < theta5.size(); ++k) add("theta5_" + std::to_string(k), theta5[k]);
    add("theta6", theta6);
    add("theta7", theta7);
    return out;
}

std::vector<QNetParams::ConstBlock> QNetParams::blocks() const {
    std::vector<ConstBlock> out;
    for (auto &b : const_cast<QNetParams *>(this)->blocks())
        out.push_back({std::move(b.name), {b.values.data(), b.values.size()}, b.rows, b.cols});
    return out;
}

std::size_t QNetParams::parameter_count() const {
    std::size_t total = 0;
    for (const auto &b : blocks()) total += b.values.size();
    return total;
}

bool QNetParams::all_finite() const {
    for (const auto &b : blocks())
        for (double x : b.values)
            if (!std::isfinite(x)) return false;
    return true;
}

bool operator==(const QNetParams &a, const QNetParams &b) {
    if (!(a.dims == b.dims)) return false;
    auto ba = a.blocks();
    auto bb = b.blocks();
    if (ba.size() != bb.size()) return false;
    for (std::size_t i = 0; i < ba.size(); ++i) {
        if (ba[i].rows != bb[i].rows || ba[i].cols != bb[i].cols) return false;
        if (!std::equal(ba[i].values.begin(), ba[i].values.end(), bb[i].values.begin())) return false;
    }
    return true;
}

QNetParams init_params(const QNetDims &dims, std::uint64_t seed) {
    QNetParams p = QNetParams::zeros(dims);
    Rng rng(seed);
    for (auto &b : p.blocks()) {
        // theta7 is a readout vector: fan_in 2n, fan_out 1.
        const bool vector = b.cols == 1;
        const auto fan_in = static_cast<double>(b.rows);
        const auto fan_out = vector ? 1.0 : static_cast<double>(b.cols);
        fill_uniform(b.values, std::sqrt(6.0 / (fan_in + fan_out)), rng);
    }
    return p;
}

const Vector &forward(const QNetParams &p, const Graph &g, const ObservationMatrix &obs, ForwardCache &c) {
    const std::size_t nv = g.num_vertices();
    const Index m = idx(p.dims.obs_width), n = idx(p.dims.embedding);
    const std::size_t K = p.dims.rounds;
    if (obs.rows() != idx(nv) || obs.cols() != m)
        throw DataError("observation shape " + std::to_string(obs.rows()) + "x" + std::to_string(obs.cols()) +
                        " does not match graph/network");

    c.obs = obs;
    c.h0_pre.noalias() = obs * p.theta1;

    // Per directed edge (v <- u), rows in adjacency order: [w_uv, x_u].
    const std::size_t num_slots = 2 * g.num_edges();
    c.edge_in.resize(idx(num_slots), m + 1);
    std::size_t slot = 0;
    for (Vertex v = 0; v < nv; ++v) {
        auto nb = g.neighbors(v);
        auto w = g.weights(v);
        for (std::size_t i = 0; i < nb.size(); ++i, ++slot) {
            c.edge_in(idx(slot), 0) = w[i];
            c.edge_in.row(idx(slot)).tail(m) = obs.row(idx(nb[i]));
        }
    }
    c.edge_pre.noalias() = c.edge_in * p.theta2;

    c.xi_in.setZero(idx(nv), n);
    slot = 0;
    for (Vertex v = 0; v < nv; ++v) {
        const std::size_t deg = g.degree(v);
        auto acc = c.xi_in.row(idx(v)).head(n - 1);
        for (std::size_t i = 0; i < deg; ++i, ++slot) acc += relu(c.edge_pre.row(idx(slot)));
        if (deg > 0) acc /= static_cast<double>(deg);
        c.xi_in(idx(v), n - 1) = static_cast<double>(deg);
    }
    c.xi_pre.noalias() = c.xi_in * p.theta3;
    c.xi = relu(c.xi_pre);

    c.mu.resize(K + 1);
    c.msg_in.resize(K);
    c.msg_pre.resize(K);
    c.upd_in.resize(K);
    c.upd_pre.resize(K);
    c.mu[0] = relu(c.h0_pre);
    for (std::size_t k = 0; k < K; ++k) {
        const Matrix &mu = c.mu[k];
        Matrix &min = c.msg_in[k];
        min.setZero(idx(nv), 2 * n);
        for (Vertex v = 0; v < nv; ++v) {
            auto nb = g.neighbors(v);
            auto w = g.weights(v);
            auto acc = min.row(idx(v)).head(n);
            for (std::size_t i = 0; i < nb.size(); ++i) acc += w[i] * mu.row(idx(nb[i]));
            if (!nb.empty()) acc /= static_cast<double>(nb.size());
        }
        min.rightCols(n) = c.xi;
        c.msg_pre[k].noalias() = min * p.theta4[k];

        Matrix &uin = c.upd_in[k];
        uin.resize(idx(nv), 2 * n);
        uin.leftCols(n) = mu;
        uin.rightCols(n) = relu(c.msg_pre[k]);
        c.upd_pre[k].noalias() = uin * p.theta5[k];
        c.mu[k + 1] = relu(c.upd_pre[k]);
    }

    const Matrix &final_mu = c.mu[K];
    c.pooled = final_mu.colwise().sum() / static_cast<double>(nv);
    c.pool_pre.noalias() = c.pooled * p.theta6;
    c.pool_act = relu(c.pool_pre);
    const double global = c.pool_act.dot(p.theta7.head(n));
    c.q.noalias() = final_mu * p.theta7.tail(n);
    c.q.array() += global;
    return c.q;
}

Vector forward(const QNetParams &p, const Graph &g, const ObservationMatrix &obs) {
    ForwardCache cache;
    forward(p, g, obs, cache);
    return std::move(cache.q);
}

void backward(const QNetParams &p, const Graph &g, const ForwardCache &c, Vertex action, double dq,
              GradientSet &grad) {
    const std::size_t nv = g.num_vertices();
    const Index n = idx(p.dims.embedding);
    const std::size_t K = p.dims.rounds;
    if (action >= nv) throw DataError("backward: action vertex out of range");
    if (c.mu.size() != K + 1 || c.q.size() != idx(nv)) throw DataError("backward: cache does not match inputs");
    if (!(grad.dims == p.dims)) throw DataError("backward: gradient shape mismatch");
    if (dq == 0.0) return;

    // Readout.
    grad.theta7.head(n) += dq * c.pool_act.transpose();
    grad.theta7.tail(n) += dq * c.mu[K].row(idx(action)).transpose();
    RowVector d_pool = dq * p.theta7.head(n).transpose();
    relu_backward(d_pool, c.pool_pre);
    grad.theta6.noalias() += c.pooled.transpose() * d_pool;
    const RowVector d_mean = d_pool * p.theta6.transpose();

    Matrix d_mu = d_mean.replicate(idx(nv), 1) / static_cast<double>(nv);
    d_mu.row(idx(action)) += dq * p.theta7.tail(n).transpose();

    Matrix d_xi = Matrix::Zero(idx(nv), n);
    Matrix d_upd, d_uin, d_msg, d_min;
    for (std::size_t r = K; r-- > 0;) {
        d_upd = d_mu;
        relu_backward(d_upd, c.upd_pre[r]);
        grad.theta5[r].noalias() += c.upd_in[r].transpose() * d_upd;
        d_uin.noalias() = d_upd * p.theta5[r].transpose();

        d_msg = d_uin.rightCols(n);
        relu_backward(d_msg, c.msg_pre[r]);
        grad.theta4[r].noalias() += c.msg_in[r].transpose() * d_msg;
        d_min.noalias() = d_msg * p.theta4[r].transpose();
        d_xi += d_min.rightCols(n);

        d_mu = d_uin.leftCols(n);
        // Neighbour mean: mean_v = sum_u w_uv mu_u / deg(v).
        for (Vertex v = 0; v < nv; ++v) {
            auto nb = g.neighbors(v);
            if (nb.empty()) continue;
            auto w = g.weights(v);
            const double inv = 1.0 / static_cast<double>(nb.size());
            for (std::size_t i = 0; i < nb.size(); ++i)
                d_mu.row(idx(nb[i])) += (w[i] * inv) * d_min.row(idx(v)).head(n);
        }
    }

    // Initial embedding.
    relu_backward(d_mu, c.h0_pre);
    grad.theta1.noalias() += c.obs.transpose() * d_mu;

    // Edge-summary branch.
    relu_backward(d_xi, c.xi_pre);
    grad.theta3.noalias() += c.xi_in.transpose() * d_xi;
    const Matrix d_xi_in = d_xi * p.theta3.transpose();
    Matrix d_edge(c.edge_pre.rows(), c.edge_pre.cols());
    std::size_t slot = 0;
    for (Vertex v = 0; v < nv; ++v) {
        const std::size_t deg = g.degree(v);
        if (deg == 0) continue;
        const double inv = 1.0 / static_cast<double>(deg);
        for (std::size_t i = 0; i < deg; ++i, ++slot) d_edge.row(idx(slot)) = inv * d_xi_in.row(idx(v)).head(n - 1);
    }
    relu_backward(d_edge, c.edge_pre);
    grad.theta2.noalias() += c.edge_in.transpose() * d_edge;
}

GradientSet backward(const QNetParams &p, const Graph &g, const ObservationMatrix &obs, Vertex action, double dq) {
    ForwardCache cache;
    forward(p, g, obs, cache);
    GradientSet grad = QNetParams::zeros(p.dims);
    backward(p, g, cache, action, dq, grad);
    return grad;
}

Vertex greedy_action(std::span<const double> q, std::span<const std::uint8_t> allowed) {
    if (q.size() != allowed.size()) throw DataError("greedy_action: mask length mismatch");
    Vertex best = 0;
    double best_q = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t v = 0; v < q.size(); ++v) {
        if (!allowed[v]) continue;
        if (!any || q[v] > best_q) {
            best = static_cast<Vertex>(v);
            best_q = q[v];
            any = true;
        }
    }
    if (!any) throw DataError("greedy_action: no allowed vertex");
    return best;
}

Vertex greedy_action(const Vector &q, std::span<const std::uint8_t> allowed) {
    return greedy_action(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), allowed);
}

} // namespace ecodqn
