#ifndef ECODQN_QNET_HPP
#define ECODQN_QNET_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ecodqn/environment.hpp"
#include "ecodqn/graph.hpp"
#include "ecodqn/linalg.hpp"

namespace ecodqn {

struct QNetDims {
    std::size_t obs_width = kObservationWidth; // m
    std::size_t embedding = 64;                // n
    std::size_t rounds = 3;                    // K

    friend bool operator==(const QNetDims &, const QNetDims &) = default;
};

/**
 * Parameters of the message-passing Q-network.
 *
 * Shapes follow row-vector convention (activations are rows, so a layer is
 * `input * theta`):
 *   theta1  m x n          initial embedding
 *   theta2  (m+1) x (n-1)  per-edge [w_uv, x_u] encoder
 *   theta3  n x n          edge-summary embedding xi_v
 *   theta4  K of 2n x n    message from [neighbour mean, xi_v]
 *   theta5  K of 2n x n    update from [mu_v, message]
 *   theta6  n x n          graph-level pooling
 *   theta7  2n             readout over [pooled, mu_v]
 */
struct QNetParams {
    QNetDims dims;
    Matrix theta1;
    Matrix theta2;
    Matrix theta3;
    std::vector<Matrix> theta4;
    std::vector<Matrix> theta5;
    Matrix theta6;
    Vector theta7;

    /// Zero-filled parameters of the given shape.
    static QNetParams zeros(const QNetDims &dims);

    struct Block {
        std::string name;
        std::span<double> values;
        Eigen::Index rows;
        Eigen::Index cols;
    };
    struct ConstBlock {
        std::string name;
        std::span<const double> values;
        Eigen::Index rows;
        Eigen::Index cols;
    };

    /// Named views in a fixed order: theta1, theta2, theta3, theta4_k, theta5_k, theta6, theta7.
    std::vector<Block> blocks();
    std::vector<ConstBlock> blocks() const;

    std::size_t parameter_count() const;
    bool all_finite() const;

    friend bool operator==(const QNetParams &a, const QNetParams &b);
};

/// Same shape as the parameters; accumulates dQ/dtheta contributions.
using GradientSet = QNetParams;

/// Uniform(+-sqrt(6 / (fan_in + fan_out))) per block, deterministic per seed.
QNetParams init_params(const QNetDims &dims, std::uint64_t seed);

/// Activations kept by forward() for the reverse pass.
struct ForwardCache {
    Matrix obs;
    Matrix h0_pre, edge_in, edge_pre, xi_in, xi_pre, xi;
    std::vector<Matrix> mu;      // K + 1 entries, mu[0] is the initial embedding
    std::vector<Matrix> msg_in;  // [neighbour mean, xi]
    std::vector<Matrix> msg_pre;
    std::vector<Matrix> upd_in;  // [mu_k, message]
    std::vector<Matrix> upd_pre;
    RowVector pooled;            // mean of final embeddings
    RowVector pool_pre;
    RowVector pool_act;
    Vector q;
};

/// Per-vertex Q-values for the given state.
Vector forward(const QNetParams &p, const Graph &g, const ObservationMatrix &obs);
const Vector &forward(const QNetParams &p, const Graph &g, const ObservationMatrix &obs, ForwardCache &cache);

/// Adds dq * dQ_action / dtheta into grad, reusing the cache of a forward() call
/// on the same inputs. relu'(0) is taken as 0.
void backward(const QNetParams &p, const Graph &g, const ForwardCache &cache, Vertex action, double dq,
              GradientSet &grad);

/// Convenience form: runs the forward pass and returns a fresh gradient.
GradientSet backward(const QNetParams &p, const Graph &g, const ObservationMatrix &obs, Vertex action, double dq);

/// Argmax over allowed vertices (mask value nonzero); ties go to the lowest index.
Vertex greedy_action(std::span<const double> q, std::span<const std::uint8_t> allowed);
Vertex greedy_action(const Vector &q, std::span<const std::uint8_t> allowed);

} // namespace ecodqn

#endif // ECODQN_QNET_HPP
