#ifndef ECODQN_TRAINING_HPP
#define ECODQN_TRAINING_HPP

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecodqn/environment.hpp"
#include "ecodqn/graph.hpp"
#include "ecodqn/qnet.hpp"
#include "ecodqn/rng.hpp"

namespace ecodqn {

enum class OptimizerKind { Adam, SGD };

/**
 * Everything that determines a training run. Serialized as flat `key = value`
 * text; unknown keys are rejected and `total_steps`, `graph_vertices` and
 * `seed` must be present.
 */
struct TrainConfig {
    EnvConfig env;
    GraphSpec graphs;
    QNetDims dims;

    std::size_t total_steps = 0;
    std::size_t minibatch_size = 64;
    std::size_t update_every = 32;
    double learning_rate = 1e-4;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double huber_delta = 1.0;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_decay_fraction = 0.1;
    std::size_t target_sync_period = 1000;
    std::size_t replay_capacity = 5000;
    std::size_t holdout_size = 50;
    /// Environment steps between holdout evaluations; 0 disables them.
    std::size_t eval_period = 5000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    void validate() const;

    std::map<std::string, std::string> to_key_values() const;
    static TrainConfig from_key_values(const std::map<std::string, std::string> &kv);

    std::string to_text() const;
    static TrainConfig parse(const std::string &text);
    static TrainConfig load(const std::string &path);

    /// Irreversible agents clip bootstrapped target values at zero.
    bool clip_targets() const noexcept { return !env.reversible; }
};

/// Exploration rate: linear from start to end over the first decay fraction of training.
double epsilon_at(const TrainConfig &cfg, std::size_t step);

struct Transition {
    std::shared_ptr<const Graph> graph;
    std::uint64_t episode = 0; // regenerates `graph` when restoring a checkpoint
    ObservationMatrix obs;
    std::vector<std::uint8_t> allowed;
    Vertex action = 0;
    double reward = 0.0;
    ObservationMatrix next_obs;
    std::vector<std::uint8_t> next_allowed;
    bool done = false;
};

/// Bounded FIFO; the oldest transition is evicted once full.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }

    /// i = 0 is the oldest retained transition.
    const Transition &at(std::size_t i) const;

    /// `count` distinct indices drawn uniformly.
    std::vector<std::size_t> sample(std::size_t count, Rng &rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0; // slot of the oldest element once full
    std::vector<Transition> items_;
};

/// reward if done; otherwise reward + gamma * max over allowed next actions of the
/// target network's Q, that maximum floored at zero when `clip_nonneg`.
double td_target(const QNetParams &target, const Transition &tr, double gamma, bool clip_nonneg);

struct CurvePoint {
    std::size_t env_steps = 0;
    std::size_t grad_updates = 0;
    double holdout_mean_cut = 0.0;
    double holdout_mean_approx_ratio = 0.0;
    double epsilon = 0.0;
    double wall_time_s = 0.0;

    friend bool operator==(const CurvePoint &, const CurvePoint &) = default;
};

void write_curve_csv(std::ostream &out, const std::vector<CurvePoint> &curve);
std::vector<CurvePoint> read_curve_csv(std::istream &in);

struct AdamState {
    QNetParams m;
    QNetParams v;
    std::uint64_t t = 0;
};

/// Optimizer and loop state needed to resume a run bit-for-bit.
struct TrainState {
    TrainConfig config;
    QNetParams target;
    AdamState adam;
    std::size_t env_steps = 0;
    std::size_t grad_updates = 0;
    std::uint64_t episode = 0;
    /// Actions already taken in the unfinished episode `episode`.
    std::vector<Vertex> episode_actions;
    std::string explore_rng;
    std::string replay_rng;
    std::vector<CurvePoint> curve;
    std::vector<Transition> replay; // oldest first
    double wall_time_s = 0.0;
};

/// The artefact written by training and read by evaluation.
struct Checkpoint {
    QNetParams params;
    EnvConfig env;
    std::optional<TrainState> state;
};

std::string encode_checkpoint(const Checkpoint &c);
Checkpoint decode_checkpoint(const std::string &bytes);
void save_checkpoint(const Checkpoint &c, const std::string &path);
Checkpoint load_checkpoint(const std::string &path);
/// Loads and verifies the network dims match `expected` (ConfigError otherwise).
Checkpoint load_checkpoint(const std::string &path, const QNetDims &expected);

/// Holdout instances and their reference cuts (exact when small enough,
/// otherwise best of the greedy baselines).
struct Holdout {
    std::vector<std::shared_ptr<const Graph>> graphs;
    std::vector<double> reference;
};

Holdout make_holdout(const TrainConfig &cfg);

/**
 * Q-learning driver: epsilon-greedy acting on freshly sampled graphs, a replay
 * buffer, one minibatch update every `update_every` actions, a hard-synced
 * target network and periodic greedy evaluation on a fixed holdout set.
 */
class Trainer {
public:
    explicit Trainer(TrainConfig cfg);
    /// Continues from a checkpoint that carries a training state.
    explicit Trainer(const Checkpoint &resume);

    /// Advances until `env_steps` reaches min(limit, total_steps).
    void run_until(std::size_t limit);
    void run() { run_until(config_.total_steps); }

    bool finished() const noexcept { return env_steps_ >= config_.total_steps; }
    std::size_t env_steps() const noexcept { return env_steps_; }
    std::size_t grad_updates() const noexcept { return grad_updates_; }
    const QNetParams &params() const noexcept { return params_; }
    const std::vector<CurvePoint> &curve() const noexcept { return curve_; }
    const TrainConfig &config() const noexcept { return config_; }
    const ReplayBuffer &replay() const noexcept { return replay_; }
    const Holdout &holdout() const noexcept { return holdout_; }

    Checkpoint checkpoint() const;

    /// Mean greedy best cut and approximation ratio on the holdout set.
    std::pair<double, double> evaluate_holdout() const;

    /// Loss of the most recent update (NaN before the first).
    double last_loss() const noexcept { return last_loss_; }

private:
    void begin_episode();
    void act();
    void update();

    TrainConfig config_;
    QNetParams params_;
    QNetParams target_;
    AdamState adam_;
    ReplayBuffer replay_;
    Rng explore_rng_;
    Rng replay_rng_;
    Holdout holdout_;
    std::vector<CurvePoint> curve_;
    std::size_t env_steps_ = 0;
    std::size_t grad_updates_ = 0;
    std::uint64_t episode_ = 0;
    std::vector<Vertex> episode_actions_;
    std::unique_ptr<Environment> env_;
    double last_loss_;
    double prior_wall_time_ = 0.0;
    std::chrono::steady_clock::time_point started_;

    // Scratch reused across steps.
    ForwardCache cache_;
    ForwardCache target_cache_;
    GradientSet grad_;
    ObservationMatrix obs_;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<CurvePoint> curve;
};

TrainResult train(const TrainConfig &cfg);

} // namespace ecodqn

#endif // ECODQN_TRAINING_HPP
