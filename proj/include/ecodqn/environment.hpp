#ifndef ECODQN_ENVIRONMENT_HPP
#define ECODQN_ENVIRONMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <unordered_map>
#include <vector>

#include "ecodqn/graph.hpp"
#include "ecodqn/linalg.hpp"

namespace ecodqn {

/// Number of per-vertex observation features.
inline constexpr std::size_t kObservationWidth = 7;

/// |V| x 7. Columns: in-S flag, gain/|V|, flip age/T, (best - current)/|V|,
/// hamming(S, S*)/|V|, fraction of improving vertices, steps remaining/T.
using ObservationMatrix = Matrix;

struct EnvConfig {
    bool reversible = true;
    double episode_length_multiplier = 2.0;
    bool intrinsic_rewards = true;
    bool observation_tuning = true;
    double gamma = 0.95;

    /// Full exploratory agent.
    static EnvConfig eco();
    /// Irreversible, untuned, no intrinsic reward, gamma = 1.
    static EnvConfig s2v();

    /// Throws ConfigError on an inconsistent combination.
    void validate() const;

    friend bool operator==(const EnvConfig &, const EnvConfig &) = default;
};

struct StepResult {
    double reward = 0.0;
    double extrinsic = 0.0;
    double intrinsic = 0.0;
    /// max(cut - best, 0) before normalisation, in cut units.
    double improvement = 0.0;
    /// Gain of the chosen vertex before it was flipped.
    double gain = 0.0;
    bool done = false;
    bool locally_optimal = false;
    bool revisited = false;
};

/// One line of an episode trace.
struct TraceRecord {
    std::size_t step = 0;
    Vertex action = 0;
    double reward = 0.0;
    double cut = 0.0;
    double best_cut = 0.0;
    bool locally_optimal = false;
    bool revisited = false;
};

void write_trace_jsonl(std::ostream &out, const std::vector<TraceRecord> &trace);
std::vector<TraceRecord> read_trace_jsonl(std::istream &in);

/**
 * Max-Cut episode over a shared immutable graph.
 *
 * Reward for a step is max(C(s_t) - C(s*), 0)/|V| measured against the best
 * cut seen before the step, plus 1/|V| the first time each locally optimal
 * state is entered (when intrinsic rewards are on). Without observation
 * tuning the reward is the plain normalised cut change.
 */
class Environment {
public:
    Environment(std::shared_ptr<const Graph> graph, EnvConfig cfg);

    /// Reversible: each vertex joins S with probability 1/2. Irreversible: S empty.
    void reset(std::uint64_t seed);
    /// Starts from a caller-chosen solution set (reversible configs only).
    void reset_to(const Membership &initial);

    StepResult step(Vertex v);

    ObservationMatrix observe() const;
    void observe_into(ObservationMatrix &out) const;

    bool is_locally_optimal() const;
    bool is_allowed(Vertex v) const;
    /// 1 where the vertex may be selected.
    std::vector<std::uint8_t> allowed_mask() const;

    const Graph &graph() const noexcept { return *graph_; }
    const std::shared_ptr<const Graph> &graph_ptr() const noexcept { return graph_; }
    const EnvConfig &config() const noexcept { return cfg_; }
    const Membership &membership() const noexcept { return membership_; }
    const GainVector &gains() const noexcept { return gains_; }
    std::size_t t() const noexcept { return t_; }
    std::size_t horizon() const noexcept { return horizon_; }
    bool done() const noexcept { return t_ >= horizon_; }
    double current_cut() const noexcept { return current_cut_; }
    double initial_cut() const noexcept { return initial_cut_; }
    double best_cut() const noexcept { return best_cut_; }
    const Membership &best_membership() const noexcept { return best_membership_; }
    /// Step at which v last flipped; 0 for never.
    std::size_t last_flip_step(Vertex v) const noexcept { return last_flip_[v]; }
    bool flipped_before(Vertex v) const noexcept { return flipped_[v] != 0; }
    std::size_t distinct_local_optima() const noexcept { return local_optima_.size(); }

private:
    // Fingerprint buckets with full-membership comparison inside each bucket.
    class StateSet {
    public:
        /// Inserts s; returns false if it was already present.
        bool insert(const Membership &s);
        bool contains(const Membership &s) const;
        std::size_t size() const noexcept { return size_; }
        void clear();

    private:
        std::unordered_map<std::uint64_t, std::vector<Membership>> buckets_;
        std::size_t size_ = 0;
    };

    void start_episode();

    std::shared_ptr<const Graph> graph_;
    EnvConfig cfg_;
    std::size_t horizon_ = 0;
    Membership membership_;
    GainVector gains_;
    std::size_t t_ = 0;
    double current_cut_ = 0.0;
    double initial_cut_ = 0.0;
    double best_cut_ = 0.0;
    Membership best_membership_;
    std::vector<std::size_t> last_flip_;
    std::vector<std::uint8_t> flipped_;
    StateSet local_optima_;
    StateSet visited_;
};

} // namespace ecodqn

#endif // ECODQN_ENVIRONMENT_HPP
