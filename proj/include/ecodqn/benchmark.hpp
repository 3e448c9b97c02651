#ifndef ECODQN_BENCHMARK_HPP
#define ECODQN_BENCHMARK_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecodqn/environment.hpp"
#include "ecodqn/graph.hpp"
#include "ecodqn/qnet.hpp"
#include "ecodqn/training.hpp"

namespace ecodqn {

/// cut / reference; DataError when reference <= 0.
double approximation_ratio(double cut, double reference);

/// Inclusive linear-interpolation quantile of unsorted values, q in [0, 1].
double quantile(std::vector<double> values, double q);

// ---------------------------------------------------------------------------
// Graph corpora: a directory of graph files plus `index.tsv`.

struct CorpusEntry {
    std::string id;
    std::string path;
    std::shared_ptr<const Graph> graph;
};

inline constexpr const char *kCorpusIndexName = "index.tsv";

/// Writes graph_0000.txt ... and the index. Returns the written entries.
std::vector<CorpusEntry> write_corpus(const std::string &dir, const GraphSpec &spec, std::size_t count,
                                      std::uint64_t seed);

/// Reads a corpus directory (through its index) or a single graph file.
std::vector<CorpusEntry> read_corpus(const std::string &path);

// ---------------------------------------------------------------------------
// Best-known cuts

struct RegistryEntry {
    std::uint64_t graph_hash = 0;
    double cut = 0.0;
    std::string method;
    std::string membership; // '0'/'1' per vertex
};

/**
 * Append-only JSONL ledger of best-known cuts keyed by graph content hash.
 * Only improvements are appended; the best line per hash wins on load.
 */
class RunRegistry {
public:
    explicit RunRegistry(std::string path);

    std::optional<RegistryEntry> best(std::uint64_t graph_hash) const;
    /// Appends and returns true when `cut` beats the known best (or none exists).
    bool offer(const Graph &g, double cut, const std::string &method, const Membership &membership);

    const std::string &path() const noexcept { return path_; }
    std::size_t size() const noexcept { return best_.size(); }

private:
    std::string path_;
    std::map<std::uint64_t, RegistryEntry> best_;
};

std::string membership_string(const Membership &m);
Membership parse_membership(const std::string &bits);

struct Reference {
    double cut = 0.0;
    bool exact = false;
    std::string method;
};

/// Exact optimum up to the brute-force cap; otherwise the registry's best-known
/// cut, seeded with the greedy baselines when the registry has nothing.
Reference reference_cut(const Graph &g, RunRegistry *registry, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Evaluation

struct EpisodeRun {
    double cut = 0.0;
    Membership membership;
    std::size_t actions = 0;
    double seconds = 0.0;
};

/// Runs one episode of some method on a graph from an episode seed.
using EpisodeRunner = std::function<EpisodeRun(const std::shared_ptr<const Graph> &, std::uint64_t seed)>;

/// Greedy (epsilon = 0) rollouts of a Q-network.
EpisodeRunner agent_runner(const QNetParams &params, const EnvConfig &env);
/// Greedy baselines: "mca-rev" or "mca-irrev".
EpisodeRunner baseline_runner(const std::string &method);

struct GraphEval {
    std::string id;
    std::uint64_t graph_hash = 0;
    std::size_t vertices = 0;
    std::vector<double> episode_cuts;
    double best_cut = 0.0;
    Membership best_membership;
    Reference reference;
    double ratio = 0.0;             // best-of-episodes / reference
    double mean_episode_ratio = 0.0; // single-try expectation
    /// Best-known reference was beaten (ratio > 1).
    bool improved_reference = false;
    std::size_t actions = 0;
    double seconds = 0.0;
};

struct EvalReport {
    std::string agent;
    std::string graph_set;
    std::size_t episodes_per_graph = 0;
    std::vector<GraphEval> graphs;
    double mean_ratio = 0.0;
    double lower_quartile = 0.0;
    double upper_quartile = 0.0;
    double single_try_mean_ratio = 0.0;
    double wall_time_s = 0.0;
    double seconds_per_action = 0.0;
};

struct EvalOptions {
    std::size_t episodes = 50;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string agent = "agent";
    std::string graph_set = "graphs";
};

/// Episode e on graph i is seeded with derive_seed(derive_seed(seed, i), e).
std::uint64_t episode_seed(std::uint64_t seed, std::size_t graph_index, std::size_t episode);

/// References must align with `graphs`.
EvalReport evaluate(const EpisodeRunner &runner, const std::vector<CorpusEntry> &graphs,
                    const std::vector<Reference> &references, const EvalOptions &opts);

/// Checks the architecture against `expected` when given, then evaluates greedily.
EvalReport evaluate_agent(const Checkpoint &checkpoint, const std::vector<CorpusEntry> &graphs,
                          const std::vector<Reference> &references, const EvalOptions &opts,
                          const std::optional<QNetDims> &expected = std::nullopt);

/// One line per episode: graph_id,episode,cut,reference,ratio.
void write_episode_csv(std::ostream &out, const EvalReport &report);
/// One JSON object per graph, including the best membership.
void write_report_jsonl(std::ostream &out, const EvalReport &report);

struct SummaryRow {
    std::string agent;
    std::string graph_set;
    std::size_t graphs = 0;
    std::size_t episodes_per_graph = 0;
    double mean_ratio = 0.0;
    double lower_quartile = 0.0;
    double upper_quartile = 0.0;
    double single_try_mean_ratio = 0.0;
    double wall_time_s = 0.0;
    double seconds_per_action = 0.0;
};

std::vector<SummaryRow> aggregate(const std::vector<EvalReport> &reports);
void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows);

/// Episodes per graph used for the named GSet instance: 50 for G1-G10, 1 for G22-G32.
std::size_t gset_episodes(const std::string &name);

// ---------------------------------------------------------------------------
// Intra-episode behaviour

struct BehaviorStep {
    std::size_t step = 0;
    Vertex action = 0;
    bool repeat = false;
    bool non_greedy = false;
    bool negative = false;
    bool locally_optimal = false;
    bool revisited = false;
    bool mc_found = false;
    double cut = 0.0;
    double best_cut = 0.0;
};

struct BehaviorTrace {
    std::vector<BehaviorStep> steps;
    double best_cut = 0.0;
};

/// Greedy rollout with per-step flags; accepts any environment configuration.
BehaviorTrace trace_episode(const QNetParams &params, const EnvConfig &env, std::shared_ptr<const Graph> g,
                            std::uint64_t seed);

/// Same, restricted to reversible checkpoints (ConfigError otherwise).
BehaviorTrace behavior_trace(const Checkpoint &checkpoint, std::shared_ptr<const Graph> g, std::uint64_t seed);

inline constexpr std::size_t kBehaviorMetricCount = 6;
inline constexpr const char *kBehaviorMetricNames[kBehaviorMetricCount] = {
    "repeat", "non_greedy", "negative", "locally_optimal", "revisited", "mc_found"};

/// Per-step means of the six flags across traces, each smoothed with a
/// trailing moving average of `window` steps. Row t is step t + 1.
struct BehaviorSeries {
    std::vector<std::array<double, kBehaviorMetricCount>> rows;
    std::vector<std::size_t> samples; // traces contributing to each step
};

BehaviorSeries behavior_series(const std::vector<BehaviorTrace> &traces, std::size_t window = 10);
void write_behavior_csv(std::ostream &out, const BehaviorSeries &series);

} // namespace ecodqn

#endif // ECODQN_BENCHMARK_HPP
