#ifndef ECODQN_AGENT_HPP
#define ECODQN_AGENT_HPP

#include <cstdint>
#include <functional>

#include "ecodqn/environment.hpp"
#include "ecodqn/qnet.hpp"

namespace ecodqn {

/// What a policy saw and did at one step, captured before and after the flip.
struct StepInfo {
    std::size_t step = 0; // 1-based index of the action within the episode
    Vertex action = 0;
    double gain = 0.0;             // gain of the chosen vertex before the flip
    double best_allowed_gain = 0.0; // largest gain among allowed vertices before the flip
    bool repeat = false;            // vertex already flipped earlier in the episode
    StepResult result;
    double cut = 0.0;
    double best_cut = 0.0;
};

using StepObserver = std::function<void(const StepInfo &)>;

struct EpisodeOutcome {
    double initial_cut = 0.0;
    double best_cut = 0.0;
    Membership best_membership;
    std::size_t steps = 0;
    double seconds = 0.0;
};

/// Acts greedily with respect to the network's Q-values from the env's current
/// state until the episode ends.
EpisodeOutcome run_greedy_episode(const QNetParams &params, Environment &env, const StepObserver &observer = {});

/// Drives an episode with an arbitrary action chooser (used for scripted and random policies).
EpisodeOutcome run_episode(Environment &env, const std::function<Vertex(const Environment &)> &choose,
                           const StepObserver &observer = {});

} // namespace ecodqn

#endif // ECODQN_AGENT_HPP
