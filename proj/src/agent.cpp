#include "ecodqn/agent.hpp"

#include <chrono>
#include <limits>

namespace ecodqn {

EpisodeOutcome run_episode(Environment &env, const std::function<Vertex(const Environment &)> &choose,
                           const StepObserver &observer) {
    const auto start = std::chrono::steady_clock::now();
    EpisodeOutcome out;
    out.initial_cut = env.current_cut();
    while (!env.done()) {
        const Vertex v = choose(env);
        StepInfo info;
        if (observer) {
            info.action = v;
            info.gain = env.gains()[v];
            info.best_allowed_gain = -std::numeric_limits<double>::infinity();
            for (Vertex u = 0; u < env.graph().num_vertices(); ++u)
                if (env.is_allowed(u) && env.gains()[u] > info.best_allowed_gain) info.best_allowed_gain = env.gains()[u];
            info.repeat = env.flipped_before(v);
        }
        StepResult r = env.step(v);
        ++out.steps;
        if (observer) {
            info.step = env.t();
            info.result = r;
            info.cut = env.current_cut();
            info.best_cut = env.best_cut();
            observer(info);
        }
    }
    out.best_cut = env.best_cut();
    out.best_membership = env.best_membership();
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

EpisodeOutcome run_greedy_episode(const QNetParams &params, Environment &env, const StepObserver &observer) {
    ForwardCache cache;
    ObservationMatrix obs;
    std::vector<std::uint8_t> mask;
    return run_episode(
        env,
        [&](const Environment &e) {
            e.observe_into(obs);
            const Vector &q = forward(params, e.graph(), obs, cache);
            mask = e.allowed_mask();
            return greedy_action(q, mask);
        },
        observer);
}

} // namespace ecodqn
