#include "ecodqn/environment.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

#include "ecodqn/error.hpp"
#include "ecodqn/rng.hpp"

namespace ecodqn {

EnvConfig EnvConfig::eco() {
    return {};
}

EnvConfig EnvConfig::s2v() {
    EnvConfig cfg;
    cfg.reversible = false;
    cfg.episode_length_multiplier = 1.0;
    cfg.intrinsic_rewards = false;
    cfg.observation_tuning = false;
    cfg.gamma = 1.0;
    return cfg;
}

void EnvConfig::validate() const {
    if (!(episode_length_multiplier > 0.0) || !std::isfinite(episode_length_multiplier))
        throw ConfigError("episode_length_multiplier must be positive");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (reversible && gamma >= 1.0) throw ConfigError("gamma = 1 is only permitted for irreversible agents");
    if (!reversible && episode_length_multiplier > 1.0)
        throw ConfigError("irreversible episodes cannot outlast |V| additions");
}

bool Environment::StateSet::insert(const Membership &s) {
    auto &bucket = buckets_[s.fingerprint()];
    if (std::find(bucket.begin(), bucket.end(), s) != bucket.end()) return false;
    bucket.push_back(s);
    ++size_;
    return true;
}

bool Environment::StateSet::contains(const Membership &s) const {
    auto it = buckets_.find(s.fingerprint());
    return it != buckets_.end() && std::find(it->second.begin(), it->second.end(), s) != it->second.end();
}

void Environment::StateSet::clear() {
    buckets_.clear();
    size_ = 0;
}

Environment::Environment(std::shared_ptr<const Graph> graph, EnvConfig cfg) : graph_(std::move(graph)), cfg_(cfg) {
    if (!graph_) throw DataError("environment needs a graph");
    cfg_.validate();
    const auto n = static_cast<double>(graph_->num_vertices());
    horizon_ = static_cast<std::size_t>(std::llround(cfg_.episode_length_multiplier * n));
    membership_ = Membership(graph_->num_vertices());
    start_episode();
}

void Environment::reset(std::uint64_t seed) {
    membership_ = Membership(graph_->num_vertices());
    if (cfg_.reversible) {
        Rng rng(seed);
        for (std::size_t v = 0; v < membership_.size(); ++v) membership_.set(v, coin(rng, 0.5));
    }
    start_episode();
}

void Environment::reset_to(const Membership &initial) {
    if (initial.size() != graph_->num_vertices()) throw DataError("membership length does not match graph");
    if (!cfg_.reversible && initial.count() != 0)
        throw DataError("irreversible episodes start from the empty set");
    membership_ = initial;
    start_episode();
}

void Environment::start_episode() {
    const std::size_t n = graph_->num_vertices();
    gains_ = compute_gains(*graph_, membership_);
    t_ = 0;
    current_cut_ = cut_value(*graph_, membership_);
    initial_cut_ = current_cut_;
    best_cut_ = current_cut_;
    best_membership_ = membership_;
    last_flip_.assign(n, 0);
    flipped_.assign(n, 0);
    local_optima_.clear();
    visited_.clear();
    visited_.insert(membership_);
    if (is_locally_optimal()) local_optima_.insert(membership_);
}

bool Environment::is_allowed(Vertex v) const {
    return v < graph_->num_vertices() && (cfg_.reversible || !membership_[v]);
}

std::vector<std::uint8_t> Environment::allowed_mask() const {
    std::vector<std::uint8_t> mask(graph_->num_vertices(), 1);
    if (!cfg_.reversible)
        for (std::size_t v = 0; v < mask.size(); ++v) mask[v] = membership_[v] ? 0 : 1;
    return mask;
}

bool Environment::is_locally_optimal() const {
    return std::all_of(gains_.begin(), gains_.end(), [](double g) { return g <= 0.0; });
}

StepResult Environment::step(Vertex v) {
    if (done()) throw DataError("step after the episode finished");
    if (v >= graph_->num_vertices()) throw DataError("action " + std::to_string(v) + " out of range");
    if (!cfg_.reversible && membership_[v])
        throw DataError("irreversible agent re-selected vertex " + std::to_string(v));

    const auto n = static_cast<double>(graph_->num_vertices());
    const double old_cut = current_cut_;
    StepResult r;
    r.gain = apply_flip(*graph_, membership_, gains_, v);
    current_cut_ += r.gain;
    ++t_;
    last_flip_[v] = t_;
    flipped_[v] = 1;

    r.improvement = std::max(current_cut_ - best_cut_, 0.0);
    if (cfg_.observation_tuning)
        r.extrinsic = r.improvement / n;
    else
        r.extrinsic = (current_cut_ - old_cut) / n;
    if (current_cut_ > best_cut_) {
        best_cut_ = current_cut_;
        best_membership_ = membership_;
    }

    r.locally_optimal = is_locally_optimal();
    if (r.locally_optimal && local_optima_.insert(membership_) && cfg_.intrinsic_rewards) r.intrinsic = 1.0 / n;
    r.revisited = !visited_.insert(membership_);
    r.reward = r.extrinsic + r.intrinsic;
    r.done = done();
    return r;
}

ObservationMatrix Environment::observe() const {
    ObservationMatrix obs;
    observe_into(obs);
    return obs;
}

void Environment::observe_into(ObservationMatrix &obs) const {
    const std::size_t n = graph_->num_vertices();
    obs.setZero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kObservationWidth));
    for (std::size_t v = 0; v < n; ++v) obs(static_cast<Eigen::Index>(v), 0) = membership_[v] ? 1.0 : 0.0;
    if (!cfg_.observation_tuning) return;

    const auto nv = static_cast<double>(n);
    const auto horizon = static_cast<double>(horizon_);
    const auto t = static_cast<double>(t_);
    const double cut_gap = (best_cut_ - current_cut_) / nv;
    const double distance = static_cast<double>(membership_.hamming(best_membership_)) / nv;
    const double improving =
        static_cast<double>(std::count_if(gains_.begin(), gains_.end(), [](double g) { return g > 0.0; })) / nv;
    const double remaining = (horizon - t) / horizon;
    for (std::size_t v = 0; v < n; ++v) {
        auto row = obs.row(static_cast<Eigen::Index>(v));
        row(1) = gains_[v] / nv;
        row(2) = (t - static_cast<double>(last_flip_[v])) / horizon;
        row(3) = cut_gap;
        row(4) = distance;
        row(5) = improving;
        row(6) = remaining;
    }
}

void write_trace_jsonl(std::ostream &out, const std::vector<TraceRecord> &trace) {
    for (const TraceRecord &r : trace) {
        nlohmann::json j = {
            {"step", r.step},
            {"action", r.action},
            {"reward", r.reward},
            {"cut", r.cut},
            {"best_cut", r.best_cut},
            {"locally_optimal", r.locally_optimal},
            {"revisited", r.revisited},
        };
        out << j.dump() << '\n';
    }
}

std::vector<TraceRecord> read_trace_jsonl(std::istream &in) {
    std::vector<TraceRecord> trace;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            TraceRecord r;
            r.step = j.at("step").get<std::size_t>();
            r.action = j.at("action").get<Vertex>();
            r.reward = j.at("reward").get<double>();
            r.cut = j.at("cut").get<double>();
            r.best_cut = j.at("best_cut").get<double>();
            r.locally_optimal = j.at("locally_optimal").get<bool>();
            r.revisited = j.at("revisited").get<bool>();
            trace.push_back(r);
        } catch (const nlohmann::json::exception &e) {
            throw ParseError(number, std::string("bad trace record: ") + e.what());
        }
    }
    return trace;
}

} // namespace ecodqn
