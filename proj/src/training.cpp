#include "ecodqn/training.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "ecodqn/agent.hpp"
#include "ecodqn/baselines.hpp"
#include "ecodqn/error.hpp"
#include "ecodqn/exact.hpp"
#include "ecodqn/parallel.hpp"

namespace ecodqn {

namespace {

using json = nlohmann::json;

/// Largest holdout instance whose reference cut is computed exactly.
constexpr std::size_t kHoldoutReferenceRestarts = 50;

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, ptr};
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_value(const std::string &key, const std::string &value) {
    T out{};
    const char *begin = value.data();
    const char *end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc{} || ptr != end) throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
    return out;
}

bool parse_bool(const std::string &key, const std::string &value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError("invalid boolean '" + value + "' for key '" + key + "'");
}

const std::set<std::string> &known_keys() {
    static const std::set<std::string> keys = {
        "reversible",     "episode_length_multiplier", "intrinsic_rewards", "observation_tuning",
        "gamma",          "graph_type",                "graph_vertices",    "er_p",
        "ba_attach",      "signed_weights",            "embedding",         "rounds",
        "total_steps",    "minibatch_size",            "update_every",      "learning_rate",
        "optimizer",      "huber_delta",               "epsilon_start",     "epsilon_end",
        "epsilon_decay_fraction", "target_sync_period", "replay_capacity",  "holdout_size",
        "eval_period",    "seed",                      "threads",
    };
    return keys;
}

std::uint64_t graph_seed(const TrainConfig &cfg, std::uint64_t episode) {
    return derive_seed(derive_seed(cfg.seed, "graph"), episode);
}

std::uint64_t env_seed(const TrainConfig &cfg, std::uint64_t episode) {
    return derive_seed(derive_seed(cfg.seed, "env"), episode);
}

std::string rng_state(const Rng &rng) {
    std::ostringstream out;
    out << rng;
    return out.str();
}

void restore_rng(Rng &rng, const std::string &state) {
    std::istringstream in(state);
    in >> rng;
    if (!in) throw DataError("corrupt checkpoint: bad RNG state");
}

void zero(QNetParams &p) {
    for (auto &b : p.blocks()) std::fill(b.values.begin(), b.values.end(), 0.0);
}

double max_allowed(const Vector &q, std::span<const std::uint8_t> allowed) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < allowed.size(); ++v)
        if (allowed[v]) best = std::max(best, q[static_cast<Eigen::Index>(v)]);
    return best;
}

double td_target_with(const QNetParams &target, const Transition &tr, double gamma, bool clip_nonneg,
                      ForwardCache &cache) {
    if (tr.done) return tr.reward;
    const Vector &q = forward(target, *tr.graph, tr.next_obs, cache);
    double best = max_allowed(q, tr.next_allowed);
    if (!std::isfinite(best)) return tr.reward; // no action available
    if (clip_nonneg) best = std::max(best, 0.0);
    return tr.reward + gamma * best;
}

} // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
    env.validate();
    graphs.validate();
    if (dims.obs_width != kObservationWidth) throw ConfigError("observation width is fixed at 7");
    if (dims.embedding < 2 || dims.rounds < 1) throw ConfigError("embedding must be >= 2 and rounds >= 1");
    if (minibatch_size < 1) throw ConfigError("minibatch_size must be positive");
    if (update_every < 1) throw ConfigError("update_every must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(huber_delta > 0.0)) throw ConfigError("huber_delta must be positive");
    if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0) || !(epsilon_end >= 0.0 && epsilon_end <= 1.0))
        throw ConfigError("epsilon values must lie in [0, 1]");
    if (epsilon_end > epsilon_start) throw ConfigError("epsilon_end must not exceed epsilon_start");
    if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0))
        throw ConfigError("epsilon_decay_fraction must lie in (0, 1]");
    if (target_sync_period < 1) throw ConfigError("target_sync_period must be positive");
    if (replay_capacity < minibatch_size) throw ConfigError("replay_capacity must hold at least one minibatch");
    if (holdout_size < 1) throw ConfigError("holdout_size must be positive");
    if (threads < 1) throw ConfigError("threads must be positive");
}

std::map<std::string, std::string> TrainConfig::to_key_values() const {
    return {
        {"reversible", env.reversible ? "true" : "false"},
        {"episode_length_multiplier", format_double(env.episode_length_multiplier)},
        {"intrinsic_rewards", env.intrinsic_rewards ? "true" : "false"},
        {"observation_tuning", env.observation_tuning ? "true" : "false"},
        {"gamma", format_double(env.gamma)},
        {"graph_type", to_string(graphs.family)},
        {"graph_vertices", std::to_string(graphs.vertices)},
        {"er_p", format_double(graphs.er_p)},
        {"ba_attach", std::to_string(graphs.ba_attach)},
        {"signed_weights", graphs.signed_weights ? "true" : "false"},
        {"embedding", std::to_string(dims.embedding)},
        {"rounds", std::to_string(dims.rounds)},
        {"total_steps", std::to_string(total_steps)},
        {"minibatch_size", std::to_string(minibatch_size)},
        {"update_every", std::to_string(update_every)},
        {"learning_rate", format_double(learning_rate)},
        {"optimizer", optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
        {"huber_delta", format_double(huber_delta)},
        {"epsilon_start", format_double(epsilon_start)},
        {"epsilon_end", format_double(epsilon_end)},
        {"epsilon_decay_fraction", format_double(epsilon_decay_fraction)},
        {"target_sync_period", std::to_string(target_sync_period)},
        {"replay_capacity", std::to_string(replay_capacity)},
        {"holdout_size", std::to_string(holdout_size)},
        {"eval_period", std::to_string(eval_period)},
        {"seed", std::to_string(seed)},
        {"threads", std::to_string(threads)},
    };
}

TrainConfig TrainConfig::from_key_values(const std::map<std::string, std::string> &kv) {
    for (const auto &[key, value] : kv)
        if (!known_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
    for (const char *required : {"total_steps", "graph_vertices", "seed"})
        if (!kv.contains(required)) throw ConfigError(std::string("missing required config key '") + required + "'");

    TrainConfig c;
    auto get = [&kv](const std::string &key) -> const std::string * {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    if (auto v = get("reversible")) c.env.reversible = parse_bool("reversible", *v);
    if (!c.env.reversible) {
        // Irreversible defaults: one addition per vertex, undiscounted.
        c.env.episode_length_multiplier = 1.0;
        c.env.gamma = 1.0;
    }
    if (auto v = get("episode_length_multiplier"))
        c.env.episode_length_multiplier = parse_value<double>("episode_length_multiplier", *v);
    if (auto v = get("intrinsic_rewards")) c.env.intrinsic_rewards = parse_bool("intrinsic_rewards", *v);
    if (auto v = get("observation_tuning")) c.env.observation_tuning = parse_bool("observation_tuning", *v);
    if (auto v = get("gamma")) c.env.gamma = parse_value<double>("gamma", *v);
    if (auto v = get("graph_type")) c.graphs.family = parse_graph_family(*v);
    c.graphs.vertices = parse_value<std::size_t>("graph_vertices", *get("graph_vertices"));
    if (auto v = get("er_p")) c.graphs.er_p = parse_value<double>("er_p", *v);
    if (auto v = get("ba_attach")) c.graphs.ba_attach = parse_value<std::size_t>("ba_attach", *v);
    if (auto v = get("signed_weights")) c.graphs.signed_weights = parse_bool("signed_weights", *v);
    if (auto v = get("embedding")) c.dims.embedding = parse_value<std::size_t>("embedding", *v);
    if (auto v = get("rounds")) c.dims.rounds = parse_value<std::size_t>("rounds", *v);
    c.total_steps = parse_value<std::size_t>("total_steps", *get("total_steps"));
    if (auto v = get("minibatch_size")) c.minibatch_size = parse_value<std::size_t>("minibatch_size", *v);
    if (auto v = get("update_every")) c.update_every = parse_value<std::size_t>("update_every", *v);
    if (auto v = get("learning_rate")) c.learning_rate = parse_value<double>("learning_rate", *v);
    if (auto v = get("optimizer")) {
        if (*v == "adam")
            c.optimizer = OptimizerKind::Adam;
        else if (*v == "sgd")
            c.optimizer = OptimizerKind::SGD;
        else
            throw ConfigError("unknown optimizer '" + *v + "' (expected adam or sgd)");
    }
    if (auto v = get("huber_delta")) c.huber_delta = parse_value<double>("huber_delta", *v);
    if (auto v = get("epsilon_start")) c.epsilon_start = parse_value<double>("epsilon_start", *v);
    if (auto v = get("epsilon_end")) c.epsilon_end = parse_value<double>("epsilon_end", *v);
    if (auto v = get("epsilon_decay_fraction"))
        c.epsilon_decay_fraction = parse_value<double>("epsilon_decay_fraction", *v);
    if (auto v = get("target_sync_period")) c.target_sync_period = parse_value<std::size_t>("target_sync_period", *v);
    if (auto v = get("replay_capacity")) c.replay_capacity = parse_value<std::size_t>("replay_capacity", *v);
    if (auto v = get("holdout_size")) c.holdout_size = parse_value<std::size_t>("holdout_size", *v);
    if (auto v = get("eval_period")) c.eval_period = parse_value<std::size_t>("eval_period", *v);
    c.seed = parse_value<std::uint64_t>("seed", *get("seed"));
    if (auto v = get("threads")) c.threads = parse_value<std::size_t>("threads", *v);
    c.validate();
    return c;
}

std::string TrainConfig::to_text() const {
    std::string out;
    for (const auto &[key, value] : to_key_values()) out += key + " = " + value + "\n";
    return out;
}

TrainConfig TrainConfig::parse(const std::string &text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string body = trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError("config line " + std::to_string(number) + ": duplicate key '" + key + "'");
    }
    return from_key_values(kv);
}

TrainConfig TrainConfig::load(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

double epsilon_at(const TrainConfig &cfg, std::size_t step) {
    const double horizon = cfg.epsilon_decay_fraction * static_cast<double>(cfg.total_steps);
    if (horizon <= 0.0) return cfg.epsilon_end;
    const double frac = static_cast<double>(step) / horizon;
    if (frac >= 1.0) return cfg.epsilon_end;
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

// ---------------------------------------------------------------------------
// Replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition &ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) throw DataError("replay index out of range");
    return items_[(head_ + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t count, Rng &rng) const {
    if (count > items_.size()) throw DataError("minibatch larger than the replay buffer");
    // Partial Fisher-Yates over the logical indices.
    std::vector<std::size_t> pool(items_.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + uniform_index(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

double td_target(const QNetParams &target, const Transition &tr, double gamma, bool clip_nonneg) {
    ForwardCache cache;
    return td_target_with(target, tr, gamma, clip_nonneg, cache);
}

// ---------------------------------------------------------------------------
// Learning curve

void write_curve_csv(std::ostream &out, const std::vector<CurvePoint> &curve) {
    out << "env_steps,grad_updates,holdout_mean_cut,holdout_mean_approx_ratio,epsilon,wall_time_s\n";
    for (const CurvePoint &p : curve) {
        out << p.env_steps << ',' << p.grad_updates << ',' << format_double(p.holdout_mean_cut) << ','
            << format_double(p.holdout_mean_approx_ratio) << ',' << format_double(p.epsilon) << ','
            << format_double(p.wall_time_s) << '\n';
    }
}

std::vector<CurvePoint> read_curve_csv(std::istream &in) {
    std::vector<CurvePoint> curve;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (number == 1 || trim(line).empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (cols.size() != 6) throw ParseError(number, "expected 6 columns in learning curve");
        CurvePoint p;
        p.env_steps = parse_value<std::size_t>("env_steps", cols[0]);
        p.grad_updates = parse_value<std::size_t>("grad_updates", cols[1]);
        p.holdout_mean_cut = parse_value<double>("holdout_mean_cut", cols[2]);
        p.holdout_mean_approx_ratio = parse_value<double>("holdout_mean_approx_ratio", cols[3]);
        p.epsilon = parse_value<double>("epsilon", cols[4]);
        p.wall_time_s = parse_value<double>("wall_time_s", cols[5]);
        curve.push_back(p);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, version, JSON header, raw little-endian doubles.

namespace {

constexpr char kMagic[8] = {'E', 'C', 'O', 'D', 'Q', 'N', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

class ArrayWriter {
public:
    void add(const std::string &name, std::span<const double> values, Eigen::Index rows, Eigen::Index cols) {
        directory_.push_back({{"name", name}, {"rows", rows}, {"cols", cols}});
        data_.insert(data_.end(), values.begin(), values.end());
    }
    void add_params(const std::string &prefix, const QNetParams &p) {
        for (const auto &b : p.blocks()) add(prefix + b.name, b.values, b.rows, b.cols);
    }
    const json &directory() const { return directory_; }
    const std::vector<double> &data() const { return data_; }

private:
    json directory_ = json::array();
    std::vector<double> data_;
};

class ArrayReader {
public:
    ArrayReader(const json &directory, std::span<const double> data) {
        std::size_t offset = 0;
        for (const auto &entry : directory) {
            Entry e;
            e.rows = entry.at("rows").get<Eigen::Index>();
            e.cols = entry.at("cols").get<Eigen::Index>();
            e.offset = offset;
            offset += static_cast<std::size_t>(e.rows * e.cols);
            entries_.emplace(entry.at("name").get<std::string>(), e);
        }
        if (offset != data.size()) throw DataError("corrupt checkpoint: array payload size mismatch");
        data_ = data;
    }

    std::span<const double> get(const std::string &name, Eigen::Index rows, Eigen::Index cols) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw DataError("corrupt checkpoint: missing array '" + name + "'");
        if (it->second.rows != rows || it->second.cols != cols)
            throw DataError("corrupt checkpoint: array '" + name + "' has unexpected shape");
        return data_.subspan(it->second.offset, static_cast<std::size_t>(rows * cols));
    }

    std::span<const double> get(const std::string &name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw DataError("corrupt checkpoint: missing array '" + name + "'");
        return get(name, it->second.rows, it->second.cols);
    }

    void fill_params(const std::string &prefix, QNetParams &p) const {
        for (auto &b : p.blocks()) {
            auto src = get(prefix + b.name, b.rows, b.cols);
            std::copy(src.begin(), src.end(), b.values.begin());
        }
    }

private:
    struct Entry {
        Eigen::Index rows;
        Eigen::Index cols;
        std::size_t offset;
    };
    std::unordered_map<std::string, Entry> entries_;
    std::span<const double> data_;
};

json env_to_json(const EnvConfig &e) {
    return {{"reversible", e.reversible},
            {"episode_length_multiplier", e.episode_length_multiplier},
            {"intrinsic_rewards", e.intrinsic_rewards},
            {"observation_tuning", e.observation_tuning},
            {"gamma", e.gamma}};
}

EnvConfig env_from_json(const json &j) {
    EnvConfig e;
    e.reversible = j.at("reversible").get<bool>();
    e.episode_length_multiplier = j.at("episode_length_multiplier").get<double>();
    e.intrinsic_rewards = j.at("intrinsic_rewards").get<bool>();
    e.observation_tuning = j.at("observation_tuning").get<bool>();
    e.gamma = j.at("gamma").get<double>();
    return e;
}

void append_u32(std::string &out, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

void append_u64(std::string &out, std::uint64_t x) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

std::uint64_t read_le(const std::string &bytes, std::size_t pos, int width) {
    std::uint64_t x = 0;
    for (int i = 0; i < width; ++i)
        x |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)])) << (8 * i);
    return x;
}

} // namespace

std::string encode_checkpoint(const Checkpoint &c) {
    static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");
    ArrayWriter arrays;
    arrays.add_params("", c.params);

    json header;
    header["format"] = "ecodqn-checkpoint";
    header["version"] = kCheckpointVersion;
    header["dims"] = {{"m", c.params.dims.obs_width}, {"n", c.params.dims.embedding}, {"K", c.params.dims.rounds}};
    header["env"] = env_to_json(c.env);
    if (c.state) {
        const TrainState &s = *c.state;
        arrays.add_params("target/", s.target);
        arrays.add_params("adam_m/", s.adam.m);
        arrays.add_params("adam_v/", s.adam.v);

        json train;
        train["config"] = s.config.to_key_values();
        train["env_steps"] = s.env_steps;
        train["grad_updates"] = s.grad_updates;
        train["episode"] = s.episode;
        train["episode_actions"] = s.episode_actions;
        train["explore_rng"] = s.explore_rng;
        train["replay_rng"] = s.replay_rng;
        train["adam_t"] = s.adam.t;
        json curve = json::array();
        for (const CurvePoint &p : s.curve)
            curve.push_back({p.env_steps, p.grad_updates, p.holdout_mean_cut, p.holdout_mean_approx_ratio, p.epsilon});
        train["curve"] = curve;

        json replay = json::array();
        std::vector<double> obs, next_obs, allowed, next_allowed;
        for (const Transition &t : s.replay) {
            replay.push_back({t.episode, t.action, t.reward, t.done, t.obs.rows()});
            obs.insert(obs.end(), t.obs.data(), t.obs.data() + t.obs.size());
            next_obs.insert(next_obs.end(), t.next_obs.data(), t.next_obs.data() + t.next_obs.size());
            allowed.insert(allowed.end(), t.allowed.begin(), t.allowed.end());
            next_allowed.insert(next_allowed.end(), t.next_allowed.begin(), t.next_allowed.end());
        }
        const auto rows = static_cast<Eigen::Index>(allowed.size());
        const auto width = static_cast<Eigen::Index>(c.params.dims.obs_width);
        arrays.add("replay/obs", obs, rows, width);
        arrays.add("replay/next_obs", next_obs, rows, width);
        arrays.add("replay/allowed", allowed, rows, 1);
        arrays.add("replay/next_allowed", next_allowed, rows, 1);
        train["replay"] = replay;
        header["train"] = train;
    } else {
        header["train"] = nullptr;
    }
    header["arrays"] = arrays.directory();

    const std::string head = header.dump();
    std::string out(kMagic, sizeof kMagic);
    append_u32(out, kCheckpointVersion);
    append_u64(out, head.size());
    out += head;
    append_u64(out, arrays.data().size());
    const auto *raw = reinterpret_cast<const char *>(arrays.data().data());
    out.append(raw, arrays.data().size() * sizeof(double));
    return out;
}

Checkpoint decode_checkpoint(const std::string &bytes) {
    if (bytes.size() < sizeof kMagic + 12 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw DataError("not an ecodqn checkpoint");
    const auto version = static_cast<std::uint32_t>(read_le(bytes, 8, 4));
    if (version != kCheckpointVersion)
        throw ConfigError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    const std::size_t head_len = read_le(bytes, 12, 8);
    std::size_t pos = 20;
    if (bytes.size() < pos + head_len + 8) throw DataError("corrupt checkpoint: truncated header");
    json header;
    try {
        header = json::parse(bytes.substr(pos, head_len));
    } catch (const json::exception &e) {
        throw DataError(std::string("corrupt checkpoint header: ") + e.what());
    }
    pos += head_len;
    const std::size_t count = read_le(bytes, pos, 8);
    pos += 8;
    if (bytes.size() != pos + count * sizeof(double)) throw DataError("corrupt checkpoint: truncated payload");
    std::vector<double> data(count);
    std::memcpy(data.data(), bytes.data() + pos, count * sizeof(double));

    try {
        Checkpoint c;
        QNetDims dims;
        dims.obs_width = header.at("dims").at("m").get<std::size_t>();
        dims.embedding = header.at("dims").at("n").get<std::size_t>();
        dims.rounds = header.at("dims").at("K").get<std::size_t>();
        c.env = env_from_json(header.at("env"));
        ArrayReader arrays(header.at("arrays"), data);
        c.params = QNetParams::zeros(dims);
        arrays.fill_params("", c.params);

        const json &train = header.at("train");
        if (!train.is_null()) {
            TrainState s;
            s.config = TrainConfig::from_key_values(train.at("config").get<std::map<std::string, std::string>>());
            s.target = QNetParams::zeros(dims);
            s.adam.m = QNetParams::zeros(dims);
            s.adam.v = QNetParams::zeros(dims);
            arrays.fill_params("target/", s.target);
            arrays.fill_params("adam_m/", s.adam.m);
            arrays.fill_params("adam_v/", s.adam.v);
            s.adam.t = train.at("adam_t").get<std::uint64_t>();
            s.env_steps = train.at("env_steps").get<std::size_t>();
            s.grad_updates = train.at("grad_updates").get<std::size_t>();
            s.episode = train.at("episode").get<std::uint64_t>();
            s.episode_actions = train.at("episode_actions").get<std::vector<Vertex>>();
            s.explore_rng = train.at("explore_rng").get<std::string>();
            s.replay_rng = train.at("replay_rng").get<std::string>();
            for (const auto &p : train.at("curve")) {
                CurvePoint cp;
                cp.env_steps = p.at(0).get<std::size_t>();
                cp.grad_updates = p.at(1).get<std::size_t>();
                cp.holdout_mean_cut = p.at(2).get<double>();
                cp.holdout_mean_approx_ratio = p.at(3).get<double>();
                cp.epsilon = p.at(4).get<double>();
                s.curve.push_back(cp);
            }

            const auto width = static_cast<Eigen::Index>(dims.obs_width);
            auto obs = arrays.get("replay/obs");
            auto next_obs = arrays.get("replay/next_obs");
            auto allowed = arrays.get("replay/allowed");
            auto next_allowed = arrays.get("replay/next_allowed");
            std::unordered_map<std::uint64_t, std::shared_ptr<const Graph>> graphs;
            std::size_t row = 0;
            for (const auto &r : train.at("replay")) {
                Transition t;
                t.episode = r.at(0).get<std::uint64_t>();
                t.action = r.at(1).get<Vertex>();
                t.reward = r.at(2).get<double>();
                t.done = r.at(3).get<bool>();
                const auto rows = r.at(4).get<Eigen::Index>();
                const auto n = static_cast<std::size_t>(rows);
                if ((row + n) * static_cast<std::size_t>(width) > obs.size())
                    throw DataError("corrupt checkpoint: replay rows exceed payload");
                auto &g = graphs[t.episode];
                if (!g) g = std::make_shared<const Graph>(s.config.graphs.sample(graph_seed(s.config, t.episode)));
                if (g->num_vertices() != n) throw DataError("corrupt checkpoint: replay graph size mismatch");
                t.graph = g;
                const std::size_t off = row * static_cast<std::size_t>(width);
                t.obs = Eigen::Map<const Matrix>(obs.data() + off, rows, width);
                t.next_obs = Eigen::Map<const Matrix>(next_obs.data() + off, rows, width);
                t.allowed.resize(n);
                t.next_allowed.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    t.allowed[i] = static_cast<std::uint8_t>(allowed[row + i]);
                    t.next_allowed[i] = static_cast<std::uint8_t>(next_allowed[row + i]);
                }
                row += n;
                s.replay.push_back(std::move(t));
            }
            c.state = std::move(s);
        }
        return c;
    } catch (const json::exception &e) {
        throw DataError(std::string("corrupt checkpoint header: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint &c, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    const std::string bytes = encode_checkpoint(c);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode_checkpoint(buf.str());
}

Checkpoint load_checkpoint(const std::string &path, const QNetDims &expected) {
    Checkpoint c = load_checkpoint(path);
    if (!(c.params.dims == expected))
        throw ConfigError("checkpoint network dims (m=" + std::to_string(c.params.dims.obs_width) +
                          ", n=" + std::to_string(c.params.dims.embedding) + ", K=" +
                          std::to_string(c.params.dims.rounds) + ") do not match the expected architecture");
    return c;
}

// ---------------------------------------------------------------------------
// Trainer

Holdout make_holdout(const TrainConfig &cfg) {
    Holdout h;
    const std::uint64_t base = derive_seed(cfg.seed, "holdout");
    h.graphs.resize(cfg.holdout_size);
    h.reference.resize(cfg.holdout_size);
    parallel_for(cfg.holdout_size, cfg.threads, [&](std::size_t i) {
        auto g = std::make_shared<const Graph>(cfg.graphs.sample(derive_seed(base, i)));
        auto exact = exact_opt(*g);
        h.reference[i] = exact ? exact->cut : mca_best(*g, kHoldoutReferenceRestarts, derive_seed(base, i)).cut;
        h.graphs[i] = std::move(g);
    });
    return h;
}

Trainer::Trainer(TrainConfig cfg)
    : config_(std::move(cfg)), replay_(config_.replay_capacity), last_loss_(std::numeric_limits<double>::quiet_NaN()) {
    config_.validate();
    params_ = init_params(config_.dims, derive_seed(config_.seed, "init"));
    target_ = params_;
    adam_.m = QNetParams::zeros(config_.dims);
    adam_.v = QNetParams::zeros(config_.dims);
    grad_ = QNetParams::zeros(config_.dims);
    explore_rng_.seed(derive_seed(config_.seed, "explore"));
    replay_rng_.seed(derive_seed(config_.seed, "replay"));
    holdout_ = make_holdout(config_);
    started_ = std::chrono::steady_clock::now();
}

Trainer::Trainer(const Checkpoint &resume)
    : config_(resume.state ? resume.state->config : throw ConfigError("checkpoint has no training state")),
      replay_(config_.replay_capacity), last_loss_(std::numeric_limits<double>::quiet_NaN()) {
    const TrainState &s = *resume.state;
    params_ = resume.params;
    target_ = s.target;
    adam_ = s.adam;
    grad_ = QNetParams::zeros(config_.dims);
    restore_rng(explore_rng_, s.explore_rng);
    restore_rng(replay_rng_, s.replay_rng);
    for (const Transition &t : s.replay) replay_.push(t);
    curve_ = s.curve;
    env_steps_ = s.env_steps;
    grad_updates_ = s.grad_updates;
    episode_ = s.episode;
    prior_wall_time_ = s.wall_time_s;
    holdout_ = make_holdout(config_);

    if (env_steps_ > 0 || !s.episode_actions.empty()) {
        // Rebuild the in-flight episode by replaying its actions.
        auto g = std::make_shared<const Graph>(config_.graphs.sample(graph_seed(config_, episode_)));
        env_ = std::make_unique<Environment>(std::move(g), config_.env);
        env_->reset(env_seed(config_, episode_));
        for (Vertex v : s.episode_actions) env_->step(v);
        episode_actions_ = s.episode_actions;
    }
    started_ = std::chrono::steady_clock::now();
}

void Trainer::begin_episode() {
    if (env_) ++episode_;
    auto g = std::make_shared<const Graph>(config_.graphs.sample(graph_seed(config_, episode_)));
    env_ = std::make_unique<Environment>(std::move(g), config_.env);
    env_->reset(env_seed(config_, episode_));
    episode_actions_.clear();
}

std::pair<double, double> Trainer::evaluate_holdout() const {
    const std::size_t count = holdout_.graphs.size();
    std::vector<double> cuts(count), ratios(count);
    const std::uint64_t base = derive_seed(config_.seed, "eval");
    parallel_for(count, config_.threads, [&](std::size_t i) {
        Environment env(holdout_.graphs[i], config_.env);
        env.reset(derive_seed(base, i));
        cuts[i] = run_greedy_episode(params_, env).best_cut;
        // An instance whose optimum is 0 is solved by any non-negative cut.
        ratios[i] = holdout_.reference[i] > 0.0 ? cuts[i] / holdout_.reference[i] : 1.0;
    });
    double cut_sum = 0.0, ratio_sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        cut_sum += cuts[i];
        ratio_sum += ratios[i];
    }
    return {cut_sum / static_cast<double>(count), ratio_sum / static_cast<double>(count)};
}

void Trainer::act() {
    Environment &env = *env_;
    const Graph &g = env.graph();
    Transition tr;
    tr.graph = env.graph_ptr();
    tr.episode = episode_;
    env.observe_into(tr.obs);
    tr.allowed = env.allowed_mask();

    const double eps = epsilon_at(config_, env_steps_);
    Vertex v;
    if (uniform01(explore_rng_) < eps) {
        std::vector<Vertex> options;
        for (Vertex u = 0; u < g.num_vertices(); ++u)
            if (tr.allowed[u]) options.push_back(u);
        v = options[uniform_index(explore_rng_, options.size())];
    } else {
        v = greedy_action(forward(params_, g, tr.obs, cache_), tr.allowed);
    }

    const StepResult r = env.step(v);
    episode_actions_.push_back(v);
    tr.action = v;
    tr.reward = r.reward;
    tr.done = r.done;
    env.observe_into(tr.next_obs);
    tr.next_allowed = env.allowed_mask();
    replay_.push(std::move(tr));
    ++env_steps_;

    if (env_steps_ % config_.update_every == 0 && replay_.size() >= config_.minibatch_size) update();
    if (config_.eval_period > 0 && env_steps_ % config_.eval_period == 0) {
        auto [cut, ratio] = evaluate_holdout();
        curve_.push_back({env_steps_, grad_updates_, cut, ratio, epsilon_at(config_, env_steps_), 0.0});
        curve_.back().wall_time_s =
            prior_wall_time_ + std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    }
}

void Trainer::update() {
    const auto batch = replay_.sample(config_.minibatch_size, replay_rng_);
    zero(grad_);
    const double scale = 1.0 / static_cast<double>(batch.size());
    const double delta = config_.huber_delta;
    double loss = 0.0;
    for (std::size_t i : batch) {
        const Transition &tr = replay_.at(i);
        const double y = td_target_with(target_, tr, config_.env.gamma, config_.clip_targets(), target_cache_);
        const Vector &q = forward(params_, *tr.graph, tr.obs, cache_);
        const double err = q[static_cast<Eigen::Index>(tr.action)] - y;
        const double mag = std::abs(err);
        loss += mag <= delta ? 0.5 * err * err : delta * (mag - 0.5 * delta);
        backward(params_, *tr.graph, cache_, tr.action, std::clamp(err, -delta, delta) * scale, grad_);
    }
    loss *= scale;
    last_loss_ = loss;
    if (!std::isfinite(loss) || !grad_.all_finite())
        throw NumericError("non-finite loss at update " + std::to_string(grad_updates_ + 1) + " (env step " +
                           std::to_string(env_steps_) + ")");

    auto params = params_.blocks();
    auto grads = grad_.blocks();
    if (config_.optimizer == OptimizerKind::Adam) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        ++adam_.t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_.t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_.t));
        auto ms = adam_.m.blocks();
        auto vs = adam_.v.blocks();
        for (std::size_t b = 0; b < params.size(); ++b) {
            auto theta = params[b].values;
            auto g = grads[b].values;
            auto m = ms[b].values;
            auto v = vs[b].values;
            for (std::size_t j = 0; j < theta.size(); ++j) {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                theta[j] -= config_.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
            }
        }
    } else {
        for (std::size_t b = 0; b < params.size(); ++b)
            for (std::size_t j = 0; j < params[b].values.size(); ++j)
                params[b].values[j] -= config_.learning_rate * grads[b].values[j];
    }
    if (!params_.all_finite()) throw NumericError("parameters became non-finite at update " + std::to_string(grad_updates_ + 1));

    ++grad_updates_;
    if (grad_updates_ % config_.target_sync_period == 0) target_ = params_;
}

void Trainer::run_until(std::size_t limit) {
    limit = std::min(limit, config_.total_steps);
    if (env_steps_ == 0 && curve_.empty() && config_.total_steps > 0 && config_.eval_period > 0 && limit > 0) {
        auto [cut, ratio] = evaluate_holdout();
        curve_.push_back({0, 0, cut, ratio, epsilon_at(config_, 0), prior_wall_time_});
    }
    while (env_steps_ < limit) {
        if (!env_ || env_->done()) begin_episode();
        act();
    }
    if (finished() && config_.eval_period > 0 && config_.total_steps > 0 && curve_.back().env_steps != env_steps_) {
        auto [cut, ratio] = evaluate_holdout();
        curve_.push_back({env_steps_, grad_updates_, cut, ratio, epsilon_at(config_, env_steps_), 0.0});
        curve_.back().wall_time_s =
            prior_wall_time_ + std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    }
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.params = params_;
    c.env = config_.env;
    TrainState s;
    s.config = config_;
    s.target = target_;
    s.adam = adam_;
    s.env_steps = env_steps_;
    s.grad_updates = grad_updates_;
    s.episode = episode_;
    s.episode_actions = episode_actions_;
    s.explore_rng = rng_state(explore_rng_);
    s.replay_rng = rng_state(replay_rng_);
    s.curve = curve_;
    s.replay.reserve(replay_.size());
    for (std::size_t i = 0; i < replay_.size(); ++i) s.replay.push_back(replay_.at(i));
    c.state = std::move(s);
    return c;
}

TrainResult train(const TrainConfig &cfg) {
    Trainer trainer(cfg);
    trainer.run();
    return {trainer.checkpoint(), trainer.curve()};
}

} // namespace ecodqn
