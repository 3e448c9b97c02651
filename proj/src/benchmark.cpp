#include "ecodqn/benchmark.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "ecodqn/agent.hpp"
#include "ecodqn/baselines.hpp"
#include "ecodqn/error.hpp"
#include "ecodqn/exact.hpp"
#include "ecodqn/parallel.hpp"
#include "ecodqn/rng.hpp"

namespace ecodqn {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::size_t kReferenceRestarts = 50;

std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

std::uint64_t parse_hex64(const std::string &s) {
    std::uint64_t x = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x, 16);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw DataError("bad graph hash '" + s + "'");
    return x;
}

std::string fmt(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, ptr};
}

double mean(const std::vector<double> &v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

double approximation_ratio(double cut, double reference) {
    if (!(reference > 0.0))
        throw DataError("approximation ratio needs a positive reference cut, got " + fmt(reference));
    return cut / reference;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile of an empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

// ---------------------------------------------------------------------------
// Corpora

std::vector<CorpusEntry> write_corpus(const std::string &dir, const GraphSpec &spec, std::size_t count,
                                      std::uint64_t seed) {
    spec.validate();
    if (count == 0) throw ConfigError("corpus size must be positive");
    fs::create_directories(dir);
    std::vector<CorpusEntry> entries;
    std::ofstream index(fs::path(dir) / kCorpusIndexName);
    if (!index) throw DataError("cannot write corpus index in " + dir);
    index << "id\tfile\tvertices\tedges\thash\n";
    const std::uint64_t base = derive_seed(seed, "corpus");
    for (std::size_t i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "graph_%04zu", i);
        const std::string file = std::string(name) + ".txt";
        auto g = std::make_shared<const Graph>(spec.sample(derive_seed(base, i)));
        write_graph_file(*g, (fs::path(dir) / file).string());
        index << name << '\t' << file << '\t' << g->num_vertices() << '\t' << g->num_edges() << '\t'
              << hex64(g->content_hash()) << '\n';
        entries.push_back({name, (fs::path(dir) / file).string(), std::move(g)});
    }
    if (!index) throw DataError("failed writing corpus index in " + dir);
    return entries;
}

std::vector<CorpusEntry> read_corpus(const std::string &path) {
    std::vector<CorpusEntry> entries;
    if (!fs::exists(path)) throw DataError("no such corpus or graph file: " + path);
    if (!fs::is_directory(path)) {
        auto g = std::make_shared<const Graph>(read_graph_file(path));
        entries.push_back({fs::path(path).stem().string(), path, std::move(g)});
        return entries;
    }
    const fs::path index_path = fs::path(path) / kCorpusIndexName;
    std::ifstream index(index_path);
    if (!index) throw DataError("corpus directory has no " + std::string(kCorpusIndexName) + ": " + path);
    std::string line;
    std::size_t number = 0;
    while (std::getline(index, line)) {
        ++number;
        if (number == 1 || line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, '\t')) cols.push_back(cell);
        if (cols.size() != 5)
            throw DataError(index_path.string() + ": line " + std::to_string(number) + ": expected 5 columns");
        const std::string file = (fs::path(path) / cols[1]).string();
        auto g = std::make_shared<const Graph>(read_graph_file(file));
        if (hex64(g->content_hash()) != cols[4])
            throw DataError(file + ": content hash does not match the corpus index");
        entries.push_back({cols[0], file, std::move(g)});
    }
    if (entries.empty()) throw DataError("corpus is empty: " + path);
    return entries;
}

// ---------------------------------------------------------------------------
// Registry

std::string membership_string(const Membership &m) {
    std::string s(m.size(), '0');
    for (std::size_t v = 0; v < m.size(); ++v)
        if (m[v]) s[v] = '1';
    return s;
}

Membership parse_membership(const std::string &bits) {
    Membership m(bits.size());
    for (std::size_t v = 0; v < bits.size(); ++v) {
        if (bits[v] != '0' && bits[v] != '1') throw DataError("membership strings use only '0' and '1'");
        m.set(v, bits[v] == '1');
    }
    return m;
}

RunRegistry::RunRegistry(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return; // starts empty
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            RegistryEntry e;
            e.graph_hash = parse_hex64(j.at("hash").get<std::string>());
            e.cut = j.at("cut").get<double>();
            e.method = j.at("method").get<std::string>();
            e.membership = j.at("membership").get<std::string>();
            auto it = best_.find(e.graph_hash);
            if (it == best_.end() || e.cut > it->second.cut) best_[e.graph_hash] = std::move(e);
        } catch (const json::exception &ex) {
            throw DataError(path_ + ": line " + std::to_string(number) + ": " + ex.what());
        }
    }
}

std::optional<RegistryEntry> RunRegistry::best(std::uint64_t graph_hash) const {
    auto it = best_.find(graph_hash);
    if (it == best_.end()) return std::nullopt;
    return it->second;
}

bool RunRegistry::offer(const Graph &g, double cut, const std::string &method, const Membership &membership) {
    const std::uint64_t h = g.content_hash();
    auto it = best_.find(h);
    if (it != best_.end() && !(cut > it->second.cut)) return false;
    if (membership.size() != g.num_vertices() || cut_value(g, membership) != cut)
        throw DataError("registry entry for " + hex64(h) + " does not reproduce its cut");
    RegistryEntry e{h, cut, method, membership_string(membership)};
    json j = {{"hash", hex64(h)},      {"vertices", g.num_vertices()}, {"edges", g.num_edges()},
              {"cut", cut},            {"method", method},             {"membership", e.membership}};
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to run registry " + path_);
    out << j.dump() << '\n';
    if (!out) throw DataError("failed appending to run registry " + path_);
    best_[h] = std::move(e);
    return true;
}

Reference reference_cut(const Graph &g, RunRegistry *registry, std::uint64_t seed) {
    if (auto r = exact_opt(g)) {
        if (registry) registry->offer(g, r->cut, "exact", r->membership);
        return {r->cut, true, "exact"};
    }
    if (registry) {
        if (auto e = registry->best(g.content_hash())) return {e->cut, false, e->method};
    }
    SolveResult r = mca_best(g, kReferenceRestarts, seed);
    if (registry) registry->offer(g, r.cut, "mca", r.membership);
    return {r.cut, false, "mca"};
}

// ---------------------------------------------------------------------------
// Evaluation

EpisodeRunner agent_runner(const QNetParams &params, const EnvConfig &env) {
    return [&params, env](const std::shared_ptr<const Graph> &g, std::uint64_t seed) {
        Environment e(g, env);
        e.reset(seed);
        EpisodeOutcome o = run_greedy_episode(params, e);
        return EpisodeRun{o.best_cut, std::move(o.best_membership), o.steps, o.seconds};
    };
}

EpisodeRunner baseline_runner(const std::string &method) {
    if (method == "mca-rev") {
        return [](const std::shared_ptr<const Graph> &g, std::uint64_t seed) {
            const auto start = std::chrono::steady_clock::now();
            SolveResult r = mca_rev(*g, seed);
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return EpisodeRun{r.cut, std::move(r.membership), r.steps, s};
        };
    }
    if (method == "mca-irrev") {
        return [](const std::shared_ptr<const Graph> &g, std::uint64_t) {
            const auto start = std::chrono::steady_clock::now();
            SolveResult r = mca_irrev(*g);
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            return EpisodeRun{r.cut, std::move(r.membership), r.steps, s};
        };
    }
    throw ConfigError("unknown baseline '" + method + "' (expected mca-rev or mca-irrev)");
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t graph_index, std::size_t episode) {
    return derive_seed(derive_seed(seed, graph_index), episode);
}

EvalReport evaluate(const EpisodeRunner &runner, const std::vector<CorpusEntry> &graphs,
                    const std::vector<Reference> &references, const EvalOptions &opts) {
    if (graphs.empty()) throw DataError("nothing to evaluate: empty graph set");
    if (references.size() != graphs.size()) throw DataError("one reference cut is needed per graph");
    if (opts.episodes == 0) throw ConfigError("episodes per graph must be positive");
    for (std::size_t i = 0; i < graphs.size(); ++i)
        if (!(references[i].cut > 0.0))
            throw DataError("graph " + graphs[i].id + " has a non-positive reference cut; ratio undefined");

    const auto start = std::chrono::steady_clock::now();
    const std::size_t episodes = opts.episodes;
    std::vector<EpisodeRun> runs(graphs.size() * episodes);
    parallel_for(runs.size(), opts.threads, [&](std::size_t k) {
        const std::size_t i = k / episodes, e = k % episodes;
        runs[k] = runner(graphs[i].graph, episode_seed(opts.seed, i, e));
    });

    EvalReport report;
    report.agent = opts.agent;
    report.graph_set = opts.graph_set;
    report.episodes_per_graph = episodes;
    std::vector<double> ratios;
    std::vector<double> single;
    std::size_t total_actions = 0;
    double total_seconds = 0.0;
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        GraphEval ge;
        ge.id = graphs[i].id;
        ge.graph_hash = graphs[i].graph->content_hash();
        ge.vertices = graphs[i].graph->num_vertices();
        ge.reference = references[i];
        std::size_t best = 0;
        for (std::size_t e = 0; e < episodes; ++e) {
            const EpisodeRun &r = runs[i * episodes + e];
            ge.episode_cuts.push_back(r.cut);
            if (r.cut > runs[i * episodes + best].cut) best = e;
            ge.actions += r.actions;
            ge.seconds += r.seconds;
        }
        ge.best_cut = runs[i * episodes + best].cut;
        ge.best_membership = runs[i * episodes + best].membership;
        ge.ratio = approximation_ratio(ge.best_cut, ge.reference.cut);
        double single_sum = 0.0;
        for (double c : ge.episode_cuts) single_sum += approximation_ratio(c, ge.reference.cut);
        ge.mean_episode_ratio = single_sum / static_cast<double>(episodes);
        ge.improved_reference = !ge.reference.exact && ge.best_cut > ge.reference.cut;
        ratios.push_back(ge.ratio);
        single.push_back(ge.mean_episode_ratio);
        total_actions += ge.actions;
        total_seconds += ge.seconds;
        report.graphs.push_back(std::move(ge));
    }
    report.mean_ratio = mean(ratios);
    report.lower_quartile = quantile(ratios, 0.25);
    report.upper_quartile = quantile(ratios, 0.75);
    report.single_try_mean_ratio = mean(single);
    report.seconds_per_action = total_actions > 0 ? total_seconds / static_cast<double>(total_actions) : 0.0;
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

EvalReport evaluate_agent(const Checkpoint &checkpoint, const std::vector<CorpusEntry> &graphs,
                          const std::vector<Reference> &references, const EvalOptions &opts,
                          const std::optional<QNetDims> &expected) {
    if (expected && !(checkpoint.params.dims == *expected))
        throw ConfigError("checkpoint architecture does not match the expected network dims");
    return evaluate(agent_runner(checkpoint.params, checkpoint.env), graphs, references, opts);
}

void write_episode_csv(std::ostream &out, const EvalReport &report) {
    out << "graph_id,episode,cut,reference,ratio\n";
    for (const GraphEval &g : report.graphs)
        for (std::size_t e = 0; e < g.episode_cuts.size(); ++e)
            out << g.id << ',' << e << ',' << fmt(g.episode_cuts[e]) << ',' << fmt(g.reference.cut) << ','
                << fmt(g.episode_cuts[e] / g.reference.cut) << '\n';
}

void write_report_jsonl(std::ostream &out, const EvalReport &report) {
    for (const GraphEval &g : report.graphs) {
        json j = {{"agent", report.agent},
                  {"graph_set", report.graph_set},
                  {"graph_id", g.id},
                  {"graph_hash", hex64(g.graph_hash)},
                  {"vertices", g.vertices},
                  {"episodes", g.episode_cuts.size()},
                  {"best_cut", g.best_cut},
                  {"reference", g.reference.cut},
                  {"reference_exact", g.reference.exact},
                  {"reference_method", g.reference.method},
                  {"ratio", g.ratio},
                  {"mean_episode_ratio", g.mean_episode_ratio},
                  {"improved_reference", g.improved_reference},
                  {"membership", membership_string(g.best_membership)}};
        out << j.dump() << '\n';
    }
}

std::vector<SummaryRow> aggregate(const std::vector<EvalReport> &reports) {
    if (reports.empty()) throw DataError("no reports to aggregate");
    std::vector<SummaryRow> rows;
    for (const EvalReport &r : reports)
        rows.push_back({r.agent, r.graph_set, r.graphs.size(), r.episodes_per_graph, r.mean_ratio, r.lower_quartile,
                        r.upper_quartile, r.single_try_mean_ratio, r.wall_time_s, r.seconds_per_action});
    return rows;
}

void write_summary_csv(std::ostream &out, const std::vector<SummaryRow> &rows) {
    out << "agent,graph_set,graphs,episodes_per_graph,mean_ratio,lower_quartile,upper_quartile,"
           "single_try_mean_ratio,wall_time_s,seconds_per_action\n";
    for (const SummaryRow &r : rows)
        out << r.agent << ',' << r.graph_set << ',' << r.graphs << ',' << r.episodes_per_graph << ','
            << fmt(r.mean_ratio) << ',' << fmt(r.lower_quartile) << ',' << fmt(r.upper_quartile) << ','
            << fmt(r.single_try_mean_ratio) << ',' << fmt(r.wall_time_s) << ',' << fmt(r.seconds_per_action) << '\n';
}

std::size_t gset_episodes(const std::string &name) {
    if (name.size() < 2 || (name[0] != 'G' && name[0] != 'g')) throw ConfigError("not a GSet name: " + name);
    int k = 0;
    auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
    if (ec != std::errc{} || ptr != name.data() + name.size()) throw ConfigError("not a GSet name: " + name);
    if (k >= 1 && k <= 10) return 50;
    if (k >= 22 && k <= 32) return 1;
    throw ConfigError("no evaluation protocol for GSet instance " + name);
}

// ---------------------------------------------------------------------------
// Behaviour

BehaviorTrace trace_episode(const QNetParams &params, const EnvConfig &env, std::shared_ptr<const Graph> g,
                            std::uint64_t seed) {
    Environment e(std::move(g), env);
    e.reset(seed);
    BehaviorTrace trace;
    EpisodeOutcome o = run_greedy_episode(params, e, [&](const StepInfo &info) {
        BehaviorStep s;
        s.step = info.step;
        s.action = info.action;
        s.repeat = info.repeat;
        s.non_greedy = info.gain < info.best_allowed_gain;
        s.negative = info.gain < 0.0;
        s.locally_optimal = info.result.locally_optimal;
        s.revisited = info.result.revisited;
        s.cut = info.cut;
        s.best_cut = info.best_cut;
        trace.steps.push_back(s);
    });
    trace.best_cut = o.best_cut;
    for (BehaviorStep &s : trace.steps) s.mc_found = s.best_cut >= trace.best_cut;
    return trace;
}

BehaviorTrace behavior_trace(const Checkpoint &checkpoint, std::shared_ptr<const Graph> g, std::uint64_t seed) {
    if (!checkpoint.env.reversible)
        throw ConfigError("behaviour traces need a reversible agent; repeats are undefined otherwise");
    return trace_episode(checkpoint.params, checkpoint.env, std::move(g), seed);
}

BehaviorSeries behavior_series(const std::vector<BehaviorTrace> &traces, std::size_t window) {
    if (window == 0) throw ConfigError("moving-average window must be positive");
    std::size_t length = 0;
    for (const BehaviorTrace &t : traces) length = std::max(length, t.steps.size());
    std::vector<std::array<double, kBehaviorMetricCount>> raw(length);
    BehaviorSeries series;
    series.samples.assign(length, 0);
    for (auto &r : raw) r.fill(0.0);
    for (const BehaviorTrace &t : traces) {
        for (std::size_t i = 0; i < t.steps.size(); ++i) {
            const BehaviorStep &s = t.steps[i];
            const bool flags[kBehaviorMetricCount] = {s.repeat,          s.non_greedy, s.negative,
                                                      s.locally_optimal, s.revisited,  s.mc_found};
            for (std::size_t k = 0; k < kBehaviorMetricCount; ++k) raw[i][k] += flags[k] ? 1.0 : 0.0;
            ++series.samples[i];
        }
    }
    for (std::size_t i = 0; i < length; ++i)
        for (double &x : raw[i]) x /= static_cast<double>(series.samples[i]);

    series.rows.resize(length);
    for (std::size_t i = 0; i < length; ++i) {
        const std::size_t from = i + 1 >= window ? i + 1 - window : 0;
        for (std::size_t k = 0; k < kBehaviorMetricCount; ++k) {
            double sum = 0.0;
            for (std::size_t j = from; j <= i; ++j) sum += raw[j][k];
            series.rows[i][k] = sum / static_cast<double>(i + 1 - from);
        }
    }
    return series;
}

void write_behavior_csv(std::ostream &out, const BehaviorSeries &series) {
    out << "step";
    for (const char *name : kBehaviorMetricNames) out << ',' << name;
    out << ",samples\n";
    for (std::size_t i = 0; i < series.rows.size(); ++i) {
        out << i + 1;
        for (double x : series.rows[i]) out << ',' << fmt(x);
        out << ',' << series.samples[i] << '\n';
    }
}

} // namespace ecodqn
