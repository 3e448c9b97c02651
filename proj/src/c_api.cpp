#include "ecodqn/c_api.h"

#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecodqn/baselines.hpp"
#include "ecodqn/benchmark.hpp"
#include "ecodqn/error.hpp"
#include "ecodqn/exact.hpp"
#include "ecodqn/parallel.hpp"
#include "ecodqn/training.hpp"

#ifndef ECODQN_VERSION
#define ECODQN_VERSION "0.0.0"
#endif

struct ecodqn_graph {
    std::shared_ptr<const ecodqn::Graph> graph;
};

struct ecodqn_corpus {
    std::vector<ecodqn::CorpusEntry> entries;
    std::vector<ecodqn_graph> handles;
};

struct ecodqn_config {
    std::map<std::string, std::string> kv;
    ecodqn::TrainConfig cfg;
    std::string text;
};

struct ecodqn_report {
    ecodqn::EvalReport report;
};

struct ecodqn_solution {
    std::string method;
    double cut = 0.0;
    std::vector<std::uint8_t> membership;
    std::size_t episodes = 0;
    double seconds = 0.0;
};

namespace {

thread_local std::string g_last_error;

ecodqn_status fail(ecodqn_status s, const std::string &msg) {
    g_last_error = msg;
    return s;
}

void require(bool ok, const char *what) {
    if (!ok) throw std::invalid_argument(what);
}

ecodqn::GraphSpec make_spec(const char *family, size_t vertices, double er_p, size_t ba_attach, int signed_weights) {
    require(family != nullptr, "family is NULL");
    ecodqn::GraphSpec spec;
    spec.family = ecodqn::parse_graph_family(family);
    spec.vertices = vertices;
    spec.er_p = er_p;
    spec.ba_attach = ba_attach;
    spec.signed_weights = signed_weights != 0;
    spec.validate();
    return spec;
}

template <typename Fn>
ecodqn_status call(Fn &&fn) {
    g_last_error.clear();
    try {
        fn();
        return ECODQN_OK;
    } catch (const std::invalid_argument &e) {
        return fail(ECODQN_ERR_ARGUMENT, e.what());
    } catch (const ecodqn::Error &e) {
        return fail(static_cast<ecodqn_status>(static_cast<int>(e.kind())), e.what());
    } catch (const std::bad_alloc &) {
        return fail(ECODQN_ERR_INTERNAL, "out of memory");
    } catch (const std::exception &e) {
        return fail(ECODQN_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(ECODQN_ERR_INTERNAL, "unknown error");
    }
}

} // namespace

extern "C" {

const char *ecodqn_last_error(void) { return g_last_error.c_str(); }

const char *ecodqn_version(void) { return ECODQN_VERSION; }

// ---- graphs

ecodqn_status ecodqn_graph_generate(const char *family, size_t vertices, double er_p, size_t ba_attach,
                                    int signed_weights, uint64_t seed, ecodqn_graph **out) {
    return call([&] {
        require(out != nullptr, "out is NULL");
        auto spec = make_spec(family, vertices, er_p, ba_attach, signed_weights);
        *out = new ecodqn_graph{std::make_shared<const ecodqn::Graph>(spec.sample(seed))};
    });
}

ecodqn_status ecodqn_graph_read(const char *path, ecodqn_graph **out) {
    return call([&] {
        require(path != nullptr && out != nullptr, "path or out is NULL");
        *out = new ecodqn_graph{std::make_shared<const ecodqn::Graph>(ecodqn::read_graph_file(path))};
    });
}

ecodqn_status ecodqn_graph_write(const ecodqn_graph *g, const char *path) {
    return call([&] {
        require(g != nullptr && path != nullptr, "graph or path is NULL");
        ecodqn::write_graph_file(*g->graph, path);
    });
}

size_t ecodqn_graph_vertices(const ecodqn_graph *g) { return g ? g->graph->num_vertices() : 0; }
size_t ecodqn_graph_edges(const ecodqn_graph *g) { return g ? g->graph->num_edges() : 0; }
uint64_t ecodqn_graph_hash(const ecodqn_graph *g) { return g ? g->graph->content_hash() : 0; }

ecodqn_status ecodqn_graph_cut(const ecodqn_graph *g, const uint8_t *membership, double *out) {
    return call([&] {
        require(g != nullptr && membership != nullptr && out != nullptr, "NULL argument");
        const std::size_t n = g->graph->num_vertices();
        std::vector<std::uint8_t> bits(membership, membership + n);
        for (auto &b : bits) b = b ? 1 : 0;
        *out = ecodqn::cut_value(*g->graph, ecodqn::Membership(std::move(bits)));
    });
}

void ecodqn_graph_free(ecodqn_graph *g) { delete g; }

// ---- corpora

ecodqn_status ecodqn_corpus_generate(const char *dir, const char *family, size_t vertices, double er_p,
                                     size_t ba_attach, int signed_weights, size_t count, uint64_t seed) {
    return call([&] {
        require(dir != nullptr, "dir is NULL");
        ecodqn::write_corpus(dir, make_spec(family, vertices, er_p, ba_attach, signed_weights), count, seed);
    });
}

ecodqn_status ecodqn_corpus_open(const char *path, ecodqn_corpus **out) {
    return call([&] {
        require(path != nullptr && out != nullptr, "path or out is NULL");
        auto c = std::make_unique<ecodqn_corpus>();
        c->entries = ecodqn::read_corpus(path);
        for (const auto &e : c->entries) c->handles.push_back({e.graph});
        *out = c.release();
    });
}

size_t ecodqn_corpus_size(const ecodqn_corpus *c) { return c ? c->entries.size() : 0; }

const ecodqn_graph *ecodqn_corpus_graph(const ecodqn_corpus *c, size_t i) {
    return c && i < c->handles.size() ? &c->handles[i] : nullptr;
}

const char *ecodqn_corpus_id(const ecodqn_corpus *c, size_t i) {
    return c && i < c->entries.size() ? c->entries[i].id.c_str() : nullptr;
}

void ecodqn_corpus_free(ecodqn_corpus *c) { delete c; }

// ---- training

ecodqn_status ecodqn_config_load(const char *path, ecodqn_config **out) {
    return call([&] {
        require(path != nullptr && out != nullptr, "path or out is NULL");
        auto c = std::make_unique<ecodqn_config>();
        c->cfg = ecodqn::TrainConfig::load(path);
        c->kv = c->cfg.to_key_values();
        *out = c.release();
    });
}

ecodqn_status ecodqn_config_parse(const char *text, ecodqn_config **out) {
    return call([&] {
        require(text != nullptr && out != nullptr, "text or out is NULL");
        auto c = std::make_unique<ecodqn_config>();
        c->cfg = ecodqn::TrainConfig::parse(text);
        c->kv = c->cfg.to_key_values();
        *out = c.release();
    });
}

ecodqn_status ecodqn_config_set(ecodqn_config *cfg, const char *key, const char *value) {
    return call([&] {
        require(cfg != nullptr && key != nullptr && value != nullptr, "NULL argument");
        auto kv = cfg->kv;
        kv[key] = value;
        cfg->cfg = ecodqn::TrainConfig::from_key_values(kv);
        cfg->kv = cfg->cfg.to_key_values();
    });
}

const char *ecodqn_config_text(ecodqn_config *cfg) {
    if (!cfg) return "";
    cfg->text = cfg->cfg.to_text();
    return cfg->text.c_str();
}

void ecodqn_config_free(ecodqn_config *cfg) { delete cfg; }

ecodqn_status ecodqn_train(const ecodqn_config *cfg, const char *resume_path, const char *checkpoint_path,
                           const char *curve_path, ecodqn_progress_fn progress, void *user) {
    return call([&] {
        require(checkpoint_path != nullptr && curve_path != nullptr, "output path is NULL");
        require(cfg != nullptr || resume_path != nullptr, "need a config or a checkpoint to resume");
        std::unique_ptr<ecodqn::Trainer> trainer =
            resume_path ? std::make_unique<ecodqn::Trainer>(ecodqn::load_checkpoint(resume_path))
                        : std::make_unique<ecodqn::Trainer>(cfg->cfg);
        const auto &tc = trainer->config();
        const std::size_t chunk = tc.eval_period > 0 ? tc.eval_period : std::max<std::size_t>(1, tc.total_steps / 20);
        while (!trainer->finished()) {
            const std::size_t next = (trainer->env_steps() / chunk + 1) * chunk;
            trainer->run_until(next);
            if (progress) {
                const double ratio =
                    trainer->curve().empty() ? 0.0 : trainer->curve().back().holdout_mean_approx_ratio;
                if (progress(trainer->env_steps(), tc.total_steps, ratio, user) != 0) break;
            }
        }
        ecodqn::save_checkpoint(trainer->checkpoint(), checkpoint_path);
        std::ofstream out(curve_path);
        if (!out) throw ecodqn::DataError(std::string("cannot write ") + curve_path);
        ecodqn::write_curve_csv(out, trainer->curve());
        if (!out) throw ecodqn::DataError(std::string("failed writing ") + curve_path);
    });
}

// ---- evaluation

ecodqn_status ecodqn_evaluate(const char *method, const char *checkpoint_path, const ecodqn_corpus *corpus,
                              const ecodqn_eval_options *opts, ecodqn_report **out) {
    return call([&] {
        require(method != nullptr && corpus != nullptr && opts != nullptr && out != nullptr, "NULL argument");
        const std::string m = method;
        std::optional<ecodqn::Checkpoint> ck;
        ecodqn::EpisodeRunner runner;
        if (m == "eco") {
            if (checkpoint_path == nullptr) throw ecodqn::ConfigError("method eco needs a checkpoint");
            ck = ecodqn::load_checkpoint(checkpoint_path);
            runner = ecodqn::agent_runner(ck->params, ck->env);
        } else {
            runner = ecodqn::baseline_runner(m);
        }

        std::unique_ptr<ecodqn::RunRegistry> registry;
        if (opts->registry_path) registry = std::make_unique<ecodqn::RunRegistry>(opts->registry_path);
        const auto &graphs = corpus->entries;
        std::vector<ecodqn::Reference> refs(graphs.size());
        const std::uint64_t ref_seed = ecodqn::derive_seed(opts->seed, "reference");
        std::vector<std::optional<ecodqn::ExactResult>> exact(graphs.size());
        ecodqn::parallel_for(graphs.size(), std::max<std::size_t>(1, opts->threads), [&](std::size_t i) {
            exact[i] = ecodqn::exact_opt(*graphs[i].graph);
        });
        // Registry reads and appends stay on this thread.
        for (std::size_t i = 0; i < graphs.size(); ++i) {
            if (exact[i]) {
                refs[i] = {exact[i]->cut, true, "exact"};
                if (registry) registry->offer(*graphs[i].graph, exact[i]->cut, "exact", exact[i]->membership);
            } else {
                refs[i] = ecodqn::reference_cut(*graphs[i].graph, registry.get(), ecodqn::derive_seed(ref_seed, i));
            }
        }

        ecodqn::EvalOptions eo;
        eo.episodes = opts->episodes;
        eo.seed = opts->seed;
        eo.threads = std::max<std::size_t>(1, opts->threads);
        eo.agent = opts->agent ? opts->agent : m;
        eo.graph_set = opts->graph_set ? opts->graph_set : "graphs";
        auto report = std::make_unique<ecodqn_report>();
        report->report = ecodqn::evaluate(runner, graphs, refs, eo);
        if (registry)
            for (std::size_t i = 0; i < graphs.size(); ++i)
                registry->offer(*graphs[i].graph, report->report.graphs[i].best_cut, eo.agent,
                                report->report.graphs[i].best_membership);
        *out = report.release();
    });
}

double ecodqn_report_mean_ratio(const ecodqn_report *r) { return r ? r->report.mean_ratio : 0.0; }
double ecodqn_report_lower_quartile(const ecodqn_report *r) { return r ? r->report.lower_quartile : 0.0; }
double ecodqn_report_upper_quartile(const ecodqn_report *r) { return r ? r->report.upper_quartile : 0.0; }
double ecodqn_report_single_try_ratio(const ecodqn_report *r) { return r ? r->report.single_try_mean_ratio : 0.0; }
double ecodqn_report_seconds_per_action(const ecodqn_report *r) { return r ? r->report.seconds_per_action : 0.0; }

size_t ecodqn_report_episode_count(const ecodqn_report *r) {
    if (!r) return 0;
    std::size_t n = 0;
    for (const auto &g : r->report.graphs) n += g.episode_cuts.size();
    return n;
}

ecodqn_status ecodqn_report_write(const ecodqn_report *r, const char *episodes_csv, const char *graphs_jsonl,
                                  const char *summary_csv) {
    return call([&] {
        require(r != nullptr, "report is NULL");
        auto write = [](const char *path, auto &&fn) {
            if (!path) return;
            std::ofstream out(path);
            if (!out) throw ecodqn::DataError(std::string("cannot write ") + path);
            fn(out);
            if (!out) throw ecodqn::DataError(std::string("failed writing ") + path);
        };
        write(episodes_csv, [&](std::ostream &o) { ecodqn::write_episode_csv(o, r->report); });
        write(graphs_jsonl, [&](std::ostream &o) { ecodqn::write_report_jsonl(o, r->report); });
        write(summary_csv, [&](std::ostream &o) { ecodqn::write_summary_csv(o, ecodqn::aggregate({r->report})); });
    });
}

void ecodqn_report_free(ecodqn_report *r) { delete r; }

// ---- single instances

ecodqn_status ecodqn_solve(const ecodqn_graph *g, const char *method, const char *checkpoint_path, size_t episodes,
                           uint64_t seed, size_t threads, ecodqn_solution **out) {
    return call([&] {
        require(g != nullptr && method != nullptr && out != nullptr, "NULL argument");
        if (episodes == 0) throw ecodqn::ConfigError("episodes must be positive");
        const auto start = std::chrono::steady_clock::now();
        const std::string m = method;
        auto sol = std::make_unique<ecodqn_solution>();
        sol->method = m;
        ecodqn::Membership best;
        if (m == "exact") {
            auto r = ecodqn::exact_opt(*g->graph);
            if (!r)
                throw ecodqn::ConfigError("graph is too large and too dense for the exact solver (" +
                                          std::to_string(g->graph->num_vertices()) + " vertices)");
            best = std::move(r->membership);
            sol->episodes = 1;
        } else if (m == "mca-irrev") {
            best = ecodqn::mca_irrev(*g->graph).membership;
            sol->episodes = 1;
        } else if (m == "mca-rev" || m == "eco") {
            std::optional<ecodqn::Checkpoint> ck;
            ecodqn::EpisodeRunner runner;
            if (m == "eco") {
                if (checkpoint_path == nullptr) throw ecodqn::ConfigError("method eco needs a checkpoint");
                ck = ecodqn::load_checkpoint(checkpoint_path);
                runner = ecodqn::agent_runner(ck->params, ck->env);
            } else {
                runner = ecodqn::baseline_runner(m);
            }
            std::vector<ecodqn::EpisodeRun> runs(episodes);
            ecodqn::parallel_for(episodes, std::max<std::size_t>(1, threads), [&](std::size_t e) {
                runs[e] = runner(g->graph, ecodqn::episode_seed(seed, 0, e));
            });
            std::size_t arg = 0;
            for (std::size_t e = 1; e < episodes; ++e)
                if (runs[e].cut > runs[arg].cut) arg = e;
            best = std::move(runs[arg].membership);
            sol->episodes = episodes;
        } else {
            throw ecodqn::ConfigError("unknown method '" + m + "' (expected eco, mca-rev, mca-irrev or exact)");
        }
        sol->cut = ecodqn::cut_value(*g->graph, best);
        sol->membership = best.bits();
        sol->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        *out = sol.release();
    });
}

double ecodqn_solution_cut(const ecodqn_solution *s) { return s ? s->cut : 0.0; }
double ecodqn_solution_seconds(const ecodqn_solution *s) { return s ? s->seconds : 0.0; }
size_t ecodqn_solution_vertices(const ecodqn_solution *s) { return s ? s->membership.size() : 0; }
const uint8_t *ecodqn_solution_membership(const ecodqn_solution *s) { return s ? s->membership.data() : nullptr; }

ecodqn_status ecodqn_solution_write(const ecodqn_solution *s, const char *path) {
    return call([&] {
        require(s != nullptr && path != nullptr, "NULL argument");
        std::string bits;
        for (auto b : s->membership) bits.push_back(b ? '1' : '0');
        nlohmann::json j = {{"method", s->method},
                            {"cut", s->cut},
                            {"vertices", s->membership.size()},
                            {"episodes", s->episodes},
                            {"membership", bits},
                            {"seconds", s->seconds}};
        std::ofstream out(path);
        if (!out) throw ecodqn::DataError(std::string("cannot write ") + path);
        out << j.dump(2) << '\n';
        if (!out) throw ecodqn::DataError(std::string("failed writing ") + path);
    });
}

void ecodqn_solution_free(ecodqn_solution *s) { delete s; }

// ---- behaviour

ecodqn_status ecodqn_behavior(const char *checkpoint_path, const ecodqn_corpus *corpus, uint64_t seed, size_t window,
                              size_t threads, const char *series_csv, size_t *steps_out) {
    return call([&] {
        require(checkpoint_path != nullptr && corpus != nullptr && series_csv != nullptr, "NULL argument");
        const ecodqn::Checkpoint ck = ecodqn::load_checkpoint(checkpoint_path);
        if (!ck.env.reversible)
            throw ecodqn::ConfigError("behaviour traces need a reversible agent; repeats are undefined otherwise");
        const auto &graphs = corpus->entries;
        std::vector<ecodqn::BehaviorTrace> traces(graphs.size());
        ecodqn::parallel_for(graphs.size(), std::max<std::size_t>(1, threads), [&](std::size_t i) {
            traces[i] = ecodqn::behavior_trace(ck, graphs[i].graph, ecodqn::derive_seed(seed, i));
        });
        const auto series = ecodqn::behavior_series(traces, window);
        std::ofstream out(series_csv);
        if (!out) throw ecodqn::DataError(std::string("cannot write ") + series_csv);
        ecodqn::write_behavior_csv(out, series);
        if (!out) throw ecodqn::DataError(std::string("failed writing ") + series_csv);
        if (steps_out) *steps_out = series.rows.size();
    });
}

} // extern "C"
