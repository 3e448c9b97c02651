#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecodqn/baselines.hpp"
#include "ecodqn/benchmark.hpp"
#include "ecodqn/error.hpp"
#include "ecodqn/training.hpp"
#include "oracles.hpp"

using namespace ecodqn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    fs::path p = fs::temp_directory_path() / ("ecodqn_bench_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Q_v equals the gain observation, so greedy on Q is greedy on gain.
QNetParams gain_policy() {
    QNetParams p = QNetParams::zeros({7, 2, 1});
    p.theta1(1, 0) = 1.0;
    p.theta1(1, 1) = -1.0;
    p.theta5[0](0, 0) = 1.0;
    p.theta5[0](1, 1) = 1.0;
    p.theta7(2) = 1.0;
    p.theta7(3) = -1.0;
    return p;
}

std::vector<CorpusEntry> small_corpus(std::size_t count, std::size_t n, std::uint64_t seed) {
    std::vector<CorpusEntry> out;
    GraphSpec spec;
    spec.vertices = n;
    for (std::size_t i = 0; i < count; ++i)
        out.push_back({"g" + std::to_string(i), "", std::make_shared<const Graph>(spec.sample(derive_seed(seed, i)))});
    return out;
}

std::vector<Reference> exact_refs(const std::vector<CorpusEntry> &c) {
    std::vector<Reference> r;
    for (const auto &e : c) r.push_back(reference_cut(*e.graph, nullptr, 0));
    return r;
}

} // namespace

TEST(Ratio, Examples) {
    EXPECT_EQ(approximation_ratio(10, 10), 1.0);
    EXPECT_DOUBLE_EQ(approximation_ratio(9, 10), 0.9);
    EXPECT_THROW(approximation_ratio(1, 0), DataError);
    EXPECT_THROW(approximation_ratio(1, -2), DataError);
}

TEST(Quantile, HandComputed) {
    // sorted: 1 2 3 4 5 ; inclusive positions q*(n-1)
    std::vector<double> v = {5, 1, 4, 2, 3};
    EXPECT_DOUBLE_EQ(quantile(v, 0.25), 2.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.5), 3.0);
    EXPECT_DOUBLE_EQ(quantile(v, 0.75), 4.0);
    std::vector<double> w = {0.9, 1.0, 0.8, 0.95};
    // sorted 0.8 0.9 0.95 1.0; 0.25 -> pos 0.75 -> 0.875 ; 0.75 -> pos 2.25 -> 0.9625
    EXPECT_NEAR(quantile(w, 0.25), 0.875, 1e-15);
    EXPECT_NEAR(quantile(w, 0.75), 0.9625, 1e-15);
    EXPECT_EQ(quantile({7.0}, 0.25), 7.0);
    EXPECT_THROW(quantile({}, 0.5), DataError);
}

TEST(Corpus, WriteReadDeterministic) {
    GraphSpec spec;
    spec.vertices = 15;
    const fs::path a = scratch("corpus_a"), b = scratch("corpus_b");
    auto wa = write_corpus(a.string(), spec, 4, 3);
    write_corpus(b.string(), spec, 4, 3);
    for (const auto &name : {"index.tsv", "graph_0000.txt", "graph_0003.txt"})
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;

    auto ra = read_corpus(a.string());
    ASSERT_EQ(ra.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(ra[i].id, wa[i].id);
        EXPECT_EQ(*ra[i].graph, *wa[i].graph);
    }
    auto single = read_corpus((a / "graph_0002.txt").string());
    ASSERT_EQ(single.size(), 1u);
    EXPECT_EQ(*single[0].graph, *wa[2].graph);

    // Tampering with a graph file breaks the index hash.
    std::ofstream(a / "graph_0001.txt") << "3 1\n1 2 1\n";
    EXPECT_THROW(read_corpus(a.string()), DataError);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Registry, AppendOnlyBest) {
    const fs::path dir = scratch("registry");
    fs::create_directories(dir);
    const std::string path = (dir / "registry.jsonl").string();
    Graph g = assign_signed_weights(generate_er(30, 0.3, 1), 5);
    SolveResult weak = mca_irrev(g);
    SolveResult strong = mca_best(g, 20, 2);
    ASSERT_GT(strong.cut, weak.cut);
    {
        RunRegistry r(path);
        EXPECT_TRUE(r.offer(g, weak.cut, "mca-irrev", weak.membership));
        EXPECT_FALSE(r.offer(g, weak.cut, "again", weak.membership));
        EXPECT_TRUE(r.offer(g, strong.cut, "mca", strong.membership));
        SolveResult w2 = mca_irrev(g);
        EXPECT_FALSE(r.offer(g, w2.cut, "worse", w2.membership));
        // A claimed cut that the membership does not reproduce is refused.
        EXPECT_THROW(r.offer(g, strong.cut + 5, "liar", strong.membership), DataError);
    }
    const std::string text = slurp(path);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    RunRegistry again(path);
    auto best = again.best(g.content_hash());
    ASSERT_TRUE(best);
    EXPECT_EQ(best->cut, strong.cut);
    EXPECT_EQ(best->method, "mca");
    EXPECT_EQ(cut_value(g, parse_membership(best->membership)), strong.cut);
    EXPECT_FALSE(again.best(g.content_hash() ^ 1));
    fs::remove_all(dir);
}

TEST(Reference, ExactForSmallAndSparseGraphs) {
    Graph g = assign_signed_weights(generate_er(14, 0.4, 2), 3);
    Reference r = reference_cut(g, nullptr, 0);
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.cut, oracle::max_cut(g));
    Graph dense = assign_signed_weights(generate_er(80, 0.9, 2), 3);
    Reference d = reference_cut(dense, nullptr, 0);
    EXPECT_FALSE(d.exact);
    EXPECT_EQ(d.method, "mca");
}

TEST(Evaluate, DeterministicAndConsistent) {
    auto corpus = small_corpus(6, 12, 4);
    auto refs = exact_refs(corpus);
    QNetParams p = init_params({7, 8, 2}, 3);
    EvalOptions o;
    o.episodes = 5;
    o.seed = 11;
    o.threads = 2;
    EvalReport a = evaluate(agent_runner(p, EnvConfig::eco()), corpus, refs, o);
    o.threads = 1;
    EvalReport b = evaluate(agent_runner(p, EnvConfig::eco()), corpus, refs, o);
    std::stringstream sa, sb;
    write_episode_csv(sa, a);
    write_episode_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    ASSERT_EQ(a.graphs.size(), 6u);
    const std::string csv = sa.str();
    const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    EXPECT_EQ(lines, 1 + 6 * 5u);

    for (const auto &ge : a.graphs) {
        ASSERT_EQ(ge.episode_cuts.size(), 5u);
        EXPECT_EQ(ge.best_cut, *std::max_element(ge.episode_cuts.begin(), ge.episode_cuts.end()));
        EXPECT_EQ(cut_value(*corpus[std::stoul(ge.id.substr(1))].graph, ge.best_membership), ge.best_cut);
        EXPECT_LE(ge.ratio, 1.0);
        EXPECT_GE(ge.ratio, ge.mean_episode_ratio);
    }
    EXPECT_GE(a.mean_ratio, a.single_try_mean_ratio);
    EXPECT_LE(a.lower_quartile, a.upper_quartile);
}

TEST(Evaluate, MoreEpisodesNeverHurt) {
    auto corpus = small_corpus(5, 16, 8);
    auto refs = exact_refs(corpus);
    EvalOptions o;
    o.seed = 2;
    o.episodes = 1;
    EvalReport one = evaluate(baseline_runner("mca-rev"), corpus, refs, o);
    o.episodes = 50;
    EvalReport many = evaluate(baseline_runner("mca-rev"), corpus, refs, o);
    for (std::size_t i = 0; i < corpus.size(); ++i) EXPECT_GE(many.graphs[i].best_cut, one.graphs[i].best_cut);
    EXPECT_THROW(baseline_runner("simcim"), ConfigError);
}

TEST(Evaluate, IrreversibleAgentSingleEpisodeRepeatable) {
    auto corpus = small_corpus(3, 16, 1);
    auto refs = exact_refs(corpus);
    Checkpoint ck{init_params({7, 8, 2}, 5), EnvConfig::s2v(), std::nullopt};
    EvalOptions o;
    o.episodes = 1;
    EvalReport a = evaluate_agent(ck, corpus, refs, o), b = evaluate_agent(ck, corpus, refs, o);
    std::stringstream sa, sb;
    write_report_jsonl(sa, a);
    write_report_jsonl(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_THROW(evaluate_agent(ck, corpus, refs, o, QNetDims{7, 64, 3}), ConfigError);
}

TEST(Aggregate, PassThroughAndCsv) {
    EvalReport r;
    r.agent = "eco";
    r.graph_set = "er20";
    r.episodes_per_graph = 50;
    r.graphs.resize(4);
    r.mean_ratio = 0.98;
    r.lower_quartile = 0.97;
    r.upper_quartile = 1.0;
    r.single_try_mean_ratio = 0.9;
    r.wall_time_s = 2.5;
    auto rows = aggregate({r});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].agent, "eco");
    EXPECT_EQ(rows[0].graphs, 4u);
    EXPECT_EQ(rows[0].episodes_per_graph, 50u);
    EXPECT_EQ(rows[0].mean_ratio, 0.98);
    EXPECT_EQ(rows[0].lower_quartile, 0.97);
    EXPECT_EQ(rows[0].upper_quartile, 1.0);
    std::stringstream ss;
    write_summary_csv(ss, rows);
    EXPECT_NE(ss.str().find("eco,er20,4,50,0.98,0.97,1,0.9,2.5"), std::string::npos) << ss.str();
    EXPECT_THROW(aggregate({}), DataError);
}

TEST(Aggregate, QuartilesFromGraphRatios) {
    auto corpus = small_corpus(5, 10, 6);
    EvalOptions o;
    o.episodes = 1;
    EvalReport first = evaluate(baseline_runner("mca-irrev"), corpus, exact_refs(corpus), o);
    std::vector<double> ratios;
    for (const auto &g : first.graphs) ratios.push_back(g.ratio);
    EXPECT_DOUBLE_EQ(first.lower_quartile, quantile(ratios, 0.25));
    EXPECT_DOUBLE_EQ(first.upper_quartile, quantile(ratios, 0.75));
    double mean = 0;
    for (double x : ratios) mean += x / 5;
    EXPECT_NEAR(first.mean_ratio, mean, 1e-15);
}

TEST(Gset, EpisodeProtocol) {
    EXPECT_EQ(gset_episodes("G1"), 50u);
    EXPECT_EQ(gset_episodes("G10"), 50u);
    EXPECT_EQ(gset_episodes("G22"), 1u);
    EXPECT_EQ(gset_episodes("G32"), 1u);
    EXPECT_THROW(gset_episodes("G11"), ConfigError);
    EXPECT_THROW(gset_episodes("foo"), ConfigError);
}

TEST(Behavior, GainGreedyHasNoNegativeStepsBeforeLocalOptimum) {
    QNetParams p = gain_policy();
    GraphSpec spec;
    spec.vertices = 20;
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto g = std::make_shared<const Graph>(spec.sample(s));
        BehaviorTrace t = trace_episode(p, EnvConfig::eco(), g, s);
        ASSERT_EQ(t.steps.size(), 40u);
        bool reached = false;
        for (const auto &st : t.steps) {
            if (!reached) {
                EXPECT_FALSE(st.negative);
                EXPECT_FALSE(st.non_greedy);
            }
            reached |= st.locally_optimal;
        }
        EXPECT_TRUE(reached);
    }
}

TEST(Behavior, SeriesShapeAndMonotoneMcFound) {
    QNetParams p = init_params({7, 8, 2}, 9);
    GraphSpec spec;
    spec.vertices = 12;
    std::vector<BehaviorTrace> traces;
    for (std::uint64_t s = 0; s < 15; ++s) {
        auto g = std::make_shared<const Graph>(spec.sample(s));
        traces.push_back(behavior_trace(Checkpoint{p, EnvConfig::eco(), std::nullopt}, g, s));
        bool found = false;
        for (const auto &st : traces.back().steps) {
            if (found) EXPECT_TRUE(st.mc_found);
            found |= st.mc_found;
        }
        EXPECT_TRUE(found);
        EXPECT_TRUE(traces.back().steps.back().mc_found);
    }
    BehaviorSeries series = behavior_series(traces, 10);
    ASSERT_EQ(series.rows.size(), 24u);
    for (std::size_t i = 1; i < series.rows.size(); ++i) EXPECT_GE(series.rows[i][5], series.rows[i - 1][5] - 1e-12);
    for (const auto &r : series.rows)
        for (double v : r) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    EXPECT_DOUBLE_EQ(behavior_series(traces, 1).rows.back()[5], 1.0);
    std::stringstream ss;
    write_behavior_csv(ss, series);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')),
              "step,repeat,non_greedy,negative,locally_optimal,revisited,mc_found,samples");
    EXPECT_THROW(behavior_series(traces, 0), ConfigError);
}

TEST(Behavior, IrreversibleCheckpointRejected) {
    Checkpoint ck{init_params({7, 8, 2}, 1), EnvConfig::s2v(), std::nullopt};
    GraphSpec spec;
    spec.vertices = 10;
    auto g = std::make_shared<const Graph>(spec.sample(1));
    EXPECT_THROW(behavior_trace(ck, g, 0), ConfigError);
    // The unrestricted tracer still works and never repeats a vertex.
    BehaviorTrace t = trace_episode(ck.params, ck.env, g, 0);
    for (const auto &s : t.steps) EXPECT_FALSE(s.repeat);
}
