#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ecodqn/c_api.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    fs::path p = fs::temp_directory_path() / ("ecodqn_capi_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const char *kTinyConfig = "total_steps = 300\n"
                          "graph_vertices = 8\n"
                          "er_p = 0.4\n"
                          "seed = 3\n"
                          "embedding = 8\n"
                          "rounds = 2\n"
                          "minibatch_size = 16\n"
                          "update_every = 4\n"
                          "replay_capacity = 100\n"
                          "holdout_size = 4\n"
                          "eval_period = 100\n";

int count_calls(size_t, size_t, double, void *user) {
    ++*static_cast<int *>(user);
    return 0;
}

int stop_now(size_t, size_t, double, void *) { return 1; }

} // namespace

TEST(CApi, VersionAndErrors) {
    EXPECT_GT(std::strlen(ecodqn_version()), 0u);
    ecodqn_graph *g = nullptr;
    EXPECT_EQ(ecodqn_graph_generate("er", 10, 0.3, 2, 1, 1, nullptr), ECODQN_ERR_ARGUMENT);
    EXPECT_EQ(ecodqn_graph_generate("lattice", 10, 0.3, 2, 1, 1, &g), ECODQN_ERR_CONFIG);
    EXPECT_EQ(g, nullptr);
    EXPECT_NE(std::string(ecodqn_last_error()).find("lattice"), std::string::npos);
    EXPECT_EQ(ecodqn_graph_read("/nonexistent/graph.txt", &g), ECODQN_ERR_DATA);
}

TEST(CApi, GraphLifecycle) {
    ecodqn_graph *g = nullptr;
    ASSERT_EQ(ecodqn_graph_generate("ba", 20, 0, 2, 1, 5, &g), ECODQN_OK);
    EXPECT_EQ(ecodqn_graph_vertices(g), 20u);
    EXPECT_EQ(ecodqn_graph_edges(g), 2u * 18u);

    const fs::path dir = scratch("graph");
    const std::string path = (dir / "g.txt").string();
    ASSERT_EQ(ecodqn_graph_write(g, path.c_str()), ECODQN_OK);
    ecodqn_graph *h = nullptr;
    ASSERT_EQ(ecodqn_graph_read(path.c_str(), &h), ECODQN_OK);
    EXPECT_EQ(ecodqn_graph_hash(g), ecodqn_graph_hash(h));

    std::vector<uint8_t> none(20, 0), all(20, 1);
    double c0 = -1, c1 = -1;
    ASSERT_EQ(ecodqn_graph_cut(g, none.data(), &c0), ECODQN_OK);
    ASSERT_EQ(ecodqn_graph_cut(g, all.data(), &c1), ECODQN_OK);
    EXPECT_EQ(c0, 0.0);
    EXPECT_EQ(c1, 0.0);
    ecodqn_graph_free(g);
    ecodqn_graph_free(h);
    ecodqn_graph_free(nullptr);
    fs::remove_all(dir);
}

TEST(CApi, ConfigValidation) {
    ecodqn_config *cfg = nullptr;
    EXPECT_EQ(ecodqn_config_parse("total_steps = 5\nseed = 1\n", &cfg), ECODQN_ERR_CONFIG);
    EXPECT_NE(std::string(ecodqn_last_error()).find("graph_vertices"), std::string::npos);
    EXPECT_EQ(ecodqn_config_parse("bogus = 1\n", &cfg), ECODQN_ERR_CONFIG);
    ASSERT_EQ(ecodqn_config_parse(kTinyConfig, &cfg), ECODQN_OK);
    EXPECT_EQ(ecodqn_config_set(cfg, "gamma", "2"), ECODQN_ERR_CONFIG);
    EXPECT_EQ(ecodqn_config_set(cfg, "nonsense", "2"), ECODQN_ERR_CONFIG);
    ASSERT_EQ(ecodqn_config_set(cfg, "seed", "9"), ECODQN_OK);
    EXPECT_NE(std::string(ecodqn_config_text(cfg)).find("seed = 9"), std::string::npos);
    EXPECT_NE(std::string(ecodqn_config_text(cfg)).find("gamma = 0.95"), std::string::npos);
    ecodqn_config_free(cfg);
}

TEST(CApi, TrainEvaluateSolveBehave) {
    const fs::path dir = scratch("pipeline");
    const std::string ck = (dir / "ck.bin").string(), curve = (dir / "curve.csv").string();
    ecodqn_config *cfg = nullptr;
    ASSERT_EQ(ecodqn_config_parse(kTinyConfig, &cfg), ECODQN_OK);
    int calls = 0;
    ASSERT_EQ(ecodqn_train(cfg, nullptr, ck.c_str(), curve.c_str(), count_calls, &calls), ECODQN_OK)
        << ecodqn_last_error();
    EXPECT_EQ(calls, 3); // one per 100-step chunk
    EXPECT_TRUE(fs::exists(ck));
    std::ifstream in(curve);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "env_steps,grad_updates,holdout_mean_cut,holdout_mean_approx_ratio,epsilon,wall_time_s");

    const std::string corpus_dir = (dir / "corpus").string();
    ASSERT_EQ(ecodqn_corpus_generate(corpus_dir.c_str(), "er", 12, 0.3, 2, 1, 4, 7), ECODQN_OK);
    ecodqn_corpus *corpus = nullptr;
    ASSERT_EQ(ecodqn_corpus_open(corpus_dir.c_str(), &corpus), ECODQN_OK);
    ASSERT_EQ(ecodqn_corpus_size(corpus), 4u);
    EXPECT_STREQ(ecodqn_corpus_id(corpus, 0), "graph_0000");
    EXPECT_EQ(ecodqn_corpus_graph(corpus, 9), nullptr);

    ecodqn_eval_options opts{3, 1, 1, "tiny", "er12", nullptr};
    ecodqn_report *rep = nullptr;
    ASSERT_EQ(ecodqn_evaluate("eco", ck.c_str(), corpus, &opts, &rep), ECODQN_OK) << ecodqn_last_error();
    EXPECT_EQ(ecodqn_report_episode_count(rep), 12u);
    EXPECT_LE(ecodqn_report_mean_ratio(rep), 1.0);
    EXPECT_GE(ecodqn_report_mean_ratio(rep), ecodqn_report_single_try_ratio(rep));
    EXPECT_LE(ecodqn_report_lower_quartile(rep), ecodqn_report_upper_quartile(rep));
    const std::string e_csv = (dir / "ep.csv").string(), g_jsonl = (dir / "g.jsonl").string(),
                      s_csv = (dir / "s.csv").string();
    ASSERT_EQ(ecodqn_report_write(rep, e_csv.c_str(), g_jsonl.c_str(), s_csv.c_str()), ECODQN_OK);
    ecodqn_report_free(rep);
    EXPECT_EQ(ecodqn_evaluate("eco", nullptr, corpus, &opts, &rep), ECODQN_ERR_CONFIG);
    EXPECT_EQ(ecodqn_evaluate("bogus", nullptr, corpus, &opts, &rep), ECODQN_ERR_CONFIG);

    const ecodqn_graph *g0 = ecodqn_corpus_graph(corpus, 0);
    ecodqn_solution *exact = nullptr, *eco = nullptr;
    ASSERT_EQ(ecodqn_solve(g0, "exact", nullptr, 1, 0, 1, &exact), ECODQN_OK);
    ASSERT_EQ(ecodqn_solve(g0, "eco", ck.c_str(), 10, 0, 1, &eco), ECODQN_OK);
    EXPECT_LE(ecodqn_solution_cut(eco), ecodqn_solution_cut(exact));
    double recomputed = 0;
    ASSERT_EQ(ecodqn_graph_cut(g0, ecodqn_solution_membership(exact), &recomputed), ECODQN_OK);
    EXPECT_EQ(recomputed, ecodqn_solution_cut(exact));
    EXPECT_EQ(ecodqn_solution_vertices(exact), 12u);
    const std::string sol = (dir / "sol.json").string();
    EXPECT_EQ(ecodqn_solution_write(exact, sol.c_str()), ECODQN_OK);
    ecodqn_solution_free(exact);
    ecodqn_solution_free(eco);

    size_t steps = 0;
    const std::string beh = (dir / "beh.csv").string();
    ASSERT_EQ(ecodqn_behavior(ck.c_str(), corpus, 0, 10, 1, beh.c_str(), &steps), ECODQN_OK);
    EXPECT_EQ(steps, 24u);

    // Early stop through the callback still writes a resumable checkpoint.
    const std::string ck2 = (dir / "ck2.bin").string(), curve2 = (dir / "c2.csv").string();
    ASSERT_EQ(ecodqn_train(cfg, nullptr, ck2.c_str(), curve2.c_str(), stop_now, nullptr), ECODQN_OK);
    const std::string ck3 = (dir / "ck3.bin").string(), curve3 = (dir / "c3.csv").string();
    ASSERT_EQ(ecodqn_train(nullptr, ck2.c_str(), ck3.c_str(), curve3.c_str(), nullptr, nullptr), ECODQN_OK);
    std::ifstream a(ck, std::ios::binary), b(ck3, std::ios::binary);
    EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(a), {}, std::istreambuf_iterator<char>(b), {}));

    ecodqn_corpus_free(corpus);
    ecodqn_config_free(cfg);
    fs::remove_all(dir);
}
