#include <doctest.h>

#include "adagad/datagen.hpp"
#include "adagad/evaluation.hpp"
#include "test_util.hpp"

using namespace adagad;

namespace {

/// Exhaustive pairwise counting oracle: wins + half-ties over all pos/neg pairs.
double auc_oracle(const Vector& scores, const std::vector<int>& labels) {
    double num = 0.0;
    long pairs = 0;
    for (int i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (int j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) num += 1.0;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    }
    return num / pairs;
}

ExperimentSettings fast_settings() {
    ExperimentSettings s;
    s.aug.node_mask_count = 3;
    s.aug.edge_mask_count = 2;
    s.aug.walks = 1;
    s.aug.l_n = s.aug.l_e = s.aug.l_s = 2;
    s.aug.n_aug = 5;
    s.model.embedding_dim = 4;
    s.model.pretrain_epochs = 3;
    s.model.retrain_epochs = 3;
    return s;
}

Graph labeled_graph(std::uint64_t seed) {
    Graph clean = testutil::random_graph(24, 4, 0.15, seed);
    InjectionConfig inj;
    inj.num_contextual = 2;
    inj.num_structural = 2;
    inj.clique_size = 2;
    inj.candidate_pool_k = 10;
    inj.seed = seed;
    return inject(clean, inj);
}

}  // namespace

TEST_CASE("AUC closed forms") {
    std::vector<int> labels{1, 0, 0};
    Vector perfect(3), middling(3);
    perfect << 0.9, 0.8, 0.1;
    middling << 0.5, 0.8, 0.1;
    CHECK(auc(perfect, labels) == 1.0);
    CHECK(auc(middling, labels) == 0.5);  // one win, one loss over two pairs
    CHECK(auc(Vector::Constant(3, 0.7), labels) == 0.5);  // tie correction
    Vector reversed(3);
    reversed << 0.1, 0.8, 0.9;
    CHECK(auc(reversed, labels) == 0.0);
}

TEST_CASE("AUC rejects degenerate inputs") {
    Vector s = Vector::Constant(3, 1.0);
    CHECK_THROWS_AS(auc(s, std::vector<int>{0, 0, 0}), DegenerateSignalError);
    CHECK_THROWS_AS(auc(s, std::vector<int>{1, 1, 1}), DegenerateSignalError);
    CHECK_THROWS_AS(auc(s, std::vector<int>{0, 1}), ValidationError);
    CHECK_THROWS_AS(auc(s, std::vector<int>{0, 1, 2}), ValidationError);
}

TEST_CASE("rank-based AUC equals the brute-force oracle on random instances") {
    RngStream rng(0xabc);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng.index(60));
        Vector scores(n);
        std::vector<int> labels(n);
        // coarse quantization forces plenty of ties
        for (int i = 0; i < n; ++i) scores[i] = static_cast<double>(rng.index(5));
        int pos = 0;
        for (int i = 0; i < n; ++i) pos += labels[i] = rng.bernoulli(0.3) ? 1 : 0;
        if (pos == 0 || pos == n) continue;
        CHECK(auc(scores, labels) == doctest::Approx(auc_oracle(scores, labels)).epsilon(1e-12));
    }
}

TEST_CASE("AUC is invariant under strictly monotone score transforms") {
    RngStream rng(0xdef);
    Vector s(40);
    std::vector<int> labels(40);
    for (int i = 0; i < 40; ++i) {
        s[i] = rng.normal();
        labels[i] = i % 5 == 0;
    }
    const double base = auc(s, labels);
    Vector expd = s.array().exp().matrix();
    Vector affine = 3.0 * s + Vector::Constant(40, 7.0);
    CHECK(auc(expd, labels) == base);
    CHECK(auc(affine, labels) == base);
}

TEST_CASE("variant levels and names round-trip") {
    CHECK(variant_levels(Variant::Full).size() == 3);
    CHECK(variant_levels(Variant::Rand).size() == 3);
    CHECK(variant_levels(Variant::NodeOnly) == std::vector<Level>{Level::Node});
    CHECK(variant_levels(Variant::EdgeOnly) == std::vector<Level>{Level::Edge});
    CHECK(variant_levels(Variant::SubgraphOnly) == std::vector<Level>{Level::Subgraph});
    for (Variant v : {Variant::Full, Variant::Rand, Variant::NodeOnly, Variant::EdgeOnly,
                      Variant::SubgraphOnly})
        CHECK(parse_variant(variant_name(v)) == v);
    CHECK_THROWS_AS(parse_variant("fulll"), ValidationError);
}

TEST_CASE("harness fills per-seed results and recomputable statistics") {
    Graph g = labeled_graph(3);
    auto r = run_variant(g, Variant::Full, fast_settings(), {0, 1, 2});
    REQUIRE(r.per_seed_auc.size() == 3);
    double mean = 0.0;
    for (double a : r.per_seed_auc) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        mean += a;
    }
    mean /= 3.0;
    CHECK(r.mean_auc == doctest::Approx(mean).epsilon(1e-12));
    double var = 0.0;
    for (double a : r.per_seed_auc) var += (a - mean) * (a - mean);
    CHECK(r.std_auc == doctest::Approx(std::sqrt(var / 3.0)).epsilon(1e-12));
    CHECK(r.runtime_seconds > 0.0);
    CHECK(r.variant == "full");
}

TEST_CASE("single seed gives zero standard deviation") {
    Graph g = labeled_graph(3);
    auto r = run_variant(g, Variant::Full, fast_settings(), {0});
    CHECK(r.per_seed_auc.size() == 1);
    CHECK(r.std_auc == 0.0);
}

TEST_CASE("the harness is deterministic for identical inputs") {
    Graph g = labeled_graph(5);
    auto a = run_variant(g, Variant::Rand, fast_settings(), {0, 1});
    auto b = run_variant(g, Variant::Rand, fast_settings(), {0, 1});
    CHECK(a.per_seed_auc == b.per_seed_auc);
}

TEST_CASE("single-level variants run without the other branches") {
    Graph g = labeled_graph(7);
    for (Variant v : {Variant::NodeOnly, Variant::EdgeOnly, Variant::SubgraphOnly}) {
        CAPTURE(variant_name(v));
        auto r = run_variant(g, v, fast_settings(), {0});
        CHECK(r.per_seed_auc[0] >= 0.0);
        CHECK(r.per_seed_auc[0] <= 1.0);
        CHECK(r.variant == variant_name(v));
    }
}

TEST_CASE("contamination study trains three regimes against one evaluation graph") {
    Graph clean = testutil::random_graph(30, 4, 0.12, 11);
    InjectionConfig inj;
    inj.candidate_pool_k = 10;
    inj.clique_size = 2;
    inj.seed = 0;
    auto results = contamination_study(clean, 4, inj, fast_settings(), {0}, 99);
    REQUIRE(results.size() == 3);
    CHECK(results[0].variant == "full:clean");
    CHECK(results[1].variant == "full:half");
    CHECK(results[2].variant == "full:full");
    // distinct config hashes per regime
    CHECK(results[0].config_hash != results[1].config_hash);
    CHECK(results[1].config_hash != results[2].config_hash);
}

TEST_CASE("depth/regularizer sweep emits the full grid and a CSV") {
    Graph g = labeled_graph(13);
    const auto csv = std::filesystem::temp_directory_path() / "adagad_sweep_test.csv";
    auto grid = depth_regularizer_sweep(g, {1, 2}, {0.0, 0.01}, fast_settings(), {0}, csv);
    REQUIRE(grid.size() == 4);
    CHECK(grid[0].encoder_depth == 1);
    CHECK(grid[3].encoder_depth == 2);
    CHECK(grid[3].gamma_reg == 0.01);

    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "encoder_depth,gamma_reg,mean_auc,std_auc,runtime_seconds");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4);
    std::filesystem::remove(csv);
}

TEST_CASE("aggregation ablation covers all three strategies") {
    Graph g = labeled_graph(17);
    auto results = aggregation_ablation(g, fast_settings(), {0});
    REQUIRE(results.size() == 3);
    CHECK(results[0].aggregation == "fixed_linear");
    CHECK(results[1].aggregation == "learnable_linear");
    CHECK(results[2].aggregation == "attention");
    for (const auto& r : results) {
        CHECK(r.per_seed_auc[0] >= 0.0);
        CHECK(r.per_seed_auc[0] <= 1.0);
    }
}

TEST_CASE("synthetic presets match their target shapes") {
    for (const auto& preset : dataset_presets()) {
        CAPTURE(preset.name);
        Graph clean = make_dataset(preset.name, 0, false);
        CHECK(clean.num_nodes() == preset.spec.num_nodes);
        CHECK(clean.attr_dim() == preset.spec.attr_dim);
        CHECK_FALSE(clean.has_labels());

        Graph labeled = make_dataset(preset.name, 0, true);
        int anomalies = 0;
        for (int l : labeled.eval_labels()) anomalies += l;
        CHECK(anomalies == preset.injection.num_contextual + preset.injection.num_structural);
        // labeled variant keeps the clean graph's shape apart from clique edges
        CHECK(labeled.num_nodes() == clean.num_nodes());
        CHECK(labeled.num_edges() >= clean.num_edges());
    }
}

TEST_CASE("synthetic generation is deterministic and seed-sensitive") {
    Graph a = make_dataset("disney", 4, true);
    Graph b = make_dataset("disney", 4, true);
    Graph c = make_dataset("disney", 5, true);
    CHECK(a.edges() == b.edges());
    CHECK(a.attributes() == b.attributes());
    CHECK(a.edges() != c.edges());
}

TEST_CASE("injected stand-ins read as more anomalous than their clean versions") {
    Graph clean = make_dataset("disney", 0, false);
    Graph labeled = make_dataset("disney", 0, true);
    CHECK(graph_anomaly_magnitude(labeled).graph() > graph_anomaly_magnitude(clean).graph());
}
