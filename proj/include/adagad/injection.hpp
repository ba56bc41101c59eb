#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "adagad/graph.hpp"
#include "adagad/rng.hpp"

namespace adagad {

/// Synthetic anomaly injection: contextual anomalies swap a node's attribute
/// row with the farthest of k sampled candidates; structural anomalies fully
/// connect disjoint groups of clique_size nodes.
struct InjectionConfig {
    int num_contextual = 0;
    int num_structural = 0;
    int candidate_pool_k = 50;
    int clique_size = 15;
    std::uint64_t seed = 0;

    void validate(int n) const {
        require(num_contextual >= 0 && num_structural >= 0, "negative anomaly count");
        require(candidate_pool_k >= 1, "candidate_pool_k must be >= 1");
        require(clique_size >= 2, "clique_size must be >= 2");
        require(num_contextual + num_structural <= n, "anomaly count exceeds node count");
    }
};

namespace detail {

// Distinct target nodes for both anomaly types, drawn without replacement.
inline std::vector<int> sample_targets(int n, int count, RngStream& rng) {
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    for (int i = 0; i < count; ++i) {
        const std::size_t j = i + rng.index(ids.size() - i);
        std::swap(ids[i], ids[j]);
    }
    ids.resize(count);
    return ids;
}

}  // namespace detail

namespace detail {

// Shared by inject() and contamination_regimes(): samples the full target
// sets, then applies only the first apply_contextual / apply_structural
// corruptions. A partial application is exactly the full graph with the
// remaining corruptions reverted.
inline Graph inject_prefix(const Graph& g, const InjectionConfig& cfg,
                           int apply_contextual, int apply_structural) {
    const int n = g.num_nodes();
    cfg.validate(n);
    if (g.has_labels())
        for (int v : g.eval_labels())
            require(v == 0, "refusing to inject into an already-labeled graph");

    RngStream rng(cfg.seed, /*stream=*/0x1eaf);
    const int total = cfg.num_contextual + cfg.num_structural;
    std::vector<int> targets = detail::sample_targets(n, total, rng);
    std::vector<int> contextual(targets.begin(), targets.begin() + cfg.num_contextual);
    std::vector<int> structural(targets.begin() + cfg.num_contextual, targets.end());
    std::vector<bool> applied(n, false);
    for (int t = 0; t < apply_contextual; ++t) applied[contextual[t]] = true;
    for (int t = 0; t < apply_structural; ++t) applied[structural[t]] = true;

    Matrix X = g.attributes();
    for (int i : contextual) {
        // farthest attribute row among k uniformly sampled other nodes;
        // RNG is consumed for every target so prefix application does not
        // shift the stream of earlier targets
        int best = -1;
        double best_dist = -1.0;
        for (int t = 0; t < cfg.candidate_pool_k; ++t) {
            int c = static_cast<int>(rng.index(n));
            while (c == i) c = static_cast<int>(rng.index(n));
            const double dist = (g.attributes().row(c) - g.attributes().row(i)).squaredNorm();
            if (dist > best_dist) {
                best_dist = dist;
                best = c;
            }
        }
        if (applied[i]) X.row(i) = g.attributes().row(best);
    }

    std::vector<Edge> edges = g.edges();
    std::size_t start = 0;
    while (start < structural.size()) {
        std::size_t stop = std::min(start + static_cast<std::size_t>(cfg.clique_size),
                                    structural.size());
        // fold a trailing singleton into the previous clique (min group 2)
        if (structural.size() - stop == 1) stop = structural.size();
        for (std::size_t a = start; a < stop; ++a)
            for (std::size_t b = a + 1; b < stop; ++b)
                if (applied[structural[a]] && applied[structural[b]])
                    edges.emplace_back(structural[a], structural[b]);
        start = stop;
    }

    std::vector<int> labels(n, 0);
    for (int i : targets)
        if (applied[i]) labels[i] = 1;
    return Graph(n, std::move(edges), std::move(X), std::move(labels));
}

}  // namespace detail

inline Graph inject(const Graph& g, const InjectionConfig& cfg) {
    return detail::inject_prefix(g, cfg, cfg.num_contextual, cfg.num_structural);
}

/// Training graphs at three contamination levels plus the shared evaluation
/// graph. The half regime reverts the second half of the full regime's
/// corruptions, so its anomalies are a strict prefix of the full set.
struct ContaminationRegimes {
    Graph clean;
    Graph half;
    Graph full;        // identical corruption set to `evaluation`
    Graph evaluation;  // fully injected, carries labels
};

inline ContaminationRegimes contamination_regimes(const Graph& g_clean, int n_anom,
                                                  const InjectionConfig& base,
                                                  std::uint64_t seed) {
    require(n_anom >= 0 && n_anom % 2 == 0, "n_anom must be even");
    InjectionConfig cfg = base;
    cfg.num_contextual = n_anom / 2;
    cfg.num_structural = n_anom / 2;
    cfg.seed = seed;

    Graph full = inject(g_clean, cfg);
    Graph half = detail::inject_prefix(g_clean, cfg, (n_anom / 2 + 1) / 2, n_anom / 4);
    std::vector<int> zeros(g_clean.num_nodes(), 0);
    return ContaminationRegimes{g_clean.with_labels(zeros), std::move(half), full, full};
}

}  // namespace adagad
