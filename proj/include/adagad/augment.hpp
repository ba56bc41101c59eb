#pragma once

#include <algorithm>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "adagad/graph.hpp"
#include "adagad/rng.hpp"
#include "adagad/spectral.hpp"

namespace adagad {

enum class Level { Node, Edge, Subgraph };

inline const char* level_name(Level l) {
    switch (l) {
        case Level::Node: return "node";
        case Level::Edge: return "edge";
        default: return "subgraph";
    }
}

/// Masking and rejection-sampling knobs. Mask counts are the effective
/// budgets (paper range 1-20); p_r / p_z / q keep the per-element
/// probabilities meaningful on top of the counts.
struct AugmentationConfig {
    double p_r = 1.0;         // admission probability for a candidate masked node
    double p_z = 0.1;         // zeroing probability after replacement
    double q = 1.0;           // removal probability for a candidate masked edge
    int node_mask_count = 1;
    int edge_mask_count = 10;
    int walks = 2;
    int walk_length = 2;
    int l_n = 10, l_e = 10, l_s = 10;  // collection sizes
    int n_aug = 30;           // threshold calibration samples
    int max_trials = 500;     // rejection-sampling cap per accepted graph
    double theta_relax = 1.02;
    bool shared_theta = false;  // single theta across levels instead of per level
    std::uint64_t seed = 0;

    void validate() const {
        require(p_r >= 0.0 && p_r <= 1.0, "p_r must be in [0,1]");
        require(p_z >= 0.0 && p_z <= 1.0, "p_z must be in [0,1]");
        require(q >= 0.0 && q <= 1.0, "q must be in [0,1]");
        require(node_mask_count >= 1 && edge_mask_count >= 1, "mask counts must be >= 1");
        require(walks >= 0 && walk_length >= 0, "walk parameters must be >= 0");
        require(l_n >= 1 && l_e >= 1 && l_s >= 1, "collection sizes must be >= 1");
        require(n_aug >= 1, "n_aug must be >= 1");
        require(max_trials >= 1, "max_trials must be >= 1");
        require(theta_relax >= 1.0, "theta_relax must be >= 1");
    }

    int collection_size(Level l) const {
        switch (l) {
            case Level::Node: return l_n;
            case Level::Edge: return l_e;
            default: return l_s;
        }
    }
};

/// One masked graph plus its provenance and recorded anomaly magnitude.
struct AugmentedGraph {
    Graph graph;
    Level level;
    std::vector<int> masked_nodes;
    std::vector<Edge> masked_edges;
    double g_ano = 0.0;
};

struct AugmentedGraphSet {
    Level level;
    double threshold_theta = 0.0;
    std::vector<AugmentedGraph> graphs;
};

namespace detail {

// k distinct indices from [0, n), order as drawn
inline std::vector<int> sample_distinct(int n, int k, RngStream& rng) {
    k = std::min(k, n);
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    for (int i = 0; i < k; ++i) {
        const std::size_t j = i + rng.index(ids.size() - i);
        std::swap(ids[i], ids[j]);
    }
    ids.resize(k);
    return ids;
}

// replacement-then-zeroing feature masking applied to a fixed node set;
// donor rows always come from the original attribute matrix
inline void mask_features(const Graph& g, const std::vector<int>& admitted, double p_z,
                          RngStream& rng, Matrix& x) {
    const int n = g.num_nodes();
    for (int i : admitted) {
        int donor = static_cast<int>(rng.index(n - 1));
        if (donor >= i) ++donor;  // uniform over V \ {i}
        x.row(i) = g.attributes().row(donor);
        if (rng.bernoulli(p_z)) x.row(i).setZero();
    }
}

}  // namespace detail

inline AugmentedGraph node_mask(const Graph& g, const AugmentationConfig& cfg,
                                RngStream& rng) {
    require(g.num_nodes() >= 2, "node masking needs at least two nodes");
    std::vector<int> candidates = detail::sample_distinct(g.num_nodes(), cfg.node_mask_count, rng);
    std::vector<int> admitted;
    for (int i : candidates)
        if (rng.bernoulli(cfg.p_r)) admitted.push_back(i);
    Matrix x = g.attributes();
    detail::mask_features(g, admitted, cfg.p_z, rng, x);
    std::sort(admitted.begin(), admitted.end());
    return AugmentedGraph{g.with_attributes(std::move(x)), Level::Node,
                          std::move(admitted), {}, 0.0};
}

inline AugmentedGraph edge_mask(const Graph& g, const AugmentationConfig& cfg,
                                RngStream& rng) {
    require(g.num_edges() >= 1, "edge masking needs at least one edge");
    std::vector<int> candidates =
        detail::sample_distinct(g.num_edges(), cfg.edge_mask_count, rng);
    std::set<int> removed;
    for (int e : candidates)
        if (rng.bernoulli(cfg.q)) removed.insert(e);
    std::vector<Edge> kept, masked;
    for (int e = 0; e < g.num_edges(); ++e)
        (removed.count(e) ? masked : kept).push_back(g.edges()[e]);
    return AugmentedGraph{g.with_edges(std::move(kept)), Level::Edge, {}, std::move(masked),
                          0.0};
}

inline AugmentedGraph subgraph_mask(const Graph& g, const AugmentationConfig& cfg,
                                    RngStream& rng) {
    require(g.num_nodes() >= 2, "subgraph masking needs at least two nodes");
    std::set<int> visited;
    std::set<Edge> traversed;
    for (int w = 0; w < cfg.walks; ++w) {
        int cur = static_cast<int>(rng.index(g.num_nodes()));
        visited.insert(cur);
        for (int s = 0; s < cfg.walk_length; ++s) {
            const auto& nbrs = g.neighbors(cur);
            if (nbrs.empty()) break;
            const int nxt = nbrs[rng.index(nbrs.size())];
            traversed.insert({std::min(cur, nxt), std::max(cur, nxt)});
            visited.insert(nxt);
            cur = nxt;
        }
    }

    std::vector<int> admitted;
    for (int i : visited)
        if (rng.bernoulli(cfg.p_r)) admitted.push_back(i);
    Matrix x = g.attributes();
    detail::mask_features(g, admitted, cfg.p_z, rng, x);

    std::vector<Edge> kept, masked;
    for (const Edge& e : g.edges()) {
        if (traversed.count(e) && rng.bernoulli(cfg.q))
            masked.push_back(e);
        else
            kept.push_back(e);
    }
    Graph masked_graph = g.with_edges(std::move(kept)).with_attributes(std::move(x));
    return AugmentedGraph{std::move(masked_graph), Level::Subgraph, std::move(admitted),
                          std::move(masked), 0.0};
}

inline AugmentedGraph mask_at_level(const Graph& g, Level level,
                                    const AugmentationConfig& cfg, RngStream& rng) {
    switch (level) {
        case Level::Node: return node_mask(g, cfg, rng);
        case Level::Edge: return edge_mask(g, cfg, rng);
        default: return subgraph_mask(g, cfg, rng);
    }
}

namespace detail {

// stream purposes for counter-based splitting
constexpr std::uint64_t kCalibrate = 0xca11b;
constexpr std::uint64_t kCollect = 0xc011ec7;

inline bool try_magnitude(const Graph& g, double& out) {
    try {
        out = graph_anomaly_magnitude(g).graph();
        return true;
    } catch (const DegenerateSignalError&) {
        return false;  // degenerate candidates count as rejected
    }
}

}  // namespace detail

/// theta = min G_ano over n_aug independent random augmentations, capped at the
/// original graph's G_ano so the gate only ever admits denoising augmentations.
inline double calibrate_theta(const Graph& g, Level level, const AugmentationConfig& cfg) {
    cfg.validate();
    double best = graph_anomaly_magnitude(g).graph();
    bool any = false;
    for (int k = 0; k < cfg.n_aug; ++k) {
        RngStream rng(cfg.seed, static_cast<std::uint64_t>(level), detail::kCalibrate, k);
        AugmentedGraph cand = mask_at_level(g, level, cfg, rng);
        double m;
        if (detail::try_magnitude(cand.graph, m)) {
            best = std::min(best, m);
            any = true;
        }
    }
    if (!any)
        throw RuntimeFailure(std::string("theta calibration failed at level ") +
                             level_name(level) + ": all candidates degenerate");
    return best;
}

/// Rejection-samples fresh augmentations with G_ano <= theta until the
/// configured collection size is reached. Each trial index owns a derived
/// RNG stream, so the result is independent of evaluation order.
inline AugmentedGraphSet build_collection(const Graph& g, Level level,
                                          const AugmentationConfig& cfg, double theta) {
    cfg.validate();
    const int want = cfg.collection_size(level);
    AugmentedGraphSet out{level, theta, {}};
    std::uint64_t trial = 0;
    int relaxations = 0;
    while (static_cast<int>(out.graphs.size()) < want) {
        bool slot_filled = false;
        for (int attempt = 0; attempt < cfg.max_trials; ++attempt) {
            RngStream rng(cfg.seed, static_cast<std::uint64_t>(level), detail::kCollect,
                          trial++);
            AugmentedGraph cand = mask_at_level(g, level, cfg, rng);
            double m;
            if (!detail::try_magnitude(cand.graph, m)) continue;
            if (m <= out.threshold_theta) {
                cand.g_ano = m;
                out.graphs.push_back(std::move(cand));
                slot_filled = true;
                break;
            }
        }
        if (!slot_filled) {
            if (++relaxations > 10)
                throw RuntimeFailure(
                    std::string("could not assemble ") + std::to_string(want) +
                    " augmented graphs at level " + level_name(level) +
                    " within the relaxation budget; final theta = " +
                    std::to_string(out.threshold_theta));
            out.threshold_theta *= cfg.theta_relax;
        }
    }
    return out;
}

/// Ungated sampling for the `rand` ablation variant.
inline AugmentedGraphSet random_collection(const Graph& g, Level level,
                                           const AugmentationConfig& cfg) {
    return build_collection(g, level, cfg, std::numeric_limits<double>::infinity());
}

/// calibrate + gate in one call, per-level theta (or a shared one on demand).
inline AugmentedGraphSet denoised_collection(const Graph& g, Level level,
                                             const AugmentationConfig& cfg) {
    double theta;
    if (cfg.shared_theta) {
        theta = std::min({calibrate_theta(g, Level::Node, cfg),
                          calibrate_theta(g, Level::Edge, cfg),
                          calibrate_theta(g, Level::Subgraph, cfg)});
    } else {
        theta = calibrate_theta(g, level, cfg);
    }
    return build_collection(g, level, cfg, theta);
}

}  // namespace adagad
