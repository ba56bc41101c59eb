#pragma once

#include <string>
#include <vector>

#include "adagad/graph.hpp"
#include "adagad/injection.hpp"
#include "adagad/rng.hpp"

namespace adagad {

/// Stochastic-block-model stand-in for an attributed benchmark graph:
/// homophilous communities with community-centered Gaussian attributes.
struct SyntheticSpec {
    int num_nodes = 100;
    int attr_dim = 16;
    int communities = 4;
    double intra_edge_prob = 0.1;
    double inter_edge_prob = 0.005;
    double center_scale = 2.0;  // spread of community attribute centers
    double attr_noise = 0.5;    // per-node deviation from the center

    void validate() const {
        require(num_nodes >= 2 && attr_dim >= 1, "bad synthetic dimensions");
        require(communities >= 1 && communities <= num_nodes, "bad community count");
        require(intra_edge_prob >= 0.0 && intra_edge_prob <= 1.0 &&
                    inter_edge_prob >= 0.0 && inter_edge_prob <= 1.0,
                "edge probabilities must be in [0,1]");
    }
};

inline Graph synthesize_graph(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    RngStream rng(seed, /*purpose=*/0x5b3);

    std::vector<int> community(spec.num_nodes);
    for (int i = 0; i < spec.num_nodes; ++i) community[i] = i % spec.communities;

    std::vector<Edge> edges;
    for (int u = 0; u < spec.num_nodes; ++u)
        for (int v = u + 1; v < spec.num_nodes; ++v) {
            const double p = community[u] == community[v] ? spec.intra_edge_prob
                                                          : spec.inter_edge_prob;
            if (rng.bernoulli(p)) edges.emplace_back(u, v);
        }

    Matrix centers(spec.communities, spec.attr_dim);
    for (int c = 0; c < spec.communities; ++c)
        for (int j = 0; j < spec.attr_dim; ++j)
            centers(c, j) = spec.center_scale * rng.normal();

    Matrix x(spec.num_nodes, spec.attr_dim);
    for (int i = 0; i < spec.num_nodes; ++i)
        for (int j = 0; j < spec.attr_dim; ++j)
            x(i, j) = centers(community[i], j) + spec.attr_noise * rng.normal();

    return Graph(spec.num_nodes, std::move(edges), std::move(x));
}

/// Named presets sized after the small attributed-graph benchmarks this
/// project is normally run on (node/edge/attribute counts and anomaly rates
/// approximate the published dataset statistics; attribute dimension of the
/// large preset is reduced to keep single-core runs tractable).
struct DatasetPreset {
    std::string name;
    SyntheticSpec spec;
    InjectionConfig injection;  // applied unless a clean graph is requested
};

inline std::vector<DatasetPreset> dataset_presets() {
    std::vector<DatasetPreset> out;

    {
        // ~124 nodes / ~335 edges / 28 attrs / 6 anomalies (4.8%)
        DatasetPreset p;
        p.name = "disney";
        p.spec = SyntheticSpec{124, 28, 6, 0.20, 0.008, 2.0, 0.5};
        p.injection.num_contextual = 3;
        p.injection.num_structural = 3;
        p.injection.clique_size = 3;
        out.push_back(p);
    }
    {
        // ~1418 nodes / ~3695 edges / 21 attrs / 28 anomalies (2.0%)
        DatasetPreset p;
        p.name = "books";
        p.spec = SyntheticSpec{1418, 21, 14, 0.045, 0.0005, 2.0, 0.5};
        p.injection.num_contextual = 14;
        p.injection.num_structural = 14;
        p.injection.clique_size = 14;
        out.push_back(p);
    }
    {
        // ~2708 nodes / ~5278 edges / 7 communities; attr dim cut to 128;
        // 5.5% injected anomalies in the labeled variant
        DatasetPreset p;
        p.name = "cora";
        p.spec = SyntheticSpec{2708, 128, 7, 0.008, 0.0003, 2.0, 0.8};
        p.injection.num_contextual = 75;
        p.injection.num_structural = 75;
        p.injection.clique_size = 8;
        p.injection.candidate_pool_k = 15;
        out.push_back(p);
    }
    return out;
}

inline const DatasetPreset& find_preset(const std::string& name) {
    static const std::vector<DatasetPreset> presets = dataset_presets();
    for (const auto& p : presets)
        if (p.name == name) return p;
    std::string known;
    for (const auto& p : presets) known += (known.empty() ? "" : ", ") + p.name;
    throw ValidationError("unknown dataset preset '" + name + "' (known: " + known + ")");
}

/// Builds a preset dataset; `inject_anomalies` controls whether the labeled
/// corrupted variant or the clean unlabeled graph is produced.
inline Graph make_dataset(const std::string& preset_name, std::uint64_t seed,
                          bool inject_anomalies) {
    const DatasetPreset& p = find_preset(preset_name);
    Graph clean = synthesize_graph(p.spec, seed);
    if (!inject_anomalies) return clean;
    InjectionConfig inj = p.injection;
    inj.seed = seed;
    return inject(clean, inj);
}

}  // namespace adagad
