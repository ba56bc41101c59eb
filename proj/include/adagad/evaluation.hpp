#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "adagad/augment.hpp"
#include "adagad/detection.hpp"
#include "adagad/injection.hpp"
#include "adagad/pretrain.hpp"

namespace adagad {

/// Rank-based AUC (Mann-Whitney statistic) with the 0.5 tie correction.
inline double auc(const Vector& scores, const std::vector<int>& labels) {
    const int n = static_cast<int>(scores.size());
    require(n == static_cast<int>(labels.size()), "score/label length mismatch");
    long positives = 0;
    for (int l : labels) {
        require(l == 0 || l == 1, "labels must be 0/1");
        positives += l;
    }
    const long negatives = n - positives;
    if (positives == 0 || negatives == 0)
        throw DegenerateSignalError("AUC needs both classes present");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&scores](int a, int b) { return scores[a] < scores[b]; });

    // average ranks over tie groups, then the rank-sum statistic
    double positive_rank_sum = 0.0;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (i + j - 1) + 1.0;  // 1-based
        for (int k = i; k < j; ++k)
            if (labels[order[k]]) positive_rank_sum += avg_rank;
        i = j;
    }
    return (positive_rank_sum - 0.5 * positives * (positives + 1)) /
           (static_cast<double>(positives) * static_cast<double>(negatives));
}

enum class Variant { Full, Rand, NodeOnly, EdgeOnly, SubgraphOnly };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::Rand: return "rand";
        case Variant::NodeOnly: return "node";
        case Variant::EdgeOnly: return "edge";
        default: return "subgraph";
    }
}

inline Variant parse_variant(const std::string& s) {
    for (Variant v : {Variant::Full, Variant::Rand, Variant::NodeOnly, Variant::EdgeOnly,
                      Variant::SubgraphOnly})
        if (s == variant_name(v)) return v;
    throw ValidationError("unknown variant '" + s + "'");
}

inline std::vector<Level> variant_levels(Variant v) {
    switch (v) {
        case Variant::NodeOnly: return {Level::Node};
        case Variant::EdgeOnly: return {Level::Edge};
        case Variant::SubgraphOnly: return {Level::Subgraph};
        default: return {Level::Node, Level::Edge, Level::Subgraph};
    }
}

/// Everything a single training run needs besides the graph and the seed.
struct ExperimentSettings {
    AugmentationConfig aug;
    ModelConfig model;
    DetectionConfig det;
    Variant variant = Variant::Full;
};

/// Cumulative wall time per pipeline stage, for run manifests.
struct StageTimes {
    double augment = 0.0;
    double pretrain = 0.0;
    double detect = 0.0;
    double evaluate = 0.0;
};

namespace detail {

class StageTimer {
public:
    explicit StageTimer(double* slot)
        : slot_(slot), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        if (slot_)
            *slot_ +=
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
                    .count();
    }

private:
    double* slot_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// One full two-stage run: build collections, pretrain the per-level
/// branches, transfer the frozen encoders, retrain, and score `eval_g`
/// (usually the training graph itself; the contamination study scores a
/// differently-injected copy).
inline AnomalyScores run_once(const Graph& train_g, const Graph& eval_g,
                              const ExperimentSettings& settings, std::uint64_t seed,
                              StageTimes* times = nullptr) {
    ExperimentSettings s = settings;
    s.aug.seed = seed;
    s.aug.validate();
    s.model.validate();
    s.det.validate();

    const auto levels = variant_levels(s.variant);
    DetectionModel model(levels, s.model, s.det, train_g.attr_dim(), seed);
    for (Level level : levels) {
        std::optional<AugmentedGraphSet> collection;
        {
            detail::StageTimer t(times ? &times->augment : nullptr);
            collection = s.variant == Variant::Rand
                             ? random_collection(train_g, level, s.aug)
                             : denoised_collection(train_g, level, s.aug);
        }
        detail::StageTimer t(times ? &times->pretrain : nullptr);
        AutoencoderBranch branch(level, s.model, train_g.attr_dim(), seed);
        pretrain_branch(branch, train_g, *collection, seed);
        model.adopt_pretrained(branch);
    }

    detail::StageTimer t(times ? &times->detect : nullptr);
    GraphContext train_ctx(train_g);
    retrain(model, train_ctx, seed);
    if (&eval_g == &train_g) return model.anomaly_scores(train_ctx);
    GraphContext eval_ctx(eval_g);
    return model.anomaly_scores(eval_ctx);
}

struct EvalResult {
    std::string variant;
    std::string aggregation;
    std::vector<std::uint64_t> seeds;
    std::vector<double> per_seed_auc;
    double mean_auc = 0.0;
    double std_auc = 0.0;  // population standard deviation over seeds
    double runtime_seconds = 0.0;
    std::uint64_t config_hash = 0;
};

namespace detail {

inline void finalize_stats(EvalResult& r) {
    const double n = static_cast<double>(r.per_seed_auc.size());
    r.mean_auc = std::accumulate(r.per_seed_auc.begin(), r.per_seed_auc.end(), 0.0) / n;
    double var = 0.0;
    for (double a : r.per_seed_auc) var += (a - r.mean_auc) * (a - r.mean_auc);
    r.std_auc = std::sqrt(var / n);
}

}  // namespace detail

/// Multi-seed harness: trains on `train_g`, computes AUC on `eval_g`'s labels.
inline EvalResult evaluate_seeds(const Graph& train_g, const Graph& eval_g,
                                 const ExperimentSettings& settings,
                                 const std::vector<std::uint64_t>& seeds,
                                 std::uint64_t config_hash = 0,
                                 StageTimes* times = nullptr) {
    require(!seeds.empty(), "need at least one seed");
    require(eval_g.has_labels(), "evaluation graph carries no labels");
    const auto t0 = std::chrono::steady_clock::now();
    EvalResult result;
    result.variant = variant_name(settings.variant);
    result.aggregation = aggregation_name(settings.det.aggregation);
    result.seeds = seeds;
    result.config_hash = config_hash;
    for (std::uint64_t seed : seeds) {
        auto scores = run_once(train_g, eval_g, settings, seed, times);
        detail::StageTimer t(times ? &times->evaluate : nullptr);
        result.per_seed_auc.push_back(auc(scores.scores, eval_g.eval_labels()));
    }
    detail::finalize_stats(result);
    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

inline EvalResult run_variant(const Graph& g, Variant variant,
                              const ExperimentSettings& base,
                              const std::vector<std::uint64_t>& seeds,
                              std::uint64_t config_hash = 0) {
    ExperimentSettings s = base;
    s.variant = variant;
    return evaluate_seeds(g, g, s, seeds,
                          fnv1a(std::string(variant_name(variant)), config_hash));
}

/// Trains under the three contamination regimes and scores every model on
/// the fully-injected evaluation graph (regime order: clean, half, full).
inline std::vector<EvalResult> contamination_study(const Graph& clean, int n_anom,
                                                   const InjectionConfig& inj,
                                                   const ExperimentSettings& settings,
                                                   const std::vector<std::uint64_t>& seeds,
                                                   std::uint64_t config_hash = 0) {
    auto regimes = contamination_regimes(clean, n_anom, inj, inj.seed);
    std::vector<EvalResult> out;
    const std::pair<const char*, const Graph*> order[] = {
        {"clean", &regimes.clean}, {"half", &regimes.half}, {"full", &regimes.full}};
    for (const auto& [name, train_g] : order) {
        auto r = evaluate_seeds(*train_g, regimes.evaluation, settings, seeds,
                                fnv1a(std::string(name), config_hash));
        r.variant = std::string(variant_name(settings.variant)) + ":" + name;
        out.push_back(std::move(r));
    }
    return out;
}

struct SweepCell {
    int encoder_depth;
    double gamma_reg;
    EvalResult result;
};

/// Full-factorial encoder-depth x regularizer-weight grid; optionally dumps
/// a CSV with one row per cell.
inline std::vector<SweepCell> depth_regularizer_sweep(
    const Graph& g, const std::vector<int>& depths, const std::vector<double>& reg_weights,
    const ExperimentSettings& base, const std::vector<std::uint64_t>& seeds,
    const std::filesystem::path& csv_path = {}, std::uint64_t config_hash = 0) {
    std::vector<SweepCell> grid;
    for (int depth : depths) {
        for (double w : reg_weights) {
            ExperimentSettings s = base;
            s.model.encoder_depth = depth;
            s.det.gamma_reg = w;
            const std::uint64_t h = fnv1a(
                "depth=" + std::to_string(depth) + ";gamma_reg=" + std::to_string(w),
                config_hash);
            grid.push_back(SweepCell{depth, w, evaluate_seeds(g, g, s, seeds, h)});
        }
    }
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        require(out.good(), "cannot open sweep CSV: " + csv_path.string());
        out << "encoder_depth,gamma_reg,mean_auc,std_auc,runtime_seconds\n";
        char buf[128];
        for (const auto& cell : grid) {
            std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g", cell.encoder_depth,
                          cell.gamma_reg, cell.result.mean_auc, cell.result.std_auc,
                          cell.result.runtime_seconds);
            out << buf << '\n';
        }
    }
    return grid;
}

/// Runs the full pipeline once per aggregation strategy.
inline std::vector<EvalResult> aggregation_ablation(const Graph& g,
                                                    const ExperimentSettings& base,
                                                    const std::vector<std::uint64_t>& seeds,
                                                    std::uint64_t config_hash = 0) {
    std::vector<EvalResult> out;
    for (auto strategy : {AggregationStrategy::FixedLinear,
                          AggregationStrategy::LearnableLinear,
                          AggregationStrategy::Attention}) {
        ExperimentSettings s = base;
        s.det.aggregation = strategy;
        out.push_back(evaluate_seeds(
            g, g, s, seeds, fnv1a(std::string(aggregation_name(strategy)), config_hash)));
    }
    return out;
}

}  // namespace adagad
