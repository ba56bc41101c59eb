#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adagad/evaluation.hpp"
#include "adagad/spectral.hpp"

namespace adagad {

/// Fully-resolved run configuration: dataset location, every tunable of the
/// two training stages, the evaluation seed list, and the output directory.
struct PipelineConfig {
    std::string dataset;
    std::string output = "out";
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    double anomaly_rate = 0.05;  // drives the flagged column of scores.csv
    ExperimentSettings settings;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(seeds[i]);
    }
    return out;
}

/// Accepts "0,3,7" and the range shorthand "0..9".
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto dots = item.find("..");
        try {
            if (dots != std::string::npos) {
                const std::uint64_t lo = std::stoull(item.substr(0, dots));
                const std::uint64_t hi = std::stoull(item.substr(dots + 2));
                require(lo <= hi, "empty seed range '" + item + "'");
                for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
            } else {
                seeds.push_back(std::stoull(item));
            }
        } catch (const std::logic_error&) {
            throw ValidationError("bad seed list entry '" + item + "'");
        }
    }
    require(!seeds.empty(), "empty seed list");
    return seeds;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        require(used == v.size(), "trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ValidationError("bad numeric value '" + v + "' for key '" + key + "'");
    }
}

inline int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int i = std::stoi(v, &used);
        require(used == v.size(), "trailing characters");
        return i;
    } catch (const std::exception&) {
        throw ValidationError("bad integer value '" + v + "' for key '" + key + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("bad boolean value '" + v + "' for key '" + key + "'");
}

inline int edit_distance(const std::string& a, const std::string& b) {
    std::vector<int> row(b.size() + 1);
    std::iota(row.begin(), row.end(), 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        int diag = row[0];
        row[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const int next = std::min({row[j] + 1, row[j - 1] + 1,
                                       diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = row[j];
            row[j] = next;
        }
    }
    return row[b.size()];
}

}  // namespace detail

/// Canonical sorted-key serialization; its FNV-1a hash stamps artifacts.
inline std::map<std::string, std::string> config_key_values(const PipelineConfig& cfg) {
    const auto& s = cfg.settings;
    std::map<std::string, std::string> kv;
    kv["aggregation"] = aggregation_name(s.det.aggregation);
    kv["anomaly_rate"] = detail::format_double(cfg.anomaly_rate);
    kv["dataset"] = cfg.dataset;
    kv["decoder_depth"] = std::to_string(s.model.decoder_depth);
    kv["dropout"] = detail::format_double(s.model.dropout);
    kv["edge_mask_count"] = std::to_string(s.aug.edge_mask_count);
    kv["embedding_dim"] = std::to_string(s.model.embedding_dim);
    kv["encoder"] = s.model.encoder == EncoderKind::Gcn ? "gcn" : "gat";
    kv["encoder_depth"] = std::to_string(s.model.encoder_depth);
    kv["gamma"] = detail::format_double(s.det.gamma);
    kv["gamma_reg"] = detail::format_double(s.det.gamma_reg);
    kv["l_e"] = std::to_string(s.aug.l_e);
    kv["l_n"] = std::to_string(s.aug.l_n);
    kv["l_s"] = std::to_string(s.aug.l_s);
    kv["lr"] = detail::format_double(s.model.lr);
    kv["max_trials"] = std::to_string(s.aug.max_trials);
    kv["n_aug"] = std::to_string(s.aug.n_aug);
    kv["node_mask_count"] = std::to_string(s.aug.node_mask_count);
    kv["output"] = cfg.output;
    kv["p_r"] = detail::format_double(s.aug.p_r);
    kv["p_z"] = detail::format_double(s.aug.p_z);
    kv["pretrain_epochs"] = std::to_string(s.model.pretrain_epochs);
    kv["pretrain_target_original"] = s.model.pretrain_target_original ? "true" : "false";
    kv["q"] = detail::format_double(s.aug.q);
    kv["retrain_epochs"] = std::to_string(s.model.retrain_epochs);
    kv["scalar_attention"] = s.det.attention_scalar_weights ? "true" : "false";
    kv["seeds"] = detail::format_seeds(cfg.seeds);
    kv["shared_theta"] = s.aug.shared_theta ? "true" : "false";
    kv["swap_loss_weights"] = s.det.swap_loss_weights ? "true" : "false";
    kv["tau"] = detail::format_double(s.det.tau);
    kv["theta_relax"] = detail::format_double(s.aug.theta_relax);
    kv["variant"] = variant_name(s.variant);
    kv["walk_length"] = std::to_string(s.aug.walk_length);
    kv["walks"] = std::to_string(s.aug.walks);
    kv["weight_decay"] = detail::format_double(s.model.weight_decay);
    return kv;
}

inline std::string serialize_config(const PipelineConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : config_key_values(cfg)) out += k + "=" + v + "\n";
    return out;
}

inline std::uint64_t config_hash(const PipelineConfig& cfg) {
    return fnv1a(serialize_config(cfg));
}

/// Applies one key=value assignment, rejecting unknown keys with the nearest
/// valid key named in the error.
inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    auto& s = cfg.settings;
    if (key == "aggregation") {
        if (value == "fixed_linear") s.det.aggregation = AggregationStrategy::FixedLinear;
        else if (value == "learnable_linear")
            s.det.aggregation = AggregationStrategy::LearnableLinear;
        else if (value == "attention") s.det.aggregation = AggregationStrategy::Attention;
        else throw ValidationError("unknown aggregation '" + value + "'");
    } else if (key == "anomaly_rate") cfg.anomaly_rate = parse_double(key, value);
    else if (key == "dataset") cfg.dataset = value;
    else if (key == "decoder_depth") s.model.decoder_depth = parse_int(key, value);
    else if (key == "dropout") s.model.dropout = parse_double(key, value);
    else if (key == "edge_mask_count") s.aug.edge_mask_count = parse_int(key, value);
    else if (key == "embedding_dim") s.model.embedding_dim = parse_int(key, value);
    else if (key == "encoder") {
        if (value == "gcn") s.model.encoder = EncoderKind::Gcn;
        else if (value == "gat") s.model.encoder = EncoderKind::Gat;
        else throw ValidationError("unknown encoder '" + value + "'");
    } else if (key == "encoder_depth") s.model.encoder_depth = parse_int(key, value);
    else if (key == "gamma") s.det.gamma = parse_double(key, value);
    else if (key == "gamma_reg") s.det.gamma_reg = parse_double(key, value);
    else if (key == "l_e") s.aug.l_e = parse_int(key, value);
    else if (key == "l_n") s.aug.l_n = parse_int(key, value);
    else if (key == "l_s") s.aug.l_s = parse_int(key, value);
    else if (key == "lr") s.model.lr = parse_double(key, value);
    else if (key == "max_trials") s.aug.max_trials = parse_int(key, value);
    else if (key == "n_aug") s.aug.n_aug = parse_int(key, value);
    else if (key == "node_mask_count") s.aug.node_mask_count = parse_int(key, value);
    else if (key == "output") cfg.output = value;
    else if (key == "p_r") s.aug.p_r = parse_double(key, value);
    else if (key == "p_z") s.aug.p_z = parse_double(key, value);
    else if (key == "pretrain_epochs") s.model.pretrain_epochs = parse_int(key, value);
    else if (key == "pretrain_target_original")
        s.model.pretrain_target_original = parse_bool(key, value);
    else if (key == "q") s.aug.q = parse_double(key, value);
    else if (key == "retrain_epochs") s.model.retrain_epochs = parse_int(key, value);
    else if (key == "scalar_attention")
        s.det.attention_scalar_weights = parse_bool(key, value);
    else if (key == "seeds") cfg.seeds = detail::parse_seeds(value);
    else if (key == "shared_theta") s.aug.shared_theta = parse_bool(key, value);
    else if (key == "swap_loss_weights") s.det.swap_loss_weights = parse_bool(key, value);
    else if (key == "tau") s.det.tau = parse_double(key, value);
    else if (key == "theta_relax") s.aug.theta_relax = parse_double(key, value);
    else if (key == "variant") s.variant = parse_variant(value);
    else if (key == "walk_length") s.aug.walk_length = parse_int(key, value);
    else if (key == "walks") s.aug.walks = parse_int(key, value);
    else if (key == "weight_decay") s.model.weight_decay = parse_double(key, value);
    else {
        std::string nearest;
        int best = 1 << 20;
        for (const auto& [k, v] : config_key_values(PipelineConfig{})) {
            const int d = detail::edit_distance(key, k);
            if (d < best) {
                best = d;
                nearest = k;
            }
        }
        throw ValidationError("unknown config key '" + key + "' (closest valid key: '" +
                              nearest + "')");
    }
}

inline void validate_pipeline_config(const PipelineConfig& cfg) {
    cfg.settings.aug.validate();
    cfg.settings.model.validate();
    cfg.settings.det.validate();
    require(!cfg.seeds.empty(), "seed list is empty");
    require(cfg.anomaly_rate > 0.0 && cfg.anomaly_rate < 1.0,
            "anomaly_rate must be in (0,1)");
    require(!cfg.dataset.empty(), "no dataset directory given");
}

/// Parses a key=value config file ('#' comments, blank lines allowed) on top
/// of the defaults, then range-checks the result.
inline PipelineConfig parse_config_text(std::istream& in, PipelineConfig base = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.resize(hash_pos);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(lineno) +
                                  " is not key=value: '" + line + "'");
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        apply_config_entry(base, strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
    return base;
}

inline PipelineConfig load_config_file(const std::filesystem::path& path,
                                       PipelineConfig base = {}) {
    std::ifstream in(path);
    require(in.good(), "cannot open config file: " + path.string());
    return parse_config_text(in, std::move(base));
}

/// Hash stamped into pretraining checkpoints: covers everything that shapes
/// the encoders (dataset, augmentation, architecture, stage-1 training, the
/// variant) plus the seed, but none of the stage-2 knobs — so `detect` can
/// re-derive it without knowing how `pretrain` was invoked.
inline std::uint64_t checkpoint_hash(const PipelineConfig& cfg, std::uint64_t seed) {
    auto kv = config_key_values(cfg);
    for (const char* k : {"aggregation", "anomaly_rate", "gamma", "gamma_reg", "output",
                          "scalar_attention", "seeds", "swap_loss_weights", "tau"})
        kv.erase(k);
    std::string text;
    for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
    text += "seed=" + std::to_string(seed) + "\n";
    return fnv1a(text);
}

/// Stage 1 as a standalone step: writes one hash-stamped checkpoint per
/// level of the configured variant into `ckpt_dir`.
inline PretrainReport pretrain_stage(const Graph& g, const ExperimentSettings& settings,
                                     std::uint64_t seed, std::uint64_t ckpt_hash,
                                     const std::filesystem::path& ckpt_dir) {
    ExperimentSettings s = settings;
    s.aug.seed = seed;
    std::vector<AugmentedGraphSet> collections;
    for (Level level : variant_levels(s.variant))
        collections.push_back(s.variant == Variant::Rand
                                  ? random_collection(g, level, s.aug)
                                  : denoised_collection(g, level, s.aug));
    return pretrain_all(g, collections, s.model, seed, ckpt_hash, ckpt_dir);
}

/// Stage 2 as a standalone step: loads the frozen encoders (hash-gated),
/// retrains the detection head, and returns the node scores.
inline AnomalyScores detect_stage(const Graph& g, const ExperimentSettings& settings,
                                  std::uint64_t seed, std::uint64_t ckpt_hash,
                                  const std::filesystem::path& ckpt_dir) {
    DetectionModel model(variant_levels(settings.variant), settings.model, settings.det,
                         g.attr_dim(), seed);
    model.load_encoder_checkpoints(ckpt_dir, ckpt_hash);
    GraphContext ctx(g);
    retrain(model, ctx, seed);
    return model.anomaly_scores(ctx);
}

// ---- artifact writers ----------------------------------------------------

inline void write_scores_csv(const std::filesystem::path& path, const AnomalyScores& s,
                             double anomaly_rate) {
    std::ofstream out(path);
    require(out.good(), "cannot open " + path.string());
    auto flagged = flag_anomalies(s, anomaly_rate);
    std::vector<int> rank_of(s.scores.size());
    for (std::size_t r = 0; r < s.ranking.size(); ++r) rank_of[s.ranking[r]] = r;
    out << "node_id,score,rank,flagged\n";
    char buf[96];
    for (int i = 0; i < s.scores.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%d,%d", i, s.scores[i], rank_of[i],
                      flagged[i] ? 1 : 0);
        out << buf << '\n';
    }
}

inline nlohmann::json eval_result_json(const EvalResult& r) {
    nlohmann::json j;
    j["aggregation"] = r.aggregation;
    j["config_hash"] = r.config_hash;
    j["mean_auc"] = r.mean_auc;
    j["per_seed_auc"] = r.per_seed_auc;
    j["runtime_seconds"] = r.runtime_seconds;
    j["seeds"] = r.seeds;
    j["std_auc"] = r.std_auc;
    j["variant"] = r.variant;
    return j;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    require(out.good(), "cannot open " + path.string());
    out << j.dump(2) << '\n';
}

struct PipelineArtifacts {
    std::filesystem::path scores_csv;
    std::filesystem::path metrics_json;
    std::filesystem::path manifest_json;
    EvalResult result;
};

/// The `run` subcommand: augment -> pretrain -> detect -> evaluate over the
/// configured seeds, writing scores.csv (first seed), metrics.json, and
/// manifest.json into the output directory. Deterministic overwrite.
inline PipelineArtifacts run_pipeline(const PipelineConfig& cfg) {
    validate_pipeline_config(cfg);
    const std::uint64_t hash = config_hash(cfg);
    const Graph g = load_graph(cfg.dataset);
    require(g.has_labels(),
            "dataset has no labels.csv; `run` needs labels for evaluation");

    std::filesystem::create_directories(cfg.output);
    PipelineArtifacts art;
    art.scores_csv = std::filesystem::path(cfg.output) / "scores.csv";
    art.metrics_json = std::filesystem::path(cfg.output) / "metrics.json";
    art.manifest_json = std::filesystem::path(cfg.output) / "manifest.json";

    StageTimes times;
    art.result = evaluate_seeds(g, g, cfg.settings, cfg.seeds, hash, &times);

    {
        detail::StageTimer t(&times.detect);
        auto first_seed_scores = run_once(g, g, cfg.settings, cfg.seeds.front());
        write_scores_csv(art.scores_csv, first_seed_scores, cfg.anomaly_rate);
    }

    nlohmann::json metrics = eval_result_json(art.result);
    metrics["config"] = config_key_values(cfg);
    write_json(art.metrics_json, metrics);

    nlohmann::json manifest;
    manifest["artifacts"] = {"scores.csv", "metrics.json"};
    manifest["config"] = config_key_values(cfg);
    manifest["config_hash"] = hash;
    manifest["format_version"] = 1;
    manifest["notes"] = {
        "scores.csv ranks nodes for the first listed seed",
        "pre-aggregation dense maps are per-level (not shared)",
    };
    manifest["seeds"] = cfg.seeds;
    manifest["stage_seconds"] = {{"augment", times.augment},
                                 {"detect", times.detect},
                                 {"evaluate", times.evaluate},
                                 {"pretrain", times.pretrain}};
    write_json(art.manifest_json, manifest);
    return art;
}

/// The `metrics` subcommand payload: spectral anomaly readings of a dataset.
inline nlohmann::json spectral_metrics_json(const Graph& g) {
    nlohmann::json j;
    const auto mags = graph_anomaly_magnitude(g);
    j["attribute_anomaly_magnitude"] = mags.attribute;
    j["graph_anomaly_magnitude"] = mags.graph();
    j["num_edges"] = g.num_edges();
    j["num_nodes"] = g.num_nodes();
    j["structural_anomaly_magnitude"] = mags.structural;
    if (g.has_labels()) {
        Vector y(g.num_nodes());
        int anomalies = 0;
        for (int i = 0; i < g.num_nodes(); ++i) {
            y[i] = g.eval_labels()[i];
            anomalies += g.eval_labels()[i];
        }
        j["num_anomalies"] = anomalies;
        if (anomalies > 0 && anomalies < g.num_nodes())
            j["label_high_frequency_area"] = high_frequency_area(g, y);
    }
    return j;
}

}  // namespace adagad
