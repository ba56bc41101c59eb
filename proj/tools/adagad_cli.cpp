// Command-line front end: dataset synthesis, spectral metrics, anomaly
// injection, augmentation reports, the two training stages, and the full
// evaluation pipeline.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adagad/datagen.hpp"
#include "adagad/pipeline.hpp"

namespace fs = std::filesystem;
using namespace adagad;

namespace {

struct ConfigCli {
    std::string config_file;
    std::vector<std::string> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "key=value config file");
        cmd->add_option("--set", overrides, "config override key=value (repeatable)")
            ->expected(-1);
    }

    PipelineConfig resolve(const std::string& dataset_dir,
                           const std::string& output_dir) const {
        PipelineConfig cfg;
        if (!config_file.empty()) cfg = load_config_file(config_file);
        for (const std::string& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ValidationError("--set expects key=value, got '" + kv + "'");
            apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!dataset_dir.empty()) cfg.dataset = dataset_dir;
        if (!output_dir.empty()) cfg.output = output_dir;
        return cfg;
    }
};

void emit(const nlohmann::json& j, const std::string& output_file) {
    if (output_file.empty())
        std::cout << j.dump(2) << '\n';
    else
        write_json(output_file, j);
}

int run_app(int argc, char** argv) {
    CLI::App app{"Two-stage unsupervised graph anomaly detection pipeline"};
    app.require_subcommand(1);

    // ---- synth ----
    std::string synth_preset, synth_out;
    std::uint64_t synth_seed = 0;
    bool synth_clean = false;
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    synth->add_option("preset", synth_preset, "preset name (disney, books, cora)")
        ->required();
    synth->add_option("out_dir", synth_out, "output dataset directory")->required();
    synth->add_option("--seed", synth_seed, "generation seed");
    synth->add_flag("--clean", synth_clean, "skip anomaly injection (no labels)");

    // ---- metrics ----
    std::string metrics_dataset, metrics_out;
    auto* metrics = app.add_subcommand("metrics", "spectral anomaly metrics of a dataset");
    metrics->add_option("dataset_dir", metrics_dataset)->required();
    metrics->add_option("--output", metrics_out, "write JSON here instead of stdout");

    // ---- inject ----
    std::string inject_dataset, inject_out;
    InjectionConfig inject_cfg;
    auto* injectc = app.add_subcommand("inject", "inject labeled anomalies into a dataset");
    injectc->add_option("dataset_dir", inject_dataset)->required();
    injectc->add_option("out_dir", inject_out)->required();
    injectc->add_option("--contextual", inject_cfg.num_contextual, "contextual anomalies")
        ->required();
    injectc->add_option("--structural", inject_cfg.num_structural, "structural anomalies")
        ->required();
    injectc->add_option("--clique-size", inject_cfg.clique_size, "structural clique size");
    injectc->add_option("--pool-k", inject_cfg.candidate_pool_k,
                        "contextual candidate pool size");
    injectc->add_option("--seed", inject_cfg.seed, "injection seed");

    // ---- augment ----
    std::string augment_dataset, augment_out;
    std::uint64_t augment_seed = 0;
    ConfigCli augment_cc;
    auto* augment =
        app.add_subcommand("augment", "build denoised collections and report them");
    augment->add_option("dataset_dir", augment_dataset)->required();
    augment->add_option("--seed", augment_seed, "augmentation seed");
    augment->add_option("--output", augment_out, "write JSON here instead of stdout");
    augment_cc.attach(augment);

    // ---- pretrain ----
    std::string pre_dataset, pre_ckpt;
    std::uint64_t pre_seed = 0;
    ConfigCli pre_cc;
    auto* pretrain = app.add_subcommand("pretrain", "stage 1: masked autoencoder pretraining");
    pretrain->add_option("dataset_dir", pre_dataset)->required();
    pretrain->add_option("ckpt_dir", pre_ckpt, "checkpoint output directory")->required();
    pretrain->add_option("--seed", pre_seed, "run seed");
    pre_cc.attach(pretrain);

    // ---- detect ----
    std::string det_dataset, det_ckpt, det_out = "out";
    std::uint64_t det_seed = 0;
    ConfigCli det_cc;
    auto* detect = app.add_subcommand("detect", "stage 2: retrain decoders and score nodes");
    detect->add_option("dataset_dir", det_dataset)->required();
    detect->add_option("ckpt_dir", det_ckpt, "checkpoint directory from pretrain")
        ->required();
    detect->add_option("--seed", det_seed, "run seed (must match pretrain)");
    detect->add_option("--output", det_out, "output directory");
    det_cc.attach(detect);

    // ---- evaluate ----
    std::string eval_dataset, eval_out, eval_study;
    int eval_n_anom = 150;
    ConfigCli eval_cc;
    auto* evaluate = app.add_subcommand("evaluate", "multi-seed AUC harness and studies");
    evaluate->add_option("dataset_dir", eval_dataset)->required();
    evaluate->add_option("--output", eval_out, "write JSON here instead of stdout");
    evaluate->add_option("--study", eval_study,
                         "optional study: contamination, sweep, aggregation, variants");
    evaluate->add_option("--anomalies", eval_n_anom,
                         "injected anomaly count for the contamination study");
    eval_cc.attach(evaluate);

    // ---- run ----
    std::string run_dataset, run_out;
    ConfigCli run_cc;
    auto* run = app.add_subcommand("run", "full pipeline: augment, pretrain, detect, evaluate");
    run->add_option("dataset_dir", run_dataset)->required();
    run->add_option("--output", run_out, "output directory");
    run_cc.attach(run);

    CLI11_PARSE(app, argc, argv);

    if (*synth) {
        Graph g = make_dataset(synth_preset, synth_seed, !synth_clean);
        fs::create_directories(synth_out);
        write_graph(g, synth_out);
        std::cout << "wrote " << synth_preset << " stand-in (" << g.num_nodes()
                  << " nodes, " << g.num_edges() << " edges"
                  << (g.has_labels() ? ", labeled)" : ", clean)") << " to " << synth_out
                  << "\n";
    } else if (*metrics) {
        emit(spectral_metrics_json(load_graph(metrics_dataset)), metrics_out);
    } else if (*injectc) {
        Graph g = inject(load_graph(inject_dataset), inject_cfg);
        fs::create_directories(inject_out);
        write_graph(g, inject_out);
        std::cout << "wrote injected dataset to " << inject_out << "\n";
    } else if (*augment) {
        PipelineConfig cfg = augment_cc.resolve(augment_dataset, "");
        cfg.settings.aug.seed = augment_seed;
        cfg.settings.aug.validate();
        Graph g = load_graph(cfg.dataset);
        const double original = graph_anomaly_magnitude(g).graph();
        nlohmann::json report;
        report["original_graph_anomaly_magnitude"] = original;
        for (Level level : variant_levels(cfg.settings.variant)) {
            auto set = cfg.settings.variant == Variant::Rand
                           ? random_collection(g, level, cfg.settings.aug)
                           : denoised_collection(g, level, cfg.settings.aug);
            nlohmann::json lj;
            lj["threshold_theta"] = set.threshold_theta;
            double mean = 0.0;
            std::vector<double> accepted;
            for (const auto& aug : set.graphs) {
                accepted.push_back(aug.g_ano);
                mean += aug.g_ano;
            }
            lj["accepted_g_ano"] = accepted;
            lj["mean_g_ano"] = mean / accepted.size();
            report[level_name(level)] = lj;
        }
        emit(report, augment_out);
    } else if (*pretrain) {
        PipelineConfig cfg = pre_cc.resolve(pre_dataset, "");
        validate_pipeline_config(cfg);
        Graph g = load_graph(cfg.dataset);
        auto report = pretrain_stage(g, cfg.settings, pre_seed,
                                     checkpoint_hash(cfg, pre_seed), pre_ckpt);
        nlohmann::json j;
        j["checkpoint_hash"] = report.config_hash;
        for (const auto& br : report.branches) {
            j["loss_per_epoch"][level_name(br.level)] = br.loss_per_epoch;
            j["checkpoints"].push_back(br.checkpoint.string());
        }
        std::cout << j.dump(2) << '\n';
    } else if (*detect) {
        PipelineConfig cfg = det_cc.resolve(det_dataset, det_out);
        validate_pipeline_config(cfg);
        Graph g = load_graph(cfg.dataset);
        auto scores =
            detect_stage(g, cfg.settings, det_seed, checkpoint_hash(cfg, det_seed), det_ckpt);
        fs::create_directories(cfg.output);
        write_scores_csv(fs::path(cfg.output) / "scores.csv", scores, cfg.anomaly_rate);
        nlohmann::json manifest;
        manifest["checkpoint_dir"] = det_ckpt;
        manifest["checkpoint_hash"] = checkpoint_hash(cfg, det_seed);
        manifest["config"] = config_key_values(cfg);
        manifest["seed"] = det_seed;
        write_json(fs::path(cfg.output) / "manifest.json", manifest);
        std::cout << "wrote scores.csv for " << g.num_nodes() << " nodes to " << cfg.output
                  << "\n";
    } else if (*evaluate) {
        PipelineConfig cfg = eval_cc.resolve(eval_dataset, "");
        validate_pipeline_config(cfg);
        Graph g = load_graph(cfg.dataset);
        const std::uint64_t hash = config_hash(cfg);
        nlohmann::json j;
        if (eval_study.empty()) {
            j = eval_result_json(
                run_variant(g, cfg.settings.variant, cfg.settings, cfg.seeds, hash));
        } else if (eval_study == "variants") {
            for (Variant v : {Variant::Full, Variant::Rand, Variant::NodeOnly,
                              Variant::EdgeOnly, Variant::SubgraphOnly})
                j[variant_name(v)] =
                    eval_result_json(run_variant(g, v, cfg.settings, cfg.seeds, hash));
        } else if (eval_study == "aggregation") {
            for (const auto& r : aggregation_ablation(g, cfg.settings, cfg.seeds, hash))
                j[r.aggregation] = eval_result_json(r);
        } else if (eval_study == "sweep") {
            const fs::path csv = eval_out.empty()
                                     ? fs::path("sweep.csv")
                                     : fs::path(eval_out).replace_extension(".csv");
            auto grid = depth_regularizer_sweep(g, {1, 2, 3, 4}, {0.0, 0.001, 0.01},
                                                cfg.settings, cfg.seeds, csv, hash);
            for (const auto& cell : grid)
                j["grid"].push_back({{"encoder_depth", cell.encoder_depth},
                                     {"gamma_reg", cell.gamma_reg},
                                     {"mean_auc", cell.result.mean_auc},
                                     {"std_auc", cell.result.std_auc}});
            j["csv"] = csv.string();
        } else if (eval_study == "contamination") {
            if (g.has_labels())
                throw ValidationError(
                    "contamination study injects its own anomalies; give it a clean "
                    "(unlabeled) dataset");
            InjectionConfig inj;  // injection fixed at seed 0, model seeds vary
            inj.seed = 0;
            for (const auto& r :
                 contamination_study(g, eval_n_anom, inj, cfg.settings, cfg.seeds, hash))
                j[r.variant] = eval_result_json(r);
        } else {
            throw ValidationError("unknown study '" + eval_study + "'");
        }
        emit(j, eval_out);
    } else if (*run) {
        PipelineConfig cfg = run_cc.resolve(run_dataset, run_out);
        auto art = run_pipeline(cfg);
        std::cout << "mean AUC " << art.result.mean_auc << " +- " << art.result.std_auc
                  << " over " << art.result.seeds.size() << " seeds; artifacts in "
                  << fs::path(art.scores_csv).parent_path().string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    adagad::tune_runtime();
    try {
        return run_app(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
