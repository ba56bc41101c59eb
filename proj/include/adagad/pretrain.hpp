#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adagad/model.hpp"

namespace adagad {

/// One Stage-1 autoencoder: shared-architecture encoder plus the decoders
/// its level calls for (node: attribute only; edge: structure only;
/// subgraph: both).
class AutoencoderBranch {
public:
    AutoencoderBranch(Level level, const ModelConfig& cfg, int attr_dim, std::uint64_t seed)
        : level_(level), cfg_(cfg), attr_dim_(attr_dim) {
        cfg.validate();
        RngStream init(seed, level_stream_id(level), /*purpose=*/0x171);
        encoder_ = Encoder(registry_, "enc", cfg, attr_dim, init);
        if (has_attribute_decoder())
            attr_dec_ = AttributeDecoder(registry_, "dec_att", cfg, attr_dim, init);
        if (has_structure_decoder())
            str_dec_ = StructureDecoder(registry_, "dec_str", cfg, init);
    }

    Level level() const { return level_; }
    bool has_attribute_decoder() const { return level_ != Level::Edge; }
    bool has_structure_decoder() const { return level_ != Level::Node; }
    nn::ParamRegistry& registry() { return registry_; }
    const nn::ParamRegistry& registry() const { return registry_; }
    const Encoder& encoder() const { return encoder_; }
    const ModelConfig& config() const { return cfg_; }
    int attr_dim() const { return attr_dim_; }

    ad::Var encode(const GraphContext& ctx, bool training, RngStream& drop_rng) const {
        return encoder_.forward(ctx, ad::constant(ctx.graph->attributes()), training,
                                drop_rng);
    }

    ad::Var reconstruct_attributes(const GraphContext& ctx, bool training,
                                   RngStream& drop_rng) const {
        require(has_attribute_decoder(), "branch has no attribute decoder");
        return attr_dec_->forward(ctx, encode(ctx, training, drop_rng));
    }

    ad::Var reconstruct_structure(const GraphContext& ctx, bool training,
                                  RngStream& drop_rng) const {
        require(has_structure_decoder(), "branch has no structure decoder");
        return str_dec_->forward(ctx, encode(ctx, training, drop_rng));
    }

    /// Fused scalar structure loss for the training hot path.
    template <class TargetT>
    ad::Var structure_error(const GraphContext& ctx, TargetT&& target, bool training,
                            RngStream& drop_rng) const {
        require(has_structure_decoder(), "branch has no structure decoder");
        return str_dec_->reconstruction_error(ctx, encode(ctx, training, drop_rng),
                                              std::forward<TargetT>(target));
    }

private:
    Level level_;
    ModelConfig cfg_;
    int attr_dim_;
    nn::ParamRegistry registry_;
    Encoder encoder_;
    std::optional<AttributeDecoder> attr_dec_;
    std::optional<StructureDecoder> str_dec_;
};

namespace detail {

// attribute target per the reconstruction loss: the masked matrix itself,
// or the original attributes when the prose reading is selected
inline const Matrix& attr_target(const AugmentedGraph& aug, const Graph& original,
                                 bool target_original) {
    return target_original ? original.attributes() : aug.graph.attributes();
}

}  // namespace detail

/// Sum of squared Frobenius attribute errors over a collection (eval mode,
/// no dropout). Loss evaluation only; training uses per-member backward.
inline double node_level_loss(const AutoencoderBranch& branch, const Graph& original,
                              const AugmentedGraphSet& collection) {
    double total = 0.0;
    for (const auto& aug : collection.graphs) {
        GraphContext ctx(aug.graph);
        RngStream drop(0);
        auto x_hat = branch.reconstruct_attributes(ctx, false, drop);
        total += (x_hat->value -
                  detail::attr_target(aug, original, branch.config().pretrain_target_original))
                     .squaredNorm();
    }
    return total;
}

inline double edge_level_loss(const AutoencoderBranch& branch,
                              const AugmentedGraphSet& collection) {
    double total = 0.0;
    for (const auto& aug : collection.graphs) {
        GraphContext ctx(aug.graph);
        RngStream drop(0);
        auto a_hat = branch.reconstruct_structure(ctx, false, drop);
        total += (a_hat->value - dense_adjacency(aug.graph)).squaredNorm();
    }
    return total;
}

inline double subgraph_level_loss(const AutoencoderBranch& branch, const Graph& original,
                                  const AugmentedGraphSet& collection) {
    return node_level_loss(branch, original, collection) + edge_level_loss(branch, collection);
}

struct BranchReport {
    Level level;
    std::vector<double> loss_per_epoch;  // recorded before each step, plus final
    std::filesystem::path checkpoint;
};

struct PretrainReport {
    std::vector<BranchReport> branches;
    std::uint64_t config_hash = 0;
};

/// One optimizer step per full collection pass; gradients accumulate across
/// members so the step optimizes the summed loss, while each member's tape
/// is released immediately to bound memory.
inline std::vector<double> pretrain_branch(AutoencoderBranch& branch, const Graph& original,
                                           const AugmentedGraphSet& collection,
                                           std::uint64_t seed) {
    require(!collection.graphs.empty(), "empty augmentation collection");
    const ModelConfig& cfg = branch.config();
    nn::AdamW opt(cfg.lr, cfg.weight_decay);
    std::vector<double> trajectory;

    std::vector<GraphContext> contexts;
    contexts.reserve(collection.graphs.size());
    for (const auto& aug : collection.graphs) contexts.emplace_back(aug.graph);

    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        branch.registry().zero_grad();
        double epoch_loss = 0.0;
        for (std::size_t k = 0; k < collection.graphs.size(); ++k) {
            const auto& aug = collection.graphs[k];
            RngStream drop(seed, level_stream_id(branch.level()), 0xd801 + epoch, k);
            ad::Var member_loss;
            if (branch.has_attribute_decoder()) {
                auto x_hat = branch.reconstruct_attributes(contexts[k], true, drop);
                member_loss = ad::squared_error(
                    x_hat,
                    detail::attr_target(aug, original, cfg.pretrain_target_original));
            }
            if (branch.has_structure_decoder()) {
                auto str_loss =
                    branch.structure_error(contexts[k], sparse_adjacency(aug.graph), true, drop);
                member_loss = member_loss ? ad::add(member_loss, str_loss) : str_loss;
            }
            epoch_loss += member_loss->scalar();
            ad::backward(member_loss);
        }
        if (!std::isfinite(epoch_loss))
            throw RuntimeFailure(std::string("non-finite pretraining loss at level ") +
                                 level_name(branch.level()) + ", epoch " +
                                 std::to_string(epoch));
        trajectory.push_back(epoch_loss);
        opt.step(branch.registry());
    }
    return trajectory;
}

/// Stage 1: trains the three branches independently on their collections and
/// writes frozen-encoder checkpoints under ckpt_dir.
inline PretrainReport pretrain_all(const Graph& g,
                                   const std::vector<AugmentedGraphSet>& collections,
                                   const ModelConfig& cfg, std::uint64_t seed,
                                   std::uint64_t config_hash,
                                   const std::filesystem::path& ckpt_dir) {
    std::filesystem::create_directories(ckpt_dir);
    PretrainReport report;
    report.config_hash = config_hash;
    for (const auto& collection : collections) {
        AutoencoderBranch branch(collection.level, cfg, g.attr_dim(), seed);
        BranchReport br;
        br.level = collection.level;
        br.loss_per_epoch = pretrain_branch(branch, g, collection, seed);
        br.checkpoint =
            ckpt_dir / (std::string("branch_") + level_name(collection.level) + ".txt");
        nn::save_checkpoint(branch.registry(), config_hash, br.checkpoint);
        report.branches.push_back(std::move(br));
    }
    return report;
}

}  // namespace adagad
