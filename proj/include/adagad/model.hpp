#pragma once

#include <memory>
#include <string>
#include <vector>

#include "adagad/augment.hpp"
#include "adagad/graph.hpp"
#include "adagad/nn.hpp"

namespace adagad {

enum class EncoderKind { Gcn, Gat };

/// Architecture and training hyperparameters shared by both stages.
struct ModelConfig {
    int embedding_dim = 64;
    int encoder_depth = 1;
    int decoder_depth = 1;
    EncoderKind encoder = EncoderKind::Gcn;
    double dropout = 0.1;
    double lr = 0.005;
    double weight_decay = 0.01;
    int pretrain_epochs = 20;
    int retrain_epochs = 20;
    bool pretrain_target_original = false;  // prose reading of the node loss target

    void validate() const {
        require(embedding_dim >= 1, "embedding_dim must be >= 1");
        require(encoder_depth >= 1 && decoder_depth >= 1, "depths must be >= 1");
        require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0,1)");
        require(lr > 0.0, "lr must be positive");
        require(weight_decay >= 0.0, "weight_decay must be >= 0");
        require(pretrain_epochs >= 0 && retrain_epochs >= 0, "epochs must be >= 0");
    }
};

/// Per-graph precomputation consumed by the layers: normalized adjacency for
/// GCN propagation, closed neighborhoods for GAT attention and the anomaly
/// distribution regularizer.
struct GraphContext {
    const Graph* graph;
    DerivedMatrices derived;
    std::shared_ptr<const std::vector<std::vector<int>>> closed_nbrs;
    Eigen::SparseMatrix<double> closed_adjacency;  // A + I, binary

    explicit GraphContext(const Graph& g) : graph(&g), derived(derive_matrices(g)) {
        auto nbrs = std::make_shared<std::vector<std::vector<int>>>(g.num_nodes());
        for (int i = 0; i < g.num_nodes(); ++i) (*nbrs)[i] = g.neighborhood(i, true);
        closed_nbrs = std::move(nbrs);

        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(2 * g.num_edges() + g.num_nodes());
        for (int i = 0; i < g.num_nodes(); ++i) trip.emplace_back(i, i, 1.0);
        for (const auto& [u, v] : g.edges()) {
            trip.emplace_back(u, v, 1.0);
            trip.emplace_back(v, u, 1.0);
        }
        closed_adjacency.resize(g.num_nodes(), g.num_nodes());
        closed_adjacency.setFromTriplets(trip.begin(), trip.end());
    }
};

/// Stacked GNN encoder: rectifier + dropout between layers, linear output.
class Encoder {
public:
    Encoder() = default;
    Encoder(nn::ParamRegistry& reg, const std::string& name, const ModelConfig& cfg,
            int in_dim, RngStream& rng)
        : kind_(cfg.encoder), dropout_(cfg.dropout) {
        int in = in_dim;
        for (int l = 0; l < cfg.encoder_depth; ++l) {
            const std::string lname = name + "." + std::to_string(l);
            if (kind_ == EncoderKind::Gcn)
                gcn_.push_back(nn::GcnLayer::create(reg, lname, in, cfg.embedding_dim, rng));
            else
                gat_.push_back(nn::GatLayer::create(reg, lname, in, cfg.embedding_dim, rng));
            in = cfg.embedding_dim;
        }
    }

    ad::Var forward(const GraphContext& ctx, const ad::Var& x, bool training,
                    RngStream& drop_rng) const {
        ad::Var h = x;
        const int depth = static_cast<int>(kind_ == EncoderKind::Gcn ? gcn_.size() : gat_.size());
        for (int l = 0; l < depth; ++l) {
            const auto act = l + 1 < depth ? nn::Activation::Relu : nn::Activation::None;
            h = kind_ == EncoderKind::Gcn
                    ? gcn_[l].forward(ctx.derived.norm_adj, h, act)
                    : gat_[l].forward(ctx.closed_nbrs, h, act);
            if (l + 1 < depth) h = nn::dropout(h, dropout_, drop_rng, training);
        }
        return h;
    }

private:
    EncoderKind kind_ = EncoderKind::Gcn;
    double dropout_ = 0.0;
    std::vector<nn::GcnLayer> gcn_;
    std::vector<nn::GatLayer> gat_;
};

/// Stacked GCN attribute decoder; hidden rectifiers, linear head.
class AttributeDecoder {
public:
    AttributeDecoder() = default;
    AttributeDecoder(nn::ParamRegistry& reg, const std::string& name, const ModelConfig& cfg,
                     int out_dim, RngStream& rng) {
        int in = cfg.embedding_dim;
        for (int l = 0; l < cfg.decoder_depth; ++l) {
            const bool last = l + 1 == cfg.decoder_depth;
            const int out = last ? out_dim : cfg.embedding_dim;
            layers_.push_back(
                nn::GcnLayer::create(reg, name + "." + std::to_string(l), in, out, rng));
            in = out;
        }
    }

    ad::Var forward(const GraphContext& ctx, const ad::Var& h) const {
        ad::Var z = h;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto act =
                l + 1 < layers_.size() ? nn::Activation::Relu : nn::Activation::None;
            z = layers_[l].forward(ctx.derived.norm_adj, z, act);
        }
        return z;
    }

private:
    std::vector<nn::GcnLayer> layers_;
};

/// One GCN layer producing embeddings Z, then logistic inner product
/// sigmoid(Z Z^T): symmetric, entries in (0,1).
class StructureDecoder {
public:
    StructureDecoder() = default;
    StructureDecoder(nn::ParamRegistry& reg, const std::string& name, const ModelConfig& cfg,
                     RngStream& rng)
        : layer_(nn::GcnLayer::create(reg, name, cfg.embedding_dim, cfg.embedding_dim, rng)) {}

    ad::Var forward(const GraphContext& ctx, const ad::Var& h) const {
        ad::Var z = layer_.forward(ctx.derived.norm_adj, h, nn::Activation::None);
        return ad::sigmoid(ad::gram(z));
    }

    /// Fused training loss ||sigmoid(z zᵀ) - target||_F^2; same value as
    /// squared_error over forward() with far less n×n traffic. Takes either
    /// a sparse or a dense adjacency target.
    template <class TargetT>
    ad::Var reconstruction_error(const GraphContext& ctx, const ad::Var& h,
                                 TargetT&& target) const {
        ad::Var z = layer_.forward(ctx.derived.norm_adj, h, nn::Activation::None);
        return ad::sigmoid_gram_error(z, std::forward<TargetT>(target));
    }

    /// Fused per-row reconstruction errors ||sigmoid(z zᵀ)_i - target_i||_2.
    template <class TargetT>
    ad::Var row_error(const GraphContext& ctx, const ad::Var& h, TargetT&& target) const {
        ad::Var z = layer_.forward(ctx.derived.norm_adj, h, nn::Activation::None);
        return ad::sigmoid_gram_row_error(z, std::forward<TargetT>(target));
    }

private:
    nn::GcnLayer layer_;
};

inline std::uint64_t level_stream_id(Level level) {
    return static_cast<std::uint64_t>(level) + 1;
}

}  // namespace adagad
