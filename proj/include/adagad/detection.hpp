#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "adagad/model.hpp"
#include "adagad/pretrain.hpp"

namespace adagad {

enum class AggregationStrategy { FixedLinear, LearnableLinear, Attention };

inline const char* aggregation_name(AggregationStrategy s) {
    switch (s) {
        case AggregationStrategy::FixedLinear: return "fixed_linear";
        case AggregationStrategy::LearnableLinear: return "learnable_linear";
        default: return "attention";
    }
}

/// Stage-2 hyperparameters on top of the shared ModelConfig.
struct DetectionConfig {
    double gamma = 0.5;       // attribute weight in loss and scores
    double gamma_reg = 0.01;  // regularizer weight
    double tau = 0.5;         // temperature of the anomaly distribution
    double score_floor = 1e-8;
    AggregationStrategy aggregation = AggregationStrategy::Attention;
    bool attention_scalar_weights = false;  // scalar-per-level ablation mode
    bool swap_loss_weights = false;  // alternative reading: gamma on structure

    double structure_weight() const { return swap_loss_weights ? gamma : 1.0 - gamma; }
    double attribute_weight() const { return swap_loss_weights ? 1.0 - gamma : gamma; }

    void validate() const {
        require(gamma >= 0.0 && gamma <= 1.0, "gamma must be in [0,1]");
        require(gamma_reg >= 0.0, "gamma_reg must be >= 0");
        require(tau > 0.0 && tau < 1.0, "tau must be in (0,1)");
        require(score_floor > 0.0, "score_floor must be positive");
    }
};

/// Combines the per-level embeddings into one. Fixed/learnable modes use a
/// convex combination with scalar weights (softmax-parameterized when
/// learnable); attention mode derives per-node weights from a shared fully
/// connected map with a softmax across levels.
class AggregationModule {
public:
    AggregationModule() = default;

    AggregationModule(nn::ParamRegistry& reg, const DetectionConfig& cfg, int dim,
                      int num_levels, RngStream& rng)
        : strategy_(cfg.aggregation),
          scalar_attention_(cfg.attention_scalar_weights),
          num_levels_(num_levels) {
        if (num_levels_ == 1) return;  // degenerate identity aggregation
        switch (strategy_) {
            case AggregationStrategy::FixedLinear:
                fixed_weights_.assign(num_levels_, 1.0 / num_levels_);
                break;
            case AggregationStrategy::LearnableLinear:
                logits_ = reg.create("agg.logits", Matrix::Zero(1, num_levels_));
                break;
            case AggregationStrategy::Attention:
                fc_ = nn::DenseLayer::create(reg, "agg.fc", dim,
                                             scalar_attention_ ? 1 : dim, rng);
                break;
        }
    }

    void set_fixed_weights(std::vector<double> w) {
        require(static_cast<int>(w.size()) == num_levels_, "weight count mismatch");
        double sum = 0.0;
        for (double v : w) {
            require(v > 0.0, "fixed aggregation weights must be positive");
            sum += v;
        }
        for (double& v : w) v /= sum;
        fixed_weights_ = std::move(w);
    }

    ad::Var forward(const std::vector<ad::Var>& embeddings) const {
        require(static_cast<int>(embeddings.size()) == num_levels_,
                "embedding count mismatch");
        if (num_levels_ == 1) return embeddings[0];
        switch (strategy_) {
            case AggregationStrategy::FixedLinear: {
                ad::Var h = ad::scale(embeddings[0], fixed_weights_[0]);
                for (int i = 1; i < num_levels_; ++i)
                    h = ad::add(h, ad::scale(embeddings[i], fixed_weights_[i]));
                return h;
            }
            case AggregationStrategy::LearnableLinear: {
                // softmax over the scalar logits keeps weights positive, sum 1
                const double mx = logits_->value.maxCoeff();
                std::vector<ad::Var> expd(num_levels_);
                ad::Var denom;
                for (int i = 0; i < num_levels_; ++i) {
                    auto cell = ad::make_node(
                        logits_->value.block(0, i, 1, 1), "slice", {logits_},
                        [i](ad::Node& n) {
                            if (n.parents[0]->requires_grad)
                                n.parents[0]->grad_ref()(0, i) += n.grad(0, 0);
                        });
                    expd[i] =
                        ad::exp_(ad::add(cell, ad::constant(Matrix::Constant(1, 1, -mx))));
                    denom = denom ? ad::add(denom, expd[i]) : expd[i];
                }
                ad::Var h;
                for (int i = 0; i < num_levels_; ++i) {
                    auto w = ad::div(expd[i], denom);  // 1x1
                    auto scaled = ad::make_node(
                        embeddings[i]->value * w->value(0, 0), "scalar_scale",
                        {embeddings[i], w}, [](ad::Node& n) {
                            if (n.parents[0]->requires_grad)
                                n.parents[0]->grad_ref() += n.grad * n.parents[1]->value(0, 0);
                            if (n.parents[1]->requires_grad)
                                n.parents[1]->grad_ref()(0, 0) +=
                                    n.grad.cwiseProduct(n.parents[0]->value).sum();
                        });
                    h = h ? ad::add(h, scaled) : scaled;
                }
                return h;
            }
            default: {
                // logits from the shared fc; numerically-stable softmax across
                // levels with a stop-gradient max shift
                std::vector<ad::Var> logits(num_levels_);
                Matrix mx;
                for (int i = 0; i < num_levels_; ++i) {
                    logits[i] = fc_->forward(embeddings[i]);
                    if (scalar_attention_)
                        logits[i] = ad::make_node(
                            logits[i]->value.col(0).replicate(1, embeddings[i]->value.cols()),
                            "broadcast_col", {logits[i]}, [](ad::Node& n) {
                                if (n.parents[0]->requires_grad)
                                    n.parents[0]->grad_ref().col(0) += n.grad.rowwise().sum();
                            });
                    mx = i == 0 ? logits[i]->value
                                : mx.cwiseMax(logits[i]->value).eval();
                }
                std::vector<ad::Var> expd(num_levels_);
                ad::Var denom;
                for (int i = 0; i < num_levels_; ++i) {
                    expd[i] = ad::exp_(ad::sub(logits[i], ad::constant(mx)));
                    denom = denom ? ad::add(denom, expd[i]) : expd[i];
                }
                ad::Var h;
                for (int i = 0; i < num_levels_; ++i) {
                    auto term = ad::mul(ad::div(expd[i], denom), embeddings[i]);
                    h = h ? ad::add(h, term) : term;
                }
                return h;
            }
        }
    }

    /// Per-node, per-dimension attention weights for diagnostics/tests.
    std::vector<Matrix> attention_weights(const std::vector<ad::Var>& embeddings) const {
        require(strategy_ == AggregationStrategy::Attention, "not an attention module");
        std::vector<Matrix> expd(num_levels_);
        Matrix mx;
        for (int i = 0; i < num_levels_; ++i) {
            Matrix l = (embeddings[i]->value * fc_->weight->value).rowwise() +
                       fc_->bias->value.row(0);
            if (scalar_attention_) l = l.col(0).replicate(1, embeddings[i]->value.cols()).eval();
            expd[i] = l;
            mx = i == 0 ? l : mx.cwiseMax(l).eval();
        }
        Matrix denom;
        for (int i = 0; i < num_levels_; ++i) {
            expd[i] = (expd[i] - mx).array().exp().matrix();
            denom = i == 0 ? expd[i] : (denom + expd[i]).eval();
        }
        for (int i = 0; i < num_levels_; ++i) expd[i] = expd[i].cwiseQuotient(denom);
        return expd;
    }

private:
    AggregationStrategy strategy_ = AggregationStrategy::FixedLinear;
    bool scalar_attention_ = false;
    int num_levels_ = 1;
    std::vector<double> fixed_weights_;
    ad::Var logits_;
    std::optional<nn::DenseLayer> fc_;
};

/// Per-node anomaly scores with deterministic ranking (descending score,
/// ties by ascending node id).
struct AnomalyScores {
    Vector scores;
    std::vector<int> ranking;

    static AnomalyScores from_scores(Vector s) {
        AnomalyScores out;
        out.ranking.resize(s.size());
        std::iota(out.ranking.begin(), out.ranking.end(), 0);
        std::stable_sort(out.ranking.begin(), out.ranking.end(), [&s](int a, int b) {
            if (s[a] != s[b]) return s[a] > s[b];
            return a < b;
        });
        out.scores = std::move(s);
        return out;
    }
};

/// Top round(rate * n) nodes by score.
inline std::vector<bool> flag_anomalies(const AnomalyScores& scores, double rate) {
    require(rate > 0.0 && rate < 1.0, "anomaly rate must be in (0,1)");
    const int n = static_cast<int>(scores.scores.size());
    const int count = static_cast<int>(std::lround(rate * n));
    std::vector<bool> flagged(n, false);
    for (int k = 0; k < count && k < n; ++k) flagged[scores.ranking[k]] = true;
    return flagged;
}

/// Anomaly distribution A_i = s_i^{-tau} / sum_{j in closed N(i)} s_j^{-tau}
/// with the score floor applied before the negative power.
inline Vector node_anomaly_distribution(const Vector& scores, const GraphContext& ctx,
                                        double tau, double score_floor = 1e-8) {
    require(tau > 0.0 && tau < 1.0, "tau must be in (0,1)");
    Vector t = scores.cwiseMax(score_floor).array().pow(-tau).matrix();
    Vector denom = ctx.closed_adjacency * t;
    return t.cwiseQuotient(denom);
}

/// L_reg = -sum_i S_i with S_i = -A_i log A_i, i.e. sum_i A_i log A_i.
inline double regularization_loss(const Vector& scores, const GraphContext& ctx, double tau,
                                  double score_floor = 1e-8) {
    Vector a = node_anomaly_distribution(scores, ctx, tau, score_floor);
    return a.dot(a.array().log().matrix());
}

/// Full Stage-2 model: frozen encoders, per-level pre-aggregation dense
/// layers, aggregation, and freshly initialized unified decoders.
class DetectionModel {
public:
    DetectionModel(const std::vector<Level>& levels, const ModelConfig& model_cfg,
                   const DetectionConfig& det_cfg, int attr_dim, std::uint64_t seed)
        : levels_(levels), mcfg_(model_cfg), dcfg_(det_cfg) {
        model_cfg.validate();
        det_cfg.validate();
        require(!levels.empty(), "detection needs at least one level");

        // encoders live in their own registries so freezing is structural
        for (Level level : levels_) {
            auto branch =
                std::make_unique<AutoencoderBranch>(level, model_cfg, attr_dim, seed);
            branch->registry().freeze_all();
            encoders_.push_back(std::move(branch));
        }

        RngStream init(seed, /*purpose=*/0x572);
        const int h = model_cfg.embedding_dim;
        for (std::size_t i = 0; i < levels_.size(); ++i)
            pre_agg_.push_back(nn::DenseLayer::create(
                registry_, std::string("pre_agg.") + level_name(levels_[i]), h, h, init));
        aggregation_ = AggregationModule(registry_, det_cfg, h,
                                         static_cast<int>(levels_.size()), init);
        attr_dec_ = AttributeDecoder(registry_, "dec_att", model_cfg, attr_dim, init);
        str_dec_ = StructureDecoder(registry_, "dec_str", model_cfg, init);
    }

    /// In-memory alternative to checkpoint loading for the same-process path.
    void adopt_pretrained(const AutoencoderBranch& trained) {
        for (auto& enc : encoders_)
            if (enc->level() == trained.level()) {
                nn::copy_state(trained.registry(), enc->registry());
                return;
            }
        throw ValidationError(std::string("no encoder at level ") +
                              level_name(trained.level()));
    }

    void load_encoder_checkpoints(const std::filesystem::path& ckpt_dir,
                                  std::uint64_t config_hash) {
        for (auto& branch : encoders_) {
            const auto path =
                ckpt_dir / (std::string("branch_") + level_name(branch->level()) + ".txt");
            nn::load_checkpoint(branch->registry(), config_hash, path);
        }
    }

    const std::vector<Level>& levels() const { return levels_; }
    nn::ParamRegistry& registry() { return registry_; }
    AggregationModule& aggregation() { return aggregation_; }
    const std::vector<std::unique_ptr<AutoencoderBranch>>& encoders() const {
        return encoders_;
    }
    const DetectionConfig& detection_config() const { return dcfg_; }

    struct Forward {
        ad::Var x_hat;  // n x d
        ad::Var a_hat;  // n x n in (0,1)
    };

    /// Aggregated node embeddings: per-level encoder -> pre-aggregation
    /// dense layer -> aggregation module.
    ad::Var embed(const GraphContext& ctx, bool training, RngStream& drop_rng) const {
        std::vector<ad::Var> embeddings;
        for (std::size_t i = 0; i < encoders_.size(); ++i) {
            ad::Var e = encoders_[i]->encode(ctx, training, drop_rng);
            embeddings.push_back(pre_agg_[i].forward(e, nn::Activation::Relu));
        }
        return aggregation_.forward(embeddings);
    }

    const AttributeDecoder& attribute_decoder() const { return *attr_dec_; }
    const StructureDecoder& structure_decoder() const { return *str_dec_; }

    Forward forward(const GraphContext& ctx, bool training, RngStream& drop_rng) const {
        ad::Var h = embed(ctx, training, drop_rng);
        return Forward{attr_dec_->forward(ctx, h), str_dec_->forward(ctx, h)};
    }

    /// (L_rec, L_ra, L_rs) for the current parameters, eval mode.
    struct ReconstructionLoss {
        double total, attribute, structure;
    };
    ReconstructionLoss reconstruction_loss(const GraphContext& ctx) const {
        RngStream drop(0);
        ad::Var h = embed(ctx, false, drop);
        ad::Var x_hat = attr_dec_->forward(ctx, h);
        ad::Var r = str_dec_->row_error(ctx, h, sparse_adjacency(*ctx.graph));
        const double l_ra = (x_hat->value - ctx.graph->attributes()).squaredNorm();
        const double l_rs = r->value.array().square().sum();
        return ReconstructionLoss{
            dcfg_.structure_weight() * l_rs + dcfg_.attribute_weight() * l_ra, l_ra, l_rs};
    }

    /// s_i = (1-gamma) ||a_i - a_hat_i|| + gamma ||x_i - x_hat_i||
    AnomalyScores anomaly_scores(const GraphContext& ctx) const {
        RngStream drop(0);
        ad::Var h = embed(ctx, false, drop);
        ad::Var x_hat = attr_dec_->forward(ctx, h);
        ad::Var r = str_dec_->row_error(ctx, h, sparse_adjacency(*ctx.graph));
        Vector s(ctx.graph->num_nodes());
        for (int i = 0; i < s.size(); ++i) {
            const double sx = (x_hat->value.row(i) - ctx.graph->attributes().row(i)).norm();
            s[i] = dcfg_.structure_weight() * r->value(i, 0) + dcfg_.attribute_weight() * sx;
        }
        return AnomalyScores::from_scores(std::move(s));
    }

    /// One training loss tape: L = (1-gamma) L_rs + gamma L_ra + gamma_reg L_reg.
    /// The structure term is the sum of squared per-row errors, so the same
    /// fused node feeds both the loss and the regularizer's scores.
    ad::Var training_loss(const GraphContext& ctx, bool training, RngStream& drop_rng) const {
        ad::Var h = embed(ctx, training, drop_rng);
        ad::Var x_hat = attr_dec_->forward(ctx, h);
        const Matrix& x = ctx.graph->attributes();
        ad::Var r_s = str_dec_->row_error(ctx, h, sparse_adjacency(*ctx.graph));
        ad::Var loss =
            ad::add(ad::scale(ad::sum(ad::mul(r_s, r_s)), dcfg_.structure_weight()),
                    ad::scale(ad::squared_error(x_hat, x), dcfg_.attribute_weight()));
        if (dcfg_.gamma_reg != 0.0) {
            // differentiable scores feed the anomaly distribution regularizer
            ad::Var s = ad::add(ad::scale(r_s, dcfg_.structure_weight()),
                                ad::scale(ad::row_l2_error(x_hat, x),
                                          dcfg_.attribute_weight()));
            ad::Var t = ad::pow_(ad::clamp_min(s, dcfg_.score_floor), -dcfg_.tau);
            ad::Var denom = ad::spmm_sym(ctx.closed_adjacency, t);
            ad::Var dist = ad::div(t, denom);
            ad::Var l_reg = ad::sum(ad::mul(dist, ad::log_(dist)));
            loss = ad::add(loss, ad::scale(l_reg, dcfg_.gamma_reg));
        }
        return loss;
    }

private:
    std::vector<Level> levels_;
    ModelConfig mcfg_;
    DetectionConfig dcfg_;
    std::vector<std::unique_ptr<AutoencoderBranch>> encoders_;
    nn::ParamRegistry registry_;
    std::vector<nn::DenseLayer> pre_agg_;
    AggregationModule aggregation_;
    std::optional<AttributeDecoder> attr_dec_;
    std::optional<StructureDecoder> str_dec_;
};

struct RetrainResult {
    std::vector<double> loss_per_epoch;
    AnomalyScores scores;
};

/// Stage 2: retrains aggregation + pre-aggregation + unified decoders on the
/// unmasked original graph with frozen encoders, then scores every node.
inline RetrainResult retrain(DetectionModel& model, const GraphContext& ctx,
                             std::uint64_t seed) {
    // freeze contract: snapshot encoder parameters for the drift assertion
    std::vector<Matrix> snapshot;
    for (const auto& enc : model.encoders())
        for (const auto& p : enc->registry().params()) snapshot.push_back(p.var->value);

    const ModelConfig& mcfg = model.encoders().front()->config();
    nn::AdamW opt(mcfg.lr, mcfg.weight_decay);
    RetrainResult out;
    for (int epoch = 0; epoch < mcfg.retrain_epochs; ++epoch) {
        model.registry().zero_grad();
        RngStream drop(seed, 0xd802, epoch);
        ad::Var loss = model.training_loss(ctx, true, drop);
        if (!std::isfinite(loss->scalar()))
            throw RuntimeFailure("non-finite retraining loss at epoch " +
                                 std::to_string(epoch));
        out.loss_per_epoch.push_back(loss->scalar());
        ad::backward(loss);
        opt.step(model.registry());
    }

    std::size_t idx = 0;
    for (const auto& enc : model.encoders())
        for (const auto& p : enc->registry().params())
            if (p.var->value != snapshot[idx++])
                throw RuntimeFailure("frozen encoder parameter drifted: " + p.name);

    out.scores = model.anomaly_scores(ctx);
    return out;
}

}  // namespace adagad
