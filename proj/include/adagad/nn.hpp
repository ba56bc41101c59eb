#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "adagad/autodiff.hpp"
#include "adagad/graph.hpp"
#include "adagad/rng.hpp"

namespace adagad::nn {

using ad::Var;

/// Named, optionally frozen parameter. Frozen parameters still participate
/// in forward/backward but the optimizer never touches them.
struct Param {
    std::string name;
    Var var;
    bool frozen = false;
};

class ParamRegistry {
public:
    Var create(const std::string& name, Matrix init) {
        for (const auto& p : params_)
            require(p.name != name, "duplicate parameter name " + name);
        Param p{name, ad::parameter(std::move(init)), false};
        params_.push_back(p);
        return p.var;
    }

    std::vector<Param>& params() { return params_; }
    const std::vector<Param>& params() const { return params_; }

    void zero_grad() {
        for (auto& p : params_) p.var->zero_grad();
    }
    void freeze_all() {
        for (auto& p : params_) p.frozen = true;
    }

    const Param& find(const std::string& name) const {
        for (const auto& p : params_)
            if (p.name == name) return p;
        throw ValidationError("unknown parameter " + name);
    }

private:
    std::vector<Param> params_;
};

/// Glorot-style uniform init, deterministic per (seed, stream).
inline Matrix glorot(int rows, int cols, RngStream& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    return m;
}

enum class Activation { None, Relu, Sigmoid };

inline Var activate(const Var& x, Activation act) {
    switch (act) {
        case Activation::Relu: return ad::relu(x);
        case Activation::Sigmoid: return ad::sigmoid(x);
        default: return x;
    }
}

/// GCN propagation: act(A_hat H W).
struct GcnLayer {
    Var weight;  // in x out

    static GcnLayer create(ParamRegistry& reg, const std::string& name, int in, int out,
                           RngStream& rng) {
        return GcnLayer{reg.create(name + ".W", glorot(in, out, rng))};
    }

    Var forward(const Eigen::SparseMatrix<double>& norm_adj, const Var& h,
                Activation act) const {
        return activate(ad::spmm_sym(norm_adj, ad::matmul(h, weight)), act);
    }
};

/// Single-head graph attention over closed neighborhoods. Scores come from
/// a learned vector split into source/target halves applied to transformed
/// endpoint features, with leaky-ReLU slope 0.2 and per-node softmax.
inline Var gat_attention(const std::shared_ptr<const std::vector<std::vector<int>>>& closed_nbrs,
                         const Var& wh, const Var& a_src, const Var& a_dst,
                         double slope = 0.2) {
    const int n = static_cast<int>(closed_nbrs->size());
    require(wh->value.rows() == n, "gat: feature row count mismatch");
    const Matrix& WH = wh->value;
    const Vector u = WH * a_src->value.col(0);
    const Vector v = WH * a_dst->value.col(0);

    auto alpha = std::make_shared<std::vector<std::vector<double>>>(n);
    auto preact = std::make_shared<std::vector<std::vector<double>>>(n);
    Matrix out = Matrix::Zero(n, WH.cols());
    for (int i = 0; i < n; ++i) {
        const auto& nbrs = (*closed_nbrs)[i];
        auto& al = (*alpha)[i];
        auto& pr = (*preact)[i];
        al.resize(nbrs.size());
        pr.resize(nbrs.size());
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const double e = u[i] + v[nbrs[k]];
            pr[k] = e;
            const double s = e > 0.0 ? e : slope * e;
            al[k] = s;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (double& s : al) {
            s = std::exp(s - mx);
            z += s;
        }
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            al[k] /= z;
            out.row(i) += al[k] * WH.row(nbrs[k]);
        }
    }

    return ad::make_node(
        std::move(out), "gat_attention", {wh, a_src, a_dst},
        [closed_nbrs, alpha, preact, slope](ad::Node& node) {
            const Matrix& WH = node.parents[0]->value;
            const Vector al_vec = node.parents[1]->value.col(0);
            const Vector ar_vec = node.parents[2]->value.col(0);
            const int n = static_cast<int>(closed_nbrs->size());
            Matrix g_wh = Matrix::Zero(WH.rows(), WH.cols());
            Vector du = Vector::Zero(n), dv = Vector::Zero(n);
            for (int i = 0; i < n; ++i) {
                const auto& nbrs = (*closed_nbrs)[i];
                const auto& al = (*alpha)[i];
                const auto& pr = (*preact)[i];
                // d(loss)/d(alpha_ij) and the weighted-sum path to WH
                std::vector<double> dal(nbrs.size());
                double dot_sum = 0.0;
                for (std::size_t k = 0; k < nbrs.size(); ++k) {
                    dal[k] = node.grad.row(i).dot(WH.row(nbrs[k]));
                    g_wh.row(nbrs[k]) += al[k] * node.grad.row(i);
                    dot_sum += al[k] * dal[k];
                }
                for (std::size_t k = 0; k < nbrs.size(); ++k) {
                    const double ds = al[k] * (dal[k] - dot_sum);
                    const double de = ds * (pr[k] > 0.0 ? 1.0 : slope);
                    du[i] += de;
                    dv[nbrs[k]] += de;
                }
            }
            if (node.parents[0]->requires_grad) {
                g_wh += du * al_vec.transpose();
                g_wh += dv * ar_vec.transpose();
                node.parents[0]->grad_ref() += g_wh;
            }
            if (node.parents[1]->requires_grad)
                node.parents[1]->grad_ref().col(0) += WH.transpose() * du;
            if (node.parents[2]->requires_grad)
                node.parents[2]->grad_ref().col(0) += WH.transpose() * dv;
        });
}

struct GatLayer {
    Var weight;  // in x out
    Var attn_src, attn_dst;  // out x 1 halves of the attention vector

    static GatLayer create(ParamRegistry& reg, const std::string& name, int in, int out,
                           RngStream& rng) {
        return GatLayer{reg.create(name + ".W", glorot(in, out, rng)),
                        reg.create(name + ".a_src", glorot(out, 1, rng)),
                        reg.create(name + ".a_dst", glorot(out, 1, rng))};
    }

    Var forward(const std::shared_ptr<const std::vector<std::vector<int>>>& closed_nbrs,
                const Var& h, Activation act) const {
        return activate(
            gat_attention(closed_nbrs, ad::matmul(h, weight), attn_src, attn_dst), act);
    }
};

struct DenseLayer {
    Var weight;  // in x out
    Var bias;    // 1 x out

    static DenseLayer create(ParamRegistry& reg, const std::string& name, int in, int out,
                             RngStream& rng) {
        return DenseLayer{reg.create(name + ".W", glorot(in, out, rng)),
                          reg.create(name + ".b", Matrix::Zero(1, out))};
    }

    Var forward(const Var& h, Activation act = Activation::None) const {
        return activate(ad::add_bias(ad::matmul(h, weight), bias), act);
    }
};

/// Inverted dropout: identity in eval mode, scaled Bernoulli mask in training.
inline Var dropout(const Var& h, double rate, RngStream& rng, bool training) {
    require(rate >= 0.0 && rate < 1.0, "dropout rate must be in [0,1)");
    if (!training || rate == 0.0) return h;
    const double keep = 1.0 - rate;
    Matrix m(h->value.rows(), h->value.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return ad::mask(h, m);
}

/// Adaptive-moment optimizer with decoupled weight decay.
class AdamW {
public:
    AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamRegistry& reg) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (auto& p : reg.params()) {
            if (p.frozen) continue;
            if (p.var->grad.size() == 0) continue;  // unused this step
            const Matrix& g = p.var->grad;
            if (!g.allFinite())
                throw RuntimeFailure("non-finite gradient for parameter " + p.name);
            auto& s = slots_[p.name];
            if (s.m.size() == 0) {
                s.m = Matrix::Zero(g.rows(), g.cols());
                s.v = Matrix::Zero(g.rows(), g.cols());
            }
            s.m = beta1_ * s.m + (1.0 - beta1_) * g;
            s.v = beta2_ * s.v + (1.0 - beta2_) * g.cwiseProduct(g);
            Matrix& w = p.var->value;
            w -= lr_ * wd_ * w;
            w -= (lr_ / bc1) * s.m.cwiseQuotient(
                     ((s.v / bc2).cwiseSqrt().array() + eps_).matrix());
        }
    }

    long step_count() const { return t_; }

private:
    struct Slot {
        Matrix m, v;
    };
    double lr_, wd_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<std::string, Slot> slots_;
};

/// In-memory analogue of a checkpoint round trip: copies values between two
/// registries with identical parameter names and shapes.
inline void copy_state(const ParamRegistry& src, ParamRegistry& dst) {
    require(src.params().size() == dst.params().size(), "registry size mismatch");
    for (std::size_t i = 0; i < src.params().size(); ++i) {
        const auto& s = src.params()[i];
        auto& d = dst.params()[i];
        require(s.name == d.name, "registry name mismatch: " + s.name + " vs " + d.name);
        require(s.var->value.rows() == d.var->value.rows() &&
                    s.var->value.cols() == d.var->value.cols(),
                "registry shape mismatch for " + s.name);
        d.var->value = s.var->value;
    }
}

// ---- checkpoints ---------------------------------------------------------
// Textual key -> matrix map with shape headers and a config hash; values are
// printed with 17 significant digits so reload is bit-exact.

inline void save_checkpoint(const ParamRegistry& reg, std::uint64_t config_hash,
                            const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "cannot open checkpoint for writing: " + path.string());
    out << "adagad-checkpoint 1\n";
    out << "config_hash " << config_hash << "\n";
    char buf[64];
    for (const auto& p : reg.params()) {
        const Matrix& m = p.var->value;
        out << p.name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (int i = 0; i < m.rows(); ++i) {
            for (int j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
                out << buf << (j + 1 == m.cols() ? "" : " ");
            }
            out << '\n';
        }
    }
}

/// Loads values into an already-constructed registry; names and shapes must
/// match, and the stored config hash must equal `expected_hash`.
inline void load_checkpoint(ParamRegistry& reg, std::uint64_t expected_hash,
                            const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open checkpoint: " + path.string());
    std::string magic;
    int version;
    in >> magic >> version;
    require(magic == "adagad-checkpoint" && version == 1, "bad checkpoint header");
    std::string key;
    std::uint64_t hash;
    in >> key >> hash;
    require(key == "config_hash", "bad checkpoint header");
    if (hash != expected_hash)
        throw ValidationError("checkpoint config hash mismatch: expected " +
                              std::to_string(expected_hash) + ", found " +
                              std::to_string(hash));
    std::map<std::string, Matrix> values;
    std::string name;
    long rows, cols;
    while (in >> name >> rows >> cols) {
        Matrix m(rows, cols);
        for (long i = 0; i < rows; ++i)
            for (long j = 0; j < cols; ++j) in >> m(i, j);
        require(in.good() || in.eof(), "truncated checkpoint");
        values[name] = std::move(m);
    }
    for (auto& p : reg.params()) {
        auto it = values.find(p.name);
        require(it != values.end(), "checkpoint missing parameter " + p.name);
        require(it->second.rows() == p.var->value.rows() &&
                    it->second.cols() == p.var->value.cols(),
                "checkpoint shape mismatch for " + p.name);
        p.var->value = it->second;
    }
}

}  // namespace adagad::nn
