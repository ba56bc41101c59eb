#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "adagad/common.hpp"

namespace adagad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Edge = std::pair<int, int>;  // canonical form u < v

/// Immutable attributed undirected graph. Edges are stored once in canonical
/// (u < v) sorted order; a per-node neighbor index is built at construction.
/// Anomaly labels are carried for evaluation only and deliberately have no
/// accessor on any training-facing path.
class Graph {
public:
    Graph(int n, std::vector<Edge> edges, Matrix attributes,
          std::optional<std::vector<int>> labels = std::nullopt)
        : n_(n), attributes_(std::move(attributes)), labels_(std::move(labels)) {
        require(n_ >= 1, "graph must have at least one node");
        require(attributes_.rows() == n_, "attribute matrix must have n rows");
        require(attributes_.allFinite(), "attributes contain a non-finite value");
        if (labels_) {
            require(static_cast<int>(labels_->size()) == n_, "label length mismatch");
            for (int v : *labels_) require(v == 0 || v == 1, "labels must be 0/1");
        }
        for (auto& [u, v] : edges) {
            require(u >= 0 && u < n_ && v >= 0 && v < n_, "edge endpoint out of range");
            require(u != v, "self-loop not allowed");
            if (u > v) std::swap(u, v);
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        edges_ = std::move(edges);

        adjacency_.resize(n_);
        for (const auto& [u, v] : edges_) {
            adjacency_[u].push_back(v);
            adjacency_[v].push_back(u);
        }
        for (auto& nbrs : adjacency_) std::sort(nbrs.begin(), nbrs.end());
    }

    int num_nodes() const { return n_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    int attr_dim() const { return static_cast<int>(attributes_.cols()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Matrix& attributes() const { return attributes_; }
    const std::vector<int>& neighbors(int i) const {
        require(i >= 0 && i < n_, "node index out of range");
        return adjacency_[i];
    }
    int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
    bool has_edge(int u, int v) const {
        const auto& nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), v);
    }

    /// Open or closed neighborhood of node i as a sorted set of ids.
    std::vector<int> neighborhood(int i, bool closed) const {
        std::vector<int> out = neighbors(i);
        if (closed) {
            out.insert(std::lower_bound(out.begin(), out.end(), i), i);
        }
        return out;
    }

    bool has_labels() const { return labels_.has_value(); }
    /// Evaluation-only accessor; see class comment.
    const std::vector<int>& eval_labels() const {
        require(labels_.has_value(), "graph carries no anomaly labels");
        return *labels_;
    }

    Graph with_attributes(Matrix x) const {
        return Graph(n_, edges_, std::move(x), labels_);
    }
    Graph with_edges(std::vector<Edge> e) const {
        return Graph(n_, std::move(e), attributes_, labels_);
    }
    Graph with_labels(std::vector<int> labels) const {
        return Graph(n_, edges_, attributes_, std::move(labels));
    }

private:
    int n_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> adjacency_;
    Matrix attributes_;
    std::optional<std::vector<int>> labels_;
};

/// Matrices derived from a Graph: the unnormalized Laplacian (kept implicit,
/// spectral code works edge-wise) and the self-loop-augmented symmetric
/// normalization A_hat = D~^{-1/2} (A + I) D~^{-1/2} used for message passing.
struct DerivedMatrices {
    Vector degree;                           // diagonal of D
    Eigen::SparseMatrix<double> norm_adj;    // A_hat, n x n
};

inline DerivedMatrices derive_matrices(const Graph& g) {
    const int n = g.num_nodes();
    DerivedMatrices out;
    out.degree.resize(n);
    for (int i = 0; i < n; ++i) out.degree[i] = g.degree(i);

    // self-loops make every augmented degree >= 1
    Vector inv_sqrt(n);
    for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(out.degree[i] + 1.0);

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * g.num_edges() + n);
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
    for (const auto& [u, v] : g.edges()) {
        const double w = inv_sqrt[u] * inv_sqrt[v];
        trip.emplace_back(u, v, w);
        trip.emplace_back(v, u, w);
    }
    out.norm_adj.resize(n, n);
    out.norm_adj.setFromTriplets(trip.begin(), trip.end());
    return out;
}

/// Dense n x n Laplacian L = D - A. Diagnostic/test use; the pipeline itself
/// only ever evaluates quadratic forms edge-wise.
inline Matrix dense_laplacian(const Graph& g) {
    const int n = g.num_nodes();
    Matrix L = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) L(i, i) = g.degree(i);
    for (const auto& [u, v] : g.edges()) {
        L(u, v) = -1.0;
        L(v, u) = -1.0;
    }
    return L;
}

/// Dense binary adjacency; only decoders/losses should densify.
inline Matrix dense_adjacency(const Graph& g) {
    const int n = g.num_nodes();
    Matrix A = Matrix::Zero(n, n);
    for (const auto& [u, v] : g.edges()) {
        A(u, v) = 1.0;
        A(v, u) = 1.0;
    }
    return A;
}

/// Sparse binary adjacency, row-major so per-row reconstruction targets can
/// be walked without densifying.
inline Eigen::SparseMatrix<double, Eigen::RowMajor> sparse_adjacency(const Graph& g) {
    const int n = g.num_nodes();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * g.edges().size());
    for (const auto& [u, v] : g.edges()) {
        trip.emplace_back(u, v, 1.0);
        trip.emplace_back(v, u, 1.0);
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    return A;
}

// ---- dataset directory format ------------------------------------------
// edges.tsv    one undirected edge per line, "u<TAB>v", 0-indexed
// features.csv n rows of d comma-separated floats, no header
// labels.csv   optional, n lines of 0/1

inline Graph load_graph(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path edges_path = dir / "edges.tsv";
    const fs::path feat_path = dir / "features.csv";
    const fs::path label_path = dir / "labels.csv";
    require(fs::exists(feat_path), "missing file: " + feat_path.string());
    require(fs::exists(edges_path), "missing file: " + edges_path.string());

    std::vector<std::vector<double>> rows;
    {
        std::ifstream in(feat_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<double> row;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ',')) {
                std::size_t pos = 0;
                double v;
                try {
                    v = std::stod(cell, &pos);
                } catch (const std::exception&) {
                    throw ValidationError("bad feature value '" + cell + "'");
                }
                require(std::isfinite(v), "non-finite feature value");
                row.push_back(v);
            }
            if (!rows.empty())
                require(row.size() == rows.front().size(), "ragged feature row");
            rows.push_back(std::move(row));
        }
    }
    require(!rows.empty(), "empty features.csv");
    const int n = static_cast<int>(rows.size());
    const int d = static_cast<int>(rows.front().size());
    Matrix X(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = rows[i][j];

    std::vector<Edge> edges;
    {
        std::ifstream in(edges_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            long long u, v;
            if (!(ss >> u >> v)) throw ValidationError("bad edge line '" + line + "'");
            require(u >= 0 && u < n && v >= 0 && v < n,
                    "edge endpoint out of range in '" + line + "'");
            edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
        }
    }

    std::optional<std::vector<int>> labels;
    if (fs::exists(label_path)) {
        std::vector<int> lab;
        std::ifstream in(label_path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            require(line == "0" || line == "1", "bad label line '" + line + "'");
            lab.push_back(line == "1" ? 1 : 0);
        }
        require(static_cast<int>(lab.size()) == n, "labels.csv length mismatch");
        labels = std::move(lab);
    }
    return Graph(n, std::move(edges), std::move(X), std::move(labels));
}

/// Fixed float formatting for the canonical writer: 9 significant digits.
inline std::string format_float(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline void write_graph(const Graph& g, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "edges.tsv");
        for (const auto& [u, v] : g.edges()) out << u << '\t' << v << '\n';
    }
    {
        std::ofstream out(dir / "features.csv");
        const Matrix& X = g.attributes();
        for (int i = 0; i < X.rows(); ++i) {
            for (int j = 0; j < X.cols(); ++j) {
                if (j) out << ',';
                out << format_float(X(i, j));
            }
            out << '\n';
        }
    }
    if (g.has_labels()) {
        std::ofstream out(dir / "labels.csv");
        for (int v : g.eval_labels()) out << v << '\n';
    }
}

}  // namespace adagad
