#pragma once

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <vector>

#include "mugnn/kg.hpp"
#include "mugnn/numeric.hpp"

namespace mugnn {

// Sparse n x n nonnegative matrix in CSR layout with sorted column indices.
struct WeightedAdjacency {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<EntityId> col;
    std::vector<double> weight;

    std::size_t nnz() const { return col.size(); }
    std::size_t row_begin(std::size_t i) const { return row_ptr[i]; }
    std::size_t row_end(std::size_t i) const { return row_ptr[i + 1]; }

    double at(std::size_t i, std::size_t j) const {
        for (auto k = row_begin(i); k < row_end(i); ++k)
            if (col[k] == j) return weight[k];
        return 0.0;
    }
    double row_sum(std::size_t i) const {
        double s = 0.0;
        for (auto k = row_begin(i); k < row_end(i); ++k) s += weight[k];
        return s;
    }

    // A * H
    Matrix multiply(const Matrix& h) const {
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), h.cols());
        for (std::size_t i = 0; i < n; ++i)
            for (auto k = row_begin(i); k < row_end(i); ++k)
                out.row(static_cast<Eigen::Index>(i)) += weight[k] * h.row(col[k]);
        return out;
    }

    // A^T * G
    Matrix multiply_transposed(const Matrix& g) const {
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), g.cols());
        for (std::size_t i = 0; i < n; ++i)
            for (auto k = row_begin(i); k < row_end(i); ++k)
                out.row(col[k]) += weight[k] * g.row(static_cast<Eigen::Index>(i));
        return out;
    }

    Matrix to_dense() const {
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (auto k = row_begin(i); k < row_end(i); ++k) out(static_cast<Eigen::Index>(i), col[k]) = weight[k];
        return out;
    }
};

// Sparsity pattern N(i) ∪ {i} over out-neighbors, weights zero.
inline WeightedAdjacency neighborhood_pattern(const KnowledgeGraph& kg) {
    WeightedAdjacency a;
    a.n = kg.num_entities();
    a.row_ptr.assign(1, 0);
    for (EntityId i = 0; i < a.n; ++i) {
        auto nb = kg.out_neighbors(i);
        auto pos = std::lower_bound(nb.begin(), nb.end(), i);
        if (pos == nb.end() || *pos != i) nb.insert(pos, i);
        a.col.insert(a.col.end(), nb.begin(), nb.end());
        a.row_ptr.push_back(a.col.size());
    }
    a.weight.assign(a.col.size(), 0.0);
    return a;
}

// i<TAB>j<TAB>weight per stored entry.
inline void write_adjacency(std::ostream& out, const WeightedAdjacency& a) {
    auto old = out.precision(17);
    for (std::size_t i = 0; i < a.n; ++i)
        for (auto k = a.row_begin(i); k < a.row_end(i); ++k) out << i << '\t' << a.col[k] << '\t' << a.weight[k] << '\n';
    out.precision(old);
}

}  // namespace mugnn
