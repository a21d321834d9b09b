#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mugnn/adjacency.hpp"
#include "mugnn/kg.hpp"
#include "mugnn/numeric.hpp"

namespace mugnn {

// Parameters of the self-attention scorer c_ij = LeakyReLU(p . [W h_i || W h_j]).
struct AttentionParams {
    Matrix W;  // d x d
    Matrix p;  // 2d x 1
    double leaky_slope = 0.2;

    Eigen::Index dim() const { return W.rows(); }
};

// Forward state of the self-attention channel, kept for backpropagation.
struct SelfAttention {
    WeightedAdjacency adjacency;  // softmax weights on the N(i) ∪ {i} pattern
    std::vector<double> logits;   // pre-LeakyReLU scores per stored entry
    Matrix projected;             // rows W h_i
};

inline SelfAttention self_attention_forward(const WeightedAdjacency& pattern, const Matrix& h,
                                            const AttentionParams& params, KinkLog* kinks = nullptr) {
    const Eigen::Index d = params.dim();
    SelfAttention out;
    out.adjacency = pattern;
    out.projected = h * params.W.transpose();
    Eigen::VectorXd src = out.projected * params.p.topRows(d);
    Eigen::VectorXd dst = out.projected * params.p.bottomRows(d);
    out.logits.resize(pattern.nnz());
    auto& w = out.adjacency.weight;
    for (std::size_t i = 0; i < pattern.n; ++i) {
        const auto b = pattern.row_begin(i), e = pattern.row_end(i);
        double peak = -std::numeric_limits<double>::infinity();
        for (auto k = b; k < e; ++k) {
            const double raw = src(static_cast<Eigen::Index>(i)) + dst(pattern.col[k]);
            note_sign(kinks, raw);
            out.logits[k] = raw;
            w[k] = raw > 0.0 ? raw : params.leaky_slope * raw;
            peak = std::max(peak, w[k]);
        }
        double z = 0.0;
        for (auto k = b; k < e; ++k) z += (w[k] = std::exp(w[k] - peak));
        for (auto k = b; k < e; ++k) w[k] /= z;
    }
    return out;
}

// Accumulates gradients of W, p and H given dL/da per stored entry.
inline void self_attention_backward(const SelfAttention& fw, const Matrix& h, const AttentionParams& params,
                                    std::span<const double> grad_weight, Matrix& grad_h, Matrix& grad_W,
                                    Matrix& grad_p) {
    const Eigen::Index d = params.dim();
    const auto& a = fw.adjacency;
    Eigen::VectorXd grad_src = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(a.n));
    Eigen::VectorXd grad_dst = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(a.n));
    for (std::size_t i = 0; i < a.n; ++i) {
        const auto b = a.row_begin(i), e = a.row_end(i);
        double dot = 0.0;
        for (auto k = b; k < e; ++k) dot += a.weight[k] * grad_weight[k];
        for (auto k = b; k < e; ++k) {
            double g = a.weight[k] * (grad_weight[k] - dot);
            if (fw.logits[k] <= 0.0) g *= params.leaky_slope;
            grad_src(static_cast<Eigen::Index>(i)) += g;
            grad_dst(a.col[k]) += g;
        }
    }
    grad_p.topRows(d) += fw.projected.transpose() * grad_src;
    grad_p.bottomRows(d) += fw.projected.transpose() * grad_dst;
    Matrix grad_proj = grad_src * params.p.topRows(d).transpose() + grad_dst * params.p.bottomRows(d).transpose();
    grad_W += grad_proj.transpose() * h;
    grad_h += grad_proj * params.W;
}

// A1: row-stochastic attention over out-neighbors plus a self-loop.
inline WeightedAdjacency self_attention_adjacency(const KnowledgeGraph& kg, const Matrix& h,
                                                  const AttentionParams& params) {
    return self_attention_forward(neighborhood_pattern(kg), h, params).adjacency;
}

// Forward state of the cross-KG channel. For each stored off-diagonal entry
// the (own, other) relation pair attaining the max is kept; -1 marks entries
// with no gradient path (self-loops and entries clamped to zero).
struct CrossAttention {
    WeightedAdjacency adjacency;
    std::vector<std::int32_t> arg_relation;
    std::vector<std::int32_t> arg_other;
    std::vector<double> row_total;  // row sums before normalization; empty when not normalized
};

inline CrossAttention cross_kg_forward(const KnowledgeGraph& kg, const WeightedAdjacency& pattern,
                                       const Matrix& relations, const Matrix& other_relations,
                                       bool row_normalize = false, KinkLog* kinks = nullptr) {
    CrossAttention out;
    out.adjacency = pattern;
    out.arg_relation.assign(pattern.nnz(), -1);
    out.arg_other.assign(pattern.nnz(), -1);

    // Best counterpart per own relation: max_r' r . r'
    const Eigen::Index n_rel = relations.rows();
    std::vector<double> best(static_cast<std::size_t>(n_rel), -std::numeric_limits<double>::infinity());
    std::vector<double> second(best);
    std::vector<std::int32_t> best_other(static_cast<std::size_t>(n_rel), -1);
    if (other_relations.rows() > 0) {
        Matrix sim = relations * other_relations.transpose();
        for (Eigen::Index r = 0; r < n_rel; ++r) {
            auto ru = static_cast<std::size_t>(r);
            for (Eigen::Index q = 0; q < sim.cols(); ++q) {
                if (sim(r, q) > best[ru]) {
                    second[ru] = best[ru];
                    best[ru] = sim(r, q);
                    best_other[ru] = static_cast<std::int32_t>(q);
                } else if (sim(r, q) > second[ru]) {
                    second[ru] = sim(r, q);
                }
            }
        }
    }

    for (std::size_t i = 0; i < pattern.n; ++i) {
        for (auto k = pattern.row_begin(i); k < pattern.row_end(i); ++k) {
            const EntityId j = pattern.col[k];
            if (j == i) {
                out.adjacency.weight[k] = 1.0;
                continue;
            }
            double top = -std::numeric_limits<double>::infinity();
            double runner = top;
            std::int32_t arg = -1;
            for (RelationId r : kg.relations_between(static_cast<EntityId>(i), j)) {
                double v = best[r];
                if (v > top) {
                    runner = std::max(runner, top);
                    top = v;
                    arg = static_cast<std::int32_t>(r);
                } else {
                    runner = std::max(runner, v);
                }
                runner = std::max(runner, second[r]);
            }
            if (kinks) {
                kinks->choice(arg < 0 ? -1 : arg * (other_relations.rows() + 1) + best_other[static_cast<std::size_t>(arg)],
                              std::isfinite(runner) ? top - runner : std::numeric_limits<double>::infinity());
                kinks->sign(top);
            }
            if (arg >= 0 && top > 0.0) {
                out.adjacency.weight[k] = top;
                out.arg_relation[k] = arg;
                out.arg_other[k] = best_other[static_cast<std::size_t>(arg)];
            } else {
                out.adjacency.weight[k] = 0.0;
            }
        }
    }

    if (row_normalize) {
        out.row_total.resize(pattern.n);
        for (std::size_t i = 0; i < pattern.n; ++i) {
            double s = out.adjacency.row_sum(i);
            out.row_total[i] = s;
            for (auto k = pattern.row_begin(i); k < pattern.row_end(i); ++k) out.adjacency.weight[k] /= s;
        }
    }
    return out;
}

// Routes dL/da per entry to the argmax relation pair (subgradient of max).
inline void cross_kg_backward(const CrossAttention& fw, const Matrix& relations, const Matrix& other_relations,
                              std::span<const double> grad_weight, Matrix& grad_relations,
                              Matrix& grad_other) {
    const auto& a = fw.adjacency;
    for (std::size_t i = 0; i < a.n; ++i) {
        const auto b = a.row_begin(i), e = a.row_end(i);
        double dot = 0.0;
        if (!fw.row_total.empty())
            for (auto k = b; k < e; ++k) dot += a.weight[k] * grad_weight[k];
        for (auto k = b; k < e; ++k) {
            if (fw.arg_relation[k] < 0) continue;
            double g = grad_weight[k];
            if (!fw.row_total.empty()) g = (g - dot) / fw.row_total[i];
            const auto r = fw.arg_relation[k], q = fw.arg_other[k];
            grad_relations.row(r) += g * other_relations.row(q);
            grad_other.row(q) += g * relations.row(r);
        }
    }
}

// A2: a_ij = max(0, max over relations r linking i -> j and all r' of the
// other graph of r . r'), plus a unit self-loop.
inline WeightedAdjacency cross_kg_adjacency(const KnowledgeGraph& kg, const Matrix& relations,
                                            const Matrix& other_relations, bool row_normalize = false) {
    return cross_kg_forward(kg, neighborhood_pattern(kg), relations, other_relations, row_normalize).adjacency;
}

}  // namespace mugnn
