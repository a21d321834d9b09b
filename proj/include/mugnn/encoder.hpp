#pragma once

#include <array>
#include <random>
#include <span>
#include <vector>

#include "mugnn/adjacency.hpp"
#include "mugnn/channels.hpp"
#include "mugnn/numeric.hpp"

namespace mugnn {

// Weights of the two-channel encoder. One instance serves both graphs.
struct EncoderParams {
    AttentionParams attention;                 // shared across layers
    std::vector<std::array<Matrix, 2>> layers;  // [layer][channel]: 0 = self-attention, 1 = cross-KG
    double dropout = 0.2;

    std::size_t num_layers() const { return layers.size(); }
};

// sigma(A H W) with sigma = ReLU.
inline Matrix gnn_layer(const WeightedAdjacency& a, const Matrix& h, const Matrix& w) {
    return (a.multiply(h) * w).cwiseMax(0.0);
}

struct LayerState {
    Matrix input;
    SelfAttention attention;
    std::array<Matrix, 2> propagated;  // A_i H
    std::array<Matrix, 2> pre_activation;
    Matrix dropout_mask;  // empty when dropout is off
};

struct EncoderState {
    std::vector<LayerState> layers;
    Matrix output;
};

// Each layer runs both channels from the same input, average-pools them and
// (between layers, when an rng is supplied) applies inverted dropout. A1 is
// rebuilt from the current layer input; A2 is fixed for the pass.
inline EncoderState multi_channel_forward_state(const WeightedAdjacency& pattern, const WeightedAdjacency& cross,
                                                const EncoderParams& params, const Matrix& h0,
                                                std::mt19937_64* dropout_rng = nullptr,
                                                KinkLog* kinks = nullptr) {
    EncoderState st;
    Matrix h = h0;
    const std::size_t n_layers = params.num_layers();
    for (std::size_t l = 0; l < n_layers; ++l) {
        LayerState ls;
        ls.input = h;
        ls.attention = self_attention_forward(pattern, h, params.attention, kinks);
        ls.propagated[0] = ls.attention.adjacency.multiply(h);
        ls.propagated[1] = cross.multiply(h);
        Matrix pooled = Matrix::Zero(h.rows(), params.layers[l][0].cols());
        for (int c = 0; c < 2; ++c) {
            ls.pre_activation[c] = ls.propagated[c] * params.layers[l][c];
            if (kinks)
                for (Eigen::Index k = 0; k < ls.pre_activation[c].size(); ++k) kinks->sign(ls.pre_activation[c].data()[k]);
            pooled += 0.5 * ls.pre_activation[c].cwiseMax(0.0);
        }
        if (dropout_rng && params.dropout > 0.0 && l + 1 < n_layers) {
            std::bernoulli_distribution keep(1.0 - params.dropout);
            ls.dropout_mask.resize(pooled.rows(), pooled.cols());
            const double scale = 1.0 / (1.0 - params.dropout);
            for (Eigen::Index k = 0; k < pooled.size(); ++k)
                ls.dropout_mask.data()[k] = keep(*dropout_rng) ? scale : 0.0;
            pooled = pooled.cwiseProduct(ls.dropout_mask);
        }
        st.layers.push_back(std::move(ls));
        h = std::move(pooled);
    }
    st.output = std::move(h);
    return st;
}

inline Matrix multi_channel_forward(const KnowledgeGraph& kg, const WeightedAdjacency& cross,
                                    const EncoderParams& params, const Matrix& h0) {
    return multi_channel_forward_state(neighborhood_pattern(kg), cross, params, h0).output;
}

struct EncoderGrads {
    Matrix input;                               // dL/dH0
    std::vector<double> cross;                  // dL/dA2 per stored entry
    Matrix attention_W, attention_p;
    std::vector<std::array<Matrix, 2>> layers;
};

inline EncoderGrads multi_channel_backward(const EncoderState& st, const WeightedAdjacency& cross,
                                           const EncoderParams& params, const Matrix& grad_output) {
    EncoderGrads g;
    g.cross.assign(cross.nnz(), 0.0);
    g.attention_W = Matrix::Zero(params.attention.W.rows(), params.attention.W.cols());
    g.attention_p = Matrix::Zero(params.attention.p.rows(), params.attention.p.cols());
    g.layers.resize(params.num_layers());
    Matrix grad = grad_output;
    for (std::size_t l = params.num_layers(); l-- > 0;) {
        const LayerState& ls = st.layers[l];
        if (ls.dropout_mask.size() > 0) grad = grad.cwiseProduct(ls.dropout_mask);
        Matrix grad_in = Matrix::Zero(ls.input.rows(), ls.input.cols());
        for (int c = 0; c < 2; ++c) {
            Matrix dz = 0.5 * grad.cwiseProduct((ls.pre_activation[c].array() > 0.0).cast<double>().matrix());
            g.layers[l][c] = ls.propagated[c].transpose() * dz;
            Matrix dm = dz * params.layers[l][c].transpose();
            const WeightedAdjacency& a = c == 0 ? ls.attention.adjacency : cross;
            grad_in += a.multiply_transposed(dm);
            // dL/da_ij = dm_i . h_j
            std::vector<double> da(a.nnz());
            for (std::size_t i = 0; i < a.n; ++i)
                for (auto k = a.row_begin(i); k < a.row_end(i); ++k)
                    da[k] = dm.row(static_cast<Eigen::Index>(i)).dot(ls.input.row(a.col[k]));
            if (c == 0) {
                self_attention_backward(ls.attention, ls.input, params.attention, da, grad_in, g.attention_W,
                                        g.attention_p);
            } else {
                for (std::size_t k = 0; k < da.size(); ++k) g.cross[k] += da[k];
            }
        }
        grad = std::move(grad_in);
    }
    g.input = std::move(grad);
    return g;
}

}  // namespace mugnn
