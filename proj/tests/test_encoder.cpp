#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "mugnn/encoder.hpp"

using namespace mugnn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = nd(rng);
    return m;
}

EncoderParams random_encoder(Eigen::Index d, std::size_t layers, std::mt19937_64& rng) {
    EncoderParams p;
    p.attention = {random_matrix(d, d, rng), random_matrix(2 * d, 1, rng), 0.2};
    p.layers.resize(layers);
    for (auto& l : p.layers)
        for (auto& w : l) w = random_matrix(d, d, rng);
    p.dropout = 0.0;
    return p;
}

using Dense = std::vector<std::vector<double>>;

// Plain-loop two-channel forward pass over dense arrays.
Dense oracle_forward(std::size_t n, const std::vector<std::vector<int>>& adjacent, const Dense& cross,
                     const EncoderParams& params, Dense h) {
    const std::size_t d = h[0].size();
    auto at = [](const Matrix& m, std::size_t i, std::size_t j) {
        return m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    };
    for (const auto& layer : params.layers) {
        Dense wh(n, std::vector<double>(d, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < d; ++c) wh[i][r] += at(params.attention.W, r, c) * h[i][c];
        Dense a1(n, std::vector<double>(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> score(n, 0.0);
            double peak = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                if (!adjacent[i][j] && i != j) continue;
                double s = 0.0;
                for (std::size_t r = 0; r < d; ++r)
                    s += at(params.attention.p, r, 0) * wh[i][r] + at(params.attention.p, d + r, 0) * wh[j][r];
                score[j] = s > 0 ? s : 0.2 * s;
                peak = std::max(peak, score[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (adjacent[i][j] || i == j) z += std::exp(score[j] - peak);
            for (std::size_t j = 0; j < n; ++j)
                if (adjacent[i][j] || i == j) a1[i][j] = std::exp(score[j] - peak) / z;
        }
        Dense next(n, std::vector<double>(d, 0.0));
        for (int ch = 0; ch < 2; ++ch) {
            const Dense& a = ch == 0 ? a1 : cross;
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> ah(d, 0.0);
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t c = 0; c < d; ++c) ah[c] += a[i][j] * h[j][c];
                for (std::size_t c = 0; c < d; ++c) {
                    double v = 0.0;
                    for (std::size_t r = 0; r < d; ++r) v += ah[r] * at(layer[ch], r, c);
                    next[i][c] += 0.5 * std::max(0.0, v);
                }
            }
        }
        h = std::move(next);
    }
    return h;
}

}  // namespace

TEST(GnnLayer, IdentityPropagationIsRelu) {
    std::mt19937_64 rng(1);
    std::vector<Triple> none;
    KnowledgeGraph kg(4, 1, none);
    auto eye = neighborhood_pattern(kg);
    std::fill(eye.weight.begin(), eye.weight.end(), 1.0);
    Matrix h = random_matrix(4, 3, rng);
    EXPECT_EQ(gnn_layer(eye, h, Matrix::Identity(3, 3)), h.cwiseMax(0.0));
    EXPECT_EQ(gnn_layer(eye, Matrix::Zero(4, 3), random_matrix(3, 3, rng)), Matrix::Zero(4, 3));
}

TEST(GnnLayer, TwoNodeChainByHand) {
    std::vector<Triple> t{{0, 0, 1}};
    KnowledgeGraph kg(2, 1, t);
    auto a = neighborhood_pattern(kg);  // row 0: {0, 1}, row 1: {1}
    a.weight = {0.25, 0.75, 1.0};
    Matrix h(2, 1), w(1, 1);
    h << 2.0, -4.0;
    w << -0.5;
    Matrix out = gnn_layer(a, h, w);
    // row 0: (0.25*2 + 0.75*-4) * -0.5 = 1.25; row 1: -4 * -0.5 = 2
    EXPECT_DOUBLE_EQ(out(0, 0), 1.25);
    EXPECT_DOUBLE_EQ(out(1, 0), 2.0);
}

TEST(MultiChannel, MatchesStraightLineOracle) {
    std::mt19937_64 rng(2);
    std::vector<Triple> t{{0, 0, 1}, {1, 1, 2}, {2, 0, 0}, {0, 1, 2}};
    KnowledgeGraph kg(3, 2, t);
    const Eigen::Index d = 3;
    auto params = random_encoder(d, 2, rng);
    Matrix rel = random_matrix(2, d, rng), other = random_matrix(3, d, rng);
    auto cross = cross_kg_adjacency(kg, rel, other);
    Matrix h0 = random_matrix(3, d, rng);

    std::vector<std::vector<int>> adjacent(3, std::vector<int>(3, 0));
    for (const auto& x : t) adjacent[x.head][x.tail] = 1;
    Dense cross_dense(3, std::vector<double>(3, 0.0)), h(3, std::vector<double>(d));
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) cross_dense[i][j] = cross.at(i, j);
        for (Eigen::Index c = 0; c < d; ++c) h[i][static_cast<std::size_t>(c)] = h0(static_cast<Eigen::Index>(i), c);
    }
    auto want = oracle_forward(3, adjacent, cross_dense, params, h);
    Matrix got = multi_channel_forward(kg, cross, params, h0);
    for (std::size_t i = 0; i < 3; ++i)
        for (Eigen::Index c = 0; c < d; ++c)
            EXPECT_NEAR(got(static_cast<Eigen::Index>(i), c), want[i][static_cast<std::size_t>(c)], 1e-10);
}

TEST(MultiChannel, IdenticalChannelsCollapseToSingleStack) {
    std::mt19937_64 rng(3);
    auto kg = fixtures::random_kg(10, 30, 3, rng);
    auto params = random_encoder(4, 1, rng);
    params.layers[0][1] = params.layers[0][0];
    Matrix h0 = random_matrix(10, 4, rng);
    auto a1 = self_attention_adjacency(kg, h0, params.attention);
    Matrix got = multi_channel_forward(kg, a1, params, h0);
    EXPECT_LT((got - gnn_layer(a1, h0, params.layers[0][0])).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MultiChannel, PoolingIsChannelAverage) {
    std::mt19937_64 rng(4);
    auto kg = fixtures::random_kg(12, 40, 3, rng);
    auto params = random_encoder(5, 1, rng);
    Matrix h0 = random_matrix(12, 5, rng);
    auto cross = cross_kg_adjacency(kg, random_matrix(3, 5, rng), random_matrix(4, 5, rng));
    auto a1 = self_attention_adjacency(kg, h0, params.attention);
    Matrix x = gnn_layer(a1, h0, params.layers[0][0]), y = gnn_layer(cross, h0, params.layers[0][1]);
    Matrix got = multi_channel_forward(kg, cross, params, h0);
    EXPECT_LT((got - 0.5 * (x + y)).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_GE(got.minCoeff(), 0.0);
}

TEST(MultiChannel, PermutationEquivariant) {
    std::mt19937_64 rng(5);
    const std::size_t n = 15;
    auto triples = random_triples(n, 45, 3, rng);
    KnowledgeGraph kg(n, 3, triples);
    std::vector<EntityId> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Triple> moved;
    for (const auto& t : triples) moved.push_back({perm[t.head], t.relation, perm[t.tail]});
    KnowledgeGraph kg2(n, 3, moved);

    auto params = random_encoder(4, 2, rng);
    Matrix rel = random_matrix(3, 4, rng), other = random_matrix(3, 4, rng);
    Matrix h0 = random_matrix(static_cast<Eigen::Index>(n), 4, rng);
    Matrix h0p(h0.rows(), h0.cols());
    for (std::size_t i = 0; i < n; ++i) h0p.row(perm[i]) = h0.row(static_cast<Eigen::Index>(i));
    Matrix out = multi_channel_forward(kg, cross_kg_adjacency(kg, rel, other), params, h0);
    Matrix outp = multi_channel_forward(kg2, cross_kg_adjacency(kg2, rel, other), params, h0p);
    for (std::size_t i = 0; i < n; ++i)
        EXPECT_LT((outp.row(perm[i]) - out.row(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(MultiChannel, DropoutOnlyBetweenLayersAndDeterministicWhenOff) {
    std::mt19937_64 rng(6);
    auto kg = fixtures::random_kg(12, 40, 3, rng);
    auto params = random_encoder(4, 2, rng);
    params.dropout = 0.5;
    Matrix h0 = random_matrix(12, 4, rng);
    auto cross = cross_kg_adjacency(kg, random_matrix(3, 4, rng), random_matrix(3, 4, rng));
    auto pattern = neighborhood_pattern(kg);

    auto a = multi_channel_forward_state(pattern, cross, params, h0);
    auto b = multi_channel_forward_state(pattern, cross, params, h0);
    EXPECT_EQ(a.output, b.output);
    EXPECT_EQ(a.layers[0].dropout_mask.size(), 0);

    std::mt19937_64 drng(9);
    auto c = multi_channel_forward_state(pattern, cross, params, h0, &drng);
    ASSERT_EQ(c.layers[0].dropout_mask.size(), 12 * 4);
    EXPECT_EQ(c.layers[1].dropout_mask.size(), 0);
    for (Eigen::Index k = 0; k < c.layers[0].dropout_mask.size(); ++k) {
        double m = c.layers[0].dropout_mask.data()[k];
        EXPECT_TRUE(m == 0.0 || m == 2.0);
    }
}

TEST(MultiChannel, SharedWeightsSeenByBothGraphs) {
    std::mt19937_64 rng(7);
    auto g1 = fixtures::random_kg(10, 30, 3, rng);
    auto g2 = fixtures::random_kg(11, 30, 3, rng);
    auto params = random_encoder(4, 1, rng);
    Matrix h1 = random_matrix(10, 4, rng), h2 = random_matrix(11, 4, rng);
    auto c1 = cross_kg_adjacency(g1, random_matrix(3, 4, rng), random_matrix(3, 4, rng));
    auto c2 = cross_kg_adjacency(g2, random_matrix(3, 4, rng), random_matrix(3, 4, rng));
    Matrix before = multi_channel_forward(g2, c2, params, h2);
    multi_channel_forward(g1, c1, params, h1);
    params.layers[0][0] *= 2.0;  // one storage serves both graphs
    Matrix after = multi_channel_forward(g2, c2, params, h2);
    EXPECT_GT((after - before).cwiseAbs().maxCoeff(), 0.0);
}
