#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "mugnn/trainer.hpp"

using namespace mugnn;

namespace {

bool same_params(const ModelParams& a, const ModelParams& b) {
    std::vector<const Matrix*> xs;
    a.for_each([&](const std::string&, const Matrix& m) { xs.push_back(&m); });
    bool same = true;
    std::size_t i = 0;
    b.for_each([&](const std::string&, const Matrix& m) {
        const Matrix& x = *xs[i++];
        same = same && x.rows() == m.rows() && x.cols() == m.cols() && x == m;
    });
    return same && i == xs.size();
}

struct Synthetic {
    SyntheticPair pair;
    std::unique_ptr<TrainingProblem> problem;
    TrainConfig config;
};

Synthetic synthetic(std::size_t n = 30, std::size_t triples = 90) {
    Synthetic s{make_isomorphic_pair(n, triples, 3, 11), nullptr, {}};
    s.problem = std::make_unique<TrainingProblem>(s.pair.first, s.pair.second);
    auto split = split_entity_seeds(s.pair.entity_pairs, 0.3, 1);
    s.problem->train_pairs = split.train;
    s.problem->relation_pairs = s.pair.relation_pairs;
    s.config.embedding_dim = 16;
    s.config.negatives_k = 5;
    s.config.epochs = 20;
    return s;
}

}  // namespace

TEST(GradientCheck, EveryGroupWithinTolerance) {
    for (std::uint64_t seed : {1u, 2u}) {
        auto s = fixtures::small_instance(seed);
        auto report = gradient_check(*s.problem, s.params, s.negatives, s.config);
        ASSERT_EQ(report.groups.size(), 10u);
        for (const auto& g : report.groups) {
            EXPECT_GT(g.checked, 0u) << g.name;
            EXPECT_LT(g.max_rel_error, 1e-4) << g.name;
        }
    }
}

TEST(GradientCheck, CoarserStepIsWorse) {
    auto s = fixtures::small_instance(3);
    auto fine = gradient_check(*s.problem, s.params, s.negatives, s.config, 1e-5);
    auto coarse = gradient_check(*s.problem, s.params, s.negatives, s.config, 1e-3);
    EXPECT_GT(coarse.max_rel_error(), fine.max_rel_error());
}

TEST(GradientCheck, ZeroParametersGiveZeroDeadPathGradients) {
    auto s = fixtures::small_instance(4);
    ModelParams zero = s.params.zeros_like();
    ModelParams grad;
    compute_objective(*s.problem, zero, s.negatives, s.config, &grad);
    EXPECT_EQ(grad.encoder.attention.W.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(grad.encoder.attention.p.cwiseAbs().maxCoeff(), 0.0);
    for (const auto& layer : grad.encoder.layers)
        for (const auto& w : layer) EXPECT_EQ(w.cwiseAbs().maxCoeff(), 0.0);

    ModelParams probe = zero;
    const double h = 1e-5;
    for (std::size_t l = 0; l < probe.encoder.layers.size(); ++l) {
        for (int c = 0; c < 2; ++c) {
            Matrix& w = probe.encoder.layers[l][c];
            w(0, 0) = h;
            const double fp = compute_objective(*s.problem, probe, s.negatives, s.config).total;
            w(0, 0) = -h;
            const double fm = compute_objective(*s.problem, probe, s.negatives, s.config).total;
            w(0, 0) = 0.0;
            EXPECT_EQ(fp, fm);
        }
    }
}

TEST(Train, EpochsZeroReturnsInitialization) {
    auto s = synthetic();
    s.config.epochs = 0;
    auto result = train(*s.problem, s.config);
    std::mt19937_64 rng(s.config.rng_seed);
    EXPECT_TRUE(same_params(result.params, init_params(s.problem->shape(), s.config, rng)));
    EXPECT_TRUE(result.history.empty());
}

TEST(Train, SameSeedSameHistory) {
    auto s = synthetic();
    auto a = train(*s.problem, s.config);
    auto b = train(*s.problem, s.config);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        EXPECT_EQ(a.history[i].total, b.history[i].total);
        EXPECT_EQ(a.history[i].align, b.history[i].align);
    }
    EXPECT_TRUE(same_params(a.params, b.params));
    s.config.rng_seed = 2;
    auto c = train(*s.problem, s.config);
    EXPECT_NE(a.history.front().total, c.history.front().total);
}

TEST(Train, ZeroLearningRateLeavesParametersUnchanged) {
    auto s = synthetic();
    s.config.learning_rate = 0.0;
    auto result = train(*s.problem, s.config);
    std::mt19937_64 rng(s.config.rng_seed);
    EXPECT_TRUE(same_params(result.params, init_params(s.problem->shape(), s.config, rng)));
}

TEST(Train, AccumulatorsNondecreasingAndWeightsShared) {
    auto s = synthetic();
    ModelParams previous;
    bool first = true;
    std::size_t calls = 0;
    TrainHooks hooks;
    hooks.after_epoch = [&](std::size_t, const ModelParams& p, const Adagrad& opt) {
        ++calls;
        const ModelParams& acc = opt.accumulators();
        if (!first) {
            std::vector<const Matrix*> prev;
            previous.for_each([&](const std::string&, const Matrix& m) { prev.push_back(&m); });
            std::size_t i = 0;
            acc.for_each([&](const std::string& name, const Matrix& m) {
                EXPECT_TRUE((m.array() >= prev[i++]->array()).all()) << name;
            });
        }
        previous = acc;
        first = false;

        // Both graphs are encoded through the one encoder instance.
        auto both = encode(*s.problem, p, s.config);
        for (int k = 0; k < 2; ++k) {
            auto cross = cross_channel(*s.problem, p, k, s.config);
            Matrix alone =
                multi_channel_forward_state(s.problem->patterns[k], cross.adjacency, p.encoder, p.entities[k]).output;
            EXPECT_EQ(alone, both[k]);
        }
    };
    train(*s.problem, s.config, hooks);
    EXPECT_EQ(calls, static_cast<std::size_t>(s.config.epochs));
}

TEST(Train, LossDecreases) {
    auto s = synthetic();
    s.config.epochs = 60;
    auto result = train(*s.problem, s.config);
    EXPECT_LT(result.history.back().total, result.history.front().total);
}

TEST(Train, RejectsEmptySeedsAndReportsNonFiniteTerm) {
    auto s = synthetic();
    auto saved = s.problem->train_pairs;
    s.problem->train_pairs.clear();
    EXPECT_THROW(train(*s.problem, s.config), Error);
    s.problem->train_pairs = saved;

    s.config.learning_rate = 1e300;
    try {
        train(*s.problem, s.config);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite loss term"), std::string::npos);
    }
}

TEST(Train, NegativeCacheRefreshSchedule) {
    NegativeCache c;
    c.stamp = 10;
    EXPECT_FALSE(c.due(14, 5));
    EXPECT_TRUE(c.due(15, 5));
}

TEST(Adagrad, StepMatchesFormula) {
    ModelParams p;
    p.entities[0] = Matrix::Constant(1, 2, 1.0);
    p.entities[1] = p.relations[0] = p.relations[1] = Matrix::Zero(0, 2);
    p.encoder.attention.W = Matrix::Zero(0, 0);
    p.encoder.attention.p = Matrix::Zero(0, 0);
    Adagrad opt(p, 0.5, 1e-10);
    ModelParams g = p.zeros_like();
    g.entities[0] << 2.0, -1.0;
    opt.step(p, g);
    EXPECT_NEAR(p.entities[0](0, 0), 1.0 - 0.5 * 2.0 / (2.0 + 1e-10), 1e-15);
    opt.step(p, g);
    EXPECT_NEAR(p.entities[0](0, 1), 1.0 + 0.5 * 1.0 / (1.0 + 1e-10) + 0.5 / (std::sqrt(2.0) + 1e-10), 1e-15);
    EXPECT_EQ(opt.accumulators().entities[0](0, 0), 8.0);
}

TEST(Config, RoundTripAndErrors) {
    TrainConfig c;
    c.learning_rate = 0.0123;
    c.epochs = 7;
    c.cross_row_normalize = true;
    std::ostringstream out;
    write_config(out, c);
    std::istringstream in(out.str());
    TrainConfig back = read_config(in);
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_NE(config_hash(back), config_hash(TrainConfig{}));

    std::istringstream partial("# comment\n  epochs = 3 \n\ndropout=0\n");
    TrainConfig p = read_config(partial);
    EXPECT_EQ(p.epochs, 3);
    EXPECT_EQ(p.dropout, 0.0);
    EXPECT_EQ(p.embedding_dim, 128);

    std::istringstream unknown("bogus = 1\n");
    EXPECT_THROW(read_config(unknown), ConfigError);
    std::istringstream noeq("epochs 3\n");
    EXPECT_THROW(read_config(noeq), ConfigError);
    std::istringstream badnum("learning_rate = fast\n");
    EXPECT_THROW(read_config(badnum), ConfigError);
    std::istringstream invalid("dropout = 1.5\n");
    EXPECT_THROW(read_config(invalid), ConfigError);
    std::istringstream pool("pooling = max\n");
    EXPECT_THROW(read_config(pool), ConfigError);
}

TEST(Config, DefaultsAreTheReportedOptimum) {
    TrainConfig c;
    EXPECT_EQ(c.learning_rate, 0.001);
    EXPECT_EQ(c.l2, 0.01);
    EXPECT_EQ(c.dropout, 0.2);
    EXPECT_EQ(c.gamma_r, 0.12);
    EXPECT_EQ(c.embedding_dim, 128);
    EXPECT_EQ(c.layers, 2);
    EXPECT_EQ(c.negatives_k, 25);
    EXPECT_EQ(c.negative_refresh_epochs, 5);
    EXPECT_EQ(c.train_fraction, 0.3);
}

TEST(Checkpoint, RoundTripsExactly) {
    auto s = fixtures::small_instance(5);
    Checkpoint ck{s.params, 42, s.config, config_hash(s.config)};
    std::ostringstream out;
    write_checkpoint(out, ck);
    std::istringstream in(out.str());
    Checkpoint back = read_checkpoint(in);
    EXPECT_EQ(back.epoch, 42u);
    EXPECT_EQ(back.config_hash, ck.config_hash);
    EXPECT_TRUE(same_params(back.params, ck.params));
    std::ostringstream again;
    write_checkpoint(again, back);
    EXPECT_EQ(again.str(), out.str());

    std::string tampered = out.str();
    tampered.replace(tampered.find("epochs = "), 10, "epochs = 9");
    std::istringstream bad(tampered);
    EXPECT_THROW(read_checkpoint(bad), ParseError);
    std::istringstream truncated(out.str().substr(0, out.str().size() / 2));
    EXPECT_THROW(read_checkpoint(truncated), ParseError);
}

TEST(LossHistory, CsvLayout) {
    std::vector<LossRecord> h{{0, 1.5, 0.25, 0.125, 1.875}};
    std::ostringstream out;
    write_loss_history(out, h);
    EXPECT_EQ(out.str(), "epoch,L_a,L_r,L_r_prime,total\n0,1.5,0.25,0.125,1.875\n");
}
