#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mugnn/adjacency.hpp"
#include "mugnn/channels.hpp"
#include "mugnn/encoder.hpp"
#include "mugnn/error.hpp"
#include "mugnn/kg.hpp"
#include "mugnn/model.hpp"
#include "mugnn/objectives.hpp"
#include "mugnn/rules.hpp"

namespace mugnn {

// Everything a training run reads besides parameters: the two completed
// graphs, the supervision and the groundings behind the rule constraints.
struct TrainingProblem {
    std::array<const KnowledgeGraph*, 2> graphs{nullptr, nullptr};
    std::vector<EntityPair> train_pairs;
    std::vector<RelationPair> relation_pairs;
    std::array<std::vector<RuleGrounding>, 2> groundings;
    std::array<WeightedAdjacency, 2> patterns;

    TrainingProblem(const KnowledgeGraph& first, const KnowledgeGraph& second)
        : graphs{&first, &second}, patterns{neighborhood_pattern(first), neighborhood_pattern(second)} {}

    ModelShape shape() const {
        return {{graphs[0]->num_entities(), graphs[1]->num_entities()},
                {graphs[0]->num_relations(), graphs[1]->num_relations()}};
    }
};

// Cross-KG adjacency for graph k: its own relation table against the other's.
inline CrossAttention cross_channel(const TrainingProblem& pb, const ModelParams& params, int k,
                                    const TrainConfig& cfg, KinkLog* kinks = nullptr) {
    return cross_kg_forward(*pb.graphs[k], pb.patterns[k], params.relations[k], params.relations[1 - k],
                            cfg.cross_row_normalize, kinks);
}

// Encoder outputs H^L for both graphs, inference mode.
inline std::array<Matrix, 2> encode(const TrainingProblem& pb, const ModelParams& params, const TrainConfig& cfg) {
    std::array<Matrix, 2> out;
    for (int k = 0; k < 2; ++k) {
        auto cross = cross_channel(pb, params, k, cfg);
        out[k] = multi_channel_forward_state(pb.patterns[k], cross.adjacency, params.encoder, params.entities[k])
                     .output;
    }
    return out;
}

// Nearest-neighbor negatives, rebuilt every `negative_refresh_epochs`.
struct NegativeCache {
    std::vector<std::vector<EntityId>> entity_left, entity_right;  // per train pair
    std::vector<std::vector<RelationId>> relation_left, relation_right;
    std::array<std::vector<std::optional<Triple>>, 2> triples;
    std::array<std::vector<std::optional<RuleGrounding>>, 2> groundings;
    std::size_t stamp = 0;

    bool due(std::size_t epoch, int refresh_every) const {
        return epoch - stamp >= static_cast<std::size_t>(refresh_every);
    }
};

inline NegativeCache build_negatives(const TrainingProblem& pb, const ModelParams& params, const TrainConfig& cfg,
                                     std::mt19937_64& rng, std::size_t epoch) {
    NegativeCache cache;
    cache.stamp = epoch;
    const auto k = static_cast<std::size_t>(cfg.negatives_k);
    const auto outputs = encode(pb, params, cfg);

    std::array<std::vector<std::vector<EntityId>>, 2> neighbors;
    for (int g = 0; g < 2; ++g) {
        std::vector<EntityId> all(pb.graphs[g]->num_entities());
        for (EntityId e = 0; e < all.size(); ++e) all[e] = e;
        neighbors[g] = sample_entity_negatives(outputs[g], all, k);
    }
    for (auto [a, b] : pb.train_pairs) {
        cache.entity_left.push_back(neighbors[0][a]);
        cache.entity_right.push_back(neighbors[1][b]);
    }
    std::vector<RelationId> rl, rr;
    for (auto [a, b] : pb.relation_pairs) {
        rl.push_back(a);
        rr.push_back(b);
    }
    if (!rl.empty()) {
        cache.relation_left = nearest_by_cosine(params.relations[0], rl, k);
        cache.relation_right = nearest_by_cosine(params.relations[1], rr, k);
    }
    for (int g = 0; g < 2; ++g) {
        cache.triples[g] = triple_negatives(pb.graphs[g]->triples(), neighbors[g], rng);
        cache.groundings[g] = grounding_negatives(pb.groundings[g], neighbors[g], rng);
    }
    return cache;
}

struct LossBreakdown {
    double align = 0.0;
    std::array<double, 2> rule{0.0, 0.0};
    double total = 0.0;           // L_a + L_r + L'_r
    double regularization = 0.0;  // l2/2 * sum of squared parameters
    double objective() const { return total + regularization; }
};

// Full forward pass and, when `grad` is given, reverse pass. `grad` must be
// shaped like `params` (see ModelParams::zeros_like) and is overwritten.
inline LossBreakdown compute_objective(const TrainingProblem& pb, const ModelParams& params,
                                       const NegativeCache& neg, const TrainConfig& cfg,
                                       ModelParams* grad = nullptr, std::mt19937_64* dropout_rng = nullptr,
                                       KinkLog* kinks = nullptr) {
    LossBreakdown out;
    std::array<CrossAttention, 2> cross;
    std::array<EncoderState, 2> states;
    for (int k = 0; k < 2; ++k) {
        cross[k] = cross_channel(pb, params, k, cfg, kinks);
        states[k] = multi_channel_forward_state(pb.patterns[k], cross[k].adjacency, params.encoder,
                                                params.entities[k], dropout_rng, kinks);
    }
    const Margins margins{cfg.gamma1, cfg.gamma2, cfg.gamma_r};

    AlignInputs in{pb.train_pairs, neg.entity_left, neg.entity_right,
                   pb.relation_pairs, neg.relation_left, neg.relation_right};
    AlignGrads ag;
    std::array<Matrix, 2> grad_out, grad_rel;
    if (grad) {
        for (int k = 0; k < 2; ++k) {
            ag.entity[k] = Matrix::Zero(states[k].output.rows(), states[k].output.cols());
            ag.relation[k] = Matrix::Zero(params.relations[k].rows(), params.relations[k].cols());
        }
    }
    out.align = align_loss(in, states[0].output, states[1].output, params.relations[0], params.relations[1],
                           margins, grad ? &ag : nullptr, kinks);
    for (int k = 0; k < 2; ++k) {
        if (grad) {
            grad_out[k] = std::move(ag.entity[k]);
            grad_rel[k] = std::move(ag.relation[k]);
        }
        RuleTerms terms{pb.groundings[k], neg.groundings[k], pb.graphs[k]->triples(), neg.triples[k]};
        out.rule[k] = rule_loss(terms, states[k].output, params.relations[k], cfg.gamma_r,
                                grad ? &grad_out[k] : nullptr, grad ? &grad_rel[k] : nullptr, kinks);
    }
    out.total = total_loss(out.align, out.rule[0], out.rule[1]);

    double sq = 0.0;
    params.for_each([&](const std::string&, const Matrix& m) { sq += m.squaredNorm(); });
    out.regularization = 0.5 * cfg.l2 * sq;

    if (!grad) return out;
    *grad = params.zeros_like();
    for (int k = 0; k < 2; ++k) {
        EncoderGrads eg = multi_channel_backward(states[k], cross[k].adjacency, params.encoder, grad_out[k]);
        grad->entities[k] += eg.input;
        grad->encoder.attention.W += eg.attention_W;
        grad->encoder.attention.p += eg.attention_p;
        for (std::size_t l = 0; l < eg.layers.size(); ++l)
            for (int c = 0; c < 2; ++c) grad->encoder.layers[l][c] += eg.layers[l][c];
        grad->relations[k] += grad_rel[k];
        cross_kg_backward(cross[k], params.relations[k], params.relations[1 - k], eg.cross, grad->relations[k],
                          grad->relations[1 - k]);
    }
    if (cfg.l2 > 0.0) {
        std::vector<const Matrix*> src;
        params.for_each([&](const std::string&, const Matrix& m) { src.push_back(&m); });
        std::size_t i = 0;
        grad->for_each([&](const std::string&, Matrix& g) { g += cfg.l2 * *src[i++]; });
    }
    return out;
}

struct LossRecord {
    std::size_t epoch = 0;
    double align = 0.0;
    double rule = 0.0;
    double rule2 = 0.0;
    double total = 0.0;
};

inline void write_loss_history(std::ostream& out, std::span<const LossRecord> history) {
    out << "epoch,L_a,L_r,L_r_prime,total\n";
    for (const auto& r : history)
        out << r.epoch << ',' << detail::format_double(r.align) << ',' << detail::format_double(r.rule) << ','
            << detail::format_double(r.rule2) << ',' << detail::format_double(r.total) << '\n';
}

// Adagrad with accumulated squared gradients; accumulators only grow.
class Adagrad {
public:
    Adagrad(const ModelParams& like, double lr, double eps) : acc_(like.zeros_like()), lr_(lr), eps_(eps) {}

    void step(ModelParams& params, const ModelParams& grad) {
        std::vector<const Matrix*> gs;
        grad.for_each([&](const std::string&, const Matrix& g) { gs.push_back(&g); });
        std::vector<Matrix*> as;
        acc_.for_each([&](const std::string&, Matrix& a) { as.push_back(&a); });
        std::size_t i = 0;
        params.for_each([&](const std::string&, Matrix& p) {
            const Matrix& g = *gs[i];
            Matrix& a = *as[i];
            ++i;
            a.array() += g.array().square();
            p.array() -= lr_ * g.array() / (a.array().sqrt() + eps_);
        });
    }

    const ModelParams& accumulators() const { return acc_; }

private:
    ModelParams acc_;
    double lr_, eps_;
};

struct TrainResult {
    ModelParams params;
    std::vector<LossRecord> history;
};

struct TrainHooks {
    // Called after each update with the epoch index and the optimizer.
    std::function<void(std::size_t, const ModelParams&, const Adagrad&)> after_epoch;
};

// Full-batch training. All randomness (initialization, dropout, negative
// corruption) derives from cfg.rng_seed.
inline TrainResult train(const TrainingProblem& pb, const TrainConfig& cfg, const TrainHooks& hooks = {}) {
    cfg.validate();
    if (pb.train_pairs.empty()) throw Error("training needs at least one seed entity pair");
    std::mt19937_64 rng(cfg.rng_seed);
    TrainResult result;
    result.params = init_params(pb.shape(), cfg, rng);
    Adagrad opt(result.params, cfg.learning_rate, cfg.adagrad_epsilon);
    NegativeCache neg;
    ModelParams grad;
    for (std::size_t epoch = 0; epoch < static_cast<std::size_t>(cfg.epochs); ++epoch) {
        if (epoch == 0 || neg.due(epoch, cfg.negative_refresh_epochs))
            neg = build_negatives(pb, result.params, cfg, rng, epoch);
        LossBreakdown loss = compute_objective(pb, result.params, neg, cfg, &grad, &rng);
        const std::pair<const char*, double> parts[] = {
            {"L_a", loss.align}, {"L_r", loss.rule[0]}, {"L_r_prime", loss.rule[1]},
            {"regularization", loss.regularization}};
        for (auto [name, v] : parts)
            if (!std::isfinite(v))
                throw NumericError("non-finite loss term " + std::string(name) + " at epoch " + std::to_string(epoch));
        result.history.push_back({epoch, loss.align, loss.rule[0], loss.rule[1], loss.total});
        opt.step(result.params, grad);
        if (hooks.after_epoch) hooks.after_epoch(epoch, result.params, opt);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Finite-difference verification of compute_objective's gradients.

struct GradientGroupReport {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // entries whose +/- step crossed a kink
};

struct GradientReport {
    std::vector<GradientGroupReport> groups;
    double min_slack = 0.0;

    double max_rel_error() const {
        double m = 0.0;
        for (const auto& g : groups) m = std::max(m, g.max_rel_error);
        return m;
    }
};

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps entries
// whose true gradient is ~0 from dividing round-off by round-off.
inline GradientReport gradient_check(const TrainingProblem& pb, const ModelParams& params, const NegativeCache& neg,
                                     TrainConfig cfg, double step = 1e-5, double floor = 1e-6) {
    cfg.dropout = 0.0;
    ModelParams grad;
    KinkLog base;
    compute_objective(pb, params, neg, cfg, &grad, nullptr, &base);
    GradientReport report;
    report.min_slack = base.min_slack;

    std::vector<const Matrix*> analytic;
    grad.for_each([&](const std::string&, const Matrix& g) { analytic.push_back(&g); });
    ModelParams probe = params;
    std::size_t idx = 0;
    probe.for_each([&](const std::string& name, Matrix& m) {
        GradientGroupReport gr{name};
        const Matrix& a = *analytic[idx++];
        for (Eigen::Index k = 0; k < m.size(); ++k) {
            const double orig = m.data()[k];
            KinkLog plus, minus;
            m.data()[k] = orig + step;
            const double fp = compute_objective(pb, probe, neg, cfg, nullptr, nullptr, &plus).objective();
            m.data()[k] = orig - step;
            const double fm = compute_objective(pb, probe, neg, cfg, nullptr, nullptr, &minus).objective();
            m.data()[k] = orig;
            if (plus.signature != base.signature || minus.signature != base.signature) {
                ++gr.skipped;
                continue;
            }
            const double numeric = (fp - fm) / (2.0 * step);
            const double an = a.data()[k];
            const double denom = std::max({std::abs(an), std::abs(numeric), floor});
            gr.max_rel_error = std::max(gr.max_rel_error, std::abs(an - numeric) / denom);
            ++gr.checked;
        }
        report.groups.push_back(gr);
    });
    return report;
}

}  // namespace mugnn
