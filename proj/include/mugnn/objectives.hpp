#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "mugnn/kg.hpp"
#include "mugnn/numeric.hpp"
#include "mugnn/rules.hpp"

namespace mugnn {

struct Margins {
    double entity = 1.0;    // gamma_1
    double relation = 1.0;  // gamma_2
    double rule = 0.12;     // gamma_r
};

// For each anchor row, the k other rows with highest cosine similarity,
// ties broken by ascending id. Zero rows have cosine 0 with everything.
inline std::vector<std::vector<std::uint32_t>> nearest_by_cosine(const Matrix& embeds,
                                                                std::span<const std::uint32_t> anchors,
                                                                std::size_t k) {
    if (k == 0) throw Error("negative sample count must be at least 1");
    Matrix unit = embeds;
    for (Eigen::Index i = 0; i < unit.rows(); ++i) {
        double norm = unit.row(i).norm();
        if (norm > 0.0) unit.row(i) /= norm;
    }
    const auto n = static_cast<std::uint32_t>(embeds.rows());
    std::vector<std::vector<std::uint32_t>> out;
    out.reserve(anchors.size());
    std::vector<std::pair<double, std::uint32_t>> scored;
    for (std::uint32_t a : anchors) {
        Eigen::VectorXd sim = unit * unit.row(a).transpose();
        scored.clear();
        for (std::uint32_t j = 0; j < n; ++j)
            if (j != a) scored.emplace_back(-sim(j), j);
        const std::size_t take = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end());
        std::vector<std::uint32_t> ids(take);
        for (std::size_t i = 0; i < take; ++i) ids[i] = scored[i].second;
        out.push_back(std::move(ids));
    }
    return out;
}

inline std::vector<std::vector<EntityId>> sample_entity_negatives(const Matrix& embeds,
                                                                 std::span<const EntityId> anchors,
                                                                 std::size_t k = 25) {
    return nearest_by_cosine(embeds, anchors, k);
}

namespace detail {

// Adds sign * d||x - y||/dx to gx and the opposite to gy.
inline void distance_grad(const Matrix& left, Eigen::Index i, const Matrix& right, Eigen::Index j, double dist,
                          double sign, Matrix* gl, Matrix* gr) {
    if (!gl || dist <= 0.0) return;
    RowVector u = (left.row(i) - right.row(j)) / dist;
    gl->row(i) += sign * u;
    gr->row(j) -= sign * u;
}

}  // namespace detail

// Margin ranking over seed pairs: sum of [d(a, b) + margin - d(neg)]_+ where
// each negative replaces either the left side (from neg_left) or the right
// side (from neg_right) of the pair. d is the L2 distance.
inline double margin_alignment_loss(std::span<const std::pair<std::uint32_t, std::uint32_t>> pairs,
                                    std::span<const std::vector<std::uint32_t>> neg_left,
                                    std::span<const std::vector<std::uint32_t>> neg_right, const Matrix& left,
                                    const Matrix& right, double margin, Matrix* grad_left = nullptr,
                                    Matrix* grad_right = nullptr, KinkLog* kinks = nullptr) {
    double loss = 0.0;
    for (std::size_t m = 0; m < pairs.size(); ++m) {
        const auto a = static_cast<Eigen::Index>(pairs[m].first);
        const auto b = static_cast<Eigen::Index>(pairs[m].second);
        const double pos = (left.row(a) - right.row(b)).norm();
        if (kinks) kinks->sign(pos);
        auto term = [&](Eigen::Index na, Eigen::Index nb) {
            const double neg = (left.row(na) - right.row(nb)).norm();
            const double hinge = pos + margin - neg;
            if (kinks) {
                kinks->sign(hinge);
                kinks->sign(neg);
            }
            if (hinge <= 0.0) return;
            loss += hinge;
            detail::distance_grad(left, a, right, b, pos, 1.0, grad_left, grad_right);
            detail::distance_grad(left, na, right, nb, neg, -1.0, grad_left, grad_right);
        };
        if (m < neg_left.size())
            for (auto n : neg_left[m]) term(static_cast<Eigen::Index>(n), b);
        if (m < neg_right.size())
            for (auto n : neg_right[m]) term(a, static_cast<Eigen::Index>(n));
    }
    return loss;
}

struct AlignInputs {
    std::span<const EntityPair> entity_pairs;
    std::span<const std::vector<EntityId>> entity_neg_left, entity_neg_right;
    std::span<const RelationPair> relation_pairs;
    std::span<const std::vector<RelationId>> relation_neg_left, relation_neg_right;
};

struct AlignGrads {
    Matrix entity[2];
    Matrix relation[2];
};

// L_a: entity term with margin gamma_1 plus relation term with gamma_2.
inline double align_loss(const AlignInputs& in, const Matrix& entities, const Matrix& entities2,
                         const Matrix& relations, const Matrix& relations2, const Margins& margins,
                         AlignGrads* grads = nullptr, KinkLog* kinks = nullptr) {
    double loss = margin_alignment_loss(in.entity_pairs, in.entity_neg_left, in.entity_neg_right, entities,
                                        entities2, margins.entity, grads ? &grads->entity[0] : nullptr,
                                        grads ? &grads->entity[1] : nullptr, kinks);
    loss += margin_alignment_loss(in.relation_pairs, in.relation_neg_left, in.relation_neg_right, relations,
                                  relations2, margins.relation, grads ? &grads->relation[0] : nullptr,
                                  grads ? &grads->relation[1] : nullptr, kinks);
    return loss;
}

// I(t) = 1 - ||e_h + r - e_t|| / (3 sqrt(d)), clamped to [0, 1].
inline double triple_truth_value(const Triple& t, const Matrix& entities, const Matrix& relations) {
    const double d = static_cast<double>(entities.cols());
    const double res = (entities.row(t.head) + relations.row(t.relation) - entities.row(t.tail)).norm();
    return std::clamp(1.0 - res / (3.0 * std::sqrt(d)), 0.0, 1.0);
}

// Product t-norm for the premise conjunction, then I(s => c) = I(s) I(c) - I(s) + 1.
inline double implication_value(std::span<const double> premise_values, double conclusion_value) {
    double s = 1.0;
    for (double v : premise_values) s *= v;
    return s * conclusion_value - s + 1.0;
}

inline double grounding_truth_value(const RuleGrounding& g, const Matrix& entities, const Matrix& relations) {
    std::vector<double> premises;
    for (const auto& t : g.premises) premises.push_back(triple_truth_value(t, entities, relations));
    return implication_value(premises, triple_truth_value(g.conclusion, entities, relations));
}

namespace detail {

struct TruthEval {
    double value = 0.0;
    RowVector dir;  // d value / d e_h (= d value / d r = -d value / d e_t); zero when clamped
};

inline TruthEval truth_with_grad(const Triple& t, const Matrix& entities, const Matrix& relations, KinkLog* kinks) {
    const double scale = 3.0 * std::sqrt(static_cast<double>(entities.cols()));
    RowVector res = entities.row(t.head) + relations.row(t.relation) - entities.row(t.tail);
    const double norm = res.norm();
    const double raw = 1.0 - norm / scale;
    if (kinks) {
        kinks->sign(raw);
        kinks->sign(norm);
    }
    TruthEval out;
    out.value = std::clamp(raw, 0.0, 1.0);
    out.dir = RowVector::Zero(entities.cols());
    if (raw > 0.0 && norm > 0.0) out.dir = -res / (norm * scale);
    return out;
}

inline void push_truth_grad(const Triple& t, const TruthEval& e, double upstream, Matrix& ge, Matrix& gr) {
    if (upstream == 0.0) return;
    ge.row(t.head) += upstream * e.dir;
    gr.row(t.relation) += upstream * e.dir;
    ge.row(t.tail) -= upstream * e.dir;
}

// Value of a grounding and the partials with respect to each triple's truth value.
struct GroundingEval {
    double value = 0.0;
    std::vector<TruthEval> premises;
    TruthEval conclusion;
    std::vector<double> d_premise;
    double d_conclusion = 0.0;
};

inline GroundingEval grounding_with_grad(const RuleGrounding& g, const Matrix& ents, const Matrix& rels,
                                         KinkLog* kinks) {
    GroundingEval out;
    double s = 1.0;
    for (const auto& t : g.premises) {
        out.premises.push_back(truth_with_grad(t, ents, rels, kinks));
        s *= out.premises.back().value;
    }
    out.conclusion = truth_with_grad(g.conclusion, ents, rels, kinks);
    const double c = out.conclusion.value;
    out.value = s * c - s + 1.0;
    out.d_conclusion = s;
    for (std::size_t i = 0; i < g.premises.size(); ++i) {
        double others = 1.0;
        for (std::size_t j = 0; j < g.premises.size(); ++j)
            if (j != i) others *= out.premises[j].value;
        out.d_premise.push_back((c - 1.0) * others);
    }
    return out;
}

inline void push_grounding_grad(const RuleGrounding& g, const GroundingEval& e, double upstream, Matrix& ge,
                                Matrix& gr) {
    for (std::size_t i = 0; i < g.premises.size(); ++i)
        push_truth_grad(g.premises[i], e.premises[i], upstream * e.d_premise[i], ge, gr);
    push_truth_grad(g.conclusion, e.conclusion, upstream * e.d_conclusion, ge, gr);
}

}  // namespace detail

// Per-graph rule constraint L_r: hinge [gamma_r - I(pos) + I(neg)]_+ summed
// over paired grounding negatives and paired triple negatives. Negative
// vectors are index-aligned with the positives; a missing negative (none
// could be sampled) has `std::nullopt`.
struct RuleTerms {
    std::span<const RuleGrounding> groundings;
    std::span<const std::optional<RuleGrounding>> grounding_negatives;
    std::span<const Triple> triples;
    std::span<const std::optional<Triple>> triple_negatives;
};

inline double rule_loss(const RuleTerms& terms, const Matrix& entities, const Matrix& relations, double margin,
                        Matrix* grad_entities = nullptr, Matrix* grad_relations = nullptr,
                        KinkLog* kinks = nullptr) {
    double loss = 0.0;
    const bool want_grad = grad_entities && grad_relations;
    for (std::size_t m = 0; m < terms.groundings.size() && m < terms.grounding_negatives.size(); ++m) {
        if (!terms.grounding_negatives[m]) continue;
        const auto& pos = terms.groundings[m];
        const auto& neg = *terms.grounding_negatives[m];
        auto ep = detail::grounding_with_grad(pos, entities, relations, kinks);
        auto en = detail::grounding_with_grad(neg, entities, relations, kinks);
        const double hinge = margin - ep.value + en.value;
        if (kinks) kinks->sign(hinge);
        if (hinge <= 0.0) continue;
        loss += hinge;
        if (want_grad) {
            detail::push_grounding_grad(pos, ep, -1.0, *grad_entities, *grad_relations);
            detail::push_grounding_grad(neg, en, 1.0, *grad_entities, *grad_relations);
        }
    }
    for (std::size_t m = 0; m < terms.triples.size() && m < terms.triple_negatives.size(); ++m) {
        if (!terms.triple_negatives[m]) continue;
        const auto& pos = terms.triples[m];
        const auto& neg = *terms.triple_negatives[m];
        auto ep = detail::truth_with_grad(pos, entities, relations, kinks);
        auto en = detail::truth_with_grad(neg, entities, relations, kinks);
        const double hinge = margin - ep.value + en.value;
        if (kinks) kinks->sign(hinge);
        if (hinge <= 0.0) continue;
        loss += hinge;
        if (want_grad) {
            detail::push_truth_grad(pos, ep, -1.0, *grad_entities, *grad_relations);
            detail::push_truth_grad(neg, en, 1.0, *grad_entities, *grad_relations);
        }
    }
    return loss;
}

// L = L_a + L_r + L'_r
inline double total_loss(double align, double rule, double rule2) { return align + rule + rule2; }

// Replaces the head (side 0) or tail (side 1) of t with a random pick among
// that entity's nearest neighbors.
inline std::optional<Triple> corrupt_triple(const Triple& t, int side,
                                            std::span<const std::vector<EntityId>> neighbors,
                                            std::mt19937_64& rng) {
    const EntityId victim = side == 0 ? t.head : t.tail;
    const auto& pool = neighbors[victim];
    if (pool.empty()) return std::nullopt;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    Triple out = t;
    (side == 0 ? out.head : out.tail) = pool[pick(rng)];
    return out;
}

// One negative per triple, alternating head and tail corruption.
inline std::vector<std::optional<Triple>> triple_negatives(std::span<const Triple> triples,
                                                           std::span<const std::vector<EntityId>> neighbors,
                                                           std::mt19937_64& rng) {
    std::vector<std::optional<Triple>> out;
    out.reserve(triples.size());
    for (std::size_t m = 0; m < triples.size(); ++m)
        out.push_back(corrupt_triple(triples[m], static_cast<int>(m % 2), neighbors, rng));
    return out;
}

// One negative per grounding; the corrupted triple cycles over conclusion and
// premises, and the corrupted side alternates each full cycle.
inline std::vector<std::optional<RuleGrounding>> grounding_negatives(
    std::span<const RuleGrounding> groundings, std::span<const std::vector<EntityId>> neighbors,
    std::mt19937_64& rng) {
    std::vector<std::optional<RuleGrounding>> out;
    out.reserve(groundings.size());
    for (std::size_t m = 0; m < groundings.size(); ++m) {
        const auto& g = groundings[m];
        const std::size_t slots = g.premises.size() + 1;
        const std::size_t slot = m % slots;
        const int side = static_cast<int>((m / slots) % 2);
        const Triple& target = slot == 0 ? g.conclusion : g.premises[slot - 1];
        auto bad = corrupt_triple(target, side, neighbors, rng);
        if (!bad) {
            out.emplace_back(std::nullopt);
            continue;
        }
        RuleGrounding neg = g;
        (slot == 0 ? neg.conclusion : neg.premises[slot - 1]) = *bad;
        out.emplace_back(std::move(neg));
    }
    return out;
}

}  // namespace mugnn
