#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mugnn/kg.hpp"
#include "mugnn/numeric.hpp"
#include "mugnn/trainer.hpp"

namespace mugnn {

enum class RankDirection { SourceToTarget, TargetToSource, Averaged };

inline std::string to_string(RankDirection d) {
    switch (d) {
        case RankDirection::SourceToTarget: return "source_to_target";
        case RankDirection::TargetToSource: return "target_to_source";
        case RankDirection::Averaged: return "averaged";
    }
    return "?";
}

struct MetricsReport {
    std::map<int, double> hits_at;
    double mrr = 0.0;
    RankDirection direction = RankDirection::SourceToTarget;
    std::size_t n_test = 0;
    std::size_t candidates = 0;
};

// 1-based rank of `target` among all rows of `candidates` by ascending L2
// distance to `query`; equal distances rank the lower id first.
inline std::size_t rank_of(const Matrix& queries, Eigen::Index query, const Matrix& candidates, Eigen::Index target) {
    const double dt = (queries.row(query) - candidates.row(target)).squaredNorm();
    std::size_t rank = 1;
    for (Eigen::Index j = 0; j < candidates.rows(); ++j) {
        if (j == target) continue;
        const double dj = (queries.row(query) - candidates.row(j)).squaredNorm();
        if (dj < dt || (dj == dt && j < target)) ++rank;
    }
    return rank;
}

inline MetricsReport metrics_from_ranks(std::span<const std::size_t> ranks, std::span<const int> hits_at) {
    MetricsReport r;
    r.n_test = ranks.size();
    for (int n : hits_at) r.hits_at[n] = 0.0;
    if (ranks.empty()) return r;
    for (std::size_t rank : ranks) {
        r.mrr += 1.0 / static_cast<double>(rank);
        for (int n : hits_at)
            if (rank <= static_cast<std::size_t>(n)) r.hits_at[n] += 1.0;
    }
    const auto count = static_cast<double>(ranks.size());
    r.mrr /= count;
    for (auto& [n, v] : r.hits_at) v /= count;
    return r;
}

inline MetricsReport evaluate_alignment(std::span<const EntityPair> test_pairs, const Matrix& embeds,
                                        const Matrix& embeds2, std::span<const int> hits_at = std::vector<int>{1, 10},
                                        RankDirection direction = RankDirection::SourceToTarget) {
    if (test_pairs.empty()) throw Error("evaluation needs at least one test pair");
    auto one_way = [&](bool forward) {
        std::vector<std::size_t> ranks;
        ranks.reserve(test_pairs.size());
        for (auto [a, b] : test_pairs)
            ranks.push_back(forward ? rank_of(embeds, a, embeds2, b) : rank_of(embeds2, b, embeds, a));
        auto r = metrics_from_ranks(ranks, hits_at);
        r.candidates = static_cast<std::size_t>(forward ? embeds2.rows() : embeds.rows());
        return r;
    };
    if (direction != RankDirection::Averaged) {
        auto r = one_way(direction == RankDirection::SourceToTarget);
        r.direction = direction;
        return r;
    }
    auto f = one_way(true), b = one_way(false);
    MetricsReport r = f;
    r.direction = RankDirection::Averaged;
    r.mrr = 0.5 * (f.mrr + b.mrr);
    for (auto& [n, v] : r.hits_at) v = 0.5 * (f.hits_at[n] + b.hits_at[n]);
    r.candidates = (f.candidates + b.candidates) / 2;
    return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json hits = nlohmann::json::object();
    for (auto [n, v] : r.hits_at) hits[std::to_string(n)] = v;
    return {{"hits", hits},
            {"mrr", r.mrr},
            {"direction", to_string(r.direction)},
            {"n_test", r.n_test},
            {"candidates", r.candidates}};
}

struct SweepRow {
    double fraction = 0.0;
    double hits1 = 0.0;
    double hits10 = 0.0;
    double mrr = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<std::string> skipped;  // one message per fraction that could not run
};

// Trains once per train fraction on the given seed pool and evaluates on the
// complementary split. Every run uses cfg.rng_seed.
inline SweepResult seed_sweep(const KnowledgeGraph& first, const KnowledgeGraph& second,
                              std::span<const EntityPair> all_pairs, std::span<const RelationPair> relation_pairs,
                              const std::array<std::vector<RuleGrounding>, 2>& groundings, const TrainConfig& cfg,
                              std::span<const double> fractions = std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5},
                              RankDirection direction = RankDirection::SourceToTarget) {
    SweepResult out;
    for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) {
            out.skipped.push_back("fraction " + detail::format_double(f) + " outside (0, 1]");
            continue;
        }
        auto split = split_entity_seeds(all_pairs, f, cfg.rng_seed);
        if (split.test.empty()) {
            out.skipped.push_back("fraction " + detail::format_double(f) + " leaves no test pairs");
            continue;
        }
        if (split.train.empty()) {
            out.skipped.push_back("fraction " + detail::format_double(f) + " leaves no training pairs");
            continue;
        }
        TrainingProblem pb(first, second);
        pb.train_pairs = split.train;
        pb.relation_pairs.assign(relation_pairs.begin(), relation_pairs.end());
        pb.groundings = groundings;
        TrainConfig run = cfg;
        run.train_fraction = f;
        auto trained = train(pb, run);
        auto emb = encode(pb, trained.params, run);
        auto m = evaluate_alignment(split.test, emb[0], emb[1], std::vector<int>{1, 10}, direction);
        out.rows.push_back({f, m.hits_at[1], m.hits_at[10], m.mrr});
    }
    return out;
}

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "fraction,hits1,hits10,mrr\n";
    for (const auto& r : rows)
        out << detail::format_double(r.fraction) << ',' << detail::format_double(r.hits1) << ','
            << detail::format_double(r.hits10) << ',' << detail::format_double(r.mrr) << '\n';
}

}  // namespace mugnn
