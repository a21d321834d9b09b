#pragma once

#include <memory>
#include <random>
#include <vector>

#include "mugnn/mugnn.hpp"

namespace fixtures {

inline mugnn::KnowledgeGraph random_kg(std::size_t n_entities, std::size_t n_triples, std::size_t n_relations,
                                       std::mt19937_64& rng) {
    auto triples = mugnn::random_triples(n_entities, n_triples, n_relations, rng);
    return mugnn::KnowledgeGraph(n_entities, n_relations, triples);
}

// A small two-graph training instance with rule groundings, relation seeds
// and a frozen negative cache. Graphs live on the heap so the problem's
// pointers stay valid.
struct SmallInstance {
    std::unique_ptr<mugnn::KnowledgeGraph> first, second;
    std::unique_ptr<mugnn::TrainingProblem> problem;
    mugnn::TrainConfig config;
    mugnn::ModelParams params;
    mugnn::NegativeCache negatives;
};

inline SmallInstance small_instance(std::uint64_t seed, std::size_t n1 = 24, std::size_t n2 = 28, int dim = 8) {
    std::mt19937_64 rng(seed);
    SmallInstance s;
    s.first = std::make_unique<mugnn::KnowledgeGraph>(random_kg(n1, 60, 4, rng));
    s.second = std::make_unique<mugnn::KnowledgeGraph>(random_kg(n2, 70, 5, rng));
    s.problem = std::make_unique<mugnn::TrainingProblem>(*s.first, *s.second);
    auto& pb = *s.problem;
    for (mugnn::EntityId i = 0; i < 8; ++i) pb.train_pairs.push_back({i, i + 2});
    pb.relation_pairs = {{0, 1}, {1, 0}, {2, 3}};

    // Keep a few groundings of every shape that has any.
    for (int k = 0; k < 2; ++k) {
        const auto& kg = *pb.graphs[k];
        for (auto pattern : {mugnn::RulePattern::YX, mugnn::RulePattern::XZ_ZY, mugnn::RulePattern::ZX_YZ}) {
            mugnn::HornRule rule{pattern, 0, {1, mugnn::premise_count(pattern) == 2 ? 2u : 0u}};
            auto gs = mugnn::ground_rule(kg, rule);
            if (gs.size() > 4) gs.resize(4);
            pb.groundings[k].insert(pb.groundings[k].end(), gs.begin(), gs.end());
        }
    }

    s.config.embedding_dim = dim;
    s.config.dropout = 0.0;
    s.config.negatives_k = 4;
    s.params = mugnn::init_params(pb.shape(), s.config, rng);
    s.negatives = mugnn::build_negatives(pb, s.params, s.config, rng, 0);
    return s;
}

}  // namespace fixtures
