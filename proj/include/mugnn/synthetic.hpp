#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "mugnn/kg.hpp"

namespace mugnn {

// Random connected graph: a random tree over all entities (so every entity
// occurs in some triple) topped up with random distinct triples.
inline std::vector<Triple> random_triples(std::size_t n_entities, std::size_t n_triples, std::size_t n_relations,
                                          std::mt19937_64& rng) {
    std::vector<Triple> out;
    std::unordered_set<Triple, TripleHash> seen;
    std::uniform_int_distribution<EntityId> ent(0, static_cast<EntityId>(n_entities - 1));
    std::uniform_int_distribution<RelationId> rel(0, static_cast<RelationId>(n_relations - 1));
    auto add = [&](Triple t) {
        if (seen.insert(t).second) out.push_back(t);
    };
    for (EntityId i = 1; i < n_entities; ++i) {
        std::uniform_int_distribution<EntityId> prior(0, i - 1);
        EntityId j = prior(rng);
        if (rng() & 1) add({i, rel(rng), j});
        else add({j, rel(rng), i});
    }
    const std::size_t cap = n_entities * n_entities * n_relations;
    while (out.size() < std::min(n_triples, cap)) add({ent(rng), rel(rng), ent(rng)});
    return out;
}

struct SyntheticPair {
    KnowledgeGraph first;
    KnowledgeGraph second;
    std::vector<EntityPair> entity_pairs;     // the complete ground-truth alignment
    std::vector<RelationPair> relation_pairs;
};

// Two isomorphic graphs: the second is a relabelled, reshuffled copy of the
// first, so interned ids differ between them.
inline SyntheticPair make_isomorphic_pair(std::size_t n_entities, std::size_t n_triples, std::size_t n_relations,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto base = random_triples(n_entities, n_triples, n_relations, rng);
    std::vector<Triple> shuffled = base;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    detail::LabelTable e1, r1, e2, r2;
    std::vector<Triple> t1, t2;
    for (const Triple& t : base)
        t1.push_back({e1.intern("e" + std::to_string(t.head)), r1.intern("r" + std::to_string(t.relation)),
                      e1.intern("e" + std::to_string(t.tail))});
    for (const Triple& t : shuffled)
        t2.push_back({e2.intern("f" + std::to_string(t.head)), r2.intern("q" + std::to_string(t.relation)),
                      e2.intern("f" + std::to_string(t.tail))});
    SyntheticPair out{KnowledgeGraph(e1, r1, t1), KnowledgeGraph(e2, r2, t2), {}, {}};
    for (EntityId i = 0; i < n_entities; ++i)
        out.entity_pairs.push_back({*out.first.find_entity("e" + std::to_string(i)),
                                    *out.second.find_entity("f" + std::to_string(i))});
    for (RelationId r = 0; r < n_relations; ++r) {
        auto a = out.first.find_relation("r" + std::to_string(r));
        auto b = out.second.find_relation("q" + std::to_string(r));
        if (a && b) out.relation_pairs.push_back({*a, *b});
    }
    return out;
}

}  // namespace mugnn
