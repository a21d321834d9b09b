#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mugnn/error.hpp"

namespace mugnn {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t h = (static_cast<std::uint64_t>(t.head) << 32) ^ t.tail;
        h ^= static_cast<std::uint64_t>(t.relation) * 0x9E3779B97F4A7C15ULL;
        h ^= h >> 29;
        return static_cast<std::size_t>(h * 0xBF58476D1CE4E5B9ULL);
    }
};

namespace detail {

inline std::uint64_t pack(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
}

// Interns labels to dense ids in first-seen order.
class LabelTable {
public:
    std::uint32_t intern(std::string_view label) {
        auto it = ids_.find(std::string(label));
        if (it != ids_.end()) return it->second;
        auto id = static_cast<std::uint32_t>(labels_.size());
        labels_.emplace_back(label);
        ids_.emplace(labels_.back(), id);
        return id;
    }
    const std::uint32_t* find(std::string_view label) const {
        auto it = ids_.find(std::string(label));
        return it == ids_.end() ? nullptr : &it->second;
    }
    const std::string& label(std::uint32_t id) const { return labels_.at(id); }
    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }

    static LabelTable numbered(std::size_t n) {
        LabelTable t;
        for (std::size_t i = 0; i < n; ++i) t.intern(std::to_string(i));
        return t;
    }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

inline bool skippable(std::string_view line) {
    return line.find_first_not_of(" \t") == std::string_view::npos || line.front() == '#';
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

}  // namespace detail

// Directed multi-relational graph G = (E, R, T). Immutable once built; the
// triple list keeps insertion order so serialization reproduces the ids.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    KnowledgeGraph(std::size_t n_entities, std::size_t n_relations, std::span<const Triple> triples)
        : KnowledgeGraph(detail::LabelTable::numbered(n_entities),
                         detail::LabelTable::numbered(n_relations), triples) {}

    KnowledgeGraph(detail::LabelTable entities, detail::LabelTable relations,
                   std::span<const Triple> triples)
        : entities_(std::move(entities)), relations_(std::move(relations)) {
        by_head_.resize(entities_.size());
        by_tail_.resize(entities_.size());
        by_relation_.resize(relations_.size());
        for (const Triple& t : triples) add(t);
    }

    std::size_t num_entities() const { return entities_.size(); }
    std::size_t num_relations() const { return relations_.size(); }
    std::size_t num_triples() const { return triples_.size(); }

    const std::vector<Triple>& triples() const { return triples_; }
    bool contains(const Triple& t) const { return set_.contains(t); }

    // Indices into triples().
    const std::vector<std::uint32_t>& by_head(EntityId e) const { return by_head_.at(e); }
    const std::vector<std::uint32_t>& by_tail(EntityId e) const { return by_tail_.at(e); }
    const std::vector<std::uint32_t>& by_relation(RelationId r) const { return by_relation_.at(r); }

    std::span<const EntityId> tails(EntityId head, RelationId r) const {
        auto it = by_head_relation_.find(detail::pack(head, r));
        if (it == by_head_relation_.end()) return {};
        return it->second;
    }
    std::span<const RelationId> relations_between(EntityId head, EntityId tail) const {
        auto it = by_head_tail_.find(detail::pack(head, tail));
        if (it == by_head_tail_.end()) return {};
        return it->second;
    }
    bool has_fact(EntityId head, RelationId r) const {
        return by_head_relation_.contains(detail::pack(head, r));
    }

    // Sorted distinct tails of e's outgoing triples.
    std::vector<EntityId> out_neighbors(EntityId e) const {
        std::vector<EntityId> out;
        for (auto idx : by_head(e)) out.push_back(triples_[idx].tail);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    const std::string& entity_label(EntityId e) const { return entities_.label(e); }
    const std::string& relation_label(RelationId r) const { return relations_.label(r); }
    const EntityId* find_entity(std::string_view label) const { return entities_.find(label); }
    const RelationId* find_relation(std::string_view label) const { return relations_.find(label); }
    const detail::LabelTable& entity_table() const { return entities_; }
    const detail::LabelTable& relation_table() const { return relations_; }

    // New graph with the same id space and the extra triples appended.
    KnowledgeGraph with_added(std::span<const Triple> extra) const {
        std::vector<Triple> all = triples_;
        all.insert(all.end(), extra.begin(), extra.end());
        return KnowledgeGraph(entities_, relations_, all);
    }

private:
    void add(const Triple& t) {
        if (t.head >= num_entities() || t.tail >= num_entities() || t.relation >= num_relations())
            throw Error("triple references an id outside the graph");
        if (!set_.insert(t).second) return;
        auto idx = static_cast<std::uint32_t>(triples_.size());
        triples_.push_back(t);
        by_head_[t.head].push_back(idx);
        by_tail_[t.tail].push_back(idx);
        by_relation_[t.relation].push_back(idx);
        by_head_relation_[detail::pack(t.head, t.relation)].push_back(t.tail);
        by_head_tail_[detail::pack(t.head, t.tail)].push_back(t.relation);
    }

    detail::LabelTable entities_;
    detail::LabelTable relations_;
    std::vector<Triple> triples_;
    std::unordered_set<Triple, TripleHash> set_;
    std::vector<std::vector<std::uint32_t>> by_head_, by_tail_, by_relation_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> by_head_relation_;
    std::unordered_map<std::uint64_t, std::vector<RelationId>> by_head_tail_;
};

// Reads `head<TAB>relation<TAB>tail` lines. Blank and `#` lines are skipped.
inline KnowledgeGraph load_kg(std::istream& in) {
    detail::LabelTable entities, relations;
    std::vector<Triple> triples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = detail::strip_cr(line);
        if (detail::skippable(view)) continue;
        auto fields = detail::split_tabs(view);
        if (fields.size() != 3)
            throw ParseError("expected 3 tab-separated fields, got " + std::to_string(fields.size()),
                             lineno);
        Triple t;
        t.head = entities.intern(fields[0]);
        t.relation = relations.intern(fields[1]);
        t.tail = entities.intern(fields[2]);
        triples.push_back(t);
    }
    return KnowledgeGraph(std::move(entities), std::move(relations), triples);
}

inline KnowledgeGraph load_kg_file(const std::string& path) {
    auto in = detail::open_input(path);
    return load_kg(in);
}

inline void write_kg(std::ostream& out, const KnowledgeGraph& kg) {
    for (const Triple& t : kg.triples())
        out << kg.entity_label(t.head) << '\t' << kg.relation_label(t.relation) << '\t'
            << kg.entity_label(t.tail) << '\n';
}

using EntityPair = std::pair<EntityId, EntityId>;
using RelationPair = std::pair<RelationId, RelationId>;

// Prior alignments between G (first) and G' (second).
struct SeedAlignments {
    std::vector<EntityPair> entity_pairs;
    std::vector<RelationPair> relation_pairs;
};

namespace detail {

template <typename Resolve>
std::vector<std::pair<std::uint32_t, std::uint32_t>> read_pairs(std::istream& in, Resolve&& resolve) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    std::unordered_set<std::uint64_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = strip_cr(line);
        if (skippable(view)) continue;
        auto fields = split_tabs(view);
        if (fields.size() != 2)
            throw ParseError("expected 2 tab-separated fields, got " + std::to_string(fields.size()),
                             lineno);
        auto pair = resolve(fields[0], fields[1], lineno);
        if (seen.insert(pack(pair.first, pair.second)).second) out.push_back(pair);
    }
    return out;
}

}  // namespace detail

// Entity pairs may be many-to-many; relation pairs must be one-to-one.
inline SeedAlignments load_seed_alignments(std::istream& entity_source, std::istream* relation_source,
                                           const KnowledgeGraph& kg, const KnowledgeGraph& kg2) {
    SeedAlignments seeds;
    seeds.entity_pairs = detail::read_pairs(
        entity_source, [&](std::string_view l, std::string_view r, std::size_t lineno) {
            const EntityId* a = kg.find_entity(l);
            const EntityId* b = kg2.find_entity(r);
            if (!a) throw AlignmentError("unknown entity '" + std::string(l) + "' in first KG (line " +
                                         std::to_string(lineno) + ")");
            if (!b) throw AlignmentError("unknown entity '" + std::string(r) + "' in second KG (line " +
                                         std::to_string(lineno) + ")");
            return EntityPair{*a, *b};
        });
    if (!relation_source) return seeds;

    std::unordered_map<RelationId, RelationId> forward, backward;
    seeds.relation_pairs = detail::read_pairs(
        *relation_source, [&](std::string_view l, std::string_view r, std::size_t lineno) {
            const RelationId* a = kg.find_relation(l);
            const RelationId* b = kg2.find_relation(r);
            if (!a) throw AlignmentError("unknown relation '" + std::string(l) + "' in first KG (line " +
                                         std::to_string(lineno) + ")");
            if (!b) throw AlignmentError("unknown relation '" + std::string(r) + "' in second KG (line " +
                                         std::to_string(lineno) + ")");
            auto [f, fnew] = forward.emplace(*a, *b);
            auto [g, gnew] = backward.emplace(*b, *a);
            if (f->second != *b || g->second != *a)
                throw AlignmentError("conflicting relation alignment '" + std::string(l) + "' <-> '" +
                                     std::string(r) + "' (line " + std::to_string(lineno) + ")");
            return RelationPair{*a, *b};
        });
    return seeds;
}

inline SeedAlignments load_seed_alignment_files(const std::string& entity_path,
                                                const std::string& relation_path,
                                                const KnowledgeGraph& kg, const KnowledgeGraph& kg2) {
    auto ein = detail::open_input(entity_path);
    if (relation_path.empty()) return load_seed_alignments(ein, nullptr, kg, kg2);
    auto rin = detail::open_input(relation_path);
    return load_seed_alignments(ein, &rin, kg, kg2);
}

inline void write_entity_pairs(std::ostream& out, std::span<const EntityPair> pairs,
                               const KnowledgeGraph& kg, const KnowledgeGraph& kg2) {
    for (auto [a, b] : pairs) out << kg.entity_label(a) << '\t' << kg2.entity_label(b) << '\n';
}

struct SeedSplit {
    std::vector<EntityPair> train;
    std::vector<EntityPair> test;
};

// Shuffles with the given seed and takes round-half-up(fraction * n) pairs
// for training.
inline SeedSplit split_entity_seeds(std::span<const EntityPair> pairs, double train_fraction,
                                    std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0))
        throw Error("train_fraction must lie in [0, 1]");
    std::vector<EntityPair> shuffled(pairs.begin(), pairs.end());
    std::mt19937_64 rng(seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(shuffled.size()) + 0.5));
    n_train = std::min(n_train, shuffled.size());
    SeedSplit split;
    split.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    return split;
}

}  // namespace mugnn
