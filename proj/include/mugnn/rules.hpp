#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mugnn/error.hpp"
#include "mugnn/kg.hpp"

namespace mugnn {

// Variable layout of a closed rule whose conclusion is c(X, Y). One-premise
// shapes bind X and Y directly; two-premise shapes chain through Z, with the
// first premise touching X and the second touching Y.
enum class RulePattern : std::uint8_t {
    XY,     // a(X,Y)           => c(X,Y)
    YX,     // a(Y,X)           => c(X,Y)
    XZ_ZY,  // a(X,Z) & b(Z,Y)  => c(X,Y)
    XZ_YZ,  // a(X,Z) & b(Y,Z)  => c(X,Y)
    ZX_ZY,  // a(Z,X) & b(Z,Y)  => c(X,Y)
    ZX_YZ,  // a(Z,X) & b(Y,Z)  => c(X,Y)
};

inline constexpr std::array<RulePattern, 2> kSinglePremisePatterns{RulePattern::XY, RulePattern::YX};
inline constexpr std::array<RulePattern, 4> kChainPatterns{RulePattern::XZ_ZY, RulePattern::XZ_YZ,
                                                           RulePattern::ZX_ZY, RulePattern::ZX_YZ};

inline int premise_count(RulePattern p) { return p == RulePattern::XY || p == RulePattern::YX ? 1 : 2; }

inline std::string_view pattern_tag(RulePattern p) {
    switch (p) {
        case RulePattern::XY: return "XY";
        case RulePattern::YX: return "YX";
        case RulePattern::XZ_ZY: return "XZ,ZY";
        case RulePattern::XZ_YZ: return "XZ,YZ";
        case RulePattern::ZX_ZY: return "ZX,ZY";
        case RulePattern::ZX_YZ: return "ZX,YZ";
    }
    return "?";
}

inline std::optional<RulePattern> parse_pattern_tag(std::string_view tag) {
    for (auto p : {RulePattern::XY, RulePattern::YX, RulePattern::XZ_ZY, RulePattern::XZ_YZ,
                   RulePattern::ZX_ZY, RulePattern::ZX_YZ})
        if (pattern_tag(p) == tag) return p;
    return std::nullopt;
}

// Variables are 0 = X, 1 = Y, 2 = Z.
struct Atom {
    RelationId relation = 0;
    std::uint8_t subject = 0;
    std::uint8_t object = 0;
    friend bool operator==(const Atom&, const Atom&) = default;
};

// Horn rule (c | a[, b]) in canonical form: the pattern fixes the variable
// layout, so two rules are equal up to renaming iff their fields are equal.
struct HornRule {
    RulePattern pattern = RulePattern::XY;
    RelationId conclusion = 0;
    std::array<RelationId, 2> premises{0, 0};  // premises[1] is 0 for one-premise rules

    int num_premises() const { return premise_count(pattern); }

    std::vector<Atom> premise_atoms() const {
        const RelationId a = premises[0], b = premises[1];
        switch (pattern) {
            case RulePattern::XY: return {{a, 0, 1}};
            case RulePattern::YX: return {{a, 1, 0}};
            case RulePattern::XZ_ZY: return {{a, 0, 2}, {b, 2, 1}};
            case RulePattern::XZ_YZ: return {{a, 0, 2}, {b, 1, 2}};
            case RulePattern::ZX_ZY: return {{a, 2, 0}, {b, 2, 1}};
            case RulePattern::ZX_YZ: return {{a, 2, 0}, {b, 1, 2}};
        }
        return {};
    }
    Atom conclusion_atom() const { return {conclusion, 0, 1}; }

    friend bool operator==(const HornRule&, const HornRule&) = default;
    friend auto operator<=>(const HornRule&, const HornRule&) = default;
};

struct HornRuleHash {
    std::size_t operator()(const HornRule& r) const noexcept {
        std::uint64_t h = static_cast<std::uint64_t>(r.pattern);
        for (std::uint64_t v : {std::uint64_t{r.conclusion}, std::uint64_t{r.premises[0]},
                                std::uint64_t{r.premises[1]}})
            h = (h ^ v) * 0x100000001B3ULL + 0x9E3779B97F4A7C15ULL;
        return static_cast<std::size_t>(h);
    }
};

// Renames variables of an arbitrary atom list into canonical form. Returns
// nullopt for rules that are not closed, not connected, exceed two premises,
// or restate their conclusion as a premise.
inline std::optional<HornRule> canonicalize(const Atom& conclusion, std::span<const Atom> premises) {
    if (premises.empty() || premises.size() > 2) return std::nullopt;
    if (conclusion.subject == conclusion.object) return std::nullopt;
    const std::uint8_t x = conclusion.subject, y = conclusion.object;
    HornRule rule;
    rule.conclusion = conclusion.relation;
    if (premises.size() == 1) {
        const Atom& a = premises[0];
        if (a.subject == x && a.object == y) {
            if (a.relation == conclusion.relation) return std::nullopt;
            rule.pattern = RulePattern::XY;
        } else if (a.subject == y && a.object == x) {
            rule.pattern = RulePattern::YX;
        } else {
            return std::nullopt;
        }
        rule.premises = {a.relation, 0};
        return rule;
    }
    auto touches = [](const Atom& a, std::uint8_t v) { return a.subject == v || a.object == v; };
    auto other = [](const Atom& a, std::uint8_t v) { return a.subject == v ? a.object : a.subject; };
    const Atom* first = nullptr;
    const Atom* second = nullptr;
    for (int swap = 0; swap < 2 && !first; ++swap) {
        const Atom& p = premises[swap];
        const Atom& q = premises[1 - swap];
        if (touches(p, x) && !touches(p, y) && touches(q, y) && !touches(q, x)) {
            first = &p;
            second = &q;
        }
    }
    if (!first) return std::nullopt;
    const std::uint8_t z = other(*first, x);
    if (z == x || z == y || other(*second, y) != z) return std::nullopt;
    const bool a_forward = first->subject == x;    // a(X,Z)
    const bool b_forward = second->object == y;    // b(Z,Y)
    if (a_forward && b_forward) rule.pattern = RulePattern::XZ_ZY;
    else if (a_forward) rule.pattern = RulePattern::XZ_YZ;
    else if (b_forward) rule.pattern = RulePattern::ZX_ZY;
    else rule.pattern = RulePattern::ZX_YZ;
    rule.premises = {first->relation, second->relation};
    return rule;
}

struct MinedRule {
    HornRule rule;
    std::size_t support = 0;
    std::size_t pca_body = 0;  // bindings of the premises whose subject has some conclusion fact
    double pca_confidence = 0.0;
};

struct MiningOptions {
    int max_premises = 2;
    double min_pca_confidence = 0.8;
    std::size_t min_support = 2;
};

namespace detail {

// Distinct relations on e's outgoing triples, sorted.
inline std::vector<std::vector<RelationId>> head_relation_sets(const KnowledgeGraph& kg) {
    std::vector<std::vector<RelationId>> out(kg.num_entities());
    for (const Triple& t : kg.triples()) out[t.head].push_back(t.relation);
    for (auto& v : out) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return out;
}

// Scores every conclusion relation against one distinct binding set of (X, Y).
inline void score_bindings(const KnowledgeGraph& kg, const std::vector<std::vector<RelationId>>& head_rels,
                           std::span<const std::uint64_t> bindings, RulePattern pattern,
                           std::array<RelationId, 2> premises, const MiningOptions& opt,
                           std::vector<MinedRule>& out) {
    std::unordered_map<RelationId, std::pair<std::size_t, std::size_t>> counts;  // support, body
    for (std::uint64_t b : bindings) {
        const auto x = static_cast<EntityId>(b >> 32);
        const auto y = static_cast<EntityId>(b & 0xffffffffu);
        for (RelationId c : head_rels[x]) ++counts[c].second;
        for (RelationId c : kg.relations_between(x, y)) ++counts[c].first;
    }
    for (auto [c, sb] : counts) {
        auto [support, body] = sb;
        if (pattern == RulePattern::XY && c == premises[0]) continue;
        if (support == 0 || support < opt.min_support) continue;
        double conf = static_cast<double>(support) / static_cast<double>(body);
        if (conf < opt.min_pca_confidence) continue;
        out.push_back({HornRule{pattern, c, premises}, support, body, conf});
    }
}

inline void sort_unique(std::vector<std::uint64_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace detail

// Exhaustive closed-rule miner over the one- and two-premise shapes. Support
// counts distinct (X, Y) bindings satisfying premises and conclusion; the PCA
// denominator counts premise bindings whose X has at least one conclusion fact.
inline std::vector<MinedRule> mine_rules(const KnowledgeGraph& kg, const MiningOptions& opt = {}) {
    if (opt.max_premises < 1 || opt.max_premises > 2) throw Error("max_premises must be 1 or 2");
    std::vector<MinedRule> out;
    const auto head_rels = detail::head_relation_sets(kg);
    const auto& triples = kg.triples();

    for (RelationId a = 0; a < kg.num_relations(); ++a) {
        std::vector<std::uint64_t> xy, yx;
        for (auto idx : kg.by_relation(a)) {
            xy.push_back(detail::pack(triples[idx].head, triples[idx].tail));
            yx.push_back(detail::pack(triples[idx].tail, triples[idx].head));
        }
        detail::sort_unique(xy);
        detail::sort_unique(yx);
        detail::score_bindings(kg, head_rels, xy, RulePattern::XY, {a, 0}, opt, out);
        detail::score_bindings(kg, head_rels, yx, RulePattern::YX, {a, 0}, opt, out);
    }

    if (opt.max_premises == 2) {
        for (RelationId a = 0; a < kg.num_relations(); ++a) {
            for (RulePattern pattern : kChainPatterns) {
                const bool a_forward = pattern == RulePattern::XZ_ZY || pattern == RulePattern::XZ_YZ;
                const bool b_forward = pattern == RulePattern::XZ_ZY || pattern == RulePattern::ZX_ZY;
                std::unordered_map<RelationId, std::vector<std::uint64_t>> by_b;
                for (auto idx : kg.by_relation(a)) {
                    const Triple& t1 = triples[idx];
                    const EntityId x = a_forward ? t1.head : t1.tail;
                    const EntityId z = a_forward ? t1.tail : t1.head;
                    const auto& incident = b_forward ? kg.by_head(z) : kg.by_tail(z);
                    for (auto jdx : incident) {
                        const Triple& t2 = triples[jdx];
                        const EntityId y = b_forward ? t2.tail : t2.head;
                        by_b[t2.relation].push_back(detail::pack(x, y));
                    }
                }
                std::vector<RelationId> bs;
                for (auto& [b, v] : by_b) bs.push_back(b);
                std::sort(bs.begin(), bs.end());
                for (RelationId b : bs) {
                    auto& v = by_b[b];
                    detail::sort_unique(v);
                    detail::score_bindings(kg, head_rels, v, pattern, {a, b}, opt, out);
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const MinedRule& l, const MinedRule& r) { return l.rule < r.rule; });
    return out;
}

enum class TransferDirection { FirstToSecond, SecondToFirst };

// Substitutes every relation of each rule with its aligned counterpart;
// rules with any unaligned relation are skipped. Output is deduplicated and
// excludes rules already in `existing`.
inline std::vector<HornRule> transfer_rules(std::span<const HornRule> rules,
                                            std::span<const RelationPair> relation_pairs,
                                            TransferDirection direction,
                                            std::span<const HornRule> existing = {}) {
    std::unordered_map<RelationId, RelationId> map;
    for (auto [l, r] : relation_pairs) {
        if (direction == TransferDirection::FirstToSecond) map.emplace(l, r);
        else map.emplace(r, l);
    }
    std::unordered_set<HornRule, HornRuleHash> seen(existing.begin(), existing.end());
    std::vector<HornRule> out;
    for (const HornRule& rule : rules) {
        auto lookup = [&](RelationId r) -> std::optional<RelationId> {
            auto it = map.find(r);
            return it == map.end() ? std::nullopt : std::optional(it->second);
        };
        auto c = lookup(rule.conclusion);
        auto a = lookup(rule.premises[0]);
        std::optional<RelationId> b = rule.num_premises() == 2 ? lookup(rule.premises[1]) : RelationId{0};
        if (!c || !a || !b) continue;
        HornRule moved{rule.pattern, *c, {*a, *b}};
        if (seen.insert(moved).second) out.push_back(moved);
    }
    return out;
}

inline std::vector<HornRule> transfer_rules(std::span<const MinedRule> rules,
                                            std::span<const RelationPair> relation_pairs,
                                            TransferDirection direction,
                                            std::span<const HornRule> existing = {}) {
    std::vector<HornRule> plain;
    for (const auto& m : rules) plain.push_back(m.rule);
    return transfer_rules(std::span<const HornRule>(plain), relation_pairs, direction, existing);
}

struct RuleGrounding {
    std::vector<Triple> premises;
    Triple conclusion;
    HornRule rule;
    friend bool operator==(const RuleGrounding&, const RuleGrounding&) = default;
};

// All bindings whose premises are in T and whose conclusion is not, sorted by
// the bound (X, Y, Z).
inline std::vector<RuleGrounding> ground_rule(const KnowledgeGraph& kg, const HornRule& rule) {
    struct Bound {
        EntityId x, y, z;
        std::vector<Triple> premises;
    };
    std::vector<Bound> found;
    const auto& triples = kg.triples();
    const RelationId a = rule.premises[0], b = rule.premises[1];
    if (a >= kg.num_relations() || rule.conclusion >= kg.num_relations() ||
        (rule.num_premises() == 2 && b >= kg.num_relations()))
        throw Error("rule references a relation outside the graph");

    if (rule.num_premises() == 1) {
        for (auto idx : kg.by_relation(a)) {
            const Triple& t = triples[idx];
            EntityId x = rule.pattern == RulePattern::XY ? t.head : t.tail;
            EntityId y = rule.pattern == RulePattern::XY ? t.tail : t.head;
            if (kg.contains({x, rule.conclusion, y})) continue;
            found.push_back({x, y, 0, {t}});
        }
    } else {
        const bool a_forward = rule.pattern == RulePattern::XZ_ZY || rule.pattern == RulePattern::XZ_YZ;
        const bool b_forward = rule.pattern == RulePattern::XZ_ZY || rule.pattern == RulePattern::ZX_ZY;
        for (auto idx : kg.by_relation(a)) {
            const Triple& t1 = triples[idx];
            const EntityId x = a_forward ? t1.head : t1.tail;
            const EntityId z = a_forward ? t1.tail : t1.head;
            for (auto jdx : b_forward ? kg.by_head(z) : kg.by_tail(z)) {
                const Triple& t2 = triples[jdx];
                if (t2.relation != b) continue;
                const EntityId y = b_forward ? t2.tail : t2.head;
                if (kg.contains({x, rule.conclusion, y})) continue;
                found.push_back({x, y, z, {t1, t2}});
            }
        }
    }
    std::sort(found.begin(), found.end(), [](const Bound& l, const Bound& r) {
        return std::tie(l.x, l.y, l.z) < std::tie(r.x, r.y, r.z);
    });
    std::vector<RuleGrounding> out;
    out.reserve(found.size());
    for (auto& f : found) out.push_back({std::move(f.premises), Triple{f.x, rule.conclusion, f.y}, rule});
    return out;
}

struct Completion {
    KnowledgeGraph completed;
    std::vector<RuleGrounding> groundings;
    std::size_t new_triples = 0;
};

// Single pass: every rule is grounded against the input graph only.
inline Completion complete_kg(const KnowledgeGraph& kg, std::span<const HornRule> rules) {
    Completion result;
    std::unordered_set<HornRule, HornRuleHash> seen;
    std::vector<Triple> added;
    std::unordered_set<Triple, TripleHash> added_set;
    for (const HornRule& rule : rules) {
        if (!seen.insert(rule).second) continue;
        for (auto& g : ground_rule(kg, rule)) {
            if (added_set.insert(g.conclusion).second) added.push_back(g.conclusion);
            result.groundings.push_back(std::move(g));
        }
    }
    result.new_triples = added.size();
    result.completed = kg.with_added(added);
    return result;
}

// ---------------------------------------------------------------------------
// Text formats.
//
// Rule file, one rule per line:
//   c <- a[, b]<TAB>pattern<TAB>origin<TAB>support<TAB>pca_body<TAB>pca_confidence
// with `-` in the statistic columns for transferred rules.
//
// Grounding file, one grounding per line:
//   c <- a[, b]<TAB>pattern<TAB>ch<TAB>cr<TAB>ct<TAB>p1h<TAB>p1r<TAB>p1t[<TAB>p2h<TAB>p2r<TAB>p2t]

enum class RuleOrigin { Mined, Transferred };

struct RuleRecord {
    HornRule rule;
    RuleOrigin origin = RuleOrigin::Mined;
    std::optional<MinedRule> stats;
};

inline std::string rule_text(const HornRule& rule, const KnowledgeGraph& kg) {
    std::string s = kg.relation_label(rule.conclusion) + " <- " + kg.relation_label(rule.premises[0]);
    if (rule.num_premises() == 2) s += ", " + kg.relation_label(rule.premises[1]);
    return s;
}

namespace detail {

inline HornRule parse_rule_fields(std::string_view text, std::string_view tag, const KnowledgeGraph& kg,
                                  std::size_t lineno) {
    auto pattern = parse_pattern_tag(tag);
    if (!pattern) throw ParseError("unknown rule pattern '" + std::string(tag) + "'", lineno);
    auto arrow = text.find(" <- ");
    if (arrow == std::string_view::npos) throw ParseError("rule text lacks ' <- '", lineno);
    std::vector<std::string_view> names{text.substr(0, arrow)};
    std::string_view rest = text.substr(arrow + 4);
    if (premise_count(*pattern) == 2) {
        auto comma = rest.find(", ");
        if (comma == std::string_view::npos) throw ParseError("pattern needs two premises", lineno);
        names.push_back(rest.substr(0, comma));
        names.push_back(rest.substr(comma + 2));
    } else {
        names.push_back(rest);
    }
    std::vector<RelationId> ids;
    for (auto n : names) {
        const RelationId* id = kg.find_relation(n);
        if (!id) throw ParseError("unknown relation '" + std::string(n) + "'", lineno);
        ids.push_back(*id);
    }
    return HornRule{*pattern, ids[0], {ids[1], ids.size() > 2 ? ids[2] : RelationId{0}}};
}

inline Triple resolve_triple(std::span<const std::string_view> f, const KnowledgeGraph& kg, std::size_t lineno) {
    const EntityId* h = kg.find_entity(f[0]);
    const RelationId* r = kg.find_relation(f[1]);
    const EntityId* t = kg.find_entity(f[2]);
    if (!h || !r || !t)
        throw ParseError("grounding triple references unknown label '" + std::string(!h ? f[0] : !r ? f[1] : f[2]) +
                             "'",
                         lineno);
    return {*h, *r, *t};
}

}  // namespace detail

inline void write_rules(std::ostream& out, std::span<const RuleRecord> records, const KnowledgeGraph& kg) {
    for (const auto& rec : records) {
        out << rule_text(rec.rule, kg) << '\t' << pattern_tag(rec.rule.pattern) << '\t'
            << (rec.origin == RuleOrigin::Mined ? "mined" : "transferred");
        if (rec.stats) {
            std::ostringstream conf;
            conf.precision(17);
            conf << rec.stats->pca_confidence;
            out << '\t' << rec.stats->support << '\t' << rec.stats->pca_body << '\t' << conf.str() << '\n';
        } else {
            out << "\t-\t-\t-\n";
        }
    }
}

inline std::vector<RuleRecord> read_rules(std::istream& in, const KnowledgeGraph& kg) {
    std::vector<RuleRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = detail::strip_cr(line);
        if (detail::skippable(view)) continue;
        auto f = detail::split_tabs(view);
        if (f.size() != 6) throw ParseError("rule line needs 6 fields", lineno);
        RuleRecord rec;
        rec.rule = detail::parse_rule_fields(f[0], f[1], kg, lineno);
        if (f[2] == "mined") rec.origin = RuleOrigin::Mined;
        else if (f[2] == "transferred") rec.origin = RuleOrigin::Transferred;
        else throw ParseError("unknown rule origin '" + std::string(f[2]) + "'", lineno);
        if (f[3] != "-") {
            try {
                MinedRule m{rec.rule, std::stoull(std::string(f[3])), std::stoull(std::string(f[4])),
                            std::stod(std::string(f[5]))};
                rec.stats = m;
            } catch (const std::logic_error&) {
                throw ParseError("bad rule statistics", lineno);
            }
        }
        out.push_back(rec);
    }
    return out;
}

inline void write_groundings(std::ostream& out, std::span<const RuleGrounding> groundings,
                             const KnowledgeGraph& kg) {
    auto put = [&](const Triple& t) {
        out << '\t' << kg.entity_label(t.head) << '\t' << kg.relation_label(t.relation) << '\t'
            << kg.entity_label(t.tail);
    };
    for (const auto& g : groundings) {
        out << rule_text(g.rule, kg) << '\t' << pattern_tag(g.rule.pattern);
        put(g.conclusion);
        for (const auto& p : g.premises) put(p);
        out << '\n';
    }
}

inline std::vector<RuleGrounding> read_groundings(std::istream& in, const KnowledgeGraph& kg) {
    std::vector<RuleGrounding> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = detail::strip_cr(line);
        if (detail::skippable(view)) continue;
        auto f = detail::split_tabs(view);
        if (f.size() != 8 && f.size() != 11) throw ParseError("grounding line needs 8 or 11 fields", lineno);
        RuleGrounding g;
        g.rule = detail::parse_rule_fields(f[0], f[1], kg, lineno);
        if (static_cast<std::size_t>(g.rule.num_premises()) != (f.size() - 5) / 3)
            throw ParseError("premise count does not match the rule pattern", lineno);
        std::span<const std::string_view> fs(f);
        g.conclusion = detail::resolve_triple(fs.subspan(2, 3), kg, lineno);
        for (std::size_t i = 5; i < f.size(); i += 3) g.premises.push_back(detail::resolve_triple(fs.subspan(i, 3), kg, lineno));
        out.push_back(std::move(g));
    }
    return out;
}

// Counts in the layout of the rule statistics table: rules, transferred rules,
// new triples from all rules, new triples from transferred rules.
struct RuleStats {
    std::size_t rules = 0;
    std::size_t transferred_rules = 0;
    std::size_t ground = 0;
    std::size_t transferred_ground = 0;
};

inline RuleStats rule_stats(std::span<const RuleRecord> records, std::span<const RuleGrounding> groundings) {
    RuleStats s;
    std::unordered_set<HornRule, HornRuleHash> transferred;
    for (const auto& r : records) {
        ++s.rules;
        if (r.origin == RuleOrigin::Transferred) {
            ++s.transferred_rules;
            transferred.insert(r.rule);
        }
    }
    std::unordered_set<Triple, TripleHash> all, tr;
    for (const auto& g : groundings) {
        all.insert(g.conclusion);
        if (transferred.contains(g.rule)) tr.insert(g.conclusion);
    }
    s.ground = all.size();
    s.transferred_ground = tr.size();
    return s;
}

inline void write_rule_stats(std::ostream& out, std::string_view dataset, const RuleStats& s) {
    out << "dataset\t#Rule\t#Tr.Rule\t#Ground\t#Tr.ground\n"
        << dataset << '\t' << s.rules << '\t' << s.transferred_rules << '\t' << s.ground << '\t'
        << s.transferred_ground << '\n';
}

inline std::vector<HornRule> rules_of(std::span<const RuleRecord> records) {
    std::vector<HornRule> out;
    for (const auto& r : records) out.push_back(r.rule);
    return out;
}

}  // namespace mugnn
