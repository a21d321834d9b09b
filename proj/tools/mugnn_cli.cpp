// mugnn: command-line front end for the entity-alignment pipeline.
//
//   mine -> transfer -> ground -> train -> eval   (plus sweep and synth)
//
// Stages talk to each other only through files. Exit status identifies the
// failure class; see the Exit enum.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mugnn/mugnn.hpp"

namespace fs = std::filesystem;
using namespace mugnn;

namespace {

enum Exit : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kParse = 4,
    kConfig = 5,
    kAlignment = 6,
    kNumeric = 7,
    kExists = 8,
};

class OutputExists : public Error {
public:
    using Error::Error;
};

// Outputs are checked up front so a run never stops halfway through
// clobbering earlier results.
void claim_outputs(const std::vector<std::string>& paths, bool force) {
    for (const auto& p : paths)
        if (!p.empty() && !force && fs::exists(p))
            throw OutputExists("refusing to overwrite " + p + " (pass --force)");
}

template <typename Write>
void write_file(const std::string& path, Write&& write) {
    std::ostringstream buf;
    write(buf);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << buf.str();
    if (!out.flush()) throw IoError("failed writing " + path);
}

std::ifstream open(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

std::vector<RelationPair> load_relation_pairs(const std::string& path, const KnowledgeGraph& g1,
                                              const KnowledgeGraph& g2) {
    if (path.empty()) return {};
    std::istringstream none;
    auto in = open(path);
    return load_seed_alignments(none, &in, g1, g2).relation_pairs;
}

std::vector<EntityPair> load_entity_pairs(const std::string& path, const KnowledgeGraph& g1,
                                          const KnowledgeGraph& g2) {
    auto in = open(path);
    return load_seed_alignments(in, nullptr, g1, g2).entity_pairs;
}

std::vector<RuleRecord> load_rules(const std::string& path, const KnowledgeGraph& kg) {
    auto in = open(path);
    return read_rules(in, kg);
}

std::vector<RuleGrounding> load_groundings(const std::string& path, const KnowledgeGraph& kg) {
    if (path.empty()) return {};
    auto in = open(path);
    return read_groundings(in, kg);
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

RankDirection parse_direction(const std::string& s) {
    if (s == "source_to_target") return RankDirection::SourceToTarget;
    if (s == "target_to_source") return RankDirection::TargetToSource;
    return RankDirection::Averaged;
}

// Shared by train and sweep: config file, then flag overrides.
struct TrainingInputs {
    std::string kg1, kg2, seeds, relation_seeds, groundings1, groundings2, config;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int epochs = -1;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--kg1", kg1, "completed triples of the first graph")->required();
        cmd->add_option("--kg2", kg2, "completed triples of the second graph")->required();
        cmd->add_option("--seeds", seeds, "entity alignment pairs, left<TAB>right")->required();
        cmd->add_option("--relation-seeds", relation_seeds, "relation alignment pairs");
        cmd->add_option("--groundings1", groundings1, "grounding records for the first graph");
        cmd->add_option("--groundings2", groundings2, "grounding records for the second graph");
        cmd->add_option("--config", config, "key = value hyperparameter file");
        cmd->add_option("--seed", seed, "rng seed; overrides rng_seed from the config")
            ->each([this](const std::string&) { seed_given = true; });
        cmd->add_option("--epochs", epochs, "overrides epochs from the config");
    }

    TrainConfig load_config() const {
        TrainConfig cfg;
        if (!config.empty()) {
            auto in = open(config);
            cfg = read_config(in);
        }
        if (seed_given) cfg.rng_seed = seed;
        if (epochs >= 0) cfg.epochs = epochs;
        cfg.validate();
        return cfg;
    }
};

struct Graphs {
    KnowledgeGraph first, second;
    std::array<std::vector<RuleGrounding>, 2> groundings;
    std::vector<RelationPair> relation_pairs;
};

Graphs load_graphs(const TrainingInputs& in) {
    Graphs g{load_kg_file(in.kg1), load_kg_file(in.kg2), {}, {}};
    g.groundings[0] = load_groundings(in.groundings1, g.first);
    g.groundings[1] = load_groundings(in.groundings2, g.second);
    g.relation_pairs = load_relation_pairs(in.relation_seeds, g.first, g.second);
    return g;
}

int run(int argc, char** argv) {
    CLI::App app{"Multi-channel graph neural network entity alignment with rule-based KG completion"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    // mine
    std::string mine_kg, mine_out, mine_stats, mine_dataset;
    MiningOptions mine_opt;
    bool force = false;
    auto* mine = app.add_subcommand("mine", "mine closed Horn rules from one graph");
    mine->add_option("--kg", mine_kg, "triples, head<TAB>relation<TAB>tail")->required();
    mine->add_option("--out", mine_out, "rule file to write")->required();
    mine->add_option("--stats", mine_stats, "rule statistics TSV to write")->required();
    mine->add_option("--min-pca-conf", mine_opt.min_pca_confidence, "minimum PCA confidence")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    mine->add_option("--max-premises", mine_opt.max_premises, "maximum premises per rule")
        ->capture_default_str()
        ->check(CLI::Range(1, 2));
    mine->add_option("--min-support", mine_opt.min_support, "minimum support")->capture_default_str();
    mine->add_option("--dataset", mine_dataset, "dataset name for the statistics row (default: file stem)");
    mine->add_flag("--force", force, "overwrite existing outputs");

    // transfer
    std::string tr_kg1, tr_kg2, tr_rules1, tr_rules2, tr_rel, tr_out1, tr_out2;
    auto* transfer = app.add_subcommand("transfer", "exchange rules between graphs through aligned relations");
    transfer->add_option("--kg1", tr_kg1, "triples of the first graph")->required();
    transfer->add_option("--kg2", tr_kg2, "triples of the second graph")->required();
    transfer->add_option("--rules1", tr_rules1, "rule file of the first graph")->required();
    transfer->add_option("--rules2", tr_rules2, "rule file of the second graph")->required();
    transfer->add_option("--relation-seeds", tr_rel, "relation alignment pairs")->required();
    transfer->add_option("--out1", tr_out1, "first graph's rules plus those transferred in")->required();
    transfer->add_option("--out2", tr_out2, "second graph's rules plus those transferred in")->required();
    transfer->add_flag("--force", force, "overwrite existing outputs");

    // ground
    std::string gr_kg, gr_rules, gr_out_kg, gr_out_g, gr_stats, gr_dataset;
    auto* ground = app.add_subcommand("ground", "ground rules and complete the graph");
    ground->add_option("--kg", gr_kg, "triples")->required();
    ground->add_option("--rules", gr_rules, "rule file")->required();
    ground->add_option("--out-kg", gr_out_kg, "completed triples to write")->required();
    ground->add_option("--out-groundings", gr_out_g, "grounding records to write")->required();
    ground->add_option("--stats", gr_stats, "rule statistics TSV to write");
    ground->add_option("--dataset", gr_dataset, "dataset name for the statistics row (default: file stem)");
    ground->add_flag("--force", force, "overwrite existing outputs");

    // train
    TrainingInputs tin;
    std::string tr_checkpoint, tr_loss, tr_train_pairs, tr_test_pairs;
    auto* trainc = app.add_subcommand("train", "train the encoder on a seed split");
    tin.add_to(trainc);
    trainc->add_option("--checkpoint", tr_checkpoint, "checkpoint to write")->required();
    trainc->add_option("--loss", tr_loss, "loss history CSV to write")->required();
    trainc->add_option("--test-pairs", tr_test_pairs, "held-out pairs to write")->required();
    trainc->add_option("--train-pairs", tr_train_pairs, "training pairs to write");
    trainc->add_flag("--force", force, "overwrite existing outputs");

    // eval
    std::string ev_kg1, ev_kg2, ev_ck, ev_pairs, ev_out, ev_direction = "source_to_target";
    std::vector<int> ev_hits{1, 10};
    auto* evalc = app.add_subcommand("eval", "rank counterparts with a trained checkpoint");
    evalc->add_option("--kg1", ev_kg1, "completed triples of the first graph")->required();
    evalc->add_option("--kg2", ev_kg2, "completed triples of the second graph")->required();
    evalc->add_option("--checkpoint", ev_ck, "checkpoint from train")->required();
    evalc->add_option("--pairs", ev_pairs, "pairs to evaluate, left<TAB>right")->required();
    evalc->add_option("--out", ev_out, "metrics JSON to write")->required();
    evalc->add_option("--direction", ev_direction, "ranking direction")
        ->capture_default_str()
        ->check(CLI::IsMember({"source_to_target", "target_to_source", "averaged"}));
    evalc->add_option("--hits", ev_hits, "N values for Hits@N")->delimiter(',')->capture_default_str();
    evalc->add_flag("--force", force, "overwrite existing outputs");

    // sweep
    TrainingInputs sin;
    std::string sw_out, sw_direction = "source_to_target";
    std::vector<double> sw_fractions{0.1, 0.2, 0.3, 0.4, 0.5};
    auto* sweep = app.add_subcommand("sweep", "train once per seed fraction and report metrics");
    sin.add_to(sweep);
    sweep->add_option("--fractions", sw_fractions, "training fractions")->delimiter(',')->capture_default_str();
    sweep->add_option("--out", sw_out, "CSV to write")->required();
    sweep->add_option("--direction", sw_direction, "ranking direction")
        ->capture_default_str()
        ->check(CLI::IsMember({"source_to_target", "target_to_source", "averaged"}));
    sweep->add_flag("--force", force, "overwrite existing outputs");

    // synth
    std::size_t sy_entities = 100, sy_triples = 300, sy_relations = 5;
    std::uint64_t sy_seed = 7;
    std::string sy_dir;
    auto* synth = app.add_subcommand("synth", "write two isomorphic random graphs with their alignment");
    synth->add_option("--out-dir", sy_dir, "directory for kg1.tsv, kg2.tsv, ent_links.tsv, rel_links.tsv")
        ->required();
    synth->add_option("--entities", sy_entities, "entities per graph")->capture_default_str();
    synth->add_option("--triples", sy_triples, "triples per graph")->capture_default_str();
    synth->add_option("--relations", sy_relations, "relations per graph")->capture_default_str();
    synth->add_option("--seed", sy_seed, "rng seed")->capture_default_str();
    synth->add_flag("--force", force, "overwrite existing outputs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "mugnn: " << e.what() << "\n\n";
        const CLI::App* shown = &app;
        for (const auto* sub : app.get_subcommands({})) if (sub->parsed()) shown = sub;
        std::cerr << shown->help();
        return kUsage;
    }

    if (mine->parsed()) {
        claim_outputs({mine_out, mine_stats}, force);
        auto kg = load_kg_file(mine_kg);
        auto mined = mine_rules(kg, mine_opt);
        std::vector<RuleRecord> records;
        for (const auto& m : mined) records.push_back({m.rule, RuleOrigin::Mined, m});
        auto done = complete_kg(kg, rules_of(records));
        auto stats = rule_stats(records, done.groundings);
        write_file(mine_out, [&](std::ostream& o) { write_rules(o, records, kg); });
        write_file(mine_stats, [&](std::ostream& o) {
            write_rule_stats(o, mine_dataset.empty() ? stem(mine_kg) : mine_dataset, stats);
        });
        std::cout << "mined " << records.size() << " rules from " << kg.num_triples() << " triples\n";
    } else if (transfer->parsed()) {
        claim_outputs({tr_out1, tr_out2}, force);
        auto g1 = load_kg_file(tr_kg1);
        auto g2 = load_kg_file(tr_kg2);
        auto r1 = load_rules(tr_rules1, g1);
        auto r2 = load_rules(tr_rules2, g2);
        auto pairs = load_relation_pairs(tr_rel, g1, g2);
        auto merge = [&](std::vector<RuleRecord> own, const std::vector<RuleRecord>& other, TransferDirection dir) {
            auto own_rules = rules_of(own);
            auto moved = transfer_rules(std::span<const HornRule>(rules_of(other)), pairs, dir, own_rules);
            for (const auto& r : moved) own.push_back({r, RuleOrigin::Transferred, std::nullopt});
            return std::pair{own, moved.size()};
        };
        auto [out1, n1] = merge(r1, r2, TransferDirection::SecondToFirst);
        auto [out2, n2] = merge(r2, r1, TransferDirection::FirstToSecond);
        write_file(tr_out1, [&](std::ostream& o) { write_rules(o, out1, g1); });
        write_file(tr_out2, [&](std::ostream& o) { write_rules(o, out2, g2); });
        std::cout << "transferred " << n1 << " rules into the first graph and " << n2 << " into the second\n";
    } else if (ground->parsed()) {
        claim_outputs({gr_out_kg, gr_out_g, gr_stats}, force);
        auto kg = load_kg_file(gr_kg);
        auto records = load_rules(gr_rules, kg);
        auto done = complete_kg(kg, rules_of(records));
        write_file(gr_out_kg, [&](std::ostream& o) { write_kg(o, done.completed); });
        write_file(gr_out_g, [&](std::ostream& o) { write_groundings(o, done.groundings, kg); });
        if (!gr_stats.empty())
            write_file(gr_stats, [&](std::ostream& o) {
                write_rule_stats(o, gr_dataset.empty() ? stem(gr_kg) : gr_dataset, rule_stats(records, done.groundings));
            });
        std::cout << done.groundings.size() << " groundings, " << done.new_triples << " new triples\n";
    } else if (trainc->parsed()) {
        claim_outputs({tr_checkpoint, tr_loss, tr_test_pairs, tr_train_pairs}, force);
        TrainConfig cfg = tin.load_config();
        Graphs g = load_graphs(tin);
        auto seeds = load_entity_pairs(tin.seeds, g.first, g.second);
        auto split = split_entity_seeds(seeds, cfg.train_fraction, cfg.rng_seed);
        TrainingProblem pb(g.first, g.second);
        pb.train_pairs = split.train;
        pb.relation_pairs = g.relation_pairs;
        pb.groundings = g.groundings;
        auto result = train(pb, cfg);
        Checkpoint ck{result.params, static_cast<std::size_t>(cfg.epochs), cfg, config_hash(cfg)};
        write_file(tr_checkpoint, [&](std::ostream& o) { write_checkpoint(o, ck); });
        write_file(tr_loss, [&](std::ostream& o) { write_loss_history(o, result.history); });
        write_file(tr_test_pairs, [&](std::ostream& o) { write_entity_pairs(o, split.test, g.first, g.second); });
        if (!tr_train_pairs.empty())
            write_file(tr_train_pairs,
                       [&](std::ostream& o) { write_entity_pairs(o, split.train, g.first, g.second); });
        std::cout << "trained " << cfg.epochs << " epochs on " << split.train.size() << " seed pairs";
        if (!result.history.empty()) std::cout << ", final loss " << result.history.back().total;
        std::cout << '\n';
    } else if (evalc->parsed()) {
        claim_outputs({ev_out}, force);
        auto g1 = load_kg_file(ev_kg1);
        auto g2 = load_kg_file(ev_kg2);
        auto in = open(ev_ck);
        Checkpoint ck = read_checkpoint(in);
        TrainingProblem pb(g1, g2);
        auto shape = pb.shape();
        for (int k = 0; k < 2; ++k)
            if (static_cast<std::size_t>(ck.params.entities[k].rows()) != shape.entities[k] ||
                static_cast<std::size_t>(ck.params.relations[k].rows()) != shape.relations[k])
                throw Error("checkpoint shapes do not match the graphs");
        auto pairs = load_entity_pairs(ev_pairs, g1, g2);
        auto emb = encode(pb, ck.params, ck.config);
        auto m = evaluate_alignment(pairs, emb[0], emb[1], ev_hits, parse_direction(ev_direction));
        write_file(ev_out, [&](std::ostream& o) { o << to_json(m).dump(2) << '\n'; });
        std::cout << to_json(m).dump() << '\n';
    } else if (sweep->parsed()) {
        claim_outputs({sw_out}, force);
        TrainConfig cfg = sin.load_config();
        Graphs g = load_graphs(sin);
        auto seeds = load_entity_pairs(sin.seeds, g.first, g.second);
        auto res = seed_sweep(g.first, g.second, seeds, g.relation_pairs, g.groundings, cfg, sw_fractions,
                              parse_direction(sw_direction));
        for (const auto& s : res.skipped) std::cerr << "mugnn: skipped " << s << '\n';
        write_file(sw_out, [&](std::ostream& o) { write_sweep_csv(o, res.rows); });
        std::cout << res.rows.size() << " sweep rows written\n";
    } else if (synth->parsed()) {
        const fs::path dir(sy_dir);
        const std::string kg1 = (dir / "kg1.tsv").string(), kg2 = (dir / "kg2.tsv").string();
        const std::string ent = (dir / "ent_links.tsv").string(), rel = (dir / "rel_links.tsv").string();
        claim_outputs({kg1, kg2, ent, rel}, force);
        if (sy_entities < 2 || sy_relations < 1) throw ConfigError("synth needs at least 2 entities and 1 relation");
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + sy_dir + ": " + ec.message());
        auto pair = make_isomorphic_pair(sy_entities, sy_triples, sy_relations, sy_seed);
        write_file(kg1, [&](std::ostream& o) { write_kg(o, pair.first); });
        write_file(kg2, [&](std::ostream& o) { write_kg(o, pair.second); });
        write_file(ent, [&](std::ostream& o) { write_entity_pairs(o, pair.entity_pairs, pair.first, pair.second); });
        write_file(rel, [&](std::ostream& o) {
            for (auto [a, b] : pair.relation_pairs)
                o << pair.first.relation_label(a) << '\t' << pair.second.relation_label(b) << '\n';
        });
        std::cout << "wrote " << pair.first.num_triples() << " triples per graph to " << sy_dir << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const OutputExists& e) {
        std::cerr << "mugnn: " << e.what() << '\n';
        return kExists;
    } catch (const IoError& e) {
        std::cerr << "mugnn: " << e.what() << '\n';
        return kIo;
    } catch (const ParseError& e) {
        std::cerr << "mugnn: parse error: " << e.what() << '\n';
        return kParse;
    } catch (const ConfigError& e) {
        std::cerr << "mugnn: config error: " << e.what() << '\n';
        return kConfig;
    } catch (const AlignmentError& e) {
        std::cerr << "mugnn: alignment error: " << e.what() << '\n';
        return kAlignment;
    } catch (const NumericError& e) {
        std::cerr << "mugnn: numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "mugnn: " << e.what() << '\n';
        return kFailure;
    }
}
