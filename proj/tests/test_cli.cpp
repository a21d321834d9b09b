#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("mugnn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string p(const std::string& name) const { return (dir / name).string(); }

    int run(const std::string& args, std::string* err = nullptr) const {
        const std::string errfile = p("stderr.txt");
        const std::string cmd = std::string(MUGNN_CLI) + " " + args + " >" + p("stdout.txt") + " 2>" + errfile;
        int status = std::system(cmd.c_str());
        if (err) *err = slurp(errfile);
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    static std::string slurp(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    void write(const std::string& name, const std::string& text) const { std::ofstream(p(name)) << text; }

    // synth -> mine x2 -> transfer -> ground x2 -> train -> eval
    void pipeline(const std::string& tag) {
        const std::string d = p(tag);
        ASSERT_EQ(run("synth --out-dir " + d + " --entities 40 --triples 120 --relations 3 --seed 3"), 0);
        for (int k : {1, 2}) {
            const std::string s = std::to_string(k);
            ASSERT_EQ(run("mine --kg " + d + "/kg" + s + ".tsv --out " + d + "/rules" + s + ".tsv --stats " + d +
                          "/stats" + s + ".tsv --min-pca-conf 0.1 --max-premises 2 --min-support 2"),
                      0);
        }
        ASSERT_EQ(run("transfer --kg1 " + d + "/kg1.tsv --kg2 " + d + "/kg2.tsv --rules1 " + d + "/rules1.tsv --rules2 " +
                      d + "/rules2.tsv --relation-seeds " + d + "/rel_links.tsv --out1 " + d + "/all1.tsv --out2 " + d +
                      "/all2.tsv"),
                  0);
        for (int k : {1, 2}) {
            const std::string s = std::to_string(k);
            ASSERT_EQ(run("ground --kg " + d + "/kg" + s + ".tsv --rules " + d + "/all" + s + ".tsv --out-kg " + d +
                          "/done" + s + ".tsv --out-groundings " + d + "/g" + s + ".tsv --stats " + d + "/gstats" + s +
                          ".tsv"),
                      0);
        }
        write(tag + "_cfg.txt", "embedding_dim = 8\nepochs = 6\nnegatives_k = 5\n");
        ASSERT_EQ(run("train --kg1 " + d + "/done1.tsv --kg2 " + d + "/done2.tsv --seeds " + d +
                      "/ent_links.tsv --relation-seeds " + d + "/rel_links.tsv --groundings1 " + d +
                      "/g1.tsv --groundings2 " + d + "/g2.tsv --config " + p(tag + "_cfg.txt") +
                      " --seed 5 --checkpoint " + d + "/model.ckpt --loss " + d + "/loss.csv --test-pairs " + d +
                      "/test.tsv --train-pairs " + d + "/train.tsv"),
                  0);
        ASSERT_EQ(run("eval --kg1 " + d + "/done1.tsv --kg2 " + d + "/done2.tsv --checkpoint " + d +
                      "/model.ckpt --pairs " + d + "/test.tsv --out " + d + "/metrics.json"),
                  0);
    }
};

}  // namespace

TEST_F(Cli, PipelineProducesArtifactsAndIsReproducible) {
    pipeline("a");
    pipeline("b");
    for (const char* f : {"kg1.tsv", "rules1.tsv", "stats1.tsv", "all2.tsv", "done1.tsv", "g2.tsv", "model.ckpt",
                          "loss.csv", "test.tsv", "train.tsv", "metrics.json"}) {
        const std::string a = slurp(p("a/") + f), b = slurp(p("b/") + f);
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_EQ(a, b) << f;
    }
    auto metrics = nlohmann::json::parse(slurp(p("a/metrics.json")));
    EXPECT_TRUE(metrics.contains("hits"));
    EXPECT_TRUE(metrics["hits"].contains("1"));
    EXPECT_TRUE(metrics["hits"].contains("10"));
    EXPECT_TRUE(metrics.contains("mrr"));
    EXPECT_EQ(metrics["n_test"], 28);  // 40 pairs, 12 for training

    EXPECT_EQ(slurp(p("a/stats1.tsv")).substr(0, 41), "dataset\t#Rule\t#Tr.Rule\t#Ground\t#Tr.ground");
    EXPECT_EQ(slurp(p("a/loss.csv")).substr(0, 29), "epoch,L_a,L_r,L_r_prime,total");
}

TEST_F(Cli, RefusesToOverwriteWithoutForce) {
    ASSERT_EQ(run("synth --out-dir " + p("s") + " --entities 10 --triples 20 --relations 2"), 0);
    const std::string args = "mine --kg " + p("s/kg1.tsv") + " --out " + p("r.tsv") + " --stats " + p("st.tsv");
    ASSERT_EQ(run(args), 0);
    write("r.tsv", "keep me\n");
    EXPECT_EQ(run(args), 8);
    EXPECT_EQ(slurp(p("r.tsv")), "keep me\n");
    EXPECT_EQ(run(args + " --force"), 0);
    EXPECT_NE(slurp(p("r.tsv")), "keep me\n");
}

TEST_F(Cli, DistinctExitCodes) {
    std::string err;
    EXPECT_EQ(run("mine --bogus", &err), 2);
    EXPECT_NE(err.find("--kg"), std::string::npos);  // usage text
    EXPECT_EQ(run("", &err), 2);
    EXPECT_EQ(run("frobnicate", &err), 2);

    EXPECT_EQ(run("mine --kg " + p("missing.tsv") + " --out " + p("r.tsv") + " --stats " + p("s.tsv"), &err), 3);
    EXPECT_NE(err.find("missing.tsv"), std::string::npos);

    write("bad.tsv", "a\tb\tc\nonly\ttwo\n");
    EXPECT_EQ(run("mine --kg " + p("bad.tsv") + " --out " + p("r.tsv") + " --stats " + p("s.tsv"), &err), 4);
    EXPECT_NE(err.find("line 2"), std::string::npos);

    ASSERT_EQ(run("synth --out-dir " + p("s") + " --entities 12 --triples 30 --relations 2"), 0);
    write("cfg.txt", "learning_rate = 0.01\nwarp_speed = 9\n");
    const std::string train = "train --kg1 " + p("s/kg1.tsv") + " --kg2 " + p("s/kg2.tsv") + " --seeds " +
                              p("s/ent_links.tsv") + " --checkpoint " + p("m.ckpt") + " --loss " + p("l.csv") +
                              " --test-pairs " + p("t.tsv") + " --epochs 1";
    EXPECT_EQ(run(train + " --config " + p("cfg.txt"), &err), 5);
    EXPECT_NE(err.find("warp_speed"), std::string::npos);

    write("links.tsv", "e0\tnot_there\n");
    EXPECT_EQ(run("train --kg1 " + p("s/kg1.tsv") + " --kg2 " + p("s/kg2.tsv") + " --seeds " + p("links.tsv") +
                      " --checkpoint " + p("m.ckpt") + " --loss " + p("l.csv") + " --test-pairs " + p("t.tsv"),
                  &err),
              6);

    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("train --help"), 0);
}

TEST_F(Cli, SweepWritesOneRowPerFraction) {
    ASSERT_EQ(run("synth --out-dir " + p("s") + " --entities 20 --triples 50 --relations 2"), 0);
    write("cfg.txt", "embedding_dim = 4\nepochs = 2\nnegatives_k = 3\n");
    std::string err;
    ASSERT_EQ(run("sweep --kg1 " + p("s/kg1.tsv") + " --kg2 " + p("s/kg2.tsv") + " --seeds " + p("s/ent_links.tsv") +
                      " --config " + p("cfg.txt") + " --fractions 0.2,0.5,1.0 --out " + p("sweep.csv"),
                  &err),
              0);
    EXPECT_NE(err.find("no test pairs"), std::string::npos);
    std::istringstream csv(slurp(p("sweep.csv")));
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    EXPECT_EQ(lines, 3);  // header + two rows
}
