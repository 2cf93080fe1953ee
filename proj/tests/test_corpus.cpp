#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "kgsum/corpus.hpp"
#include "kgsum/fixture.hpp"

using namespace kgsum;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    fs::path path;
    explicit TempFile(const std::string& content) {
        path = fs::temp_directory_path() /
               ("kgsum_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".jsonl");
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() {
        std::error_code ec;
        fs::remove(path, ec);
    }
    static inline int counter = 0;
};

const char* kRecord = R"({"cluster_id":"c1","papers":[
{"paper_id":"p1","sentences":[["we","use","graph","networks","."],["results","are","good","."]],
 "mentions":[["m1",0,2,4,"Method"]],"relations":[],"corefs":[]},
{"paper_id":"p2","sentences":[["graph","networks","help","parsing","."]],
 "mentions":[["m1",0,0,2,"Method"],["m2",0,3,4,"Task"]],
 "relations":[["m1","m2","Used-for"]],"corefs":[]}],
"gold_summary":["graph","networks","help","parsing","."],
"summary_mentions":[["s1",0,0,2,"Method"],["s2",0,3,4,"Task"]],
"summary_relations":[["s1","s2","Used-for"]]})";

std::string one_line(const std::string& s) {
    std::string out;
    for (char c : s)
        if (c != '\n') out.push_back(c);
    return out;
}

}  // namespace

TEST_CASE("load_corpus: empty file gives empty list") {
    TempFile f("");
    CHECK(load_corpus(f.path.string(), Split::Train).empty());
}

TEST_CASE("load_corpus: well-formed record round trips") {
    TempFile f(one_line(kRecord) + "\n");
    const auto clusters = load_corpus(f.path.string(), Split::Train);
    REQUIRE(clusters.size() == 1);
    const auto& c = clusters[0];
    CHECK(c.cluster_id == "c1");
    REQUIRE(c.papers.size() == 2);
    CHECK(c.papers[0].sentences.size() == 2);
    CHECK(c.papers[1].annotations.relations.size() == 1);
    CHECK(c.has_summary_annotations);

    TempFile g("");
    save_corpus(clusters, g.path.string());
    const auto again = load_corpus(g.path.string(), Split::Train);
    REQUIRE(again.size() == 1);
    CHECK(cluster_to_json(again[0]) == cluster_to_json(c));
}

TEST_CASE("load_corpus: malformed JSON names the line number") {
    TempFile f(one_line(kRecord) + "\n{broken\n");
    try {
        load_corpus(f.path.string(), Split::Train);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
}

TEST_CASE("load_corpus: relation referencing a missing mention names it") {
    std::string bad = one_line(kRecord);
    const std::string needle = R"(["m1","m2","Used-for"])";
    const auto at = bad.find(needle);
    REQUIRE(at != std::string::npos);
    bad.replace(at, needle.size(), R"(["m1","m9","Used-for"])");
    TempFile f(bad + "\n");
    try {
        load_corpus(f.path.string(), Split::Train);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("m9") != std::string::npos);
        CHECK(msg.find("c1") != std::string::npos);
    }
}

TEST_CASE("validate_cluster: span bounds, coref disjointness, whitespace tokens") {
    TempFile f(one_line(kRecord) + "\n");
    PaperCluster c = load_corpus(f.path.string(), Split::Train)[0];

    SECTION("mention span outside sentence") {
        c.papers[0].annotations.mentions[0].end = 99;
        CHECK_THROWS_AS(validate_cluster(c, Split::Train), DataError);
    }
    SECTION("overlapping coref clusters") {
        c.papers[1].annotations.corefs = {{"m1", "m2"}, {"m2"}};
        CHECK_THROWS_AS(validate_cluster(c, Split::Train), DataError);
    }
    SECTION("token with whitespace") {
        c.papers[0].sentences[0].tokens[0] = "two words";
        CHECK_THROWS_AS(validate_cluster(c, Split::Train), DataError);
    }
    SECTION("empty gold summary fails only on the training split") {
        c.gold_summary.clear();
        c.has_summary_annotations = false;
        c.summary_annotations = {};
        CHECK_THROWS_AS(validate_cluster(c, Split::Train), DataError);
        CHECK_NOTHROW(validate_cluster(c, Split::Test));
    }
}

TEST_CASE("vocabulary: reserved tokens, frequency order, ties, size cap") {
    PaperCluster c;
    c.cluster_id = "v";
    Paper p;
    p.paper_id = "p";
    p.sentences.push_back({{"a", "a", "b"}});
    c.papers.push_back(p);
    c.gold_summary = {"a"};
    const int reserved = static_cast<int>(Vocabulary::reserved_tokens().size());

    SECTION("one content slot keeps only the most frequent token") {
        const Vocabulary v = Vocabulary::build({c}, reserved + 1);
        CHECK(static_cast<int>(v.size()) == reserved + 1);
        CHECK(v.lookup("a") >= 0);
        CHECK(v.lookup("b") < 0);
    }
    SECTION("equal frequency admits the lexicographically smaller token first") {
        PaperCluster t = c;
        t.papers[0].sentences[0].tokens = {"zz", "bb"};
        t.gold_summary = {"qq"};
        const Vocabulary v = Vocabulary::build({t}, reserved + 2);
        // bb, qq, zz all appear once; the two slots go to bb and qq.
        CHECK(v.lookup("bb") >= 0);
        CHECK(v.lookup("qq") >= 0);
        CHECK(v.lookup("zz") < 0);
    }
    SECTION("specials and markers are always present") {
        const Vocabulary v = Vocabulary::build({c}, reserved + 5);
        for (const auto& tok : Vocabulary::reserved_tokens()) CHECK(v.lookup(tok) >= 0);
        CHECK(v.lookup(Vocabulary::pad_token()) == Vocabulary::kPad);
        CHECK(v.lookup(Vocabulary::unk_token()) == Vocabulary::kUnk);
        CHECK(v.lookup("<used-for>") >= 0);
        CHECK(v.lookup("<used-for-inv>") >= 0);
        CHECK(v.lookup("<otherscientificterm>") >= 0);
    }
    SECTION("max_size below the reserved count is an error") {
        CHECK_THROWS_AS(Vocabulary::build({c}, reserved - 1), UsageError);
    }
    SECTION("cap respected and construction deterministic") {
        const Vocabulary v1 = Vocabulary::build({c}, 50000);
        const Vocabulary v2 = Vocabulary::build({c}, 50000);
        CHECK(v1.size() <= 50000);
        CHECK(v1 == v2);
    }
}

TEST_CASE("vocabulary: save/load round trip") {
    PaperCluster c;
    Paper p;
    p.sentences.push_back({{"alpha", "beta"}});
    c.papers.push_back(p);
    c.gold_summary = {"alpha"};
    c.cluster_id = "x";
    const Vocabulary v = Vocabulary::build({c}, 1000);
    TempFile f("");
    v.save(f.path.string());
    CHECK(Vocabulary::load(f.path.string()) == v);
}

TEST_CASE("encode_tokens: extended ids in first-occurrence order") {
    PaperCluster c;
    Paper p;
    p.sentences.push_back({{"alpha", "beta"}});
    c.papers.push_back(p);
    c.gold_summary = {"alpha"};
    c.cluster_id = "x";
    const Vocabulary vocab = Vocabulary::build({c}, 1000);
    const int V = static_cast<int>(vocab.size());

    SECTION("all in-vocab tokens leave the extension empty") {
        auto [ids, ev] = encode_tokens({"alpha", "beta", "alpha"}, vocab);
        CHECK(ev.extension_count() == 0);
        CHECK(ids == std::vector<int>{vocab.lookup("alpha"), vocab.lookup("beta"), vocab.lookup("alpha")});
        for (int id : ids) CHECK(vocab.lookup(vocab.token(id)) == id);  // decode(encode(t)) == t
    }
    SECTION("OOV tokens get fresh ids at and above |vocab|") {
        auto [ids, ev] = encode_tokens({"x9", "y9", "x9"}, vocab);
        CHECK(ids == std::vector<int>{V, V + 1, V});
        CHECK(ev.extension_count() == 2);
        CHECK(ev.extension_token(V) == "x9");
        CHECK(ev.extension_token(V + 1) == "y9");
    }
    SECTION("target encoding maps unseen OOVs to UNK") {
        auto [ids, ev] = encode_tokens({"x9"}, vocab);
        const auto tgt = encode_target({"alpha", "x9", "z9"}, vocab, ev);
        CHECK(tgt == std::vector<int>{vocab.lookup("alpha"), V, Vocabulary::kUnk});
    }
}

TEST_CASE("make_batches: sizes, determinism, remainder policy") {
    Config cfg;
    auto make_clusters = [](int n) {
        std::vector<PaperCluster> cs;
        for (int i = 0; i < n; ++i) {
            PaperCluster c;
            c.cluster_id = "c" + std::to_string(i);
            Paper p;
            p.sentences.push_back({{"tok", "."}});
            c.papers.push_back(p);
            c.gold_summary = {"tok"};
            cs.push_back(c);
        }
        return cs;
    };

    SECTION("16 clusters, batch 8 -> 2 batches") {
        const auto batches = make_batches(make_clusters(16), 8, 7, cfg);
        REQUIRE(batches.size() == 2);
        CHECK(batches[0].size() == 8);
        CHECK(batches[1].size() == 8);
    }
    SECTION("9 clusters, batch 8 -> remainder batch of 1 kept") {
        const auto batches = make_batches(make_clusters(9), 8, 7, cfg);
        REQUIRE(batches.size() == 2);
        CHECK(batches[1].size() == 1);
    }
    SECTION("same seed gives identical order, epochs differ") {
        const auto a = batch_order(32, 8, 123, 0);
        const auto b = batch_order(32, 8, 123, 0);
        const auto c = batch_order(32, 8, 123, 1);
        CHECK(a == b);
        CHECK(a != c);
    }
    SECTION("truncation limits are applied") {
        Config tight = cfg;
        tight.max_tokens_per_sentence = 1;
        auto cs = make_clusters(1);
        const auto batches = make_batches(cs, 1, 7, tight);
        CHECK(batches[0][0].papers[0].sentences[0].tokens.size() == 1);
    }
}

TEST_CASE("truncate_cluster: drops annotations outside the window") {
    TempFile f(one_line(kRecord) + "\n");
    PaperCluster c = load_corpus(f.path.string(), Split::Train)[0];
    Config cfg;
    cfg.max_tokens_per_sentence = 3;  // mention m1 of p1 spans [2,4) -> dropped
    const PaperCluster t = truncate_cluster(c, cfg);
    CHECK(t.papers[0].annotations.mentions.empty());
    CHECK(t.papers[1].annotations.mentions.size() == 1);  // m1 [0,2) survives
    CHECK(t.papers[1].annotations.relations.empty());     // endpoint m2 [3,4) dropped
    CHECK_NOTHROW(validate_cluster(t, Split::Train));
}

TEST_CASE("fixture corpus: deterministic, valid, annotated") {
    const auto a = generate_fixture_corpus(8, 42);
    const auto b = generate_fixture_corpus(8, 42);
    REQUIRE(a.size() == 8);

    std::string sa, sb;
    for (const auto& c : a) sa += cluster_to_json(c).dump() + "\n";
    for (const auto& c : b) sb += cluster_to_json(c).dump() + "\n";
    CHECK(sa == sb);

    for (const auto& c : a) {
        CHECK_NOTHROW(validate_cluster(c, Split::Train));
        CHECK(c.has_summary_annotations);
        CHECK_FALSE(c.gold_kgtext.empty());
        REQUIRE(c.summary_annotations.relations.size() >= 1);
    }
    const auto diff_seed = generate_fixture_corpus(8, 43);
    std::string sc;
    for (const auto& c : diff_seed) sc += cluster_to_json(c).dump() + "\n";
    CHECK(sa != sc);
}
