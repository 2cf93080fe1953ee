#pragma once

// Preprocessing: turns raw paper clusters into model-ready instances
// (token ids with OOV extensions, Levi graph, entity-sentence edges,
// salience scores, gold KGtext) and persists them as JSONL artifacts with
// content hashes.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgsum/config.hpp"
#include "kgsum/corpus.hpp"
#include "kgsum/kgraph.hpp"
#include "kgsum/salience.hpp"
#include "kgsum/stoplist.hpp"

namespace kgsum {

struct TokenSpan {
    int sentence = 0;  // global sentence index
    int begin = 0;
    int end = 0;
};

// One preprocessed training/evaluation instance.
struct EncodedCluster {
    std::string cluster_id;

    // Source text: base vocabulary ids per global sentence (OOV -> UNK), the
    // flat extended-id stream for the copy mechanism, and token metadata.
    std::vector<std::vector<int>> sentences;
    std::vector<int> src_ids;       // flat, extended ids
    std::vector<int> src_sentence;  // global sentence index per flat token
    ExtendedVocab ext;

    // Graph side.
    LeviGraph levi;
    std::vector<std::vector<TokenSpan>> mention_spans;  // per entity cluster
    std::vector<std::pair<int, int>> es_edges;          // (entity, sentence)
    int sentence_count = 0;
    std::vector<double> salience;

    // Targets (without BOS/EOS; the model adds them).
    std::vector<int> summary_base;
    std::vector<int> summary_ext;
    std::vector<std::string> summary_tokens;
    std::vector<int> kgtext_base;
    std::vector<int> kgtext_ext;
    std::vector<std::string> kgtext_tokens;
    bool has_kgtext = false;

    int entity_count() const { return levi.entity_count; }
};

struct PreprocessNotes {
    std::vector<std::string> lines;
    void add(const std::string& s) { lines.push_back(s); }
};

inline EncodedCluster encode_cluster(const PaperCluster& raw_in, const Config& cfg,
                                     const Vocabulary& vocab, const Stoplist& stop,
                                     PreprocessNotes* notes = nullptr) {
    const PaperCluster raw = truncate_cluster(raw_in, cfg);
    EncodedCluster out;
    out.cluster_id = raw.cluster_id;

    // Gold KGtext from summary annotations (training splits).
    if (raw.has_summary_annotations) {
        out.kgtext_tokens = build_kgtext(summary_graph(raw), cfg.kgtext_variant);
        if (static_cast<int>(out.kgtext_tokens.size()) > cfg.max_kgtext_tokens)
            out.kgtext_tokens.resize(static_cast<std::size_t>(cfg.max_kgtext_tokens));
        out.has_kgtext = true;
    } else if (notes) {
        notes->add("cluster " + raw.cluster_id + ": no summary annotations, KGtext target skipped");
    }

    // Source tokens: per-sentence base ids plus the flat extended-id stream.
    std::vector<std::string> flat;
    std::vector<int> sentence_offset(raw.papers.size(), 0);
    int global_sentence = 0;
    for (std::size_t p = 0; p < raw.papers.size(); ++p) {
        sentence_offset[p] = global_sentence;
        for (const auto& s : raw.papers[p].sentences) {
            std::vector<int> ids;
            ids.reserve(s.tokens.size());
            for (const auto& tok : s.tokens) {
                const std::string low = lowercase(tok);
                ids.push_back(vocab.id_or_unk(low));
                flat.push_back(low);
                out.src_sentence.push_back(global_sentence);
            }
            out.sentences.push_back(std::move(ids));
            ++global_sentence;
        }
    }
    out.sentence_count = global_sentence;
    auto [src_ids, ext] = encode_tokens(flat, vocab);
    out.src_ids = std::move(src_ids);
    out.ext = std::move(ext);

    // Entity clusters, relations, graphs, salience.
    CollapseResult collapsed = collapse_corefs(raw.papers, stop);
    if (notes)
        for (const auto& n : collapsed.notes) notes->add("cluster " + raw.cluster_id + ": " + n);
    ResolvedRelations rel = resolve_relations(raw.papers, collapsed);
    if (notes)
        for (const auto& n : rel.notes) notes->add("cluster " + raw.cluster_id + ": " + n);
    out.levi = build_levi_graph(collapsed.clusters, rel.tuples);
    for (const auto& c : collapsed.clusters) {
        std::vector<TokenSpan> spans;
        for (const auto& m : c.mentions)
            spans.push_back(TokenSpan{sentence_offset[static_cast<std::size_t>(m.paper)] + m.sentence,
                                      m.begin, m.end});
        out.mention_spans.push_back(std::move(spans));
    }
    const EntitySentenceGraph es = build_entity_sentence_graph(collapsed.clusters, raw.papers);
    for (int i = 0; i < es.entity_count; ++i)
        for (int j = 0; j < es.sentence_count; ++j)
            if (es.connected(i, j)) out.es_edges.emplace_back(i, j);
    const RakeResult rake = rake_scores(raw.papers, stop);
    out.salience = entity_salience(collapsed.clusters, rake).values;

    // Targets.
    out.summary_tokens = raw.gold_summary;
    for (const auto& tok : raw.gold_summary) out.summary_base.push_back(vocab.id_or_unk(lowercase(tok)));
    out.summary_ext = encode_target(raw.gold_summary, vocab, out.ext);
    for (const auto& tok : out.kgtext_tokens) out.kgtext_base.push_back(vocab.id_or_unk(tok));
    out.kgtext_ext = encode_target(out.kgtext_tokens, vocab, out.ext);
    return out;
}

// ---------------------------------------------------------------------------
// JSON round trip for preprocessed instances.

namespace detail {

inline nlohmann::json levi_to_json(const LeviGraph& g) {
    nlohmann::json verts = nlohmann::json::array();
    for (const auto& v : g.vertices) {
        nlohmann::json jv;
        switch (v.kind) {
            case LeviVertex::Kind::Entity: jv["kind"] = "entity"; break;
            case LeviVertex::Kind::RelFwd: jv["kind"] = "rel_fwd"; break;
            case LeviVertex::Kind::RelBwd: jv["kind"] = "rel_bwd"; break;
            case LeviVertex::Kind::Type: jv["kind"] = "type"; break;
            case LeviVertex::Kind::Global: jv["kind"] = "global"; break;
        }
        jv["label"] = v.label;
        jv["entity"] = v.entity;
        jv["tuple"] = v.tuple;
        jv["rtype"] = static_cast<int>(v.rtype);
        jv["etype"] = static_cast<int>(v.etype);
        verts.push_back(std::move(jv));
    }
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [s, d] : g.edges) edges.push_back({s, d});
    return {{"vertices", std::move(verts)},
            {"edges", std::move(edges)},
            {"entity_count", g.entity_count},
            {"relation_tuple_count", g.relation_tuple_count},
            {"type_count", g.type_count}};
}

inline LeviGraph levi_from_json(const nlohmann::json& j) {
    LeviGraph g;
    for (const auto& jv : j.at("vertices")) {
        LeviVertex v;
        const std::string kind = jv.at("kind").get<std::string>();
        if (kind == "entity") v.kind = LeviVertex::Kind::Entity;
        else if (kind == "rel_fwd") v.kind = LeviVertex::Kind::RelFwd;
        else if (kind == "rel_bwd") v.kind = LeviVertex::Kind::RelBwd;
        else if (kind == "type") v.kind = LeviVertex::Kind::Type;
        else v.kind = LeviVertex::Kind::Global;
        v.label = jv.at("label").get<std::string>();
        v.entity = jv.at("entity").get<int>();
        v.tuple = jv.at("tuple").get<int>();
        v.rtype = static_cast<RelationType>(jv.at("rtype").get<int>());
        v.etype = static_cast<EntityType>(jv.at("etype").get<int>());
        g.vertices.push_back(std::move(v));
    }
    for (const auto& je : j.at("edges")) g.edges.emplace_back(je[0].get<int>(), je[1].get<int>());
    g.entity_count = j.at("entity_count").get<int>();
    g.relation_tuple_count = j.at("relation_tuple_count").get<int>();
    g.type_count = j.at("type_count").get<int>();
    return g;
}

}  // namespace detail

inline nlohmann::json encoded_to_json(const EncodedCluster& e) {
    nlohmann::json j;
    j["cluster_id"] = e.cluster_id;
    j["sentences"] = e.sentences;
    j["src_ids"] = e.src_ids;
    j["src_sentence"] = e.src_sentence;
    j["ext_tokens"] = e.ext.extension_tokens();
    j["ext_base"] = e.ext.base_size();
    j["levi"] = detail::levi_to_json(e.levi);
    nlohmann::json spans = nlohmann::json::array();
    for (const auto& entity : e.mention_spans) {
        nlohmann::json es = nlohmann::json::array();
        for (const auto& s : entity) es.push_back({s.sentence, s.begin, s.end});
        spans.push_back(std::move(es));
    }
    j["mention_spans"] = std::move(spans);
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [a, b] : e.es_edges) edges.push_back({a, b});
    j["es_edges"] = std::move(edges);
    j["sentence_count"] = e.sentence_count;
    j["salience"] = e.salience;
    j["summary_base"] = e.summary_base;
    j["summary_ext"] = e.summary_ext;
    j["summary_tokens"] = e.summary_tokens;
    j["kgtext_base"] = e.kgtext_base;
    j["kgtext_ext"] = e.kgtext_ext;
    j["kgtext_tokens"] = e.kgtext_tokens;
    j["has_kgtext"] = e.has_kgtext;
    return j;
}

inline EncodedCluster encoded_from_json(const nlohmann::json& j) {
    EncodedCluster e;
    e.cluster_id = j.at("cluster_id").get<std::string>();
    e.sentences = j.at("sentences").get<std::vector<std::vector<int>>>();
    e.src_ids = j.at("src_ids").get<std::vector<int>>();
    e.src_sentence = j.at("src_sentence").get<std::vector<int>>();
    e.ext = ExtendedVocab(j.at("ext_base").get<int>());
    for (const auto& t : j.at("ext_tokens")) e.ext.add(t.get<std::string>());
    e.levi = detail::levi_from_json(j.at("levi"));
    for (const auto& entity : j.at("mention_spans")) {
        std::vector<TokenSpan> spans;
        for (const auto& s : entity)
            spans.push_back(TokenSpan{s[0].get<int>(), s[1].get<int>(), s[2].get<int>()});
        e.mention_spans.push_back(std::move(spans));
    }
    for (const auto& ed : j.at("es_edges")) e.es_edges.emplace_back(ed[0].get<int>(), ed[1].get<int>());
    e.sentence_count = j.at("sentence_count").get<int>();
    e.salience = j.at("salience").get<std::vector<double>>();
    e.summary_base = j.at("summary_base").get<std::vector<int>>();
    e.summary_ext = j.at("summary_ext").get<std::vector<int>>();
    e.summary_tokens = j.at("summary_tokens").get<std::vector<std::string>>();
    e.kgtext_base = j.at("kgtext_base").get<std::vector<int>>();
    e.kgtext_ext = j.at("kgtext_ext").get<std::vector<int>>();
    e.kgtext_tokens = j.at("kgtext_tokens").get<std::vector<std::string>>();
    e.has_kgtext = j.at("has_kgtext").get<bool>();
    return e;
}

inline void save_encoded(const std::vector<EncodedCluster>& v, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write preprocessed file: " + path);
    for (const auto& e : v) out << encoded_to_json(e).dump() << "\n";
}

inline std::vector<EncodedCluster> load_encoded(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open preprocessed file: " + path);
    std::vector<EncodedCluster> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(encoded_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed preprocessed record: " +
                            e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Directory-level preprocessing with a hash manifest.

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot hash missing file: " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(content);
}

struct PreprocessReport {
    std::vector<std::string> written;  // file names (relative to out dir)
    PreprocessNotes notes;
};

// Reads <split>.jsonl files under data_dir (train required), builds the
// vocabulary from the training split, encodes every split and writes
// vocab.txt, <split>.pre.jsonl and manifest.json into out_dir.
inline PreprocessReport preprocess_dir(const std::string& data_dir, const std::string& out_dir,
                                       const Config& cfg, const Stoplist& stop, bool dump_dot = false) {
    namespace fs = std::filesystem;
    PreprocessReport report;
    const fs::path in_root(data_dir);
    const fs::path out_root(out_dir);
    fs::create_directories(out_root);

    const fs::path train_path = in_root / "train.jsonl";
    if (!fs::exists(train_path))
        throw DataError("preprocess: missing training split: " + train_path.string());
    std::vector<PaperCluster> train = load_corpus(train_path.string(), Split::Train);

    // Gold KGtext must exist before vocabulary counting so its marker usage
    // and prompt tokens reflect the configured variant.
    for (auto& c : train) {
        PaperCluster t = truncate_cluster(c, cfg);
        if (t.has_summary_annotations) c.gold_kgtext = build_kgtext(summary_graph(t), cfg.kgtext_variant);
    }
    const Vocabulary vocab = Vocabulary::build(train, cfg.max_vocab);
    vocab.save((out_root / "vocab.txt").string());
    report.written.push_back("vocab.txt");

    for (Split split : {Split::Train, Split::Valid, Split::Test}) {
        const fs::path in_path = in_root / (std::string(to_string(split)) + ".jsonl");
        if (!fs::exists(in_path)) {
            if (split != Split::Train)
                report.notes.add(std::string("split ") + to_string(split) + " not present, skipped");
            continue;
        }
        const std::vector<PaperCluster> clusters =
            split == Split::Train ? std::move(train) : load_corpus(in_path.string(), split);
        std::vector<EncodedCluster> encoded;
        encoded.reserve(clusters.size());
        for (const auto& c : clusters) encoded.push_back(encode_cluster(c, cfg, vocab, stop, &report.notes));
        const std::string out_name = std::string(to_string(split)) + ".pre.jsonl";
        save_encoded(encoded, (out_root / out_name).string());
        report.written.push_back(out_name);
        if (dump_dot) {
            fs::create_directories(out_root / "dot");
            for (const auto& e : encoded) {
                std::ofstream dot((out_root / "dot" / (e.cluster_id + ".dot")).string());
                dot << e.levi.to_dot();
            }
        }
    }

    nlohmann::json manifest;
    manifest["config"] = config_to_map(cfg);
    nlohmann::json files = nlohmann::json::object();
    for (const auto& name : report.written)
        files[name] = "fnv1a64:" + to_hex(hash_file((out_root / name).string()));
    manifest["files"] = std::move(files);
    std::ofstream mf((out_root / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
    return report;
}

}  // namespace kgsum
