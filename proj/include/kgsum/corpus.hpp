#pragma once

// Corpus data model and ingestion: paper clusters with SciIE-style
// annotations, JSONL (de)serialization, vocabulary construction with
// reserved marker tokens, OOV-extended token encoding for the copy
// mechanism, and deterministic batching.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgsum/config.hpp"
#include "kgsum/util.hpp"

namespace kgsum {

enum class EntityType { Task, Method, Metric, Material, Generic, OtherScientificTerm };
enum class RelationType { Compare, UsedFor, FeatureOf, HyponymOf, EvaluateFor, PartOf, Conjunction };

constexpr int kEntityTypeCount = 6;
constexpr int kRelationTypeCount = 7;

inline const char* to_string(EntityType t) {
    switch (t) {
        case EntityType::Task: return "Task";
        case EntityType::Method: return "Method";
        case EntityType::Metric: return "Metric";
        case EntityType::Material: return "Material";
        case EntityType::Generic: return "Generic";
        case EntityType::OtherScientificTerm: return "OtherScientificTerm";
    }
    return "?";
}

inline const char* to_string(RelationType t) {
    switch (t) {
        case RelationType::Compare: return "Compare";
        case RelationType::UsedFor: return "Used-for";
        case RelationType::FeatureOf: return "Feature-of";
        case RelationType::HyponymOf: return "Hyponym-of";
        case RelationType::EvaluateFor: return "Evaluate-for";
        case RelationType::PartOf: return "Part-of";
        case RelationType::Conjunction: return "Conjunction";
    }
    return "?";
}

inline EntityType entity_type_from_string(const std::string& s) {
    for (int i = 0; i < kEntityTypeCount; ++i)
        if (s == to_string(static_cast<EntityType>(i))) return static_cast<EntityType>(i);
    throw DataError("unknown entity type '" + s + "'");
}

inline RelationType relation_type_from_string(const std::string& s) {
    for (int i = 0; i < kRelationTypeCount; ++i)
        if (s == to_string(static_cast<RelationType>(i))) return static_cast<RelationType>(i);
    throw DataError("unknown relation type '" + s + "'");
}

// Marker tokens emitted into KGtext and reserved in the vocabulary.
inline std::string type_marker(EntityType t) {
    return "<" + lowercase(to_string(t)) + ">";
}

inline std::string relation_marker(RelationType t, bool inverse = false) {
    std::string body = lowercase(to_string(t));
    if (inverse) body += "-inv";
    return "<" + body + ">";
}

struct Mention {
    std::string id;
    int sentence = 0;  // index within the paper
    int begin = 0;     // token span [begin, end)
    int end = 0;
    EntityType type = EntityType::Generic;
};

struct Relation {
    std::string head;
    std::string tail;
    RelationType type = RelationType::UsedFor;
};

struct SciIEAnnotation {
    std::vector<Mention> mentions;
    std::vector<Relation> relations;
    std::vector<std::vector<std::string>> corefs;
};

struct Sentence {
    std::vector<std::string> tokens;
};

struct Paper {
    std::string paper_id;
    std::vector<Sentence> sentences;
    SciIEAnnotation annotations;
};

struct PaperCluster {
    std::string cluster_id;
    std::vector<Paper> papers;
    std::vector<std::string> gold_summary;
    std::vector<std::string> gold_kgtext;  // derived, never stored in JSONL
    // Annotations over the gold summary; training splits only.
    SciIEAnnotation summary_annotations;
    bool has_summary_annotations = false;
};

enum class Split { Train, Valid, Test };

inline const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Validation

namespace detail {

inline void validate_annotation(const SciIEAnnotation& ann, const std::vector<Sentence>& sentences,
                                const std::string& cluster_id, const std::string& where) {
    std::unordered_map<std::string, int> mention_ids;
    for (const auto& m : ann.mentions) {
        if (mention_ids.count(m.id))
            throw DataError("cluster " + cluster_id + ": duplicate mention id '" + m.id + "' in " + where);
        mention_ids[m.id] = 1;
        if (m.sentence < 0 || m.sentence >= static_cast<int>(sentences.size()))
            throw DataError("cluster " + cluster_id + ": mention '" + m.id + "' in " + where +
                            " has out-of-range sentence index " + std::to_string(m.sentence));
        const int len = static_cast<int>(sentences[static_cast<std::size_t>(m.sentence)].tokens.size());
        if (m.begin < 0 || m.end > len || m.begin >= m.end)
            throw DataError("cluster " + cluster_id + ": mention '" + m.id + "' in " + where +
                            " has invalid span [" + std::to_string(m.begin) + "," + std::to_string(m.end) +
                            ") for sentence of length " + std::to_string(len));
    }
    for (const auto& r : ann.relations) {
        if (!mention_ids.count(r.head))
            throw DataError("cluster " + cluster_id + ": relation in " + where +
                            " references missing mention_id '" + r.head + "'");
        if (!mention_ids.count(r.tail))
            throw DataError("cluster " + cluster_id + ": relation in " + where +
                            " references missing mention_id '" + r.tail + "'");
    }
    std::unordered_map<std::string, int> seen_in_coref;
    for (std::size_t c = 0; c < ann.corefs.size(); ++c) {
        for (const auto& id : ann.corefs[c]) {
            if (!mention_ids.count(id))
                throw DataError("cluster " + cluster_id + ": coref cluster in " + where +
                                " references missing mention_id '" + id + "'");
            auto [it, inserted] = seen_in_coref.emplace(id, static_cast<int>(c));
            if (!inserted)
                throw DataError("cluster " + cluster_id + ": coref clusters in " + where +
                                " are not disjoint (mention '" + id + "')");
        }
    }
}

}  // namespace detail

inline void validate_cluster(const PaperCluster& c, Split split) {
    if (c.papers.empty())
        throw DataError("cluster " + c.cluster_id + ": field 'papers' must be non-empty");
    for (const auto& p : c.papers) {
        if (p.sentences.empty())
            throw DataError("cluster " + c.cluster_id + ": paper '" + p.paper_id +
                            "' field 'sentences' must be non-empty");
        for (const auto& s : p.sentences) {
            if (s.tokens.empty())
                throw DataError("cluster " + c.cluster_id + ": paper '" + p.paper_id +
                                "' contains an empty sentence");
            for (const auto& t : s.tokens)
                if (t.empty() || t.find_first_of(" \t\n\r") != std::string::npos)
                    throw DataError("cluster " + c.cluster_id + ": paper '" + p.paper_id +
                                    "' has a token with whitespace: '" + t + "'");
        }
        detail::validate_annotation(p.annotations, p.sentences, c.cluster_id, "paper '" + p.paper_id + "'");
    }
    if (split == Split::Train && c.gold_summary.empty())
        throw DataError("cluster " + c.cluster_id + ": field 'gold_summary' must be non-empty in training data");
    if (c.has_summary_annotations) {
        std::vector<Sentence> summary_as_sentence{Sentence{c.gold_summary}};
        detail::validate_annotation(c.summary_annotations, summary_as_sentence, c.cluster_id, "gold summary");
    }
}

// ---------------------------------------------------------------------------
// JSONL (de)serialization

namespace detail {

using json = nlohmann::json;

inline std::vector<std::string> tokens_from_json(const json& j, const std::string& ctx) {
    if (!j.is_array()) throw DataError(ctx + ": expected a token array");
    std::vector<std::string> out;
    out.reserve(j.size());
    for (const auto& t : j) {
        if (t.is_string())
            out.push_back(t.get<std::string>());
        else
            throw DataError(ctx + ": token must be a string");
    }
    return out;
}

inline std::string id_from_json(const json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    throw DataError("mention/relation id must be a string or integer");
}

inline SciIEAnnotation annotation_from_json(const json& mentions, const json& relations,
                                            const json& corefs, const std::string& ctx) {
    SciIEAnnotation ann;
    for (const auto& m : mentions) {
        if (!m.is_array() || m.size() != 5)
            throw DataError(ctx + ": mention must be [id, sent_idx, start, end, type]");
        Mention out;
        out.id = id_from_json(m[0]);
        out.sentence = m[1].get<int>();
        out.begin = m[2].get<int>();
        out.end = m[3].get<int>();
        out.type = entity_type_from_string(m[4].get<std::string>());
        ann.mentions.push_back(std::move(out));
    }
    for (const auto& r : relations) {
        if (!r.is_array() || r.size() != 3)
            throw DataError(ctx + ": relation must be [head_id, tail_id, type]");
        Relation out;
        out.head = id_from_json(r[0]);
        out.tail = id_from_json(r[1]);
        out.type = relation_type_from_string(r[2].get<std::string>());
        ann.relations.push_back(std::move(out));
    }
    for (const auto& c : corefs) {
        std::vector<std::string> ids;
        for (const auto& id : c) ids.push_back(id_from_json(id));
        ann.corefs.push_back(std::move(ids));
    }
    return ann;
}

inline json annotation_mentions_json(const SciIEAnnotation& ann) {
    json out = json::array();
    for (const auto& m : ann.mentions)
        out.push_back({m.id, m.sentence, m.begin, m.end, to_string(m.type)});
    return out;
}

inline json annotation_relations_json(const SciIEAnnotation& ann) {
    json out = json::array();
    for (const auto& r : ann.relations) out.push_back({r.head, r.tail, to_string(r.type)});
    return out;
}

inline json annotation_corefs_json(const SciIEAnnotation& ann) {
    json out = json::array();
    for (const auto& c : ann.corefs) out.push_back(c);
    return out;
}

}  // namespace detail

inline PaperCluster cluster_from_json(const nlohmann::json& j) {
    using detail::tokens_from_json;
    PaperCluster c;
    if (!j.contains("cluster_id")) throw DataError("record missing field 'cluster_id'");
    c.cluster_id = j.at("cluster_id").get<std::string>();
    if (!j.contains("papers")) throw DataError("cluster " + c.cluster_id + ": missing field 'papers'");
    for (const auto& pj : j.at("papers")) {
        Paper p;
        p.paper_id = pj.value("paper_id", "");
        for (const auto& sj : pj.at("sentences")) {
            Sentence s;
            // Pre-tokenized arrays are the native form; raw strings fall back
            // to whitespace splitting.
            if (sj.is_string())
                s.tokens = split_ws(lowercase(sj.get<std::string>()));
            else
                s.tokens = tokens_from_json(sj, "cluster " + c.cluster_id);
            p.sentences.push_back(std::move(s));
        }
        p.annotations = detail::annotation_from_json(
            pj.value("mentions", nlohmann::json::array()), pj.value("relations", nlohmann::json::array()),
            pj.value("corefs", nlohmann::json::array()), "cluster " + c.cluster_id);
        c.papers.push_back(std::move(p));
    }
    if (j.contains("gold_summary")) {
        const auto& gj = j.at("gold_summary");
        if (gj.is_string())
            c.gold_summary = split_ws(lowercase(gj.get<std::string>()));
        else
            c.gold_summary = tokens_from_json(gj, "cluster " + c.cluster_id + " gold_summary");
    }
    if (j.contains("summary_mentions") || j.contains("summary_relations")) {
        c.summary_annotations = detail::annotation_from_json(
            j.value("summary_mentions", nlohmann::json::array()),
            j.value("summary_relations", nlohmann::json::array()), nlohmann::json::array(),
            "cluster " + c.cluster_id + " summary");
        c.has_summary_annotations = true;
    }
    return c;
}

inline nlohmann::json cluster_to_json(const PaperCluster& c) {
    nlohmann::json j;
    j["cluster_id"] = c.cluster_id;
    j["papers"] = nlohmann::json::array();
    for (const auto& p : c.papers) {
        nlohmann::json pj;
        pj["paper_id"] = p.paper_id;
        pj["sentences"] = nlohmann::json::array();
        for (const auto& s : p.sentences) pj["sentences"].push_back(s.tokens);
        pj["mentions"] = detail::annotation_mentions_json(p.annotations);
        pj["relations"] = detail::annotation_relations_json(p.annotations);
        pj["corefs"] = detail::annotation_corefs_json(p.annotations);
        j["papers"].push_back(std::move(pj));
    }
    j["gold_summary"] = c.gold_summary;
    if (c.has_summary_annotations) {
        j["summary_mentions"] = detail::annotation_mentions_json(c.summary_annotations);
        j["summary_relations"] = detail::annotation_relations_json(c.summary_annotations);
    }
    return j;
}

inline std::vector<PaperCluster> load_corpus(const std::string& path, Split split) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    std::vector<PaperCluster> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        PaperCluster c;
        try {
            c = cluster_from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad record: " + e.what());
        }
        validate_cluster(c, split);
        out.push_back(std::move(c));
    }
    return out;
}

inline void save_corpus(const std::vector<PaperCluster>& clusters, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write corpus file: " + path);
    for (const auto& c : clusters) out << cluster_to_json(c).dump() << "\n";
}

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;

    static const char* pad_token() { return "<pad>"; }
    static const char* unk_token() { return "<unk>"; }
    static const char* bos_token() { return "<bos>"; }
    static const char* eos_token() { return "<eos>"; }

    // Specials, type/relation markers (both directions) and the KGtext
    // prompt tokens. Always present, in this fixed order, so their ids are
    // stable across corpora.
    static std::vector<std::string> reserved_tokens() {
        std::vector<std::string> out = {pad_token(), unk_token(), bos_token(), eos_token()};
        for (int i = 0; i < kEntityTypeCount; ++i)
            out.push_back(type_marker(static_cast<EntityType>(i)));
        for (int i = 0; i < kRelationTypeCount; ++i) {
            out.push_back(relation_marker(static_cast<RelationType>(i), false));
            out.push_back(relation_marker(static_cast<RelationType>(i), true));
        }
        for (const char* t : {"the", "entities", "and", "types", "are", ":", "relations", ",", ";", "."})
            out.push_back(t);
        return out;
    }

    static Vocabulary build(const std::vector<PaperCluster>& training_clusters, int max_size) {
        const auto reserved = reserved_tokens();
        if (max_size < static_cast<int>(reserved.size()))
            throw UsageError("vocabulary max_size " + std::to_string(max_size) + " is smaller than the " +
                             std::to_string(reserved.size()) + " reserved special/marker tokens");
        std::unordered_map<std::string, long long> freq;
        auto count = [&freq](const std::vector<std::string>& toks) {
            for (const auto& t : toks) ++freq[t];
        };
        for (const auto& c : training_clusters) {
            for (const auto& p : c.papers)
                for (const auto& s : p.sentences) count(s.tokens);
            count(c.gold_summary);
            count(c.gold_kgtext);
        }
        Vocabulary v;
        for (const auto& t : reserved) v.push(t);
        // Remaining slots by descending frequency, ties broken lexicographically.
        std::vector<std::pair<std::string, long long>> by_freq;
        by_freq.reserve(freq.size());
        for (auto& [tok, n] : freq)
            if (!v.token_to_id_.count(tok)) by_freq.emplace_back(tok, n);
        std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (const auto& [tok, n] : by_freq) {
            if (static_cast<int>(v.size()) >= max_size) break;
            v.push(tok);
        }
        return v;
    }

    std::size_t size() const { return id_to_token_.size(); }

    // -1 when absent.
    int lookup(const std::string& tok) const {
        auto it = token_to_id_.find(tok);
        return it == token_to_id_.end() ? -1 : it->second;
    }

    int id_or_unk(const std::string& tok) const {
        const int id = lookup(tok);
        return id < 0 ? kUnk : id;
    }

    const std::string& token(int id) const {
        if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
            throw DataError("vocabulary id out of range: " + std::to_string(id));
        return id_to_token_[static_cast<std::size_t>(id)];
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write vocabulary file: " + path);
        for (const auto& t : id_to_token_) out << t << "\n";
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open vocabulary file: " + path);
        Vocabulary v;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            v.push(line);
        }
        if (v.size() < reserved_tokens().size())
            throw DataError("vocabulary file " + path + " is missing reserved tokens");
        return v;
    }

    bool operator==(const Vocabulary& other) const { return id_to_token_ == other.id_to_token_; }

private:
    void push(const std::string& tok) {
        token_to_id_.emplace(tok, static_cast<int>(id_to_token_.size()));
        id_to_token_.push_back(tok);
    }

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
};

// Per-instance extension of the vocabulary with ids >= |vocab| for OOV
// source tokens, assigned in first-occurrence order. Copy attention is the
// only way these ids can receive probability mass.
class ExtendedVocab {
public:
    explicit ExtendedVocab(int base_size = 0) : base_size_(base_size) {}

    int base_size() const { return base_size_; }
    int size() const { return base_size_ + static_cast<int>(ext_tokens_.size()); }
    int extension_count() const { return static_cast<int>(ext_tokens_.size()); }
    const std::vector<std::string>& extension_tokens() const { return ext_tokens_; }

    int add(const std::string& tok) {
        auto it = ext_ids_.find(tok);
        if (it != ext_ids_.end()) return it->second;
        const int id = size();
        ext_ids_.emplace(tok, id);
        ext_tokens_.push_back(tok);
        return id;
    }

    // -1 when the token is not a registered extension.
    int extended_id(const std::string& tok) const {
        auto it = ext_ids_.find(tok);
        return it == ext_ids_.end() ? -1 : it->second;
    }

    const std::string& extension_token(int ext_id) const {
        const int k = ext_id - base_size_;
        if (k < 0 || k >= static_cast<int>(ext_tokens_.size()))
            throw DataError("extended id out of range: " + std::to_string(ext_id));
        return ext_tokens_[static_cast<std::size_t>(k)];
    }

    static ExtendedVocab from_tokens(const std::vector<std::string>& toks, int base_size) {
        ExtendedVocab ev(base_size);
        for (const auto& t : toks) ev.add(t);
        return ev;
    }

private:
    int base_size_;
    std::vector<std::string> ext_tokens_;
    std::unordered_map<std::string, int> ext_ids_;
};

// Encodes source tokens: in-vocab tokens map to their ids, each distinct OOV
// token gets a fresh extended id in first-occurrence order.
inline std::pair<std::vector<int>, ExtendedVocab> encode_tokens(const std::vector<std::string>& toks,
                                                                const Vocabulary& vocab) {
    ExtendedVocab ev(static_cast<int>(vocab.size()));
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) {
        const int id = vocab.lookup(t);
        ids.push_back(id >= 0 ? id : ev.add(t));
    }
    return {std::move(ids), std::move(ev)};
}

// Encodes target tokens against an existing source extension: OOV targets
// that were seen in the source get their extended id, other OOVs become UNK.
inline std::vector<int> encode_target(const std::vector<std::string>& toks, const Vocabulary& vocab,
                                      const ExtendedVocab& ev) {
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) {
        int id = vocab.lookup(t);
        if (id < 0) id = ev.extended_id(t);
        ids.push_back(id < 0 ? Vocabulary::kUnk : id);
    }
    return ids;
}

// ---------------------------------------------------------------------------
// Truncation and batching

inline PaperCluster truncate_cluster(PaperCluster c, const Config& cfg) {
    for (auto& p : c.papers) {
        if (static_cast<int>(p.sentences.size()) > cfg.max_sentences_per_paper)
            p.sentences.resize(static_cast<std::size_t>(cfg.max_sentences_per_paper));
        for (auto& s : p.sentences)
            if (static_cast<int>(s.tokens.size()) > cfg.max_tokens_per_sentence)
                s.tokens.resize(static_cast<std::size_t>(cfg.max_tokens_per_sentence));
        // Drop annotations that no longer fit the truncated text.
        SciIEAnnotation kept;
        std::unordered_map<std::string, int> surviving;
        for (const auto& m : p.annotations.mentions) {
            if (m.sentence >= static_cast<int>(p.sentences.size())) continue;
            if (m.end > static_cast<int>(p.sentences[static_cast<std::size_t>(m.sentence)].tokens.size()))
                continue;
            surviving[m.id] = 1;
            kept.mentions.push_back(m);
        }
        for (const auto& r : p.annotations.relations)
            if (surviving.count(r.head) && surviving.count(r.tail)) kept.relations.push_back(r);
        for (const auto& coref : p.annotations.corefs) {
            std::vector<std::string> ids;
            for (const auto& id : coref)
                if (surviving.count(id)) ids.push_back(id);
            if (ids.size() >= 2) kept.corefs.push_back(std::move(ids));
        }
        p.annotations = std::move(kept);
    }
    if (static_cast<int>(c.gold_summary.size()) > cfg.max_summary_tokens)
        c.gold_summary.resize(static_cast<std::size_t>(cfg.max_summary_tokens));
    if (static_cast<int>(c.gold_kgtext.size()) > cfg.max_kgtext_tokens)
        c.gold_kgtext.resize(static_cast<std::size_t>(cfg.max_kgtext_tokens));
    if (c.has_summary_annotations) {
        SciIEAnnotation kept;
        std::unordered_map<std::string, int> surviving;
        for (const auto& m : c.summary_annotations.mentions) {
            if (m.end > static_cast<int>(c.gold_summary.size())) continue;
            surviving[m.id] = 1;
            kept.mentions.push_back(m);
        }
        for (const auto& r : c.summary_annotations.relations)
            if (surviving.count(r.head) && surviving.count(r.tail)) kept.relations.push_back(r);
        c.summary_annotations = std::move(kept);
    }
    return c;
}

// Epoch batch order: a seeded shuffle of instance indices, chunked. The
// shuffle depends only on (seed, epoch); remainder batches are kept.
inline std::vector<std::vector<int>> batch_order(int n_instances, int batch_size, std::uint64_t seed,
                                                 int epoch) {
    std::vector<int> idx(static_cast<std::size_t>(n_instances));
    for (int i = 0; i < n_instances; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(idx);
    std::vector<std::vector<int>> batches;
    for (std::size_t at = 0; at < idx.size(); at += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(idx.size(), at + static_cast<std::size_t>(batch_size));
        batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(at),
                             idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

// Deterministic sequence of truncated-cluster batches for one epoch.
inline std::vector<std::vector<PaperCluster>> make_batches(const std::vector<PaperCluster>& clusters,
                                                           int batch_size, std::uint64_t seed,
                                                           const Config& cfg, int epoch = 0) {
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    std::vector<std::vector<PaperCluster>> out;
    for (const auto& batch : batch_order(static_cast<int>(clusters.size()), batch_size, seed, epoch)) {
        std::vector<PaperCluster> b;
        b.reserve(batch.size());
        for (int i : batch) b.push_back(truncate_cluster(clusters[static_cast<std::size_t>(i)], cfg));
        out.push_back(std::move(b));
    }
    return out;
}

}  // namespace kgsum
