#pragma once

// Knowledge-graph construction: coreference collapsing into entity clusters,
// the unified Levi graph with relation/type/global vertices, the
// entity-sentence bipartite graph, and the KGtext serialization together
// with its tolerant inverse parser.

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgsum/config.hpp"
#include "kgsum/corpus.hpp"
#include "kgsum/stoplist.hpp"
#include "kgsum/util.hpp"

namespace kgsum {

struct MentionRef {
    int paper = 0;
    int sentence = 0;  // index within the paper
    int begin = 0;
    int end = 0;
    EntityType type = EntityType::Generic;
};

struct EntityCluster {
    std::string key;  // canonical surface form, lowercased and space-joined
    EntityType canonical_type = EntityType::Generic;
    std::vector<MentionRef> mentions;
};

// Tie-break order for the canonical-type vote. Note this differs from the
// declaration order of EntityType: Generic loses every tie.
inline int type_vote_rank(EntityType t) {
    switch (t) {
        case EntityType::Task: return 0;
        case EntityType::Method: return 1;
        case EntityType::Metric: return 2;
        case EntityType::Material: return 3;
        case EntityType::OtherScientificTerm: return 4;
        case EntityType::Generic: return 5;
    }
    return 5;
}

namespace detail {

inline std::string mention_surface(const Paper& p, const Mention& m) {
    const auto& toks = p.sentences[static_cast<std::size_t>(m.sentence)].tokens;
    std::vector<std::string> span(toks.begin() + m.begin, toks.begin() + m.end);
    for (auto& t : span) t = lowercase(t);
    return join(span, " ");
}

inline bool mention_is_prunable(const Paper& p, const Mention& m, const Stoplist& stop) {
    const auto& toks = p.sentences[static_cast<std::size_t>(m.sentence)].tokens;
    for (int k = m.begin; k < m.end; ++k)
        if (stop.is_content_word(lowercase(toks[static_cast<std::size_t>(k)]))) return false;
    return true;
}

inline EntityType vote_type(const std::vector<MentionRef>& mentions) {
    int counts[kEntityTypeCount] = {0};
    for (const auto& m : mentions) ++counts[static_cast<int>(m.type)];
    EntityType best = EntityType::Generic;
    int best_count = -1, best_rank = 99;
    for (int i = 0; i < kEntityTypeCount; ++i) {
        const auto t = static_cast<EntityType>(i);
        const int r = type_vote_rank(t);
        if (counts[i] > best_count || (counts[i] == best_count && r < best_rank)) {
            best = t;
            best_count = counts[i];
            best_rank = r;
        }
    }
    return best;
}

}  // namespace detail

struct CollapseResult {
    std::vector<EntityCluster> clusters;
    // (paper index, mention id) -> cluster index, -1 when the mention was pruned.
    std::map<std::pair<int, std::string>, int> mention_cluster;
    std::vector<std::string> notes;
};

// Collapses coref clusters into entities, prunes pronoun/stopword-only
// mentions, and merges clusters across papers whose canonical surface forms
// coincide. Deterministic: clusters are ordered by first mention position.
inline CollapseResult collapse_corefs(const std::vector<Paper>& papers, const Stoplist& stop) {
    CollapseResult out;

    struct ProtoCluster {
        std::vector<std::pair<std::string, MentionRef>> surfaced;  // (surface, ref)
        std::vector<std::pair<int, std::string>> member_ids;       // (paper, mention id)
    };
    std::vector<ProtoCluster> protos;

    for (int pi = 0; pi < static_cast<int>(papers.size()); ++pi) {
        const Paper& p = papers[static_cast<std::size_t>(pi)];
        std::unordered_map<std::string, const Mention*> by_id;
        for (const auto& m : p.annotations.mentions) by_id[m.id] = &m;
        std::unordered_map<std::string, bool> in_coref;
        for (const auto& coref : p.annotations.corefs) {
            ProtoCluster proto;
            for (const auto& id : coref) {
                in_coref[id] = true;
                const Mention& m = *by_id.at(id);
                proto.member_ids.emplace_back(pi, id);
                if (detail::mention_is_prunable(p, m, stop)) continue;
                proto.surfaced.emplace_back(detail::mention_surface(p, m),
                                            MentionRef{pi, m.sentence, m.begin, m.end, m.type});
            }
            protos.push_back(std::move(proto));
        }
        for (const auto& m : p.annotations.mentions) {
            if (in_coref.count(m.id)) continue;
            ProtoCluster proto;
            proto.member_ids.emplace_back(pi, m.id);
            if (!detail::mention_is_prunable(p, m, stop))
                proto.surfaced.emplace_back(detail::mention_surface(p, m),
                                            MentionRef{pi, m.sentence, m.begin, m.end, m.type});
            protos.push_back(std::move(proto));
        }
    }

    // Canonical surface of a proto cluster: most frequent surviving surface,
    // ties broken by earliest occurrence.
    auto canonical_key = [](const ProtoCluster& proto) -> std::string {
        std::map<std::string, int> freq;
        for (const auto& [surface, ref] : proto.surfaced) ++freq[surface];
        std::string best;
        int best_freq = -1;
        for (const auto& [surface, ref] : proto.surfaced) {
            const int f = freq[surface];
            if (f > best_freq) {
                best = surface;
                best_freq = f;
            }
        }
        return best;
    };

    std::unordered_map<std::string, int> key_to_cluster;
    for (const auto& proto : protos) {
        if (proto.surfaced.empty()) {
            if (!proto.member_ids.empty()) {
                out.notes.push_back("dropped entity cluster with only pronoun/stopword mentions (mention '" +
                                    proto.member_ids.front().second + "')");
                for (const auto& mid : proto.member_ids) out.mention_cluster[mid] = -1;
            }
            continue;
        }
        const std::string key = canonical_key(proto);
        int ci;
        auto it = key_to_cluster.find(key);
        if (it == key_to_cluster.end()) {
            ci = static_cast<int>(out.clusters.size());
            key_to_cluster.emplace(key, ci);
            out.clusters.push_back(EntityCluster{key, EntityType::Generic, {}});
        } else {
            ci = it->second;
        }
        auto& cluster = out.clusters[static_cast<std::size_t>(ci)];
        for (const auto& [surface, ref] : proto.surfaced) cluster.mentions.push_back(ref);
        for (const auto& mid : proto.member_ids) out.mention_cluster[mid] = ci;
    }

    for (auto& c : out.clusters) {
        std::sort(c.mentions.begin(), c.mentions.end(), [](const MentionRef& a, const MentionRef& b) {
            return std::tie(a.paper, a.sentence, a.begin, a.end) < std::tie(b.paper, b.sentence, b.begin, b.end);
        });
        c.canonical_type = detail::vote_type(c.mentions);
    }

    // Order clusters by first mention position.
    std::vector<int> order(out.clusters.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ma = out.clusters[static_cast<std::size_t>(a)].mentions.front();
        const auto& mb = out.clusters[static_cast<std::size_t>(b)].mentions.front();
        return std::tie(ma.paper, ma.sentence, ma.begin, ma.end) <
               std::tie(mb.paper, mb.sentence, mb.begin, mb.end);
    });
    std::vector<int> new_index(out.clusters.size());
    std::vector<EntityCluster> reordered;
    reordered.reserve(out.clusters.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        new_index[static_cast<std::size_t>(order[rank])] = static_cast<int>(rank);
        reordered.push_back(std::move(out.clusters[static_cast<std::size_t>(order[rank])]));
    }
    out.clusters = std::move(reordered);
    for (auto& [mid, ci] : out.mention_cluster)
        if (ci >= 0) ci = new_index[static_cast<std::size_t>(ci)];
    return out;
}

// ---------------------------------------------------------------------------
// Relation tuples and the Levi graph

struct RelationTuple {
    int head = 0;  // entity cluster index
    RelationType type = RelationType::UsedFor;
    int tail = 0;
};

struct ResolvedRelations {
    std::vector<RelationTuple> tuples;
    std::vector<std::string> notes;
};

// Maps annotation relations onto entity-cluster tuples, dropping relations
// whose endpoints were pruned and deduplicating (head, type, tail) triples.
inline ResolvedRelations resolve_relations(const std::vector<Paper>& papers, const CollapseResult& cr) {
    ResolvedRelations out;
    std::set<std::tuple<int, int, int>> seen;
    for (int pi = 0; pi < static_cast<int>(papers.size()); ++pi) {
        for (const auto& r : papers[static_cast<std::size_t>(pi)].annotations.relations) {
            const auto hit = cr.mention_cluster.find({pi, r.head});
            const auto tit = cr.mention_cluster.find({pi, r.tail});
            const int hc = hit == cr.mention_cluster.end() ? -1 : hit->second;
            const int tc = tit == cr.mention_cluster.end() ? -1 : tit->second;
            if (hc < 0 || tc < 0) {
                out.notes.push_back("dropped relation " + r.head + " -> " + r.tail +
                                    " (endpoint entity was pruned)");
                continue;
            }
            const auto k = std::make_tuple(hc, static_cast<int>(r.type), tc);
            if (seen.insert(k).second) out.tuples.push_back(RelationTuple{hc, r.type, tc});
        }
    }
    return out;
}

struct LeviVertex {
    enum class Kind { Entity, RelFwd, RelBwd, Type, Global };
    Kind kind = Kind::Entity;
    std::string label;                       // entity surface / relation / type name
    int entity = -1;                         // Entity: cluster index
    int tuple = -1;                          // RelFwd/RelBwd: tuple index
    RelationType rtype = RelationType::UsedFor;
    EntityType etype = EntityType::Generic;  // Type vertices and Entity vertices
};

struct LeviGraph {
    std::vector<LeviVertex> vertices;
    std::vector<std::pair<int, int>> edges;  // directed (src, dst)
    int entity_count = 0;
    int relation_tuple_count = 0;
    int type_count = 0;

    // Predecessor lists (including the self loop): attention neighborhoods.
    std::vector<std::vector<int>> in_neighbors() const {
        std::vector<std::vector<int>> in(vertices.size());
        for (const auto& [s, d] : edges) in[static_cast<std::size_t>(d)].push_back(s);
        return in;
    }

    std::string to_dot() const {
        std::ostringstream os;
        os << "digraph levi {\n";
        for (std::size_t i = 0; i < vertices.size(); ++i) {
            const auto& v = vertices[i];
            const char* kind = "";
            switch (v.kind) {
                case LeviVertex::Kind::Entity: kind = "entity"; break;
                case LeviVertex::Kind::RelFwd: kind = "rel_fwd"; break;
                case LeviVertex::Kind::RelBwd: kind = "rel_bwd"; break;
                case LeviVertex::Kind::Type: kind = "type"; break;
                case LeviVertex::Kind::Global: kind = "global"; break;
            }
            os << "  v" << i << " [label=\"" << kind << ": " << v.label << "\"];\n";
        }
        for (const auto& [s, d] : edges) os << "  v" << s << " -> v" << d << ";\n";
        os << "}\n";
        return os.str();
    }
};

// Builds the unified unlabeled directed graph: entity vertices in cluster
// order, then forward/backward relation vertices per tuple, then one vertex
// per distinct canonical type present, then the global vertex. Each tuple
// contributes the 4-edge motif e1->r_fwd, r_fwd->e2, e2->r_bwd, r_bwd->e1;
// type and global connections are bidirectional pairs; every vertex carries
// a self loop.
inline LeviGraph build_levi_graph(const std::vector<EntityCluster>& clusters,
                                  const std::vector<RelationTuple>& tuples) {
    LeviGraph g;
    g.entity_count = static_cast<int>(clusters.size());
    g.relation_tuple_count = static_cast<int>(tuples.size());

    for (int i = 0; i < g.entity_count; ++i) {
        const auto& c = clusters[static_cast<std::size_t>(i)];
        g.vertices.push_back(LeviVertex{LeviVertex::Kind::Entity, c.key, i, -1,
                                        RelationType::UsedFor, c.canonical_type});
    }
    std::vector<int> fwd_vertex(tuples.size()), bwd_vertex(tuples.size());
    for (int t = 0; t < static_cast<int>(tuples.size()); ++t) {
        const auto& tup = tuples[static_cast<std::size_t>(t)];
        fwd_vertex[static_cast<std::size_t>(t)] = static_cast<int>(g.vertices.size());
        g.vertices.push_back(LeviVertex{LeviVertex::Kind::RelFwd, to_string(tup.type), -1, t, tup.type,
                                        EntityType::Generic});
        bwd_vertex[static_cast<std::size_t>(t)] = static_cast<int>(g.vertices.size());
        g.vertices.push_back(LeviVertex{LeviVertex::Kind::RelBwd, std::string(to_string(tup.type)) + "-inv",
                                        -1, t, tup.type, EntityType::Generic});
    }
    // Type vertices for the canonical types present, in enum order.
    int type_vertex[kEntityTypeCount];
    for (int i = 0; i < kEntityTypeCount; ++i) type_vertex[i] = -1;
    for (int ti = 0; ti < kEntityTypeCount; ++ti) {
        const auto t = static_cast<EntityType>(ti);
        const bool present = std::any_of(clusters.begin(), clusters.end(),
                                         [&](const EntityCluster& c) { return c.canonical_type == t; });
        if (!present) continue;
        type_vertex[ti] = static_cast<int>(g.vertices.size());
        g.vertices.push_back(
            LeviVertex{LeviVertex::Kind::Type, to_string(t), -1, -1, RelationType::UsedFor, t});
        ++g.type_count;
    }
    const int global = static_cast<int>(g.vertices.size());
    g.vertices.push_back(
        LeviVertex{LeviVertex::Kind::Global, "global", -1, -1, RelationType::UsedFor, EntityType::Generic});

    for (int t = 0; t < static_cast<int>(tuples.size()); ++t) {
        const auto& tup = tuples[static_cast<std::size_t>(t)];
        const int f = fwd_vertex[static_cast<std::size_t>(t)];
        const int b = bwd_vertex[static_cast<std::size_t>(t)];
        g.edges.emplace_back(tup.head, f);
        g.edges.emplace_back(f, tup.tail);
        g.edges.emplace_back(tup.tail, b);
        g.edges.emplace_back(b, tup.head);
    }
    for (int i = 0; i < g.entity_count; ++i) {
        const int tv = type_vertex[static_cast<int>(clusters[static_cast<std::size_t>(i)].canonical_type)];
        g.edges.emplace_back(i, tv);
        g.edges.emplace_back(tv, i);
    }
    for (int i = 0; i < g.entity_count; ++i) {
        g.edges.emplace_back(global, i);
        g.edges.emplace_back(i, global);
    }
    for (int v = 0; v < static_cast<int>(g.vertices.size()); ++v) g.edges.emplace_back(v, v);
    return g;
}

// ---------------------------------------------------------------------------
// Entity-sentence graph

struct EntitySentenceGraph {
    int entity_count = 0;
    int sentence_count = 0;
    // weights[i][j] = number of mentions of entity i inside global sentence j.
    std::vector<std::vector<int>> weights;

    bool connected(int entity, int sentence) const {
        return weights[static_cast<std::size_t>(entity)][static_cast<std::size_t>(sentence)] != 0;
    }
};

inline EntitySentenceGraph build_entity_sentence_graph(const std::vector<EntityCluster>& clusters,
                                                       const std::vector<Paper>& papers) {
    EntitySentenceGraph g;
    g.entity_count = static_cast<int>(clusters.size());
    std::vector<int> sentence_offset(papers.size());
    int total = 0;
    for (std::size_t p = 0; p < papers.size(); ++p) {
        sentence_offset[p] = total;
        total += static_cast<int>(papers[p].sentences.size());
    }
    g.sentence_count = total;
    g.weights.assign(static_cast<std::size_t>(g.entity_count), std::vector<int>(static_cast<std::size_t>(total), 0));
    for (int i = 0; i < g.entity_count; ++i)
        for (const auto& m : clusters[static_cast<std::size_t>(i)].mentions) {
            const int j = sentence_offset[static_cast<std::size_t>(m.paper)] + m.sentence;
            ++g.weights[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    return g;
}

// ---------------------------------------------------------------------------
// KGtext serialization and parsing

struct KgEntity {
    std::vector<std::string> tokens;
    EntityType type = EntityType::Generic;
    bool has_type = false;
};

struct KgRelation {
    std::vector<std::string> head;
    RelationType type = RelationType::UsedFor;
    std::vector<std::string> tail;
};

struct KgGraph {
    std::vector<KgEntity> entities;
    std::vector<KgRelation> relations;
};

namespace detail {

inline int type_marker_lookup(const std::string& tok) {
    for (int i = 0; i < kEntityTypeCount; ++i)
        if (tok == type_marker(static_cast<EntityType>(i))) return i;
    return -1;
}

inline int relation_marker_lookup(const std::string& tok) {
    for (int i = 0; i < kRelationTypeCount; ++i)
        if (tok == relation_marker(static_cast<RelationType>(i), false)) return i;
    return -1;
}

}  // namespace detail

// Serializes a deduplicated entity/relation set as descriptive sentences:
//   "the entities and types are : <type> tok .. <type> tok .. ,
//    the relations are : e1 <rel> e2 ; e1 <rel> e2 ."
// The Ent variant drops the type markers (prefix "the entities are :");
// Ent and Ent+Type drop the relation section. Empty sections are omitted.
inline std::vector<std::string> build_kgtext(const KgGraph& g, KgVariant variant) {
    std::map<std::string, int> listed;
    for (int i = 0; i < static_cast<int>(g.entities.size()); ++i) {
        const auto& e = g.entities[static_cast<std::size_t>(i)];
        if (e.tokens.empty()) throw DataError("build_kgtext: entity with empty surface form");
        listed.emplace(join(e.tokens, " "), i);
    }
    if (listed.size() != g.entities.size())
        throw DataError("build_kgtext: entities must be deduplicated by surface form");

    const bool with_types = variant != KgVariant::Ent;
    const bool with_relations = variant == KgVariant::EntTypeRel;

    std::vector<std::string> out;
    if (with_types)
        out = {"the", "entities", "and", "types", "are", ":"};
    else
        out = {"the", "entities", "are", ":"};
    for (const auto& e : g.entities) {
        if (with_types) out.push_back(type_marker(e.type));
        out.insert(out.end(), e.tokens.begin(), e.tokens.end());
    }
    if (with_relations && !g.relations.empty()) {
        for (const auto& r : g.relations) {
            if (!listed.count(join(r.head, " ")))
                throw DataError("build_kgtext: relation references unlisted entity '" + join(r.head, " ") + "'");
            if (!listed.count(join(r.tail, " ")))
                throw DataError("build_kgtext: relation references unlisted entity '" + join(r.tail, " ") + "'");
        }
        out.push_back(",");
        out.insert(out.end(), {"the", "relations", "are", ":"});
        for (std::size_t i = 0; i < g.relations.size(); ++i) {
            const auto& r = g.relations[i];
            if (i) out.push_back(";");
            out.insert(out.end(), r.head.begin(), r.head.end());
            out.push_back(relation_marker(r.type, false));
            out.insert(out.end(), r.tail.begin(), r.tail.end());
        }
    }
    out.push_back(".");
    return out;
}

struct ParsedKgText {
    KgGraph graph;
    int malformed = 0;
};

// Best-effort inverse of build_kgtext. Never throws on generated text:
// unparseable segments are skipped and counted.
inline ParsedKgText parse_kgtext(const std::vector<std::string>& tokens) {
    ParsedKgText out;
    if (tokens.empty()) return out;

    // Locate the entity prefix ".. are :" and the relation prompt.
    std::size_t pos = 0;
    const std::size_t n = tokens.size();
    auto find_colon = [&](std::size_t from) {
        for (std::size_t i = from; i < n; ++i)
            if (tokens[i] == ":") return i;
        return n;
    };
    const std::size_t entity_colon = find_colon(0);
    if (entity_colon == n) {
        out.malformed = 1;  // no recognizable structure at all
        return out;
    }
    // Relation section starts at "the relations are :" when present; find
    // the next colon after the entity section.
    std::size_t rel_colon = find_colon(entity_colon + 1);
    std::size_t entity_end = n;  // one past the last entity token
    std::size_t rel_begin = n;
    if (rel_colon != n) {
        // Walk back over the prompt words and the "," separator.
        std::size_t back = rel_colon;
        while (back > entity_colon + 1) {
            const std::string& t = tokens[back - 1];
            if (t == "the" || t == "relations" || t == "are" || t == ",") {
                --back;
            } else {
                break;
            }
        }
        entity_end = back;
        rel_begin = rel_colon + 1;
    }
    // Strip the terminating "." from whichever section ends the text.
    auto strip_final_period = [&](std::size_t end, std::size_t begin) {
        while (end > begin && (tokens[end - 1] == ".")) --end;
        return end;
    };
    if (rel_begin == n) entity_end = strip_final_period(n, entity_colon + 1);

    // Entity section: segments delimited by type markers. Without any
    // marker (Ent variant) the whole section is one surface form.
    pos = entity_colon + 1;
    bool cur_has_type = false;
    EntityType cur_type = EntityType::Generic;
    std::vector<std::string> cur;
    std::set<std::string> seen_entities;
    auto flush_entity = [&]() {
        if (cur.empty()) {
            if (cur_has_type) ++out.malformed;  // marker with no surface form
        } else if (seen_entities.insert(join(cur, " ")).second) {
            out.graph.entities.push_back(KgEntity{cur, cur_type, cur_has_type});
        }
        cur.clear();
    };
    for (; pos < entity_end; ++pos) {
        const std::string& t = tokens[pos];
        const int tm = detail::type_marker_lookup(t);
        if (tm >= 0) {
            flush_entity();
            cur_has_type = true;
            cur_type = static_cast<EntityType>(tm);
        } else if (t == "," || t == ";" || t == "." || t == ":") {
            flush_entity();
            cur_has_type = false;
        } else {
            cur.push_back(t);
        }
    }
    flush_entity();

    // Relation section: "e1 <rel> e2" tuples separated by ";".
    if (rel_begin < n) {
        const std::size_t rel_end = strip_final_period(n, rel_begin);
        std::vector<std::string> seg;
        auto flush_relation = [&]() {
            if (seg.empty()) return;
            int marker_at = -1, marker_type = -1;
            for (std::size_t k = 0; k < seg.size(); ++k) {
                const int rm = detail::relation_marker_lookup(seg[k]);
                if (rm >= 0) {
                    marker_at = static_cast<int>(k);
                    marker_type = rm;
                    break;
                }
            }
            if (marker_at < 0 || marker_at == 0 || marker_at + 1 == static_cast<int>(seg.size())) {
                ++out.malformed;
            } else {
                KgRelation r;
                r.head.assign(seg.begin(), seg.begin() + marker_at);
                r.type = static_cast<RelationType>(marker_type);
                r.tail.assign(seg.begin() + marker_at + 1, seg.end());
                out.graph.relations.push_back(std::move(r));
            }
            seg.clear();
        };
        for (std::size_t i = rel_begin; i < rel_end; ++i) {
            const std::string& t = tokens[i];
            if (t == ";" || t == ".") {
                flush_relation();
            } else {
                seg.push_back(t);
            }
        }
        flush_relation();
    }
    return out;
}

// Canonical form for round-trip comparison: entity order and relation order
// preserved, surfaces joined for equality checks.
inline bool same_graph(const KgGraph& a, const KgGraph& b, bool compare_types) {
    if (a.entities.size() != b.entities.size() || a.relations.size() != b.relations.size()) return false;
    for (std::size_t i = 0; i < a.entities.size(); ++i) {
        if (a.entities[i].tokens != b.entities[i].tokens) return false;
        if (compare_types &&
            (a.entities[i].has_type != b.entities[i].has_type ||
             (a.entities[i].has_type && a.entities[i].type != b.entities[i].type)))
            return false;
    }
    for (std::size_t i = 0; i < a.relations.size(); ++i) {
        if (a.relations[i].head != b.relations[i].head || a.relations[i].tail != b.relations[i].tail ||
            a.relations[i].type != b.relations[i].type)
            return false;
    }
    return true;
}

// Entity/relation set extracted from gold-summary annotations, deduplicated
// by surface form in first-appearance order; input to build_kgtext.
inline KgGraph summary_graph(const PaperCluster& c) {
    KgGraph g;
    if (!c.has_summary_annotations) return g;
    std::vector<Mention> mentions = c.summary_annotations.mentions;
    std::sort(mentions.begin(), mentions.end(), [](const Mention& a, const Mention& b) {
        return std::tie(a.begin, a.end) < std::tie(b.begin, b.end);
    });
    std::unordered_map<std::string, std::string> id_to_surface;
    std::map<std::string, int> listed;
    for (const auto& m : c.summary_annotations.mentions) {
        std::vector<std::string> toks(c.gold_summary.begin() + m.begin, c.gold_summary.begin() + m.end);
        for (auto& t : toks) t = lowercase(t);
        id_to_surface[m.id] = join(toks, " ");
    }
    for (const auto& m : mentions) {
        std::vector<std::string> toks(c.gold_summary.begin() + m.begin, c.gold_summary.begin() + m.end);
        for (auto& t : toks) t = lowercase(t);
        const std::string key = join(toks, " ");
        if (listed.count(key)) continue;
        listed.emplace(key, static_cast<int>(g.entities.size()));
        g.entities.push_back(KgEntity{toks, m.type, true});
    }
    std::set<std::tuple<std::string, int, std::string>> seen;
    for (const auto& r : c.summary_annotations.relations) {
        const auto hs = id_to_surface.find(r.head);
        const auto ts = id_to_surface.find(r.tail);
        if (hs == id_to_surface.end() || ts == id_to_surface.end()) continue;
        if (!listed.count(hs->second) || !listed.count(ts->second)) continue;
        if (!seen.insert({hs->second, static_cast<int>(r.type), ts->second}).second) continue;
        KgRelation rel;
        rel.head = split_ws(hs->second);
        rel.type = r.type;
        rel.tail = split_ws(ts->second);
        g.relations.push_back(std::move(rel));
    }
    return g;
}

}  // namespace kgsum
