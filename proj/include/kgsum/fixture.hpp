#pragma once

// Synthetic fixture corpus: tiny clusters with consistent annotations whose
// gold summaries copy entity mentions from the sources. Small enough for a
// micro model to memorize within a few hundred steps, which is what the
// overfitting checks rely on.

#include <string>
#include <vector>

#include "kgsum/corpus.hpp"
#include "kgsum/kgraph.hpp"
#include "kgsum/util.hpp"

namespace kgsum {

namespace detail {

inline const std::vector<std::string>& fixture_word_pool() {
    static const std::vector<std::string> pool = {
        "graph",      "neural",     "attention",  "parsing",     "translation",
        "summarization", "network", "model",      "corpus",      "embedding",
        "analysis",   "classification", "segmentation", "detection", "retrieval",
        "alignment",  "tagging",    "clustering", "encoder",     "decoder",
        "transformer", "recurrent", "convolutional", "bayesian",  "semantic",
        "syntactic",  "lexical",    "statistical", "latent",     "sparse",
    };
    return pool;
}

struct FixtureEntity {
    std::vector<std::string> tokens;
    EntityType type;
};

}  // namespace detail

inline std::vector<PaperCluster> generate_fixture_corpus(int n_instances, std::uint64_t seed) {
    if (n_instances < 1) throw UsageError("generate_fixture_corpus: n_instances must be >= 1");
    Rng rng(mix_seed(seed, 0xf1c7u));
    const auto& pool = detail::fixture_word_pool();
    const EntityType types[4] = {EntityType::Method, EntityType::Task, EntityType::Material,
                                 EntityType::Metric};

    std::vector<PaperCluster> out;
    out.reserve(static_cast<std::size_t>(n_instances));
    for (int ci = 0; ci < n_instances; ++ci) {
        PaperCluster cluster;
        cluster.cluster_id = "fixture-" + std::to_string(ci);

        // Two or three distinct entities; the first two drive the summary.
        const int n_entities = rng.range(2, 3);
        std::vector<detail::FixtureEntity> entities;
        std::vector<std::string> used_heads;
        while (static_cast<int>(entities.size()) < n_entities) {
            const std::string head = pool[rng.below(pool.size())];
            bool dup = false;
            for (const auto& h : used_heads) dup = dup || (h == head);
            if (dup) continue;
            used_heads.push_back(head);
            detail::FixtureEntity e;
            e.tokens.push_back(head);
            if (rng.uniform() < 0.5) e.tokens.push_back(pool[rng.below(pool.size())]);
            e.type = types[rng.below(4)];
            entities.push_back(std::move(e));
        }

        const int n_papers = rng.range(2, 3);
        for (int pi = 0; pi < n_papers; ++pi) {
            Paper paper;
            paper.paper_id = cluster.cluster_id + "-p" + std::to_string(pi);
            int next_mention = 0;
            auto add_sentence = [&](const std::vector<std::string>& prefix, int entity_idx,
                                    const std::vector<std::string>& middle, int entity_idx2) {
                Sentence s;
                s.tokens = prefix;
                const int si = static_cast<int>(paper.sentences.size());
                std::vector<std::string> mention_ids;
                auto place = [&](int ei) {
                    if (ei < 0) return;
                    const auto& e = entities[static_cast<std::size_t>(ei)];
                    Mention m;
                    m.id = "m" + std::to_string(next_mention++);
                    m.sentence = si;
                    m.begin = static_cast<int>(s.tokens.size());
                    s.tokens.insert(s.tokens.end(), e.tokens.begin(), e.tokens.end());
                    m.end = static_cast<int>(s.tokens.size());
                    m.type = e.type;
                    paper.annotations.mentions.push_back(m);
                    mention_ids.push_back(m.id);
                };
                place(entity_idx);
                s.tokens.insert(s.tokens.end(), middle.begin(), middle.end());
                place(entity_idx2);
                s.tokens.push_back(".");
                paper.sentences.push_back(std::move(s));
                return mention_ids;
            };

            // Every paper mentions the first entity (shared across papers) so
            // cross-paper merging always triggers.
            const int other = 1 + (pi % (n_entities - 1));
            auto ids0 = add_sentence({"we", "study"}, 0, {"with"}, other);
            if (ids0.size() == 2) {
                Relation r;
                r.head = ids0[0];
                r.tail = ids0[1];
                r.type = (rng.uniform() < 0.5) ? RelationType::UsedFor : RelationType::EvaluateFor;
                paper.annotations.relations.push_back(r);
            }
            if (rng.uniform() < 0.6) {
                auto ids1 = add_sentence({"results", "show"}, rng.range(0, n_entities - 1),
                                         {"helps"}, -1);
                // Occasionally corefer the repeated mention with a pronoun,
                // which node pruning must strip.
                if (!ids1.empty() && rng.uniform() < 0.5) {
                    Sentence s;
                    s.tokens = {"it", "works", "well", "."};
                    Mention m;
                    m.id = "m" + std::to_string(next_mention++);
                    m.sentence = static_cast<int>(paper.sentences.size());
                    m.begin = 0;
                    m.end = 1;
                    m.type = EntityType::Generic;
                    paper.sentences.push_back(std::move(s));
                    paper.annotations.mentions.push_back(m);
                    paper.annotations.corefs.push_back({ids1[0], m.id});
                }
            }
            cluster.papers.push_back(std::move(paper));
        }

        // Gold summary copies the first two entity surfaces.
        const auto& e0 = entities[0];
        const auto& e1 = entities[1];
        cluster.gold_summary = {"the"};
        Mention sm0;
        sm0.id = "s0";
        sm0.sentence = 0;
        sm0.begin = static_cast<int>(cluster.gold_summary.size());
        cluster.gold_summary.insert(cluster.gold_summary.end(), e0.tokens.begin(), e0.tokens.end());
        sm0.end = static_cast<int>(cluster.gold_summary.size());
        sm0.type = e0.type;
        cluster.gold_summary.insert(cluster.gold_summary.end(), {"approach", "is", "used", "for"});
        Mention sm1;
        sm1.id = "s1";
        sm1.sentence = 0;
        sm1.begin = static_cast<int>(cluster.gold_summary.size());
        cluster.gold_summary.insert(cluster.gold_summary.end(), e1.tokens.begin(), e1.tokens.end());
        sm1.end = static_cast<int>(cluster.gold_summary.size());
        sm1.type = e1.type;
        cluster.gold_summary.push_back(".");
        cluster.summary_annotations.mentions = {sm0, sm1};
        Relation sr;
        sr.head = "s0";
        sr.tail = "s1";
        sr.type = RelationType::UsedFor;
        cluster.summary_annotations.relations = {sr};
        cluster.has_summary_annotations = true;

        cluster.gold_kgtext = build_kgtext(summary_graph(cluster), KgVariant::EntTypeRel);
        out.push_back(std::move(cluster));
    }
    return out;
}

}  // namespace kgsum
