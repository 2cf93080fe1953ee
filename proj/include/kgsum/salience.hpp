#pragma once

// RAKE phrase scoring over source papers and its mapping to per-entity
// salience multipliers for the decoder's graph attention.
//
// Candidate phrases are maximal runs of non-stopword tokens within a
// sentence. Word score = degree / frequency, where degree(w) sums the
// lengths of every candidate phrase occurrence containing w (self
// inclusive) and frequency(w) counts w's occurrences inside candidates.
// A phrase scores the sum of its word scores.

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgsum/corpus.hpp"
#include "kgsum/kgraph.hpp"
#include "kgsum/stoplist.hpp"

namespace kgsum {

struct RakeResult {
    std::map<std::string, double> phrase_scores;        // phrase (space-joined) -> score
    std::unordered_map<std::string, double> word_scores;  // content word -> degree/frequency
};

inline RakeResult rake_scores(const std::vector<Paper>& papers, const Stoplist& stop) {
    std::vector<std::vector<std::string>> phrases;
    for (const auto& p : papers) {
        for (const auto& s : p.sentences) {
            std::vector<std::string> cur;
            for (const auto& raw : s.tokens) {
                const std::string tok = lowercase(raw);
                if (stop.is_stopword(tok)) {
                    if (!cur.empty()) phrases.push_back(std::move(cur)), cur.clear();
                } else {
                    cur.push_back(tok);
                }
            }
            if (!cur.empty()) phrases.push_back(std::move(cur));
        }
    }

    std::unordered_map<std::string, double> degree, freq;
    for (const auto& ph : phrases) {
        for (const auto& w : ph) {
            degree[w] += static_cast<double>(ph.size());
            freq[w] += 1.0;
        }
    }

    RakeResult out;
    for (const auto& [w, d] : degree) out.word_scores[w] = d / freq[w];
    for (const auto& ph : phrases) {
        double score = 0.0;
        for (const auto& w : ph) score += out.word_scores[w];
        out.phrase_scores[join(ph, " ")] = score;
    }
    return out;
}

struct SalienceScores {
    std::vector<double> values;  // aligned with entity-vertex order, in (0, 1]
    bool normalized = true;
};

constexpr double kSalienceFloor = 0.05;

// Entity score: the RAKE score of the canonical surface form when it is a
// candidate phrase, otherwise the sum of its content-word scores; then
// min-max normalized to [floor, 1]. All-equal raw scores normalize to 1.
// Entities with no scorable content words sit at the floor.
inline SalienceScores entity_salience(const std::vector<EntityCluster>& clusters, const RakeResult& rake) {
    SalienceScores out;
    out.values.reserve(clusters.size());
    std::vector<bool> scorable(clusters.size(), true);
    std::vector<double> raw(clusters.size(), 0.0);
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const auto& key = clusters[i].key;
        auto it = rake.phrase_scores.find(key);
        if (it != rake.phrase_scores.end()) {
            raw[i] = it->second;
            continue;
        }
        double sum = 0.0;
        bool any = false;
        for (const auto& w : split_ws(key)) {
            auto wit = rake.word_scores.find(w);
            if (wit != rake.word_scores.end()) {
                sum += wit->second;
                any = true;
            }
        }
        raw[i] = sum;
        scorable[i] = any;
    }

    double lo = 0.0, hi = 0.0;
    bool have = false;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        if (!scorable[i]) continue;
        if (!have) {
            lo = hi = raw[i];
            have = true;
        } else {
            lo = std::min(lo, raw[i]);
            hi = std::max(hi, raw[i]);
        }
    }
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        if (!scorable[i]) {
            out.values.push_back(kSalienceFloor);
        } else if (!have || hi <= lo) {
            out.values.push_back(1.0);
        } else {
            out.values.push_back(kSalienceFloor + (1.0 - kSalienceFloor) * (raw[i] - lo) / (hi - lo));
        }
    }
    return out;
}

inline SalienceScores uniform_salience(std::size_t n) {
    SalienceScores out;
    out.values.assign(n, 1.0);
    return out;
}

}  // namespace kgsum
