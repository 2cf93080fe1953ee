#pragma once

// Automatic metrics: ROUGE-1/2 (clipped n-gram overlap), ROUGE-L (longest
// common subsequence) and recall of entity/context words, with JSON and
// plain-table reporting.

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgsum/corpus.hpp"
#include "kgsum/stoplist.hpp"

namespace kgsum {

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

namespace detail {

inline Prf make_prf(double match, double hyp_total, double ref_total) {
    Prf out;
    out.precision = hyp_total > 0.0 ? match / hyp_total : 0.0;
    out.recall = ref_total > 0.0 ? match / ref_total : 0.0;
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

template <typename Tok>
Prf rouge_n_impl(const std::vector<Tok>& ref, const std::vector<Tok>& hyp, int n) {
    if (static_cast<int>(ref.size()) < n) return {};
    std::map<std::vector<Tok>, long long> ref_counts, hyp_counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= ref.size(); ++i)
        ++ref_counts[std::vector<Tok>(ref.begin() + static_cast<std::ptrdiff_t>(i),
                                      ref.begin() + static_cast<std::ptrdiff_t>(i) + n)];
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= hyp.size(); ++i)
        ++hyp_counts[std::vector<Tok>(hyp.begin() + static_cast<std::ptrdiff_t>(i),
                                      hyp.begin() + static_cast<std::ptrdiff_t>(i) + n)];
    long long match = 0, ref_total = 0, hyp_total = 0;
    for (const auto& [gram, c] : ref_counts) ref_total += c;
    for (const auto& [gram, c] : hyp_counts) hyp_total += c;
    for (const auto& [gram, c] : ref_counts) {
        auto it = hyp_counts.find(gram);
        if (it != hyp_counts.end()) match += std::min(c, it->second);
    }
    return make_prf(static_cast<double>(match), static_cast<double>(hyp_total),
                    static_cast<double>(ref_total));
}

template <typename Tok>
long long lcs_length(const std::vector<Tok>& a, const std::vector<Tok>& b) {
    const std::size_t m = a.size(), n = b.size();
    std::vector<long long> prev(n + 1, 0), cur(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

template <typename Tok>
Prf rouge_l_impl(const std::vector<Tok>& ref, const std::vector<Tok>& hyp) {
    if (ref.empty() || hyp.empty()) return {};
    const double l = static_cast<double>(lcs_length(ref, hyp));
    return make_prf(l, static_cast<double>(hyp.size()), static_cast<double>(ref.size()));
}

inline std::vector<std::string> strip_padding(const std::vector<std::string>& toks) {
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (const auto& t : toks)
        if (t != Vocabulary::pad_token()) out.push_back(t);
    return out;
}

}  // namespace detail

inline Prf rouge_n(const std::vector<std::string>& ref, const std::vector<std::string>& hyp, int n) {
    if (n != 1 && n != 2) throw UsageError("rouge_n: n must be 1 or 2");
    return detail::rouge_n_impl(detail::strip_padding(ref), detail::strip_padding(hyp), n);
}

inline Prf rouge_l(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    return detail::rouge_l_impl(detail::strip_padding(ref), detail::strip_padding(hyp));
}

// Id-sequence variants for internal checkpoint selection.
inline Prf rouge_n_ids(const std::vector<int>& ref, const std::vector<int>& hyp, int n) {
    return detail::rouge_n_impl(ref, hyp, n);
}

inline Prf rouge_l_ids(const std::vector<int>& ref, const std::vector<int>& hyp) {
    return detail::rouge_l_impl(ref, hyp);
}

// ---------------------------------------------------------------------------
// Entity-word / context-word recall

// Per-cluster word classes: EW = non-stopword tokens inside any source-paper
// entity mention; CW = non-stopword source tokens outside every mention.
struct ClusterWordClasses {
    std::unordered_set<std::string> entity_words;
    std::unordered_set<std::string> context_words;
};

inline ClusterWordClasses entity_context_words(const PaperCluster& cluster, const Stoplist& stop) {
    ClusterWordClasses out;
    for (const auto& p : cluster.papers) {
        std::vector<std::vector<bool>> inside(p.sentences.size());
        for (std::size_t s = 0; s < p.sentences.size(); ++s)
            inside[s].assign(p.sentences[s].tokens.size(), false);
        for (const auto& m : p.annotations.mentions)
            for (int k = m.begin; k < m.end; ++k)
                inside[static_cast<std::size_t>(m.sentence)][static_cast<std::size_t>(k)] = true;
        for (std::size_t s = 0; s < p.sentences.size(); ++s)
            for (std::size_t k = 0; k < p.sentences[s].tokens.size(); ++k) {
                const std::string tok = lowercase(p.sentences[s].tokens[k]);
                if (stop.is_stopword(tok)) continue;
                if (inside[s][k])
                    out.entity_words.insert(tok);
                else
                    out.context_words.insert(tok);
            }
    }
    // A word inside any mention is an entity word everywhere.
    for (const auto& w : out.entity_words) out.context_words.erase(w);
    return out;
}

struct RecallValue {
    double value = 0.0;
    bool defined = false;  // false when the gold denominator is zero
};

struct RecallPair {
    RecallValue ew, cw;
};

namespace detail {

inline std::pair<long long, long long> clipped_class_counts(
    const std::vector<std::string>& gold, const std::vector<std::string>& generated,
    const std::unordered_set<std::string>& word_class) {
    std::unordered_map<std::string, long long> gold_counts, gen_counts;
    for (const auto& t : gold) {
        const std::string w = lowercase(t);
        if (word_class.count(w)) ++gold_counts[w];
    }
    for (const auto& t : generated) {
        const std::string w = lowercase(t);
        if (word_class.count(w)) ++gen_counts[w];
    }
    long long match = 0, total = 0;
    for (const auto& [w, c] : gold_counts) {
        total += c;
        auto it = gen_counts.find(w);
        if (it != gen_counts.end()) match += std::min(c, it->second);
    }
    return {match, total};
}

}  // namespace detail

// Micro-averaged recall over the corpus: sums of clipped per-word matches in
// the numerator, sums of gold-summary class-word counts in the denominator.
inline RecallPair ew_cw_recall(const std::vector<std::vector<std::string>>& gold_summaries,
                               const std::vector<std::vector<std::string>>& generated_summaries,
                               const std::vector<ClusterWordClasses>& classes) {
    if (gold_summaries.size() != generated_summaries.size() || gold_summaries.size() != classes.size())
        throw UsageError("ew_cw_recall: mismatched corpus sizes");
    long long ew_match = 0, ew_total = 0, cw_match = 0, cw_total = 0;
    for (std::size_t i = 0; i < gold_summaries.size(); ++i) {
        const auto gold = detail::strip_padding(gold_summaries[i]);
        const auto gen = detail::strip_padding(generated_summaries[i]);
        const auto [em, et] = detail::clipped_class_counts(gold, gen, classes[i].entity_words);
        const auto [cm, ct] = detail::clipped_class_counts(gold, gen, classes[i].context_words);
        ew_match += em;
        ew_total += et;
        cw_match += cm;
        cw_total += ct;
    }
    RecallPair out;
    if (ew_total > 0) {
        out.ew.value = static_cast<double>(ew_match) / static_cast<double>(ew_total);
        out.ew.defined = true;
    }
    if (cw_total > 0) {
        out.cw.value = static_cast<double>(cw_match) / static_cast<double>(cw_total);
        out.cw.defined = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus-level report

struct InstanceScores {
    std::string cluster_id;
    Prf rouge1, rouge2, rougeL;
    RecallPair recall;
};

struct MetricReport {
    double rouge1_f = 0.0, rouge2_f = 0.0, rougeL_f = 0.0;  // means of per-instance F1
    RecallPair recall;                                      // micro-averaged
    std::vector<InstanceScores> instances;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["corpus"]["rouge1_f"] = rouge1_f;
        j["corpus"]["rouge2_f"] = rouge2_f;
        j["corpus"]["rougeL_f"] = rougeL_f;
        j["corpus"]["recall_ew"] = recall.ew.defined ? nlohmann::json(recall.ew.value) : nlohmann::json();
        j["corpus"]["recall_cw"] = recall.cw.defined ? nlohmann::json(recall.cw.value) : nlohmann::json();
        j["instances"] = nlohmann::json::array();
        for (const auto& s : instances) {
            nlohmann::json ji;
            ji["cluster_id"] = s.cluster_id;
            ji["rouge1_f"] = s.rouge1.f1;
            ji["rouge2_f"] = s.rouge2.f1;
            ji["rougeL_f"] = s.rougeL.f1;
            ji["recall_ew"] = s.recall.ew.defined ? nlohmann::json(s.recall.ew.value) : nlohmann::json();
            ji["recall_cw"] = s.recall.cw.defined ? nlohmann::json(s.recall.cw.value) : nlohmann::json();
            j["instances"].push_back(std::move(ji));
        }
        return j;
    }

    std::string to_table() const {
        std::ostringstream os;
        auto fmt = [](double v) {
            std::ostringstream s;
            s << std::fixed << std::setprecision(4) << v;
            return s.str();
        };
        auto fmt_recall = [&](const RecallValue& r) { return r.defined ? fmt(r.value) : std::string("n/a"); };
        os << std::left << std::setw(24) << "metric" << std::right << std::setw(10) << "value" << "\n";
        os << std::string(34, '-') << "\n";
        os << std::left << std::setw(24) << "rouge-1 f1" << std::right << std::setw(10) << fmt(rouge1_f) << "\n";
        os << std::left << std::setw(24) << "rouge-2 f1" << std::right << std::setw(10) << fmt(rouge2_f) << "\n";
        os << std::left << std::setw(24) << "rouge-l f1" << std::right << std::setw(10) << fmt(rougeL_f) << "\n";
        os << std::left << std::setw(24) << "recall entity words" << std::right << std::setw(10)
           << fmt_recall(recall.ew) << "\n";
        os << std::left << std::setw(24) << "recall context words" << std::right << std::setw(10)
           << fmt_recall(recall.cw) << "\n";
        return os.str();
    }
};

// References are raw clusters (for gold summaries and mention spans);
// `generated` maps cluster_id to generated summary tokens.
inline MetricReport evaluate_corpus(const std::vector<PaperCluster>& references,
                                    const std::map<std::string, std::vector<std::string>>& generated,
                                    const Stoplist& stop) {
    MetricReport report;
    std::vector<std::vector<std::string>> golds, gens;
    std::vector<ClusterWordClasses> classes;
    for (const auto& ref : references) {
        auto it = generated.find(ref.cluster_id);
        if (it == generated.end())
            throw DataError("no generated summary for cluster '" + ref.cluster_id + "'");
        InstanceScores s;
        s.cluster_id = ref.cluster_id;
        s.rouge1 = rouge_n(ref.gold_summary, it->second, 1);
        s.rouge2 = rouge_n(ref.gold_summary, it->second, 2);
        s.rougeL = rouge_l(ref.gold_summary, it->second);
        ClusterWordClasses cls = entity_context_words(ref, stop);
        s.recall = ew_cw_recall({ref.gold_summary}, {it->second}, {cls});
        report.instances.push_back(s);
        golds.push_back(ref.gold_summary);
        gens.push_back(it->second);
        classes.push_back(std::move(cls));
    }
    if (!report.instances.empty()) {
        for (const auto& s : report.instances) {
            report.rouge1_f += s.rouge1.f1;
            report.rouge2_f += s.rouge2.f1;
            report.rougeL_f += s.rougeL.f1;
        }
        const double n = static_cast<double>(report.instances.size());
        report.rouge1_f /= n;
        report.rouge2_f /= n;
        report.rougeL_f /= n;
        report.recall = ew_cw_recall(golds, gens, classes);
    }
    return report;
}

}  // namespace kgsum
