#pragma once

// Inference: greedy search (KGtext), beam search with GNMT length penalty
// and a hard minimum-length constraint (summaries), and the end-to-end
// generate pipeline that resolves copied ids back to surface tokens.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "kgsum/model.hpp"

namespace kgsum {

// lp(len) = ((5 + len) / 6)^alpha
inline double length_penalty(int len, double alpha) {
    return std::pow((5.0 + static_cast<double>(len)) / 6.0, alpha);
}

struct DecodeScore {
    std::vector<int> ids;      // extended ids, EOS stripped
    double logprob = 0.0;      // sum of token log-probabilities (incl. EOS if emitted)
    double norm_score = 0.0;   // logprob / lp(emitted count)
};

struct BeamParams {
    int beam_size = 5;
    int min_len = 1;
    int max_len = 64;
    double alpha = 0.4;
    int block_ngram = 0;  // 0 disables repeated-n-gram blocking
};

inline DecodeScore greedy_decode(const Model& model, Model::DecodeSession& session, Model::Dec kind,
                                 int min_len, int max_len) {
    DecodeScore out;
    for (int step = 0; step < max_len; ++step) {
        const Eigen::RowVectorXd dist = model.step_distribution(session, kind, out.ids, step < min_len);
        int best = 0;
        double best_p = dist(0);
        for (int i = 1; i < dist.size(); ++i)
            if (dist(i) > best_p) {
                best_p = dist(i);
                best = i;
            }
        out.logprob += std::log(std::max(best_p, 1e-300));
        if (best == Vocabulary::kEos) {
            out.norm_score = out.logprob / length_penalty(static_cast<int>(out.ids.size()) + 1, 0.0);
            return out;
        }
        out.ids.push_back(best);
    }
    out.norm_score = out.logprob / length_penalty(static_cast<int>(out.ids.size()), 0.0);
    return out;
}

namespace detail {

inline bool makes_repeated_ngram(const std::vector<int>& ids, int tok, int n) {
    if (n <= 0 || static_cast<int>(ids.size()) + 1 < 2 * n) return false;
    std::vector<int> gram(ids.end() - (n - 1), ids.end());
    gram.push_back(tok);
    for (std::size_t at = 0; at + static_cast<std::size_t>(n) <= ids.size(); ++at) {
        bool same = true;
        for (int k = 0; k < n; ++k)
            if (ids[at + static_cast<std::size_t>(k)] != gram[static_cast<std::size_t>(k)]) {
                same = false;
                break;
            }
        if (same) return true;
    }
    return false;
}

}  // namespace detail

// Standard beam search: at every step the top beam_size continuations by
// cumulative log-probability are kept (ties broken toward the
// lexicographically smaller token sequence); hypotheses that emit EOS (legal
// only after min_len tokens) retire to the finished pool. The winner is the
// finished hypothesis with the highest lp-normalized score.
inline DecodeScore beam_decode(const Model& model, Model::DecodeSession& session, Model::Dec kind,
                               const BeamParams& bp) {
    struct Hyp {
        std::vector<int> ids;
        double logprob = 0.0;
    };
    struct Finished {
        std::vector<int> ids;  // EOS stripped
        double logprob = 0.0;
        double norm = 0.0;
    };

    std::vector<Hyp> active{Hyp{}};
    std::vector<Finished> finished;

    for (int step = 0; step < bp.max_len && !active.empty(); ++step) {
        struct Cand {
            int parent;
            int tok;
            double logprob;
        };
        std::vector<Cand> cands;
        for (int h = 0; h < static_cast<int>(active.size()); ++h) {
            const Eigen::RowVectorXd dist =
                model.step_distribution(session, kind, active[static_cast<std::size_t>(h)].ids,
                                        step < bp.min_len);
            for (int tok = 0; tok < dist.size(); ++tok) {
                if (dist(tok) <= 0.0) continue;
                if (bp.block_ngram > 0 && tok != Vocabulary::kEos &&
                    detail::makes_repeated_ngram(active[static_cast<std::size_t>(h)].ids, tok,
                                                 bp.block_ngram))
                    continue;
                cands.push_back(Cand{h, tok,
                                     active[static_cast<std::size_t>(h)].logprob + std::log(dist(tok))});
            }
        }
        auto seq_less = [&](const Cand& a, const Cand& b) {
            const auto& sa = active[static_cast<std::size_t>(a.parent)].ids;
            const auto& sb = active[static_cast<std::size_t>(b.parent)].ids;
            const std::size_t la = sa.size() + 1, lb = sb.size() + 1;
            for (std::size_t i = 0; i < std::min(la, lb); ++i) {
                const int xa = i < sa.size() ? sa[i] : a.tok;
                const int xb = i < sb.size() ? sb[i] : b.tok;
                if (xa != xb) return xa < xb;
            }
            return la < lb;
        };
        std::sort(cands.begin(), cands.end(), [&](const Cand& a, const Cand& b) {
            if (a.logprob != b.logprob) return a.logprob > b.logprob;
            return seq_less(a, b);
        });
        if (static_cast<int>(cands.size()) > bp.beam_size)
            cands.resize(static_cast<std::size_t>(bp.beam_size));

        std::vector<Hyp> next;
        for (const auto& c : cands) {
            const Hyp& parent = active[static_cast<std::size_t>(c.parent)];
            if (c.tok == Vocabulary::kEos) {
                Finished f;
                f.ids = parent.ids;
                f.logprob = c.logprob;
                f.norm = c.logprob / length_penalty(static_cast<int>(parent.ids.size()) + 1, bp.alpha);
                finished.push_back(std::move(f));
            } else {
                Hyp h;
                h.ids = parent.ids;
                h.ids.push_back(c.tok);
                h.logprob = c.logprob;
                next.push_back(std::move(h));
            }
        }
        active = std::move(next);
    }
    // Hypotheses alive at max_len finish without an EOS token.
    for (const auto& h : active) {
        Finished f;
        f.ids = h.ids;
        f.logprob = h.logprob;
        f.norm = h.logprob / length_penalty(static_cast<int>(h.ids.size()), bp.alpha);
        finished.push_back(std::move(f));
    }
    if (finished.empty()) return {};

    const Finished* best = &finished.front();
    for (const auto& f : finished) {
        if (f.norm > best->norm ||
            (f.norm == best->norm && std::lexicographical_compare(f.ids.begin(), f.ids.end(),
                                                                  best->ids.begin(), best->ids.end())))
            best = &f;
    }
    DecodeScore out;
    out.ids = best->ids;
    out.logprob = best->logprob;
    out.norm_score = best->norm;
    return out;
}

// ---------------------------------------------------------------------------
// End-to-end generation

struct GenerationOutput {
    std::vector<int> kgtext_ids;
    std::vector<int> summary_ids;
    double kgtext_logprob = 0.0;
    double summary_norm_score = 0.0;
};

// KGtext by greedy search, then the summary by beam search conditioned on
// it; with the KGtext generator ablated the auxiliary decoder generates the
// summary directly and no KGtext is emitted.
inline GenerationOutput generate(const Model& model, const EncodedCluster& ec) {
    const Config& cfg = model.config();
    GenerationOutput out;
    Model::DecodeSession session = model.begin_session(ec);
    Model::Dec summary_dec = Model::Dec::Aux;
    if (cfg.use_kgg) {
        const DecodeScore kg =
            greedy_decode(model, session, Model::Dec::KgGen, cfg.min_len_kgtext, cfg.max_len_kgtext);
        out.kgtext_ids = kg.ids;
        out.kgtext_logprob = kg.logprob;
        model.session_set_kgtext(session, kg.ids);
        summary_dec = Model::Dec::Summary;
    }
    BeamParams bp;
    bp.beam_size = cfg.beam_size;
    bp.min_len = cfg.min_len_summary;
    bp.max_len = cfg.max_len_summary;
    bp.alpha = cfg.length_penalty;
    bp.block_ngram = cfg.block_ngram;
    const DecodeScore sum = beam_decode(model, session, summary_dec, bp);
    out.summary_ids = sum.ids;
    out.summary_norm_score = sum.norm_score;
    return out;
}

// Extended ids back to surface strings (copied OOVs resolve through the
// per-instance extension table).
inline std::vector<std::string> resolve_tokens(const std::vector<int>& ids, const Vocabulary& vocab,
                                               const EncodedCluster& ec) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids)
        out.push_back(id < static_cast<int>(vocab.size()) ? vocab.token(id) : ec.ext.extension_token(id));
    return out;
}

}  // namespace kgsum
