#pragma once

// The full summarization model: source encoder with graph updater and
// entity-sentence updater, the two-stage decoder (KGtext generator feeding a
// summary generator through a separate KGtext encoder), and the one-stage
// auxiliary decoder. Ablation flags control which parameter groups exist:
//
//   use_gu   - graph updater over the Levi graph (+ relation/type/global
//              embeddings)
//   use_esu  - entity-sentence updater (+ sentence pooling)
//   use_kgg  - KGtext generator, KGtext encoder and summary generator; when
//              off the auxiliary decoder IS the model
//   use_rake - salience-modulated graph attention in the decoders
//
// Decoder cross-attention over entity nodes exists whenever use_gu or
// use_esu provides entity representations; with both off the decoders are
// plain single-context transformers with a copy mechanism.

#include <string>
#include <vector>

#include "kgsum/autodiff.hpp"
#include "kgsum/config.hpp"
#include "kgsum/nn.hpp"
#include "kgsum/params.hpp"
#include "kgsum/pipeline.hpp"

namespace kgsum {

class Model {
public:
    enum class Dec { KgGen, Summary, Aux };

    Model(const Config& cfg, int vocab_size)
        : cfg_(cfg), vocab_size_(vocab_size), params_(cfg.seed) {
        cfg_.validate();
        graph_ctx_ = cfg_.use_gu || cfg_.use_esu;
        const int d = cfg_.d_model;

        embedding_ = &params_.create("embedding.word", vocab_size_, d, Init::Embedding);
        for (int l = 0; l < cfg_.encoder_layers; ++l)
            src_layers_.push_back(
                nn::make_enc_layer(params_, "src_encoder.layer" + std::to_string(l), d, cfg_.ffn_dim));
        if (cfg_.use_esu) sent_pool_ = nn::make_pool(params_, "sentence_pool", d, cfg_.heads);
        if (graph_ctx_) ent_pool_ = nn::make_pool(params_, "entity_pool", d, cfg_.heads);
        if (cfg_.use_gu) {
            gu_ = nn::make_graph_attn(params_, "graph_updater", d);
            rel_embed_ = &params_.create("graph_updater.relation_embed", 2 * kRelationTypeCount, d,
                                         Init::Embedding);
            type_embed_ = &params_.create("graph_updater.type_embed", kEntityTypeCount, d, Init::Embedding);
            global_embed_ = &params_.create("graph_updater.global_embed", 1, d, Init::Embedding);
        }
        if (cfg_.use_esu) esu_ = nn::make_graph_attn(params_, "entity_sentence_updater", d);

        if (cfg_.use_kgg) {
            kg_gen_ = make_stack("kgtext_generator", /*with_kg=*/false);
            for (int l = 0; l < cfg_.encoder_layers; ++l)
                kgtext_enc_layers_.push_back(nn::make_enc_layer(
                    params_, "kgtext_encoder.layer" + std::to_string(l), d, cfg_.ffn_dim));
            summary_ = make_stack("summary_generator", /*with_kg=*/true);
        }
        aux_ = make_stack("auxiliary_decoder", /*with_kg=*/false);
    }

    const Config& config() const { return cfg_; }
    Config& mutable_config() { return cfg_; }
    int vocab_size() const { return vocab_size_; }
    bool has_graph_context() const { return graph_ctx_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }

    // ---- encoding -----------------------------------------------------

    struct EncodeResult {
        ad::Var tokens;    // H_W [n_src x d]
        ad::Var entities;  // H_E [E x d], valid iff has_entities
        bool has_entities = false;
    };

    EncodeResult encode(ad::Tape& t, const EncodedCluster& ec, bool train_mode, Rng* drop_rng,
                        nn::ForwardTrace* trace = nullptr) const {
        const int d = cfg_.d_model;
        const double drop = train_mode ? cfg_.dropout : 0.0;
        ad::Var emb = use(t, *embedding_);

        std::vector<ad::Var> sent_tokens;
        sent_tokens.reserve(ec.sentences.size());
        for (std::size_t s = 0; s < ec.sentences.size(); ++s) {
            const auto& ids = ec.sentences[s];
            ad::Var x = t.add(t.select_rows(emb, ids),
                              t.constant(nn::dual_position_rows(static_cast<int>(s),
                                                                static_cast<int>(ids.size()), d)));
            for (const auto& layer : src_layers_)
                x = nn::encoder_layer(t, x, cfg_.heads, layer, nullptr, drop, drop_rng, trace);
            sent_tokens.push_back(x);
        }

        EncodeResult out;
        const int E = ec.entity_count();
        out.has_entities = graph_ctx_ && E > 0;

        ad::Var sent_delta{};
        if (out.has_entities) {
            // Mention pooling, then arithmetic mean per entity cluster.
            std::vector<ad::Var> cluster_vecs;
            for (int e = 0; e < E; ++e) {
                std::vector<ad::Var> mention_vecs;
                for (const auto& span : ec.mention_spans[static_cast<std::size_t>(e)]) {
                    std::vector<int> idx;
                    for (int k = span.begin; k < span.end; ++k) idx.push_back(k);
                    ad::Var span_tokens =
                        t.select_rows(sent_tokens[static_cast<std::size_t>(span.sentence)], idx);
                    mention_vecs.push_back(
                        nn::multi_head_pool(t, span_tokens, cfg_.heads, ent_pool_, nullptr, trace));
                }
                cluster_vecs.push_back(mention_vecs.size() == 1 ? mention_vecs[0]
                                                                : t.mean_rows(t.concat_rows(mention_vecs)));
            }
            ad::Var ents = t.concat_rows(cluster_vecs);

            if (cfg_.use_gu) {
                // Node matrix in Levi vertex order: entities, relation
                // vertices (typed fwd/bwd embeddings), type vertices, global.
                std::vector<ad::Var> node_rows{ents};
                std::vector<int> rel_rows, type_rows;
                for (const auto& v : ec.levi.vertices) {
                    if (v.kind == LeviVertex::Kind::RelFwd)
                        rel_rows.push_back(2 * static_cast<int>(v.rtype));
                    else if (v.kind == LeviVertex::Kind::RelBwd)
                        rel_rows.push_back(2 * static_cast<int>(v.rtype) + 1);
                    else if (v.kind == LeviVertex::Kind::Type)
                        type_rows.push_back(static_cast<int>(v.etype));
                }
                if (!rel_rows.empty()) node_rows.push_back(t.select_rows(use(t, *rel_embed_), rel_rows));
                if (!type_rows.empty()) node_rows.push_back(t.select_rows(use(t, *type_embed_), type_rows));
                node_rows.push_back(use(t, *global_embed_));
                ad::Var nodes = t.concat_rows(node_rows);
                const ad::Mat mask = nn::neighborhood_mask(ec.levi.in_neighbors());
                for (int it = 0; it < cfg_.graph_iterations; ++it)
                    nodes = nn::graph_attention_step(t, nodes, cfg_.heads, gu_, mask, trace);
                std::vector<int> head_idx;
                for (int e = 0; e < E; ++e) head_idx.push_back(e);
                ents = t.select_rows(nodes, head_idx);
            }

            if (cfg_.use_esu) {
                std::vector<ad::Var> sv;
                for (const auto& st : sent_tokens)
                    sv.push_back(nn::multi_head_pool(t, st, cfg_.heads, sent_pool_, nullptr, trace));
                ad::Var sents = t.concat_rows(sv);
                ad::Var nodes = t.concat_rows({ents, sents});
                const int S = ec.sentence_count;
                std::vector<std::vector<int>> in_nb(static_cast<std::size_t>(E + S));
                for (int v = 0; v < E + S; ++v) in_nb[static_cast<std::size_t>(v)].push_back(v);
                for (const auto& [e, s] : ec.es_edges) {
                    in_nb[static_cast<std::size_t>(e)].push_back(E + s);
                    in_nb[static_cast<std::size_t>(E + s)].push_back(e);
                }
                const ad::Mat mask = nn::neighborhood_mask(in_nb);
                for (int it = 0; it < cfg_.graph_iterations; ++it)
                    nodes = nn::graph_attention_step(t, nodes, cfg_.heads, esu_, mask, trace);
                std::vector<int> e_idx, s_idx;
                for (int e = 0; e < E; ++e) e_idx.push_back(e);
                for (int s = 0; s < S; ++s) s_idx.push_back(E + s);
                ents = t.select_rows(nodes, e_idx);
                // Sentence-level update deltas are broadcast back onto tokens.
                sent_delta = t.sub(t.select_rows(nodes, s_idx), sents);
            }
            out.entities = ents;
        }

        out.tokens = t.concat_rows(sent_tokens);
        if (sent_delta.valid())
            out.tokens = t.add(out.tokens, t.select_rows(sent_delta, ec.src_sentence));
        return out;
    }

    // KGtext token encoder (own transformer stack, shared word embeddings).
    ad::Var encode_kgtext(ad::Tape& t, const std::vector<int>& token_ids, bool train_mode, Rng* drop_rng,
                          nn::ForwardTrace* trace = nullptr) const {
        const double drop = train_mode ? cfg_.dropout : 0.0;
        ad::Var x = t.add(t.select_rows(use(t, *embedding_), to_base_ids(token_ids)),
                          t.constant(nn::dual_position_rows(0, static_cast<int>(token_ids.size()),
                                                            cfg_.d_model)));
        for (const auto& layer : kgtext_enc_layers_)
            x = nn::encoder_layer(t, x, cfg_.heads, layer, nullptr, drop, drop_rng, trace);
        return x;
    }

    // ---- decoding -----------------------------------------------------

    // Teacher-forced per-step generation distributions over the extended
    // vocabulary. `input_ids` are base ids beginning with BOS. `h_t` is the
    // KGtext memory for the summary decoder (invalid => degenerate path).
    ad::Var decode_distribution(ad::Tape& t, Dec kind, const EncodeResult& enc, ad::Var h_t,
                                const EncodedCluster& ec, const std::vector<int>& input_ids,
                                bool train_mode, Rng* drop_rng, nn::ForwardTrace* trace = nullptr,
                                bool ban_eos = false) const {
        const DecoderStack& st = stack(kind);
        const int d = cfg_.d_model;
        const double drop = train_mode ? cfg_.dropout : 0.0;
        const int m = static_cast<int>(input_ids.size());

        ad::Var x = t.add(t.select_rows(use(t, *embedding_), input_ids),
                          t.constant(nn::sequence_position_rows(m, d)));
        const ad::Mat cmask = nn::causal_mask(m);

        ad::Vec salience;
        const ad::Vec* sal_ptr = nullptr;
        if (enc.has_entities && cfg_.use_rake) {
            salience = Eigen::Map<const ad::Vec>(ec.salience.data(),
                                                 static_cast<Eigen::Index>(ec.salience.size()));
            sal_ptr = &salience;
        }

        ad::Var last_cw{}, last_text_attn{};
        for (std::size_t l = 0; l < st.layers.size(); ++l) {
            const DecLayer& ly = st.layers[l];
            const bool final_layer = l + 1 == st.layers.size();

            nn::MhaOut self = nn::multi_head_attention(t, x, x, cfg_.heads, ly.self, &cmask, nullptr,
                                                       trace, false);
            ad::Var g_tilde = t.layer_norm(t.add(x, nn::dropout(t, self.out, drop, drop_rng)),
                                           use(t, *ly.norm_self.gain), use(t, *ly.norm_self.bias));

            nn::MhaOut text = nn::multi_head_attention(t, g_tilde, enc.tokens, cfg_.heads, ly.cross_text,
                                                       nullptr, nullptr, trace, final_layer);
            ad::Var c_w = nn::dropout(t, text.out, drop, drop_rng);
            ad::Var c = c_w;

            if (graph_ctx_ && enc.has_entities) {
                nn::MhaOut graph = nn::multi_head_attention(t, g_tilde, enc.entities, cfg_.heads,
                                                            ly.cross_graph, nullptr, sal_ptr, trace, false);
                ad::Var c_g = nn::dropout(t, graph.out, drop, drop_rng);
                ad::Var z = t.sigmoid(nn::linear(t, t.concat_cols({c_w, c_g}), ly.fuse_graph));
                if (trace) trace->gates.push_back(t.val(z));
                c = t.add(t.hadamard(z, c_w), t.hadamard(t.affine(z, -1.0, 1.0), c_g));
            }
            // Entity memory absent: the graph context is a zero vector and the
            // gate is forced to the textual side, i.e. c stays c_w.

            if (st.with_kg && h_t.valid()) {
                nn::MhaOut kg = nn::multi_head_attention(t, g_tilde, h_t, cfg_.heads, ly.cross_kg,
                                                         nullptr, nullptr, trace, false);
                ad::Var c_t = nn::dropout(t, kg.out, drop, drop_rng);
                ad::Var z2 = t.sigmoid(nn::linear(t, t.concat_cols({c, c_t}), ly.fuse_kg));
                if (trace) trace->gates.push_back(t.val(z2));
                c = t.add(t.hadamard(z2, c), t.hadamard(t.affine(z2, -1.0, 1.0), c_t));
            }
            // Empty KGtext memory: z2 forced to 1, c unchanged.

            x = t.layer_norm(t.add(c, nn::dropout(t, nn::feed_forward(t, c, ly.ffn), drop, drop_rng)),
                             use(t, *ly.norm_out.gain), use(t, *ly.norm_out.bias));
            if (final_layer) {
                last_cw = c_w;
                last_text_attn = text.avg_weights;
            }
        }

        ad::Var logits = nn::linear(t, x, st.out);
        ad::Var p_vocab;
        if (ban_eos) {
            ad::Mat eos_mask = ad::Mat::Zero(m, vocab_size_);
            eos_mask.col(Vocabulary::kEos).setConstant(nn::neg_inf());
            p_vocab = t.softmax_rows(logits, &eos_mask);
        } else {
            p_vocab = t.softmax_rows(logits);
        }
        ad::Var p_gen = t.sigmoid(nn::linear(t, t.concat_cols({x, last_cw}), st.pgen));
        ad::Var dist = t.mixture_with_copy(p_vocab, p_gen, last_text_attn, ec.src_ids, ec.ext.size());
        if (trace) trace->distributions.push_back(t.val(dist));
        return dist;
    }

    std::vector<int> to_base_ids(const std::vector<int>& ids) const {
        std::vector<int> out;
        out.reserve(ids.size());
        for (int id : ids) out.push_back(id < vocab_size_ ? id : Vocabulary::kUnk);
        return out;
    }

    static std::vector<int> with_bos(const std::vector<int>& base_ids) {
        std::vector<int> out{Vocabulary::kBos};
        out.insert(out.end(), base_ids.begin(), base_ids.end());
        return out;
    }

    static std::vector<int> with_eos(const std::vector<int>& ext_ids) {
        std::vector<int> out = ext_ids;
        out.push_back(Vocabulary::kEos);
        return out;
    }

    // ---- stepwise decoding session -------------------------------------

    struct DecodeSession {
        ad::Tape tape;
        EncodeResult enc;
        ad::Var h_t{};
        std::size_t mark = 0;
        const EncodedCluster* ec = nullptr;
    };

    DecodeSession begin_session(const EncodedCluster& ec) const {
        DecodeSession s;
        s.ec = &ec;
        s.enc = encode(s.tape, ec, /*train_mode=*/false, nullptr, nullptr);
        s.mark = s.tape.size();
        return s;
    }

    void session_set_kgtext(DecodeSession& s, const std::vector<int>& kg_ids) const {
        s.tape.truncate(s.mark);
        s.h_t = kg_ids.empty() ? ad::Var{}
                               : encode_kgtext(s.tape, kg_ids, /*train_mode=*/false, nullptr, nullptr);
        s.mark = s.tape.size();
    }

    // Distribution over the next token given the generated prefix
    // (extended ids). Scratch nodes are reclaimed every call.
    Eigen::RowVectorXd step_distribution(DecodeSession& s, Dec kind, const std::vector<int>& prefix,
                                         bool ban_eos) const {
        s.tape.truncate(s.mark);
        const std::vector<int> input = with_bos(to_base_ids(prefix));
        ad::Var dist = decode_distribution(s.tape, kind, s.enc, s.h_t, *s.ec, input,
                                           /*train_mode=*/false, nullptr, nullptr, ban_eos);
        return s.tape.val(dist).row(s.tape.rows(dist) - 1);
    }

    // Greedy argmax decoding; ties resolve to the lowest id. EOS is masked
    // while fewer than min_len tokens have been emitted. The returned ids
    // exclude the terminating EOS.
    std::vector<int> greedy_generate(DecodeSession& s, Dec kind, int min_len, int max_len) const {
        std::vector<int> out;
        for (int step = 0; step < max_len; ++step) {
            const Eigen::RowVectorXd dist = step_distribution(s, kind, out, step < min_len);
            int best = 0;
            double best_p = dist(0);
            for (int i = 1; i < dist.size(); ++i)
                if (dist(i) > best_p) {
                    best_p = dist(i);
                    best = i;
                }
            if (best == Vocabulary::kEos) break;
            out.push_back(best);
        }
        return out;
    }

    // ---- losses ---------------------------------------------------------

    struct LossBreakdown {
        double total = 0.0, l_s = 0.0, l_t = 0.0, l_a = 0.0;
        ad::Var total_var{};
        std::vector<int> fed_kgtext;  // extended ids fed to the KGtext encoder
    };

    // Joint loss for one instance: L = L_S + lambda * L_T + eta * L_A with
    // the KGtext generator teacher-forced and the summary generator
    // conditioned on greedy-decoded (or gold, per `kgtext_feed`) KGtext.
    // Gradients do not flow through the generated token sequence. With
    // use_kgg off the auxiliary decoder is the whole model and L = L_A.
    LossBreakdown instance_loss(ad::Tape& t, const EncodedCluster& ec, bool train_mode, Rng* drop_rng,
                                nn::ForwardTrace* trace = nullptr) const {
        LossBreakdown out;
        const EncodeResult enc = encode(t, ec, train_mode, drop_rng, trace);
        const double eps = cfg_.label_smoothing;

        std::vector<ad::Var> terms;
        std::vector<double> weights;

        ad::Var h_t{};
        if (cfg_.use_kgg) {
            if (ec.has_kgtext && !ec.kgtext_ext.empty()) {
                ad::Var dist = decode_distribution(t, Dec::KgGen, enc, ad::Var{}, ec,
                                                   with_bos(ec.kgtext_base), train_mode, drop_rng, trace);
                ad::Var lt = t.nll_smoothed(dist, with_eos(ec.kgtext_ext), eps, vocab_size_);
                out.l_t = t.val(lt)(0, 0);
                terms.push_back(lt);
                weights.push_back(cfg_.lambda);
            }
            if (cfg_.kgtext_feed == "gold" && ec.has_kgtext) {
                out.fed_kgtext = ec.kgtext_ext;
            } else {
                // Greedy decode on a detached tape: the summary loss cannot
                // reach the KGtext generator through the discrete tokens.
                DecodeSession s = begin_session(ec);
                out.fed_kgtext = greedy_generate(s, Dec::KgGen, cfg_.min_len_kgtext, cfg_.max_len_kgtext);
            }
            if (!out.fed_kgtext.empty())
                h_t = encode_kgtext(t, out.fed_kgtext, train_mode, drop_rng, trace);
            if (!ec.summary_ext.empty()) {
                ad::Var dist = decode_distribution(t, Dec::Summary, enc, h_t, ec,
                                                   with_bos(ec.summary_base), train_mode, drop_rng, trace);
                ad::Var ls = t.nll_smoothed(dist, with_eos(ec.summary_ext), eps, vocab_size_);
                out.l_s = t.val(ls)(0, 0);
                terms.push_back(ls);
                weights.push_back(1.0);
            }
        }
        if (!ec.summary_ext.empty()) {
            ad::Var dist = decode_distribution(t, Dec::Aux, enc, ad::Var{}, ec, with_bos(ec.summary_base),
                                               train_mode, drop_rng, trace);
            ad::Var la = t.nll_smoothed(dist, with_eos(ec.summary_ext), eps, vocab_size_);
            out.l_a = t.val(la)(0, 0);
            terms.push_back(la);
            weights.push_back(cfg_.use_kgg ? cfg_.eta : 1.0);
        }

        for (std::size_t i = 0; i < terms.size(); ++i) {
            ad::Var w = t.scale(terms[i], weights[i]);
            out.total_var = out.total_var.valid() ? t.add(out.total_var, w) : w;
        }
        if (!out.total_var.valid()) out.total_var = t.constant(ad::Mat::Zero(1, 1));
        out.total = t.val(out.total_var)(0, 0);
        return out;
    }

private:
    struct DecLayer {
        nn::AttnP self;
        nn::NormP norm_self;
        nn::AttnP cross_text;
        nn::AttnP cross_graph;
        nn::LinearP fuse_graph;
        nn::AttnP cross_kg;
        nn::LinearP fuse_kg;
        nn::FfnP ffn;
        nn::NormP norm_out;
    };

    struct DecoderStack {
        std::vector<DecLayer> layers;
        nn::LinearP out;   // d -> V
        nn::LinearP pgen;  // [g ; c_w] -> 1
        bool with_kg = false;
    };

    DecoderStack make_stack(const std::string& name, bool with_kg) {
        const int d = cfg_.d_model;
        DecoderStack st;
        st.with_kg = with_kg;
        for (int l = 0; l < cfg_.decoder_layers; ++l) {
            const std::string base = name + ".layer" + std::to_string(l);
            DecLayer ly;
            ly.self = nn::make_attn(params_, base + ".self", d);
            ly.norm_self = nn::make_norm(params_, base + ".norm_self", d);
            ly.cross_text = nn::make_attn(params_, base + ".cross_text", d);
            if (graph_ctx_) {
                ly.cross_graph = nn::make_attn(params_, base + ".cross_graph", d);
                ly.fuse_graph = nn::make_linear(params_, base + ".fuse_graph", 2 * d, d);
            }
            if (with_kg) {
                ly.cross_kg = nn::make_attn(params_, base + ".cross_kgtext", d);
                ly.fuse_kg = nn::make_linear(params_, base + ".fuse_kgtext", 2 * d, d);
            }
            ly.ffn = nn::make_ffn(params_, base + ".ffn", d, cfg_.ffn_dim);
            ly.norm_out = nn::make_norm(params_, base + ".norm_out", d);
            st.layers.push_back(ly);
        }
        st.out = nn::make_linear(params_, name + ".vocab_out", d, vocab_size_);
        st.pgen = nn::make_linear(params_, name + ".copy_gate", 2 * d, 1);
        return st;
    }

    const DecoderStack& stack(Dec kind) const {
        switch (kind) {
            case Dec::KgGen:
                if (!cfg_.use_kgg) throw DataError("KGtext generator is disabled by ablation");
                return kg_gen_;
            case Dec::Summary:
                if (!cfg_.use_kgg) throw DataError("summary generator is disabled by ablation");
                return summary_;
            case Dec::Aux:
                return aux_;
        }
        throw DataError("unknown decoder kind");
    }

    Config cfg_;
    int vocab_size_;
    bool graph_ctx_ = false;
    ParameterStore params_;

    Param* embedding_ = nullptr;
    std::vector<nn::EncLayerP> src_layers_;
    nn::PoolP sent_pool_;
    nn::PoolP ent_pool_;
    nn::GraphAttnP gu_;
    Param* rel_embed_ = nullptr;
    Param* type_embed_ = nullptr;
    Param* global_embed_ = nullptr;
    nn::GraphAttnP esu_;
    DecoderStack kg_gen_;
    DecoderStack summary_;
    DecoderStack aux_;
    std::vector<nn::EncLayerP> kgtext_enc_layers_;
};

}  // namespace kgsum
