#pragma once

// Training: label-smoothed NLL, the joint objective, the warmup /
// inverse-sqrt learning-rate schedule, Adam, the seeded training loop with
// top-k checkpoint retention, and bit-exact checkpoint (de)serialization.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgsum/config.hpp"
#include "kgsum/evaluation.hpp"
#include "kgsum/model.hpp"
#include "kgsum/pipeline.hpp"

namespace kgsum {

// Mean label-smoothed negative log likelihood over probability rows; the
// reference-path mirror of the tape op, shared by tests.
inline double nll_loss(const ad::Mat& probs, const std::vector<int>& gold, double smoothing, int v_base) {
    if (static_cast<Eigen::Index>(gold.size()) != probs.rows())
        throw DataError("nll_loss: one gold id per row required");
    constexpr double floor = 1e-12;
    const double off_mass = (v_base > 1) ? smoothing / static_cast<double>(v_base - 1) : 0.0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        const int g = gold[static_cast<std::size_t>(i)];
        if (g < 0 || g >= static_cast<int>(probs.cols()))
            throw DataError("nll_loss: gold id " + std::to_string(g) + " out of range");
        double row = -(1.0 - smoothing) * std::log(std::max(probs(i, g), floor));
        if (smoothing > 0.0)
            for (int j = 0; j < v_base; ++j) {
                if (j == g) continue;
                row -= off_mass * std::log(std::max(probs(i, j), floor));
            }
        total += row;
    }
    return total / static_cast<double>(probs.rows());
}

inline double joint_loss(double l_s, double l_t, double l_a, const Config& cfg) {
    return l_s + cfg.lambda * l_t + cfg.eta * l_a;
}

// lr = factor * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)
inline double lr_schedule(long long step, const Config& cfg) {
    if (step < 1) throw UsageError("lr_schedule: step must be >= 1");
    const double s = static_cast<double>(step);
    const double w = static_cast<double>(cfg.warmup_steps);
    return cfg.lr_factor * std::pow(static_cast<double>(cfg.d_model), -0.5) *
           std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

inline void adam_step(ParameterStore& params, const Config& cfg, long long step) {
    const double lr = lr_schedule(step, cfg);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = params.at(i);
        p.adam_m = cfg.beta1 * p.adam_m + (1.0 - cfg.beta1) * p.grad;
        p.adam_v = cfg.beta2 * p.adam_v.array() + (1.0 - cfg.beta2) * p.grad.array().square();
        const ad::Mat m_hat = p.adam_m / bc1;
        const ad::Mat v_hat = p.adam_v / bc2;
        p.value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + cfg.adam_eps);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

inline nlohmann::json checkpoint_to_json(const Model& model, long long step) {
    nlohmann::json j = model.params().to_json(/*with_moments=*/true);
    j["format"] = "kgsum-checkpoint-v1";
    j["step"] = step;
    j["vocab_size"] = model.vocab_size();
    j["config"] = config_to_map(model.config());
    j["rng"] = {{"seed", model.config().seed},
                {"note", "all streams are derived from (seed, step, instance)"}};
    return j;
}

inline void write_checkpoint_file(const nlohmann::json& blob, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write checkpoint: " + tmp);
        out << blob.dump() << "\n";
    }
    std::filesystem::rename(tmp, path);
}

inline nlohmann::json read_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed checkpoint " + path + ": " + e.what());
    }
    if (j.value("format", "") != "kgsum-checkpoint-v1")
        throw DataError("unrecognized checkpoint format in " + path);
    return j;
}

struct LoadedCheckpoint {
    std::unique_ptr<Model> model;
    long long step = 0;
};

inline LoadedCheckpoint model_from_checkpoint(const nlohmann::json& blob) {
    LoadedCheckpoint out;
    std::map<std::string, std::string> kv = blob.at("config").get<std::map<std::string, std::string>>();
    const Config cfg = config_from_map(kv);
    out.model = std::make_unique<Model>(cfg, blob.at("vocab_size").get<int>());
    out.model->params().load_json(blob);
    out.step = blob.at("step").get<long long>();
    return out;
}

// The model-shape fields that must agree between a checkpoint and a decode
// request; mismatches name the offending hyperparameter.
inline void check_structure_match(const Config& ckpt, const Config& requested) {
    auto check = [](const std::string& name, auto a, auto b) {
        if (a != b)
            throw UsageError("checkpoint/config mismatch on '" + name + "': checkpoint has " +
                             std::to_string(a) + ", requested " + std::to_string(b));
    };
    check("model.d_model", ckpt.d_model, requested.d_model);
    check("model.ffn_dim", ckpt.ffn_dim, requested.ffn_dim);
    check("model.heads", ckpt.heads, requested.heads);
    check("model.encoder_layers", ckpt.encoder_layers, requested.encoder_layers);
    check("model.decoder_layers", ckpt.decoder_layers, requested.decoder_layers);
    check("model.graph_iterations", ckpt.graph_iterations, requested.graph_iterations);
    check("ablation.use_kgg", ckpt.use_kgg, requested.use_kgg);
    check("ablation.use_rake", ckpt.use_rake, requested.use_rake);
    check("ablation.use_gu", ckpt.use_gu, requested.use_gu);
    check("ablation.use_esu", ckpt.use_esu, requested.use_esu);
}

// ---------------------------------------------------------------------------
// Training loop

struct StepRecord {
    long long step = 0;
    double train_loss = 0.0, l_s = 0.0, l_t = 0.0, l_a = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    double lr = 0.0;
};

struct KeptCheckpoint {
    double score = 0.0;  // higher is better
    long long step = 0;
    nlohmann::json blob;
};

struct TrainResult {
    std::vector<StepRecord> steps;
    std::vector<KeptCheckpoint> kept;  // best first
    double report_test_loss = std::numeric_limits<double>::quiet_NaN();
    double report_rouge_l = std::numeric_limits<double>::quiet_NaN();
    long long final_step = 0;
};

namespace detail {

inline double mean_loss(const Model& model, const std::vector<EncodedCluster>& set) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (const auto& ec : set) {
        ad::Tape tape;
        total += model.instance_loss(tape, ec, /*train_mode=*/false, nullptr).total;
    }
    return total / static_cast<double>(set.size());
}

// Greedy-decode ROUGE-L F1 against gold id sequences (selection metric).
inline double mean_rouge_l(const Model& model, const std::vector<EncodedCluster>& set) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    const Config& cfg = model.config();
    double total = 0.0;
    for (const auto& ec : set) {
        Model::DecodeSession s = model.begin_session(ec);
        if (cfg.use_kgg) {
            const std::vector<int> kg =
                model.greedy_generate(s, Model::Dec::KgGen, cfg.min_len_kgtext, cfg.max_len_kgtext);
            model.session_set_kgtext(s, kg);
        }
        const Model::Dec dec = cfg.use_kgg ? Model::Dec::Summary : Model::Dec::Aux;
        const std::vector<int> hyp =
            model.greedy_generate(s, dec, cfg.min_len_summary, cfg.max_len_summary);
        total += rouge_l_ids(ec.summary_ext, hyp).f1;
    }
    return total / static_cast<double>(set.size());
}

}  // namespace detail

struct TrainOptions {
    std::string out_dir;       // empty: keep checkpoints in memory only
    long long start_step = 0;  // resume point (steps already taken)
};

// Runs the seeded loop: per step, one shuffled batch, mean-of-instance joint
// loss, global-norm clipping, Adam with the warmup schedule. Validation every
// val_interval steps keeps the top `keep_checkpoints` checkpoints by the
// selection metric; the final report averages test metrics over them and the
// model is left holding the best checkpoint's parameters.
inline TrainResult train_model(Model& model, const std::vector<EncodedCluster>& train_set,
                               const std::vector<EncodedCluster>& valid_set,
                               const std::vector<EncodedCluster>& test_set, const TrainOptions& opts = {}) {
    namespace fs = std::filesystem;
    const Config& cfg = model.config();
    if (train_set.empty()) throw DataError("train: empty training set");
    TrainResult result;

    std::ofstream metrics;
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        const bool fresh = opts.start_step == 0;
        metrics.open(opts.out_dir + "/metrics.csv", fresh ? std::ios::trunc : std::ios::app);
        if (fresh) metrics << "step,train_loss,loss_s,loss_t,loss_a,val_loss,lr\n";
    }

    const int n = static_cast<int>(train_set.size());
    const int batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;

    auto keep_checkpoint = [&](double score, long long step) {
        nlohmann::json blob = checkpoint_to_json(model, step);
        if (!opts.out_dir.empty())
            write_checkpoint_file(blob, opts.out_dir + "/ckpt_step" + std::to_string(step) + ".json");
        KeptCheckpoint kc;
        kc.score = score;
        kc.step = step;
        kc.blob = std::move(blob);
        result.kept.push_back(std::move(kc));
        std::sort(result.kept.begin(), result.kept.end(),
                  [](const KeptCheckpoint& a, const KeptCheckpoint& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.step > b.step;
                  });
        while (static_cast<int>(result.kept.size()) > cfg.keep_checkpoints) {
            const long long dropped = result.kept.back().step;
            result.kept.pop_back();
            if (!opts.out_dir.empty()) {
                std::error_code ec;
                fs::remove(fs::path(opts.out_dir) / ("ckpt_step" + std::to_string(dropped) + ".json"), ec);
            }
        }
    };

    auto validate_now = [&](long long step, StepRecord& rec) {
        if (valid_set.empty()) {
            keep_checkpoint(-static_cast<double>(step), step);  // fall back to recency
            return;
        }
        double score;
        if (cfg.selection == "rouge_l") {
            score = detail::mean_rouge_l(model, valid_set);
            rec.val_loss = detail::mean_loss(model, valid_set);
        } else {
            rec.val_loss = detail::mean_loss(model, valid_set);
            score = -rec.val_loss;
        }
        keep_checkpoint(score, step);
    };

    bool stopped_early = false;
    long long step = opts.start_step;
    while (step < cfg.max_steps && !stopped_early) {
        ++step;
        const long long epoch = (step - 1) / batches_per_epoch;
        const long long batch_idx = (step - 1) % batches_per_epoch;
        const auto order =
            batch_order(n, cfg.batch_size, cfg.seed, static_cast<int>(epoch));
        const auto& batch = order[static_cast<std::size_t>(batch_idx)];

        model.params().zero_grads();
        StepRecord rec;
        rec.step = step;
        rec.lr = lr_schedule(step, cfg);
        const double inv_b = 1.0 / static_cast<double>(batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k) {
            const EncodedCluster& ec = train_set[static_cast<std::size_t>(batch[k])];
            Rng drop_rng(mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)),
                                  static_cast<std::uint64_t>(k)));
            ad::Tape tape;
            const Model::LossBreakdown lb =
                model.instance_loss(tape, ec, /*train_mode=*/true, &drop_rng);
            if (!std::isfinite(lb.total))
                throw DivergenceError("non-finite loss at step " + std::to_string(step) + " on cluster " +
                                      ec.cluster_id);
            tape.backward(lb.total_var, inv_b);
            rec.train_loss += lb.total * inv_b;
            rec.l_s += lb.l_s * inv_b;
            rec.l_t += lb.l_t * inv_b;
            rec.l_a += lb.l_a * inv_b;
        }
        if (cfg.use_grad_clip) {
            const double norm = model.params().grad_norm();
            if (norm > cfg.grad_clip && norm > 0.0) model.params().scale_grads(cfg.grad_clip / norm);
        }
        adam_step(model.params(), cfg, step);

        const bool last = step == cfg.max_steps;
        if (cfg.early_stop_train_loss > 0.0 && rec.train_loss < cfg.early_stop_train_loss)
            stopped_early = true;
        if (step % cfg.val_interval == 0 || last || stopped_early) validate_now(step, rec);

        if (metrics.is_open()) {
            metrics << rec.step << "," << rec.train_loss << "," << rec.l_s << "," << rec.l_t << ","
                    << rec.l_a << ",";
            if (std::isfinite(rec.val_loss)) metrics << rec.val_loss;
            metrics << "," << rec.lr << "\n";
        }
        result.steps.push_back(rec);
    }
    result.final_step = step;

    // Final report: mean test metrics over the kept checkpoints.
    if (!result.kept.empty()) {
        double loss_sum = 0.0, rouge_sum = 0.0;
        int loss_cnt = 0, rouge_cnt = 0;
        for (const auto& kc : result.kept) {
            LoadedCheckpoint lc = model_from_checkpoint(kc.blob);
            if (!test_set.empty()) {
                loss_sum += detail::mean_loss(*lc.model, test_set);
                ++loss_cnt;
                if (cfg.selection == "rouge_l") {
                    rouge_sum += detail::mean_rouge_l(*lc.model, test_set);
                    ++rouge_cnt;
                }
            }
        }
        if (loss_cnt > 0) result.report_test_loss = loss_sum / loss_cnt;
        if (rouge_cnt > 0) result.report_rouge_l = rouge_sum / rouge_cnt;
        // Leave the model holding the best checkpoint.
        model.params().load_json(result.kept[0].blob);
        if (!opts.out_dir.empty()) {
            write_checkpoint_file(result.kept[0].blob, opts.out_dir + "/ckpt_best.json");
            nlohmann::json rep;
            rep["kept_steps"] = nlohmann::json::array();
            for (const auto& kc : result.kept) rep["kept_steps"].push_back(kc.step);
            rep["test_loss_mean"] = std::isfinite(result.report_test_loss)
                                        ? nlohmann::json(result.report_test_loss)
                                        : nlohmann::json();
            rep["rouge_l_mean"] = std::isfinite(result.report_rouge_l)
                                      ? nlohmann::json(result.report_rouge_l)
                                      : nlohmann::json();
            rep["final_step"] = result.final_step;
            std::ofstream out(opts.out_dir + "/report.json");
            out << rep.dump(2) << "\n";
        }
    }
    return result;
}

}  // namespace kgsum
