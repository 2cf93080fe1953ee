// Command-line surface: fixture | preprocess | train | generate | evaluate.
//
// Configuration comes from (lowest to highest precedence) built-in defaults,
// a --config file, and explicit command-line flags. Every config field is
// exposed as a --section.key flag whose help text shows the default. The
// shorthand `--ablation -KGG -RAKE -GU -ESU` switches off the corresponding
// modules. Relative data paths resolve under $KGSUM_DATA_ROOT when set.
//
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numeric divergence.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kgsum/config.hpp"
#include "kgsum/corpus.hpp"
#include "kgsum/evaluation.hpp"
#include "kgsum/fixture.hpp"
#include "kgsum/inference.hpp"
#include "kgsum/model.hpp"
#include "kgsum/pipeline.hpp"
#include "kgsum/stoplist.hpp"
#include "kgsum/training.hpp"

namespace {

using namespace kgsum;
namespace fs = std::filesystem;

std::string resolve_path(const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    const char* root = std::getenv("KGSUM_DATA_ROOT");
    if (root && *root && !fs::exists(p)) return (fs::path(root) / p).string();
    return p;
}

// Stages --section.key flags; values apply after the config file so that
// flags win.
struct ConfigCli {
    std::map<std::string, std::string> staged;
    std::map<std::string, CLI::Option*> options;
    std::string config_file;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "config file (flat key = value with [sections])");
        const Config defaults;
        for (const auto& f : detail::config_fields()) {
            const std::string key = std::string(f.section) + "." + f.key;
            auto* opt = cmd->add_option("--" + key, staged[key], "");
            opt->default_str(f.get(defaults));
            opt->description("config field " + key);
        }
        for (const auto& f : detail::config_fields()) {
            const std::string key = std::string(f.section) + "." + f.key;
            options[key] = cmd->get_option("--" + key);
        }
    }

    void apply(Config& cfg, const std::vector<std::string>& ablation_off) const {
        if (!config_file.empty()) load_config_file(cfg, resolve_path(config_file));
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) config_set(cfg, key, staged.at(key));
        for (const auto& name : ablation_off) config_set(cfg, "ablation." + name, "false");
        cfg.validate();
    }
};

Stoplist load_stoplist(const std::string& stopwords_path, const std::string& pronouns_path) {
    Stoplist stop;
    if (!stopwords_path.empty()) stop.load_stopwords(resolve_path(stopwords_path));
    if (!pronouns_path.empty()) stop.load_pronouns(resolve_path(pronouns_path));
    return stop;
}

// Rewrites `--ablation -KGG -RAKE` into staged ablation.use_* = false.
std::vector<std::string> extract_ablation_tokens(std::vector<std::string>& args) {
    std::vector<std::string> off;
    std::vector<std::string> kept;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] != "--ablation") {
            kept.push_back(args[i]);
            continue;
        }
        std::size_t consumed = 0;
        while (i + 1 < args.size()) {
            const std::string t = lowercase(args[i + 1]);
            std::string flag;
            if (t == "-kgg") flag = "use_kgg";
            else if (t == "-rake") flag = "use_rake";
            else if (t == "-gu") flag = "use_gu";
            else if (t == "-esu") flag = "use_esu";
            else break;
            off.push_back(flag);
            ++i;
            ++consumed;
        }
        if (consumed == 0)
            throw UsageError("--ablation expects one or more of -KGG -RAKE -GU -ESU");
    }
    args = std::move(kept);
    return off;
}

std::vector<EncodedCluster> load_split_or_empty(const fs::path& pre_dir, const std::string& split) {
    const fs::path p = pre_dir / (split + ".pre.jsonl");
    if (!fs::exists(p)) return {};
    return load_encoded(p.string());
}

int run(std::vector<std::string> args) {
    const std::vector<std::string> ablation_off = extract_ablation_tokens(args);

    CLI::App app{"knowledge-graph-centric multi-document scientific summarizer"};
    app.require_subcommand(1);

    // fixture -------------------------------------------------------------
    auto* cmd_fixture = app.add_subcommand("fixture", "generate a synthetic desk-scale corpus");
    ConfigCli fixture_cfg;
    fixture_cfg.attach(cmd_fixture);
    std::string fixture_out;
    int fixture_n = 8;
    cmd_fixture->add_option("--out", fixture_out, "output directory")->required();
    cmd_fixture->add_option("--n-instances", fixture_n, "number of clusters")->default_str("8");
    cmd_fixture->callback([&] {
        Config cfg;
        fixture_cfg.apply(cfg, ablation_off);
        const auto clusters = generate_fixture_corpus(fixture_n, cfg.seed);
        fs::create_directories(fixture_out);
        // The same instances serve every split: the fixture exists for
        // memorization checks, not generalization.
        for (const char* split : {"train", "valid", "test"})
            save_corpus(clusters, (fs::path(fixture_out) / (std::string(split) + ".jsonl")).string());
        std::cout << "wrote " << clusters.size() << " fixture clusters to " << fixture_out << "\n";
    });

    // preprocess ----------------------------------------------------------
    auto* cmd_pre = app.add_subcommand("preprocess", "build vocabulary, graphs, KGtexts and salience");
    ConfigCli pre_cfg;
    pre_cfg.attach(cmd_pre);
    std::string pre_data, pre_out, pre_stopwords, pre_pronouns;
    bool pre_dot = false;
    cmd_pre->add_option("--data", pre_data, "directory with <split>.jsonl files")->required();
    cmd_pre->add_option("--out", pre_out, "output directory")->required();
    cmd_pre->add_option("--stopwords", pre_stopwords, "stopword list file (one token per line)");
    cmd_pre->add_option("--pronouns", pre_pronouns, "pronoun list file (one token per line)");
    cmd_pre->add_flag("--dump-dot", pre_dot, "write DOT dumps of the Levi graphs");
    cmd_pre->callback([&] {
        Config cfg;
        pre_cfg.apply(cfg, ablation_off);
        const Stoplist stop = load_stoplist(pre_stopwords, pre_pronouns);
        const PreprocessReport report =
            preprocess_dir(resolve_path(pre_data), resolve_path(pre_out), cfg, stop, pre_dot);
        for (const auto& n : report.notes.lines) std::cout << "note: " << n << "\n";
        std::cout << "preprocessed artifacts: ";
        for (const auto& w : report.written) std::cout << w << " ";
        std::cout << "\n";
    });

    // train -----------------------------------------------------------------
    auto* cmd_train = app.add_subcommand("train", "train the model on preprocessed data");
    ConfigCli train_cfg;
    train_cfg.attach(cmd_train);
    std::string train_pre, train_out, train_resume;
    cmd_train->add_option("--pre", train_pre, "preprocessed directory")->required();
    cmd_train->add_option("--out", train_out, "checkpoint/metrics output directory")->required();
    cmd_train->add_option("--resume", train_resume, "checkpoint to resume from");
    cmd_train->callback([&] {
        const fs::path pre_dir = resolve_path(train_pre);
        const Vocabulary vocab = Vocabulary::load((pre_dir / "vocab.txt").string());
        auto train_set = load_split_or_empty(pre_dir, "train");
        auto valid_set = load_split_or_empty(pre_dir, "valid");
        auto test_set = load_split_or_empty(pre_dir, "test");
        if (train_set.empty()) throw DataError("train: no training instances in " + pre_dir.string());

        std::unique_ptr<Model> model;
        TrainOptions opts;
        opts.out_dir = resolve_path(train_out);
        if (!train_resume.empty()) {
            LoadedCheckpoint lc = model_from_checkpoint(read_checkpoint_file(resolve_path(train_resume)));
            Config cfg = lc.model->config();
            train_cfg.apply(cfg, ablation_off);
            check_structure_match(lc.model->config(), cfg);
            model = std::move(lc.model);
            model->mutable_config() = cfg;
            opts.start_step = lc.step;
        } else {
            Config cfg;
            train_cfg.apply(cfg, ablation_off);
            model = std::make_unique<Model>(cfg, static_cast<int>(vocab.size()));
        }
        std::cout << "training: " << train_set.size() << " instances, "
                  << model->params().total_count() << " parameters\n";
        const TrainResult result = train_model(*model, train_set, valid_set, test_set, opts);
        std::cout << "finished at step " << result.final_step << "; kept checkpoints:";
        for (const auto& kc : result.kept) std::cout << " " << kc.step;
        std::cout << "\n";
        if (std::isfinite(result.report_test_loss))
            std::cout << "mean test loss over kept checkpoints: " << result.report_test_loss << "\n";
        if (std::isfinite(result.report_rouge_l))
            std::cout << "mean test rouge-l over kept checkpoints: " << result.report_rouge_l << "\n";
    });

    // generate ---------------------------------------------------------------
    auto* cmd_gen = app.add_subcommand("generate", "decode KGtext and summaries from a checkpoint");
    ConfigCli gen_cfg;
    gen_cfg.attach(cmd_gen);
    std::string gen_ckpt, gen_pre, gen_split = "test", gen_out;
    cmd_gen->add_option("--ckpt", gen_ckpt, "checkpoint file")->required();
    cmd_gen->add_option("--pre", gen_pre, "preprocessed directory")->required();
    cmd_gen->add_option("--split", gen_split, "split to decode (train|valid|test)")->default_str("test");
    cmd_gen->add_option("--out", gen_out, "output JSONL file")->required();
    cmd_gen->callback([&] {
        const fs::path pre_dir = resolve_path(gen_pre);
        const Vocabulary vocab = Vocabulary::load((pre_dir / "vocab.txt").string());
        LoadedCheckpoint lc = model_from_checkpoint(read_checkpoint_file(resolve_path(gen_ckpt)));
        Config cfg = lc.model->config();
        gen_cfg.apply(cfg, ablation_off);
        check_structure_match(lc.model->config(), cfg);
        lc.model->mutable_config() = cfg;
        if (static_cast<int>(vocab.size()) != lc.model->vocab_size())
            throw DataError("checkpoint/vocabulary mismatch: checkpoint expects " +
                            std::to_string(lc.model->vocab_size()) + " tokens, vocab.txt has " +
                            std::to_string(vocab.size()));
        const auto instances = load_split_or_empty(pre_dir, gen_split);
        std::ofstream out(resolve_path(gen_out));
        if (!out) throw DataError("cannot write output file: " + gen_out);
        for (const auto& ec : instances) {
            const GenerationOutput g = generate(*lc.model, ec);
            nlohmann::json j;
            j["cluster_id"] = ec.cluster_id;
            j["kgtext"] = resolve_tokens(g.kgtext_ids, vocab, ec);
            j["summary"] = resolve_tokens(g.summary_ids, vocab, ec);
            j["scores"] = {{"kgtext_logprob", g.kgtext_logprob},
                           {"summary_norm_logprob", g.summary_norm_score}};
            out << j.dump() << "\n";
        }
        std::cout << "decoded " << instances.size() << " instances -> " << gen_out << "\n";
    });

    // evaluate ----------------------------------------------------------------
    auto* cmd_eval = app.add_subcommand("evaluate", "score generated summaries against references");
    std::string eval_gen, eval_refs, eval_out, eval_stopwords, eval_pronouns;
    cmd_eval->add_option("--generated", eval_gen, "generated JSONL (from `generate`)")->required();
    cmd_eval->add_option("--references", eval_refs, "reference corpus JSONL")->required();
    cmd_eval->add_option("--out", eval_out, "write the JSON report here");
    cmd_eval->add_option("--stopwords", eval_stopwords, "stopword list file");
    cmd_eval->add_option("--pronouns", eval_pronouns, "pronoun list file");
    cmd_eval->callback([&] {
        const Stoplist stop = load_stoplist(eval_stopwords, eval_pronouns);
        const auto refs = load_corpus(resolve_path(eval_refs), Split::Test);
        std::map<std::string, std::vector<std::string>> generated;
        std::ifstream in(resolve_path(eval_gen));
        if (!in) throw DataError("cannot open generated file: " + eval_gen);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (trim(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw DataError(eval_gen + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
            }
            generated[j.at("cluster_id").get<std::string>()] =
                j.at("summary").get<std::vector<std::string>>();
        }
        const MetricReport report = evaluate_corpus(refs, generated, stop);
        std::cout << report.to_table();
        if (!eval_out.empty()) {
            std::ofstream out(resolve_path(eval_out));
            out << report.to_json().dump(2) << "\n";
        }
    });

    try {
        std::vector<const char*> argv;
        argv.push_back("kgsum");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run(std::move(args));
    } catch (const kgsum::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const kgsum::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const kgsum::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
