#pragma once

// Run configuration: model shape, losses, optimizer schedule, decoding and
// truncation limits, plus the four module ablation switches. Defaults are
// the full-scale values; desk-scale runs override them via config file or
// command line flags (flags win over the file).
//
// Config file format: flat key = value lines grouped under [section]
// headers, '#' comments. Unknown keys are errors.

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kgsum/util.hpp"

namespace kgsum {

enum class KgVariant { Ent, EntType, EntTypeRel };

inline std::string to_string(KgVariant v) {
    switch (v) {
        case KgVariant::Ent: return "ent";
        case KgVariant::EntType: return "ent_type";
        case KgVariant::EntTypeRel: return "ent_type_rel";
    }
    return "ent_type_rel";
}

inline KgVariant kg_variant_from_string(const std::string& s) {
    if (s == "ent") return KgVariant::Ent;
    if (s == "ent_type") return KgVariant::EntType;
    if (s == "ent_type_rel") return KgVariant::EntTypeRel;
    throw UsageError("kgtext.variant must be one of ent|ent_type|ent_type_rel, got '" + s + "'");
}

struct Config {
    // [model]
    int d_model = 256;
    int ffn_dim = 1024;
    int heads = 8;
    int encoder_layers = 6;
    int decoder_layers = 6;
    int graph_iterations = 3;
    double dropout = 0.1;

    // [ablation]
    bool use_kgg = true;
    bool use_rake = true;
    bool use_gu = true;
    bool use_esu = true;

    // [kgtext]
    KgVariant kgtext_variant = KgVariant::EntTypeRel;

    // [loss]
    double lambda = 1.0;
    double eta = 1.0;
    double label_smoothing = 0.1;

    // [optimizer]
    double lr_factor = 0.02;
    double beta1 = 0.9;
    double beta2 = 0.998;
    double adam_eps = 1e-9;
    int warmup_steps = 8000;
    int batch_size = 8;
    int max_steps = 100000;
    double grad_clip = 2.0;
    bool use_grad_clip = true;

    // [beam]
    int beam_size = 5;
    int min_len_summary = 110;
    int min_len_kgtext = 100;
    int max_len_summary = 300;
    int max_len_kgtext = 250;
    double length_penalty = 0.4;
    int block_ngram = 0;  // 0 = no n-gram blocking

    // [limits]
    int max_sentences_per_paper = 30;
    int max_tokens_per_sentence = 60;
    int max_summary_tokens = 200;
    int max_kgtext_tokens = 200;
    int max_vocab = 50000;

    // [training]
    std::uint64_t seed = 17;
    int val_interval = 1000;
    int keep_checkpoints = 3;
    std::string selection = "val_loss";     // val_loss | rouge_l
    std::string kgtext_feed = "generated";  // generated | gold
    double early_stop_train_loss = 0.0;     // 0 = disabled

    int head_dim() const { return d_model / heads; }

    void validate() const {
        auto fail = [](const std::string& m) { throw UsageError("config: " + m); };
        if (d_model < 1) fail("model.d_model must be >= 1");
        if (heads < 1) fail("model.heads must be >= 1");
        if (d_model % heads != 0) fail("model.d_model must be divisible by model.heads");
        if (ffn_dim < 1) fail("model.ffn_dim must be >= 1");
        if (encoder_layers < 1) fail("model.encoder_layers must be >= 1");
        if (decoder_layers < 1) fail("model.decoder_layers must be >= 1");
        if (graph_iterations < 1) fail("model.graph_iterations must be >= 1");
        if (dropout < 0.0 || dropout >= 1.0) fail("model.dropout must be in [0,1)");
        if (lambda < 0.0) fail("loss.lambda must be >= 0");
        if (eta < 0.0) fail("loss.eta must be >= 0");
        if (label_smoothing < 0.0 || label_smoothing >= 1.0)
            fail("loss.label_smoothing must be in [0,1)");
        if (warmup_steps < 1) fail("optimizer.warmup_steps must be >= 1");
        if (batch_size < 1) fail("optimizer.batch_size must be >= 1");
        if (beam_size < 1) fail("beam.beam_size must be >= 1");
        if (min_len_summary >= max_len_summary)
            fail("beam.min_len_summary must be < beam.max_len_summary");
        if (min_len_kgtext >= max_len_kgtext)
            fail("beam.min_len_kgtext must be < beam.max_len_kgtext");
        if (length_penalty < 0.0) fail("beam.length_penalty must be >= 0");
        if (max_vocab < 1) fail("limits.max_vocab must be >= 1");
        if (keep_checkpoints < 1) fail("training.keep_checkpoints must be >= 1");
        if (val_interval < 1) fail("training.val_interval must be >= 1");
        if (selection != "val_loss" && selection != "rouge_l")
            fail("training.selection must be val_loss|rouge_l");
        if (kgtext_feed != "generated" && kgtext_feed != "gold")
            fail("training.kgtext_feed must be generated|gold");
    }
};

namespace detail {

struct ConfigField {
    const char* section;
    const char* key;
    std::function<void(Config&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
};

inline bool parse_bool(const std::string& v, const std::string& key) {
    const std::string s = lowercase(trim(v));
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw UsageError("config: field '" + key + "' expects a boolean, got '" + v + "'");
}

inline int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const int r = std::stoi(trim(v), &pos);
        if (pos != trim(v).size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw UsageError("config: field '" + key + "' expects an integer, got '" + v + "'");
    }
}

inline double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(trim(v), &pos);
        if (pos != trim(v).size()) throw std::invalid_argument("trailing");
        return r;
    } catch (const std::exception&) {
        throw UsageError("config: field '" + key + "' expects a number, got '" + v + "'");
    }
}

inline std::string fmt_double(double d) {
    std::ostringstream os;
    os << d;
    return os.str();
}

inline const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        auto add_int = [&](const char* sec, const char* key, int Config::* mem) {
            f.push_back({sec, key,
                         [mem, key](Config& c, const std::string& v) { c.*mem = parse_int(v, key); },
                         [mem](const Config& c) { return std::to_string(c.*mem); }});
        };
        auto add_dbl = [&](const char* sec, const char* key, double Config::* mem) {
            f.push_back({sec, key,
                         [mem, key](Config& c, const std::string& v) { c.*mem = parse_double(v, key); },
                         [mem](const Config& c) { return fmt_double(c.*mem); }});
        };
        auto add_bool = [&](const char* sec, const char* key, bool Config::* mem) {
            f.push_back({sec, key,
                         [mem, key](Config& c, const std::string& v) { c.*mem = parse_bool(v, key); },
                         [mem](const Config& c) { return (c.*mem) ? "true" : "false"; }});
        };
        auto add_str = [&](const char* sec, const char* key, std::string Config::* mem) {
            f.push_back({sec, key,
                         [mem](Config& c, const std::string& v) { c.*mem = trim(v); },
                         [mem](const Config& c) { return c.*mem; }});
        };

        add_int("model", "d_model", &Config::d_model);
        add_int("model", "ffn_dim", &Config::ffn_dim);
        add_int("model", "heads", &Config::heads);
        add_int("model", "encoder_layers", &Config::encoder_layers);
        add_int("model", "decoder_layers", &Config::decoder_layers);
        add_int("model", "graph_iterations", &Config::graph_iterations);
        add_dbl("model", "dropout", &Config::dropout);

        add_bool("ablation", "use_kgg", &Config::use_kgg);
        add_bool("ablation", "use_rake", &Config::use_rake);
        add_bool("ablation", "use_gu", &Config::use_gu);
        add_bool("ablation", "use_esu", &Config::use_esu);

        f.push_back({"kgtext", "variant",
                     [](Config& c, const std::string& v) { c.kgtext_variant = kg_variant_from_string(trim(v)); },
                     [](const Config& c) { return to_string(c.kgtext_variant); }});

        add_dbl("loss", "lambda", &Config::lambda);
        add_dbl("loss", "eta", &Config::eta);
        add_dbl("loss", "label_smoothing", &Config::label_smoothing);

        add_dbl("optimizer", "lr_factor", &Config::lr_factor);
        add_dbl("optimizer", "beta1", &Config::beta1);
        add_dbl("optimizer", "beta2", &Config::beta2);
        add_dbl("optimizer", "adam_eps", &Config::adam_eps);
        add_int("optimizer", "warmup_steps", &Config::warmup_steps);
        add_int("optimizer", "batch_size", &Config::batch_size);
        add_int("optimizer", "max_steps", &Config::max_steps);
        add_dbl("optimizer", "grad_clip", &Config::grad_clip);
        add_bool("optimizer", "use_grad_clip", &Config::use_grad_clip);

        add_int("beam", "beam_size", &Config::beam_size);
        add_int("beam", "min_len_summary", &Config::min_len_summary);
        add_int("beam", "min_len_kgtext", &Config::min_len_kgtext);
        add_int("beam", "max_len_summary", &Config::max_len_summary);
        add_int("beam", "max_len_kgtext", &Config::max_len_kgtext);
        add_dbl("beam", "length_penalty", &Config::length_penalty);
        add_int("beam", "block_ngram", &Config::block_ngram);

        add_int("limits", "max_sentences_per_paper", &Config::max_sentences_per_paper);
        add_int("limits", "max_tokens_per_sentence", &Config::max_tokens_per_sentence);
        add_int("limits", "max_summary_tokens", &Config::max_summary_tokens);
        add_int("limits", "max_kgtext_tokens", &Config::max_kgtext_tokens);
        add_int("limits", "max_vocab", &Config::max_vocab);

        f.push_back({"training", "seed",
                     [](Config& c, const std::string& v) {
                         c.seed = static_cast<std::uint64_t>(std::stoull(trim(v)));
                     },
                     [](const Config& c) { return std::to_string(c.seed); }});
        add_int("training", "val_interval", &Config::val_interval);
        add_int("training", "keep_checkpoints", &Config::keep_checkpoints);
        add_str("training", "selection", &Config::selection);
        add_str("training", "kgtext_feed", &Config::kgtext_feed);
        add_dbl("training", "early_stop_train_loss", &Config::early_stop_train_loss);
        return f;
    }();
    return fields;
}

}  // namespace detail

// Applies "section.key = value". Throws UsageError for unknown keys.
inline void config_set(Config& cfg, const std::string& dotted_key, const std::string& value) {
    for (const auto& f : detail::config_fields()) {
        if (dotted_key == std::string(f.section) + "." + f.key) {
            f.set(cfg, value);
            return;
        }
    }
    throw UsageError("config: unknown key '" + dotted_key + "'");
}

inline std::string config_get(const Config& cfg, const std::string& dotted_key) {
    for (const auto& f : detail::config_fields()) {
        if (dotted_key == std::string(f.section) + "." + f.key) return f.get(cfg);
    }
    throw UsageError("config: unknown key '" + dotted_key + "'");
}

inline void parse_config_stream(Config& cfg, std::istream& in, const std::string& source_name) {
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw UsageError(source_name + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(source_name + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string dotted = section.empty() ? key : section + "." + key;
        try {
            config_set(cfg, dotted, value);
        } catch (const UsageError& e) {
            throw UsageError(source_name + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void load_config_file(Config& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    parse_config_stream(cfg, in, path);
}

inline std::string dump_config(const Config& cfg) {
    std::ostringstream os;
    std::string section;
    for (const auto& f : detail::config_fields()) {
        if (section != f.section) {
            if (!section.empty()) os << "\n";
            section = f.section;
            os << "[" << section << "]\n";
        }
        os << f.key << " = " << f.get(cfg) << "\n";
    }
    return os.str();
}

// Key/value map form, used for the checkpoint config snapshot.
inline std::map<std::string, std::string> config_to_map(const Config& cfg) {
    std::map<std::string, std::string> out;
    for (const auto& f : detail::config_fields())
        out[std::string(f.section) + "." + f.key] = f.get(cfg);
    return out;
}

inline Config config_from_map(const std::map<std::string, std::string>& kv) {
    Config cfg;
    for (const auto& [k, v] : kv) config_set(cfg, k, v);
    return cfg;
}

}  // namespace kgsum
