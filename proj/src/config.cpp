#include "tsfound/config.hpp"

#include "tsfound/error.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tsfound {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig preset_config(const std::string& name) {
    RunConfig c;
    c.preset = name;
    if (name == "desk-tiny") {
        c.model.context_len = 256;
        c.train.steps = 5000;
        c.train.batch_size = 64;
        c.train.horizon = 64;
        c.data.synth.series = 10000;
        c.data.synth.length = 384;
        c.eval.horizon = 64;
        return c;
    }
    if (name == "base-paper" || name == "large-paper") {
        const bool large = name == "large-paper";
        c.model.d_model = large ? 1024 : 768;
        c.model.encoder_layers = large ? 24 : 12;
        c.model.decoder_layers = large ? 24 : 12;
        c.model.heads = large ? 16 : 12;
        c.model.d_ff = 4 * c.model.d_model;
        c.model.context_len = 512;
        c.train.steps = 200000;
        c.train.batch_size = 1024;
        c.train.horizon = 192;
        c.train.checkpoint_every = 10000;
        c.data.synth.series = 0;
        c.eval.horizon = 0;
        return c;
    }
    fail_validation("unknown preset '" + name + "' (available: base-paper, large-paper, desk-tiny)");
}

std::vector<std::string> preset_names() {
    return {"base-paper", "large-paper", "desk-tiny"};
}

// ---------------------------------------------------------------------------
// TOML subset

namespace {

struct Cursor {
    const std::string& s;
    std::size_t i = 0;
    int line = 1;

    bool done() const { return i >= s.size(); }
    char peek() const { return done() ? '\0' : s[i]; }
    void skip_blank() {
        while (!done() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) {
            ++i;
        }
    }
    [[noreturn]] void error(const std::string& what) const {
        fail_validation("config line " + std::to_string(line) + ": " + what);
    }
};

json parse_value(Cursor& c);

json parse_string(Cursor& c) {
    const char quote = c.s[c.i++];
    std::string out;
    while (!c.done() && c.peek() != quote) {
        char ch = c.s[c.i++];
        if (ch == '\n') {
            c.error("unterminated string");
        }
        if (ch == '\\' && quote == '"') {
            if (c.done()) {
                c.error("unterminated string");
            }
            const char e = c.s[c.i++];
            switch (e) {
            case 'n': ch = '\n'; break;
            case 't': ch = '\t'; break;
            case '\\': ch = '\\'; break;
            case '"': ch = '"'; break;
            default: c.error(std::string("unsupported escape \\") + e);
            }
        }
        out.push_back(ch);
    }
    if (c.done()) {
        c.error("unterminated string");
    }
    ++c.i;
    return out;
}

json parse_array(Cursor& c) {
    ++c.i;
    json arr = json::array();
    for (;;) {
        while (!c.done() && std::isspace(static_cast<unsigned char>(c.peek()))) {
            if (c.peek() == '\n') {
                ++c.line;
            }
            ++c.i;
        }
        if (c.peek() == ']') {
            ++c.i;
            return arr;
        }
        arr.push_back(parse_value(c));
        c.skip_blank();
        if (c.peek() == ',') {
            ++c.i;
        } else if (c.peek() != ']' && c.peek() != '\n') {
            c.error("expected ',' or ']' in array");
        }
    }
}

json parse_scalar(Cursor& c) {
    std::size_t start = c.i;
    while (!c.done() && c.peek() != ',' && c.peek() != ']' && c.peek() != '#' && c.peek() != '\n' &&
           c.peek() != ' ' && c.peek() != '\t' && c.peek() != '\r') {
        ++c.i;
    }
    std::string tok = c.s.substr(start, c.i - start);
    if (tok == "true") {
        return true;
    }
    if (tok == "false") {
        return false;
    }
    std::string digits;
    for (char ch : tok) {
        if (ch != '_') {
            digits.push_back(ch);
        }
    }
    if (digits.empty()) {
        c.error("missing value");
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    try {
        std::size_t used = 0;
        if (is_float) {
            double v = std::stod(digits, &used);
            if (used == digits.size()) {
                return v;
            }
        } else {
            long long v = std::stoll(digits, &used);
            if (used == digits.size()) {
                return v;
            }
        }
    } catch (const std::exception&) {
    }
    c.error("cannot parse value '" + tok + "'");
}

json parse_value(Cursor& c) {
    c.skip_blank();
    const char ch = c.peek();
    if (ch == '"' || ch == '\'') {
        return parse_string(c);
    }
    if (ch == '[') {
        return parse_array(c);
    }
    return parse_scalar(c);
}

std::string parse_key(Cursor& c) {
    c.skip_blank();
    if (c.peek() == '"') {
        return parse_string(c).get<std::string>();
    }
    std::size_t start = c.i;
    while (!c.done() && (std::isalnum(static_cast<unsigned char>(c.peek())) || c.peek() == '_' || c.peek() == '-')) {
        ++c.i;
    }
    if (start == c.i) {
        c.error("expected a key");
    }
    return c.s.substr(start, c.i - start);
}

void end_of_line(Cursor& c) {
    c.skip_blank();
    if (c.peek() == '#') {
        while (!c.done() && c.peek() != '\n') {
            ++c.i;
        }
    }
    if (!c.done() && c.peek() != '\n') {
        c.error("unexpected trailing characters");
    }
}

} // namespace

json parse_toml(const std::string& text) {
    json root = json::object();
    json* table = &root;
    Cursor c{text};
    while (!c.done()) {
        c.skip_blank();
        const char ch = c.peek();
        if (ch == '\n') {
            ++c.i;
            ++c.line;
            continue;
        }
        if (ch == '#') {
            end_of_line(c);
            continue;
        }
        if (ch == '[') {
            ++c.i;
            table = &root;
            for (;;) {
                std::string key = parse_key(c);
                json& next = (*table)[key];
                if (next.is_null()) {
                    next = json::object();
                } else if (!next.is_object()) {
                    c.error("'" + key + "' is not a table");
                }
                table = &next;
                c.skip_blank();
                if (c.peek() == '.') {
                    ++c.i;
                    continue;
                }
                break;
            }
            if (c.peek() != ']') {
                c.error("expected ']'");
            }
            ++c.i;
            end_of_line(c);
            continue;
        }
        std::string key = parse_key(c);
        c.skip_blank();
        if (c.peek() != '=') {
            c.error("expected '=' after '" + key + "'");
        }
        ++c.i;
        if (table->contains(key)) {
            c.error("duplicate key '" + key + "'");
        }
        (*table)[key] = parse_value(c);
        end_of_line(c);
    }
    return root;
}

// ---------------------------------------------------------------------------
// Document -> RunConfig

namespace {

struct Reader {
    const json& table;
    std::string section;

    std::string where(const std::string& key) const { return section.empty() ? key : section + "." + key; }

    template <typename T>
    void get(const std::string& key, T& out) const {
        auto it = table.find(key);
        if (it == table.end()) {
            return;
        }
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!it->is_number()) {
                    throw std::runtime_error("expected a number");
                }
                out = it->template get<double>();
            } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
                if (!it->is_number_integer()) {
                    throw std::runtime_error("expected an integer");
                }
                const long long v = it->template get<long long>();
                if constexpr (std::is_unsigned_v<T>) {
                    if (v < 0) {
                        throw std::runtime_error("must not be negative");
                    }
                }
                out = static_cast<T>(v);
            } else {
                out = it->template get<T>();
            }
        } catch (const std::exception& e) {
            fail_validation("config field '" + where(key) + "': " + e.what());
        }
    }

    void reject_unknown(std::initializer_list<const char*> known) const {
        for (auto it = table.begin(); it != table.end(); ++it) {
            bool ok = false;
            for (const char* k : known) {
                ok = ok || it.key() == k;
            }
            if (!ok) {
                fail_validation("unknown config field '" + where(it.key()) + "'");
            }
        }
    }
};

std::string resolve(const std::string& base_dir, const std::string& p) {
    if (base_dir.empty() || fs::path(p).is_absolute()) {
        return p;
    }
    return (fs::path(base_dir) / p).lexically_normal().string();
}

const json& section(const json& doc, const char* name) {
    static const json empty = json::object();
    auto it = doc.find(name);
    if (it == doc.end()) {
        return empty;
    }
    if (!it->is_object()) {
        fail_validation(std::string("config field '") + name + "' must be a table");
    }
    return *it;
}

void read_model(const json& t, ModelConfig& m) {
    Reader r{t, "model"};
    r.reject_unknown({"patch_sizes", "output_patch", "context_len", "d_model", "encoder_layers", "decoder_layers",
                      "heads", "d_ff", "rel_buckets", "rel_max_distance", "dropout", "quantiles"});
    r.get("patch_sizes", m.patch_sizes);
    r.get("output_patch", m.output_patch);
    r.get("context_len", m.context_len);
    r.get("d_model", m.d_model);
    r.get("encoder_layers", m.encoder_layers);
    r.get("decoder_layers", m.decoder_layers);
    r.get("heads", m.heads);
    r.get("d_ff", m.d_ff);
    r.get("rel_buckets", m.rel_buckets);
    r.get("rel_max_distance", m.rel_max_distance);
    r.get("dropout", m.dropout);
    r.get("quantiles", m.quantiles);
}

void read_train(const json& t, TrainConfig& c) {
    Reader r{t, "train"};
    r.reject_unknown({"steps", "batch_size", "horizon", "lr", "beta1", "beta2", "adam_eps", "weight_decay",
                      "warmup_steps", "grad_clip", "log_every", "checkpoint_every"});
    r.get("steps", c.steps);
    r.get("batch_size", c.batch_size);
    r.get("horizon", c.horizon);
    r.get("lr", c.lr);
    r.get("beta1", c.beta1);
    r.get("beta2", c.beta2);
    r.get("adam_eps", c.adam_eps);
    r.get("weight_decay", c.weight_decay);
    r.get("warmup_steps", c.warmup_steps);
    r.get("grad_clip", c.grad_clip);
    r.get("log_every", c.log_every);
    r.get("checkpoint_every", c.checkpoint_every);
}

} // namespace

RunConfig config_from_document(const json& doc, const std::string& base_dir) {
    if (!doc.is_object()) {
        fail_validation("config must be a table");
    }
    Reader top{doc, ""};
    top.reject_unknown({"preset", "seed", "model", "train", "data", "eval"});
    std::string preset = "desk-tiny";
    top.get("preset", preset);
    RunConfig cfg = preset_config(preset);
    top.get("seed", cfg.seed);

    read_model(section(doc, "model"), cfg.model);
    read_train(section(doc, "train"), cfg.train);

    const json& data = section(doc, "data");
    Reader dr{data, "data"};
    dr.reject_unknown({"corpus", "synth"});
    if (data.contains("corpus")) {
        if (data["corpus"].is_string()) {
            cfg.data.corpus = {data["corpus"].get<std::string>()};
        } else {
            dr.get("corpus", cfg.data.corpus);
        }
    }
    if (data.contains("synth")) {
        const json& s = section(data, "synth");
        Reader sr{s, "data.synth"};
        sr.reject_unknown({"series", "length", "mixup_rate", "max_sources", "max_kernel_depth"});
        sr.get("series", cfg.data.synth.series);
        sr.get("length", cfg.data.synth.length);
        sr.get("mixup_rate", cfg.data.synth.mixup_rate);
        sr.get("max_sources", cfg.data.synth.max_sources);
        sr.get("max_kernel_depth", cfg.data.synth.max_kernel_depth);
    }
    for (auto& p : cfg.data.corpus) {
        p = resolve(base_dir, p);
    }

    const json& ev = section(doc, "eval");
    Reader er{ev, "eval"};
    er.reject_unknown({"datasets", "protocol", "horizon", "horizons", "stride", "test_fraction", "seasons"});
    if (ev.contains("datasets") && ev["datasets"].is_string()) {
        cfg.eval.datasets = {ev["datasets"].get<std::string>()};
    } else {
        er.get("datasets", cfg.eval.datasets);
    }
    er.get("protocol", cfg.eval.protocol);
    er.get("horizon", cfg.eval.horizon);
    er.get("horizons", cfg.eval.horizons);
    er.get("stride", cfg.eval.stride);
    er.get("test_fraction", cfg.eval.test_fraction);
    if (ev.contains("seasons")) {
        const json& s = section(ev, "seasons");
        for (auto it = s.begin(); it != s.end(); ++it) {
            if (!it->is_number_integer()) {
                fail_validation("config field 'eval.seasons." + it.key() + "': expected an integer");
            }
            cfg.eval.seasons[it.key()] = it->get<int>();
        }
    }
    for (auto& p : cfg.eval.datasets) {
        p = resolve(base_dir, p);
    }
    cfg.train.seed = cfg.seed;
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail_validation("cannot read config file '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    const json doc = parse_toml(buf.str());
    return config_from_document(doc, fs::path(path).parent_path().string());
}

void validate(const RunConfig& cfg) {
    validate(cfg.model);
    validate(cfg.train, cfg.model);
    const SynthConfig& s = cfg.data.synth;
    if (s.series < 0) {
        fail_validation("config field 'data.synth.series' must not be negative");
    }
    if (s.length < 2) {
        fail_validation("config field 'data.synth.length' must be at least 2");
    }
    if (!(s.mixup_rate >= 0.0 && s.mixup_rate <= 1.0)) {
        fail_validation("config field 'data.synth.mixup_rate' must lie in [0, 1]");
    }
    if (s.max_sources < 1 || s.max_sources > 3) {
        fail_validation("config field 'data.synth.max_sources' must lie in [1, 3]");
    }
    if (s.max_kernel_depth < 1 || s.max_kernel_depth > 3) {
        fail_validation("config field 'data.synth.max_kernel_depth' must lie in [1, 3]");
    }
    if (s.mixup_rate > 0.0 && s.series > 0 &&
        static_cast<long>(std::llround(s.mixup_rate * static_cast<double>(s.series))) >= s.series) {
        fail_validation("config field 'data.synth.mixup_rate' leaves no Gaussian-process series to mix");
    }
    const EvalConfig& e = cfg.eval;
    if (e.protocol != "last_window" && e.protocol != "rolling") {
        fail_validation("config field 'eval.protocol' must be 'last_window' or 'rolling'");
    }
    if (e.horizon < 0) {
        fail_validation("config field 'eval.horizon' must not be negative");
    }
    for (int h : e.horizons) {
        if (h < 1) {
            fail_validation("config field 'eval.horizons' entries must be positive");
        }
    }
    if (e.stride < 0) {
        fail_validation("config field 'eval.stride' must not be negative");
    }
    if (!(e.test_fraction > 0.0 && e.test_fraction < 1.0)) {
        fail_validation("config field 'eval.test_fraction' must lie in (0, 1)");
    }
    for (const auto& [name, m] : e.seasons) {
        if (m < 1) {
            fail_validation("config field 'eval.seasons." + name + "' must be at least 1");
        }
    }
}

void require_corpus_paths(const RunConfig& cfg) {
    for (const auto& p : cfg.data.corpus) {
        if (!fs::exists(p)) {
            fail_validation("config field 'data.corpus': path '" + p + "' does not exist");
        }
    }
}

void require_dataset_paths(const RunConfig& cfg) {
    for (const auto& p : cfg.eval.datasets) {
        if (!fs::exists(p)) {
            fail_validation("config field 'eval.datasets': path '" + p + "' does not exist");
        }
    }
}

json to_json(const ModelConfig& m) {
    return {{"patch_sizes", m.patch_sizes},       {"output_patch", m.output_patch},
            {"context_len", m.context_len},       {"d_model", m.d_model},
            {"encoder_layers", m.encoder_layers}, {"decoder_layers", m.decoder_layers},
            {"heads", m.heads},                   {"d_ff", m.d_ff},
            {"rel_buckets", m.rel_buckets},       {"rel_max_distance", m.rel_max_distance},
            {"dropout", m.dropout},               {"quantiles", m.quantiles}};
}

json to_json(const TrainConfig& c) {
    return {{"steps", c.steps},
            {"batch_size", c.batch_size},
            {"horizon", c.horizon},
            {"lr", c.lr},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"adam_eps", c.adam_eps},
            {"weight_decay", c.weight_decay},
            {"warmup_steps", c.warmup_steps},
            {"grad_clip", c.grad_clip},
            {"log_every", c.log_every},
            {"checkpoint_every", c.checkpoint_every},
            {"seed", c.seed}};
}

json to_json(const RunConfig& cfg) {
    json seasons = json::object();
    for (const auto& [k, v] : cfg.eval.seasons) {
        seasons[k] = v;
    }
    return {{"preset", cfg.preset},
            {"seed", cfg.seed},
            {"model", to_json(cfg.model)},
            {"train", to_json(cfg.train)},
            {"data",
             {{"corpus", cfg.data.corpus},
              {"synth",
               {{"series", cfg.data.synth.series},
                {"length", cfg.data.synth.length},
                {"mixup_rate", cfg.data.synth.mixup_rate},
                {"max_sources", cfg.data.synth.max_sources},
                {"max_kernel_depth", cfg.data.synth.max_kernel_depth}}}}},
            {"eval",
             {{"datasets", cfg.eval.datasets},
              {"protocol", cfg.eval.protocol},
              {"horizon", cfg.eval.horizon},
              {"horizons", cfg.eval.horizons},
              {"stride", cfg.eval.stride},
              {"test_fraction", cfg.eval.test_fraction},
              {"seasons", seasons}}}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig m;
    read_model(j, m);
    validate(m);
    return m;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    json copy = j;
    if (copy.contains("seed")) {
        c.seed = copy["seed"].get<std::uint64_t>();
        copy.erase("seed");
    }
    read_train(copy, c);
    return c;
}

std::string model_config_difference(const ModelConfig& a, const ModelConfig& b) {
    const json ja = to_json(a);
    const json jb = to_json(b);
    for (auto it = ja.begin(); it != ja.end(); ++it) {
        if (jb.at(it.key()) != it.value()) {
            return it.key();
        }
    }
    return "";
}

} // namespace tsfound
