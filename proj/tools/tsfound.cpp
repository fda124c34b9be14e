// tsfound command-line front end. Talks to the library only through tsfound.h.

#include "tsfound.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

// Exit codes: 0 success, 1 validation error, 2 runtime failure.
int exit_code(tsf_status s) {
    switch (s) {
    case TSF_OK:
        return 0;
    case TSF_ERR_VALIDATION:
    case TSF_ERR_ARGUMENT:
        return 1;
    default:
        return 2;
    }
}

struct CommandFailed {
    int code;
};

void check(tsf_status s) {
    if (s != TSF_OK) {
        std::cerr << "error: " << tsf_last_error() << '\n';
        throw CommandFailed{exit_code(s)};
    }
}

struct ConfigDeleter {
    void operator()(tsf_config* c) const { tsf_config_free(c); }
};
struct ModelDeleter {
    void operator()(tsf_model* m) const { tsf_model_free(m); }
};
using ConfigPtr = std::unique_ptr<tsf_config, ConfigDeleter>;
using ModelPtr = std::unique_ptr<tsf_model, ModelDeleter>;

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { tsf_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

struct Common {
    std::string config;
    std::string preset = "desk-tiny";
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = false) {
    cmd->add_option("--config", c.config, "Run configuration file (TOML subset)");
    cmd->add_option("--preset", c.preset, "Built-in preset when --config is absent")
        ->check(CLI::IsMember({"base-paper", "large-paper", "desk-tiny"}));
    cmd->add_option("--seed", c.seed, "Root seed, overrides the config");
    auto* out = cmd->add_option("--out", c.out, "Output directory");
    if (out_required) {
        out->required();
    }
}

ConfigPtr load(const Common& c) {
    tsf_config* raw = nullptr;
    check(c.config.empty() ? tsf_config_preset(c.preset.c_str(), &raw) : tsf_config_load(c.config.c_str(), &raw));
    ConfigPtr cfg(raw);
    if (c.seed) {
        check(tsf_config_set_seed(cfg.get(), *c.seed));
    }
    return cfg;
}

void print_log(void*, int64_t step, double lr, double mse, double ql, double total) {
    std::fprintf(stderr, "step %lld  lr %.3e  mse %.6f  ql %.6f  total %.6f\n", static_cast<long long>(step), lr, mse,
                 ql, total);
}

void write_text(const std::string& dir, const std::string& name, const std::string& text) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text)) {
        std::cerr << "error: cannot write " << path.string() << '\n';
        throw CommandFailed{2};
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tsfound: encoder-decoder time-series forecasting"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tsf_version()));

    Common synth_c, train_c, fc_c, eval_c, pc_c;

    auto* synth = app.add_subcommand("synth", "Write a synthetic GP + mixup corpus");
    add_common(synth, synth_c, true);
    std::optional<long> synth_series;
    synth->add_option("--series", synth_series, "Corpus size, overrides data.synth.series");

    auto* train = app.add_subcommand("train", "Train a model");
    add_common(train, train_c);
    std::string resume;
    bool dry_run = false;
    std::optional<long> steps;
    train->add_option("--resume", resume, "Checkpoint to resume from");
    train->add_option("--steps", steps, "Overrides train.steps");
    train->add_flag("--dry-run", dry_run, "Validate the config and print the parameter count");

    auto* fc = app.add_subcommand("forecast", "Forecast every series of an input file");
    add_common(fc, fc_c);
    std::string checkpoint, input;
    int horizon = 0;
    std::vector<double> quantiles;
    fc->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    fc->add_option("--input", input, "Series file (.jsonl or long-format .csv)")->required();
    fc->add_option("--horizon,-H", horizon, "Forecast horizon")->required()->check(CLI::PositiveNumber);
    fc->add_option("--quantiles", quantiles, "Quantile levels to report (default: all trained)")->delimiter(',');

    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset directory");
    add_common(ev, eval_c);
    std::string eval_ckpt, datasets, protocol;
    bool baseline = false;
    ev->add_option("--checkpoint", eval_ckpt, "Model checkpoint");
    ev->add_flag("--baseline", baseline, "Evaluate the seasonal-naive baseline instead of a model");
    ev->add_option("--datasets", datasets, "Dataset file or directory, overrides eval.datasets");
    ev->add_option("--protocol", protocol, "last_window or rolling")
        ->check(CLI::IsMember({"last_window", "rolling"}));

    auto* pc = app.add_subcommand("param-count", "Print the parameter count implied by a config");
    add_common(pc, pc_c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            auto cfg = load(synth_c);
            if (synth_series) {
                check(tsf_config_set_synth_series(cfg.get(), *synth_series));
            }
            OwnedString path;
            check(tsf_synth(cfg.get(), synth_c.out.c_str(), &path.p));
            std::cout << path.str() << '\n';
        } else if (train->parsed()) {
            auto cfg = load(train_c);
            if (steps) {
                check(tsf_config_set_steps(cfg.get(), *steps));
            }
            std::uint64_t count = 0;
            check(tsf_config_param_count(cfg.get(), &count));
            if (dry_run) {
                std::cout << "config ok; parameters: " << count << '\n';
                return 0;
            }
            if (train_c.out.empty()) {
                std::cerr << "error: train needs --out\n";
                return 1;
            }
            std::fprintf(stderr, "parameters: %llu\n", static_cast<unsigned long long>(count));
            OwnedString final_path;
            check(tsf_train(cfg.get(), train_c.out.c_str(), resume.empty() ? nullptr : resume.c_str(), print_log,
                            nullptr, &final_path.p));
            std::cout << final_path.str() << '\n';
        } else if (fc->parsed()) {
            ConfigPtr expect;
            if (!fc_c.config.empty()) {
                expect = load(fc_c);
            }
            tsf_model* raw = nullptr;
            check(tsf_model_load(checkpoint.c_str(), expect.get(), &raw));
            ModelPtr model(raw);
            OwnedString text;
            check(tsf_forecast_file(model.get(), input.c_str(), horizon, quantiles.data(), quantiles.size(),
                                    &text.p));
            if (fc_c.out.empty()) {
                std::cout << text.str();
            } else {
                write_text(fc_c.out, "forecast.jsonl", text.str());
            }
        } else if (ev->parsed()) {
            if (baseline == !eval_ckpt.empty()) {
                std::cerr << "error: evaluate needs exactly one of --checkpoint or --baseline\n";
                return 1;
            }
            auto cfg = load(eval_c);
            if (!datasets.empty()) {
                check(tsf_config_set_datasets(cfg.get(), datasets.c_str()));
            }
            if (!protocol.empty()) {
                check(tsf_config_set_protocol(cfg.get(), protocol.c_str()));
            }
            ModelPtr model;
            if (!baseline) {
                tsf_model* raw = nullptr;
                check(tsf_model_load(eval_ckpt.c_str(), eval_c.config.empty() ? nullptr : cfg.get(), &raw));
                model.reset(raw);
            }
            const std::string out = eval_c.out.empty() ? "eval" : eval_c.out;
            OwnedString report;
            check(tsf_evaluate(model.get(), cfg.get(), out.c_str(), &report.p));
            std::cout << report.str() << '\n';
        } else if (pc->parsed()) {
            auto cfg = load(pc_c);
            std::uint64_t count = 0;
            check(tsf_config_param_count(cfg.get(), &count));
            std::cout << count << '\n';
        }
    } catch (const CommandFailed& f) {
        return f.code;
    }
    return 0;
}
