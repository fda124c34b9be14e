#include "tsfound/pipeline.hpp"

#include "tsfound/corpus.hpp"
#include "tsfound/error.hpp"
#include "tsfound/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace tsfound {

namespace fs = std::filesystem;

std::string LogRecord::to_json_line() const {
    nlohmann::ordered_json j = {{"step", step}, {"lr", lr}, {"mse", loss.mse}, {"ql", loss.ql}, {"total", loss.total}};
    return j.dump();
}

std::vector<TimeSeries> training_corpus(const RunConfig& cfg) {
    if (!cfg.data.corpus.empty()) {
        require_corpus_paths(cfg);
        std::vector<TimeSeries> all;
        for (const auto& p : cfg.data.corpus) {
            auto part = read_series_file(p);
            all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        }
        return all;
    }
    return synthesize_corpus(cfg.data.synth, cfg.seed).series;
}

namespace {

std::string checkpoint_name(long step) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "step-%08ld.tsf", step);
    return buf;
}

} // namespace

TrainRunResult run_training(const RunConfig& cfg, const std::vector<TimeSeries>& corpus,
                            const TrainRunOptions& options) {
    validate(cfg);
    const TrainConfig& tc = cfg.train;
    TrainRunResult r{Model<float>(cfg.model), {}, 0, {}, {}, {}};
    long start = 0;
    if (!options.resume_from.empty()) {
        Checkpoint ck = load_checkpoint(options.resume_from);
        require_compatible(ck, cfg.model);
        if (!ck.adam) {
            fail_validation("checkpoint '" + options.resume_from + "' has no optimiser state to resume from");
        }
        r.model = std::move(ck.model);
        r.adam = std::move(*ck.adam);
        start = ck.step;
    } else {
        r.model.initialize(stream_seed(cfg.seed, "init"));
        r.adam = AdamState<float>::zeros_like(r.model);
    }
    const long end = options.stop_at >= 0 ? std::min(options.stop_at, tc.steps) : tc.steps;
    BatchSampler sampler(corpus, cfg.model, tc, cfg.seed);

    std::ofstream log;
    fs::path ckdir;
    if (!options.out_dir.empty()) {
        std::error_code ec;
        ckdir = fs::path(options.out_dir) / "checkpoints";
        fs::create_directories(ckdir, ec);
        if (ec) {
            fail_runtime("cannot create output directory '" + options.out_dir + "': " + ec.message());
        }
        const auto log_path = fs::path(options.out_dir) / "train_log.jsonl";
        log.open(log_path, start > 0 ? std::ios::app : std::ios::trunc);
        if (!log) {
            fail_runtime("cannot write '" + log_path.string() + "'");
        }
    }

    for (long step = start; step < end; ++step) {
        const TeacherForcedBatch batch = sampler.batch_for_step(step);
        LossBreakdown loss;
        try {
            loss = train_step(r.model, batch, r.adam, step, tc);
        } catch (const Error& e) {
            if (!options.out_dir.empty()) {
                nlohmann::json bundle = {{"step", step}, {"error", e.what()}, {"series_ids", batch.series_ids}};
                std::ofstream(fs::path(options.out_dir) / "failure.json") << bundle.dump(2) << '\n';
            }
            throw;
        }
        r.losses.push_back(loss);
        r.steps_done = step + 1;
        const bool log_now = step == 0 || (tc.log_every > 0 && (step + 1) % tc.log_every == 0) || step + 1 == tc.steps;
        if (log_now) {
            LogRecord rec{step, lr_schedule(step, tc.steps, tc.lr, tc.warmup_steps), loss};
            if (log.is_open()) {
                log << rec.to_json_line() << '\n' << std::flush;
            }
            if (options.on_log) {
                options.on_log(rec);
            }
        }
        if (!ckdir.empty() && tc.checkpoint_every > 0 && (step + 1) % tc.checkpoint_every == 0) {
            const std::string path = (ckdir / checkpoint_name(step + 1)).string();
            save_checkpoint(path, r.model, tc, step + 1, &r.adam);
            r.checkpoints.push_back(path);
        }
    }
    r.steps_done = std::max(r.steps_done, start);
    if (!options.out_dir.empty()) {
        r.final_checkpoint = (fs::path(options.out_dir) / "final.tsf").string();
        save_checkpoint(r.final_checkpoint, r.model, tc, r.steps_done, &r.adam);
    }
    return r;
}

std::vector<double> ModelForecaster::forecast(std::span<const double> context, int horizon) {
    ForecastRequest req;
    req.context.assign(context.begin(), context.end());
    req.horizon = horizon;
    return tsfound::forecast(*model_, req).point;
}

std::vector<DatasetSpec> load_datasets(const RunConfig& cfg) {
    require_dataset_paths(cfg);
    std::vector<fs::path> files;
    auto is_data = [](const fs::path& p) { return p.extension() == ".jsonl" || p.extension() == ".csv"; };
    for (const auto& entry : cfg.eval.datasets) {
        const fs::path p(entry);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& f : fs::directory_iterator(p)) {
                if (f.is_regular_file() && is_data(f.path())) {
                    found.push_back(f.path());
                }
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    std::vector<DatasetSpec> out;
    for (const auto& f : files) {
        DatasetSpec d;
        d.name = f.stem().string();
        d.series = read_series_file(f.string());
        nlohmann::json meta = nlohmann::json::object();
        const fs::path side = f.parent_path() / (d.name + ".meta.json");
        if (fs::exists(side)) {
            std::ifstream in(side);
            try {
                meta = nlohmann::json::parse(in);
            } catch (const std::exception& e) {
                fail_validation("dataset sidecar '" + side.string() + "' is not JSON: " + e.what());
            }
        }
        d.freq = meta.value("freq", d.series.empty() ? std::string() : d.series.front().freq);
        d.horizon = meta.value("horizon", cfg.eval.horizon > 0 ? cfg.eval.horizon : cfg.train.horizon);
        if (auto it = cfg.eval.seasons.find(d.name); it != cfg.eval.seasons.end()) {
            d.season = it->second;
        } else {
            d.season = meta.value("season", season_for_freq(d.freq));
        }
        if (d.horizon < 1 || d.season < 1) {
            fail_validation("dataset '" + d.name + "': horizon and season must be at least 1");
        }
        out.push_back(std::move(d));
    }
    return out;
}

EvalReport run_evaluation(const RunConfig& cfg, Forecaster& forecaster, const std::vector<DatasetSpec>& datasets) {
    EvalReport rep;
    if (cfg.eval.protocol == "rolling") {
        RollingOptions opt;
        opt.context_len = cfg.model.context_len;
        opt.horizons = cfg.eval.horizons;
        opt.stride = cfg.eval.stride;
        opt.test_fraction = cfg.eval.test_fraction;
        rep = evaluate_rolling(datasets, forecaster, opt);
    } else {
        rep = evaluate_last_window(datasets, forecaster);
    }
    if (rep.excluded_datasets.size() == datasets.size()) {
        fail_runtime("no evaluable datasets (" + std::to_string(datasets.size()) + " configured)");
    }
    return rep;
}

void write_report(const EvalReport& report, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        fail_runtime("cannot create output directory '" + dir + "': " + ec.message());
    }
    std::ofstream j(fs::path(dir) / "report.json", std::ios::trunc);
    std::ofstream c(fs::path(dir) / "report.csv", std::ios::trunc);
    if (!j || !c) {
        fail_runtime("cannot write reports under '" + dir + "'");
    }
    j << report.to_json() << '\n';
    c << report.to_csv();
}

} // namespace tsfound
