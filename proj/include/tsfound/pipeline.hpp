#pragma once

#include "tsfound/checkpoint.hpp"
#include "tsfound/config.hpp"
#include "tsfound/eval.hpp"
#include "tsfound/inference.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tsfound {

struct LogRecord {
    long step = 0; // index of the update, 0-based
    double lr = 0.0;
    LossBreakdown loss;

    std::string to_json_line() const;
};

struct TrainRunOptions {
    std::string out_dir;          // empty: nothing is written
    std::string resume_from;      // checkpoint path, optional
    long stop_at = -1;            // stop once this many steps are done (< 0: train.steps)
    std::function<void(const LogRecord&)> on_log;
};

struct TrainRunResult {
    Model<float> model;
    AdamState<float> adam;
    long steps_done = 0;
    std::vector<LossBreakdown> losses; // one per step run in this call
    std::vector<std::string> checkpoints;
    std::string final_checkpoint;
};

/// Corpus for training: configured files, else an in-memory synthetic corpus.
std::vector<TimeSeries> training_corpus(const RunConfig& cfg);

/// The train_step loop with JSON-lines logging, periodic checkpoints and resume.
TrainRunResult run_training(const RunConfig& cfg, const std::vector<TimeSeries>& corpus,
                            const TrainRunOptions& options);

class ModelForecaster final : public Forecaster {
public:
    explicit ModelForecaster(const Model<float>& model) : model_(&model) {}
    std::vector<double> forecast(std::span<const double> context, int horizon) override;
    std::string name() const override { return "tsfound"; }

private:
    const Model<float>* model_;
};

/// Each .jsonl/.csv file (or each such file in a directory) is one dataset
/// named after its stem. An optional <stem>.meta.json holds horizon, season
/// and freq. Season precedence: eval.seasons, sidecar, frequency table.
/// Horizon precedence: sidecar, eval.horizon, train.horizon.
std::vector<DatasetSpec> load_datasets(const RunConfig& cfg);

/// Runs the configured protocol; throws Runtime if no dataset was evaluable.
EvalReport run_evaluation(const RunConfig& cfg, Forecaster& forecaster, const std::vector<DatasetSpec>& datasets);

/// Writes report.json and report.csv under dir.
void write_report(const EvalReport& report, const std::string& dir);

} // namespace tsfound
