#pragma once

#include "tsfound/series.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tsfound {

struct DatasetSpec;

/// Anything that maps (context, horizon) to a point trajectory.
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual std::vector<double> forecast(std::span<const double> context, int horizon) = 0;
    virtual std::string name() const = 0;
    /// Called before the series of each dataset are forecast.
    virtual void begin_dataset(const DatasetSpec&) {}
};

struct SeasonalNaiveResult {
    std::vector<double> values;
    bool fell_back = false; // context shorter than m, used m = 1
};

SeasonalNaiveResult seasonal_naive(std::span<const double> context, int season, int horizon);

class SeasonalNaive final : public Forecaster {
public:
    /// season 0 follows the season of whichever dataset is being evaluated.
    explicit SeasonalNaive(int season) : season_(season), follow_(season == 0) {}
    std::vector<double> forecast(std::span<const double> context, int horizon) override;
    std::string name() const override { return "seasonal_naive"; }
    void begin_dataset(const DatasetSpec& d) override;
    int season() const { return season_; }

private:
    int season_;
    bool follow_;
};

/// Seasonal period for a frequency token (30min, H, D, W, M, Q, Y, B, 15min;
/// a leading multiplier such as "1D" or "3M" is accepted). 1 if unknown.
int season_for_freq(const std::string& freq);

double mae(std::span<const double> truth, std::span<const double> forecast);
double smape(std::span<const double> truth, std::span<const double> forecast);

inline constexpr double kMaseScaleFloor = 1e-9;

/// Missing when the in-sample seasonal scale is degenerate (< 1e-9) or the
/// context is not longer than m.
std::optional<double> mase(std::span<const double> truth, std::span<const double> forecast,
                           std::span<const double> context, int season);

struct RelativeAggregate {
    double geomean = 0.0;                    // NaN when nothing is eligible
    std::map<std::string, double> ratios;    // eligible datasets only
    std::vector<std::string> excluded;
};

/// Per dataset ratio model / baseline; geometric mean over finite positive ratios.
RelativeAggregate relative_geomean(const std::map<std::string, std::optional<double>>& model,
                                   const std::map<std::string, std::optional<double>>& baseline);

struct DatasetSpec {
    std::string name;
    std::string freq;
    int season = 1;
    int horizon = 1;
    std::vector<TimeSeries> series;
};

struct MetricSet {
    std::optional<double> mase;
    std::optional<double> smape;
    std::optional<double> mae;
};

struct DatasetResult {
    std::string name;
    MetricSet model;
    MetricSet baseline;
    std::optional<double> relative_mase;
    std::optional<double> relative_smape;
    std::size_t series_evaluated = 0;
    std::size_t series_skipped = 0;
    std::size_t mase_missing = 0;   // series whose MASE scale was degenerate
    std::size_t naive_fallbacks = 0;
};

/// Final `horizon` points of each series are the truth; the rest is context.
DatasetResult last_window_eval(const DatasetSpec& dataset, Forecaster& forecaster);

struct RollingHorizonResult {
    int horizon = 0;
    std::size_t windows = 0;
    std::optional<double> mae;
    std::optional<double> smape;
};

struct RollingResult {
    std::string name;
    std::vector<RollingHorizonResult> horizons;
    std::optional<double> average_mae;
    std::optional<double> average_smape;
    std::vector<int> excluded_horizons; // no admissible window
};

struct RollingOptions {
    int context_len = 512;
    std::vector<int> horizons{96, 192, 336, 720};
    int stride = 0;            // 0: stride equals the horizon
    double test_fraction = 0.2;
};

/// Start offsets (relative to the region) of every admissible window.
std::vector<std::size_t> rolling_window_starts(std::size_t region_len, int context_len, int horizon, int stride);

/// First index of the test segment for a series of this length; ETTh/ETTm
/// names use the canonical 12/4/4-month split.
std::size_t test_split_start(const std::string& dataset_name, std::size_t length, double test_fraction);

RollingResult rolling_eval(const DatasetSpec& dataset, Forecaster& forecaster, const RollingOptions& options);

struct EvalReport {
    std::string protocol; // "last_window" or "rolling"
    std::string model_name;
    std::vector<DatasetResult> last_window;
    std::vector<RollingResult> rolling;
    RelativeAggregate mase_aggregate;
    RelativeAggregate smape_aggregate;
    std::vector<std::string> excluded_datasets;

    std::string to_json() const;
    std::string to_csv() const;
};

EvalReport evaluate_last_window(const std::vector<DatasetSpec>& datasets, Forecaster& forecaster);
EvalReport evaluate_rolling(const std::vector<DatasetSpec>& datasets, Forecaster& forecaster,
                            const RollingOptions& options);

} // namespace tsfound
