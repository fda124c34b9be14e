#include "tsfound/eval.hpp"

#include "tsfound/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace tsfound {

SeasonalNaiveResult seasonal_naive(std::span<const double> context, int season, int horizon) {
    if (context.empty()) {
        fail_validation("seasonal_naive: empty context");
    }
    if (season < 1) {
        fail_validation("seasonal_naive: season must be at least 1");
    }
    SeasonalNaiveResult r;
    std::size_t m = static_cast<std::size_t>(season);
    if (context.size() < m) {
        m = 1;
        r.fell_back = true;
    }
    const std::size_t len = context.size();
    r.values.resize(static_cast<std::size_t>(std::max(horizon, 0)));
    for (std::size_t t = 0; t < r.values.size(); ++t) {
        r.values[t] = context[len - m + (t % m)];
    }
    return r;
}

std::vector<double> SeasonalNaive::forecast(std::span<const double> context, int horizon) {
    return seasonal_naive(context, season_ < 1 ? 1 : season_, horizon).values;
}

void SeasonalNaive::begin_dataset(const DatasetSpec& d) {
    if (follow_) {
        season_ = d.season;
    }
}

int season_for_freq(const std::string& freq) {
    std::size_t i = 0;
    while (i < freq.size() && std::isdigit(static_cast<unsigned char>(freq[i]))) {
        ++i;
    }
    const std::string prefix = freq.substr(0, i);
    std::string unit = freq.substr(i);
    if (unit == "min" || unit == "T") {
        if (prefix == "30") {
            return 48;
        }
        if (prefix == "15") {
            return 96;
        }
        return 1;
    }
    if (unit == "H" || unit == "h") {
        return 24;
    }
    if (unit == "D") {
        return 7;
    }
    if (unit == "W") {
        return 1;
    }
    if (unit == "M") {
        return prefix == "3" ? 4 : 12;
    }
    if (unit == "Q") {
        return 4;
    }
    if (unit == "Y" || unit == "A") {
        return 1;
    }
    if (unit == "B") {
        return 5;
    }
    return 1;
}

double mae(std::span<const double> truth, std::span<const double> forecast) {
    if (truth.size() != forecast.size() || truth.empty()) {
        fail_validation("mae: lengths differ or are zero");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        s += std::abs(truth[i] - forecast[i]);
    }
    return s / static_cast<double>(truth.size());
}

double smape(std::span<const double> truth, std::span<const double> forecast) {
    if (truth.size() != forecast.size() || truth.empty()) {
        fail_validation("smape: lengths differ or are zero");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double denom = std::abs(truth[i]) + std::abs(forecast[i]);
        if (denom > 0.0) {
            s += 2.0 * std::abs(truth[i] - forecast[i]) / denom;
        }
    }
    return s / static_cast<double>(truth.size());
}

std::optional<double> mase(std::span<const double> truth, std::span<const double> forecast,
                           std::span<const double> context, int season) {
    if (season < 1 || context.size() <= static_cast<std::size_t>(season)) {
        return std::nullopt;
    }
    const std::size_t m = static_cast<std::size_t>(season);
    double scale = 0.0;
    for (std::size_t t = m; t < context.size(); ++t) {
        scale += std::abs(context[t] - context[t - m]);
    }
    scale /= static_cast<double>(context.size() - m);
    if (!(scale >= kMaseScaleFloor)) {
        return std::nullopt;
    }
    return mae(truth, forecast) / scale;
}

RelativeAggregate relative_geomean(const std::map<std::string, std::optional<double>>& model,
                                   const std::map<std::string, std::optional<double>>& baseline) {
    RelativeAggregate out;
    double log_sum = 0.0;
    for (const auto& [name, value] : model) {
        auto it = baseline.find(name);
        if (it == baseline.end() || !value || !it->second || !(*it->second > 0.0)) {
            out.excluded.push_back(name);
            continue;
        }
        const double r = *value / *it->second;
        if (!std::isfinite(r) || !(r > 0.0)) {
            out.excluded.push_back(name);
            continue;
        }
        out.ratios[name] = r;
        log_sum += std::log(r);
    }
    for (const auto& [name, value] : baseline) {
        if (!model.contains(name)) {
            out.excluded.push_back(name);
        }
    }
    out.geomean = out.ratios.empty() ? std::numeric_limits<double>::quiet_NaN()
                                     : std::exp(log_sum / static_cast<double>(out.ratios.size()));
    return out;
}

namespace {

struct Mean {
    double sum = 0.0;
    std::size_t n = 0;
    void add(std::optional<double> v) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    std::optional<double> value() const {
        if (n == 0) {
            return std::nullopt;
        }
        return sum / static_cast<double>(n);
    }
};

std::optional<double> ratio(std::optional<double> a, std::optional<double> b) {
    if (!a || !b || !(*b > 0.0)) {
        return std::nullopt;
    }
    return *a / *b;
}

} // namespace

DatasetResult last_window_eval(const DatasetSpec& dataset, Forecaster& forecaster) {
    if (dataset.horizon < 1 || dataset.season < 1) {
        fail_validation("dataset '" + dataset.name + "': horizon and season must be at least 1");
    }
    forecaster.begin_dataset(dataset);
    DatasetResult r;
    r.name = dataset.name;
    Mean m_mase, m_smape, m_mae, b_mase, b_smape, b_mae;
    const std::size_t H = static_cast<std::size_t>(dataset.horizon);
    for (const auto& s : dataset.series) {
        if (s.size() <= H) {
            ++r.series_skipped;
            continue;
        }
        std::span<const double> all(s.values);
        auto context = all.first(all.size() - H);
        auto truth = all.last(H);
        const std::vector<double> fc = forecaster.forecast(context, dataset.horizon);
        if (fc.size() != H) {
            fail_runtime("forecaster '" + forecaster.name() + "' returned " + std::to_string(fc.size()) +
                         " points, expected " + std::to_string(H));
        }
        const SeasonalNaiveResult base = seasonal_naive(context, dataset.season, dataset.horizon);
        if (base.fell_back) {
            ++r.naive_fallbacks;
        }
        const int m = context.size() > static_cast<std::size_t>(dataset.season) ? dataset.season : 1;
        const auto fm = mase(truth, fc, context, m);
        if (!fm) {
            ++r.mase_missing;
        }
        m_mase.add(fm);
        m_smape.add(smape(truth, fc));
        m_mae.add(mae(truth, fc));
        b_mase.add(mase(truth, base.values, context, m));
        b_smape.add(smape(truth, base.values));
        b_mae.add(mae(truth, base.values));
        ++r.series_evaluated;
    }
    // A degenerate MASE scale on any series makes the dataset's MASE missing.
    const bool mase_ok = r.mase_missing == 0;
    r.model = {mase_ok ? m_mase.value() : std::nullopt, m_smape.value(), m_mae.value()};
    r.baseline = {mase_ok ? b_mase.value() : std::nullopt, b_smape.value(), b_mae.value()};
    r.relative_mase = ratio(r.model.mase, r.baseline.mase);
    r.relative_smape = ratio(r.model.smape, r.baseline.smape);
    return r;
}

std::vector<std::size_t> rolling_window_starts(std::size_t region_len, int context_len, int horizon, int stride) {
    if (context_len < 1 || horizon < 1 || stride < 1) {
        fail_validation("rolling windows: context, horizon and stride must be positive");
    }
    std::vector<std::size_t> starts;
    const std::size_t need = static_cast<std::size_t>(context_len) + static_cast<std::size_t>(horizon);
    for (std::size_t s = 0; s + need <= region_len; s += static_cast<std::size_t>(stride)) {
        starts.push_back(s);
    }
    return starts;
}

namespace {

struct TestSplit {
    std::size_t scaler_end; // statistics are fitted on [0, scaler_end)
    std::size_t test_start;
    std::size_t test_end;
};

TestSplit split_for(const std::string& name, std::size_t length, double test_fraction) {
    const bool hourly = name.find("ETTh") != std::string::npos;
    const bool minutely = name.find("ETTm") != std::string::npos;
    if (hourly || minutely) {
        const std::size_t month = (minutely ? 4u : 1u) * 30u * 24u;
        const std::size_t train_end = 12 * month;
        const std::size_t test_start = 16 * month;
        if (length > test_start) {
            return {train_end, test_start, std::min(length, 20 * month)};
        }
    }
    const auto test_len = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(length)));
    const std::size_t start = length - std::min(test_len, length);
    return {start, start, length};
}

} // namespace

std::size_t test_split_start(const std::string& dataset_name, std::size_t length, double test_fraction) {
    return split_for(dataset_name, length, test_fraction).test_start;
}

RollingResult rolling_eval(const DatasetSpec& dataset, Forecaster& forecaster, const RollingOptions& options) {
    forecaster.begin_dataset(dataset);
    RollingResult r;
    r.name = dataset.name;
    Mean avg_mae, avg_smape;
    for (int h : options.horizons) {
        const int stride = options.stride > 0 ? options.stride : h;
        RollingHorizonResult hr;
        hr.horizon = h;
        Mean w_mae, w_smape;
        for (const auto& s : dataset.series) {
            const TestSplit split = split_for(dataset.name, s.size(), options.test_fraction);
            if (split.scaler_end == 0) {
                continue;
            }
            const Scaled stats =
                standard_scale(std::span<const double>(s.values).first(split.scaler_end));
            const std::vector<double> normed = apply_scale(s.values, stats.mean, stats.std);
            const std::size_t begin =
                split.test_start >= static_cast<std::size_t>(options.context_len)
                    ? split.test_start - static_cast<std::size_t>(options.context_len)
                    : 0;
            std::span<const double> region = std::span<const double>(normed).subspan(begin, split.test_end - begin);
            for (std::size_t start : rolling_window_starts(region.size(), options.context_len, h, stride)) {
                auto context = region.subspan(start, static_cast<std::size_t>(options.context_len));
                auto truth = region.subspan(start + static_cast<std::size_t>(options.context_len),
                                            static_cast<std::size_t>(h));
                const auto fc = forecaster.forecast(context, h);
                if (fc.size() != truth.size()) {
                    fail_runtime("forecaster '" + forecaster.name() + "' returned the wrong number of points");
                }
                w_mae.add(mae(truth, fc));
                w_smape.add(smape(truth, fc));
                ++hr.windows;
            }
        }
        hr.mae = w_mae.value();
        hr.smape = w_smape.value();
        if (hr.windows == 0) {
            r.excluded_horizons.push_back(h);
        } else {
            avg_mae.add(hr.mae);
            avg_smape.add(hr.smape);
        }
        r.horizons.push_back(hr);
    }
    r.average_mae = avg_mae.value();
    r.average_smape = avg_smape.value();
    return r;
}

EvalReport evaluate_last_window(const std::vector<DatasetSpec>& datasets, Forecaster& forecaster) {
    EvalReport rep;
    rep.protocol = "last_window";
    rep.model_name = forecaster.name();
    std::map<std::string, std::optional<double>> mm, bm, ms, bs;
    for (const auto& d : datasets) {
        DatasetResult r = last_window_eval(d, forecaster);
        if (r.series_evaluated == 0) {
            rep.excluded_datasets.push_back(d.name);
        }
        mm[d.name] = r.model.mase;
        bm[d.name] = r.baseline.mase;
        ms[d.name] = r.model.smape;
        bs[d.name] = r.baseline.smape;
        rep.last_window.push_back(std::move(r));
    }
    rep.mase_aggregate = relative_geomean(mm, bm);
    rep.smape_aggregate = relative_geomean(ms, bs);
    return rep;
}

EvalReport evaluate_rolling(const std::vector<DatasetSpec>& datasets, Forecaster& forecaster,
                            const RollingOptions& options) {
    EvalReport rep;
    rep.protocol = "rolling";
    rep.model_name = forecaster.name();
    for (const auto& d : datasets) {
        RollingResult r = rolling_eval(d, forecaster, options);
        if (!r.average_mae) {
            rep.excluded_datasets.push_back(d.name);
        }
        rep.rolling.push_back(std::move(r));
    }
    return rep;
}

namespace {

nlohmann::json opt(std::optional<double> v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json opt(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

std::string cell(std::optional<double> v) {
    if (!v) {
        return "";
    }
    std::ostringstream s;
    s.precision(17);
    s << *v;
    return s.str();
}

nlohmann::json metrics_json(const MetricSet& m) {
    return {{"mase", opt(m.mase)}, {"smape", opt(m.smape)}, {"mae", opt(m.mae)}};
}

nlohmann::json aggregate_json(const RelativeAggregate& a) {
    return {{"geomean", opt(a.geomean)}, {"ratios", a.ratios}, {"excluded", a.excluded}};
}

} // namespace

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["protocol"] = protocol;
    j["model"] = model_name;
    j["excluded_datasets"] = excluded_datasets;
    if (protocol == "last_window") {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : last_window) {
            rows.push_back({{"dataset", r.name},
                            {"model", metrics_json(r.model)},
                            {"baseline", metrics_json(r.baseline)},
                            {"relative_mase", opt(r.relative_mase)},
                            {"relative_smape", opt(r.relative_smape)},
                            {"series_evaluated", r.series_evaluated},
                            {"series_skipped", r.series_skipped},
                            {"mase_missing", r.mase_missing},
                            {"naive_fallbacks", r.naive_fallbacks}});
        }
        j["datasets"] = rows;
        j["aggregate"] = {{"mase", aggregate_json(mase_aggregate)}, {"smape", aggregate_json(smape_aggregate)}};
    } else {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : rolling) {
            nlohmann::json hs = nlohmann::json::array();
            for (const auto& h : r.horizons) {
                hs.push_back({{"horizon", h.horizon}, {"windows", h.windows}, {"mae", opt(h.mae)},
                              {"smape", opt(h.smape)}});
            }
            rows.push_back({{"dataset", r.name},
                            {"horizons", hs},
                            {"average", {{"mae", opt(r.average_mae)}, {"smape", opt(r.average_smape)}}},
                            {"excluded_horizons", r.excluded_horizons}});
        }
        j["datasets"] = rows;
    }
    return j.dump(2);
}

std::string EvalReport::to_csv() const {
    std::ostringstream out;
    if (protocol == "last_window") {
        out << "dataset,series,skipped,model_mase,model_smape,model_mae,baseline_mase,baseline_smape,baseline_mae,"
               "relative_mase,relative_smape\n";
        for (const auto& r : last_window) {
            out << r.name << ',' << r.series_evaluated << ',' << r.series_skipped << ',' << cell(r.model.mase) << ','
                << cell(r.model.smape) << ',' << cell(r.model.mae) << ',' << cell(r.baseline.mase) << ','
                << cell(r.baseline.smape) << ',' << cell(r.baseline.mae) << ',' << cell(r.relative_mase) << ','
                << cell(r.relative_smape) << '\n';
        }
        auto gm = [](double v) { return std::isfinite(v) ? std::optional<double>(v) : std::nullopt; };
        out << "geomean,,,,,,,,," << cell(gm(mase_aggregate.geomean)) << ',' << cell(gm(smape_aggregate.geomean))
            << '\n';
    } else {
        out << "dataset,horizon,windows,mae,smape\n";
        for (const auto& r : rolling) {
            for (const auto& h : r.horizons) {
                out << r.name << ',' << h.horizon << ',' << h.windows << ',' << cell(h.mae) << ',' << cell(h.smape)
                    << '\n';
            }
            out << r.name << ",average,," << cell(r.average_mae) << ',' << cell(r.average_smape) << '\n';
        }
    }
    return out.str();
}

} // namespace tsfound
