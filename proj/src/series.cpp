#include "tsfound/series.hpp"

#include "tsfound/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace tsfound {

void validate_series(const TimeSeries& s) {
    if (s.values.empty()) {
        fail_validation("series '" + s.id + "' is empty");
    }
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        if (!std::isfinite(s.values[i])) {
            fail_validation("series '" + s.id + "' has a non-finite value at index " + std::to_string(i));
        }
    }
    if (!s.timestamps.empty() && s.timestamps.size() != s.values.size()) {
        fail_validation("series '" + s.id + "' has mismatched timestamp count");
    }
}

Scaled standard_scale(std::span<const double> values, std::span<const std::uint8_t> mask) {
    if (values.size() != mask.size()) {
        fail_validation("standard_scale: values and mask differ in length");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (mask[i]) {
            sum += values[i];
            ++n;
        }
    }
    if (n == 0) {
        fail_validation("empty context");
    }
    Scaled out;
    out.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (mask[i]) {
            const double d = values[i] - out.mean;
            ss += d * d;
        }
    }
    const double raw = std::sqrt(ss / static_cast<double>(n));
    out.guarded = raw < kStdFloor;
    out.std = std::max(raw, kStdFloor);
    out.values.assign(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (mask[i]) {
            out.values[i] = (values[i] - out.mean) / out.std;
        }
    }
    return out;
}

Scaled standard_scale(std::span<const double> values) {
    std::vector<std::uint8_t> mask(values.size(), 1);
    return standard_scale(values, mask);
}

std::vector<double> inverse_scale(std::span<const double> scaled, double mean, double std) {
    std::vector<double> out(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        out[i] = scaled[i] * std + mean;
    }
    return out;
}

std::vector<double> apply_scale(std::span<const double> values, double mean, double std) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = (values[i] - mean) / std;
    }
    return out;
}

Padded pad_left(std::span<const double> values, std::size_t target_len) {
    if (values.size() > target_len) {
        fail_validation("pad_left: sequence of length " + std::to_string(values.size()) +
                        " exceeds target length " + std::to_string(target_len));
    }
    const std::size_t pad = target_len - values.size();
    Padded out;
    out.values.assign(pad, 0.0);
    out.values.insert(out.values.end(), values.begin(), values.end());
    out.mask.assign(pad, 0);
    out.mask.resize(target_len, 1);
    return out;
}

Padded fit_left(std::span<const double> values, std::size_t target_len) {
    if (values.size() > target_len) {
        values = values.subspan(values.size() - target_len);
    }
    return pad_left(values, target_len);
}

ScaledWindow make_window(const TimeSeries& s, std::size_t split, std::size_t context_len,
                         std::size_t horizon) {
    if (split < 1 || split + horizon > s.values.size()) {
        fail_validation("make_window: split " + std::to_string(split) + " not admissible for series '" + s.id +
                        "' of length " + std::to_string(s.values.size()));
    }
    std::span<const double> all(s.values);
    const Padded ctx = fit_left(all.first(split), context_len);
    const Scaled sc = standard_scale(ctx.values, ctx.mask);
    ScaledWindow w;
    w.context = sc.values;
    w.mask = ctx.mask;
    w.mean = sc.mean;
    w.std = sc.std;
    w.future = apply_scale(all.subspan(split, horizon), sc.mean, sc.std);
    w.series_id = s.id;
    return w;
}

WindowSample sample_window(const TimeSeries& s, std::size_t context_len, std::size_t horizon, Rng& rng,
                           std::size_t min_context) {
    WindowSample out;
    if (s.values.size() < horizon + 1) {
        out.skip_reason = "series '" + s.id + "' has length " + std::to_string(s.values.size()) +
                          ", needs at least " + std::to_string(horizon + 1);
        return out;
    }
    const std::size_t last = s.values.size() - horizon;
    std::uniform_int_distribution<std::size_t> pick(std::clamp<std::size_t>(min_context, 1, last), last);
    out.window = make_window(s, pick(rng), context_len, horizon);
    return out;
}

// ---------------------------------------------------------------------------

Kernel Kernel::rbf(double length_scale, double amplitude) {
    Kernel k;
    k.kind = KernelKind::Rbf;
    k.length_scale = length_scale;
    k.amplitude = amplitude;
    return k;
}

Kernel Kernel::periodic(double period, double length_scale, double amplitude) {
    Kernel k;
    k.kind = KernelKind::Periodic;
    k.period = period;
    k.length_scale = length_scale;
    k.amplitude = amplitude;
    return k;
}

Kernel Kernel::linear(double length_scale, double amplitude, double offset) {
    Kernel k;
    k.kind = KernelKind::Linear;
    k.length_scale = length_scale;
    k.amplitude = amplitude;
    k.offset = offset;
    return k;
}

Kernel Kernel::white_noise(double amplitude) {
    Kernel k;
    k.kind = KernelKind::WhiteNoise;
    k.amplitude = amplitude;
    return k;
}

Kernel Kernel::sum(Kernel a, Kernel b) {
    Kernel k;
    k.kind = KernelKind::Sum;
    k.children = {std::move(a), std::move(b)};
    return k;
}

Kernel Kernel::product(Kernel a, Kernel b) {
    Kernel k;
    k.kind = KernelKind::Product;
    k.children = {std::move(a), std::move(b)};
    return k;
}

int Kernel::depth() const {
    int d = 0;
    for (const auto& c : children) {
        d = std::max(d, c.depth());
    }
    return d + 1;
}

double Kernel::operator()(double x, double y) const {
    const double a2 = amplitude * amplitude;
    switch (kind) {
    case KernelKind::Rbf: {
        const double r = (x - y) / length_scale;
        return a2 * std::exp(-0.5 * r * r);
    }
    case KernelKind::Periodic: {
        const double s = std::sin(std::numbers::pi * std::abs(x - y) / period) / length_scale;
        return a2 * std::exp(-2.0 * s * s);
    }
    case KernelKind::Linear:
        return a2 * (x - offset) * (y - offset) / (length_scale * length_scale);
    case KernelKind::WhiteNoise:
        return x == y ? a2 : 0.0;
    case KernelKind::Sum:
        return children[0](x, y) + children[1](x, y);
    case KernelKind::Product:
        return children[0](x, y) * children[1](x, y);
    }
    return 0.0;
}

std::string Kernel::describe() const {
    switch (kind) {
    case KernelKind::Rbf:
        return "rbf";
    case KernelKind::Periodic:
        return "periodic";
    case KernelKind::Linear:
        return "linear";
    case KernelKind::WhiteNoise:
        return "white_noise";
    case KernelKind::Sum:
        return "(" + children[0].describe() + "+" + children[1].describe() + ")";
    case KernelKind::Product:
        return "(" + children[0].describe() + "*" + children[1].describe() + ")";
    }
    return "?";
}

void validate_kernel(const Kernel& k) {
    if (k.depth() > 3) {
        fail_validation("kernel composite depth " + std::to_string(k.depth()) + " exceeds 3");
    }
    switch (k.kind) {
    case KernelKind::Sum:
    case KernelKind::Product:
        if (k.children.size() != 2) {
            fail_validation("composite kernel needs exactly two children");
        }
        for (const auto& c : k.children) {
            validate_kernel(c);
        }
        return;
    case KernelKind::Periodic:
        if (!(k.period > 0.0)) {
            fail_validation("periodic kernel period must be positive");
        }
        [[fallthrough]];
    case KernelKind::Rbf:
    case KernelKind::Linear:
        if (!(k.length_scale > 0.0)) {
            fail_validation("kernel length scale must be positive");
        }
        break;
    case KernelKind::WhiteNoise:
        break;
    }
    if (!k.children.empty()) {
        fail_validation("base kernel cannot have children");
    }
    if (!std::isfinite(k.amplitude)) {
        fail_validation("kernel amplitude must be finite");
    }
}

TimeSeries gp_synth(const GpKernelSpec& spec) {
    validate_kernel(spec.kernel);
    if (spec.length == 0) {
        fail_validation("gp_synth: length must be positive");
    }
    const auto n = static_cast<Eigen::Index>(spec.length);
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = spec.kernel(static_cast<double>(i), static_cast<double>(j));
            cov(i, j) = v;
            cov(j, i) = v;
        }
    }
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool ok = false;
    for (double jitter = 1e-8; jitter <= 1e-4 * 1.0001; jitter *= 10.0) {
        Eigen::MatrixXd m = cov;
        m.diagonal().array() += jitter;
        llt.compute(m);
        if (llt.info() == Eigen::Success) {
            ok = true;
            break;
        }
    }
    if (!ok) {
        fail_runtime("gp_synth: covariance of kernel " + spec.kernel.describe() +
                     " is not positive definite with jitter up to 1e-4");
    }
    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        z(i) = normal(rng);
    }
    const Eigen::VectorXd x = llt.matrixL() * z;
    TimeSeries out;
    out.id = "gp-" + std::to_string(spec.seed);
    out.values.assign(x.data(), x.data() + n);
    return out;
}

Kernel random_kernel(Rng& rng, std::size_t length, int max_depth) {
    const double len = static_cast<double>(length);
    auto pick = [&rng](auto const& options) {
        std::uniform_int_distribution<std::size_t> u(0, std::size(options) - 1);
        return options[u(rng)];
    };
    auto base = [&]() -> Kernel {
        constexpr double periods[] = {4, 7, 12, 14, 24, 30, 48, 52, 60, 96, 168};
        constexpr double rbf_scales[] = {2, 5, 10, 25, 50, 100};
        constexpr double per_scales[] = {0.5, 1.0, 2.0};
        constexpr double noise[] = {0.05, 0.1, 0.2};
        std::uniform_int_distribution<int> kind(0, 9);
        const int k = kind(rng);
        if (k < 5) {
            double p = pick(periods);
            while (p > len / 2.0 && p > 4) {
                p = pick(periods);
            }
            return Kernel::periodic(p, pick(per_scales));
        }
        if (k < 7) {
            return Kernel::rbf(pick(rbf_scales));
        }
        if (k < 9) {
            std::uniform_real_distribution<double> off(0.0, len);
            return Kernel::linear(len, 1.0, off(rng));
        }
        return Kernel::white_noise(pick(noise));
    };
    std::uniform_int_distribution<int> count(1, std::max(1, max_depth));
    const int n = count(rng);
    Kernel k = base();
    std::bernoulli_distribution use_sum(0.5);
    for (int i = 1; i < n; ++i) {
        k = use_sum(rng) ? Kernel::sum(std::move(k), base()) : Kernel::product(std::move(k), base());
    }
    return k;
}

TimeSeries ts_mixup(std::span<const TimeSeries> series, std::span<const double> weights,
                    std::size_t target_len) {
    if (series.empty() || series.size() > 3) {
        fail_validation("ts_mixup: needs between 1 and 3 series");
    }
    if (weights.size() != series.size()) {
        fail_validation("ts_mixup: one weight per series required");
    }
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) {
            fail_validation("ts_mixup: weights must be nonnegative");
        }
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        fail_validation("ts_mixup: weights must sum to 1");
    }
    TimeSeries out;
    out.values.assign(target_len, 0.0);
    out.freq = series.front().freq;
    std::string id = "mix";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const Scaled sc = standard_scale(series[s].values);
        const Padded p = fit_left(sc.values, target_len);
        for (std::size_t i = 0; i < target_len; ++i) {
            out.values[i] += weights[s] * p.values[i];
        }
        id += ":" + series[s].id;
    }
    out.id = id;
    return out;
}

// ---------------------------------------------------------------------------

std::vector<TimeSeries> read_jsonl(std::istream& in) {
    std::vector<TimeSeries> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail_validation("line " + std::to_string(lineno) + ": " + e.what());
        }
        const char* key = j.is_object() && !j.contains("target") && j.contains("values") ? "values" : "target";
        if (!j.is_object() || !j.contains(key) || !j[key].is_array()) {
            fail_validation("line " + std::to_string(lineno) + ": expected an object with a 'target' array");
        }
        TimeSeries s;
        s.id = j.value("id", std::to_string(out.size()));
        s.freq = j.value("freq", "");
        if (j.contains("timestamps")) {
            if (!j["timestamps"].is_array() || j["timestamps"].size() != j[key].size()) {
                fail_validation("line " + std::to_string(lineno) + ": 'timestamps' must match 'values' in length");
            }
            for (const auto& t : j["timestamps"]) {
                s.timestamps.push_back(t.is_string() ? t.get<std::string>() : t.dump());
            }
        }
        for (const auto& v : j[key]) {
            if (!v.is_number()) {
                fail_validation("line " + std::to_string(lineno) + ": series '" + s.id +
                                "' has a missing or non-numeric value");
            }
            s.values.push_back(v.get<double>());
        }
        validate_series(s);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<TimeSeries> read_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail_runtime("cannot open " + path);
    }
    return read_jsonl(in);
}

void write_jsonl(std::ostream& out, std::span<const TimeSeries> series) {
    for (const auto& s : series) {
        nlohmann::ordered_json j;
        j["id"] = s.id;
        j["freq"] = s.freq;
        j["target"] = s.values;
        if (!s.timestamps.empty()) {
            j["timestamps"] = s.timestamps;
        }
        out << j.dump() << '\n';
    }
}

std::vector<TimeSeries> read_csv_long(std::istream& in, const std::string& freq) {
    std::string line;
    if (!std::getline(in, line)) {
        fail_validation("csv: missing header");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    if (line != "series_id,timestamp,value") {
        fail_validation("csv: header must be 'series_id,timestamp,value'");
    }
    std::vector<TimeSeries> out;
    std::map<std::string, std::size_t> index;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos) {
            fail_validation("csv line " + std::to_string(lineno) + ": expected three fields");
        }
        const std::string id = line.substr(0, c1);
        const std::string ts = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string raw = line.substr(c2 + 1);
        char* end = nullptr;
        const double v = std::strtod(raw.c_str(), &end);
        if (raw.empty() || end != raw.c_str() + raw.size() || !std::isfinite(v)) {
            fail_validation("csv line " + std::to_string(lineno) + ": value '" + raw +
                            "' is missing or not a finite number");
        }
        auto [it, inserted] = index.try_emplace(id, out.size());
        if (inserted) {
            TimeSeries s;
            s.id = id;
            s.freq = freq;
            out.push_back(std::move(s));
        }
        out[it->second].values.push_back(v);
        out[it->second].timestamps.push_back(ts);
    }
    for (const auto& s : out) {
        validate_series(s);
    }
    return out;
}

std::vector<TimeSeries> read_csv_long_file(const std::string& path, const std::string& freq) {
    std::ifstream in(path);
    if (!in) {
        fail_runtime("cannot open " + path);
    }
    return read_csv_long(in, freq);
}

std::vector<TimeSeries> read_series_file(const std::string& path) {
    auto ends_with = [&path](std::string_view suffix) {
        return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with(".csv")) {
        return read_csv_long_file(path);
    }
    if (ends_with(".jsonl") || ends_with(".json")) {
        return read_jsonl_file(path);
    }
    fail_validation("unrecognised series file extension: " + path);
}

} // namespace tsfound
