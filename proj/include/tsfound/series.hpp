#pragma once

#include "tsfound/random.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tsfound {

struct TimeSeries {
    std::string id;
    std::string freq;
    std::vector<double> values;
    std::vector<std::string> timestamps; // empty when not supplied

    std::size_t size() const { return values.size(); }
};

// Throws Validation if the series is empty or holds a non-finite value.
void validate_series(const TimeSeries& s);

/// Result of standard scaling over the valid (mask = 1) positions.
struct Scaled {
    std::vector<double> values; // padding positions are 0
    double mean = 0.0;
    double std = 1.0;           // population std, after the guard
    bool guarded = false;       // true when the raw std fell below kStdFloor
};

inline constexpr double kStdFloor = 1e-6;

Scaled standard_scale(std::span<const double> values, std::span<const std::uint8_t> mask);
Scaled standard_scale(std::span<const double> values);
std::vector<double> inverse_scale(std::span<const double> scaled, double mean, double std);
// Applies (x - mean) / std with externally supplied statistics.
std::vector<double> apply_scale(std::span<const double> values, double mean, double std);

struct Padded {
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
};

/// Left-pads with zeros (mask 0) to target_len. Throws if values is longer.
Padded pad_left(std::span<const double> values, std::size_t target_len);

/// Most recent target_len points of values, left-padded when shorter.
Padded fit_left(std::span<const double> values, std::size_t target_len);

struct ScaledWindow {
    std::vector<double> context;     // length C, scaled, padding = 0
    std::vector<double> future;      // length H, scaled with context stats
    std::vector<std::uint8_t> mask;  // length C, 0...0 1...1
    double mean = 0.0;
    double std = 1.0;
    std::string series_id;
};

/// Window whose future starts at index `split` (context = values[.. split)).
/// Requires 1 <= split and split + horizon <= series length.
ScaledWindow make_window(const TimeSeries& s, std::size_t split, std::size_t context_len,
                         std::size_t horizon);

struct WindowSample {
    std::optional<ScaledWindow> window;
    std::string skip_reason; // set when window is empty
};

/// Uniformly samples a split point in [min(min_context, len - H), len - H] and builds its window.
/// Series too short for min_context real points still yield windows with shorter contexts.
WindowSample sample_window(const TimeSeries& s, std::size_t context_len, std::size_t horizon, Rng& rng,
                           std::size_t min_context = 1);

// ---------------------------------------------------------------------------
// Gaussian-process synthesis

enum class KernelKind { Rbf, Periodic, Linear, WhiteNoise, Sum, Product };

struct Kernel {
    KernelKind kind = KernelKind::Rbf;
    double length_scale = 1.0; // RBF, periodic; normaliser for linear
    double period = 1.0;       // periodic
    double amplitude = 1.0;
    double offset = 0.0;       // linear
    std::vector<Kernel> children; // Sum, Product: exactly two

    static Kernel rbf(double length_scale, double amplitude = 1.0);
    static Kernel periodic(double period, double length_scale = 1.0, double amplitude = 1.0);
    static Kernel linear(double length_scale, double amplitude = 1.0, double offset = 0.0);
    static Kernel white_noise(double amplitude = 1.0);
    static Kernel sum(Kernel a, Kernel b);
    static Kernel product(Kernel a, Kernel b);

    int depth() const;
    double operator()(double x, double y) const;
    std::string describe() const;
};

struct GpKernelSpec {
    Kernel kernel;
    std::size_t length = 0;
    std::uint64_t seed = 0;
};

void validate_kernel(const Kernel& k);

/// One sample path of the GP on the grid t = 0..length-1. Pure in `spec`.
TimeSeries gp_synth(const GpKernelSpec& spec);

/// Random composite kernel drawn from a small bank of base kernels.
Kernel random_kernel(Rng& rng, std::size_t length, int max_depth = 3);

/// Pointwise convex combination of individually standard-scaled series, each
/// cut to its most recent target_len points (left-padded if shorter).
TimeSeries ts_mixup(std::span<const TimeSeries> series, std::span<const double> weights,
                    std::size_t target_len);

// ---------------------------------------------------------------------------
// Ingestion / emission

std::vector<TimeSeries> read_jsonl(std::istream& in);
std::vector<TimeSeries> read_jsonl_file(const std::string& path);
void write_jsonl(std::ostream& out, std::span<const TimeSeries> series);

/// Long-format CSV with header `series_id,timestamp,value`; rows of one series
/// keep file order.
std::vector<TimeSeries> read_csv_long(std::istream& in, const std::string& freq = "");
std::vector<TimeSeries> read_csv_long_file(const std::string& path, const std::string& freq = "");

/// Dispatches on extension: .jsonl / .json -> JSON lines, .csv -> long CSV.
std::vector<TimeSeries> read_series_file(const std::string& path);

} // namespace tsfound
