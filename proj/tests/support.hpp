#pragma once

#include "tsfound/model.hpp"
#include "tsfound/random.hpp"
#include "tsfound/series.hpp"
#include "tsfound/training.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace tsfound::testing {

// The small configuration used by gradient checks.
inline ModelConfig tiny_config() {
    ModelConfig c;
    c.patch_sizes = {2, 4};
    c.output_patch = 4;
    c.context_len = 16;
    c.d_model = 16;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.heads = 2;
    c.d_ff = 64;
    c.quantiles = {0.1, 0.5, 0.9};
    return c;
}

inline std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = u(rng);
    }
    return v;
}

inline TimeSeries sine_series(std::size_t n, double period, double offset = 0.0, double amp = 1.0,
                              std::string id = "sine") {
    TimeSeries s;
    s.id = std::move(id);
    s.freq = "H";
    for (std::size_t i = 0; i < n; ++i) {
        s.values.push_back(offset + amp * std::sin(2.0 * M_PI * static_cast<double>(i) / period));
    }
    return s;
}

// Random windows of a random-walk series, assembled for teacher forcing.
inline TeacherForcedBatch random_batch(const ModelConfig& cfg, int batch, int horizon, std::uint64_t seed,
                                       bool with_padding = true) {
    Rng rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<ScaledWindow> windows;
    for (int b = 0; b < batch; ++b) {
        TimeSeries s;
        s.id = "s" + std::to_string(b);
        double x = 0.0;
        for (int i = 0; i < cfg.context_len + horizon + 8; ++i) {
            x += n(rng);
            s.values.push_back(x);
        }
        // first sample gets a short context so padding is exercised
        const std::size_t split = (with_padding && b == 0) ? static_cast<std::size_t>(cfg.context_len / 2 + 1)
                                                           : static_cast<std::size_t>(cfg.context_len + 4);
        windows.push_back(make_window(s, split, static_cast<std::size_t>(cfg.context_len),
                                      static_cast<std::size_t>(horizon)));
    }
    return assemble_teacher_forcing(windows, cfg, horizon);
}

} // namespace tsfound::testing
