#pragma once

#include "tsfound/config.hpp"
#include "tsfound/series.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace tsfound {

/// Worker count from TSFOUND_THREADS (default: hardware concurrency, at least 1).
int worker_threads();

struct SynthCorpus {
    std::vector<TimeSeries> series;
    nlohmann::json manifest; // counts, seeds, kernel histogram
};

/// Gaussian-process series followed by mixup combinations of them. Every
/// series is a pure function of (seed, index), so the output does not depend
/// on the worker count. Throws Validation "no generators configured" when the
/// spec asks for nothing.
SynthCorpus synthesize_corpus(const SynthConfig& spec, std::uint64_t seed, int threads = 0);

/// Writes corpus.jsonl and manifest.json under dir; returns the corpus path.
std::string write_corpus(const SynthCorpus& corpus, const std::string& dir);

} // namespace tsfound
