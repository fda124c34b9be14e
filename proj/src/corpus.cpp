#include "tsfound/corpus.hpp"

#include "tsfound/error.hpp"
#include "tsfound/random.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace tsfound {

int worker_threads() {
    if (const char* env = std::getenv("TSFOUND_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) {
            return static_cast<int>(v);
        }
        fail_validation(std::string("TSFOUND_THREADS must be a positive integer, got '") + env + "'");
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers; the first exception wins.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

void count_kinds(const Kernel& k, std::map<std::string, long>& hist) {
    if (k.kind == KernelKind::Sum || k.kind == KernelKind::Product) {
        for (const auto& c : k.children) {
            count_kinds(c, hist);
        }
        return;
    }
    ++hist[k.describe()];
}

std::string padded_index(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%07zu", i);
    return buf;
}

constexpr int kKernelAttempts = 8;

} // namespace

SynthCorpus synthesize_corpus(const SynthConfig& spec, std::uint64_t seed, int threads) {
    if (spec.series <= 0) {
        fail_validation("no generators configured");
    }
    if (threads <= 0) {
        threads = worker_threads();
    }
    const std::size_t total = static_cast<std::size_t>(spec.series);
    const std::size_t n_mix = static_cast<std::size_t>(std::llround(spec.mixup_rate * static_cast<double>(total)));
    const std::size_t n_gp = total - n_mix;
    if (n_gp == 0) {
        fail_validation("no Gaussian-process series to mix; lower data.synth.mixup_rate");
    }
    const std::uint64_t corpus_seed = stream_seed(seed, "corpus");
    const std::size_t length = static_cast<std::size_t>(spec.length);

    SynthCorpus out;
    out.series.resize(total);
    std::vector<Kernel> kernels(n_gp);
    std::vector<int> attempts(n_gp, 0);
    parallel_for(n_gp, threads, [&](std::size_t i) {
        for (int a = 0;; ++a) {
            Rng krng = make_rng(corpus_seed, "kernel", i * kKernelAttempts + static_cast<std::size_t>(a));
            Kernel k = random_kernel(krng, length, spec.max_kernel_depth);
            try {
                TimeSeries s = gp_synth({k, length, stream_seed(corpus_seed, "gp", i)});
                s.id = "gp-" + padded_index(i);
                s.freq = "H";
                out.series[i] = std::move(s);
                kernels[i] = std::move(k);
                attempts[i] = a + 1;
                return;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::Runtime || a + 1 == kKernelAttempts) {
                    throw;
                }
            }
        }
    });
    parallel_for(n_mix, threads, [&](std::size_t j) {
        Rng rng = make_rng(corpus_seed, "mixup", j);
        std::uniform_int_distribution<int> count(1, spec.max_sources);
        std::uniform_int_distribution<std::size_t> pick(0, n_gp - 1);
        std::gamma_distribution<double> gamma(1.0, 1.0);
        const int k = count(rng);
        std::vector<TimeSeries> sources;
        std::vector<double> w;
        double sum = 0.0;
        for (int s = 0; s < k; ++s) {
            sources.push_back(out.series[pick(rng)]);
            w.push_back(gamma(rng) + 1e-12);
            sum += w.back();
        }
        for (double& x : w) {
            x /= sum;
        }
        // Renormalise so the weights sum to one to the last bit the check needs.
        double acc = 0.0;
        for (std::size_t s = 0; s + 1 < w.size(); ++s) {
            acc += w[s];
        }
        w.back() = 1.0 - acc;
        TimeSeries m = ts_mixup(sources, w, length);
        m.id = "mix-" + padded_index(j);
        m.freq = "H";
        out.series[n_gp + j] = std::move(m);
    });

    std::map<std::string, long> kinds;
    std::map<std::string, long> structures;
    long retries = 0;
    for (std::size_t i = 0; i < n_gp; ++i) {
        count_kinds(kernels[i], kinds);
        ++structures[kernels[i].describe()];
        retries += attempts[i] - 1;
    }
    out.manifest = {{"series", total},
                    {"gp_series", n_gp},
                    {"mixup_series", n_mix},
                    {"length", spec.length},
                    {"mixup_rate", spec.mixup_rate},
                    {"max_sources", spec.max_sources},
                    {"max_kernel_depth", spec.max_kernel_depth},
                    {"seed", seed},
                    {"corpus_seed", corpus_seed},
                    {"streams", {"kernel", "gp", "mixup"}},
                    {"kernel_retries", retries},
                    {"kernel_histogram", {{"base", kinds}, {"structure", structures}}}};
    return out;
}

std::string write_corpus(const SynthCorpus& corpus, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        fail_runtime("cannot create output directory '" + dir + "': " + ec.message());
    }
    const std::string path = (fs::path(dir) / "corpus.jsonl").string();
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out) {
            fail_runtime("cannot write '" + path + "'");
        }
        write_jsonl(out, corpus.series);
        if (!out) {
            fail_runtime("short write to '" + path + "'");
        }
    }
    const std::string mpath = (fs::path(dir) / "manifest.json").string();
    std::ofstream m(mpath, std::ios::trunc);
    if (!m) {
        fail_runtime("cannot write '" + mpath + "'");
    }
    m << corpus.manifest.dump(2) << '\n';
    return path;
}

} // namespace tsfound
