// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            run all criteria
//   acceptance 1 3 6      run a subset

#include "support.hpp"
#include "tsfound/backbone.hpp"
#include "tsfound/checkpoint.hpp"
#include "tsfound/config.hpp"
#include "tsfound/corpus.hpp"
#include "tsfound/eval.hpp"
#include "tsfound/forecast_head.hpp"
#include "tsfound/inference.hpp"
#include "tsfound/patch_embed.hpp"
#include "tsfound/pipeline.hpp"
#include "tsfound/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

using namespace tsfound;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tsfound-acceptance-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------
// 1. gradients against central differences in double precision

Outcome gradient_check() {
    ModelConfig cfg = testing::tiny_config();
    Model<double> model(cfg);
    model.initialize(2024);
    // nonzero norm gains and biases so every parameter has a visible gradient
    Rng rng(99);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (auto& p : model.values()) {
        for (auto& x : p) {
            x += 0.05 * u(rng);
        }
    }
    const TeacherForcedBatch batch = testing::random_batch(cfg, 3, 8, 7);
    const auto analytic = loss_and_grad(model, batch).grads;
    auto loss = [&] {
        Graph<double> g = bind(model, false);
        return g.tape.scalar(training_loss(g, batch).total);
    };
    // five-point central stencil; relative error floored at 1e-6 where both values are ~0
    const double h = 1e-3;
    double worst = 0.0;
    std::string worst_name;
    std::size_t checked = 0;
    for (std::size_t i = 0; i < model.values().size(); ++i) {
        auto& p = model.values()[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double keep = p[j];
            auto at = [&](double x) {
                p[j] = x;
                return loss();
            };
            const double d1 = at(keep + h) - at(keep - h);
            const double d2 = at(keep + 2 * h) - at(keep - 2 * h);
            p[j] = keep;
            const double fd = (8 * d1 - d2) / (12 * h);
            const double a = analytic[i][j];
            const double err = std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), 1e-6});
            if (err > worst) {
                worst = err;
                worst_name = model.layout().specs[i].name;
            }
            ++checked;
        }
    }
    return {worst < 1e-5, std::to_string(checked) + " parameters, max relative error " + fmt("%.2e", worst) +
                              " (" + worst_name + ")"};
}

// ---------------------------------------------------------------------------
// 2. metric and loss oracles

long double oracle_mse(const std::vector<double>& y, const std::vector<double>& f) {
    long double s = 0;
    for (std::size_t i = y.size(); i-- > 0;) {
        s += (static_cast<long double>(y[i]) - f[i]) * (static_cast<long double>(y[i]) - f[i]);
    }
    return s / y.size();
}

long double oracle_pinball(const std::vector<double>& y, const std::vector<double>& f, const std::vector<double>& q) {
    long double s = 0;
    for (std::size_t c = 0; c < q.size(); ++c) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            const long double d = static_cast<long double>(y[i]) - f[i * q.size() + c];
            s += std::max(q[c] * d, (q[c] - 1) * d);
        }
    }
    return s / y.size();
}

long double oracle_smape(const std::vector<double>& y, const std::vector<double>& f) {
    long double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const long double den = std::fabs(static_cast<long double>(y[i])) + std::fabs(static_cast<long double>(f[i]));
        s += den == 0 ? 0 : 2 * std::fabs(static_cast<long double>(y[i]) - f[i]) / den;
    }
    return s / y.size();
}

std::optional<long double> oracle_mase(const std::vector<double>& y, const std::vector<double>& f,
                                       const std::vector<double>& ctx, int m) {
    if (ctx.size() <= static_cast<std::size_t>(m)) {
        return std::nullopt;
    }
    long double scale = 0;
    std::size_t n = 0;
    for (std::size_t t = 0; t + m < ctx.size(); ++t, ++n) {
        scale += std::fabs(static_cast<long double>(ctx[t + m]) - ctx[t]);
    }
    scale /= n;
    if (scale < 1e-9L) {
        return std::nullopt;
    }
    long double err = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        err += std::fabs(static_cast<long double>(y[i]) - f[i]);
    }
    return err / y.size() / scale;
}

Outcome oracles() {
    Rng rng(123);
    std::uniform_int_distribution<int> len(1, 60), season(1, 12);
    std::uniform_real_distribution<double> u(-50, 50), uq(0.01, 0.99), upos(0.05, 5);
    double worst = 0.0;
    auto rel = [](long double a, double b) {
        return static_cast<double>(std::fabs(a - b) / std::max(1.0L, std::fabs(a)));
    };
    auto draw = [&](int n) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) {
            x = u(rng);
        }
        return v;
    };
    int mase_missing_agree = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int H = len(rng);
        auto y = draw(H), f = draw(H);
        worst = std::max(worst, rel(oracle_mse(y, f), mse_loss(y, f)));
        worst = std::max(worst, rel(oracle_smape(y, f), smape(y, f)));

        std::vector<double> q(static_cast<std::size_t>(1 + trial % 9));
        for (auto& x : q) {
            x = uq(rng);
        }
        auto fq = draw(H * static_cast<int>(q.size()));
        worst = std::max(worst, rel(oracle_pinball(y, fq, q), quantile_loss(y, fq, q)));

        const int m = season(rng);
        auto ctx = draw(len(rng));
        if (trial % 10 == 0) {
            std::fill(ctx.begin(), ctx.end(), 3.0); // degenerate scale
        }
        auto a = oracle_mase(y, f, ctx, m);
        auto b = mase(y, f, ctx, m);
        if (a.has_value() != b.has_value()) {
            return {false, "mase availability differs at trial " + std::to_string(trial)};
        }
        if (a) {
            worst = std::max(worst, rel(*a, *b));
        } else {
            ++mase_missing_agree;
        }

        std::map<std::string, std::optional<double>> model, base;
        long double log_sum = 0;
        int n = 0;
        for (int d = 0; d < 1 + trial % 7; ++d) {
            const std::string name = "d" + std::to_string(d);
            model[name] = upos(rng);
            base[name] = upos(rng);
            if (d == 3) {
                model[name] = std::nullopt;
                continue;
            }
            log_sum += std::log(static_cast<long double>(*model[name]) / *base[name]);
            ++n;
        }
        const long double expect = std::exp(log_sum / n);
        worst = std::max(worst, rel(expect, relative_geomean(model, base).geomean));
    }
    return {worst <= 1e-12, "1000 instances x 5 metrics, max relative deviation " + fmt("%.2e", worst) + ", " +
                                std::to_string(mase_missing_agree) + " degenerate MASE cases agreed"};
}

// ---------------------------------------------------------------------------
// 3. structural invariants

Outcome invariants() {
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
        if (!ok) {
            failures.push_back(what);
        }
    };
    const ModelConfig cfg = testing::tiny_config();
    Model<double> m(cfg);
    m.initialize(77);
    const int d = cfg.d_model;

    // decoder causality
    {
        const int T = 6, n = 8, B = 2;
        auto tokens = testing::random_values(static_cast<std::size_t>(B * T * d), 1);
        auto memory = testing::random_values(static_cast<std::size_t>(B * n * d), 2);
        std::vector<std::uint8_t> mm(static_cast<std::size_t>(B * n), 1);
        auto run = [&](const std::vector<double>& tok) {
            Graph<double> g = bind(m, false);
            auto out = decode(g, g.tape.constant(B * T, d, tok), B, T, g.tape.constant(B * n, d, memory), mm, n);
            auto v = g.tape.value(out);
            return std::vector<double>(v.begin(), v.end());
        };
        const auto base = run(tokens);
        bool exact = true;
        for (int t = 0; t + 1 < T; ++t) {
            auto tok = tokens;
            for (int b = 0; b < B; ++b) {
                for (int c = 0; c < d; ++c) {
                    tok[static_cast<std::size_t>((b * T + t + 1) * d + c)] += 1.0;
                }
            }
            const auto out = run(tok);
            for (int b = 0; b < B; ++b) {
                for (int s = 0; s <= t * d + d - 1; ++s) {
                    const auto i = static_cast<std::size_t>(b * T * d + s);
                    exact = exact && out[i] == base[i];
                }
            }
        }
        expect(exact, "decoder causality");
    }
    // encoder padding invariance
    {
        const int n = cfg.context_len / cfg.finest_patch(), B = 2;
        auto fused = testing::random_values(static_cast<std::size_t>(B * n * d), 3);
        std::vector<std::uint8_t> pm(static_cast<std::size_t>(B * n), 1);
        std::fill(pm.begin(), pm.begin() + 4, 0);
        auto run = [&](const std::vector<double>& x) {
            Graph<double> g = bind(m, false);
            auto v = g.tape.value(encode(g, g.tape.constant(B * n, d, x), pm, B, n));
            return std::vector<double>(v.begin(), v.end());
        };
        const auto base = run(fused);
        auto moved = fused;
        for (int i = 0; i < 4 * d; ++i) {
            moved[static_cast<std::size_t>(i)] = 50.0 * std::sin(i);
        }
        const auto out = run(moved);
        double worst = 0;
        for (int r = 0; r < B * n; ++r) {
            if (pm[static_cast<std::size_t>(r)]) {
                for (int c = 0; c < d; ++c) {
                    const auto i = static_cast<std::size_t>(r * d + c);
                    worst = std::max(worst, std::abs(out[i] - base[i]));
                }
            }
        }
        expect(worst <= 1e-6, "encoder padding invariance (" + fmt("%.2e", worst) + ")");
    }
    // replication indices: position j (1-based) takes source ceil(j * N_k / N_1)
    for (int n1 : {4, 16, 32, 64}) {
        for (int nk = 1; nk <= n1; nk *= 2) {
            const auto idx = upsample_indices(nk, n1);
            for (int j = 1; j <= n1; ++j) {
                const int want = (j * nk + n1 - 1) / n1;
                expect(idx[static_cast<std::size_t>(j - 1)] + 1 == want, "replication index");
            }
        }
    }
    // fusion linearity: fuse(a + b) == fuse(a) + fuse(b)
    {
        const int n = 4, w = 5;
        std::vector<std::uint8_t> mask(8, 1);
        auto groups = [&](std::uint64_t s) {
            std::vector<std::vector<std::vector<double>>> g;
            for (int k = 0; k < 2; ++k) {
                std::vector<std::vector<double>> gk;
                for (int j = 0; j < n >> k; ++j) {
                    gk.push_back(testing::random_values(w, s * 100 + static_cast<std::uint64_t>(k * 10 + j)));
                }
                g.push_back(gk);
            }
            return g;
        };
        auto a = groups(1), b = groups(2), sum = a;
        for (std::size_t k = 0; k < a.size(); ++k) {
            for (std::size_t j = 0; j < a[k].size(); ++j) {
                for (int c = 0; c < w; ++c) {
                    sum[k][j][static_cast<std::size_t>(c)] += b[k][j][static_cast<std::size_t>(c)];
                }
            }
        }
        auto fuse = [&](const std::vector<std::vector<std::vector<double>>>& g) {
            std::vector<std::vector<std::vector<double>>> up;
            for (const auto& gk : g) {
                up.push_back(upsample_group(gk, n));
            }
            return fuse_groups(up, mask, 2).embeddings;
        };
        const auto fa = fuse(a), fb = fuse(b), fs_ = fuse(sum);
        double worst = 0;
        for (int j = 0; j < n; ++j) {
            for (int c = 0; c < w; ++c) {
                const auto jj = static_cast<std::size_t>(j), cc = static_cast<std::size_t>(c);
                worst = std::max(worst, std::abs(fs_[jj][cc] - fa[jj][cc] - fb[jj][cc]));
            }
        }
        expect(worst < 1e-12, "fusion linearity");
    }
    // patch partition: concatenated patches reproduce the series
    {
        auto x = testing::random_values(512, 5);
        std::vector<std::uint8_t> mask(512, 1);
        for (int p : {1, 2, 4, 8, 16, 32, 64, 128}) {
            std::vector<double> joined;
            for (const auto& patch : patch_divide(x, mask, p).patches) {
                joined.insert(joined.end(), patch.begin(), patch.end());
            }
            expect(joined == x, "patch partition P=" + std::to_string(p));
        }
    }
    std::string detail = "causality, padding, replication, fusion linearity, partition";
    if (!failures.empty()) {
        detail = "failed: " + failures.front() + (failures.size() > 1 ? " (+" + std::to_string(failures.size() - 1) + ")" : "");
    }
    return {failures.empty(), detail};
}

// ---------------------------------------------------------------------------
// 4. overfitting a single sinusoid

Outcome overfit() {
    RunConfig cfg = preset_config("desk-tiny");
    cfg.train.steps = 2000;
    cfg.seed = cfg.train.seed = 3;
    // offset keeps the series away from zero, where sMAPE is undefined
    auto f = [](double t) { return 10.0 + 3.0 * std::sin(2.0 * M_PI * t / 24.0); };
    TimeSeries s;
    s.id = "sine";
    s.freq = "H";
    const int N = 3000;
    for (int i = 0; i < N; ++i) {
        s.values.push_back(f(i));
    }
    const std::vector<TimeSeries> corpus{s};
    auto r = run_training(cfg, corpus, {});
    // both the logged batch loss and a sweep over the training series must be small
    double tail = 0;
    const std::size_t last = 100;
    for (std::size_t i = r.losses.size() - last; i < r.losses.size(); ++i) {
        tail += r.losses[i].mse;
    }
    tail /= last;
    const int C = cfg.model.context_len, H = cfg.train.horizon;
    double fit = 0;
    int windows = 0;
    for (int split = C; split + H <= N; split += 8, ++windows) {
        ForecastRequest req;
        req.context.assign(s.values.begin() + split - C, s.values.begin() + split);
        req.horizon = H;
        auto fc = forecast(r.model, req);
        const Scaled sc = standard_scale(req.context);
        double e = 0;
        for (int h = 0; h < H; ++h) {
            const double d = (s.values[static_cast<std::size_t>(split + h)] - fc.point[static_cast<std::size_t>(h)]) / sc.std;
            e += d * d;
        }
        fit += e / H;
    }
    fit /= windows;
    ForecastRequest req;
    req.context.assign(s.values.end() - C, s.values.end());
    req.horizon = 64;
    auto fc = forecast(r.model, req);
    std::vector<double> truth;
    for (int i = 0; i < 64; ++i) {
        truth.push_back(f(N + i));
    }
    const double sm = smape(truth, fc.point);
    return {tail < 1e-2 && fit < 1e-2 && sm < 0.05,
            "batch MSE over the last 100 steps " + fmt("%.2e", tail) + ", training-series MSE " + fmt("%.2e", fit) +
                " over " + std::to_string(windows) + " windows (both < 1e-2), H=64 sMAPE " + fmt("%.4f", sm) +
                " (< 0.05)"};
}

// ---------------------------------------------------------------------------
// 5. zero-shot on held-out seasonal series

std::vector<DatasetSpec> heldout_seasonal(std::uint64_t seed, int count, int length, int horizon) {
    std::vector<DatasetSpec> out;
    const int periods[] = {24, 12, 7, 4};
    for (int i = 0; i < count; ++i) {
        Rng rng = make_rng(seed, "heldout", static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::normal_distribution<double> n(0.0, 1.0);
        const int m = periods[i % 4];
        const double level = 5.0 + 20.0 * u(rng);
        const double amp = 1.0 + 4.0 * u(rng);
        const double amp2 = 0.5 * amp * u(rng);
        const double phase = 2.0 * M_PI * u(rng), phase2 = 2.0 * M_PI * u(rng);
        const double slope = (u(rng) - 0.5) * 0.02 * amp;
        const double noise = (0.05 + 0.2 * u(rng)) * amp;
        DatasetSpec d;
        d.name = "heldout-" + std::to_string(i);
        d.freq = "custom";
        d.season = m;
        d.horizon = horizon;
        TimeSeries s;
        s.id = d.name;
        for (int t = 0; t < length; ++t) {
            const double w = 2.0 * M_PI * t / m;
            s.values.push_back(level + slope * t + amp * std::sin(w + phase) + amp2 * std::sin(2 * w + phase2) +
                               noise * n(rng));
        }
        d.series.push_back(std::move(s));
        out.push_back(std::move(d));
    }
    return out;
}

Outcome zero_shot() {
    RunConfig cfg = preset_config("desk-tiny");
    cfg.seed = cfg.train.seed = 11;
    const auto corpus = training_corpus(cfg);
    auto r = run_training(cfg, corpus, {});
    const auto datasets = heldout_seasonal(20260101, 20, cfg.model.context_len + 64, 64);
    ModelForecaster model(r.model);
    auto report = evaluate_last_window(datasets, model);
    const double gm = report.mase_aggregate.geomean;
    const double first = r.losses.front().total, final_ = r.losses.back().total;
    return {gm <= 1.10, std::to_string(corpus.size()) + "-series corpus, " + std::to_string(r.steps_done) +
                            " steps (loss " + fmt("%.3f", first) + " -> " + fmt("%.3f", final_) +
                            "), geomean relative MASE " + fmt("%.4f", gm) + " over " +
                            std::to_string(report.mase_aggregate.ratios.size()) + " series (<= 1.10)"};
}

// ---------------------------------------------------------------------------
// 6. parameter counts

Outcome param_counts() {
    const auto base = param_count(preset_config("base-paper").model);
    const auto large = param_count(preset_config("large-paper").model);
    const bool ok = base >= 180'000'000 && base <= 220'000'000 && large >= 640'000'000 && large <= 780'000'000;
    return {ok, "base-paper " + std::to_string(base) + " in [180M, 220M], large-paper " + std::to_string(large) +
                    " in [640M, 780M]"};
}

// ---------------------------------------------------------------------------
// 7. horizon contract

Outcome horizons() {
    ModelConfig cfg = preset_config("desk-tiny").model;
    Model<float> m(cfg);
    m.initialize(5);
    auto ctx = testing::sine_series(300, 24, 3.0).values;
    std::string detail;
    bool ok = cfg.output_patch == 32;
    for (int H : {1, 31, 32, 33, 100, 720}) {
        auto r = forecast(m, {ctx, H, {}});
        const int steps = (H + 31) / 32;
        ok = ok && r.point.size() == static_cast<std::size_t>(H) && r.quantiles.size() == r.point.size() &&
             r.steps_used == steps && r.encoder_calls == 1;
        detail += (detail.empty() ? "" : ", ") + std::to_string(H) + "->" + std::to_string(r.point.size()) + "/" +
                  std::to_string(r.steps_used);
    }
    return {ok, "H->points/steps: " + detail};
}

// ---------------------------------------------------------------------------
// 8. determinism and persistence

Outcome persistence() {
    RunConfig cfg = preset_config("desk-tiny");
    cfg.train.steps = 10;
    cfg.train.checkpoint_every = 5;
    cfg.seed = cfg.train.seed = 21;
    SynthConfig synth = cfg.data.synth;
    synth.series = 200;
    const auto corpus = synthesize_corpus(synth, stream_seed(cfg.seed, "corpus"), worker_threads()).series;

    auto dir_a = scratch("persist-a"), dir_b = scratch("persist-b");
    TrainRunOptions oa;
    oa.out_dir = dir_a.string();
    auto a = run_training(cfg, corpus, oa);
    auto a2 = run_training(cfg, corpus, {});
    bool same_runs = a.model.values() == a2.model.values();
    for (std::size_t i = 0; i < a.losses.size(); ++i) {
        same_runs = same_runs && a.losses[i].total == a2.losses[i].total;
    }

    auto ck = load_checkpoint(a.final_checkpoint);
    ForecastRequest req;
    req.context = testing::sine_series(400, 24, 2.0).values;
    req.horizon = 96;
    const auto mem = forecast(a.model, req);
    const auto disk = forecast(ck.model, req);
    const bool same_forecast = mem.point == disk.point && mem.quantiles == disk.quantiles;

    TrainRunOptions first;
    first.out_dir = dir_b.string();
    first.stop_at = 5;
    auto b1 = run_training(cfg, corpus, first);
    TrainRunOptions second;
    second.out_dir = dir_b.string();
    second.resume_from = b1.checkpoints.back();
    auto b2 = run_training(cfg, corpus, second);
    bool resumed = b2.model.values() == a.model.values() && b2.adam.m == a.adam.m && b2.adam.v == a.adam.v;
    for (std::size_t i = 0; i < b2.losses.size(); ++i) {
        resumed = resumed && b2.losses[i].total == a.losses[5 + i].total;
    }
    return {same_runs && same_forecast && resumed,
            std::string("same-seed runs ") + (same_runs ? "identical" : "DIFFER") + ", checkpoint forecast " +
                (same_forecast ? "identical" : "DIFFERS") + ", resume at step 5 " +
                (resumed ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 9. pinball optimality with a bias-only head

Outcome pinball() {
    ModelConfig cfg;
    cfg.patch_sizes = {1};
    cfg.output_patch = 1;
    cfg.context_len = 4;
    cfg.d_model = 8;
    cfg.encoder_layers = cfg.decoder_layers = 1;
    cfg.heads = 1;
    cfg.d_ff = 8;
    Model<double> m(cfg);
    m.set_all(0.0); // zero weights: the head reduces to its biases
    const int Q = cfg.num_quantiles();
    const int N = 10000;

    Rng rng(31);
    std::lognormal_distribution<double> dist(0.0, 0.6);
    std::vector<double> samples(N);
    for (auto& x : samples) {
        x = dist(rng);
    }
    const int bias = m.layout().head.br;
    auto state = AdamState<double>::zeros_like(m);
    TrainConfig tc;
    tc.weight_decay = 0.0;
    const long steps = 1500;
    const std::vector<double> zeros(static_cast<std::size_t>(N * cfg.d_model), 0.0);
    for (long step = 0; step < steps; ++step) {
        Graph<double> g = bind(m, true);
        auto head = predict_patches(g, g.tape.constant(N, cfg.d_model, zeros));
        auto lv = loss_from_head(g, head, samples, N, 1);
        g.tape.backward(lv.ql);
        auto grads = collect_grads(g);
        for (std::size_t i = 0; i < grads.size(); ++i) {
            if (static_cast<int>(i) != bias) {
                std::fill(grads[i].begin(), grads[i].end(), 0.0);
            }
        }
        adamw_update(m, state, grads, lr_schedule(step, steps, 0.05), tc);
    }
    auto sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    double worst = 0;
    const auto& b = m.param(bias);
    for (int c = 0; c < Q; ++c) {
        const double q = cfg.quantiles[static_cast<std::size_t>(c)];
        // empirical quantile: smallest sample with at least q*N samples at or below it
        const auto k = static_cast<std::size_t>(std::ceil(q * N)) - 1;
        const double emp = sorted[k];
        const double got = b[static_cast<std::size_t>(1 + c)];
        worst = std::max(worst, std::abs(got - emp));
    }
    return {worst <= 0.05, "lognormal(0, 0.6), 10000 samples, max |bias - empirical decile| " + fmt("%.4f", worst) +
                               " (<= 0.05)"};
}

// ---------------------------------------------------------------------------
// 10. protocol fidelity

Outcome protocol() {
    std::vector<DatasetSpec> ds = heldout_seasonal(99, 12, 200, 24);
    SeasonalNaive naive(0);
    auto rep = evaluate_last_window(ds, naive);
    const bool self_one = rep.mase_aggregate.geomean == 1.0 && rep.smape_aggregate.geomean == 1.0;

    bool counts_ok = true;
    std::size_t cases = 0;
    const int C = 32;
    for (int len : {200, 333, 512, 1000}) {
        for (int h : {8, 16, 24}) {
            for (int stride : {0, 1, 5, 13}) {
                TimeSeries s;
                s.id = "c";
                for (int t = 0; t < len; ++t) {
                    s.values.push_back(std::sin(t * 0.37) + 0.01 * t);
                }
                DatasetSpec d;
                d.name = "constructed";
                d.series = {s};
                RollingOptions opt;
                opt.context_len = C;
                opt.horizons = {h};
                opt.stride = stride;
                opt.test_fraction = 0.25;
                auto rr = rolling_eval(d, naive, opt);
                // region = C points of context before the test segment plus the test segment
                const long test_len = static_cast<long>(std::ceil(0.25 * len));
                const long region = std::min<long>(len, C + test_len);
                const long st = stride > 0 ? stride : h;
                const long expect = region >= C + h ? (region - C - h) / st + 1 : 0;
                counts_ok = counts_ok && static_cast<long>(rr.horizons.at(0).windows) == expect;
                ++cases;
            }
        }
    }
    // canonical month-based split for hourly ETT data
    counts_ok = counts_ok && test_split_start("ETTh1", 17420, 0.2) == 11520;
    return {self_one && counts_ok, std::string("self-relative aggregate ") + fmt("%.17g", rep.mase_aggregate.geomean) +
                                       ", " + std::to_string(cases) + " rolling window counts " +
                                       (counts_ok ? "match" : "MISMATCH") + " closed form"};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance suite"};
    std::vector<int> only;
    app.add_option("criteria", only, "Criterion numbers to run (default: all)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "gradient check", 120, gradient_check},
        {2, "metric oracles", 60, oracles},
        {3, "structural invariants", 60, invariants},
        {4, "overfit sinusoid", 600, overfit},
        {5, "zero-shot surrogate", 1800, zero_shot},
        {6, "parameter counts", 1, param_counts},
        {7, "horizon contract", 60, horizons},
        {8, "determinism and persistence", 300, persistence},
        {9, "pinball optimality", 120, pinball},
        {10, "protocol fidelity", 60, protocol},
    };
    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        failed += pass ? 0 : 1;
        std::printf("%s %2d %-28s %s; %.1f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", EXCEEDED");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
