#include "doctest.h"

#include "support.hpp"
#include "tsfound/error.hpp"
#include "tsfound/forecast_head.hpp"
#include "tsfound/training.hpp"

#include <algorithm>

using namespace tsfound;
using doctest::Approx;

TEST_CASE("teacher forcing token counts and alignment") {
    ModelConfig cfg;
    TimeSeries s = testing::sine_series(1000, 24);
    std::vector<ScaledWindow> w{make_window(s, 600, 512, 192)};
    auto b = assemble_teacher_forcing(w, cfg, 192);
    CHECK(b.prefix_len == 160);
    CHECK(b.horizon / cfg.output_patch == 6);
    CHECK(b.targets.size() == 192);
    // decoder input patch t-1 is the target of token t-1, never of token t
    for (int t = 1; t < 6; ++t) {
        for (int i = 0; i < 32; ++i) {
            CHECK(b.decoder_prefix[static_cast<std::size_t>((t - 1) * 32 + i)] ==
                  b.targets[static_cast<std::size_t>((t - 1) * 32 + i)]);
        }
    }
    CHECK_THROWS_AS(assemble_teacher_forcing(w, cfg, 100), Error);
}

TEST_CASE("decoder never sees the patch it predicts") {
    auto cfg = testing::tiny_config();
    Model<double> m(cfg);
    m.initialize(3);
    auto batch = testing::random_batch(cfg, 2, 12, 5);
    auto head = [&](const TeacherForcedBatch& b) {
        Graph<double> g = bind(m, false);
        auto lv = training_loss(g, b);
        return g.tape.scalar(lv.total);
    };
    const double base = head(batch);
    // changing the final future patch only changes the targets of the final token
    auto changed = batch;
    for (int i = 8; i < 12; ++i) {
        changed.targets[static_cast<std::size_t>(i)] += 1.0;
    }
    CHECK(changed.decoder_prefix == batch.decoder_prefix);
    CHECK(head(changed) != base);
}

TEST_CASE("mse and quantile loss examples") {
    CHECK(mse_loss(std::vector<double>{1, 2}, std::vector<double>{1, 4}) == 2.0);
    // pinball at q = 0.9, under-forecast by 1 costs 0.9; over-forecast by 1 costs 0.1
    CHECK(quantile_loss(std::vector<double>{1}, std::vector<double>{0}, std::vector<double>{0.9}) == Approx(0.9));
    CHECK(quantile_loss(std::vector<double>{1}, std::vector<double>{2}, std::vector<double>{0.9}) == Approx(0.1));
    CHECK(quantile_loss(std::vector<double>{3, 3}, std::vector<double>{1, 3, 5, 3}, std::vector<double>{0.5, 0.5}) ==
          Approx(1.0));
    CHECK_THROWS_AS(mse_loss(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("graph losses match a direct computation") {
    auto cfg = testing::tiny_config();
    const int batch = 3, H = 8, tokens = H / cfg.output_patch;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto y = testing::random_values(static_cast<std::size_t>(batch * tokens * cfg.head_width()), seed, -2, 2);
        auto tgt = testing::random_values(static_cast<std::size_t>(batch * H), seed + 1000, -2, 2);
        Model<double> m(cfg);
        auto g = bind(m, false);
        auto head = g.tape.constant(batch * tokens, cfg.head_width(), y);
        auto lv = loss_from_head(g, head, tgt, batch, H);
        long double mse = 0, ql = 0;
        const int stride = cfg.num_quantiles() + 1;
        for (std::size_t p = 0; p < tgt.size(); ++p) {
            const long double e = tgt[p] - y[p * stride];
            mse += e * e;
            for (int c = 0; c < cfg.num_quantiles(); ++c) {
                const long double d = tgt[p] - y[p * stride + 1 + c];
                const long double q = cfg.quantiles[static_cast<std::size_t>(c)];
                ql += d >= 0 ? q * d : (q - 1) * d;
            }
        }
        mse /= batch * H;
        ql /= batch * H;
        CHECK(std::abs(g.tape.scalar(lv.mse) - static_cast<double>(mse)) < 1e-12);
        CHECK(std::abs(g.tape.scalar(lv.ql) - static_cast<double>(ql)) < 1e-12);
        CHECK(g.tape.scalar(lv.total) == g.tape.scalar(lv.mse) + g.tape.scalar(lv.ql));
    }
}

TEST_CASE("lr schedule") {
    CHECK(lr_schedule(0, 100, 1e-3) == 1e-3);
    CHECK(lr_schedule(50, 100, 1e-3) == Approx(5e-4));
    CHECK(lr_schedule(99, 100, 1e-3) == Approx(1e-5));
    CHECK(lr_schedule(0, 100, 1e-3, 10) == Approx(1e-4));
    CHECK(lr_schedule(9, 100, 1e-3, 10) == Approx(1e-3));
}

TEST_CASE("weight decay is decoupled from the gradient") {
    Model<double> m(testing::tiny_config());
    m.initialize(2);
    auto before = m.values();
    auto state = AdamState<double>::zeros_like(m);
    std::vector<std::vector<double>> zero;
    for (const auto& p : m.values()) {
        zero.emplace_back(p.size(), 0.0);
    }
    TrainConfig tc;
    tc.weight_decay = 0.1;
    adamw_update(m, state, zero, 0.01, tc);
    for (std::size_t i = 0; i < before.size(); ++i) {
        for (std::size_t j = 0; j < before[i].size(); ++j) {
            CHECK(m.values()[i][j] == Approx(before[i][j] * (1.0 - 0.01 * 0.1)).epsilon(1e-14));
        }
    }
}

TEST_CASE("first Adam step moves each parameter by about lr") {
    Model<double> m(testing::tiny_config());
    m.initialize(2);
    auto before = m.values();
    auto state = AdamState<double>::zeros_like(m);
    std::vector<std::vector<double>> g;
    for (const auto& p : m.values()) {
        g.emplace_back(p.size(), -0.5);
    }
    TrainConfig tc;
    tc.weight_decay = 0.0;
    adamw_update(m, state, g, 0.01, tc);
    CHECK(m.values()[0][0] - before[0][0] == Approx(0.01).epsilon(1e-6));
    CHECK(state.updates == 1);
}

TEST_CASE("gradient clipping") {
    std::vector<std::vector<double>> g{{3.0}, {4.0}};
    CHECK(clip_grad_norm(g, 1.0) == 5.0);
    CHECK(g[0][0] == Approx(0.6));
    CHECK(g[1][0] == Approx(0.8));
    std::vector<std::vector<double>> small{{0.3}, {0.4}};
    clip_grad_norm(small, 1.0);
    CHECK(small[0][0] == 0.3);
}

TEST_CASE("loss and gradients do not depend on batch order") {
    auto cfg = testing::tiny_config();
    Model<double> m(cfg);
    m.initialize(9);
    auto b = testing::random_batch(cfg, 3, 8, 17);
    auto r = b;
    // reverse the sample order
    const int C = cfg.context_len, P = b.prefix_len, H = b.horizon;
    for (int i = 0; i < 3; ++i) {
        const int j = 2 - i;
        std::copy_n(b.context.begin() + j * C, C, r.context.begin() + i * C);
        std::copy_n(b.mask.begin() + j * C, C, r.mask.begin() + i * C);
        std::copy_n(b.decoder_prefix.begin() + j * P, P, r.decoder_prefix.begin() + i * P);
        std::copy_n(b.targets.begin() + j * H, H, r.targets.begin() + i * H);
    }
    auto a = loss_and_grad(m, b);
    auto c = loss_and_grad(m, r);
    CHECK(a.loss.total == Approx(c.loss.total).epsilon(1e-12));
    for (std::size_t i = 0; i < a.grads.size(); ++i) {
        for (std::size_t j = 0; j < a.grads[i].size(); ++j) {
            CHECK(std::abs(a.grads[i][j] - c.grads[i][j]) < 1e-10);
        }
    }
}

TEST_CASE("training steps are bit-identical for the same seed") {
    auto cfg = testing::tiny_config();
    std::vector<TimeSeries> corpus;
    for (int i = 0; i < 6; ++i) {
        corpus.push_back(testing::sine_series(60, 6 + i, i, 1.0, "s" + std::to_string(i)));
    }
    TrainConfig tc;
    tc.horizon = 8;
    tc.batch_size = 4;
    tc.steps = 5;
    auto run = [&] {
        Model<float> m(cfg);
        m.initialize(1);
        auto st = AdamState<float>::zeros_like(m);
        BatchSampler sampler(corpus, cfg, tc, 42);
        std::vector<double> losses;
        for (long s = 0; s < tc.steps; ++s) {
            losses.push_back(train_step(m, sampler.batch_for_step(s), st, s, tc).total);
        }
        return std::make_pair(losses, m.values());
    };
    auto x = run(), y = run();
    CHECK(x.first == y.first);
    CHECK(x.second == y.second);
    CHECK(x.first.back() < x.first.front());
}

TEST_CASE("float gradients agree with double gradients") {
    auto cfg = testing::tiny_config();
    Model<double> md(cfg);
    md.initialize(21);
    auto mf = md.cast<float>();
    auto b = testing::random_batch(cfg, 2, 8, 3);
    auto gd = loss_and_grad(md, b);
    auto gf = loss_and_grad(mf, b);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < gd.grads.size(); ++i) {
        for (std::size_t j = 0; j < gd.grads[i].size(); ++j) {
            const double e = gd.grads[i][j] - static_cast<double>(gf.grads[i][j]);
            num += e * e;
            den += gd.grads[i][j] * gd.grads[i][j];
        }
    }
    CHECK(std::sqrt(num / den) < 1e-3);
}

TEST_CASE("non-finite loss names the batch and leaves parameters alone") {
    auto cfg = testing::tiny_config();
    Model<float> m(cfg);
    m.initialize(1);
    auto before = m.values();
    auto st = AdamState<float>::zeros_like(m);
    auto b = testing::random_batch(cfg, 2, 8, 3);
    b.targets[0] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig tc;
    tc.horizon = 8;
    CHECK_THROWS_WITH(train_step(m, b, st, 7, tc), doctest::Contains("step 7"));
    CHECK(m.values() == before);
}

TEST_CASE("train config validation names the field") {
    TrainConfig tc;
    ModelConfig mc;
    tc.horizon = 100;
    CHECK_THROWS_WITH(validate(tc, mc), doctest::Contains("train.horizon"));
    tc.horizon = 64;
    tc.steps = 0;
    CHECK_THROWS_WITH(validate(tc, mc), doctest::Contains("train.steps"));
}
