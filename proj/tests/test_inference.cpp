#include "doctest.h"

#include "support.hpp"
#include "tsfound/error.hpp"
#include "tsfound/inference.hpp"

using namespace tsfound;

namespace {

Model<double> tiny_model(std::uint64_t seed = 31) {
    Model<double> m(testing::tiny_config());
    m.initialize(seed);
    return m;
}

} // namespace

TEST_CASE("forecast returns exactly H points for any horizon") {
    auto m = tiny_model();
    auto ctx = testing::sine_series(40, 8, 5.0).values;
    for (int H : {1, 3, 4, 5, 8, 13, 64}) {
        auto r = forecast(m, {ctx, H, {}});
        CHECK(r.point.size() == static_cast<std::size_t>(H));
        CHECK(r.quantiles.size() == static_cast<std::size_t>(H));
        CHECK(r.steps_used == (H + 3) / 4);
        CHECK(r.encoder_calls == 1);
        CHECK(r.levels == std::vector<double>{0.1, 0.5, 0.9});
    }
}

TEST_CASE("quantile level selection") {
    auto m = tiny_model();
    auto ctx = testing::random_values(20, 1);
    auto r = forecast(m, {ctx, 4, {0.9, 0.1}});
    CHECK(r.levels == std::vector<double>{0.9, 0.1});
    CHECK(r.quantiles[0].size() == 2);
    CHECK_THROWS_WITH(forecast(m, {ctx, 4, {0.25}}), doctest::Contains("0.1 0.5 0.9"));
}

TEST_CASE("context errors") {
    auto m = tiny_model();
    CHECK_THROWS_WITH(forecast(m, {{}, 4, {}}), doctest::Contains("empty context"));
    CHECK_THROWS_AS(forecast(m, {{1.0, std::nan("")}, 4, {}}), Error);
    CHECK_THROWS_AS(forecast(m, {{1.0, 2.0}, 0, {}}), Error);
}

TEST_CASE("short and long contexts are handled by padding and truncation") {
    auto m = tiny_model();
    CHECK(forecast(m, {{3.0}, 4, {}}).point.size() == 4);
    auto longer = testing::random_values(100, 4);
    auto tail = std::vector<double>(longer.end() - 16, longer.end());
    CHECK(forecast(m, {longer, 8, {}}).point == forecast(m, {tail, 8, {}}).point);
}

TEST_CASE("forecasts are equivariant to affine rescaling of the context") {
    auto m = tiny_model();
    auto ctx = testing::random_values(30, 8, 0, 5);
    auto base = forecast(m, {ctx, 9, {}});
    for (auto [a, b] : {std::pair{2.0, 0.0}, std::pair{0.01, 1000.0}, std::pair{37.0, -5.0}}) {
        std::vector<double> moved;
        for (double v : ctx) {
            moved.push_back(a * v + b);
        }
        auto r = forecast(m, {moved, 9, {}});
        for (std::size_t h = 0; h < 9; ++h) {
            CHECK(r.point[h] == doctest::Approx(a * base.point[h] + b).epsilon(1e-9));
            for (std::size_t c = 0; c < 3; ++c) {
                CHECK(r.quantiles[h][c] == doctest::Approx(a * base.quantiles[h][c] + b).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("one teacher-forced pass reproduces autoregressive generation") {
    auto m = tiny_model(5);
    const auto& cfg = m.config();
    auto raw = testing::random_values(16, 9);
    const Scaled sc = standard_scale(raw);
    std::vector<std::uint8_t> mask(16, 1);

    DecoderSession<double> session(m, sc.values, mask);
    std::vector<double> generated;
    std::vector<PatchPrediction> step_preds;
    for (int s = 0; s < 4; ++s) {
        auto preds = session.run(generated);
        CHECK(preds.size() == static_cast<std::size_t>(s + 1));
        step_preds.push_back(preds.back());
        generated.insert(generated.end(), preds.back().point.begin(), preds.back().point.end());
    }
    // feed the generated points as a single prefix
    auto all = session.run(std::span<const double>(generated).first(3 * cfg.output_patch));
    REQUIRE(all.size() == 4);
    for (std::size_t t = 0; t < 4; ++t) {
        auto a = all[t].flatten();
        auto b = step_preds[t].flatten();
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) < 1e-5);
        }
    }
    CHECK(session.encoder_calls() == 1);
}

TEST_CASE("float and double models agree") {
    auto m = tiny_model(6);
    auto mf = m.cast<float>();
    auto ctx = testing::random_values(16, 10);
    auto a = forecast(m, {ctx, 8, {}});
    auto b = forecast(mf, {ctx, 8, {}});
    for (std::size_t h = 0; h < 8; ++h) {
        CHECK(a.point[h] == doctest::Approx(b.point[h]).epsilon(1e-4));
    }
}
