#include "doctest.h"

#include "support.hpp"
#include "tsfound/config.hpp"
#include "tsfound/corpus.hpp"
#include "tsfound/eval.hpp"
#include "tsfound/inference.hpp"
#include "tsfound/pipeline.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace tsfound;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run cli(const std::string& args) {
    const std::string cmd = std::string(TSFOUND_CLI) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) {
        out.append(buf, n);
    }
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tsfound-cli-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const char* kTinyToml = R"(seed = 4
[model]
patch_sizes = [8, 16]
output_patch = 16
context_len = 64
d_model = 16
encoder_layers = 1
decoder_layers = 1
heads = 2
d_ff = 32
[train]
steps = 3
batch_size = 2
horizon = 32
checkpoint_every = 100
[data.synth]
series = 10
length = 120
)";

// One trained tiny checkpoint shared by the tests below.
const fs::path& trained() {
    static const fs::path dir = [] {
        auto d = scratch("trained");
        std::ofstream(d / "tiny.toml") << kTinyToml;
        auto r = cli("train --config " + (d / "tiny.toml").string() + " --out " + (d / "run").string());
        REQUIRE(r.code == 0);
        return d;
    }();
    return dir;
}

void write_dataset(const fs::path& dir, const std::string& name, int n_series, int length, int period) {
    std::ofstream out(dir / (name + ".jsonl"));
    for (int s = 0; s < n_series; ++s) {
        auto series = testing::sine_series(static_cast<std::size_t>(length), period, 5.0 + s, 1.0 + 0.1 * s);
        auto noise = testing::random_values(series.values.size(), static_cast<std::uint64_t>(s + 100 * period));
        nlohmann::json j;
        j["id"] = name + "-" + std::to_string(s);
        j["freq"] = "H";
        for (std::size_t t = 0; t < noise.size(); ++t) {
            series.values[t] += 0.2 * noise[t];
        }
        j["target"] = series.values;
        out << j.dump() << '\n';
    }
}

} // namespace

TEST_CASE("exit codes") {
    CHECK(cli("").code == 1);
    CHECK(cli("bogus").code == 1);
    CHECK(cli("param-count --preset nope").code == 1);
    CHECK(cli("param-count --preset base-paper").out == "204112768\n");
    CHECK(cli("train --dry-run").out.find("config ok; parameters: ") == 0);
    auto dir = scratch("codes");
    std::ofstream(dir / "bad.toml") << "[model]\nd_modle = 3\n";
    CHECK(cli("train --dry-run --config " + (dir / "bad.toml").string()).code == 1);
    // a runtime failure: checkpoint file that cannot be read
    CHECK(cli("forecast --checkpoint " + (dir / "none.tsf").string() + " --input x.jsonl -H 4").code == 2);
    std::ofstream(dir / "zero.toml") << "[data.synth]\nseries = 0\n";
    CHECK(cli("synth --config " + (dir / "zero.toml").string() + " --out " + (dir / "s").string()).code == 1);
}

TEST_CASE("synth is deterministic and matches the library") {
    auto dir = scratch("synth");
    const auto a = dir / "a", b = dir / "b";
    REQUIRE(cli("synth --series 1000 --seed 7 --out " + a.string()).code == 0);
    REQUIRE(cli("synth --series 1000 --seed 7 --out " + b.string()).code == 0);
    CHECK(slurp(a / "corpus.jsonl") == slurp(b / "corpus.jsonl"));
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    auto manifest = nlohmann::json::parse(slurp(a / "manifest.json"));
    CHECK(manifest["series"] == 1000);

    auto spec = preset_config("desk-tiny").data.synth;
    spec.series = 1000;
    auto lib = synthesize_corpus(spec, 7, 1);
    std::istringstream lines(slurp(a / "corpus.jsonl"));
    auto from_cli = read_jsonl(lines);
    REQUIRE(from_cli.size() == 1000);
    CHECK(from_cli[17].values == lib.series[17].values);
    CHECK(from_cli[999].id == lib.series[999].id);
}

TEST_CASE("forecast output is stable and matches the library") {
    const auto& dir = trained();
    const auto input = dir / "input.jsonl";
    write_dataset(dir, "input", 2, 150, 24);
    const std::string args =
        "forecast --checkpoint " + (dir / "run" / "final.tsf").string() + " --input " + input.string() + " -H 96";
    auto first = cli(args);
    auto second = cli(args);
    REQUIRE(first.code == 0);
    CHECK(first.out == second.out);

    std::istringstream lines(first.out);
    std::string line;
    std::getline(lines, line);
    auto j = nlohmann::json::parse(line);
    CHECK(j["id"] == "input-0");
    CHECK(j["point"].size() == 96);
    CHECK(j["quantiles"]["0.1"].size() == 96);
    CHECK(j["quantiles"].size() == 9);

    auto ck = load_checkpoint((dir / "run" / "final.tsf").string());
    std::ifstream in(input);
    auto series = read_jsonl(in);
    auto lib = forecast(ck.model, {series[0].values, 96, {}});
    for (std::size_t h = 0; h < 96; ++h) {
        CHECK(j["point"][h].get<double>() == lib.point[h]);
    }

    auto sub = cli(args + " --quantiles 0.1,0.9");
    CHECK(nlohmann::json::parse(sub.out.substr(0, sub.out.find('\n')))["quantiles"].size() == 2);
    CHECK(cli(args + " --quantiles 0.25").code == 1);
}

TEST_CASE("evaluate the baseline against itself") {
    auto dir = scratch("eval");
    fs::create_directories(dir / "data");
    write_dataset(dir / "data", "alpha", 3, 200, 24);
    write_dataset(dir / "data", "beta", 2, 180, 12);
    auto r = cli("evaluate --baseline --datasets " + (dir / "data").string() + " --out " + (dir / "out").string());
    REQUIRE(r.code == 0);
    auto report = nlohmann::json::parse(slurp(dir / "out" / "report.json"));
    CHECK(report["aggregate"]["mase"]["geomean"] == 1.0);
    CHECK(report["datasets"].size() == 2);
    CHECK(fs::exists(dir / "out" / "report.csv"));
    CHECK(cli("evaluate --datasets " + (dir / "data").string()).code == 1);
}

TEST_CASE("rolling evaluation writes one row per horizon plus the average") {
    auto dir = scratch("rolling");
    fs::create_directories(dir / "data");
    write_dataset(dir / "data", "gamma", 1, 3000, 24);
    std::ofstream(dir / "roll.toml") << "[eval]\nprotocol = \"rolling\"\nhorizons = [96, 192]\n"
                                        "datasets = \"data\"\n";
    auto r = cli("evaluate --baseline --config " + (dir / "roll.toml").string() + " --out " + (dir / "out").string());
    REQUIRE(r.code == 0);
    std::istringstream csv(slurp(dir / "out" / "report.csv"));
    std::vector<std::string> rows;
    for (std::string l; std::getline(csv, l);) {
        rows.push_back(l);
    }
    REQUIRE(rows.size() == 4);
    CHECK(rows[1].rfind("gamma,96,", 0) == 0);
    CHECK(rows[2].rfind("gamma,192,", 0) == 0);
    CHECK(rows[3].rfind("gamma,average,", 0) == 0);
}

TEST_CASE("evaluate with a checkpoint matches the library") {
    const auto& dir = trained();
    fs::create_directories(dir / "data");
    write_dataset(dir / "data", "delta", 3, 200, 24);
    auto r = cli("evaluate --checkpoint " + (dir / "run" / "final.tsf").string() + " --datasets " +
                 (dir / "data").string() + " --out " + (dir / "eval").string());
    REQUIRE(r.code == 0);
    auto report = nlohmann::json::parse(slurp(dir / "eval" / "report.json"));

    auto ck = load_checkpoint((dir / "run" / "final.tsf").string());
    auto cfg = preset_config("desk-tiny");
    cfg.model = ck.model_config;
    cfg.train = ck.train_config;
    cfg.eval.datasets = {(dir / "data").string()};
    ModelForecaster f(ck.model);
    auto lib = run_evaluation(cfg, f, load_datasets(cfg));
    CHECK(report["datasets"][0]["model"]["mase"].get<double>() == *lib.last_window[0].model.mase);
}
