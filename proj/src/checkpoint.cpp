#include "tsfound/checkpoint.hpp"

#include "tsfound/config.hpp"
#include "tsfound/error.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace tsfound {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'S', 'F', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.write(b, 8);
}

struct Entry {
    std::string name;
    int rows;
    int cols;
    const std::vector<float>* data;
};

} // namespace

void save_checkpoint(const std::string& path, const Model<float>& model, const TrainConfig& train, long step,
                     const AdamState<float>* adam) {
    const ParamLayout& layout = model.layout();
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < layout.specs.size(); ++i) {
        const auto& s = layout.specs[i];
        entries.push_back({s.name, s.rows, s.cols, &model.values()[i]});
    }
    if (adam) {
        for (std::size_t i = 0; i < layout.specs.size(); ++i) {
            const auto& s = layout.specs[i];
            entries.push_back({"adam.m." + s.name, s.rows, s.cols, &adam->m[i]});
        }
        for (std::size_t i = 0; i < layout.specs.size(); ++i) {
            const auto& s = layout.specs[i];
            entries.push_back({"adam.v." + s.name, s.rows, s.cols, &adam->v[i]});
        }
    }
    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& e : entries) {
        const std::uint64_t count = e.data->size();
        manifest.push_back({{"name", e.name}, {"shape", {e.rows, e.cols}}, {"offset", offset}, {"count", count}});
        offset += count * sizeof(float);
    }
    nlohmann::json header = {{"format", "tsfound-checkpoint"},
                             {"version", kCheckpointVersion},
                             {"dtype", "float32-le"},
                             {"step", step},
                             {"model", to_json(model.config())},
                             {"train", to_json(train)},
                             {"adam_updates", adam ? nlohmann::json(adam->updates) : nlohmann::json(nullptr)},
                             {"arrays", manifest},
                             {"payload_bytes", offset}};
    const std::string text = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            fail_runtime("cannot write checkpoint '" + path + "'");
        }
        out.write(kMagic.data(), kMagic.size());
        write_u64(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& e : entries) {
            out.write(reinterpret_cast<const char*>(e.data->data()),
                      static_cast<std::streamsize>(e.data->size() * sizeof(float)));
        }
        out.flush();
        if (!out) {
            fail_runtime("short write to checkpoint '" + path + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        fail_runtime("cannot move checkpoint into '" + path + "': " + ec.message());
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail_runtime("cannot read checkpoint '" + path + "'");
    }
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) {
        fail_validation("checkpoint '" + path + "': bad magic, not a checkpoint file");
    }
    char lenbuf[8];
    in.read(lenbuf, 8);
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, lenbuf, 8);
    if (!in || header_len > (1u << 30)) {
        fail_validation("checkpoint '" + path + "': corrupt header length");
    }
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) {
        fail_runtime("checkpoint '" + path + "': truncated header");
    }
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail_validation("checkpoint '" + path + "': header is not JSON: " + e.what());
    }
    const int version = h.value("version", -1);
    if (version != kCheckpointVersion) {
        fail_validation("checkpoint field 'version': file has " + std::to_string(version) + ", expected " +
                        std::to_string(kCheckpointVersion));
    }
    if (h.value("dtype", "") != "float32-le") {
        fail_validation("checkpoint field 'dtype': expected float32-le");
    }

    Checkpoint ck(model_config_from_json(h.at("model")));
    ck.train_config = train_config_from_json(h.at("train"));
    ck.step = h.at("step").get<long>();
    const ParamLayout& layout = ck.model.layout();
    const bool has_adam = !h.at("adam_updates").is_null();
    if (has_adam) {
        ck.adam = AdamState<float>::zeros_like(ck.model);
        ck.adam->updates = h.at("adam_updates").get<long>();
    }

    const auto& arrays = h.at("arrays");
    const std::size_t n = layout.specs.size();
    const std::size_t expected = has_adam ? 3 * n : n;
    if (arrays.size() != expected) {
        fail_validation("checkpoint field 'arrays': " + std::to_string(arrays.size()) + " arrays, expected " +
                        std::to_string(expected));
    }
    const std::streamoff payload = static_cast<std::streamoff>(16 + header_len);
    for (std::size_t a = 0; a < arrays.size(); ++a) {
        const std::size_t i = a % n;
        const auto& spec = layout.specs[i];
        const std::string prefix = a < n ? "" : (a < 2 * n ? "adam.m." : "adam.v.");
        const std::string want = prefix + spec.name;
        const auto& e = arrays[a];
        const std::string name = e.at("name").get<std::string>();
        if (name != want) {
            fail_validation("checkpoint array " + std::to_string(a) + ": found '" + name + "', expected '" + want + "'");
        }
        const auto shape = e.at("shape").get<std::vector<int>>();
        if (shape.size() != 2 || shape[0] != spec.rows || shape[1] != spec.cols) {
            fail_validation("checkpoint array '" + name + "': shape mismatch, expected [" + std::to_string(spec.rows) +
                            ", " + std::to_string(spec.cols) + "]");
        }
        std::vector<float>& dst = a < n ? ck.model.param(static_cast<int>(i))
                                        : (a < 2 * n ? ck.adam->m[i] : ck.adam->v[i]);
        if (e.at("count").get<std::size_t>() != dst.size()) {
            fail_validation("checkpoint array '" + name + "': element count mismatch");
        }
        in.seekg(payload + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
        in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(float)));
        if (!in) {
            fail_runtime("checkpoint '" + path + "': truncated payload in '" + name + "'");
        }
    }
    return ck;
}

void require_compatible(const Checkpoint& ckpt, const ModelConfig& expected) {
    const std::string field = model_config_difference(ckpt.model_config, expected);
    if (!field.empty()) {
        fail_validation("checkpoint does not match config: field 'model." + field + "' differs");
    }
}

} // namespace tsfound
