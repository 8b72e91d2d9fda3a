#include <cstring>
#include <fstream>

#include <json.hpp>

#include "clares/config_io.hpp"
#include "clares/train.hpp"

namespace clares {

// Checkpoint container: magic "CKP1", u32 version, u64 JSON length + JSON
// metadata, u32 entry count, per entry (u16 name length, name, u8 dtype,
// u8 ndim, ndim x u32 dims, u64 payload offset), then the raw little-endian
// tensor payloads. Offsets are relative to the payload block.

namespace {

constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

struct Entry {
    std::string name;
    Shape shape;
    const float* data;
    std::size_t count;
};

void write_file(const std::string& path, const nlohmann::json& meta,
                const std::vector<Entry>& entries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write("CKP1", 4);
    put<std::uint32_t>(out, kVersion);
    const std::string meta_str = meta.dump();
    put<std::uint64_t>(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    std::uint64_t offset = 0;
    for (const auto& e : entries) {
        put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        out.put(1);  // dtype f32
        out.put(static_cast<char>(e.shape.size()));
        for (auto d : e.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        put<std::uint64_t>(out, offset);
        offset += e.count * 4;
    }
    for (const auto& e : entries)
        out.write(reinterpret_cast<const char*>(e.data),
                  static_cast<std::streamsize>(e.count * 4));
    if (!out) throw DataError("short write to " + path);
}

struct RawEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

std::pair<nlohmann::json, std::vector<RawEntry>> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CKP1", 4) != 0)
        throw FormatError(path + ": bad magic, not a checkpoint");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion)
        throw FormatError(path + ": unsupported checkpoint version " +
                          std::to_string(version));
    const auto meta_len = get<std::uint64_t>(in);
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(meta_str);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad metadata block: " + e.what());
    }
    const auto n_entries = get<std::uint32_t>(in);
    std::vector<RawEntry> entries(n_entries);
    std::vector<std::uint64_t> offsets(n_entries);
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        const auto name_len = get<std::uint16_t>(in);
        entries[i].name.resize(name_len);
        in.read(entries[i].name.data(), name_len);
        const int dtype = in.get();
        if (dtype != 1) throw FormatError(path + ": unexpected tensor dtype");
        const int ndim = in.get();
        entries[i].shape.resize(static_cast<std::size_t>(ndim));
        for (auto& d : entries[i].shape) d = get<std::uint32_t>(in);
        offsets[i] = get<std::uint64_t>(in);
    }
    if (!in) throw FormatError(path + ": truncated entry table");
    const auto payload_start = in.tellg();
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        const std::size_t count = numel(entries[i].shape);
        entries[i].data.resize(count);
        in.seekg(payload_start + static_cast<std::streamoff>(offsets[i]));
        in.read(reinterpret_cast<char*>(entries[i].data.data()),
                static_cast<std::streamsize>(count * 4));
        if (static_cast<std::size_t>(in.gcount()) != count * 4)
            throw FormatError(path + ": truncated payload for " + entries[i].name);
    }
    return {std::move(meta), std::move(entries)};
}

}  // namespace

void save_checkpoint(const std::string& path, ClaresNet<float>& model,
                     AdamW<float>* opt, const CheckpointMeta& meta) {
    nlohmann::json j;
    j["model"] = model_config_to_json(meta.model_cfg);
    j["epoch"] = meta.epoch;
    j["best_val_acc"] = meta.best_val_acc;
    j["seed"] = meta.seed;
    j["opt_step"] = meta.opt_step;
    j["has_optimizer"] = (opt != nullptr);

    auto sd = model.state_dict();
    std::vector<Entry> entries;
    for (auto& p : sd.params)
        entries.push_back({p.name, p.tensor.shape(), p.tensor.data(), p.tensor.size()});
    for (auto& b : sd.buffers)
        entries.push_back({b.name, {b.data->size()}, b.data->data(), b.data->size()});
    if (opt != nullptr) {
        const auto& params = opt->params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            entries.push_back({"opt.m." + params[i].name, {opt->moment1(i).size()},
                               opt->moment1(i).data(), opt->moment1(i).size()});
            entries.push_back({"opt.v." + params[i].name, {opt->moment2(i).size()},
                               opt->moment2(i).data(), opt->moment2(i).size()});
        }
    }
    write_file(path, j, entries);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    auto [meta, entries] = read_file(path);
    LoadedCheckpoint out;
    try {
        out.meta.model_cfg = model_config_from_json(meta.at("model"));
        out.meta.epoch = meta.at("epoch").get<std::size_t>();
        out.meta.best_val_acc = meta.at("best_val_acc").get<double>();
        out.meta.seed = meta.at("seed").get<std::uint64_t>();
        out.meta.opt_step = meta.at("opt_step").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": incomplete metadata: " + e.what());
    }
    Rng init(0);  // weights are overwritten below
    out.model = ClaresNet<float>(out.meta.model_cfg, init);
    auto sd = out.model.state_dict();

    auto find = [&](const std::string& name) -> RawEntry* {
        for (auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    };
    for (auto& p : sd.params) {
        RawEntry* e = find(p.name);
        if (e == nullptr)
            throw FormatError(path + ": checkpoint is missing parameter " + p.name);
        if (e->shape != p.tensor.shape())
            throw FormatError(path + ": shape mismatch for " + p.name +
                              " (architecture does not match the checkpoint)");
        std::copy(e->data.begin(), e->data.end(), p.tensor.values().begin());
    }
    for (auto& b : sd.buffers) {
        RawEntry* e = find(b.name);
        if (e == nullptr)
            throw FormatError(path + ": checkpoint is missing buffer " + b.name);
        if (e->data.size() != b.data->size())
            throw FormatError(path + ": size mismatch for " + b.name);
        std::copy(e->data.begin(), e->data.end(), b.data->begin());
    }
    if (meta.value("has_optimizer", false)) {
        out.opt_m.reserve(sd.params.size());
        out.opt_v.reserve(sd.params.size());
        for (auto& p : sd.params) {
            RawEntry* m = find("opt.m." + p.name);
            RawEntry* v = find("opt.v." + p.name);
            if (m == nullptr || v == nullptr)
                throw FormatError(path + ": checkpoint is missing optimizer state for " +
                                  p.name);
            out.opt_m.push_back(std::move(m->data));
            out.opt_v.push_back(std::move(v->data));
        }
    }
    return out;
}

void restore_optimizer(AdamW<float>& opt, const LoadedCheckpoint& ckpt) {
    if (ckpt.opt_m.empty()) return;
    if (ckpt.opt_m.size() != opt.params().size())
        throw FormatError("optimizer state does not match the parameter list");
    for (std::size_t i = 0; i < ckpt.opt_m.size(); ++i) {
        if (ckpt.opt_m[i].size() != opt.moment1(i).size())
            throw FormatError("optimizer moment size mismatch for " +
                              opt.params()[i].name);
        opt.moment1(i) = ckpt.opt_m[i];
        opt.moment2(i) = ckpt.opt_v[i];
    }
    opt.set_step_count(ckpt.meta.opt_step);
}

}  // namespace clares
