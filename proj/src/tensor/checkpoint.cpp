#include "cdrdiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace cdrdiff {

namespace {

constexpr char kMagic[8] = {'C', 'D', 'R', 'D', 'C', 'K', 'P', 'T'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8;

template <class UInt>
void put_le(std::vector<std::uint8_t>& out, UInt v) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class UInt>
UInt get_le(const std::uint8_t* p) {
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(p[i]) << (8 * i);
    return v;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e.value;
    }
    return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    nlohmann::json manifest;
    manifest["version"] = kCheckpointVersion;
    manifest["metadata"] = ckpt.metadata;
    manifest["entries"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& e : ckpt.entries) {
        manifest["entries"].push_back({{"name", e.name}, {"shape", e.value.shape()}, {"offset", offset}});
        offset += e.value.size() * sizeof(double);
    }
    const std::string text = manifest.dump();

    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + text.size() + offset);
    for (char c : kMagic) out.push_back(static_cast<std::uint8_t>(c));
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& e : ckpt.entries) {
        for (double v : e.value.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    const auto version = get_le<std::uint32_t>(bytes.data() + 8);
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto manifest_len = get_le<std::uint64_t>(bytes.data() + 12);
    if (manifest_len > bytes.size() - kHeaderSize) throw CheckpointError("truncated manifest");
    const auto* manifest_begin = reinterpret_cast<const char*>(bytes.data() + kHeaderSize);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(manifest_begin, manifest_begin + manifest_len);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed manifest: ") + e.what());
    }
    const std::size_t payload_begin = kHeaderSize + manifest_len;
    const std::size_t payload_size = bytes.size() - payload_begin;

    Checkpoint ckpt;
    ckpt.metadata = manifest.value("metadata", nlohmann::json::object());
    std::uint64_t expected_offset = 0;
    for (const auto& entry : manifest.at("entries")) {
        NamedTensor nt;
        nt.name = entry.at("name").get<std::string>();
        const Shape shape = entry.at("shape").get<Shape>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const std::size_t count = shape_product(shape);
        if (offset != expected_offset || offset + count * sizeof(double) > payload_size) {
            throw CheckpointError("entry '" + nt.name + "' lies outside the payload");
        }
        std::vector<double> values(count);
        const std::uint8_t* p = bytes.data() + payload_begin + offset;
        for (std::size_t i = 0; i < count; ++i) {
            values[i] = std::bit_cast<double>(get_le<std::uint64_t>(p + i * sizeof(double)));
        }
        nt.value = Tensor(shape, std::move(values));
        expected_offset = offset + count * sizeof(double);
        ckpt.entries.push_back(std::move(nt));
    }
    if (expected_offset != payload_size) throw CheckpointError("trailing bytes after payload");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

Checkpoint make_checkpoint(const ParameterSet& params, const AdamState* adam, nlohmann::json metadata) {
    Checkpoint ckpt;
    ckpt.metadata = std::move(metadata);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor v = params.value(p);
        v.set_requires_grad(false);
        ckpt.entries.push_back({params.name(p), std::move(v)});
    }
    if (adam) {
        ckpt.metadata["adam_step"] = adam->step;
        for (std::size_t p = 0; p < params.size(); ++p) {
            ckpt.entries.push_back({"adam.m/" + params.name(p), adam->first_moment.at(p)});
        }
        for (std::size_t p = 0; p < params.size(); ++p) {
            ckpt.entries.push_back({"adam.v/" + params.name(p), adam->second_moment.at(p)});
        }
    }
    return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, ParameterSet& params) {
    for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor* t = ckpt.find(params.name(p));
        if (!t) throw CheckpointError("checkpoint/config mismatch: missing parameter '" + params.name(p) + "'");
        if (t->shape() != params.value(p).shape()) {
            throw CheckpointError("checkpoint/config mismatch: parameter '" + params.name(p) + "' has shape " +
                                  shape_string(t->shape()) + ", config expects " +
                                  shape_string(params.value(p).shape()));
        }
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto dst = params.value(p).values();
        auto src = ckpt.find(params.name(p))->values();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

AdamState restore_adam(const Checkpoint& ckpt, const ParameterSet& params) {
    if (!ckpt.metadata.contains("adam_step")) throw CheckpointError("checkpoint carries no optimizer state");
    AdamState state;
    state.step = ckpt.metadata.at("adam_step").get<std::uint64_t>();
    for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor* m = ckpt.find("adam.m/" + params.name(p));
        const Tensor* v = ckpt.find("adam.v/" + params.name(p));
        if (!m || !v || m->shape() != params.value(p).shape() || v->shape() != params.value(p).shape()) {
            throw CheckpointError("optimizer state mismatch at parameter '" + params.name(p) + "'");
        }
        state.first_moment.push_back(*m);
        state.second_moment.push_back(*v);
    }
    return state;
}

}  // namespace cdrdiff
