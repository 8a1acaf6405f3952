// Copyright 2026 The growprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "growprune/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "growprune/errors.hpp"

namespace growprune {

namespace {

constexpr std::array<char, 4> kMagic{'G', 'P', 'C', 'K'};

template <typename U>
void put_le(std::ostream& out, U v) {
    std::array<char, sizeof(U)> bytes;
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
    std::array<unsigned char, sizeof(U)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw DataError("checkpoint: truncated file");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
    return v;
}

void put_floats(std::ostream& out, std::span<const float> values) {
    put_le<std::uint64_t>(out, values.size());
    for (float f : values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
}

void get_floats(std::istream& in, std::span<float> values, const std::string& name) {
    const auto count = get_le<std::uint64_t>(in);
    if (count != values.size()) {
        throw DataError("checkpoint: tensor " + name + " has " + std::to_string(count) + " values, expected " +
                        std::to_string(values.size()));
    }
    for (float& f : values) f = std::bit_cast<float>(get_le<std::uint32_t>(in));
}

std::vector<std::string> tensor_names(const ModelState& s) {
    std::vector<std::string> names;
    for (std::size_t f = 0; f < s.embeddings.size(); ++f) names.push_back("embedding." + std::to_string(f));
    for (const auto& l : s.layers) {
        names.push_back(l.name + ".weight");
        names.push_back(l.name + ".bias");
    }
    return names;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelState& state) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, kCheckpointVersion);
    const nlohmann::json header{{"model", state.config}, {"step", state.step}, {"tensors", tensor_names(state)}};
    const std::string text = header.dump();
    put_le<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : state.embeddings) put_floats(out, t.values());
    for (const auto& l : state.layers) {
        put_floats(out, l.weight.values());
        put_floats(out, l.bias);
    }
    for (const auto& l : state.layers) {
        const auto flags = l.mask.flags();
        put_le<std::uint64_t>(out, flags.size());
        out.write(reinterpret_cast<const char*>(flags.data()), static_cast<std::streamsize>(flags.size()));
    }
    if (!out) throw Error("checkpoint: write failed");
}

ModelState read_checkpoint(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw DataError("checkpoint: bad magic");
    const auto version = get_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto header_len = get_le<std::uint64_t>(in);
    if (header_len > (1u << 26)) throw DataError("checkpoint: implausible header length");
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw DataError("checkpoint: truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: malformed header: ") + e.what());
    }
    ModelState state;
    try {
        state = ModelState::zeros(header.at("model").get<ModelConfig>());
        state.step = header.at("step").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: malformed header: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    for (std::size_t f = 0; f < state.embeddings.size(); ++f) {
        get_floats(in, state.embeddings[f].values(), "embedding." + std::to_string(f));
    }
    for (auto& l : state.layers) {
        get_floats(in, l.weight.values(), l.name + ".weight");
        get_floats(in, l.bias, l.name + ".bias");
    }
    for (auto& l : state.layers) {
        const auto len = get_le<std::uint64_t>(in);
        if (len != l.outputs()) throw DataError("checkpoint: mask length mismatch for " + l.name);
        std::vector<std::uint8_t> flags(len);
        in.read(reinterpret_cast<char*>(flags.data()), static_cast<std::streamsize>(len));
        if (!in) throw DataError("checkpoint: truncated mask for " + l.name);
        l.mask = RowMask::from_flags(flags);
    }
    return state;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("checkpoint: cannot open " + path.string() + " for writing");
    write_checkpoint(out, state);
}

ModelState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path.string());
    return read_checkpoint(in);
}

nlohmann::json describe_checkpoint(const ModelState& state) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : state.layers) {
        layers.push_back({{"name", l.name},
                          {"inputs", l.inputs()},
                          {"outputs", l.outputs()},
                          {"active", l.mask.active_count()}});
    }
    return {{"model", state.config}, {"step", state.step}, {"dense", state.dense()}, {"layers", layers}};
}

}  // namespace growprune
