#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "folde/core/embeddings.hpp"
#include "folde/error.hpp"
#include "folde/ranker/mlp.hpp"

namespace folde {

// Checkpoint layout, all little-endian:
//   "FLDM" | u32 version (1)
//   u32 input_dim | u32 hidden count | u32 hidden dims...
//   u64 dropout (f64 bits) | u8 final_bias | u64 seed
//   u64 parameter count | f32 parameters...
//   u64 running-stat count | f32 running stats...
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string encode_checkpoint(const Mlp<float>& model) {
    using detail::put_le;
    std::string out = "FLDM";
    const auto& c = model.config();
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, std::uint32_t(c.input_dim));
    put_le<std::uint32_t>(out, std::uint32_t(c.hidden_dims.size()));
    for (auto h : c.hidden_dims) put_le<std::uint32_t>(out, std::uint32_t(h));
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(c.dropout_p));
    put_le<std::uint8_t>(out, c.final_bias ? 1 : 0);
    put_le<std::uint64_t>(out, c.seed);
    put_le<std::uint64_t>(out, model.parameters().size());
    for (float x : model.parameters()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
    put_le<std::uint64_t>(out, model.running_stats().size());
    for (float x : model.running_stats()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
    return out;
}

inline Mlp<float> decode_checkpoint(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.take(4, "magic") != "FLDM") throw ParseError("bad magic: not a model checkpoint");
    const auto version = r.get_le<std::uint32_t>("version");
    if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
    MlpConfig c;
    c.input_dim = r.get_le<std::uint32_t>("input_dim");
    c.hidden_dims.resize(r.get_le<std::uint32_t>("hidden count"));
    for (auto& h : c.hidden_dims) h = r.get_le<std::uint32_t>("hidden dims");
    c.dropout_p = std::bit_cast<double>(r.get_le<std::uint64_t>("dropout"));
    c.final_bias = r.get_le<std::uint8_t>("final_bias") != 0;
    c.seed = r.get_le<std::uint64_t>("seed");
    Mlp<float> model(c);
    if (r.get_le<std::uint64_t>("parameter count") != model.parameters().size())
        throw ParseError("checkpoint parameter count does not match architecture");
    for (float& x : model.parameters()) x = std::bit_cast<float>(r.get_le<std::uint32_t>("parameters"));
    if (r.get_le<std::uint64_t>("running-stat count") != model.running_stats().size())
        throw ParseError("checkpoint running-stat count does not match architecture");
    for (float& x : model.running_stats()) x = std::bit_cast<float>(r.get_le<std::uint32_t>("running stats"));
    if (!r.at_end()) throw ParseError("trailing bytes in checkpoint");
    return model;
}

inline void save_checkpoint(const std::string& path, const Mlp<float>& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    const auto bytes = encode_checkpoint(model);
    out.write(bytes.data(), std::streamsize(bytes.size()));
}

inline Mlp<float> load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file_bytes(path)); }

}  // namespace folde
