#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "folde/core/variant.hpp"
#include "folde/error.hpp"

namespace folde {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

// Fixed-width float vectors keyed by variant; rows keep insertion order so the
// binary format round-trips bit-exactly.
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dim) : dim_(dim) {
        if (dim == 0) throw InvariantError("embedding dim must be positive");
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }

    void add(const Variant& v, std::span<const float> values) {
        if (values.size() != dim_)
            throw InvariantError("embedding for " + render(v) + " has length " +
                                 std::to_string(values.size()) + ", expected " + std::to_string(dim_));
        for (float x : values)
            if (!std::isfinite(x)) throw InvariantError("non-finite embedding value for " + render(v));
        if (!index_.emplace(v, ids_.size()).second)
            throw InvariantError("duplicate embedding id " + render(v));
        ids_.push_back(v);
        data_.insert(data_.end(), values.begin(), values.end());
    }

    const Variant& id(std::size_t row) const { return ids_.at(row); }
    const std::vector<Variant>& ids() const noexcept { return ids_; }

    std::span<const float> row(std::size_t i) const {
        if (i >= ids_.size()) throw std::out_of_range("embedding row");
        return {data_.data() + i * dim_, dim_};
    }

    std::optional<std::size_t> find(const Variant& v) const {
        const auto it = index_.find(v);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const Variant& v) const { return index_.contains(v); }

    // Rows for the given variants stacked into an (n x dim) matrix.
    Eigen::MatrixXf gather(std::span<const Variant> variants) const {
        Eigen::MatrixXf out(static_cast<Eigen::Index>(variants.size()), static_cast<Eigen::Index>(dim_));
        for (std::size_t i = 0; i < variants.size(); ++i) {
            const auto r = find(variants[i]);
            if (!r) throw InvariantError("no embedding for variant " + render(variants[i]));
            const auto src = row(*r);
            for (std::size_t j = 0; j < dim_; ++j)
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = src[j];
        }
        return out;
    }

    friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
        if (a.dim_ != b.dim_ || a.ids_ != b.ids_ || a.data_.size() != b.data_.size()) return false;
        return std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
    }

private:
    std::size_t dim_;
    std::vector<Variant> ids_;
    std::vector<float> data_;
    std::unordered_map<Variant, std::size_t, VariantHash> index_;
};

namespace detail {

inline constexpr char kEmbeddingMagic[5] = {'F', 'L', 'D', 'E', '1'};

template <class U>
void put_le(std::string& out, U value) {
    static_assert(std::is_unsigned_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    template <class U>
    U get_le(const char* what) {
        static_assert(std::is_unsigned_v<U>);
        need(sizeof(U), what);
        U value = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            value |= U(std::uint8_t(bytes_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return value;
    }

    std::string_view take(std::size_t n, const char* what) {
        need(n, what);
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool at_end() const noexcept { return pos_ == bytes_.size(); }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw ParseError(std::string("truncated file while reading ") + what);
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace detail

// FLDE1 layout (little-endian): magic "FLDE1", u32 count, u32 dim, then count
// records of (u16 id length, UTF-8 id, dim x f32).
inline std::string encode_embeddings(const EmbeddingStore& store) {
    std::string out(detail::kEmbeddingMagic, sizeof(detail::kEmbeddingMagic));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
    for (std::size_t i = 0; i < store.size(); ++i) {
        const std::string id = render(store.id(i));
        if (id.size() > 0xFFFF) throw InvariantError("variant id too long for FLDE1: " + id);
        detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
        out += id;
        for (float x : store.row(i)) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
    }
    return out;
}

inline EmbeddingStore decode_embeddings(std::string_view bytes) {
    detail::ByteReader r(bytes);
    if (r.take(sizeof(detail::kEmbeddingMagic), "magic") !=
        std::string_view(detail::kEmbeddingMagic, sizeof(detail::kEmbeddingMagic)))
        throw ParseError("bad magic: not an FLDE1 embedding file");
    const auto count = r.get_le<std::uint32_t>("count");
    const auto dim = r.get_le<std::uint32_t>("dim");
    if (dim == 0) throw ParseError("FLDE1 header declares dim 0");
    EmbeddingStore store(dim);
    std::vector<float> buf(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = r.get_le<std::uint16_t>("id length");
        const auto id = r.take(len, "variant id");
        Variant v;
        try {
            v = parse_variant_text(id);
        } catch (const ParseError& e) {
            throw ParseError("record " + std::to_string(i) + ": " + e.what());
        }
        for (auto& x : buf) {
            x = std::bit_cast<float>(r.get_le<std::uint32_t>("embedding values"));
            if (!std::isfinite(x)) throw ParseError("non-finite embedding value for " + std::string(id));
        }
        store.add(v, buf);
    }
    if (!r.at_end())
        throw ParseError(std::to_string(r.remaining()) +
                         " trailing bytes after last record (record framing disagrees with header)");
    return store;
}

inline void save_embeddings(const std::string& path, const EmbeddingStore& store) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    const auto bytes = encode_embeddings(store);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline EmbeddingStore load_embeddings(const std::string& path) {
    return decode_embeddings(detail::read_file_bytes(path));
}

}  // namespace folde
