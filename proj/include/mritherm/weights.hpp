#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mritherm/errors.hpp"
#include "mritherm/tensor.hpp"

namespace mritherm {

namespace detail {

/// CRC-32 (IEEE, polynomial 0xEDB88320), table built at compile time.
class Crc32 {
public:
    void update(const std::uint8_t* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            state_ = table()[(state_ ^ data[i]) & 0xFF] ^ (state_ >> 8);
        }
    }
    std::uint32_t value() const { return state_ ^ 0xFFFFFFFFu; }

private:
    static const std::array<std::uint32_t, 256>& table() {
        static constexpr std::array<std::uint32_t, 256> t = [] {
            std::array<std::uint32_t, 256> out{};
            for (std::uint32_t i = 0; i < 256; ++i) {
                std::uint32_t c = i;
                for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
                out[i] = c;
            }
            return out;
        }();
        return t;
    }
    std::uint32_t state_ = 0xFFFFFFFFu;
};

}  // namespace detail

/// Ordered name -> tensor container with bit-exact binary serialization.
///
/// On-disk layout (little-endian):
///   "MNWT" | u32 version=1 | u32 count |
///   per tensor: u16 name length, name bytes (ASCII), u8 dtype=0 (f32),
///               u8 rank, u32 dims[rank], raw f32 data row-major |
///   u32 CRC-32 of all preceding bytes
class WeightStore {
public:
    void add(const std::string& name, Tensor tensor) {
        if (name.empty()) throw FormatError("weight name must be non-empty");
        if (name.size() > 0xFFFF) throw FormatError("weight name too long: " + name);
        for (char c : name) {
            if (static_cast<unsigned char>(c) > 0x7F) {
                throw FormatError("weight name must be ASCII: " + name);
            }
        }
        if (index_.count(name)) throw FormatError("duplicate weight name: " + name);
        if (!tensor.all_finite()) throw NumericError("weight tensor has non-finite values: " + name);
        index_[name] = entries_.size();
        entries_.emplace_back(name, std::move(tensor));
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    const Tensor& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw LookupError("weight tensor not found: " + name);
        return entries_[it->second].second;
    }

    /// Lookup that also pins the expected shape, for forward passes.
    const Tensor& get(const std::string& name, const Shape& expect) const {
        const Tensor& t = get(name);
        if (t.shape() != expect) {
            throw LookupError("weight tensor " + name + " has shape " + t.shape().str() +
                              ", expected " + expect.str());
        }
        return t;
    }

    void replace(const std::string& name, Tensor tensor) {
        auto it = index_.find(name);
        if (it == index_.end()) throw LookupError("weight tensor not found: " + name);
        if (!tensor.all_finite()) throw NumericError("weight tensor has non-finite values: " + name);
        entries_[it->second].second = std::move(tensor);
    }

    std::size_t count() const { return entries_.size(); }
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

    bool same_bits(const WeightStore& other) const {
        if (entries_.size() != other.entries_.size()) return false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].first != other.entries_[i].first) return false;
            if (!entries_[i].second.same_bits(other.entries_[i].second)) return false;
        }
        return true;
    }

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct ByteReader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (bytes.size() - pos < n) throw FormatError("weight container truncated");
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_weights(const WeightStore& store) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'M', 'N', 'W', 'T'});
    detail::put_u32(out, 1);  // version
    detail::put_u32(out, static_cast<std::uint32_t>(store.count()));
    for (const auto& [name, tensor] : store.entries()) {
        detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(0);  // dtype f32
        out.push_back(static_cast<std::uint8_t>(tensor.shape().rank()));
        for (int i = 0; i < tensor.shape().rank(); ++i) {
            detail::put_u32(out, static_cast<std::uint32_t>(tensor.shape()[i]));
        }
        for (std::size_t i = 0; i < tensor.size(); ++i) detail::put_f32(out, tensor[i]);
    }
    detail::Crc32 crc;
    crc.update(out.data(), out.size());
    detail::put_u32(out, crc.value());
    return out;
}

inline WeightStore deserialize_weights(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16) throw FormatError("weight container truncated");
    // CRC covers everything before the trailing checksum and is verified
    // before any tensor is constructed
    detail::Crc32 crc;
    crc.update(bytes.data(), bytes.size() - 4);
    detail::ByteReader tail{bytes, bytes.size() - 4};
    if (tail.u32() != crc.value()) throw FormatError("weight container CRC mismatch");

    detail::ByteReader r{bytes};
    if (r.u8() != 'M' || r.u8() != 'N' || r.u8() != 'W' || r.u8() != 'T') {
        throw FormatError("weight container bad magic");
    }
    std::uint32_t version = r.u32();
    if (version != 1) throw FormatError("weight container unsupported version " + std::to_string(version));
    std::uint32_t count = r.u32();
    WeightStore store;
    for (std::uint32_t t = 0; t < count; ++t) {
        std::uint16_t name_len = r.u16();
        if (name_len == 0) throw FormatError("weight container empty tensor name");
        r.need(name_len);
        std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
        r.pos += name_len;
        std::uint8_t dtype = r.u8();
        if (dtype != 0) throw FormatError("weight container unsupported dtype " + std::to_string(dtype));
        std::uint8_t rank = r.u8();
        if (rank < 1 || rank > 4) throw FormatError("weight container bad rank " + std::to_string(rank));
        std::vector<int> dims(rank);
        std::size_t total = 1;
        for (int i = 0; i < rank; ++i) {
            std::uint32_t d = r.u32();
            if (d == 0 || d > (1u << 30)) throw FormatError("weight container bad extent");
            dims[i] = static_cast<int>(d);
            total *= d;
            if (total > (std::size_t{1} << 30)) throw FormatError("weight container tensor too large");
        }
        // serialized tensors carry no layout tag; pick the natural one per rank
        Shape shape = rank == 1   ? Shape::vec(dims[0])
                      : rank == 2 ? Shape::mat(dims[0], dims[1])
                      : rank == 3 ? Shape({dims[0], dims[1], dims[2]},
                                          dims[0] == dims[1] ? Layout::kkc : Layout::hwc)
                                  : Shape::kkcd(dims[0], dims[2], dims[3]);
        if (rank == 4 && dims[0] != dims[1]) throw FormatError("weight container conv taps not square");
        Tensor tensor(shape, 0.0f);
        for (std::size_t i = 0; i < total; ++i) {
            float v = r.f32();
            if (!std::isfinite(v)) throw FormatError("weight container non-finite value in " + name);
            tensor[i] = v;
        }
        store.add(name, std::move(tensor));
    }
    if (r.pos != bytes.size() - 4) throw FormatError("weight container trailing bytes");
    return store;
}

inline void save_weights(const WeightStore& store, const std::string& path) {
    auto bytes = serialize_weights(store);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open weight file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("weight file write failed: " + path);
}

inline WeightStore load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open weight file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_weights(bytes);
}

}  // namespace mritherm
