#pragma once

// SEDT binary tensor files and the multi-tensor archive used by checkpoints.
//
// SEDT record: magic "SEDT", u8 dtype (0 = f32, 1 = f64), u8 rank,
//              u64 dims[rank], little-endian payload.
// Archive:     magic "SEDA", u32 version, u64 count, then per entry
//              u32 name_len, name bytes, embedded SEDT record.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "seds/tensor.hpp"

namespace seds {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("unexpected end of stream");
    return v;
}

template <typename T>
constexpr std::uint8_t dtype_code() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? 0 : 1;
}

}  // namespace detail

template <typename T>
void write_sedt(std::ostream& os, const Tensor<T>& t) {
    os.write("SEDT", 4);
    detail::write_raw<std::uint8_t>(os, detail::dtype_code<T>());
    detail::write_raw<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) detail::write_raw<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.numel() * sizeof(T)));
}

template <typename T>
Tensor<T> read_sedt(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SEDT", 4) != 0) throw IoError("bad SEDT magic");
    std::uint8_t dtype = detail::read_raw<std::uint8_t>(is);
    std::uint8_t rank = detail::read_raw<std::uint8_t>(is);
    Shape shape(rank);
    for (auto& d : shape) d = detail::read_raw<std::uint64_t>(is);
    std::size_t n = numel(shape);
    std::vector<T> out(n);
    if (dtype == detail::dtype_code<T>()) {
        is.read(reinterpret_cast<char*>(out.data()),
                static_cast<std::streamsize>(n * sizeof(T)));
        if (!is) throw IoError("truncated SEDT payload");
    } else if (dtype == 0) {
        std::vector<float> tmp(n);
        is.read(reinterpret_cast<char*>(tmp.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (!is) throw IoError("truncated SEDT payload");
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(tmp[i]);
    } else if (dtype == 1) {
        std::vector<double> tmp(n);
        is.read(reinterpret_cast<char*>(tmp.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw IoError("truncated SEDT payload");
        for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(tmp[i]);
    } else {
        throw IoError("unknown SEDT dtype code " + std::to_string(dtype));
    }
    return Tensor<T>::from(std::move(shape), std::move(out));
}

template <typename T>
void save_sedt(const std::string& path, const Tensor<T>& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    write_sedt(os, t);
}

template <typename T>
Tensor<T> load_sedt(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path);
    return read_sedt<T>(is);
}

// Named tensors keyed by dotted parameter path, insertion ordered on write.
template <typename T>
void save_archive(const std::string& path,
                  const std::vector<std::pair<std::string, Tensor<T>>>& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write("SEDA", 4);
    detail::write_raw<std::uint32_t>(os, 1u);
    detail::write_raw<std::uint64_t>(os, entries.size());
    for (const auto& [name, t] : entries) {
        detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_sedt(os, t);
    }
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> load_archive(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SEDA", 4) != 0) throw IoError("bad archive magic in " + path);
    std::uint32_t version = detail::read_raw<std::uint32_t>(is);
    if (version != 1) throw IoError("unsupported archive version");
    std::uint64_t count = detail::read_raw<std::uint64_t>(is);
    std::vector<std::pair<std::string, Tensor<T>>> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t len = detail::read_raw<std::uint32_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw IoError("truncated archive entry name");
        out.emplace_back(std::move(name), read_sedt<T>(is));
    }
    return out;
}

}  // namespace seds
