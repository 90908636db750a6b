#pragma once

// Binary named-tensor container, little-endian:
//   magic "VCD1" | version u32 | config blob (caller-defined, length-prefixed)
//   | layer count u32 | per layer: name len u32, name bytes, rank u32,
//   dims u32 each, raw f32 data.
// Weights files and persisted perturbations share this container.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "certwatch/tensor.hpp"

namespace certwatch {

inline constexpr char kContainerMagic[4] = {'V', 'C', 'D', '1'};
inline constexpr std::uint32_t kContainerVersion = 1;

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("tensor container: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32(std::ostream& os, float f) {
    std::uint32_t v;
    static_assert(sizeof(v) == sizeof(f));
    __builtin_memcpy(&v, &f, 4);
    write_u32(os, v);
}

inline float read_f32(std::istream& is) {
    std::uint32_t v = read_u32(is);
    float f;
    __builtin_memcpy(&f, &v, 4);
    return f;
}

} // namespace detail

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline void write_tensor_container(const std::string& path,
                                   const std::vector<unsigned char>& config_blob,
                                   const NamedTensors& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("tensor container: cannot open for writing: " + path);
    os.write(kContainerMagic, 4);
    detail::write_u32(os, kContainerVersion);
    detail::write_u32(os, static_cast<std::uint32_t>(config_blob.size()));
    os.write(reinterpret_cast<const char*>(config_blob.data()),
             static_cast<std::streamsize>(config_blob.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        detail::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (int d : t.shape) detail::write_u32(os, static_cast<std::uint32_t>(d));
        for (float f : t.data) detail::write_f32(os, f);
    }
    if (!os) throw std::runtime_error("tensor container: write failed: " + path);
}

struct TensorContainer {
    std::vector<unsigned char> config_blob;
    NamedTensors tensors;
};

inline TensorContainer read_tensor_container(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("tensor container: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != std::string(kContainerMagic, 4))
        throw std::runtime_error("tensor container: bad magic in " + path);
    std::uint32_t version = detail::read_u32(is);
    if (version != kContainerVersion)
        throw std::runtime_error("tensor container: unsupported version " +
                                 std::to_string(version) + " in " + path);
    TensorContainer out;
    std::uint32_t blob_len = detail::read_u32(is);
    out.config_blob.resize(blob_len);
    is.read(reinterpret_cast<char*>(out.config_blob.data()), blob_len);
    if (!is) throw std::runtime_error("tensor container: truncated file");
    std::uint32_t count = detail::read_u32(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t name_len = detail::read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw std::runtime_error("tensor container: truncated file");
        std::uint32_t rank = detail::read_u32(is);
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < rank; ++d)
            shape.push_back(static_cast<int>(detail::read_u32(is)));
        Tensor t(shape);
        for (int j = 0; j < t.numel(); ++j) t[j] = detail::read_f32(is);
        out.tensors.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

} // namespace certwatch
