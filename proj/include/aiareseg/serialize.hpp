#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "aiareseg/tensor.hpp"

namespace aia {

static_assert(std::endian::native == std::endian::little,
              "tensor file I/O assumes a little-endian host");

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raw tensor file: magic "AIARTNSR", u8 dtype (0=f32, 1=f64), u8 rank,
// little-endian u32 extents, then the little-endian payload.
namespace detail_io {

inline constexpr char kTensorMagic[8] = {'A', 'I', 'A', 'R', 'T', 'N', 'S', 'R'};

template <typename T>
constexpr uint8_t dtype_code() {
    if constexpr (std::is_same_v<T, float>) return 0;
    else if constexpr (std::is_same_v<T, double>) return 1;
    else static_assert(sizeof(T) == 0, "unsupported dtype");
}

template <typename T>
void write_tensor_stream(std::ostream& os, const Tensor<T>& t) {
    os.write(kTensorMagic, 8);
    uint8_t code = dtype_code<T>();
    uint8_t rank = static_cast<uint8_t>(t.rank());
    os.put(static_cast<char>(code));
    os.put(static_cast<char>(rank));
    for (size_t e : t.shape()) {
        uint32_t ext = static_cast<uint32_t>(e);
        os.write(reinterpret_cast<const char*>(&ext), 4);
    }
    os.write(reinterpret_cast<const char*>(t.data().data()),
             static_cast<std::streamsize>(t.size() * sizeof(T)));
}

template <typename T>
Tensor<T> read_tensor_stream(std::istream& is, const std::string& what) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kTensorMagic, 8) != 0)
        throw io_error("bad tensor magic in " + what);
    uint8_t code = static_cast<uint8_t>(is.get());
    uint8_t rank = static_cast<uint8_t>(is.get());
    if (code != dtype_code<T>())
        throw io_error("dtype mismatch in " + what + ": file has code " + std::to_string(code));
    Shape shape(rank);
    for (auto& e : shape) {
        uint32_t ext = 0;
        is.read(reinterpret_cast<char*>(&ext), 4);
        e = ext;
    }
    std::vector<T> data(numel(shape));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!is) throw io_error("truncated tensor payload in " + what);
    return Tensor<T>::from_data(std::move(shape), std::move(data));
}

} // namespace detail_io

template <typename T>
void save_tensor(const std::string& path, const Tensor<T>& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for write: " + path);
    detail_io::write_tensor_stream(f, t);
    if (!f) throw io_error("write failed: " + path);
}

template <typename T>
Tensor<T> load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    return detail_io::read_tensor_stream<T>(f, path);
}

// Checkpoint archive: magic "AIARCKPT", u32 entry count, then per entry a
// u32 name length, the name bytes, and a raw tensor blob.
template <typename T>
void save_checkpoint(const std::string& path, const std::map<std::string, Tensor<T>>& entries) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open for write: " + path);
    f.write("AIARCKPT", 8);
    uint32_t count = static_cast<uint32_t>(entries.size());
    f.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& [name, t] : entries) {
        uint32_t len = static_cast<uint32_t>(name.size());
        f.write(reinterpret_cast<const char*>(&len), 4);
        f.write(name.data(), len);
        detail_io::write_tensor_stream(f, t);
    }
    if (!f) throw io_error("write failed: " + path);
}

template <typename T>
std::map<std::string, Tensor<T>> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "AIARCKPT", 8) != 0)
        throw io_error("bad checkpoint magic in " + path);
    uint32_t count = 0;
    f.read(reinterpret_cast<char*>(&count), 4);
    std::map<std::string, Tensor<T>> entries;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t len = 0;
        f.read(reinterpret_cast<char*>(&len), 4);
        std::string name(len, '\0');
        f.read(name.data(), len);
        if (!f) throw io_error("truncated checkpoint entry in " + path);
        entries.emplace(name, detail_io::read_tensor_stream<T>(f, path + ":" + name));
    }
    return entries;
}

} // namespace aia
