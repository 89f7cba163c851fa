#include "holo/serialization.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace holo {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'T', 'E', 'N', 'S', '1', '\0'};

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error(path + ": truncated tensor container");
}

}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(kMagic, 8);
    write_pod(out, uint32_t{1});
    write_pod(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        write_pod(out, static_cast<uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, static_cast<uint8_t>(t.shape.size()));
        for (int d : t.shape) write_pod(out, static_cast<uint32_t>(d));
        for (double v : t.data) write_pod(out, static_cast<float>(v));
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(path + ": not a tensor container");
    uint32_t version, count;
    read_pod(in, version, path);
    if (version != 1) throw std::runtime_error(path + ": unsupported container version");
    read_pod(in, count, path);
    std::vector<std::pair<std::string, Tensor>> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t name_len;
        read_pod(in, name_len, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw std::runtime_error(path + ": truncated tensor name");
        uint8_t ndim;
        read_pod(in, ndim, path);
        std::vector<int> shape(ndim);
        for (auto& d : shape) {
            uint32_t v;
            read_pod(in, v, path);
            d = static_cast<int>(v);
        }
        Tensor t(shape);
        for (double& v : t.data) {
            float f;
            read_pod(in, f, path);
            v = f;
        }
        tensors.emplace_back(std::move(name), std::move(t));
    }
    return tensors;
}

}  // namespace holo
