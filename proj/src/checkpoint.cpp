#include "foundry/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <map>

namespace foundry {

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw IoError("checkpoint: truncated header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace

void save_params(const std::string& path, const ParamSet& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    write_u64(os, params.items.size());
    for (const auto& [name, var] : params.items) {
        write_u64(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_ften(os, var->value);
    }
    if (!os) throw IoError("write failed: " + path);
}

void load_params(const std::string& path, ParamSet& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for read: " + path);
    const std::uint64_t n = read_u64(is);
    std::map<std::string, Tensor> loaded;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t len = read_u64(is);
        std::string name(len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(len));
        if (!is) throw IoError("checkpoint: truncated name");
        loaded.emplace(std::move(name), read_ften(is));
    }
    for (auto& [name, var] : params.items) {
        auto it = loaded.find(name);
        if (it == loaded.end()) throw IoError("checkpoint: missing parameter " + name);
        if (!it->second.same_shape(var->value))
            throw IoError("checkpoint: shape mismatch for " + name);
        var->value = it->second;
    }
}

}  // namespace foundry
