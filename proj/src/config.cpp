#include "foundry/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "foundry/tensor.hpp"

namespace foundry {

void Manifest::set_u64(const std::string& key, std::uint64_t v) {
    values[key] = std::to_string(v);
}

void Manifest::set_f64(const std::string& key, double v) {
    // %.17g round-trips any double exactly.
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    values[key] = buf;
}

const std::string& Manifest::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw ArgumentError("manifest: missing key " + key);
    return it->second;
}

std::uint64_t Manifest::get_u64(const std::string& key) const {
    const std::string& s = get(key);
    std::uint64_t v = 0;
    if (std::sscanf(s.c_str(), "%" SCNu64, &v) != 1)
        throw ArgumentError("manifest: key " + key + " is not an integer: " + s);
    return v;
}

double Manifest::get_f64(const std::string& key) const {
    const std::string& s = get(key);
    double v = 0;
    if (std::sscanf(s.c_str(), "%lf", &v) != 1)
        throw ArgumentError("manifest: key " + key + " is not a number: " + s);
    return v;
}

std::uint64_t Manifest::get_u64_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_u64(key) : fallback;
}

double Manifest::get_f64_or(const std::string& key, double fallback) const {
    return has(key) ? get_f64(key) : fallback;
}

std::string Manifest::get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
}

void Manifest::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    for (const auto& [k, v] : values) os << k << "=" << v << "\n";
    if (!os) throw IoError("write failed: " + path);
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for read: " + path);
    Manifest m;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("manifest: malformed line in " + path);
        m.values[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return m;
}

}  // namespace foundry
