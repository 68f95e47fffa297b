#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace foundry {

/// Flat key=value manifest. Every CLI run writes one with its fully resolved
/// configuration so any result can be reproduced from the file alone.
struct Manifest {
    std::map<std::string, std::string> values;

    void set(const std::string& key, const std::string& v) { values[key] = v; }
    void set_u64(const std::string& key, std::uint64_t v);
    void set_f64(const std::string& key, double v);

    bool has(const std::string& key) const { return values.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_f64(const std::string& key) const;

    std::uint64_t get_u64_or(const std::string& key, std::uint64_t fallback) const;
    double get_f64_or(const std::string& key, double fallback) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;

    void save(const std::string& path) const;
    static Manifest load(const std::string& path);
};

}  // namespace foundry
