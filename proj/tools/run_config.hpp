#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dnmx/core/entities.hpp"

namespace dnmx::cli {

/// Flat "section.key" → value table. Every key has a default; a config file
/// and then flags override it. Unknown keys are ConfigError.
class RunConfig {
public:
    RunConfig();

    /// Reads an INI file (key = value under [section] headers).
    void load_file(const std::filesystem::path& path);
    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;

    std::string str(const std::string& key) const { return get(key); }
    std::int64_t integer(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    std::uint64_t seed(const std::string& key) const;
    double real(const std::string& key) const;
    MarketId market(const std::string& key) const;
    std::vector<std::string> list(const std::string& key) const;

    /// Output root: run.out, else $EXTRACT_HOME, else ./extract_out.
    std::filesystem::path out_root() const;

    /// INI text of every key, sections and keys sorted. Loading it back
    /// reproduces this configuration.
    std::string snapshot() const;
    void write_snapshot(const std::filesystem::path& dir) const;

    static const std::vector<std::string>& keys();

private:
    std::map<std::string, std::string> values_;
};

} // namespace dnmx::cli
