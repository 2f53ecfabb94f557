#pragma once

#include <map>
#include <string>
#include <vector>

#include "jem/data.hpp"  // ConfigError

namespace jem {

/// Plain key=value run configuration. '#' starts a comment. Every key read
/// is tracked; reject_unknown() fails on keys nobody consumed, and a missing
/// key raises a ConfigError naming it.
class RunConfig {
  public:
    static RunConfig load(const std::string& path);
    static RunConfig from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_str(const std::string& key);
    std::string get_str(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key);
    double get_double(const std::string& key, double fallback);
    int get_int(const std::string& key);
    int get_int(const std::string& key, int fallback);
    std::uint64_t get_u64(const std::string& key);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key);
    bool get_bool(const std::string& key, bool fallback);
    std::vector<int> get_int_list(const std::string& key);
    std::vector<std::string> get_str_list(const std::string& key);
    std::vector<std::string> get_str_list(const std::string& key,
                                          const std::vector<std::string>& fallback);

    void set(const std::string& key, const std::string& value);
    void reject_unknown() const;
    /// key=value dump of everything, sorted, for echoing into the output dir.
    std::string resolved() const;

  private:
    std::string raw(const std::string& key);
    std::map<std::string, std::string> kv_;
    mutable std::map<std::string, bool> used_;
};

}  // namespace jem
