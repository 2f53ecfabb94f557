#include "jem/config.hpp"

#include <fstream>
#include <sstream>

namespace jem {

namespace {
std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_string(ss.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": empty key");
        if (c.kv_.count(key))
            throw ConfigError("duplicate config key: " + key);
        c.kv_[key] = val;
        c.used_[key] = false;
    }
    return c;
}

bool RunConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string RunConfig::raw(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing config key: " + key);
    used_[key] = true;
    return it->second;
}

std::string RunConfig::get_str(const std::string& key) { return raw(key); }
std::string RunConfig::get_str(const std::string& key, const std::string& fb) {
    return has(key) ? raw(key) : fb;
}

double RunConfig::get_double(const std::string& key) {
    std::string v = raw(key);
    try {
        return std::stod(v);
    } catch (...) {
        throw ConfigError("config key " + key + ": not a number: " + v);
    }
}
double RunConfig::get_double(const std::string& key, double fb) {
    return has(key) ? get_double(key) : fb;
}

int RunConfig::get_int(const std::string& key) {
    std::string v = raw(key);
    try {
        return std::stoi(v);
    } catch (...) {
        throw ConfigError("config key " + key + ": not an integer: " + v);
    }
}
int RunConfig::get_int(const std::string& key, int fb) {
    return has(key) ? get_int(key) : fb;
}

std::uint64_t RunConfig::get_u64(const std::string& key) {
    std::string v = raw(key);
    try {
        return std::stoull(v);
    } catch (...) {
        throw ConfigError("config key " + key + ": not an integer: " + v);
    }
}
std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fb) {
    return has(key) ? get_u64(key) : fb;
}

bool RunConfig::get_bool(const std::string& key) {
    std::string v = raw(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key " + key + ": not a boolean: " + v);
}
bool RunConfig::get_bool(const std::string& key, bool fb) {
    return has(key) ? get_bool(key) : fb;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) {
    std::vector<int> out;
    for (const auto& tok : get_str_list(key)) {
        try {
            out.push_back(std::stoi(tok));
        } catch (...) {
            throw ConfigError("config key " + key + ": not an integer: " + tok);
        }
    }
    return out;
}

std::vector<std::string> RunConfig::get_str_list(const std::string& key) {
    std::string v = raw(key);
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

std::vector<std::string> RunConfig::get_str_list(
    const std::string& key, const std::vector<std::string>& fb) {
    return has(key) ? get_str_list(key) : fb;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    kv_[key] = value;
    used_[key] = true;
}

void RunConfig::reject_unknown() const {
    for (const auto& [key, used] : used_)
        if (!used) throw ConfigError("unknown config key: " + key);
}

std::string RunConfig::resolved() const {
    std::stringstream ss;
    for (const auto& [key, val] : kv_) ss << key << " = " << val << "\n";
    return ss.str();
}

}  // namespace jem
