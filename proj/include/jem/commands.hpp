#pragma once

#include <optional>
#include <string>

namespace jem {

/// CLI entry points. Each returns a process exit code: 0 success, 2 config
/// error, 3 run failure, 4 checkpoint error. All are deterministic given
/// (config, seed) and write machine-readable outputs into out_dir.
struct CommandOpts {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;  // overrides the config's seed
    int threads = 0;                    // 0 = library default
    bool resume = false;                // train only
};

int cmd_train(const CommandOpts& opts);
int cmd_sample(const CommandOpts& opts, const std::string& checkpoint, int method,
               int n, int steps);
int cmd_eval(const CommandOpts& opts, const std::string& checkpoint);
int cmd_ood(const CommandOpts& opts, const std::string& checkpoint);
int cmd_attack(const CommandOpts& opts, const std::string& checkpoint);
int cmd_distal(const CommandOpts& opts, const std::string& checkpoint,
               int target_class);

}  // namespace jem
