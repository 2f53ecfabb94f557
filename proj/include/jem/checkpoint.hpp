#pragma once

#include <string>

#include "jem/trainer.hpp"

namespace jem {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// "JEMC" container: versioned, little-endian, bit-exact round trip.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    TrainSnapshot snapshot;
    std::uint64_t dataset_hash = 0;
};

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over a string (dataset spec hashing).
std::uint64_t fnv1a(const std::string& s);

}  // namespace jem
