#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcalab::mc {

/// Raised for unreadable, corrupt or mismatched checkpoints.
class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class CheckpointKind : std::uint32_t { Ensemble = 1, Survival = 2 };

/// Binary layout (little-endian):
///   "PCALAB01" | u16 version | u32 kind | u64 fingerprint | u64 seed |
///   u64 next_stream | u64 target | u64 n | n x u64 payload | u64 fnv1a64 of all preceding bytes
struct Checkpoint {
    static constexpr std::uint16_t kVersion = 1;

    CheckpointKind kind = CheckpointKind::Ensemble;
    std::uint64_t fingerprint = 0;
    std::uint64_t seed = 0;
    std::uint64_t next_stream = 0;
    std::uint64_t target = 0;
    std::vector<std::uint64_t> payload;
};

/// Writes via a temporary file and rename, so a crash never leaves a torn file.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace pcalab::mc
