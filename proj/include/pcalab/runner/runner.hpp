#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pcalab/runner/config.hpp"

namespace pcalab::runner {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitInternal = 1,
    kExitSchema = 2,
    kExitResource = 3,
    kExitNonConvergence = 4,
    kExitCheckpoint = 5,
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";

struct RunOptions {
    /// MC only: stop at the first checkpoint past this many trajectories.
    std::optional<std::uint64_t> stop_after{};
    bool resume = false;
};

struct RunOutcome {
    int exit_code = kExitOk;
    std::string status;   ///< complete | interrupted | nonconverged | failed
    std::string message;
    std::vector<std::filesystem::path> outputs;
};

/// Executes one experiment into config.output_dir: result files, a checkpoint
/// for MC experiments and manifest.json. Never throws; errors map to exit codes.
RunOutcome run(const ExperimentConfig& config, const RunOptions& options = {});

/// Loads, validates and runs a config file.
RunOutcome run_file(const std::filesystem::path& config_path, const RunOptions& options = {});

/// Continues the run that owns `checkpoint` (manifest.json in the same
/// directory). A completed run is a no-op; a bad checkpoint or a manifest
/// whose config hash does not match gives kExitCheckpoint.
RunOutcome resume(const std::filesystem::path& checkpoint, const RunOptions& options = {});

/// FNV-1a digest of a file's bytes.
std::uint64_t file_digest(const std::filesystem::path& path);

}  // namespace pcalab::runner
