#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace pcalab::runner {

enum class Experiment {
    Relaxation,
    OrderScan,
    Spectrum,
    GapFit,
    ContourCheck,
    FirstOrder,
    ResolventMoment,
    LpplProbe,
    AsepGap,
    AsepResolvent,
    Pseudospectrum,
    WeakLink,
    Erosion,
    Survival,
    Census
};

std::string_view experiment_name(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view name);
const std::vector<Experiment>& all_experiments();
std::string_view experiment_summary(Experiment e);
/// Experiments that write checkpoints and honour --stop-after and resume.
bool is_resumable(Experiment e);

/// The configuration file violates the schema.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ParamType { Number, Integer, Bool, String, NumberList, IntegerList };

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::Number;
    nlohmann::json fallback;  ///< null -> required
    std::string help;
    std::optional<double> lo{}, hi{};  ///< inclusive bounds on numbers and list entries
    std::vector<std::string> choices{};
};

const std::vector<ParamSpec>& param_specs(Experiment e);

struct ExperimentConfig {
    Experiment experiment = Experiment::Relaxation;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    std::optional<unsigned> threads;
    nlohmann::json params = nlohmann::json::object();  ///< every key present, defaults filled in

    [[nodiscard]] nlohmann::json to_json() const;
    /// Digest of (experiment, seed, params): everything that determines the
    /// numbers. output_dir and threads are excluded.
    [[nodiscard]] std::uint64_t hash() const;
};

/// Strict parse: unknown or missing keys, wrong types and out-of-range values
/// throw SchemaError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Config key, then PCALAB_THREADS, then hardware concurrency.
unsigned effective_threads(const ExperimentConfig& config);

std::string hex64(std::uint64_t v);

}  // namespace pcalab::runner
