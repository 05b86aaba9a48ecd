#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcalab/ca/bit_config.hpp"
#include "pcalab/ca/rules.hpp"
#include "pcalab/noise/noise_model.hpp"

namespace pcalab::mc {

enum class ObservableKind { MeanMagnetization, SiteOccupation, SurvivalIndicator };

struct Observable {
    ObservableKind kind = ObservableKind::MeanMagnetization;
    std::size_t site = 0;  ///< SiteOccupation only

    static Observable magnetization() { return {}; }
    static Observable site_occupation(std::size_t site) { return {ObservableKind::SiteOccupation, site}; }
    [[nodiscard]] std::string id() const;
};

struct TimeSeriesEnsemble {
    Observable observable;
    std::vector<std::uint64_t> times;
    std::vector<double> mean;
    std::vector<double> sem;
    std::vector<std::uint64_t> n_samples;
    /// Standard error of mean[t+1] - mean[t] from the per-trajectory increments;
    /// one entry shorter than `mean`. Empty when not measured.
    std::vector<double> diff_sem;

    [[nodiscard]] std::size_t size() const noexcept { return mean.size(); }
    /// Columns t,mean,sem,n.
    void write_csv(std::ostream& os) const;
};

/// Builds a series from independent per-time samples (no increment errors).
TimeSeriesEnsemble make_series(std::vector<double> mean, std::vector<double> sem, std::uint64_t n,
                               Observable obs = {});

/// Resolves 0 to the machine's parallelism.
unsigned resolve_threads(unsigned requested);

struct EnsembleOptions {
    std::uint64_t seed = 0;
    unsigned threads = 0;
    /// Extra key mixed into the checkpoint fingerprint (e.g. a config hash).
    std::uint64_t config_hash = 0;
    std::uint64_t checkpoint_every = 1'000'000;
    std::optional<std::filesystem::path> checkpoint_path{};
    /// Continue from this checkpoint instead of starting fresh.
    bool resume = false;
    /// Stop at the first checkpoint boundary at or past this many trajectories.
    std::optional<std::uint64_t> stop_after{};
};

struct EnsembleRun {
    TimeSeriesEnsemble series;
    std::uint64_t completed = 0;
    bool interrupted = false;
};

/// Runs n_traj noisy trajectories from `init` for T steps and averages the
/// observable at every t in 0..T. Trajectory k draws from RngStream(seed, k),
/// and all accumulation is in integers, so the result is bit-identical for
/// any thread count and any interruption pattern.
EnsembleRun run_ensemble(const ca::RuleSpec& rule, const noise::NoiseModel& noise, const ca::BitConfig& init,
                         std::uint64_t T, std::uint64_t n_traj, const Observable& observable,
                         const EnsembleOptions& options = {});

struct DecayPoint {
    std::uint64_t t = 0;
    std::optional<double> gamma;  ///< empty when Unreliable
    double error = 0.0;
};

/// Gamma(t) = -log((b(t+1)-b(t)) / (b(t)-b(t-1))) for t = 1..T-1. Entries
/// with a non-positive ratio or an increment below 3 standard errors are
/// flagged Unreliable.
std::vector<DecayPoint> decay_rate(const TimeSeriesEnsemble& series);

struct Plateau {
    double value = 0.0;
    double error = 0.0;
    std::uint64_t t_begin = 0, t_end = 0;
    std::size_t points = 0;
};

/// Inverse-variance weighted mean of the reliable Gamma(t) entries in
/// [t_begin, t_end]; nullopt if there are none.
std::optional<Plateau> gamma_plateau(const std::vector<DecayPoint>& gamma, std::uint64_t t_begin,
                                     std::uint64_t t_end);

struct ScanRow {
    double epsilon = 0.0;
    double plateau = 0.0;
    double sem = 0.0;
    bool drifting = false;
};

struct OrderScan {
    std::vector<ScanRow> rows;
    double epsilon_c = 0.0;
    /// Columns epsilon,plateau,sem,flag.
    void write_csv(std::ostream& os) const;
};

/// Stavskaya-type scan with up-biased noise from all zeros: plateau of the
/// magnetization averaged over the last quarter of [0, T], per epsilon.
OrderScan order_parameter_scan(const ca::RuleSpec& rule, const std::vector<double>& eps_grid, std::size_t L,
                               std::uint64_t T, std::uint64_t n_traj, const EnsembleOptions& options = {});

}  // namespace pcalab::mc
