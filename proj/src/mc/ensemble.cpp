#include "pcalab/mc/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "parallel.hpp"
#include "pcalab/mc/checkpoint.hpp"
#include "pcalab/util/hash.hpp"

namespace pcalab::mc {

namespace {

using i128 = __int128;

struct Sums {
    std::vector<std::uint64_t> s1, s2, cross;

    explicit Sums(std::uint64_t T = 0) : s1(T + 1), s2(T + 1), cross(T) {}
    void merge(const Sums& o) {
        for (std::size_t i = 0; i < s1.size(); ++i) {
            s1[i] += o.s1[i];
            s2[i] += o.s2[i];
        }
        for (std::size_t i = 0; i < cross.size(); ++i) cross[i] += o.cross[i];
    }
    [[nodiscard]] std::vector<std::uint64_t> pack() const {
        std::vector<std::uint64_t> p(s1);
        p.insert(p.end(), s2.begin(), s2.end());
        p.insert(p.end(), cross.begin(), cross.end());
        return p;
    }
    void unpack(const std::vector<std::uint64_t>& p) {
        const std::size_t n = s1.size();
        if (p.size() != 3 * n - 1) throw CheckpointError("checkpoint payload has the wrong length");
        std::copy(p.begin(), p.begin() + n, s1.begin());
        std::copy(p.begin() + n, p.begin() + 2 * n, s2.begin());
        std::copy(p.begin() + 2 * n, p.end(), cross.begin());
    }
};

double variance_of_mean(i128 sum, i128 sumsq, std::uint64_t n) {
    if (n < 2) return 0.0;
    const i128 num = static_cast<i128>(n) * sumsq - sum * sum;
    const long double var = static_cast<long double>(num) / (static_cast<long double>(n) * (n - 1));
    return static_cast<double>(std::max<long double>(var, 0.0L) / n);
}

class EnsembleWorker {
public:
    EnsembleWorker(const ca::RuleSpec& rule, const noise::NoiseModel& noise, const ca::BitConfig& init,
                   std::uint64_t T, const Observable& obs, std::uint64_t seed)
        : stepper_(rule, noise, init.lattice()),
          init_(ca::PackedRows::from_config(init)),
          cur_(init.lattice()),
          tmp_(init.lattice()),
          T_(T),
          obs_(obs),
          seed_(seed),
          sums(T) {}

    void run(std::uint64_t stream) {
        const noise::RngStream rng(seed_, stream);
        cur_ = init_;
        std::uint64_t prev = measure();
        sums.s1[0] += prev;
        sums.s2[0] += prev * prev;
        for (std::uint64_t t = 0; t < T_; ++t) {
            stepper_.step(cur_, tmp_, rng, t);
            const std::uint64_t k = measure();
            sums.s1[t + 1] += k;
            sums.s2[t + 1] += k * k;
            sums.cross[t] += k * prev;
            prev = k;
        }
    }

private:
    std::uint64_t measure() const {
        if (obs_.kind == ObservableKind::SiteOccupation) {
            const std::size_t L = cur_.row_length();
            return cur_.get(obs_.site % L, obs_.site / L) ? 1 : 0;
        }
        return cur_.count();
    }

    noise::NoisyStepper stepper_;
    ca::PackedRows init_, cur_, tmp_;
    std::uint64_t T_;
    Observable obs_;
    std::uint64_t seed_;

public:
    Sums sums;
};

std::uint64_t fingerprint(const ca::RuleSpec& rule, const noise::NoiseModel& noise, const ca::BitConfig& init,
                          std::uint64_t T, std::uint64_t n_traj, const Observable& obs, std::uint64_t config_hash) {
    util::Fnv1a64 h;
    h.u64(config_hash).str(rule.name()).u64(static_cast<std::uint64_t>(init.lattice().kind));
    h.u64(init.lattice().length).u64(init.lattice().rows());
    h.f64(noise.p_up()).f64(noise.p_down());
    for (const auto& [site, n] : noise.overrides()) h.u64(site).f64(n.p_up).f64(n.p_down);
    for (auto w : init.words()) h.u64(w);
    h.u64(T).u64(n_traj).str(obs.id());
    return h.value();
}

TimeSeriesEnsemble finish(const Sums& sums, std::uint64_t n, std::uint64_t T, const Observable& obs,
                          std::size_t sites) {
    const double norm = obs.kind == ObservableKind::MeanMagnetization ? static_cast<double>(sites) : 1.0;
    TimeSeriesEnsemble s;
    s.observable = obs;
    for (std::uint64_t t = 0; t <= T; ++t) {
        s.times.push_back(t);
        s.n_samples.push_back(n);
        s.mean.push_back(n ? static_cast<double>(sums.s1[t]) / (static_cast<double>(n) * norm) : 0.0);
        s.sem.push_back(std::sqrt(variance_of_mean(sums.s1[t], sums.s2[t], n)) / norm);
    }
    for (std::uint64_t t = 0; t < T; ++t) {
        const i128 d = static_cast<i128>(sums.s1[t + 1]) - static_cast<i128>(sums.s1[t]);
        const i128 d2 = static_cast<i128>(sums.s2[t + 1]) + sums.s2[t] - 2 * static_cast<i128>(sums.cross[t]);
        s.diff_sem.push_back(std::sqrt(variance_of_mean(d, d2, n)) / norm);
    }
    return s;
}

}  // namespace

std::string Observable::id() const {
    switch (kind) {
        case ObservableKind::MeanMagnetization: return "mean_magnetization";
        case ObservableKind::SiteOccupation: return "site_occupation(" + std::to_string(site) + ")";
        case ObservableKind::SurvivalIndicator: return "survival_indicator";
    }
    return "?";
}

void TimeSeriesEnsemble::write_csv(std::ostream& os) const {
    os << "t,mean,sem,n\n";
    char buf[128];
    for (std::size_t i = 0; i < mean.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%llu\n", static_cast<unsigned long long>(times[i]), mean[i],
                      sem[i], static_cast<unsigned long long>(n_samples[i]));
        os << buf;
    }
}

TimeSeriesEnsemble make_series(std::vector<double> mean, std::vector<double> sem, std::uint64_t n,
                               Observable obs) {
    if (mean.size() != sem.size()) throw std::invalid_argument("mean and sem lengths differ");
    TimeSeriesEnsemble s;
    s.observable = obs;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        s.times.push_back(i);
        s.n_samples.push_back(n);
    }
    s.mean = std::move(mean);
    s.sem = std::move(sem);
    return s;
}

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    return std::max(1U, std::thread::hardware_concurrency());
}

EnsembleRun run_ensemble(const ca::RuleSpec& rule, const noise::NoiseModel& noise, const ca::BitConfig& init,
                         std::uint64_t T, std::uint64_t n_traj, const Observable& observable,
                         const EnsembleOptions& options) {
    if (T < 1) throw std::invalid_argument("T must be at least 1");
    if (n_traj < 1) throw std::invalid_argument("n_traj must be at least 1");
    if (observable.kind == ObservableKind::SurvivalIndicator)
        throw std::invalid_argument("survival indicators are produced by island_survival");
    if (observable.kind == ObservableKind::SiteOccupation && observable.site >= init.size())
        throw std::invalid_argument("observed site outside the lattice");
    ca::check_compatible(rule, init.lattice());
    if (init.size() > (1U << 20)) throw std::invalid_argument("lattice too large for 64-bit moment sums");

    const std::uint64_t fp = fingerprint(rule, noise, init, T, n_traj, observable, options.config_hash);
    Sums total(T);
    std::uint64_t done = 0;
    if (options.resume) {
        if (!options.checkpoint_path) throw std::invalid_argument("resume requested without a checkpoint path");
        const Checkpoint c = read_checkpoint(*options.checkpoint_path);
        if (c.kind != CheckpointKind::Ensemble || c.fingerprint != fp || c.seed != options.seed ||
            c.target != n_traj)
            throw CheckpointError("checkpoint does not belong to this configuration");
        total.unpack(c.payload);
        done = c.next_stream;
        if (done > n_traj) throw CheckpointError("checkpoint is past its own target");
    }

    std::vector<EnsembleWorker> workers;
    const unsigned threads = resolve_threads(options.threads);
    for (unsigned i = 0; i < threads; ++i) workers.emplace_back(rule, noise, init, T, observable, options.seed);

    const std::uint64_t unit = std::max<std::uint64_t>(1, options.checkpoint_every);
    bool interrupted = false;
    while (done < n_traj) {
        const std::uint64_t hi = std::min(n_traj, done + unit);
        detail::for_streams(done, hi, workers);
        for (auto& w : workers) {
            total.merge(w.sums);
            w.sums = Sums(T);
        }
        done = hi;
        if (options.checkpoint_path)
            write_checkpoint(*options.checkpoint_path,
                             {CheckpointKind::Ensemble, fp, options.seed, done, n_traj, total.pack()});
        if (options.stop_after && done >= *options.stop_after && done < n_traj) {
            interrupted = true;
            break;
        }
    }
    return {finish(total, done, T, observable, init.size()), done, interrupted};
}

std::vector<DecayPoint> decay_rate(const TimeSeriesEnsemble& series) {
    const std::size_t n = series.size();
    if (n < 3) throw std::invalid_argument("decay_rate needs at least 3 points");
    auto dsem = [&](std::size_t t) {
        if (series.diff_sem.size() + 1 == n) return series.diff_sem[t];
        return std::hypot(series.sem[t], series.sem[t + 1]);
    };
    std::vector<DecayPoint> out;
    for (std::size_t t = 1; t + 1 < n; ++t) {
        DecayPoint p;
        p.t = series.times[t];
        const double d0 = series.mean[t] - series.mean[t - 1];
        const double d1 = series.mean[t + 1] - series.mean[t];
        const double s0 = dsem(t - 1), s1 = dsem(t);
        const bool resolved = std::abs(d0) >= 3 * s0 && std::abs(d1) >= 3 * s1;
        if (d0 != 0.0 && d1 != 0.0 && d1 / d0 > 0.0 && resolved) {
            p.gamma = -std::log(d1 / d0);
            p.error = std::hypot(s0 / d0, s1 / d1);
        }
        out.push_back(p);
    }
    return out;
}

std::optional<Plateau> gamma_plateau(const std::vector<DecayPoint>& gamma, std::uint64_t t_begin,
                                     std::uint64_t t_end) {
    double wsum = 0.0, wx = 0.0;
    Plateau p;
    p.t_begin = t_begin;
    p.t_end = t_end;
    bool exact = false;
    double exact_sum = 0.0;
    for (const auto& g : gamma) {
        if (!g.gamma || g.t < t_begin || g.t > t_end) continue;
        ++p.points;
        if (g.error == 0.0) {
            exact = true;
            exact_sum += *g.gamma;
            continue;
        }
        const double w = 1.0 / (g.error * g.error);
        wsum += w;
        wx += w * *g.gamma;
    }
    if (p.points == 0) return std::nullopt;
    if (exact) {
        p.value = exact_sum / static_cast<double>(p.points);
        return p;
    }
    p.value = wx / wsum;
    p.error = 1.0 / std::sqrt(wsum);
    return p;
}

void OrderScan::write_csv(std::ostream& os) const {
    os << "epsilon,plateau,sem,flag\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s\n", r.epsilon, r.plateau, r.sem,
                      r.drifting ? "drifting" : "ok");
        os << buf;
    }
}

namespace {

class ScanWorker {
public:
    ScanWorker(const ca::RuleSpec& rule, const noise::NoiseModel& noise, const ca::Lattice& lat, std::uint64_t T,
               std::uint64_t seed)
        : stepper_(rule, noise, lat), cur_(lat), tmp_(lat), T_(T), seed_(seed) {}

    void run(std::uint64_t stream) {
        const noise::RngStream rng(seed_, stream);
        cur_.fill(false);
        const std::uint64_t w0 = T_ - T_ / 4, mid = w0 + (T_ - w0) / 2;
        std::uint64_t first = 0, second = 0;
        for (std::uint64_t t = 0; t < T_; ++t) {
            stepper_.step(cur_, tmp_, rng, t);
            if (t + 1 <= w0) continue;
            (t + 1 <= mid ? first : second) += cur_.count();
        }
        const std::uint64_t w = first + second;
        sum += w;
        sumsq += static_cast<i128>(w) * w;
        // drift = second-half minus first-half window sums, scaled to equal lengths
        const i128 nf = static_cast<i128>(mid - w0), ns = static_cast<i128>(T_ - mid);
        const i128 d = static_cast<i128>(second) * nf - static_cast<i128>(first) * ns;
        dsum += d;
        dsumsq += d * d;
    }

    i128 sum = 0, sumsq = 0, dsum = 0, dsumsq = 0;

private:
    noise::NoisyStepper stepper_;
    ca::PackedRows cur_, tmp_;
    std::uint64_t T_, seed_;
};

double mean_sem(i128 sum, i128 sumsq, std::uint64_t n, double& sem) {
    const long double mean = static_cast<long double>(sum) / n;
    long double var = 0.0L;
    if (n > 1) var = (static_cast<long double>(sumsq) - mean * static_cast<long double>(sum)) / (n - 1);
    sem = static_cast<double>(std::sqrt(std::max<long double>(var, 0.0L) / n));
    return static_cast<double>(mean);
}

}  // namespace

OrderScan order_parameter_scan(const ca::RuleSpec& rule, const std::vector<double>& eps_grid, std::size_t L,
                               std::uint64_t T, std::uint64_t n_traj, const EnsembleOptions& options) {
    if (eps_grid.empty()) throw std::invalid_argument("empty epsilon grid");
    if (T < 8) throw std::invalid_argument("T must be at least 8 for a plateau window");
    if (n_traj < 1) throw std::invalid_argument("n_traj must be at least 1");
    const ca::Lattice lat = rule.lattice_kind() == ca::LatticeKind::Chain1D   ? ca::Lattice::chain(L)
                            : rule.lattice_kind() == ca::LatticeKind::Ladder2xL ? ca::Lattice::ladder(L)
                                                                                 : ca::Lattice::torus(L, L);
    ca::check_compatible(rule, lat);
    const std::uint64_t w0 = T - T / 4;
    const double window = static_cast<double>(T - w0);
    const double N = static_cast<double>(lat.site_count());
    OrderScan scan;
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        const double eps = eps_grid[i];
        const auto noise = noise::NoiseModel::up_biased(eps);
        std::vector<ScanWorker> workers;
        for (unsigned k = 0; k < resolve_threads(options.threads); ++k)
            workers.emplace_back(rule, noise, lat, T, util::Fnv1a64{}.u64(options.seed).f64(eps).value());
        detail::for_streams(0, n_traj, workers);
        i128 sum = 0, sumsq = 0, dsum = 0, dsumsq = 0;
        for (const auto& w : workers) {
            sum += w.sum;
            sumsq += w.sumsq;
            dsum += w.dsum;
            dsumsq += w.dsumsq;
        }
        ScanRow row;
        row.epsilon = eps;
        double sem = 0.0, dsem = 0.0;
        row.plateau = mean_sem(sum, sumsq, n_traj, sem) / (window * N);
        row.sem = sem / (window * N);
        const double drift = mean_sem(dsum, dsumsq, n_traj, dsem);
        row.drifting = std::abs(drift) > 3.0 * dsem && std::abs(drift) > 0.0;
        scan.rows.push_back(row);
    }
    // steepest rise: largest centred slope of the plateau curve
    const auto& r = scan.rows;
    double best = -1.0;
    scan.epsilon_c = r.front().epsilon;
    for (std::size_t i = 0; i < r.size() && r.size() > 1; ++i) {
        const std::size_t lo = i == 0 ? 0 : i - 1, hi = i + 1 == r.size() ? i : i + 1;
        const double slope = (r[hi].plateau - r[lo].plateau) / (r[hi].epsilon - r[lo].epsilon);
        if (slope > best) {
            best = slope;
            scan.epsilon_c = r[i].epsilon;
        }
    }
    return scan;
}

}  // namespace pcalab::mc
