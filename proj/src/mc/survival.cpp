#include "pcalab/mc/survival.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "parallel.hpp"
#include "pcalab/mc/checkpoint.hpp"
#include "pcalab/util/hash.hpp"

namespace pcalab::mc {

namespace {

class SurvivalWorker {
public:
    SurvivalWorker(std::size_t R, double eps, std::size_t L, std::uint64_t T, std::uint64_t seed)
        : stepper_({ca::Rule::ToomLadder}, noise::NoiseModel::up_biased(eps), ca::Lattice::ladder(L)),
          init_(ca::Lattice::ladder(L)),
          cur_(init_),
          tmp_(init_),
          R_(R),
          L_(L),
          T_(T),
          seed_(seed),
          counts(T - R + 1),
          edge_sum(R + 1) {
        for (long x = -static_cast<long>(R); x <= static_cast<long>(R); ++x) {
            const std::size_t col = static_cast<std::size_t>((x + static_cast<long>(L)) % static_cast<long>(L));
            init_.set(col, 0, true);
            init_.set(col, 1, true);
        }
    }

    void run(std::uint64_t stream) {
        const noise::RngStream rng(seed_, stream);
        cur_ = init_;
        std::size_t edge = R_;  // column offset from the origin, always in [0, L)
        edge_sum[0] += edge;
        const std::uint64_t n_max = T_ - R_ - 1;
        std::uint64_t delay = n_max + 1;  // censored
        for (std::uint64_t t = 0; t < T_; ++t) {
            stepper_.step(cur_, tmp_, rng, t);
            if (t + 1 <= R_) {
                edge = track_edge(edge);
                edge_sum[t + 1] += edge;
            }
            if (!cur_.get(0, 0)) {
                delay = t + 1 - (R_ + 1);
                break;
            }
        }
        ++counts[delay];
    }

private:
    // Right end of the top-rung run containing (or just left of) the old edge.
    std::size_t track_edge(std::size_t edge) const {
        while (edge > 0 && !cur_.get(edge % L_, 1)) --edge;
        while (edge + 1 < L_ && cur_.get((edge + 1) % L_, 1)) ++edge;
        return edge;
    }

    noise::NoisyStepper stepper_;
    ca::PackedRows init_, cur_, tmp_;
    std::size_t R_, L_;
    std::uint64_t T_, seed_;

public:
    std::vector<std::uint64_t> counts;    // counts[d] = trajectories with t_D == d; last = censored
    std::vector<std::uint64_t> edge_sum;  // sum of edge positions at t = 0..R
};

}  // namespace

double survival_bound(std::size_t R, double eps, double c, std::uint64_t n) {
    double p = 1.0;
    for (std::uint64_t k = 0; k < n; ++k) {
        const double extra = std::floor(c * eps * static_cast<double>(k));
        p *= 1.0 - std::pow(1.0 - eps, static_cast<double>(R) + extra + 1.0);
    }
    return p;
}

void SurvivalCurve::write_csv(std::ostream& os) const {
    os << "n,p,sem,bound\n";
    char buf[128];
    for (std::size_t i = 0; i < delays.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g\n", static_cast<unsigned long long>(delays[i]),
                      prob[i], sem[i], bound[i]);
        os << buf;
    }
}

SurvivalRun island_survival(std::size_t R, double eps, std::size_t L, std::uint64_t T, std::uint64_t n_traj,
                            const EnsembleOptions& options) {
    if (2 * L < 4 * R + 4) throw std::invalid_argument("island larger than lattice: need L >= 2R + 2");
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon must lie in [0,1]");
    if (T < R + 2) throw std::invalid_argument("T must exceed R + 1");
    if (n_traj < 1) throw std::invalid_argument("n_traj must be at least 1");

    const std::size_t n_counts = T - R + 1;
    const std::uint64_t fp = util::Fnv1a64{}
                                 .u64(options.config_hash)
                                 .str("island_survival")
                                 .u64(R)
                                 .f64(eps)
                                 .u64(L)
                                 .u64(T)
                                 .u64(n_traj)
                                 .value();
    std::vector<std::uint64_t> counts(n_counts), edges(R + 1);
    std::uint64_t done = 0;
    if (options.resume) {
        if (!options.checkpoint_path) throw std::invalid_argument("resume requested without a checkpoint path");
        const Checkpoint c = read_checkpoint(*options.checkpoint_path);
        if (c.kind != CheckpointKind::Survival || c.fingerprint != fp || c.seed != options.seed ||
            c.target != n_traj)
            throw CheckpointError("checkpoint does not belong to this configuration");
        if (c.payload.size() != n_counts + R + 1) throw CheckpointError("checkpoint payload has the wrong length");
        std::copy(c.payload.begin(), c.payload.begin() + static_cast<long>(n_counts), counts.begin());
        std::copy(c.payload.begin() + static_cast<long>(n_counts), c.payload.end(), edges.begin());
        done = c.next_stream;
        if (done > n_traj) throw CheckpointError("checkpoint is past its own target");
    }

    std::vector<SurvivalWorker> workers;
    for (unsigned i = 0; i < resolve_threads(options.threads); ++i) workers.emplace_back(R, eps, L, T, options.seed);
    const std::uint64_t unit = std::max<std::uint64_t>(1, options.checkpoint_every);
    bool interrupted = false;
    while (done < n_traj) {
        const std::uint64_t hi = std::min(n_traj, done + unit);
        detail::for_streams(done, hi, workers);
        for (auto& w : workers) {
            for (std::size_t i = 0; i < n_counts; ++i) counts[i] += std::exchange(w.counts[i], 0);
            for (std::size_t i = 0; i <= R; ++i) edges[i] += std::exchange(w.edge_sum[i], 0);
        }
        done = hi;
        if (options.checkpoint_path) {
            std::vector<std::uint64_t> payload(counts);
            payload.insert(payload.end(), edges.begin(), edges.end());
            write_checkpoint(*options.checkpoint_path,
                             {CheckpointKind::Survival, fp, options.seed, done, n_traj, std::move(payload)});
        }
        if (options.stop_after && done >= *options.stop_after && done < n_traj) {
            interrupted = true;
            break;
        }
    }

    SurvivalCurve curve;
    curve.R = R;
    curve.epsilon = eps;
    curve.n_traj = done;
    const double n = static_cast<double>(done);
    for (std::size_t t = 0; t <= R; ++t) curve.edge_mean.push_back(static_cast<double>(edges[t]) / n);
    // least-squares slope of the mean edge position over t = 0..R
    if (R >= 1 && eps > 0.0) {
        double st = 0, se = 0, stt = 0, ste = 0;
        for (std::size_t t = 0; t <= R; ++t) {
            st += t;
            se += curve.edge_mean[t];
            stt += static_cast<double>(t * t);
            ste += static_cast<double>(t) * curve.edge_mean[t];
        }
        const double m = static_cast<double>(R + 1);
        const double slope = (m * ste - st * se) / (m * stt - st * st);
        curve.c = std::max(0.0, slope) / eps;
    }
    std::uint64_t tail = 0;  // trajectories with t_D >= d, built from the top
    std::vector<std::uint64_t> at_least(n_counts);
    for (std::size_t d = n_counts; d-- > 0;) {
        tail += counts[d];
        at_least[d] = tail;
    }
    for (std::uint64_t d = 0; d + 1 < n_counts; ++d) {
        const double p = static_cast<double>(at_least[d]) / n;
        curve.delays.push_back(d);
        curve.prob.push_back(p);
        curve.sem.push_back(std::sqrt(p * (1.0 - p) / n));
        curve.bound.push_back(survival_bound(R, eps, curve.c, d));
    }
    return {curve, done, interrupted};
}

}  // namespace pcalab::mc
