#include "pcalab/runner/runner.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <iterator>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "pcalab/asep/asep.hpp"
#include "pcalab/census/census.hpp"
#include "pcalab/markov/analysis.hpp"
#include "pcalab/markov/operator.hpp"
#include "pcalab/markov/spectrum.hpp"
#include "pcalab/mc/checkpoint.hpp"
#include "pcalab/mc/ensemble.hpp"
#include "pcalab/mc/erosion.hpp"
#include "pcalab/mc/survival.hpp"
#include "pcalab/util/errors.hpp"
#include "pcalab/util/hash.hpp"

namespace pcalab::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

/// Exclusive advisory lock on the output directory, released on exit.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) {
        const auto path = dir / ".pcalab.lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw std::runtime_error("cannot open lock " + path.string());
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw ResourceError("output directory " + dir.string() + " is in use by another run");
        }
    }
    ~DirLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    int fd_ = -1;
};

struct Ctx {
    const ExperimentConfig& config;
    const json& p;
    fs::path dir;
    unsigned threads = 1;
    RunOptions options;
    std::vector<fs::path> outputs;

    void write(const std::string& name, const std::string& content) {
        write_atomic(dir / name, content);
        if (std::find(outputs.begin(), outputs.end(), fs::path(name)) == outputs.end()) outputs.emplace_back(name);
    }
    template <class F>
    void write_with(const std::string& name, F&& f) {
        std::ostringstream os;
        f(os);
        write(name, os.str());
    }
    [[nodiscard]] double num(const char* k) const { return p.at(k).get<double>(); }
    [[nodiscard]] std::uint64_t u(const char* k) const { return p.at(k).get<std::uint64_t>(); }
    [[nodiscard]] std::string str(const char* k) const { return p.at(k).get<std::string>(); }
    [[nodiscard]] bool flag(const char* k) const { return p.at(k).get<bool>(); }
    [[nodiscard]] std::vector<std::size_t> sizes(const char* k) const { return p.at(k).get<std::vector<std::size_t>>(); }
    [[nodiscard]] std::vector<double> nums(const char* k) const { return p.at(k).get<std::vector<double>>(); }
    [[nodiscard]] ca::RuleSpec rule() const { return ca::parse_rule(str("rule")); }
    [[nodiscard]] noise::NoiseModel noise() const {
        const double eps = num("epsilon");
        const auto b = str("bias");
        if (b == "up") return noise::NoiseModel::up_biased(eps);
        if (b == "down") return noise::NoiseModel::down_biased(eps);
        return {eps, eps};
    }
    [[nodiscard]] mc::EnsembleOptions ensemble(bool checkpointed) const {
        mc::EnsembleOptions o;
        o.seed = config.seed;
        o.threads = threads;
        o.config_hash = config.hash();
        if (checkpointed) {
            o.checkpoint_every = u("checkpoint_every");
            o.checkpoint_path = dir / kCheckpointFile;
            o.resume = options.resume;
            o.stop_after = options.stop_after;
        }
        return o;
    }
};

struct Result {
    int exit_code = kExitOk;
    std::string status = "complete";
    std::string message;
};

Result nonconverged(std::string msg) { return {kExitNonConvergence, "nonconverged", std::move(msg)}; }

/// fn(i) for i < n on up to `threads` workers; the first failure by index is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1U, threads), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

json complex_json(std::complex<double> z) { return {{"re", z.real()}, {"im", z.imag()}}; }

// ---- experiments ----

Result relaxation(Ctx& c) {
    const auto rule = c.rule();
    const auto lat = markov::lattice_for(rule, c.u("L"));
    const auto init = c.str("init") == "ones" ? ca::BitConfig::ones(lat) : ca::BitConfig::zeros(lat);
    const auto obs = c.str("observable") == "site" ? mc::Observable::site_occupation(c.u("site"))
                                                   : mc::Observable::magnetization();
    const std::uint64_t T = c.u("T");
    const auto run = mc::run_ensemble(rule, c.noise(), init, T, c.u("n_traj"), obs, c.ensemble(true));
    if (run.interrupted)
        return {kExitOk, "interrupted", "stopped after " + std::to_string(run.completed) + " trajectories"};

    c.write_with("magnetization.csv", [&](std::ostream& os) { run.series.write_csv(os); });
    const auto gamma = mc::decay_rate(run.series);
    c.write_with("gamma.csv", [&](std::ostream& os) {
        os << "t,gamma,error,reliable\n";
        for (const auto& g : gamma)
            os << g.t << ',' << (g.gamma ? g17(*g.gamma) : "nan") << ',' << g17(g.error) << ',' << (g.gamma ? 1 : 0)
               << '\n';
    });
    const std::uint64_t t0 = c.u("plateau_begin") ? c.u("plateau_begin") : T / 2;
    const std::uint64_t t1 = c.u("plateau_end") ? c.u("plateau_end") : T - 1;
    json s;
    s["observable"] = obs.id();
    s["lattice"] = lat.describe();
    s["n_traj"] = run.completed;
    s["final_mean"] = run.series.mean.back();
    s["final_sem"] = run.series.sem.back();
    if (const auto pl = mc::gamma_plateau(gamma, t0, t1))
        s["gamma_plateau"] = {{"value", pl->value}, {"error", pl->error}, {"t_begin", pl->t_begin},
                              {"t_end", pl->t_end}, {"points", pl->points}};
    else
        s["gamma_plateau"] = nullptr;
    c.write("summary.json", s.dump(2) + "\n");
    return {};
}

Result order_scan(Ctx& c) {
    const auto scan = mc::order_parameter_scan(c.rule(), c.nums("eps_grid"), c.u("L"), c.u("T"), c.u("n_traj"),
                                               c.ensemble(false));
    c.write_with("order_scan.csv", [&](std::ostream& os) { scan.write_csv(os); });
    json s;
    s["epsilon_c"] = scan.epsilon_c;
    c.write("summary.json", s.dump(2) + "\n");
    return {};
}

Result spectrum(Ctx& c) {
    const auto rule = c.rule();
    const markov::TransitionOperator op(rule, c.noise(), markov::lattice_for(rule, c.u("L")));
    try {
        const auto rep = markov::leading_spectrum(op, c.u("k"), c.num("tol"), c.u("max_restarts"));
        auto j = json::parse(markov::spectrum_json(rep));
        j["converged"] = true;
        j["restarts"] = rep.restarts;
        c.write("spectrum.json", j.dump(2) + "\n");
        return {};
    } catch (const ConvergenceError& e) {
        json j{{"rule", rule.name()}, {"epsilon", c.num("epsilon")}, {"L", c.u("L")},
               {"converged", false}, {"message", e.what()}, {"best_residuals", e.best_residuals()}};
        c.write("spectrum.json", j.dump(2) + "\n");
        return nonconverged(e.what());
    }
}

Result gap_fit(Ctx& c) {
    const auto rule = c.rule();
    const auto noise = c.noise();
    const auto sizes = c.sizes("sizes");
    struct Row {
        std::optional<markov::SpectrumReport> rep;
        std::string error;
    };
    std::vector<Row> rows(sizes.size());
    parallel_for(sizes.size(), c.threads, [&](std::size_t i) {
        const markov::TransitionOperator op(rule, noise, markov::lattice_for(rule, sizes[i]));
        try {
            rows[i].rep = markov::leading_spectrum(op, c.u("k"), c.num("tol"), c.u("max_restarts"));
        } catch (const ConvergenceError& e) {
            rows[i].error = e.what();
        }
    });

    std::vector<std::pair<double, double>> pts;
    json j{{"rule", rule.name()}, {"epsilon", c.num("epsilon")}, {"bias", c.str("bias")}};
    auto& jr = j["rows"] = json::array();
    std::ostringstream csv;
    csv << "L,abs_lambda1,one_minus_abs_lambda1,minus_log_abs_lambda2,max_residual,converged\n";
    bool all = true;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!rows[i].rep) {
            all = false;
            csv << sizes[i] << ",nan,nan,nan,nan,0\n";
            jr.push_back({{"L", sizes[i]}, {"converged", false}, {"message", rows[i].error}});
            continue;
        }
        const auto& r = *rows[i].rep;
        const double a1 = std::abs(r.eigenvalues[1]);
        const double g2 = r.minus_log_modulus(2);
        const double res = *std::max_element(r.residuals.begin(), r.residuals.end());
        pts.emplace_back(static_cast<double>(sizes[i]), g2);
        csv << sizes[i] << ',' << g17(a1) << ',' << g17(1.0 - a1) << ',' << g17(g2) << ',' << g17(res) << ",1\n";
        json ev = json::array();
        for (auto z : r.eigenvalues) ev.push_back(complex_json(z));
        jr.push_back({{"L", sizes[i]}, {"converged", true}, {"eigenvalues", ev}, {"max_residual", res}});
    }
    c.write("gap_fit.csv", csv.str());
    std::set<double> distinct;
    for (const auto& pt : pts) distinct.insert(pt.first);
    if (distinct.size() >= 3) {
        const auto fit = markov::gap_extrapolate(pts);
        j["fit"] = {{"delta", fit.delta}, {"c", fit.c}, {"rms", fit.rms}};
    } else {
        j["fit"] = nullptr;
    }
    c.write("gap_fit.json", j.dump(2) + "\n");
    return all ? Result{} : nonconverged("some sizes did not converge");
}

Result contour(Ctx& c) {
    std::ostringstream os;
    os << "epsilon,t_max,checked,violations,worst_ratio,worst_t,worst_set,out_of_proven_regime\n";
    for (double eps : c.nums("epsilons")) {
        const auto s = markov::contour_sweep(c.u("L"), eps, c.u("t_max"));
        os << g17(eps) << ',' << c.u("t_max") << ',' << s.checked << ',' << s.violations << ',' << g17(s.worst_ratio)
           << ',' << s.worst_t << ',' << s.worst_set << ',' << (s.out_of_proven_regime ? 1 : 0) << '\n';
    }
    c.write("contour.csv", os.str());
    return {};
}

Result first_order(Ctx& c) {
    const auto rule = c.rule();
    const auto bias = c.str("bias") == "up" ? markov::Bias::Up : markov::Bias::Down;
    const bool fd = c.flag("finite_difference");
    const std::size_t L = c.u("L"), x = c.u("site");
    std::ostringstream os;
    os << "t,analytic" << (fd ? ",finite_difference" : "") << '\n';
    for (std::uint64_t t = c.u("t_min"); t <= c.u("t_max"); ++t) {
        os << t << ',' << g17(markov::first_order_response(rule, bias, x, t, L));
        if (fd) os << ',' << g17(markov::first_order_response_fd(rule, bias, x, t, L, c.num("h")));
        os << '\n';
    }
    c.write("first_order.csv", os.str());
    return {};
}

Result resolvent(Ctx& c) {
    const auto sizes = c.sizes("sizes");
    const auto orders = c.sizes("orders");
    const bool tasep = c.str("system") == "tasep";
    std::vector<std::vector<markov::ResolventMoment>> out(sizes.size());
    parallel_for(sizes.size(), c.threads, [&](std::size_t i) {
        const std::size_t L = sizes[i];
        if (tasep) {
            const std::size_t T = c.u("truncation") ? c.u("truncation") : 4 * L;
            for (auto n : orders) out[i].push_back(asep::tasep_resolvent_moment(L, n, T));
            return;
        }
        const markov::TransitionOperator op({ca::Rule::Stavskaya}, noise::NoiseModel::up_biased(c.num("epsilon")),
                                            ca::Lattice::chain(L));
        for (auto n : orders) {
            markov::ResolventOptions o;
            o.order = n;
            o.truncation = c.u("truncation");
            o.near_unit = c.num("near_unit");
            out[i].push_back(markov::stavskaya_resolvent_moment(op, o));
        }
    });
    std::ostringstream os;
    os << "system,L,order,value,tail,converged,truncation,projected,gap_estimate\n";
    bool all = true;
    for (std::size_t i = 0; i < sizes.size(); ++i)
        for (std::size_t k = 0; k < orders.size(); ++k) {
            const auto& m = out[i][k];
            all = all && m.converged;
            os << c.str("system") << ',' << sizes[i] << ',' << orders[k] << ',' << g17(m.value) << ',' << g17(m.tail)
               << ',' << (m.converged ? 1 : 0) << ',' << m.truncation << ',' << m.projected << ','
               << g17(m.gap_estimate) << '\n';
        }
    c.write("resolvent_moment.csv", os.str());
    return all ? Result{} : nonconverged("truncated sum did not settle for some entries");
}

Result lppl(Ctx& c) {
    const auto rule = c.rule();
    const auto r = markov::lppl_probe(rule, c.noise(), c.u("site"), c.num("delta"), c.u("L"), c.u("t_star"));
    c.write_with("lppl.csv", [&](std::ostream& os) {
        os << "distance,max_change\n";
        for (const auto& row : r.table) os << row.distance << ',' << g17(row.max_change) << '\n';
    });
    const auto lat = markov::lattice_for(rule, c.u("L"));
    c.write_with("lppl_sites.csv", [&](std::ostream& os) {
        os << "site,distance,change\n";
        for (std::size_t s = 0; s < r.change.size(); ++s)
            os << s << ',' << markov::lattice_distance(lat, s, c.u("site")) << ',' << g17(r.change[s]) << '\n';
    });
    json j{{"decay_length", r.decay_length}, {"r_squared", r.r_squared}, {"t_star", r.t_star}};
    c.write("lppl.json", j.dump(2) + "\n");
    return {};
}

Result asep_gap(Ctx& c) {
    std::ostringstream os;
    os << "L,gap\n";
    for (auto L : c.sizes("sizes"))
        os << L << ',' << g17(asep::asep_gap(asep::build_asep(L, c.num("gamma_L"), c.num("gamma_R"), c.num("delta"))))
           << '\n';
    c.write("asep_gap.csv", os.str());
    return {};
}

Result asep_resolvent(Ctx& c) {
    const double gl = c.num("gamma_L"), gr = c.num("gamma_R"), dl = c.num("delta");
    const bool closed = gl == 0.0 && dl == 0.0 && gr > 0.0;
    std::ostringstream os;
    os << "L,z,re,im,closed_form,time_integral,singular\n";
    for (auto L : c.sizes("sizes")) {
        const auto a = asep::build_asep(L, gl, gr, dl);
        const auto o = asep::last_site_vacancy(L);
        const auto w = asep::first_site_mass(L);
        for (double z : c.nums("z")) {
            os << L << ',' << g17(z) << ',';
            try {
                const auto r = asep::asep_resolvent(a, o, w, z);
                os << g17(r.real()) << ',' << g17(r.imag()) << ",";
            } catch (const std::domain_error&) {
                os << "nan,nan,";
                if (closed) os << g17(asep::tasep_closed_form(L, gr, -z).real());
                os << ",,1\n";
                continue;
            }
            if (closed) os << g17(asep::tasep_closed_form(L, gr, -z).real());
            os << ',';
            if (c.flag("time_integral") && z >= 0.0) os << g17(asep::asep_resolvent_time_integral(a, o, w, z).real());
            os << ",0\n";
        }
    }
    c.write("asep_resolvent.csv", os.str());
    return {};
}

Result pseudospectrum(Ctx& c) {
    const auto a = asep::build_asep(c.u("L"), c.num("gamma_L"), c.num("gamma_R"), c.num("delta"));
    const auto grid = asep::pseudospectrum_grid(a, c.num("re_min"), c.num("re_max"), c.num("im_min"), c.num("im_max"),
                                                c.u("nx"), c.u("ny"));
    c.write_with("pseudospectrum.csv", [&](std::ostream& os) { asep::write_pseudospectrum_csv(os, grid); });
    return {};
}

Result weak_link(Ctx& c) {
    const auto rows = asep::weak_link_scan(c.num("gamma_L"), c.num("gamma_R"), c.nums("deltas"), c.sizes("sizes"));
    c.write_with("weak_link.csv", [&](std::ostream& os) { asep::write_weak_link_csv(os, rows); });
    return {};
}

Result erosion(Ctx& c) {
    const auto sizes = c.sizes("sizes");
    const std::size_t extent = c.u("extent") ? c.u("extent") : 2 * *std::max_element(sizes.begin(), sizes.end()) + 8;
    const auto e = mc::erosion_scaling(c.rule(), sizes, extent, c.u("max_steps"), c.config.seed,
                                       static_cast<unsigned>(c.u("samples")));
    c.write_with("erosion.csv", [&](std::ostream& os) { e.write_csv(os); });
    json j{{"rule", c.str("rule")}, {"extent", extent}, {"exponent", e.exponent}, {"prefactor", e.prefactor}};
    auto& to = j["timed_out"] = json::array();
    for (const auto& pt : e.points)
        if (!pt.steps) to.push_back(pt.R);
    c.write("erosion.json", j.dump(2) + "\n");
    return {};
}

Result survival(Ctx& c) {
    const auto run = mc::island_survival(c.u("R"), c.num("epsilon"), c.u("L"), c.u("T"), c.u("n_traj"),
                                         c.ensemble(true));
    if (run.interrupted)
        return {kExitOk, "interrupted", "stopped after " + std::to_string(run.completed) + " trajectories"};
    c.write_with("survival.csv", [&](std::ostream& os) { run.curve.write_csv(os); });
    json j{{"R", run.curve.R}, {"epsilon", run.curve.epsilon}, {"c", run.curve.c}, {"n_traj", run.curve.n_traj},
           {"edge_mean", run.curve.edge_mean}};
    c.write("survival.json", j.dump(2) + "\n");
    return {};
}

Result census_run(Ctx& c) {
    const auto rule = c.rule();
    const auto sizes = c.sizes("sizes");
    std::vector<census::CycleCensus> res(sizes.size());
    std::vector<std::optional<census::SpectrumComparison>> cmp(sizes.size());
    const bool spec = c.flag("with_spectrum");
    // the traversal is single threaded; sizes run side by side
    parallel_for(sizes.size(), c.threads, [&](std::size_t i) {
        const auto n = markov::lattice_for(rule, sizes[i]).site_count();
        if (spec && n <= 12) {
            cmp[i] = census::census_vs_spectrum(rule, sizes[i]);
            res[i] = cmp[i]->census;
        } else {
            res[i] = census::enumerate_cycles(rule, sizes[i]);
        }
    });
    std::ostringstream os;
    census::write_census_csv_header(os);
    json all = json::array();
    for (const auto& r : res) {
        census::write_census_csv_row(os, r);
        all.push_back(json::parse(census::census_json(r)));
    }
    c.write("census.csv", os.str());
    c.write("census.json", all.dump(2) + "\n");
    if (spec) {
        std::ostringstream cs;
        cs << "rule,L,n_cycles,eig_unit,n_periodic_states,eig_modulus1,agrees\n";
        for (const auto& s : cmp)
            if (s)
                cs << s->census.rule << ',' << s->census.L << ',' << s->census.n_cycles << ',' << s->eig_unit << ','
                   << s->census.n_periodic_states << ',' << s->eig_modulus1 << ',' << (s->agrees() ? 1 : 0) << '\n';
        c.write("census_spectrum.csv", cs.str());
    }
    return {};
}

using Handler = Result (*)(Ctx&);

Handler handler(Experiment e) {
    switch (e) {
        case Experiment::Relaxation: return relaxation;
        case Experiment::OrderScan: return order_scan;
        case Experiment::Spectrum: return spectrum;
        case Experiment::GapFit: return gap_fit;
        case Experiment::ContourCheck: return contour;
        case Experiment::FirstOrder: return first_order;
        case Experiment::ResolventMoment: return resolvent;
        case Experiment::LpplProbe: return lppl;
        case Experiment::AsepGap: return asep_gap;
        case Experiment::AsepResolvent: return asep_resolvent;
        case Experiment::Pseudospectrum: return pseudospectrum;
        case Experiment::WeakLink: return weak_link;
        case Experiment::Erosion: return erosion;
        case Experiment::Survival: return survival;
        case Experiment::Census: return census_run;
    }
    throw std::logic_error("unknown experiment");
}

/// Size limits checked before anything is written.
void preflight(const ExperimentConfig& cfg) {
    const auto& p = cfg.params;
    const auto sites = [&](std::size_t L) { return markov::lattice_for(ca::parse_rule(p.at("rule").get<std::string>()), L).site_count(); };
    const auto exact = [](std::size_t n) {
        if (n > markov::kMaxExactSites)
            throw ResourceError("exact state space of " + std::to_string(n) + " sites exceeds the limit of " +
                                std::to_string(markov::kMaxExactSites));
    };
    switch (cfg.experiment) {
        case Experiment::Spectrum:
        case Experiment::LpplProbe: exact(sites(p.at("L").get<std::size_t>())); break;
        case Experiment::FirstOrder:
            if (p.at("finite_difference").get<bool>()) exact(sites(p.at("L").get<std::size_t>()));
            break;
        case Experiment::GapFit:
            for (auto L : p.at("sizes").get<std::vector<std::size_t>>()) exact(sites(L));
            break;
        case Experiment::ContourCheck: exact(p.at("L").get<std::size_t>()); break;
        case Experiment::ResolventMoment:
            if (p.at("system") == "stavskaya")
                for (auto L : p.at("sizes").get<std::vector<std::size_t>>()) exact(L);
            break;
        case Experiment::Census:
            for (auto L : p.at("sizes").get<std::vector<std::size_t>>())
                if (const auto n = sites(L); n > census::kMaxCensusSites)
                    throw ResourceError("census of " + std::to_string(n) + " sites exceeds the limit of " +
                                        std::to_string(census::kMaxCensusSites) + " (about " +
                                        std::to_string((std::uint64_t{1} << std::min<std::size_t>(n, 62)) >> 20) +
                                        " MiB of marks)");
            break;
        default: break;
    }
}

json manifest_json(const ExperimentConfig& cfg, unsigned threads, const std::string& started,
                   const std::string& finished, const Result& r, const fs::path& dir,
                   const std::vector<fs::path>& outputs) {
    json m;
    m["pcalab_version"] = kVersion;
    m["modules"] = {{"ca-rules", kVersion},   {"noise-kernel", kVersion},   {"mc-engine", kVersion},
                    {"markov-exact", kVersion}, {"asep-lab", kVersion},       {"steady-census", kVersion},
                    {"cli-runner", kVersion}};
    m["config"] = cfg.to_json();
    m["config_hash"] = hex64(cfg.hash());
    m["seed"] = cfg.seed;
    m["threads"] = threads;
    m["started"] = started;
    m["finished"] = finished.empty() ? json(nullptr) : json(finished);
    m["status"] = r.status;
    m["message"] = r.message;
    if (is_resumable(cfg.experiment)) m["checkpoint"] = kCheckpointFile;
    auto& files = m["outputs"] = json::array();
    for (const auto& f : outputs) {
        const auto path = dir / f;
        files.push_back({{"file", f.generic_string()}, {"bytes", fs::file_size(path)}, {"fnv1a64", hex64(file_digest(path))}});
    }
    return m;
}

}  // namespace

std::uint64_t file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    util::Fnv1a64 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        h.bytes(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.value();
}

RunOutcome run(const ExperimentConfig& config, const RunOptions& options) {
    RunOutcome out;
    const fs::path dir = config.output_dir;
    bool dir_ready = false;
    const unsigned threads = effective_threads(config);
    const std::string started = utc_now();
    Result r;
    std::vector<fs::path> outputs;
    try {
        preflight(config);
        if (options.resume && !fs::exists(dir / kCheckpointFile))
            throw mc::CheckpointError("no checkpoint in " + dir.string());
        fs::create_directories(dir);
        DirLock lock(dir);
        dir_ready = true;
        write_atomic(dir / kManifestFile,
                     manifest_json(config, threads, started, "", {kExitOk, "running", ""}, dir, {}).dump(2) + "\n");
        Ctx ctx{config, config.params, dir, threads, options, {}};
        try {
            r = handler(config.experiment)(ctx);
        } catch (...) {
            outputs = ctx.outputs;
            throw;
        }
        outputs = ctx.outputs;
    } catch (const SchemaError& e) {
        r = {kExitSchema, "invalid", e.what()};
    } catch (const std::invalid_argument& e) {
        r = {kExitSchema, "invalid", e.what()};
    } catch (const std::out_of_range& e) {
        r = {kExitSchema, "invalid", e.what()};
    } catch (const ResourceError& e) {
        r = {kExitResource, "resource", e.what()};
    } catch (const ConvergenceError& e) {
        r = nonconverged(e.what());
    } catch (const mc::CheckpointError& e) {
        r = {kExitCheckpoint, "checkpoint", e.what()};
    } catch (const std::exception& e) {
        r = {kExitInternal, "failed", e.what()};
    }
    if (dir_ready) {
        try {
            write_atomic(dir / kManifestFile,
                         manifest_json(config, threads, started, utc_now(), r, dir, outputs).dump(2) + "\n");
        } catch (const std::exception& e) {
            if (r.exit_code == kExitOk) r = {kExitInternal, "failed", e.what()};
        }
    }
    out.exit_code = r.exit_code;
    out.status = r.status;
    out.message = r.message;
    for (const auto& f : outputs) out.outputs.push_back(dir / f);
    return out;
}

RunOutcome run_file(const fs::path& config_path, const RunOptions& options) {
    try {
        return run(load_config(config_path), options);
    } catch (const SchemaError& e) {
        return {kExitSchema, "invalid", e.what(), {}};
    }
}

RunOutcome resume(const fs::path& checkpoint, const RunOptions& options) {
    const auto fail = [](const std::string& msg) { return RunOutcome{kExitCheckpoint, "checkpoint", msg, {}}; };
    mc::Checkpoint ck;
    try {
        ck = mc::read_checkpoint(checkpoint);
    } catch (const mc::CheckpointError& e) {
        return fail(e.what());
    }
    if (checkpoint.filename() != kCheckpointFile) return fail("checkpoint must be named " + std::string(kCheckpointFile));
    const fs::path dir = checkpoint.parent_path().empty() ? fs::path(".") : checkpoint.parent_path();
    json m;
    {
        std::ifstream in(dir / kManifestFile);
        if (!in) return fail("no manifest next to " + checkpoint.string());
        try {
            m = json::parse(in);
        } catch (const json::parse_error& e) {
            return fail(std::string("unreadable manifest: ") + e.what());
        }
    }
    ExperimentConfig cfg;
    try {
        cfg = parse_config(m.at("config"));
        if (m.at("config_hash").get<std::string>() != hex64(cfg.hash()))
            return fail("manifest config hash does not match its config");
    } catch (const std::exception& e) {
        return fail(std::string("invalid manifest: ") + e.what());
    }
    if (!is_resumable(cfg.experiment)) return fail(std::string(experiment_name(cfg.experiment)) + " is not resumable");
    if (ck.seed != cfg.seed) return fail("checkpoint seed does not match the manifest");
    if (m.value("status", "") == "complete") {
        RunOutcome done{kExitOk, "complete", "already complete", {}};
        for (const auto& f : m.at("outputs")) done.outputs.push_back(dir / f.at("file").get<std::string>());
        return done;
    }
    cfg.output_dir = dir;
    RunOptions o = options;
    o.resume = true;
    return run(cfg, o);
}

}  // namespace pcalab::runner
