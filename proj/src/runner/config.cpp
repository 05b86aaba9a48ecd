#include "pcalab/runner/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "pcalab/ca/rules.hpp"
#include "pcalab/util/hash.hpp"

namespace pcalab::runner {

namespace {

using nlohmann::json;

struct Def {
    Experiment id;
    const char* name;
    const char* summary;
    bool resumable;
    std::vector<ParamSpec> params;
};

std::vector<std::string> rule_names() {
    std::vector<std::string> out;
    for (const auto& r : ca::all_rules()) out.push_back(r.name());
    return out;
}

ParamSpec num(const char* name, json fallback, const char* help, std::optional<double> lo = {},
              std::optional<double> hi = {}) {
    return {name, ParamType::Number, std::move(fallback), help, lo, hi};
}
ParamSpec integer(const char* name, json fallback, const char* help, std::optional<double> lo = 0.0,
                  std::optional<double> hi = {}) {
    return {name, ParamType::Integer, std::move(fallback), help, lo, hi};
}
ParamSpec boolean(const char* name, bool fallback, const char* help) {
    return {name, ParamType::Bool, fallback, help};
}
ParamSpec choice(const char* name, json fallback, const char* help, std::vector<std::string> choices) {
    return {name, ParamType::String, std::move(fallback), help, {}, {}, std::move(choices)};
}
ParamSpec nums(const char* name, json fallback, const char* help, std::optional<double> lo = {},
               std::optional<double> hi = {}) {
    return {name, ParamType::NumberList, std::move(fallback), help, lo, hi};
}
ParamSpec ints(const char* name, json fallback, const char* help, std::optional<double> lo = 1.0) {
    return {name, ParamType::IntegerList, std::move(fallback), help, lo, {}};
}

ParamSpec rule_param(const char* fallback) {
    return choice("rule", fallback, "update rule", rule_names());
}
ParamSpec bias_param(const char* fallback) {
    return choice("bias", fallback, "noise direction: up (0->1), down (1->0) or symmetric",
                  {"up", "down", "symmetric"});
}
ParamSpec eps_param(json fallback = nullptr) { return num("epsilon", std::move(fallback), "flip probability", 0.0, 1.0); }

const std::vector<Def>& defs() {
    static const std::vector<Def> table = [] {
        std::vector<Def> d;
        d.push_back({Experiment::Relaxation, "Relaxation", "MC ensemble time series of an observable plus Gamma(t)", true,
                     {rule_param("stavskaya"), eps_param(), bias_param("up"),
                      integer("L", 60, "columns (a torus is L x L)", 1),
                      integer("T", 200, "steps", 1), integer("n_traj", 100000, "trajectories", 1),
                      choice("init", "zeros", "initial configuration", {"zeros", "ones"}),
                      choice("observable", "magnetization", "measured quantity", {"magnetization", "site"}),
                      integer("site", 0, "site for observable = site"),
                      integer("plateau_begin", 0, "first t of the Gamma plateau window (0: T/2)"),
                      integer("plateau_end", 0, "last t of the Gamma plateau window (0: T-1)"),
                      integer("checkpoint_every", 1000000, "trajectories between checkpoints", 1)}});
        d.push_back({Experiment::OrderScan, "OrderScan", "magnetization plateau versus epsilon and epsilon_c", false,
                     {rule_param("stavskaya"), nums("eps_grid", nullptr, "epsilon values", 0.0, 1.0),
                      integer("L", 200, "columns", 1), integer("T", 2000, "steps", 1),
                      integer("n_traj", 1000, "trajectories per epsilon", 1)}});
        d.push_back({Experiment::Spectrum, "Spectrum", "leading eigenvalues of the exact transition operator", false,
                     {rule_param("stavskaya"), eps_param(), bias_param("up"), integer("L", 10, "columns", 1),
                      integer("k", 3, "eigenvalues", 1), num("tol", 1e-10, "Krylov-Schur tolerance", 0.0),
                      integer("max_restarts", 2000, "restart budget", 1)}});
        d.push_back({Experiment::GapFit, "GapFit", "-log|lambda_2| over sizes, fitted to delta + c / L^2", false,
                     {rule_param("stavskaya"), eps_param(), bias_param("up"),
                      ints("sizes", json::array({8, 10, 12, 14}), "columns"), integer("k", 3, "eigenvalues", 3),
                      num("tol", 1e-10, "Krylov-Schur tolerance", 0.0),
                      integer("max_restarts", 2000, "restart budget", 1)}});
        d.push_back({Experiment::ContourCheck, "ContourCheck",
                     "exact error-set probabilities against (6 eps)^|Lambda| for every Lambda", false,
                     {integer("L", 8, "chain length", 1), nums("epsilons", json::array({0.001, 0.003}), "", 0.0, 1.0),
                      integer("t_max", 50, "last time step")}});
        d.push_back({Experiment::FirstOrder, "FirstOrder", "first-order response d<b_x>/d eps versus t", false,
                     {rule_param("stavskaya"), choice("bias", "down", "noise direction", {"up", "down"}),
                      integer("L", 8, "columns", 1), integer("site", 0, "observed site"),
                      integer("t_min", 0, "first t"), integer("t_max", 16, "last t"),
                      boolean("finite_difference", true, "also compute the central difference"),
                      num("h", 1e-6, "finite-difference step", 0.0)}});
        d.push_back({Experiment::ResolventMoment, "ResolventMoment", "<o|(S_T Q V)^n|omega0> over sizes and orders",
                     false,
                     {choice("system", "stavskaya", "operator family", {"stavskaya", "tasep"}),
                      num("epsilon", 0.05, "up-bias (stavskaya)", 0.0, 1.0),
                      ints("sizes", json::array({8, 10, 12}), "sizes"), ints("orders", json::array({1}), "orders n"),
                      integer("truncation", 0, "T of S_T (0: automatic)"),
                      num("near_unit", 1e-6, "projected cluster |lambda| > 1 - near_unit", 0.0, 1.0)}});
        d.push_back({Experiment::LpplProbe, "LpplProbe", "response of the metastable state to a local perturbation",
                     false,
                     {rule_param("stavskaya"), eps_param(), bias_param("up"), integer("L", 10, "columns", 1),
                      integer("site", 0, "perturbed site"), num("delta", 0.01, "extra up-flip probability", 0.0, 1.0),
                      integer("t_star", 0, "evolution time (0: 10 / gap)")}});
        const auto asep_rates = [](double gl) {
            return std::vector<ParamSpec>{num("gamma_L", gl, "left hop rate", 0.0), num("gamma_R", 1.0, "right hop rate", 0.0),
                                          num("delta", 0.0, "weak-link rate", 0.0)};
        };
        {
            auto p = asep_rates(0.0);
            p.push_back(ints("sizes", json::array({4, 16, 64}), "sites", 2));
            d.push_back({Experiment::AsepGap, "AsepGap", "spectral gap of the single-particle ASEP generator", false, p});
        }
        {
            auto p = asep_rates(0.0);
            p.push_back(ints("sizes", json::array({5, 10, 20}), "sites", 2));
            p.push_back(nums("z", json::array({0.1, 0.5}), "real Laplace variables"));
            p.push_back(boolean("time_integral", false, "cross-check by time integration (Re z >= 0)"));
            d.push_back({Experiment::AsepResolvent, "AsepResolvent",
                         "<1 - n_L| Q (z - M)^-1 Q |site 0>, with the TASEP closed form when it applies", false, p});
        }
        {
            auto p = asep_rates(0.0);
            p.push_back(integer("L", 32, "sites", 2));
            p.push_back(num("re_min", -2.5, "grid"));
            p.push_back(num("re_max", 0.5, "grid"));
            p.push_back(num("im_min", -1.5, "grid"));
            p.push_back(num("im_max", 1.5, "grid"));
            p.push_back(integer("nx", 61, "grid columns", 1));
            p.push_back(integer("ny", 61, "grid rows", 1));
            d.push_back({Experiment::Pseudospectrum, "Pseudospectrum", "sigma_min(z - M) on a rectangular grid", false, p});
        }
        d.push_back({Experiment::WeakLink, "WeakLink", "ASEP gap versus size and weak-link rate", false,
                     {num("gamma_L", 0.25, "left hop rate", 0.0), num("gamma_R", 1.0, "right hop rate", 0.0),
                      nums("deltas", json::array({0.0, 0.05}), "weak-link rates", 0.0),
                      ints("sizes", json::array({32, 64, 128, 256}), "sites", 2)}});
        d.push_back({Experiment::Erosion, "Erosion", "noiseless erosion time of square islands versus size", false,
                     {rule_param("toom_nec_2d"), ints("sizes", json::array({4, 8, 16, 32}), "island sizes R"),
                      integer("extent", 0, "lattice extent (0: 2 max R + 8)"),
                      integer("max_steps", 1000000, "step budget per island", 1),
                      integer("samples", 8, "tie-break seeds for random-tie rules", 1)}});
        d.push_back({Experiment::Survival, "Survival", "Toom-ladder island survival and the product lower bound", true,
                     {integer("R", 10, "island half width", 1), num("epsilon", 0.1, "up-flip probability", 0.0, 1.0),
                      integer("L", 128, "rungs", 1), integer("T", 250, "steps", 1),
                      integer("n_traj", 100000, "trajectories", 1),
                      integer("checkpoint_every", 1000000, "trajectories between checkpoints", 1)}});
        d.push_back({Experiment::Census, "Census", "cycles and periodic states of a deterministic rule", false,
                     {rule_param("soldier"), ints("sizes", json::array({4, 5, 6, 7, 8}), "columns"),
                      boolean("with_spectrum", false, "compare with dense eigenvalues (2^N <= 4096)")}});
        return d;
    }();
    return table;
}

const Def& def(Experiment e) {
    for (const auto& d : defs())
        if (d.id == e) return d;
    throw std::logic_error("unknown experiment");
}

std::string type_name(ParamType t) {
    switch (t) {
        case ParamType::Number: return "number";
        case ParamType::Integer: return "integer";
        case ParamType::Bool: return "boolean";
        case ParamType::String: return "string";
        case ParamType::NumberList: return "number list";
        case ParamType::IntegerList: return "integer list";
    }
    return "?";
}

void check_range(const ParamSpec& s, double v) {
    if (!std::isfinite(v)) throw SchemaError("param '" + s.name + "' must be finite");
    if ((s.lo && v < *s.lo) || (s.hi && v > *s.hi)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "param '%s' = %g outside [%g, %g]", s.name.c_str(), v,
                      s.lo.value_or(-INFINITY), s.hi.value_or(INFINITY));
        throw SchemaError(buf);
    }
}

json check_scalar(const ParamSpec& s, const json& v, ParamType t) {
    switch (t) {
        case ParamType::Number:
            if (!v.is_number()) break;
            check_range(s, v.get<double>());
            return v.get<double>();
        case ParamType::Integer:
            if (!v.is_number_integer()) break;
            if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
                throw SchemaError("param '" + s.name + "' must be non-negative");
            check_range(s, static_cast<double>(v.get<std::uint64_t>()));
            return v.get<std::uint64_t>();
        case ParamType::Bool:
            if (!v.is_boolean()) break;
            return v;
        case ParamType::String:
            if (!v.is_string()) break;
            if (!s.choices.empty() &&
                std::find(s.choices.begin(), s.choices.end(), v.get<std::string>()) == s.choices.end()) {
                std::string all;
                for (const auto& c : s.choices) all += (all.empty() ? "" : ", ") + c;
                throw SchemaError("param '" + s.name + "' must be one of: " + all);
            }
            return v;
        default: break;
    }
    throw SchemaError("param '" + s.name + "' must be a " + type_name(t));
}

json check_value(const ParamSpec& s, const json& v) {
    if (s.type == ParamType::NumberList || s.type == ParamType::IntegerList) {
        if (!v.is_array() || v.empty()) throw SchemaError("param '" + s.name + "' must be a non-empty " + type_name(s.type));
        const auto elem = s.type == ParamType::NumberList ? ParamType::Number : ParamType::Integer;
        json out = json::array();
        for (const auto& e : v) out.push_back(check_scalar(s, e, elem));
        return out;
    }
    return check_scalar(s, v, s.type);
}

std::uint64_t param_u(const json& p, const char* k) { return p.at(k).get<std::uint64_t>(); }

/// Cross-field checks that the per-key schema cannot express.
void check_semantics(Experiment e, const json& p) {
    const auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw SchemaError(msg);
    };
    switch (e) {
        case Experiment::Relaxation:
            need(param_u(p, "plateau_end") == 0 || param_u(p, "plateau_begin") <= param_u(p, "plateau_end"),
                 "plateau_begin must not exceed plateau_end");
            need(param_u(p, "plateau_end") < param_u(p, "T"), "plateau_end must be below T");
            break;
        case Experiment::FirstOrder:
            need(param_u(p, "t_min") <= param_u(p, "t_max"), "t_min must not exceed t_max");
            break;
        case Experiment::Pseudospectrum:
            need(p.at("re_min").get<double>() <= p.at("re_max").get<double>() &&
                     p.at("im_min").get<double>() <= p.at("im_max").get<double>(),
                 "grid bounds are inverted");
            break;
        case Experiment::Survival:
            need(2 * param_u(p, "R") + 1 < param_u(p, "L"), "the island must fit on the ring (2R + 1 < L)");
            need(param_u(p, "T") > param_u(p, "R") + 1, "T must exceed R + 1");
            break;
        case Experiment::GapFit:
            need(p.at("sizes").size() >= 3, "GapFit needs at least three sizes");
            break;
        default: break;
    }
}

}  // namespace

std::string_view experiment_name(Experiment e) { return def(e).name; }
std::string_view experiment_summary(Experiment e) { return def(e).summary; }
bool is_resumable(Experiment e) { return def(e).resumable; }
const std::vector<ParamSpec>& param_specs(Experiment e) { return def(e).params; }

std::optional<Experiment> parse_experiment(std::string_view name) {
    for (const auto& d : defs())
        if (name == d.name) return d.id;
    return std::nullopt;
}

const std::vector<Experiment>& all_experiments() {
    static const std::vector<Experiment> all = [] {
        std::vector<Experiment> v;
        for (const auto& d : defs()) v.push_back(d.id);
        return v;
    }();
    return all;
}

json ExperimentConfig::to_json() const {
    json j;
    j["experiment"] = std::string(experiment_name(experiment));
    j["seed"] = seed;
    j["output_dir"] = output_dir.generic_string();
    if (threads) j["threads"] = *threads;
    j["params"] = params;
    return j;
}

std::uint64_t ExperimentConfig::hash() const {
    util::Fnv1a64 h;
    h.str(experiment_name(experiment)).u64(seed).str(params.dump());
    return h.value();
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw SchemaError("config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (k != "experiment" && k != "seed" && k != "output_dir" && k != "threads" && k != "params")
            throw SchemaError("unknown key '" + k + "'");
    for (const char* k : {"experiment", "seed", "output_dir", "params"})
        if (!j.contains(k)) throw SchemaError(std::string("missing key '") + k + "'");

    ExperimentConfig c;
    if (!j["experiment"].is_string()) throw SchemaError("'experiment' must be a string");
    const auto e = parse_experiment(j["experiment"].get<std::string>());
    if (!e) throw SchemaError("unknown experiment '" + j["experiment"].get<std::string>() + "'");
    c.experiment = *e;

    const auto& seed = j["seed"];
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
        throw SchemaError("'seed' must be a non-negative integer");
    c.seed = seed.get<std::uint64_t>();

    if (!j["output_dir"].is_string() || j["output_dir"].get<std::string>().empty())
        throw SchemaError("'output_dir' must be a non-empty string");
    c.output_dir = j["output_dir"].get<std::string>();

    if (j.contains("threads")) {
        const auto& t = j["threads"];
        if (!t.is_number_integer() || (!t.is_number_unsigned() && t.get<std::int64_t>() < 1) || t.get<std::uint64_t>() < 1 ||
            t.get<std::uint64_t>() > 4096)
            throw SchemaError("'threads' must be an integer in [1, 4096]");
        c.threads = t.get<unsigned>();
    }

    const auto& p = j["params"];
    if (!p.is_object()) throw SchemaError("'params' must be an object");
    const auto& specs = param_specs(c.experiment);
    for (const auto& [k, v] : p.items()) {
        if (std::none_of(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == k; }))
            throw SchemaError("unknown param '" + k + "' for " + std::string(experiment_name(c.experiment)));
    }
    for (const auto& s : specs) {
        if (p.contains(s.name)) c.params[s.name] = check_value(s, p[s.name]);
        else if (s.fallback.is_null()) throw SchemaError("missing param '" + s.name + "'");
        else c.params[s.name] = check_value(s, s.fallback);
    }
    check_semantics(c.experiment, c.params);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

unsigned effective_threads(const ExperimentConfig& config) {
    if (config.threads) return *config.threads;
    if (const char* env = std::getenv("PCALAB_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1 && v <= 4096) return static_cast<unsigned>(v);
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace pcalab::runner
