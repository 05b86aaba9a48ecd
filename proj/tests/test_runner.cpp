#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pcalab/runner/config.hpp"
#include "pcalab/runner/runner.hpp"

using namespace pcalab::runner;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "pcalab_test_runner" / name;
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json relaxation(const fs::path& out) {
    return {{"experiment", "Relaxation"},
            {"seed", 17},
            {"output_dir", out.string()},
            {"params", {{"epsilon", 0.2}, {"L", 24}, {"T", 30}, {"n_traj", 3000}, {"checkpoint_every", 500}}}};
}

}  // namespace

TEST_CASE("schema is strict") {
    const json ok = {{"experiment", "AsepGap"}, {"seed", 0}, {"output_dir", "x"}, {"params", json::object()}};
    const auto cfg = parse_config(ok);
    CHECK(cfg.experiment == Experiment::AsepGap);
    CHECK(cfg.params.at("gamma_R").get<double>() == 1.0);  // defaults are filled in

    auto bad = ok;
    bad["extra"] = 1;
    CHECK_THROWS_AS(parse_config(bad), SchemaError);
    bad = ok;
    bad["params"]["gama_R"] = 1.0;
    CHECK_THROWS_AS(parse_config(bad), SchemaError);
    bad = ok;
    bad["params"]["sizes"] = {4, 2.5};
    CHECK_THROWS_AS(parse_config(bad), SchemaError);
    bad = ok;
    bad["params"]["sizes"] = json::array();
    CHECK_THROWS_AS(parse_config(bad), SchemaError);
    bad = ok;
    bad["seed"] = -1;
    CHECK_THROWS_AS(parse_config(bad), SchemaError);
    bad = ok;
    bad.erase("output_dir");
    CHECK_THROWS_AS(parse_config(bad), SchemaError);
    bad = ok;
    bad["experiment"] = "Nope";
    CHECK_THROWS_AS(parse_config(bad), SchemaError);

    const json spec = {{"experiment", "Spectrum"}, {"seed", 0}, {"output_dir", "x"}, {"params", json::object()}};
    CHECK_THROWS_AS(parse_config(spec), SchemaError);  // epsilon is required
    auto s2 = spec;
    s2["params"]["epsilon"] = 1.5;
    CHECK_THROWS_AS(parse_config(s2), SchemaError);
    s2["params"]["epsilon"] = 0.2;
    s2["params"]["rule"] = "life";
    CHECK_THROWS_AS(parse_config(s2), SchemaError);

    CHECK(all_experiments().size() == 15);
    for (auto e : all_experiments()) CHECK(parse_experiment(experiment_name(e)) == e);
}

TEST_CASE("config hash ignores output location and threads") {
    auto a = parse_config(relaxation("a"));
    auto j = relaxation("b");
    j["threads"] = 3;
    auto b = parse_config(j);
    CHECK(a.hash() == b.hash());
    j["seed"] = 18;
    CHECK(parse_config(j).hash() != a.hash());
}

TEST_CASE("thread resolution order") {
    auto cfg = parse_config(relaxation("x"));
    ::setenv("PCALAB_THREADS", "3", 1);
    CHECK(effective_threads(cfg) == 3);
    cfg.threads = 2;
    CHECK(effective_threads(cfg) == 2);
    ::unsetenv("PCALAB_THREADS");
}

TEST_CASE("invalid config produces no outputs") {
    const auto dir = scratch("invalid");
    const auto cfgfile = fs::temp_directory_path() / "pcalab_test_runner" / "invalid.json";
    fs::create_directories(cfgfile.parent_path());
    {
        auto j = relaxation(dir);
        j["params"]["colour"] = "red";
        std::ofstream(cfgfile) << j.dump();
    }
    const auto r = run_file(cfgfile);
    CHECK(r.exit_code == kExitSchema);
    CHECK(!fs::exists(dir));
}

TEST_CASE("interrupted run resumes to identical files") {
    const auto full_dir = scratch("full");
    const auto part_dir = scratch("part");
    const auto full = run(parse_config(relaxation(full_dir)));
    REQUIRE(full.exit_code == kExitOk);
    CHECK(full.status == "complete");

    auto cfg = parse_config(relaxation(part_dir));
    cfg.threads = 2;
    const auto part = run(cfg, {.stop_after = 1500});
    REQUIRE(part.exit_code == kExitOk);
    CHECK(part.status == "interrupted");
    CHECK(!fs::exists(part_dir / "magnetization.csv"));

    const auto rest = resume(part_dir / kCheckpointFile);
    REQUIRE(rest.exit_code == kExitOk);
    CHECK(rest.status == "complete");
    for (const char* f : {"magnetization.csv", "gamma.csv", "summary.json"})
        CHECK(slurp(full_dir / f) == slurp(part_dir / f));

    // the manifest lists every output with its digest
    const auto m = json::parse(slurp(part_dir / kManifestFile));
    CHECK(m.at("status") == "complete");
    CHECK(m.at("outputs").size() == 3);
    for (const auto& o : m.at("outputs"))
        CHECK(o.at("fnv1a64") == hex64(file_digest(part_dir / o.at("file").get<std::string>())));

    const auto again = resume(part_dir / kCheckpointFile);
    CHECK(again.exit_code == kExitOk);
    CHECK(again.message == "already complete");
}

TEST_CASE("checkpoint refusals") {
    const auto dir = scratch("refuse");
    auto cfg = parse_config(relaxation(dir));
    REQUIRE(run(cfg, {.stop_after = 1000}).status == "interrupted");
    const auto ck = dir / kCheckpointFile;

    SUBCASE("manifest edited") {
        auto m = json::parse(slurp(dir / kManifestFile));
        m["config"]["params"]["epsilon"] = 0.3;
        std::ofstream(dir / kManifestFile) << m.dump(2);
        CHECK(resume(ck).exit_code == kExitCheckpoint);
    }
    SUBCASE("corrupt header") {
        {
            std::fstream f(ck, std::ios::in | std::ios::out | std::ios::binary);
            f.seekp(3);
            f.put('?');
        }
        CHECK(resume(ck).exit_code == kExitCheckpoint);
    }
    SUBCASE("missing manifest") {
        fs::remove(dir / kManifestFile);
        CHECK(resume(ck).exit_code == kExitCheckpoint);
    }
}

TEST_CASE("resource and size limits") {
    const auto dir = scratch("census");
    const json j = {{"experiment", "Census"}, {"seed", 0}, {"output_dir", dir.string()}, {"params", {{"sizes", {4, 29}}}}};
    const auto r = run(parse_config(j));
    CHECK(r.exit_code == kExitResource);
    CHECK(!fs::exists(dir));

    const json s = {{"experiment", "Spectrum"},
                    {"seed", 0},
                    {"output_dir", scratch("bigspec").string()},
                    {"params", {{"epsilon", 0.1}, {"L", 27}}}};
    CHECK(run(parse_config(s)).exit_code == kExitResource);
}

TEST_CASE("spectrum run reports a unit eigenvalue") {
    const auto dir = scratch("spectrum");
    const json j = {{"experiment", "Spectrum"},
                    {"seed", 0},
                    {"output_dir", dir.string()},
                    {"params", {{"epsilon", 0.25}, {"L", 10}, {"k", 3}}}};
    REQUIRE(run(parse_config(j)).exit_code == kExitOk);
    const auto out = json::parse(slurp(dir / "spectrum.json"));
    CHECK(out.at("converged") == true);
    CHECK(std::abs(out.at("eigenvalues")[0].at("re").get<double>() - 1.0) < 1e-10);
}

TEST_CASE("non-convergence keeps flagged partial output") {
    const auto dir = scratch("nonconv");
    const json j = {{"experiment", "Spectrum"},
                    {"seed", 0},
                    {"output_dir", dir.string()},
                    {"params", {{"epsilon", 0.25}, {"L", 12}, {"k", 3}, {"tol", 1e-15}, {"max_restarts", 2}}}};
    const auto r = run(parse_config(j));
    CHECK(r.exit_code == kExitNonConvergence);
    const auto out = json::parse(slurp(dir / "spectrum.json"));
    CHECK(out.at("converged") == false);
    CHECK(json::parse(slurp(dir / kManifestFile)).at("status") == "nonconverged");
}

TEST_CASE("reruns are byte identical") {
    for (const char* e : {"Census", "AsepResolvent", "ContourCheck"}) {
        CAPTURE(e);
        json p = json::object();
        if (std::string(e) == "ContourCheck") p = {{"L", 5}, {"t_max", 6}};
        const auto a = scratch(std::string(e) + "_a"), b = scratch(std::string(e) + "_b");
        const json ja = {{"experiment", e}, {"seed", 0}, {"output_dir", a.string()}, {"params", p}};
        auto jb = ja;
        jb["output_dir"] = b.string();
        const auto ra = run(parse_config(ja));
        const auto rb = run(parse_config(jb));
        REQUIRE(ra.exit_code == kExitOk);
        REQUIRE(ra.outputs.size() == rb.outputs.size());
        for (std::size_t i = 0; i < ra.outputs.size(); ++i) CHECK(slurp(ra.outputs[i]) == slurp(rb.outputs[i]));
    }
}
