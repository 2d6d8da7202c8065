#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "poscm/error.hpp"
#include "poscm/runner.hpp"

using namespace poscm;
namespace fs = std::filesystem;

namespace {

fs::path scratchDir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("poscm_test_runner_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ProtocolConfig protocol(const std::string& experiment, Json params = Json::object()) {
    return protocolFromJson({{"experiment", experiment}, {"seeds", {1, 2}}, {"params", params}});
}

double cell(const Table& t, std::size_t row, const std::string& column) {
    auto it = std::find(t.columns.begin(), t.columns.end(), column);
    REQUIRE(it != t.columns.end());
    return std::stod(t.rows.at(row).at(static_cast<std::size_t>(it - t.columns.begin())));
}

}  // namespace

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(fnv1a64Hex("") == "cbf29ce484222325");
    CHECK(fnv1a64Hex("a") == "af63dc4c8601ec8c");
    CHECK(fnv1a64Hex("foobar") == "85944171f73967e8");
}

TEST_CASE("config hash ignores key order and output location but not content") {
    Json a = Json::parse(R"({"experiment":"exp3-kernels","seeds":[1,2],"outDir":"x","params":{"window":0.5,"reference":-1.2}})");
    Json b = Json::parse(R"({"params":{"reference":-1.2,"window":0.5},"outDir":"y","seeds":[1,2],"experiment":"exp3-kernels"})");
    CHECK(configHash(protocolFromJson(a)) == configHash(protocolFromJson(b)));
    Json c = a;
    c["seeds"] = {1, 3};
    CHECK(configHash(protocolFromJson(a)) != configHash(protocolFromJson(c)));
    CHECK(configHash(protocolFromJson(a)).size() == 16);
}

TEST_CASE("protocol validation rejects malformed documents") {
    CHECK_THROWS_AS(protocolFromJson({{"experiment", "exp9"}, {"seeds", {1}}}), ConfigError);
    CHECK_THROWS_AS(protocolFromJson({{"experiment", "probe"}, {"seeds", Json::array()}}), ConfigError);
    CHECK_THROWS_AS(protocolFromJson({{"experiment", "probe"}}), ConfigError);
    CHECK_THROWS_AS(protocolFromJson({{"experiment", "probe"}, {"seeds", {1}}, {"typo", 1}}), ConfigError);
    CHECK_THROWS_AS(protocolFromJson({{"experiment", "probe"}, {"seeds", {1}}, {"modelRef", "no/such/file.json"}}),
                    ConfigError);
    CHECK_THROWS_AS(protocolFromJson({{"experiment", "probe"}, {"seeds", "1"}}), ConfigError);
}

TEST_CASE("model references are resolved relative to the protocol and inlined") {
    fs::path dir = scratchDir("modelref");
    std::ofstream(dir / "m.json") << R"({"zoo": "twoNodeConfounding"})";
    std::ofstream(dir / "p.json") << R"({"experiment": "iisc", "modelRef": "m.json", "seeds": [4]})";
    ProtocolConfig c = loadProtocol((dir / "p.json").string());
    CHECK(c.model == Json::parse(R"({"zoo": "twoNodeConfounding"})"));
    CHECK(c.canonical().contains("model"));
    CHECK_FALSE(c.canonical().contains("modelRef"));
}

TEST_CASE("seed override keeps the seed count") {
    ProtocolConfig c = protocolFromJson({{"experiment", "probe"}, {"seeds", {9, 3, 5}}});
    overrideSeeds(c, 100);
    CHECK(c.seeds == std::vector<std::uint64_t>{100, 101, 102});
}

TEST_CASE("identical configs give byte-identical tables across thread counts") {
    ProtocolConfig c = protocol("exp3-kernels");
    fs::path a = scratchDir("bytes_a"), b = scratchDir("bytes_b");
    RunRecord ra = runProtocol(c, a.string(), 1);
    RunRecord rb = runProtocol(c, b.string(), 4);
    CHECK(ra.files == rb.files);
    for (const auto& f : ra.files) {
        if (f == "run.json") continue;
        CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
    }
    Json ja = readJsonFile((a / "run.json").string()), jb = readJsonFile((b / "run.json").string());
    ja.erase("wallClockSeconds");
    jb.erase("wallClockSeconds");
    CHECK(ja == jb);
}

TEST_CASE("run sidecar carries provenance") {
    ProtocolConfig c = protocol("exp3-kernels");
    fs::path dir = scratchDir("sidecar");
    RunRecord r = runProtocol(c, dir.string(), 2);
    Json side = readJsonFile((dir / "run.json").string());
    CHECK(side.at("configHash") == configHash(c));
    CHECK(side.at("version") == kVersion);
    CHECK(side.at("config") == c.canonical());
    CHECK(side.at("passed") == r.report.passed());
    CHECK(side.at("checks").size() == r.report.checks.size());
}

TEST_CASE("plot data: empty report gives an empty manifest") {
    fs::path dir = scratchDir("plot_empty");
    Json manifest = emitPlotData(Report{"nothing", {}, {}}, dir.string());
    CHECK(manifest.at("series").empty());
    CHECK(readPlotData(dir.string()).empty());
}

TEST_CASE("plot data: kernel experiment emits two series that read back unchanged") {
    fs::path dir = scratchDir("plot_exp3");
    Report rep = runExperiment(protocol("exp3-kernels"), 2);
    Json manifest = emitPlotData(rep, dir.string());
    REQUIRE(manifest.at("series").size() == 2);
    auto back = readPlotData(dir.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0] == *rep.table("composition"));
    CHECK(back[1] == *rep.table("transfer"));
}

TEST_CASE("kernel experiment: zero conductance gives a flat transfer curve") {
    LayeredNetSpec net = defaultRetina();
    for (auto& p : net.projections)
        for (auto& [type, s] : p.synapse) s.gMax = 0.0;
    ProtocolConfig c = protocol("exp3-kernels", {{"midpointTolerance", 100}});
    c.model = layeredNetToJson(net);
    Report rep = runExperiment(c, 2);
    const Table& t = *rep.table("transfer");
    for (std::size_t r = 0; r < t.rows.size(); ++r) CHECK(std::abs(cell(t, r, "meanDeltaV")) < 1e-12);
}

TEST_CASE("twin experiment: a model against itself gives zero KS distance") {
    ProtocolConfig c = protocol("exp1-twin", {{"typeB", "ON-BC"}, {"twinSeedOffset", 0}});
    Report rep = runExperiment(c, 2);
    const Table& t = *rep.table("ks");
    REQUIRE_FALSE(t.rows.empty());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        CHECK(cell(t, r, "latentD") == 0.0);
        CHECK(cell(t, r, "observedD") == 0.0);
    }
}

TEST_CASE("confounding experiment: a model against itself gives zero MMD") {
    ProtocolConfig c = protocol("exp2-confound", {{"selfPair", true}, {"twinSeedOffset", 0}, {"permutations", 100}});
    Report rep = runExperiment(c, 2);
    const Table& t = *rep.table("mmd");
    REQUIRE_FALSE(t.rows.empty());
    for (std::size_t r = 0; r < t.rows.size(); ++r) CHECK(cell(t, r, "mmd") == 0.0);
}

TEST_CASE("confounding experiment: without calibration node interventions also distinguish") {
    Report cal = runExperiment(protocol("exp2-confound"), 2);
    Report raw = runExperiment(protocol("exp2-confound", {{"calibrate", false}}), 2);
    const Table &tc = *cal.table("mmd"), &tr = *raw.table("mmd");
    std::size_t strongest = 0;
    for (std::size_t r = 0; r < tr.rows.size(); ++r)
        if (tr.rows[r][0] == "node-do" && std::abs(cell(tr, r, "meanEffectM")) > std::abs(cell(tr, strongest, "meanEffectM")))
            strongest = r;
    REQUIRE(tr.rows[strongest][0] == "node-do");
    double rawRatio = cell(tr, strongest, "meanEffectTwin") / cell(tr, strongest, "meanEffectM");
    double calRatio = cell(tc, strongest, "meanEffectTwin") / cell(tc, strongest, "meanEffectM");
    CHECK(cell(tr, strongest, "permutationP") <= 0.05);
    CHECK(rawRatio < 0.8);
    CHECK(std::abs(calRatio - 1.0) < 0.15);
}

TEST_CASE("message identification protocols on the tanh channel") {
    Json model{{"zoo", "channel"}, {"params", {{"kind", "tanh"}, {"sigma", 0.1}}}};
    Json grid = Json::array();
    for (int k = -10; k <= 10; ++k) grid.push_back({k / 10.0});
    ProtocolConfig ab = protocolFromJson({{"experiment", "identify-messages"},
                                          {"model", model},
                                          {"seeds", {1}},
                                          {"nPer", 2000},
                                          {"params", {{"route", "AB"}, {"source", 0}, {"target", 1},
                                                      {"vGrid", {-0.8, 0.0, 0.8}}, {"clampGrid", grid}}}});
    CHECK(runExperiment(ab, 2).passed());
    ProtocolConfig c = protocolFromJson({{"experiment", "identify-messages"},
                                         {"model", model},
                                         {"seeds", {1, 2}},
                                         {"nPer", 10},
                                         {"params", {{"route", "C"}, {"source", 0}, {"target", 1},
                                                     {"clampGrid", {-1, -0.5, 0, 0.5, 1}}}}});
    Report rc = runExperiment(c, 2);
    CHECK(rc.passed());
    CHECK(rc.table("routeC")->rows.size() == 20);
}

TEST_CASE("equivalence protocol reports the expected outcome") {
    Json base{{"zoo", "calibratedConfounding"}, {"params", {{"side", "base"}}}};
    Json prime{{"zoo", "calibratedConfounding"}, {"params", {{"side", "prime"}}}};
    Json nodeDo = Json::array();
    for (int v : {0, 1}) nodeDo.push_back({{"label", "do"}, {"interventions", {{{"type", "VNode"}, {"target", 0}, {"value", v}}}}});
    ProtocolConfig c = protocolFromJson({{"experiment", "equiv"},
                                         {"model", base},
                                         {"regimes", nodeDo},
                                         {"seeds", {5, 6}},
                                         {"nPer", 20000},
                                         {"params", {{"modelB", prime}, {"expect", "indistinguishable"}}}});
    CHECK(runExperiment(c, 2).passed());
    c.params["expect"] = "distinguished";
    CHECK_FALSE(runExperiment(c, 2).passed());
}

TEST_CASE("experiments needing a catalog model refuse to run without one") {
    CHECK_THROWS_AS(runExperiment(protocol("probe"), 1), ConfigError);
    CHECK_THROWS_AS(runExperiment(protocol("iisc"), 1), ConfigError);
}
