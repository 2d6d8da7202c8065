#include "poscm/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "poscm/error.hpp"
#include "poscm/experiments.hpp"
#include "poscm/identify.hpp"
#include "poscm/interventions.hpp"
#include "poscm/parallel.hpp"

namespace fs = std::filesystem;

namespace poscm {

namespace {

template <class T>
T param(const Json& p, const char* key, T fallback) {
    if (!p.contains(key)) return fallback;
    try {
        return p.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("param '") + key + "': " + e.what());
    }
}

std::string num(double x) { return formatNumber(x); }

std::string joined(const Vec& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + num(v[k]);
    return s;
}

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void writeFile(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << bytes;
}

NodeId nodeParam(const Json& p, const char* key, const PoscmSpec& spec) {
    if (!p.contains(key)) throw ConfigError(std::string("missing param '") + key + "'");
    const Json& ref = p.at(key);
    if (ref.is_number_integer() && ref.get<long long>() >= 0 && static_cast<std::size_t>(ref.get<long long>()) < spec.n)
        return ref.get<std::size_t>();
    if (ref.is_string())
        if (auto id = spec.nodeByName(ref.get<std::string>())) return *id;
    throw ConfigError(std::string("param '") + key + "' is not a node of the model");
}

LayeredNetSpec layeredModel(const ProtocolConfig& c) {
    if (c.model.is_null()) return defaultRetina();
    LoadedModel m = modelFromJson(c.model);
    if (!m.layered) throw ConfigError(c.experiment + " needs a layered network model");
    return *m.layered;
}

SpecPtr catalogModel(const ProtocolConfig& c) {
    if (c.model.is_null()) throw ConfigError(c.experiment + " needs a model (modelRef or model)");
    return modelFromJson(c.model).spec;
}

void expectCheck(Report& rep, const Json& p, const std::string& observed) {
    if (!p.contains("expect")) return;
    auto want = param<std::string>(p, "expect", "");
    rep.checks.push_back({"outcome is " + want, observed == want, "observed " + observed});
}

Report runExp1From(const ProtocolConfig& c, unsigned threads) {
    Exp1Options o;
    o.net = layeredModel(c);
    const Json& p = c.params;
    o.typedLayer = param(p, "typedLayer", o.typedLayer);
    o.typeA = param(p, "typeA", o.typeA);
    o.typeB = param(p, "typeB", o.typeB);
    o.clampLayer = param(p, "clampLayer", o.clampLayer);
    o.clampIndex = param(p, "clampIndex", o.clampIndex);
    o.clamps = param(p, "clamps", o.clamps);
    o.readoutLayer = param(p, "readoutLayer", o.readoutLayer);
    o.spikeThreshold = param(p, "spikeThreshold", o.spikeThreshold);
    o.twinSeedOffset = param(p, "twinSeedOffset", o.twinSeedOffset);
    o.alpha = param(p, "alpha", o.alpha);
    o.seeds = c.seeds;
    o.threads = threads;
    return runExp1(o);
}

Report runExp2From(const ProtocolConfig& c, unsigned threads) {
    Exp2Options o;
    o.net = layeredModel(c);
    const Json& p = c.params;
    o.pre = param(p, "pre", o.pre);
    o.post = param(p, "post", o.post);
    o.blockFraction = param(p, "blockFraction", o.blockFraction);
    o.calibrate = param(p, "calibrate", o.calibrate);
    o.selfPair = param(p, "selfPair", o.selfPair);
    o.clampIndex = param(p, "clampIndex", o.clampIndex);
    o.clamps = param(p, "clamps", o.clamps);
    o.gTests = param(p, "gTests", o.gTests);
    o.twinSeedOffset = param(p, "twinSeedOffset", o.twinSeedOffset);
    o.window = param(p, "window", o.window);
    o.minRatio = param(p, "minRatio", o.minRatio);
    o.permutations = param(p, "permutations", o.permutations);
    o.seeds = c.seeds;
    o.threads = threads;
    return runExp2(o);
}

Report runExp3From(const ProtocolConfig& c, unsigned threads) {
    Exp3Options o;
    o.net = layeredModel(c);
    const Json& p = c.params;
    o.clampLayer = param(p, "clampLayer", o.clampLayer);
    o.readoutLayer = param(p, "readoutLayer", o.readoutLayer);
    o.clamps = param(p, "clamps", o.clamps);
    o.contexts = param(p, "contexts", o.contexts);
    o.reference = param(p, "reference", o.reference);
    o.window = param(p, "window", o.window);
    o.midpointTolerance = param(p, "midpointTolerance", o.midpointTolerance);
    o.seeds = c.seeds;
    o.threads = threads;
    return runExp3(o);
}

ProbeProtocol probeProtocol(const ProtocolConfig& c, const PoscmSpec& spec) {
    ProbeProtocol proto;
    const Json& p = c.params;
    proto.probesPerSetting = c.nPer ? c.nPer : proto.probesPerSetting;
    proto.testAlpha = param(p, "alpha", proto.testAlpha);
    proto.maxAssignments = param(p, "maxAssignments", proto.maxAssignments);
    if (p.contains("valueGrid")) proto.valueGrid = param(p, "valueGrid", std::vector<Vec>{});
    proto.validate(spec);
    return proto;
}

Report runProbe(const ProtocolConfig& c, unsigned threads) {
    SpecPtr spec = catalogModel(c);
    ProbeProtocol proto = probeProtocol(c, *spec);
    std::vector<StructureReadout> readouts(c.seeds.size());
    std::vector<std::vector<std::uint8_t>> truth(c.seeds.size());
    parallelFor(c.seeds.size(), threads, [&](std::size_t k) {
        InstanceHandle unit = freezeInstance(spec, c.seeds[k]);
        readouts[k] = probeStructure(unit, proto, c.seeds[k]);
        truth[k] = unit.groundTruth().adjacency;
    });
    Table dyads{"readout", {"seed", "source", "target", "estimate", "truth", "minP", "correctedP", "inconclusive"}, {}};
    Table summary{"summary", {"seed", "exact", "falsePositives", "falseNegatives", "tests"}, {}, true};
    std::size_t exact = 0;
    for (std::size_t k = 0; k < c.seeds.size(); ++k) {
        std::size_t fp = 0, fn = 0;
        for (const auto& d : readouts[k].dyads) {
            bool t = truth[k][d.source * spec->n + d.target] != 0;
            fp += d.present && !t;
            fn += !d.present && t;
            dyads.addRow({std::to_string(c.seeds[k]), spec->nodeName(d.source), spec->nodeName(d.target),
                          std::to_string(d.present), std::to_string(t), num(d.minP), num(d.correctedP),
                          std::to_string(d.inconclusive)});
        }
        exact += fp + fn == 0;
        summary.addRow({std::to_string(c.seeds[k]), std::to_string(fp + fn == 0), std::to_string(fp),
                        std::to_string(fn), std::to_string(readouts[k].tests)});
    }
    Report rep{"probe", {dyads, summary}, {}};
    double need = param(c.params, "minExactFraction", 0.95);
    double frac = static_cast<double>(exact) / c.seeds.size();
    rep.checks.push_back({"readout exact on enough instances", frac >= need,
                          std::to_string(exact) + "/" + std::to_string(c.seeds.size())});
    return rep;
}

Report runIdentifyMessages(const ProtocolConfig& c, unsigned threads) {
    SpecPtr spec = catalogModel(c);
    const Json& p = c.params;
    NodeId i = nodeParam(p, "target", *spec), j = nodeParam(p, "source", *spec);
    auto route = param<std::string>(p, "route", "AB");
    Report rep{"identify-messages", {}, {}};
    if (route == "AB") {
        Vec vGrid = param(p, "vGrid", Vec{});
        auto clampGrid = param(p, "clampGrid", std::vector<Vec>{});
        if (vGrid.empty() || clampGrid.size() < 2) throw ConfigError("route AB needs vGrid and >= 2 clampGrid points");
        double spacing = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < clampGrid.size(); ++a)
            for (std::size_t b = a + 1; b < clampGrid.size(); ++b) {
                double d = 0.0;
                for (std::size_t k = 0; k < clampGrid[a].size() && k < clampGrid[b].size(); ++k)
                    d = std::max(d, std::abs(clampGrid[a][k] - clampGrid[b][k]));
                if (d > 0.0) spacing = std::min(spacing, d);
            }
        const double maxError = param(p, "maxError", spacing);
        const std::size_t nPer = c.nPer ? c.nPer : 2000;
        std::vector<std::vector<MessageMatch>> matches(c.seeds.size());
        std::vector<std::vector<Vec>> truth(c.seeds.size());
        parallelFor(c.seeds.size(), threads, [&](std::size_t s) {
            for (std::uint64_t k = 0; k < 1000; ++k) {
                InstanceHandle unit = freezeInstance(spec, c.seeds[s], k);
                if (!unit.groundTruth().edge(j, i)) continue;
                matches[s] = identifyMessageRouteAB(unit, i, j, vGrid, clampGrid, nPer, {}, c.seeds[s]);
                const auto& mech = unit.groundTruth().mechanism[i];
                for (double v : vGrid) truth[s].push_back(mech.isMessageForm() ? mech.messages->message(j, v) : Vec{});
                return;
            }
            throw ConfigError("edge " + spec->nodeName(j) + "->" + spec->nodeName(i) + " never realized");
        });
        Table t{"routeAB", {"seed", "v", "estimate", "truth", "error", "distance", "tolerance", "residualP", "ambiguous"}, {}, true};
        double worst = 0.0;
        for (std::size_t s = 0; s < c.seeds.size(); ++s)
            for (std::size_t k = 0; k < matches[s].size(); ++k) {
                const auto& m = matches[s][k];
                const Vec& tr = truth[s][k];
                double err = 0.0;
                for (std::size_t d = 0; d < tr.size() && d < m.estimate.size(); ++d)
                    err = std::max(err, std::abs(tr[d] - m.estimate[d]));
                worst = std::max(worst, err);
                t.addRow({std::to_string(c.seeds[s]), num(m.v), joined(m.estimate), joined(tr), num(err),
                          num(m.distance), num(m.tolerance), num(m.residualP), std::to_string(m.ambiguous)});
            }
        rep.tables.push_back(t);
        rep.checks.push_back({"max message error within bound", worst <= maxError + 1e-12,
                              "max error " + num(worst) + " bound " + num(maxError)});
    } else if (route == "C") {
        Vec clampGrid = param(p, "clampGrid", Vec{});
        const double tol = param(p, "tolerance", 1e-9);
        const double maxError = param(p, "maxError", 1e-9);
        const std::size_t blocksPerSeed = c.nPer ? c.nPer : 20;
        std::vector<ExogenousDraw> blocks;
        for (std::uint64_t seed : c.seeds)
            for (std::size_t k = 0; k < blocksPerSeed; ++k) blocks.push_back(ExogenousDraw::sample(*spec, seed, k));
        auto matches = identifyMessageRouteC(*spec, blocks, i, j, clampGrid, tol);
        Table t{"routeC", {"block", "vj", "status", "estimate", "truth", "error", "residual"}, {}, true};
        double worst = 0.0;
        std::size_t matched = 0;
        const char* names[] = {"matched", "skipped", "no-match", "multiple"};
        for (const auto& m : matches) {
            std::string truthCell = "", errCell = "";
            if (m.status == ReplayMatch::Status::Matched) {
                World w = generate(*spec, blocks[m.block]);
                double tr = w.mechanism[i].messages->message(j, w.value[j])[0];
                double err = std::abs(tr - m.estimate.at(0));
                worst = std::max(worst, err);
                ++matched;
                truthCell = num(tr);
                errCell = num(err);
            }
            t.addRow({std::to_string(m.block), num(m.vj), names[static_cast<int>(m.status)], joined(m.estimate),
                      truthCell, errCell, num(m.residual)});
        }
        rep.tables.push_back(t);
        rep.checks.push_back({"some replay block matched", matched > 0, std::to_string(matched) + " matched"});
        rep.checks.push_back({"max message error within bound", worst <= maxError,
                              "max error " + num(worst) + " bound " + num(maxError)});
    } else {
        throw ConfigError("route must be AB or C");
    }
    return rep;
}

MeasurementModel observeParam(const Json& p) {
    auto o = param<std::string>(p, "observe", "values");
    if (o == "values") return MeasurementModel::valuesOnly();
    if (o == "contextsAndValues") return MeasurementModel::contextsAndValues();
    if (o == "everything") return MeasurementModel::everything();
    throw ConfigError("observe must be values, contextsAndValues or everything");
}

Report runEquiv(const ProtocolConfig& c, unsigned threads) {
    SpecPtr a = catalogModel(c);
    const Json& p = c.params;
    SpecPtr b;
    if (p.contains("modelB")) {
        b = modelFromJson(p.at("modelB")).spec;
    } else if (p.contains("reparameterize")) {
        const Json& r = p.at("reparameterize");
        if (param(r, "labelSwap", false)) {
            auto swap = [](double x) { return 1.0 - x; };
            b = std::make_shared<const PoscmSpec>(reparameterizeContext(*a, swap, swap));
        } else {
            if (!r.contains("gamma") || !r.contains("inverse")) throw ConfigError("reparameterize needs gamma and inverse");
            ScalarFn g = scalarFnFromJson(r.at("gamma")), gi = scalarFnFromJson(r.at("inverse"));
            b = std::make_shared<const PoscmSpec>(reparameterizeContext(*a, g.fn, gi.fn));
        }
    } else {
        throw ConfigError("equiv needs params.modelB, params.modelRefB or params.reparameterize");
    }
    std::vector<Regime> family =
        c.regimes.empty() ? valueNodeFamily(*a, ProbeProtocol{}) : regimesFromJson(c.regimes, *a);
    EquivalenceOptions opt;
    opt.nPer = c.nPer ? c.nPer : opt.nPer;
    opt.alpha = param(p, "alpha", opt.alpha);
    opt.seedA = c.seeds[0];
    opt.seedB = c.seeds.size() > 1 ? c.seeds[1] : c.seeds[0] + 1;
    opt.threads = threads;
    EquivalenceVerdict v = checkEquivalence(*a, *b, family, observeParam(p), opt);
    Table tests{"tests", {"regime", "channel", "method", "statistic", "pValue", "correctedP"}, {}, true};
    for (const auto& t : v.tests)
        tests.addRow({t.regime, t.channel, methodName(t.result.method), num(t.result.statistic), num(t.result.pValue),
                      num(t.correctedP)});
    Table verdict{"verdict", {"outcome", "regime", "channel", "minCorrectedP"}, {}};
    std::string outcome = v.distinguished ? "distinguished" : "indistinguishable";
    verdict.addRow({outcome, v.regime, v.channel, num(v.minCorrectedP)});
    Report rep{"equiv", {tests, verdict}, {}};
    expectCheck(rep, p, outcome);
    return rep;
}

Report runIisc(const ProtocolConfig& c, unsigned threads) {
    SpecPtr spec = catalogModel(c);
    const Json& p = c.params;
    NodeId source = nodeParam(p, "source", *spec);
    std::vector<Regime> regimes = regimesFromJson(c.regimes, *spec);
    if (regimes.empty() || regimes.size() > 2) throw ConfigError("iisc needs one or two regimes");
    Regime base = regimes.size() == 2 ? regimes[0] : Regime("observational");
    const Regime& other = regimes.back();
    const std::size_t n = c.nPer ? c.nPer : 10000;
    auto muA = supervisingMeasure(*spec, base, source, n, c.seeds[0], threads);
    auto muB = supervisingMeasure(*spec, other, source, n, c.seeds.size() > 1 ? c.seeds[1] : c.seeds[0] + 1, threads);
    IiscResult r = iiscDetect(muA, muB, param(p, "alpha", 0.01));
    Table marg{"marginals", {"target", "marginalBase", "marginalIntervened", "rawP"}, {}, true};
    for (std::size_t k = 0; k < muA.targets.size(); ++k)
        marg.addRow({spec->nodeName(muA.targets[k]), num(muA.marginals[k]), num(muB.marginals[k]),
                     num(k < r.dyadP.size() ? r.dyadP[k] : 1.0)});
    Table verdict{"verdict", {"outcome", "statistic", "pValue", "jointTested", "jointP"}, {}};
    std::string outcome = r.changed ? "changed" : "unchanged";
    verdict.addRow({outcome, num(r.statistic), num(r.pValue), std::to_string(r.jointTested), num(r.jointP)});
    Report rep{"iisc", {marg, verdict}, {}};
    expectCheck(rep, p, outcome);
    return rep;
}

Json reportTablesJson(const Report& report) {
    Json tables = Json::array();
    for (const auto& t : report.tables)
        tables.push_back({{"name", t.name}, {"file", t.name + ".csv"}, {"columns", t.columns}, {"rows", t.rows.size()}});
    return tables;
}

}  // namespace

void ProtocolConfig::validate() const {
    const auto& names = experimentNames();
    if (std::find(names.begin(), names.end(), experiment) == names.end())
        throw ConfigError("unknown experiment '" + experiment + "'");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (!regimes.is_array()) throw ConfigError("regimes must be a list");
    if (!params.is_object()) throw ConfigError("params must be an object");
}

Json ProtocolConfig::canonical() const {
    return {{"experiment", experiment}, {"model", model}, {"regimes", regimes},
            {"seeds", seeds},           {"nPer", nPer},   {"params", params}};
}

ProtocolConfig protocolFromJson(const Json& doc, const std::string& baseDir) {
    if (!doc.is_object()) throw ConfigError("protocol must be a JSON object");
    static const std::vector<std::string> known{"experiment", "modelRef", "model", "regimes", "seeds", "nPer", "outDir", "params"};
    for (const auto& [key, _] : doc.items())
        if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown protocol field '" + key + "'");
    ProtocolConfig c;
    try {
        if (!doc.contains("experiment")) throw ConfigError("missing field 'experiment'");
        c.experiment = doc.at("experiment").get<std::string>();
        c.modelRef = doc.value("modelRef", "");
        if (!c.modelRef.empty() && doc.contains("model")) throw ConfigError("give either modelRef or model, not both");
        if (!c.modelRef.empty()) {
            fs::path path = fs::path(baseDir) / c.modelRef;
            if (!fs::exists(path)) throw ConfigError("modelRef " + path.string() + " does not exist");
            c.model = readJsonFile(path.string());
        } else if (doc.contains("model")) {
            c.model = doc.at("model");
        }
        c.regimes = doc.value("regimes", Json::array());
        if (!doc.contains("seeds")) throw ConfigError("missing field 'seeds'");
        c.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        c.nPer = doc.value("nPer", std::size_t{0});
        c.outDir = doc.value("outDir", "");
        c.params = doc.value("params", Json::object());
        if (c.params.is_object() && c.params.contains("modelRefB")) {
            fs::path path = fs::path(baseDir) / c.params.at("modelRefB").get<std::string>();
            if (!fs::exists(path)) throw ConfigError("modelRefB " + path.string() + " does not exist");
            c.params["modelB"] = readJsonFile(path.string());
            c.params.erase("modelRefB");
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("protocol: ") + e.what());
    }
    c.validate();
    return c;
}

ProtocolConfig loadProtocol(const std::string& path) {
    Json doc = readJsonFile(path);
    return protocolFromJson(doc, fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
}

std::string fnv1a64Hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string configHash(const ProtocolConfig& config) { return fnv1a64Hex(config.canonical().dump()); }

void overrideSeeds(ProtocolConfig& config, std::uint64_t base) {
    for (std::size_t k = 0; k < config.seeds.size(); ++k) config.seeds[k] = base + k;
}

Report runExperiment(const ProtocolConfig& c, unsigned threads) {
    c.validate();
    threads = std::max(1u, threads);
    if (c.experiment == "exp1-twin") return runExp1From(c, threads);
    if (c.experiment == "exp2-confound") return runExp2From(c, threads);
    if (c.experiment == "exp3-kernels") return runExp3From(c, threads);
    if (c.experiment == "probe") return runProbe(c, threads);
    if (c.experiment == "identify-messages") return runIdentifyMessages(c, threads);
    if (c.experiment == "equiv") return runEquiv(c, threads);
    return runIisc(c, threads);
}

RunRecord runProtocol(const ProtocolConfig& config, const std::string& outDir, unsigned threads) {
    if (outDir.empty()) throw ConfigError("no output directory");
    const auto start = std::chrono::steady_clock::now();
    RunRecord rec;
    rec.report = runExperiment(config, threads);
    rec.configHash = configHash(config);
    rec.version = kVersion;
    rec.wallClockSeconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    fs::create_directories(outDir);
    for (const auto& t : rec.report.tables) {
        writeFile(fs::path(outDir) / (t.name + ".csv"), toCsv(t));
        rec.files.push_back(t.name + ".csv");
    }
    Json checks = Json::array();
    for (const auto& ch : rec.report.checks) checks.push_back({{"name", ch.name}, {"passed", ch.passed}, {"detail", ch.detail}});
    Json sidecar{{"experiment", rec.report.experiment},
                 {"version", rec.version},
                 {"configHash", rec.configHash},
                 {"config", config.canonical()},
                 {"tables", reportTablesJson(rec.report)},
                 {"checks", checks},
                 {"passed", rec.report.passed()},
                 {"wallClockSeconds", rec.wallClockSeconds}};
    writeFile(fs::path(outDir) / "run.json", sidecar.dump(2) + "\n");
    rec.files.push_back("run.json");
    Json manifest = emitPlotData(rec.report, outDir);
    for (const auto& s : manifest.at("series")) rec.files.push_back("plot/" + s.at("file").get<std::string>());
    rec.files.push_back("plot/manifest.json");
    return rec;
}

Json emitPlotData(const Report& report, const std::string& outDir) {
    fs::path dir = fs::path(outDir) / "plot";
    fs::create_directories(dir);
    Json series = Json::array();
    for (const auto& t : report.tables) {
        if (!t.series) continue;
        writeFile(dir / (t.name + ".csv"), toCsv(t));
        series.push_back({{"name", t.name}, {"file", t.name + ".csv"}, {"columns", t.columns}});
    }
    Json manifest{{"experiment", report.experiment}, {"series", series}};
    writeFile(dir / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

std::vector<Table> readPlotData(const std::string& outDir) {
    fs::path dir = fs::path(outDir) / "plot";
    Json manifest = readJsonFile((dir / "manifest.json").string());
    std::vector<Table> out;
    for (const auto& s : manifest.at("series")) {
        auto name = s.at("name").get<std::string>();
        Table t = tableFromCsv(name, readFile((dir / s.at("file").get<std::string>()).string()));
        t.series = true;
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace poscm
