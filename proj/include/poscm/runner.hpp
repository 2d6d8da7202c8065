#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poscm/report.hpp"
#include "poscm/spec_io.hpp"

namespace poscm {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& experimentNames() {
    static const std::vector<std::string> names{"exp1-twin", "exp2-confound", "exp3-kernels", "probe",
                                                "identify-messages", "equiv", "iisc"};
    return names;
}

// Protocol document:
//   {experiment, modelRef | model, regimes, seeds, nPer, outDir, params}
// modelRef is resolved relative to the document's directory and inlined into
// `model`, so the hash covers the model content.
struct ProtocolConfig {
    std::string experiment;
    std::string modelRef;
    Json model;
    Json regimes = Json::array();
    std::vector<std::uint64_t> seeds;
    std::size_t nPer = 0;
    std::string outDir;
    Json params = Json::object();

    void validate() const;
    Json canonical() const;
};

ProtocolConfig protocolFromJson(const Json& doc, const std::string& baseDir = ".");
ProtocolConfig loadProtocol(const std::string& path);

// FNV-1a 64 over the canonical (sorted-key, compact) serialization, as 16
// hex digits.
std::string fnv1a64Hex(const std::string& bytes);
std::string configHash(const ProtocolConfig& config);

// Replaces the seed list by K, K+1, ... keeping its length.
void overrideSeeds(ProtocolConfig& config, std::uint64_t base);

Report runExperiment(const ProtocolConfig& config, unsigned threads);

struct RunRecord {
    Report report;
    std::string configHash;
    std::string version;
    double wallClockSeconds = 0.0;
    std::vector<std::string> files;
};

// Runs the experiment and writes <table>.csv files, run.json and plot data
// into outDir (created if missing).
RunRecord runProtocol(const ProtocolConfig& config, const std::string& outDir, unsigned threads);

// Writes plot/<name>.csv for every series table plus plot/manifest.json and
// returns the manifest.
Json emitPlotData(const Report& report, const std::string& outDir);
std::vector<Table> readPlotData(const std::string& outDir);

}  // namespace poscm
