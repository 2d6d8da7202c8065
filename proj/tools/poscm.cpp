#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "poscm/poscm.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;

int reportError(const char* what) {
    std::fprintf(stderr, "poscm: %s: %s\n", what, poscm_last_error());
    return kExitError;
}

std::optional<std::string> readText(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return std::nullopt;
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    std::fclose(f);
    return text;
}

int runCommand(const std::string& protocolPath, const std::string& outDir, unsigned threads,
               std::optional<std::uint64_t> seedOverride) {
    poscm_protocol* protocol = nullptr;
    if (poscm_protocol_load(protocolPath.c_str(), &protocol) != POSCM_OK) return reportError("config");
    if (seedOverride && poscm_protocol_override_seeds(protocol, *seedOverride) != POSCM_OK) {
        poscm_protocol_free(protocol);
        return reportError("config");
    }
    poscm_result* result = nullptr;
    poscm_status status = poscm_run(protocol, outDir.c_str(), threads, &result);
    poscm_protocol_free(protocol);
    if (status != POSCM_OK) return reportError("run");

    std::size_t checks = poscm_result_check_count(result);
    for (std::size_t k = 0; k < checks; ++k) {
        const char* name = nullptr;
        const char* detail = nullptr;
        int passed = 0;
        poscm_result_check(result, k, &name, &passed, &detail);
        std::printf("%s %s: %s\n", passed ? "PASS" : "FAIL", name, detail);
    }
    std::printf("config %s, %.2f s, output in %s\n", poscm_result_hash(result), poscm_result_wall_clock(result),
                outDir.c_str());
    int code = poscm_result_passed(result) ? kExitOk : kExitCheckFailed;
    poscm_result_free(result);
    return code;
}

int sampleCommand(const std::string& modelPath, const std::string& regimePath, std::uint64_t seed, std::size_t count,
                  unsigned threads) {
    poscm_model* model = nullptr;
    if (poscm_model_load(modelPath.c_str(), &model) != POSCM_OK) return reportError("config");
    std::optional<std::string> regime;
    if (!regimePath.empty()) {
        regime = readText(regimePath);
        if (!regime) {
            poscm_model_free(model);
            std::fprintf(stderr, "poscm: config: cannot open %s\n", regimePath.c_str());
            return kExitError;
        }
    }
    char* lines = nullptr;
    poscm_status status = poscm_model_sample(model, regime ? regime->c_str() : nullptr, seed, count, threads, &lines);
    poscm_model_free(model);
    if (status != POSCM_OK) return reportError("sample");
    std::fputs(lines, stdout);
    poscm_string_free(lines);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Partially ordered structural causal models: experiment runner"};
    app.require_subcommand(1);

    std::string protocolPath, outDir;
    unsigned threads = 0;
    std::optional<std::uint64_t> seedOverride;
    auto* run = app.add_subcommand("run", "Run a protocol and write result tables");
    run->add_option("protocol", protocolPath, "Protocol JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", outDir, "Output directory")->required();
    run->add_option("--threads", threads, "Worker threads (default: POSCM_THREADS or 1)");
    run->add_option("--seed-override", seedOverride, "Replace seeds by K, K+1, ...");

    std::string modelPath, regimePath;
    std::uint64_t seed = 1;
    std::size_t count = 10;
    auto* sample = app.add_subcommand("sample", "Sample worlds from a model as JSON lines");
    sample->add_option("model", modelPath, "Model JSON")->required()->check(CLI::ExistingFile);
    sample->add_option("--regime", regimePath, "Regime JSON")->check(CLI::ExistingFile);
    sample->add_option("--seed", seed, "Seed");
    sample->add_option("-n,--count", count, "Number of replicates");
    sample->add_option("--threads", threads, "Worker threads (default: POSCM_THREADS or 1)");

    auto* version = app.add_subcommand("version", "Print the toolkit version");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    if (*run) return runCommand(protocolPath, outDir, threads, seedOverride);
    if (*sample) return sampleCommand(modelPath, regimePath, seed, count, threads);
    if (*version) std::printf("%s\n", poscm_version());
    return kExitOk;
}
