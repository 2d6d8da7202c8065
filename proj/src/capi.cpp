#include "poscm/poscm.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>

#include "poscm/error.hpp"
#include "poscm/runner.hpp"

struct poscm_protocol {
    poscm::ProtocolConfig config;
};

struct poscm_result {
    poscm::RunRecord record;
};

struct poscm_model {
    poscm::LoadedModel model;
};

namespace {

thread_local std::string lastError;

poscm_status fail(poscm_status status, const std::string& what) {
    lastError = what;
    return status;
}

template <class F>
poscm_status guarded(F&& body) {
    try {
        lastError.clear();
        body();
        return POSCM_OK;
    } catch (const poscm::Error& e) {
        return fail(static_cast<poscm_status>(e.code()), e.what());
    } catch (const poscm::Json::exception& e) {
        return fail(POSCM_ERR_CONFIG, e.what());
    } catch (const std::bad_alloc&) {
        return fail(POSCM_ERR_INTERNAL, "out of memory");
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(POSCM_ERR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(POSCM_ERR_INTERNAL, e.what());
    }
}

char* duplicate(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void requireArg(const void* p, const char* what) {
    if (!p) throw poscm::InvalidArgument(std::string(what) + " is null");
}

unsigned resolveThreads(unsigned threads) {
    if (threads) return threads;
    if (const char* env = std::getenv("POSCM_THREADS")) {
        char* end = nullptr;
        unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
        throw poscm::ConfigError(std::string("POSCM_THREADS must be a positive integer, got '") + env + "'");
    }
    return 1;
}

}  // namespace

extern "C" {

const char* poscm_version(void) { return poscm::kVersion; }

const char* poscm_last_error(void) { return lastError.c_str(); }

void poscm_string_free(char* s) { std::free(s); }

poscm_status poscm_protocol_load(const char* path, poscm_protocol** out) {
    return guarded([&] {
        requireArg(path, "path");
        requireArg(out, "out");
        *out = new poscm_protocol{poscm::loadProtocol(path)};
    });
}

poscm_status poscm_protocol_parse(const char* json, const char* base_dir, poscm_protocol** out) {
    return guarded([&] {
        requireArg(json, "json");
        requireArg(out, "out");
        poscm::Json doc;
        try {
            doc = poscm::Json::parse(json);
        } catch (const poscm::Json::parse_error& e) {
            throw poscm::ConfigError(std::string("protocol: ") + e.what());
        }
        *out = new poscm_protocol{poscm::protocolFromJson(doc, base_dir ? base_dir : ".")};
    });
}

void poscm_protocol_free(poscm_protocol* p) { delete p; }

poscm_status poscm_protocol_override_seeds(poscm_protocol* p, uint64_t base) {
    return guarded([&] {
        requireArg(p, "protocol");
        poscm::overrideSeeds(p->config, base);
    });
}

poscm_status poscm_protocol_hash(const poscm_protocol* p, char out[17]) {
    return guarded([&] {
        requireArg(p, "protocol");
        requireArg(out, "out");
        std::string h = poscm::configHash(p->config);
        std::memcpy(out, h.c_str(), 17);
    });
}

poscm_status poscm_protocol_experiment(const poscm_protocol* p, char** out) {
    return guarded([&] {
        requireArg(p, "protocol");
        requireArg(out, "out");
        *out = duplicate(p->config.experiment);
    });
}

poscm_status poscm_run(const poscm_protocol* p, const char* out_dir, unsigned threads, poscm_result** out) {
    return guarded([&] {
        requireArg(p, "protocol");
        requireArg(out_dir, "out_dir");
        requireArg(out, "out");
        *out = new poscm_result{poscm::runProtocol(p->config, out_dir, resolveThreads(threads))};
    });
}

void poscm_result_free(poscm_result* r) { delete r; }

int poscm_result_passed(const poscm_result* r) { return r && r->record.report.passed() ? 1 : 0; }

size_t poscm_result_check_count(const poscm_result* r) { return r ? r->record.report.checks.size() : 0; }

poscm_status poscm_result_check(const poscm_result* r, size_t index, const char** name, int* passed,
                                const char** detail) {
    return guarded([&] {
        requireArg(r, "result");
        const auto& checks = r->record.report.checks;
        if (index >= checks.size()) throw poscm::InvalidArgument("check index out of range");
        if (name) *name = checks[index].name.c_str();
        if (passed) *passed = checks[index].passed ? 1 : 0;
        if (detail) *detail = checks[index].detail.c_str();
    });
}

double poscm_result_wall_clock(const poscm_result* r) { return r ? r->record.wallClockSeconds : 0.0; }

const char* poscm_result_hash(const poscm_result* r) { return r ? r->record.configHash.c_str() : ""; }

poscm_status poscm_model_load(const char* path, poscm_model** out) {
    return guarded([&] {
        requireArg(path, "path");
        requireArg(out, "out");
        *out = new poscm_model{poscm::modelFromJson(poscm::readJsonFile(path))};
    });
}

poscm_status poscm_model_parse(const char* json, poscm_model** out) {
    return guarded([&] {
        requireArg(json, "json");
        requireArg(out, "out");
        poscm::Json doc;
        try {
            doc = poscm::Json::parse(json);
        } catch (const poscm::Json::parse_error& e) {
            throw poscm::ConfigError(std::string("model: ") + e.what());
        }
        *out = new poscm_model{poscm::modelFromJson(doc)};
    });
}

void poscm_model_free(poscm_model* m) { delete m; }

size_t poscm_model_node_count(const poscm_model* m) { return m ? m->model.spec->n : 0; }

poscm_status poscm_model_sample(const poscm_model* m, const char* regime_json, uint64_t seed, size_t count,
                                unsigned threads, char** out) {
    return guarded([&] {
        requireArg(m, "model");
        requireArg(out, "out");
        const poscm::PoscmSpec& spec = *m->model.spec;
        poscm::Regime regime;
        if (regime_json) {
            poscm::Json doc;
            try {
                doc = poscm::Json::parse(regime_json);
            } catch (const poscm::Json::parse_error& e) {
                throw poscm::ConfigError(std::string("regime: ") + e.what());
            }
            regime = poscm::regimeFromJson(doc, spec);
        }
        auto samples = poscm::sampleWorlds(spec, regime, poscm::MeasurementModel::everything(), seed, count,
                                           resolveThreads(threads));
        std::string lines;
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const poscm::World& w = samples[k].world;
            poscm::Json edges = poscm::Json::array();
            for (std::size_t j = 0; j < w.n; ++j)
                for (std::size_t i = 0; i < w.n; ++i)
                    if (w.edge(j, i)) edges.push_back({spec.nodeName(j), spec.nodeName(i)});
            poscm::Json row{{"replicate", k}, {"edges", edges}, {"context", w.context}, {"value", w.value}};
            lines += row.dump() + "\n";
        }
        *out = duplicate(lines);
    });
}

}  // extern "C"
