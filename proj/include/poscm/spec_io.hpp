#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poscm/layered.hpp"
#include "poscm/messages.hpp"
#include "poscm/models.hpp"

namespace poscm {

using Json = nlohmann::json;

Json readJsonFile(const std::string& path);

// Missing fields keep their defaults; {"preset": "retina"} starts from
// defaultRetina() and replaces whatever the document lists.
LayeredNetSpec layeredNetFromJson(const Json& doc);
Json layeredNetToJson(const LayeredNetSpec& net);

Domain domainFromJson(const Json& doc);
Json domainToJson(const Domain& d);

// Catalog model document. Either a zoo entry {"zoo": name, "params": {...}}
// or the table form {n, tau, names, domains, alpha, phi, gamma} whose
// mechanisms are catalog names plus parameters. A document with "layers" or
// "preset" describes a layered network and yields its POSCM view.
struct LoadedModel {
    SpecPtr spec;
    std::optional<LayeredNetSpec> layered;
    std::string kind;
};

LoadedModel modelFromJson(const Json& doc);

// Regime document {"label", "interventions": [{type, ...}]}. Node targets are
// indices or node names; values are numbers or label names. Edge entries take
// "clamp": [m...] or "replacement": [scalar-fn refs, one per coordinate].
// Admissibility is checked by the consumer (generate or simulateLayered).
Regime regimeFromJson(const Json& doc, const PoscmSpec& spec);
Json regimeToJson(const Regime& regime, const PoscmSpec& spec);
std::vector<Regime> regimesFromJson(const Json& list, const PoscmSpec& spec);

ScalarFn scalarFnFromJson(const Json& doc);
Json scalarFnToJson(const ScalarFn& fn);

}  // namespace poscm
