#pragma once

#include <string>
#include <vector>

namespace poscm {

// Rectangular result table; cells are preformatted strings so serialized
// output is byte-stable.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    // Emitted as a plot series.
    bool series = false;

    void addRow(std::vector<std::string> row);
    bool operator==(const Table&) const = default;
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct Report {
    std::string experiment;
    std::vector<Table> tables;
    std::vector<Check> checks;

    bool passed() const;
    const Table* table(const std::string& name) const;
};

// Shortest round-trip representation ("%.17g" trimmed to what reparses).
std::string formatNumber(double x);
std::string toCsv(const Table& table);
// Inverse of toCsv; no quoting is supported, cells must not contain commas.
Table tableFromCsv(const std::string& name, const std::string& csv);

}  // namespace poscm
