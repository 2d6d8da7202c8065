#include "poscm/report.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "poscm/error.hpp"

namespace poscm {

void Table::addRow(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw InvalidArgument("row width differs from table " + name);
    rows.push_back(std::move(row));
}

bool Report::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

const Table* Report::table(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return &t;
    return nullptr;
}

std::string formatNumber(double x) {
    char buf[40];
    for (int precision = 6; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

std::string toCsv(const Table& table) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (cells[k].find_first_of(",\n") != std::string::npos)
                throw InvalidArgument("CSV cell contains a separator: " + cells[k]);
            if (k) out += ',';
            out += cells[k];
        }
        out += '\n';
    };
    line(table.columns);
    for (const auto& r : table.rows) line(r);
    return out;
}

Table tableFromCsv(const std::string& name, const std::string& csv) {
    Table t{name, {}, {}};
    std::istringstream in(csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (header) {
            t.columns = std::move(cells);
            header = false;
        } else {
            t.addRow(std::move(cells));
        }
    }
    if (header) throw ConfigError("empty CSV for table " + name);
    return t;
}

}  // namespace poscm
