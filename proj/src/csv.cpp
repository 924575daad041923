#include "toadfront/csv.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "toadfront/errors.hpp"

namespace toadfront {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns, const std::string& config_hash,
                     const std::vector<std::pair<std::string, std::string>>& meta)
    : out_(path), n_cols_(columns.size()), path_(path) {
    if (!out_) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
    out_ << "# config_hash: " << config_hash << '\n';
    for (const auto& [k, v] : meta) out_ << "# " << k << ": " << v << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != n_cols_) throw Error(ErrorCode::InvalidArgument, "csv row width mismatch in " + path_);
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
    out_ << '\n';
}

void CsvWriter::close() {
    out_.close();
    if (out_.fail()) throw Error(ErrorCode::IoError, "write failed for " + path_);
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    throw Error(ErrorCode::MissingColumn, "column '" + name + "' not present");
}

std::vector<double> CsvTable::values(const std::string& name) const {
    const int c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

std::string CsvTable::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    return {};
}

namespace {

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    CsvTable t;
    std::string line;
    bool have_cols = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto body = line.substr(1);
            const auto colon = body.find(':');
            if (colon != std::string::npos) t.meta.emplace_back(trim(body.substr(0, colon)), trim(body.substr(colon + 1)));
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!have_cols) {
            while (std::getline(ss, cell, ',')) t.columns.push_back(trim(cell));
            have_cols = true;
            continue;
        }
        std::vector<double> r;
        while (std::getline(ss, cell, ',')) {
            cell = trim(cell);
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{}) {
                // from_chars rejects "inf"/"nan" spellings on some libraries
                v = std::strtod(cell.c_str(), nullptr);
            }
            r.push_back(v);
        }
        if (r.size() != t.columns.size()) throw Error(ErrorCode::InvalidArgument, "ragged row in " + path);
        t.rows.push_back(std::move(r));
    }
    return t;
}

}  // namespace toadfront
