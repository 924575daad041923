#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace toadfront {

/// %.17g, enough to round-trip a double.
std::string format_double(double v);

/// Comma-separated file: '#'-prefixed "key: value" header lines, one column-name line, numeric rows.
/// The config hash is always the first header line.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns, const std::string& config_hash,
              const std::vector<std::pair<std::string, std::string>>& meta = {});
    void row(const std::vector<double>& values);
    void close();

private:
    std::ofstream out_;
    std::size_t n_cols_;
    std::string path_;
};

struct CsvTable {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    /// Throws MissingColumn.
    int column(const std::string& name) const;
    std::vector<double> values(const std::string& name) const;
    /// Empty string if absent.
    std::string meta_value(const std::string& key) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace toadfront
