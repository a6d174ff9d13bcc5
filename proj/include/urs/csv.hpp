#ifndef URS_CSV_HPP
#define URS_CSV_HPP

#include <map>
#include <string>
#include <vector>

#include "urs/types.hpp"

namespace urs {

/// Parsed CSV with a required header row. Cells stay strings; typed
/// accessors convert with row/column diagnostics.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Eigen::Index column(const std::string& name) const;
    const std::string& cell(std::size_t row, Eigen::Index col) const;
    double number(std::size_t row, Eigen::Index col) const;
};

CsvTable read_csv(const std::string& path);

/// Deterministic writer: fixed column order, shortest round-trip doubles.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& cells);

    static std::string format(double value);
    static std::string format(Eigen::Index value);

private:
    struct Impl;
    Impl* impl_;
};

}  // namespace urs

#endif
