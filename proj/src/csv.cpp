#include "urs/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace urs {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

Eigen::Index CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<Eigen::Index>(i);
    throw DataError("csv: missing required column '" + name + "'");
}

const std::string& CsvTable::cell(std::size_t row, Eigen::Index col) const {
    return rows.at(row).at(static_cast<std::size_t>(col));
}

double CsvTable::number(std::size_t row, Eigen::Index col) const {
    const std::string& s = cell(row, col);
    double value = 0.0;
    const auto* begin = s.data();
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end) {
        std::ostringstream msg;
        msg << "csv: row " << row + 2 << " column '" << header[col]
            << "': cannot parse number from '" << s << "'";
        throw DataError(msg.str());
    }
    return value;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("csv: cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    if (!std::getline(in, line))
        throw DataError("csv: '" + path + "' is empty (header required)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.header = split_line(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            std::ostringstream msg;
            msg << "csv: '" << path << "' line " << line_no << ": expected "
                << table.header.size() << " cells, found " << cells.size();
            throw DataError(msg.str());
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

struct CsvWriter::Impl {
    std::ofstream out;
    std::size_t width = 0;
};

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header)
    : impl_(new Impl) {
    impl_->out.open(path);
    if (!impl_->out) {
        delete impl_;
        throw DataError("csv: cannot create '" + path + "'");
    }
    impl_->width = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) impl_->out << ',';
        impl_->out << header[i];
    }
    impl_->out << '\n';
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != impl_->width)
        throw ShapeError("csv: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) impl_->out << ',';
        impl_->out << cells[i];
    }
    impl_->out << '\n';
}

std::string CsvWriter::format(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::string CsvWriter::format(Eigen::Index value) {
    return std::to_string(value);
}

}  // namespace urs
