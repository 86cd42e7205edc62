#include "kdd/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kdd::csv {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void Writer::add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size())
        throw std::invalid_argument("csv::Writer: row width does not match header");
    rows_.push_back(std::move(cells));
}

void Writer::add_numeric_row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(fmt(v));
    add_row(std::move(cells));
}

std::string Writer::str() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
    os << '\n';
    for (const auto& row : rows_) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    }
    return os.str();
}

void Writer::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("csv: cannot open " + path + " for writing");
    f << str();
    if (!f) throw std::runtime_error("csv: write failed for " + path);
}

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::runtime_error("csv: missing column " + name);
}

double Table::number(std::size_t row, std::size_t col) const {
    const std::string& cell = rows.at(row).at(col);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(cell, &used);
    } catch (const std::exception&) {
        throw std::runtime_error("csv: cell '" + cell + "' is not a number");
    }
    if (used != cell.size()) throw std::runtime_error("csv: cell '" + cell + "' is not a number");
    return v;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

Table parse(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("csv: empty input");

    Table t;
    t.header = split_line(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != t.header.size())
            throw std::runtime_error("csv: ragged row (expected " +
                                     std::to_string(t.header.size()) + " cells, got " +
                                     std::to_string(cells.size()) + ")");
        t.rows.push_back(std::move(cells));
    }
    return t;
}

Table load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("csv: cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse(os.str());
}

}  // namespace kdd::csv
