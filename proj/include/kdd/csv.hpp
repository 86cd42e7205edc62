#pragma once

#include <string>
#include <vector>

namespace kdd::csv {

// Formats a double as %.17g so values round-trip exactly and output bytes are
// reproducible run to run.
std::string fmt(double v);

class Writer {
public:
    explicit Writer(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(std::vector<std::string> cells);
    void add_numeric_row(const std::vector<double>& values);

    std::string str() const;
    void save(const std::string& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws if absent
    double number(std::size_t row, std::size_t col) const;
};

Table load(const std::string& path);
Table parse(const std::string& text);

}  // namespace kdd::csv
