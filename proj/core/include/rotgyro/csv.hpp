#pragma once

#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace rotgyro {

/// Shortest round-trippable-enough text for CSV cells: 12 significant digits.
std::string format_number(double value);

/// Comma-separated writer with a fixed header. Rows must match the header width.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::vector<std::string> header);

    void row(std::span<const double> values);
    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
    /// Mixed row of preformatted cells.
    void row(const std::vector<std::string>& cells);

    std::size_t columns() const noexcept { return header_.size(); }

private:
    std::ostream& out_;
    std::vector<std::string> header_;
};

}  // namespace rotgyro
