#pragma once

// CSV helpers. Floats are written as shortest round-trip decimals, comma
// separated, with a mandatory header row.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "cohgrad/numkit.hpp"

namespace cohgrad {

/// Shortest decimal string that parses back to exactly `v`. Non-finite values
/// are written as "inf", "-inf" and "nan".
std::string format_double(double v);

double parse_double(std::string_view s);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& cell(double v);
    CsvWriter& cell(std::string_view s);
    CsvWriter& cell(std::size_t v);
    void end_row();

    std::size_t columns() const { return columns_; }

private:
    std::ofstream out_;
    std::size_t columns_;
    std::size_t filled_ = 0;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws std::runtime_error naming the column.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Reads a headed CSV of numbers as a matrix (one row per line).
Mat64 read_matrix_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace cohgrad
