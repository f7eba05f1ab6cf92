#include "cohgrad/io.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cohgrad {

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    if (s == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (s == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    if (s == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::runtime_error("not a number: '" + std::string(s) + "'");
    }
    return v;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::out | std::ios::trunc | std::ios::binary), columns_(header.size()) {
    if (!out_) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        out_ << (i ? "," : "") << header[i];
    }
    out_ << '\n';
}

CsvWriter& CsvWriter::cell(std::string_view s) {
    if (filled_ == columns_) {
        throw std::logic_error("CsvWriter: too many cells in row");
    }
    out_ << (filled_ ? "," : "") << s;
    ++filled_;
    return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(format_double(v))); }

CsvWriter& CsvWriter::cell(std::size_t v) { return cell(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
    if (filled_ != columns_) {
        throw std::logic_error("CsvWriter: row has " + std::to_string(filled_) + " cells, header has " +
                               std::to_string(columns_));
    }
    out_ << '\n';
    filled_ = 0;
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw std::runtime_error("missing column: " + std::string(name));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error(path.string() + ": missing header row");
    }
    table.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw std::runtime_error(path.string() + ": row width " + std::to_string(cells.size()) +
                                     " does not match header width " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(cells));
    }
    return table;
}

Mat64 read_matrix_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const std::size_t cols = table.header.size();
    std::vector<double> data;
    data.reserve(table.rows.size() * cols);
    for (const auto& row : table.rows) {
        for (const auto& cell : row) {
            data.push_back(parse_double(cell));
        }
    }
    return Mat64(table.rows.size(), cols, std::move(data));
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::out | std::ios::trunc | std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out << text;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace cohgrad
