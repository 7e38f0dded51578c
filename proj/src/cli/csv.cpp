#include "slnlss/cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "slnlss/errors.hpp"

namespace slnlss::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& x) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), x);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(x);
}

}  // namespace

Eigen::Index CsvTable::column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name) return static_cast<Eigen::Index>(j);
    }
    throw StructuralError("column '" + name + "' not found");
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) {
        throw StructuralError(source + ": missing header row");
    }
    t.header = split(line);
    for (std::size_t j = 0; j < t.header.size(); ++j) {
        if (t.header[j].empty()) {
            throw StructuralError(source + ": empty column name in header (position " +
                                  std::to_string(j + 1) + ")");
        }
        for (std::size_t k = 0; k < j; ++k) {
            if (t.header[k] == t.header[j]) {
                throw StructuralError(source + ": duplicate column '" + t.header[j] + "'");
            }
        }
    }

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split(line);
        if (fields.size() != t.header.size()) {
            throw StructuralError(source + ": line " + std::to_string(lineno) + " has " +
                                  std::to_string(fields.size()) + " fields, header has " +
                                  std::to_string(t.header.size()));
        }
        std::vector<double> row(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            if (!parse_double(fields[j], row[j])) {
                throw StructuralError(source + ": line " + std::to_string(lineno) + ", column '" +
                                      t.header[j] + "': non-numeric value '" + fields[j] + "'");
            }
        }
        rows.push_back(std::move(row));
    }

    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return t;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw StructuralError("cannot open '" + path + "'");
    }
    return parse_csv(in, path);
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    // to_chars ignores the locale, unlike printf-family formatting
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 6);
    return std::string(buf, res.ptr);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
    if (static_cast<Eigen::Index>(header.size()) != values.cols()) {
        throw StructuralError("write_csv: header and value widths differ");
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
        out << (j ? "," : "") << header[j];
    }
    out << '\n';
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            out << (j ? "," : "") << format_number(values(i, j));
        }
        out << '\n';
    }
}

}  // namespace slnlss::cli
