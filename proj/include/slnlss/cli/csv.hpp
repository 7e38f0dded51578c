#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace slnlss::cli {

/// Numeric table read from a comma-separated file with a header row.
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;  ///< rows x header.size()

    /// Index of the named column; throws StructuralError when absent.
    Eigen::Index column(const std::string& name) const;
};

/// Parses CSV text. Blank lines are skipped, fields are trimmed, numbers may
/// use scientific notation. A non-numeric cell raises StructuralError naming
/// its line and column.
CsvTable parse_csv(std::istream& in, const std::string& source = "<input>");
CsvTable read_csv(const std::string& path);

/// Six significant digits, '.' radix, independent of the global locale.
std::string format_number(double x);

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& values);

}  // namespace slnlss::cli
