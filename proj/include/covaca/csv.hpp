#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace covaca {

/// Decimal form with 17 significant digits.
std::string format_double(double x);

/// Writes one comma-separated row terminated by '\n'.
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);
void write_csv_row(std::ostream& os, const std::vector<double>& values);

}  // namespace covaca
