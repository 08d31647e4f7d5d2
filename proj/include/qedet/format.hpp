#pragma once

#include <string>
#include <vector>

namespace qedet {

/// Decimal text with 17 significant digits, '.' separator and no grouping.
/// Parses back to the identical double.
std::string format_number(double v);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

}  // namespace qedet
