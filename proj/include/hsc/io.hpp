#pragma once

#include <string>
#include <vector>

namespace hsc {

// 17 significant digits, round-trip exact. Non-finite values print as NaN/Inf/-Inf.
std::string format_number(double v);

std::string csv_line(const std::vector<std::string>& fields);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace hsc
