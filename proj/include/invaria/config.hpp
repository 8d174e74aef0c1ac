#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace invaria {

/// Flat `key = value` text with `#` comments. Later keys override earlier ones.
using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::string& path);

namespace kv {

int to_int(std::string_view key, std::string_view value);
long long to_int64(std::string_view key, std::string_view value);
double to_double(std::string_view key, std::string_view value);
bool to_bool(std::string_view key, std::string_view value);
std::vector<int> to_int_list(std::string_view key, std::string_view value);
std::vector<double> to_double_list(std::string_view key, std::string_view value);

std::string format_double(double v);
std::string format_list(const std::vector<int>& v);
std::string format_list(const std::vector<double>& v);

}  // namespace kv
}  // namespace invaria
