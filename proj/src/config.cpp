#include "invaria/config.hpp"

#include "invaria/io.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace invaria {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw std::invalid_argument("config key '" + std::string(key) + "': expected " + expected + ", got '" +
                              std::string(value) + "'");
}

template <class T>
T parse_number(std::string_view key, std::string_view value, const char* expected) {
  const std::string_view v = trim(value);
  T out{};
  const char* begin = v.data();
  const char* end = v.data() + v.size();
  if (!v.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end || v.empty()) bad_value(key, value, expected);
  return out;
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view value, T (*one)(std::string_view, std::string_view)) {
  std::vector<T> out;
  std::string_view rest = trim(value);
  if (rest.empty()) return out;
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(one(key, rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues load_key_values(const std::string& path) {
  try {
    return parse_key_values(read_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

namespace kv {

int to_int(std::string_view key, std::string_view value) { return parse_number<int>(key, value, "an integer"); }

long long to_int64(std::string_view key, std::string_view value) {
  return parse_number<long long>(key, value, "an integer");
}

double to_double(std::string_view key, std::string_view value) {
  return parse_number<double>(key, value, "a number");
}

bool to_bool(std::string_view key, std::string_view value) {
  const std::string_view v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, value, "a boolean");
}

std::vector<int> to_int_list(std::string_view key, std::string_view value) {
  return parse_list<int>(key, value, &to_int);
}

std::vector<double> to_double_list(std::string_view key, std::string_view value) {
  return parse_list<double>(key, value, &to_double);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace kv
}  // namespace invaria
