#include "mnar/dataset_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mnar/errors.hpp"

namespace mnar {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_value(const ExtendedValue& v) { return v.observed() ? format_real(v.value()) : "NA"; }

void write_dataset(std::ostream& os, const Dataset& data) {
  os << "# d=" << data.d << " model=" << data.model << " seed=" << data.seed << '\n';
  for (const auto& row : data.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) os << '\t';
      os << format_value(row[j]);
    }
    os << '\n';
  }
}

namespace {
ExtendedValue parse_cell(const std::string& tok, std::size_t line) {
  if (tok == "NA") return ExtendedValue::missing();
  double v = 0.0;
  const auto* first = tok.data();
  const auto* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw ConfigError("dataset line " + std::to_string(line) + ": cannot parse '" + tok + "'");
  return ExtendedValue(v);
}
}  // namespace

Dataset read_dataset(std::istream& is) {
  Dataset data;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ConfigError("dataset: missing header line");
  std::istringstream hs(line.substr(2));
  std::string kv;
  bool have_d = false;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("dataset: malformed header field '" + kv + "'");
    const std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    try {
      if (key == "d") {
        data.d = std::stoul(val);
        have_d = true;
      } else if (key == "model") {
        data.model = val;
      } else if (key == "seed") {
        data.seed = std::stoull(val);
      } else {
        throw ConfigError("dataset: unknown header field '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("dataset: bad header value for '" + key + "'");
    }
  }
  if (!have_d || data.d == 0) throw ConfigError("dataset: header lacks d");
  std::size_t lineno = 1;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    ExtendedVector row;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      row.push_back(parse_cell(line.substr(start, tab - start), lineno));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (width == 0) width = row.size();
    if (row.size() != width) throw ConfigError("dataset line " + std::to_string(lineno) + ": ragged row");
    data.rows.push_back(std::move(row));
  }
  return data;
}

void write_dataset_file(const std::string& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_dataset(os, data);
}

Dataset read_dataset_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  return read_dataset(is);
}

}  // namespace mnar
