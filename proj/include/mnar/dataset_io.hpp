#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mnar/core_types.hpp"

namespace mnar {

/// Text dump: header `# d=<d> model=<name> seed=<u64>`, then one TAB-separated row
/// per observation with `NA` for missing entries. Regression dumps carry d covariate
/// columns followed by the response.
struct Dataset {
  std::size_t d = 0;
  std::string model;
  std::uint64_t seed = 0;
  std::vector<ExtendedVector> rows;
};

void write_dataset(std::ostream& os, const Dataset& data);
Dataset read_dataset(std::istream& is);

void write_dataset_file(const std::string& path, const Dataset& data);
Dataset read_dataset_file(const std::string& path);

// "%.17g", or NA for missing.
std::string format_real(double v);
std::string format_value(const ExtendedValue& v);

}  // namespace mnar
