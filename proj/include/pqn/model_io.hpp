#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace pqn {

struct ModelFile {
  std::string task;
  std::size_t dimension = 0;
  double lambda = 0.0;
  std::vector<double> weights;  // dense, length dimension
};

// Text format:
//   # task: seq
//   # dimension: 1234
//   # lambda: 0.5
//   <index>\t<weight>      one line per nonzero, shortest round-trip decimal form
void write_model(std::ostream& out, const ModelFile& model);
void save_model(const std::string& path, const ModelFile& model);
ModelFile read_model(std::istream& in, const std::string& source = "<stream>");
ModelFile load_model(const std::string& path);

// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace pqn
