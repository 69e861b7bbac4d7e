#include "pqn/model_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "pqn/error.hpp"

namespace pqn {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_model(std::ostream& out, const ModelFile& model) {
  out << "# task: " << model.task << '\n';
  out << "# dimension: " << model.dimension << '\n';
  out << "# lambda: " << format_double(model.lambda) << '\n';
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    if (model.weights[j] != 0.0) out << j << '\t' << format_double(model.weights[j]) << '\n';
  }
}

void save_model(const std::string& path, const ModelFile& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_model(out, model);
  if (!out) throw Error("failed writing " + path);
}

namespace {

template <typename T>
bool parse(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

ModelFile read_model(std::istream& in, const std::string& source) {
  ModelFile model;
  bool have_dim = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view v(line);
    if (v.front() == '#') {
      v.remove_prefix(1);
      while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
      const auto colon = v.find(':');
      if (colon == std::string_view::npos) throw ParseError(source, line_no, "header line without ':'");
      std::string_view key = v.substr(0, colon), value = v.substr(colon + 1);
      while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
      if (key == "task") {
        model.task = std::string(value);
      } else if (key == "dimension") {
        if (!parse(value, model.dimension)) throw ParseError(source, line_no, "bad dimension");
        model.weights.assign(model.dimension, 0.0);
        have_dim = true;
      } else if (key == "lambda") {
        if (!parse(value, model.lambda)) throw ParseError(source, line_no, "bad lambda");
      }
      continue;
    }
    if (!have_dim) throw ParseError(source, line_no, "weight line before the dimension header");
    const auto tab = v.find('\t');
    if (tab == std::string_view::npos) throw ParseError(source, line_no, "expected index<TAB>weight");
    std::size_t j = 0;
    double w = 0.0;
    if (!parse(v.substr(0, tab), j) || !parse(v.substr(tab + 1), w)) throw ParseError(source, line_no, "bad weight line");
    if (j >= model.dimension) throw ParseError(source, line_no, "index " + std::to_string(j) + " out of range");
    model.weights[j] = w;
  }
  if (!have_dim) throw ParseError(source, line_no, "missing dimension header");
  return model;
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_model(in, path);
}

}  // namespace pqn
