#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

// Files under a per-process temp directory, removed on exit.
class Scratch {
 public:
  Scratch() : dir_(std::filesystem::temp_directory_path() / ("pqn_test_" + std::to_string(::getpid()))) {
    std::filesystem::create_directories(dir_);
  }
  ~Scratch() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

 private:
  std::filesystem::path dir_;
};
