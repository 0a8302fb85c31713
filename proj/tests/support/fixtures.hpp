#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace testsupport {

inline std::string fixtures_dir() { return EPITASK_FIXTURES_DIR; }

inline std::string read_fixture(const std::string& name) {
  std::string path = fixtures_dir() + "/" + name;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing fixture " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace testsupport
