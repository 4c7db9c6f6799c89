#pragma once

#include <fstream>
#include <sstream>
#include <string>

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string corpus(const std::string& name) {
  return slurp(std::string(RCT_CORPUS_DIR) + "/" + name);
}
