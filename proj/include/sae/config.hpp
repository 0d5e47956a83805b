#ifndef SAE_CONFIG_HPP
#define SAE_CONFIG_HPP

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

namespace sae {

// Flat key = value configuration files: one pair per line, '#' comments,
// whitespace around keys and values ignored.  Later assignments win.
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return std::string();
    const auto to = s.find_last_not_of(" \t\r");
    return s.substr(from, to - from + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " has an empty key");
    out[key] = value;
  }
  return out;
}

}  // namespace sae

#endif  // SAE_CONFIG_HPP
