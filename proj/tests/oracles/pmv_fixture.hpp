#pragma once

// Reference PMV values computed with pythermalcomfort (see fixtures/gen_pmv_reference.py).

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

struct PmvCase {
  double t_air, clo, met, rh, vr, pmv;
};

inline std::vector<PmvCase> load_pmv_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<PmvCase> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream s(line);
    PmvCase c{};
    s >> c.t_air >> c.clo >> c.met >> c.rh >> c.vr >> c.pmv;
    out.push_back(c);
  }
  return out;
}

}  // namespace oracle
