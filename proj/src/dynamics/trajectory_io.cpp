#include <sstream>

#include "hamworld/dynamics.hpp"
#include "hamworld/errors.hpp"
#include "json.hpp"

namespace hamworld {
namespace {

using nlohmann::json;

json rows(const Vec& flat, std::size_t n, std::size_t d) {
  json out = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < d; ++k) row.push_back(flat[i * d + k]);
    out.push_back(std::move(row));
  }
  return out;
}

void unrows(const json& j, std::size_t& n, std::size_t& d, Vec& flat) {
  if (!j.is_array() || j.empty()) throw CorruptFile("trajectory record: expected N x d array");
  n = j.size();
  d = j.front().size();
  flat.clear();
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != d) {
      throw CorruptFile("trajectory record: ragged coordinate array");
    }
    for (const auto& v : row) flat.push_back(v.get<double>());
  }
}

}  // namespace

std::string trajectory_to_jsonl(const PhaseTrajectory& traj) {
  std::ostringstream os;
  for (const auto& r : traj.records) {
    json j;
    j["t"] = r.t;
    j["q"] = rows(r.state.q, r.state.n, r.state.d);
    j["p"] = rows(r.state.p, r.state.n, r.state.d);
    j["a"] = r.action;
    j["h"] = r.h;
    os << j.dump() << '\n';
  }
  return os.str();
}

PhaseTrajectory trajectory_from_jsonl(const std::string& text) {
  PhaseTrajectory traj;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      TrajectoryRecord r;
      r.t = j.at("t").get<std::size_t>();
      std::size_t n = 0, d = 0, n2 = 0, d2 = 0;
      unrows(j.at("q"), n, d, r.state.q);
      unrows(j.at("p"), n2, d2, r.state.p);
      if (n != n2 || d != d2) throw CorruptFile("q and p shapes differ");
      r.state.n = n;
      r.state.d = d;
      r.action = j.at("a").get<Vec>();
      r.h = j.at("h").get<double>();
      traj.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw CorruptFile("trajectory line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return traj;
}

}  // namespace hamworld
