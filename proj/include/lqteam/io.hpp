#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lqteam/delayed_solver.hpp"
#include "lqteam/errors.hpp"
#include "lqteam/info_graph.hpp"
#include "lqteam/simulator.hpp"
#include "lqteam/team_model.hpp"
#include "lqteam/tree_solver.hpp"

namespace lqteam::io {

using json = nlohmann::json;

// Spec files: top-level keys n_dm, horizon, model, cost, noise, info. Matrices
// are row-major nested arrays; delays use "inf" (or null) for "no link".

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError("io: " + where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) throw ValidationError("io: unknown key '" + it.key() + "' in " + where);
  }
}

inline const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError("io: missing key '" + key + "' in " + where);
  return j.at(key);
}

}  // namespace detail

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw ValidationError("io: " + name + " must be a nested array");
  if (j.empty()) return Matrix();
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) throw ValidationError("io: " + name + " must be a nested array");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ValidationError("io: " + name + " is not rectangular");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ValidationError("io: " + name + " has a non-numeric entry");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

inline json matrices_to_json(const std::vector<Matrix>& ms) {
  json out = json::array();
  for (const auto& m : ms) out.push_back(matrix_to_json(m));
  return out;
}

inline std::vector<Matrix> matrices_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw ValidationError("io: " + name + " must be an array of matrices");
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(matrix_from_json(j[k], name + "[" + std::to_string(k) + "]"));
  return out;
}

inline std::vector<std::vector<Matrix>> blocks_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw ValidationError("io: " + name + " must be an array of block rows");
  std::vector<std::vector<Matrix>> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(matrices_from_json(j[i], name + "[" + std::to_string(i) + "]"));
  return out;
}

inline json blocks_to_json(const std::vector<std::vector<Matrix>>& b) {
  json out = json::array();
  for (const auto& row : b) out.push_back(matrices_to_json(row));
  return out;
}

inline int delay_from_json(const json& v) {
  if (v.is_null()) return kInfiniteDelay;
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return kInfiniteDelay;
    throw ValidationError("io: delay strings must be \"inf\"");
  }
  if (v.is_number_integer() && v.get<long long>() >= 0 && v.get<long long>() < kInfiniteDelay)
    return static_cast<int>(v.get<long long>());
  throw ValidationError("io: delays must be nonnegative integers or \"inf\"");
}

inline json delay_to_json(int d) { return d == kInfiniteDelay ? json("inf") : json(d); }

inline TeamSpec spec_from_json(const json& j) {
  detail::reject_unknown(j, {"n_dm", "horizon", "model", "cost", "noise", "info"}, "spec");
  TeamSpec s;
  const json& nd = detail::require(j, "n_dm", "spec");
  const json& hz = detail::require(j, "horizon", "spec");
  if (!nd.is_number_integer() || !hz.is_number_integer())
    throw ValidationError("io: n_dm and horizon must be integers");
  s.n_dm = nd.get<int>();
  s.horizon = hz.get<int>();

  const json& model = detail::require(j, "model", "spec");
  detail::reject_unknown(model, {"A", "B", "A_blocks", "B_blocks"}, "model");
  if (model.contains("A_blocks") || model.contains("B_blocks")) {
    if (model.contains("A") || model.contains("B"))
      throw ValidationError("io: model must give either A/B or A_blocks/B_blocks");
    BlockedDynamics b;
    b.A_blocks = blocks_from_json(detail::require(model, "A_blocks", "model"), "A_blocks");
    b.B_blocks = blocks_from_json(detail::require(model, "B_blocks", "model"), "B_blocks");
    s.dynamics = std::move(b);
  } else {
    HomogeneousDynamics h;
    h.A = matrix_from_json(detail::require(model, "A", "model"), "A");
    h.B = matrix_from_json(detail::require(model, "B", "model"), "B");
    s.dynamics = std::move(h);
  }

  const json& cost = detail::require(j, "cost", "spec");
  detail::reject_unknown(cost, {"Q", "R", "R_tilde", "Q_tilde", "S"}, "cost");
  s.cost.Q = matrix_from_json(detail::require(cost, "Q", "cost"), "Q");
  s.cost.R = matrix_from_json(detail::require(cost, "R", "cost"), "R");
  if (cost.contains("R_tilde")) s.cost.R_tilde = matrix_from_json(cost.at("R_tilde"), "R_tilde");
  if (cost.contains("Q_tilde")) s.cost.Q_tilde = matrix_from_json(cost.at("Q_tilde"), "Q_tilde");
  if (cost.contains("S")) s.cost.S = matrix_from_json(cost.at("S"), "S");

  const json& noise = detail::require(j, "noise", "spec");
  detail::reject_unknown(noise, {"sigma_w", "init_diag", "init_offdiag", "family"}, "noise");
  s.noise.sigma_w = matrix_from_json(detail::require(noise, "sigma_w", "noise"), "sigma_w");
  s.noise.init_diag = matrix_from_json(detail::require(noise, "init_diag", "noise"), "init_diag");
  if (noise.contains("init_offdiag")) s.noise.init_offdiag = matrix_from_json(noise.at("init_offdiag"), "init_offdiag");
  if (noise.contains("family")) {
    const std::string f = noise.at("family").get<std::string>();
    if (f == "gaussian") {
      s.noise.family = NoiseFamily::gaussian;
    } else if (f == "uniform") {
      s.noise.family = NoiseFamily::uniform;
    } else {
      throw ValidationError("io: noise.family must be gaussian or uniform");
    }
  }

  const json& info = detail::require(j, "info", "spec");
  detail::reject_unknown(info, {"kind", "delays"}, "info");
  const std::string kind = detail::require(info, "kind", "info").get<std::string>();
  if (kind == "tree") {
    s.info.kind = InfoKind::tree;
  } else if (kind == "meanfield") {
    s.info.kind = InfoKind::meanfield;
  } else if (kind == "delayed") {
    s.info.kind = InfoKind::delayed;
  } else {
    throw ValidationError("io: info.kind must be tree, meanfield or delayed");
  }
  if (info.contains("delays")) {
    if (s.info.kind != InfoKind::delayed) throw ValidationError("io: delays only allowed for delayed info");
    const json& d = info.at("delays");
    if (!d.is_array()) throw ValidationError("io: delays must be a nested array");
    for (const auto& row : d) {
      if (!row.is_array()) throw ValidationError("io: delays must be a nested array");
      std::vector<int> r;
      for (const auto& v : row) r.push_back(delay_from_json(v));
      s.info.delays.push_back(std::move(r));
    }
  } else if (s.info.kind == InfoKind::delayed) {
    throw ValidationError("io: missing key 'delays' in info");
  }
  lqteam::detail::check_dimensions(s);
  return s;
}

inline json spec_to_json(const TeamSpec& s) {
  json j;
  j["n_dm"] = s.n_dm;
  j["horizon"] = s.horizon;
  if (s.is_blocked()) {
    j["model"] = {{"A_blocks", blocks_to_json(s.blocked().A_blocks)}, {"B_blocks", blocks_to_json(s.blocked().B_blocks)}};
  } else {
    j["model"] = {{"A", matrix_to_json(s.homogeneous().A)}, {"B", matrix_to_json(s.homogeneous().B)}};
  }
  json cost = {{"Q", matrix_to_json(s.cost.Q)}, {"R", matrix_to_json(s.cost.R)}};
  if (s.cost.R_tilde.size()) cost["R_tilde"] = matrix_to_json(s.cost.R_tilde);
  if (s.cost.Q_tilde.size()) cost["Q_tilde"] = matrix_to_json(s.cost.Q_tilde);
  if (s.cost.S.size()) cost["S"] = matrix_to_json(s.cost.S);
  j["cost"] = cost;
  json noise = {{"sigma_w", matrix_to_json(s.noise.sigma_w)},
                {"init_diag", matrix_to_json(s.noise.init_diag)},
                {"family", to_string(s.noise.family)}};
  if (s.noise.init_offdiag.size()) noise["init_offdiag"] = matrix_to_json(s.noise.init_offdiag);
  j["noise"] = noise;
  json info = {{"kind", to_string(s.info.kind)}};
  if (s.info.kind == InfoKind::delayed) {
    json d = json::array();
    for (const auto& row : s.info.delays) {
      json r = json::array();
      for (int v : row) r.push_back(delay_to_json(v));
      d.push_back(r);
    }
    info["delays"] = d;
  }
  j["info"] = info;
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("io: " + path + " is not valid JSON: " + e.what());
  }
}

inline TeamSpec load_spec(const std::string& path) {
  try {
    return spec_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("io: malformed spec '" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write file '" + path + "'");
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Reports and policies.

inline json validation_to_json(const ValidationReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"required", c.required}, {"message", c.message}});
  }
  return {{"ok", rep.ok()}, {"checks", checks}};
}

inline PopulationMode population_mode_from_string(const std::string& s) {
  if (s == "two_dm") return PopulationMode::two_dm;
  if (s == "n_dm") return PopulationMode::n_dm;
  if (s == "mean_field_N") return PopulationMode::mean_field_n;
  if (s == "mean_field_limit") return PopulationMode::mean_field_limit;
  throw ValidationError("io: unknown population mode '" + s + "'");
}

inline json tree_policy_to_json(const TreePolicy& p) {
  return {{"type", "tree"},
          {"population", {{"mode", to_string(p.population.mode)}, {"n", p.population.n}}},
          {"horizon", p.horizon},
          {"K", matrices_to_json(p.K)},
          {"L", matrices_to_json(p.L)},
          {"P", matrices_to_json(p.P)},
          {"G", matrices_to_json(p.G)},
          {"Sigma", matrix_to_json(p.Sigma)}};
}

inline TreePolicy tree_policy_from_json(const json& j) {
  detail::reject_unknown(j, {"type", "population", "horizon", "K", "L", "P", "G", "Sigma"}, "tree policy");
  TreePolicy p;
  const json& pop = detail::require(j, "population", "tree policy");
  p.population.mode = population_mode_from_string(pop.at("mode").get<std::string>());
  p.population.n = pop.at("n").get<int>();
  p.horizon = detail::require(j, "horizon", "tree policy").get<int>();
  p.K = matrices_from_json(detail::require(j, "K", "tree policy"), "K");
  p.L = matrices_from_json(detail::require(j, "L", "tree policy"), "L");
  if (j.contains("P")) p.P = matrices_from_json(j.at("P"), "P");
  if (j.contains("G")) p.G = matrices_from_json(j.at("G"), "G");
  p.Sigma = matrix_from_json(detail::require(j, "Sigma", "tree policy"), "Sigma");
  if (static_cast<int>(p.K.size()) != p.horizon || static_cast<int>(p.L.size()) != p.horizon)
    throw ValidationError("io: tree policy gain schedules do not match its horizon");
  return p;
}

inline json graph_policy_to_json(const GraphPolicy& p) {
  json nodes = json::array();
  for (const auto& s : p.graph.nodes) {
    json v = json::array();
    for (int i : s) v.push_back(i + 1);
    nodes.push_back(v);
  }
  json K = json::array();
  for (const auto& stage : p.K) K.push_back(matrices_to_json(stage));
  json X = json::array();
  for (const auto& stage : p.X) X.push_back(matrices_to_json(stage));
  return {{"type", "graph"},
          {"horizon", p.horizon},
          {"stationary", p.stationary},
          {"nodes", nodes},
          {"successor", p.graph.successor},
          {"root", p.graph.root},
          {"K", K},
          {"X", X}};
}

/// The graph is rebuilt from the problem's delays and must match the file.
inline GraphPolicy graph_policy_from_json(const json& j, const TeamSpec& spec) {
  detail::reject_unknown(j, {"type", "horizon", "stationary", "nodes", "successor", "root", "K", "X"}, "graph policy");
  GraphPolicy p;
  p.graph = build_info_graph(spec.info.delays);
  p.horizon = detail::require(j, "horizon", "graph policy").get<int>();
  p.stationary = j.value("stationary", false);
  const json& nodes = detail::require(j, "nodes", "graph policy");
  if (static_cast<int>(nodes.size()) != p.graph.size())
    throw ValidationError("io: graph policy nodes do not match the problem's information graph");
  for (int r = 0; r < p.graph.size(); ++r) {
    DmSet s;
    for (const auto& v : nodes[static_cast<std::size_t>(r)]) s.push_back(v.get<int>() - 1);
    if (s != p.graph.nodes[r]) throw ValidationError("io: graph policy nodes do not match the problem's information graph");
  }
  for (const auto& stage : detail::require(j, "K", "graph policy")) p.K.push_back(matrices_from_json(stage, "K"));
  if (j.contains("X"))
    for (const auto& stage : j.at("X")) p.X.push_back(matrices_from_json(stage, "X"));
  const std::size_t expected = p.stationary ? 1u : static_cast<std::size_t>(p.horizon);
  if (p.K.size() != expected) throw ValidationError("io: graph policy gain schedule does not match its horizon");
  return p;
}

inline json sim_report_to_json(const SimReport& r) {
  return {{"mean_cost", r.mean_cost},
          {"std_error", r.std_error},
          {"n_rollouts", r.n_rollouts},
          {"seed", r.seed},
          {"horizon", r.horizon},
          {"family", to_string(r.family)}};
}

}  // namespace lqteam::io
