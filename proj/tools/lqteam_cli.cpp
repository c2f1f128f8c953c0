#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqteam/io.hpp"
#include "lqteam/lqteam.hpp"

using namespace lqteam;
using lqteam::io::json;

namespace {

struct Common {
  std::string spec_path;
  std::string out_path;
  std::string table_path;
  int threads = 1;
};

struct Stochastic {
  std::int64_t rollouts = 10000;
  std::uint64_t seed = 0;
};

/// Comma-separated table with a header row.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(const std::vector<double>& row) { rows_.push_back(row); }

  void write(const std::string& path) const {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write file '" + path + "'");
    for (std::size_t k = 0; k < header_.size(); ++k) out << (k ? "," : "") << header_[k];
    out << "\n" << std::setprecision(17);
    for (const auto& r : rows_) {
      for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << r[k];
      out << "\n";
    }
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

std::vector<std::string> entry_names(const std::string& prefix, const Matrix& m) {
  std::vector<std::string> out;
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b)
      out.push_back(prefix + "_" + std::to_string(a) + std::to_string(b));
  return out;
}

void append_entries(std::vector<double>& row, const Matrix& m) {
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b < m.cols(); ++b) row.push_back(m(a, b));
}

void finish(const Common& c, json report, const std::string& command) {
  report["command"] = command;
  if (!c.out_path.empty()) io::write_json_file(c.out_path, report);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

Table tree_table(const TreePolicy& p) {
  std::vector<std::string> h{"t"};
  for (const auto& s : entry_names("K", p.K[0])) h.push_back(s);
  for (const auto& s : entry_names("L", p.L[0])) h.push_back(s);
  Table tab(h);
  for (int t = 0; t < p.horizon; ++t) {
    std::vector<double> row{static_cast<double>(t)};
    append_entries(row, p.K[t]);
    append_entries(row, p.L[t]);
    tab.add(row);
  }
  return tab;
}

Population resolve_population(const TeamSpec& spec) {
  if (spec.info.kind == InfoKind::meanfield) return {PopulationMode::mean_field_n, spec.n_dm};
  return population_of(spec);
}

// ---------------------------------------------------------------------------

int cmd_check(const Common& c) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  ValidationReport rep = validate(spec);
  if (spec.info.kind == InfoKind::delayed && spec.is_blocked())
    rep.append(validate_sparsity(spec.info.delays, spec.blocked()));
  for (const auto& ch : rep.checks) {
    std::cout << (ch.passed ? "pass  " : (ch.required ? "FAIL  " : "info  ")) << ch.name;
    if (!ch.message.empty()) std::cout << "  (" << ch.message << ")";
    std::cout << "\n";
  }
  finish(c, {{"validation", io::validation_to_json(rep)}}, "check");
  if (!rep.ok()) {
    for (const auto& f : rep.failures()) std::cerr << "team_model.validate: " << f << " failed\n";
    return 1;
  }
  return 0;
}

int cmd_solve_tree(const Common& c, int horizon) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  require_valid(spec, "tree_solver.solve_tree");
  const int T = horizon > 0 ? horizon : spec.horizon;
  const TreePolicy p = solve_tree(spec, T, resolve_population(spec));
  const double J = predicted_cost(spec, p);
  json rep{{"population", to_string(p.population.mode)},
           {"horizon", T},
           {"predicted_cost", J},
           {"policy", io::tree_policy_to_json(p)}};
  if (p.population.mode == PopulationMode::two_dm) {
    const OptcostVariants v = literal_optcost_variants(spec, p);
    rep["optcost_variants"] = {{"exact", v.exact},
                               {"power_t", v.power_t},
                               {"power_t_minus_1", v.power_t_minus_1},
                               {"power_t_matches", v.power_t_matches},
                               {"power_t_minus_1_matches", v.power_t_minus_1_matches}};
  }
  std::cout << "tree solve (" << to_string(p.population.mode) << ", T=" << T << ")\n"
            << "predicted cost " << fmt(J) << "\n"
            << "K_0 = " << fmt(p.K[0](0, 0)) << "  L_0 = " << fmt(p.L[0](0, 0)) << "\n";
  tree_table(p).write(c.table_path);
  finish(c, rep, "solve-tree");
  return 0;
}

int cmd_solve_ndm(const Common& c, int n, int horizon) {
  TeamSpec spec = io::load_spec(c.spec_path);
  if (spec.info.kind != InfoKind::tree) throw ValidationError("tree_solver.solve_ndm: tree spec required");
  if (n < 2) throw UsageError("--n must be at least 2");
  spec = with_population(spec, n);
  require_valid(spec, "tree_solver.solve_ndm");
  const int T = horizon > 0 ? horizon : spec.horizon;
  const TreePolicy p = solve_tree(spec, T, {PopulationMode::n_dm, n});
  const double J = predicted_cost(spec, p);
  std::cout << "N-DM tree solve (N=" << n << ", T=" << T << ")\npredicted cost " << fmt(J) << "\n";
  tree_table(p).write(c.table_path);
  finish(c, {{"population", "n_dm"}, {"n", n}, {"horizon", T}, {"predicted_cost", J}, {"policy", io::tree_policy_to_json(p)}},
         "solve-ndm");
  return 0;
}

int cmd_solve_tree_inf(const Common& c, double tol) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  require_valid(spec, "tree_solver.solve_infinite_tree");
  InfiniteTreeOptions opts;
  opts.tol = tol;
  const InfiniteTreeSolution s = solve_infinite_tree(spec, opts);
  json dis = json::array();
  for (const auto& [T, d] : s.disagreement) dis.push_back({{"horizon", T}, {"disagreement", d}});

  // Finite-horizon policy on the problem horizon with the stationary gains.
  TreePolicy p;
  p.population = s.population;
  p.horizon = spec.horizon;
  p.Sigma = s.Sigma;
  const auto m = spec.n_input();
  const auto nx = spec.n_state();
  for (int t = 0; t < p.horizon; ++t) {
    p.K.push_back(s.K);
    p.L.push_back(t < static_cast<int>(s.L.size()) ? s.L[t] : Matrix::Zero(m, nx));
    p.P.push_back(s.P);
  }
  p.P.push_back(s.P);
  p.G = detail::mean_propagation(spec.homogeneous().A, spec.homogeneous().B, p.K, p.L, p.Sigma,
                                 p.population.beta());

  json rep{{"K", io::matrix_to_json(s.K)},
           {"P", io::matrix_to_json(s.P)},
           {"dare_residual", s.dare.residual},
           {"dare_iterations", s.dare.iterations},
           {"closed_loop_radius", s.closed_loop_radius},
           {"L", io::matrices_to_json(s.L)},
           {"converged_horizon", s.converged_horizon},
           {"decay_horizon", s.decay_horizon},
           {"disagreement", dis},
           {"average_cost", s.average_cost},
           {"policy", io::tree_policy_to_json(p)}};
  std::cout << "infinite-horizon tree solve\nP = " << fmt(s.P(0, 0)) << "  K = " << fmt(s.K(0, 0))
            << "  spectral radius " << fmt(s.closed_loop_radius) << "\nL converged at T=" << s.converged_horizon
            << ", decays below threshold at t=" << s.decay_horizon << "\naverage cost " << fmt(s.average_cost)
            << "\n";
  std::vector<std::string> h{"t"};
  for (const auto& n : entry_names("L", s.L.empty() ? Matrix::Zero(m, nx) : s.L[0])) h.push_back(n);
  Table tab(h);
  for (std::size_t t = 0; t < s.L.size(); ++t) {
    std::vector<double> row{static_cast<double>(t)};
    append_entries(row, s.L[t]);
    tab.add(row);
  }
  tab.write(c.table_path);
  finish(c, rep, "solve-tree-inf");
  return 0;
}

int cmd_solve_mf(const Common& c, int n_max, int horizon) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  require_valid(spec, "tree_solver.meanfield_limit_policy");
  const int T = horizon > 0 ? horizon : spec.horizon;
  MeanFieldLimitOptions opts;
  opts.n_cap = n_max;
  const MeanFieldLimit lim = meanfield_limit_policy(spec, T, opts);
  json series = json::array();
  for (std::size_t k = 0; k < lim.schedule.size(); ++k) {
    series.push_back({{"n", lim.schedule[k]},
                      {"L", io::matrices_to_json(lim.L_series[k])},
                      {"successive_diff", k == 0 ? 0.0 : lim.successive_diff[k - 1]}});
  }
  std::cout << "mean-field limit over N = " << lim.schedule.front() << ".." << lim.schedule.back() << "\n";
  for (std::size_t k = 1; k < lim.schedule.size(); ++k)
    std::cout << "  N=" << lim.schedule[k] << "  |dL| = " << lim.successive_diff[k - 1] << "\n";
  std::vector<std::string> h{"n", "successive_diff"};
  for (int t = 0; t < T; ++t)
    for (const auto& n : entry_names("L" + std::to_string(t), lim.policy.L[t])) h.push_back(n);
  Table tab(h);
  for (std::size_t k = 0; k < lim.schedule.size(); ++k) {
    std::vector<double> row{static_cast<double>(lim.schedule[k]), k == 0 ? 0.0 : lim.successive_diff[k - 1]};
    for (const auto& L : lim.L_series[k]) append_entries(row, L);
    tab.add(row);
  }
  tab.write(c.table_path);
  finish(c, {{"horizon", T}, {"series", series}, {"policy", io::tree_policy_to_json(lim.policy)}}, "solve-mf");
  return 0;
}

json graph_json(const GraphPolicy& p) { return io::graph_policy_to_json(p); }

int cmd_solve_delayed(const Common& c, int horizon) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  const DelayedSolution s = horizon > 0 ? solve_delayed_finite(spec, horizon) : solve_delayed_finite(spec);
  std::cout << "delayed-sharing solve (T=" << s.policy.horizon << ", " << s.policy.graph.size()
            << " graph nodes)\n";
  for (int r = 0; r < s.policy.graph.size(); ++r)
    std::cout << "  node " << node_label(s.policy.graph.nodes[r]) << " -> "
              << node_label(s.policy.graph.nodes[s.policy.graph.successor[r]]) << "\n";
  std::cout << "predicted cost " << fmt(s.predicted_cost) << "\n";
  finish(c, {{"horizon", s.policy.horizon}, {"predicted_cost", s.predicted_cost}, {"policy", graph_json(s.policy)}},
         "solve-delayed");
  return 0;
}

int cmd_solve_delayed_inf(const Common& c) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  const DelayedInfiniteSolution s = solve_delayed_infinite(spec);
  json checks = json::array();
  for (int r = 0; r < s.policy.graph.size(); ++r) {
    if (!s.policy.graph.self_loop(r)) continue;
    const auto& rc = s.rank_checks[r];
    json j{{"node", node_label(s.policy.graph.nodes[r])},
           {"passed", rc.passed},
           {"marginal", rc.marginal},
           {"min_relative_sv", rc.min_relative_sv},
           {"worst_theta", rc.worst_theta},
           {"literal_evaluated", rc.literal_evaluated}};
    if (rc.literal_evaluated) {
      j["literal_passed"] = rc.literal_passed;
      j["literal_min_relative_sv"] = rc.literal_min_relative_sv;
    }
    checks.push_back(j);
  }
  std::cout << "infinite-horizon delayed-sharing solve\nestimator closed-loop spectral radius "
            << fmt(s.closed_loop_radius) << "\naverage cost " << fmt(s.average_cost) << "\n";
  finish(c,
         {{"rank_checks", checks},
          {"closed_loop_radius", s.closed_loop_radius},
          {"average_cost", s.average_cost},
          {"policy", graph_json(s.policy)}},
         "solve-delayed-inf");
  return 0;
}

int cmd_dare(const Common& c) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  Matrix A, B;
  Matrix Q = spec.cost.Q;
  Matrix R = spec.cost.R;
  if (spec.is_blocked()) {
    A = spec.blocked().full_A();
    B = spec.blocked().full_B();
  } else {
    A = spec.homogeneous().A;
    B = spec.homogeneous().B;
  }
  DareSolution s;
  if (spec.cost.S.size()) {
    s = dare_solve(A, B, Q, R, spec.cost.S, DareOptions{});
  } else {
    s = dare_solve(A, B, Q, R);
  }
  const double rho = spectral_radius(A + B * s.K);
  std::cout << "DARE solution (" << s.iterations << " iterations, residual " << s.residual << ")\n";
  if (s.P.size() == 1) std::cout << "P = " << fmt(s.P(0, 0)) << "  K = " << fmt(s.K(0, 0)) << "\n";
  std::cout << "closed-loop spectral radius " << fmt(rho) << "\n";
  finish(c,
         {{"P", io::matrix_to_json(s.P)},
          {"K", io::matrix_to_json(s.K)},
          {"residual", s.residual},
          {"iterations", s.iterations},
          {"closed_loop_radius", rho}},
         "dare");
  return 0;
}

/// Reads a policy from a solver report (its "policy" member) or a bare policy object.
LinearPolicySet load_policy(const TeamSpec& spec, const std::string& path, int horizon, json* raw = nullptr) {
  json j = io::read_json_file(path);
  if (j.contains("policy")) j = j.at("policy");
  if (raw) *raw = j;
  const std::string type = j.value("type", "");
  if (type == "tree") {
    const TreePolicy p = io::tree_policy_from_json(j);
    return from_tree_policy(spec, p);
  }
  if (type == "graph") {
    const GraphPolicy p = io::graph_policy_from_json(j, spec);
    const int T = p.stationary ? (horizon > 0 ? horizon : spec.horizon) : p.horizon;
    return from_graph_policy(spec, p, T);
  }
  throw ValidationError("io: policy file '" + path + "' has no recognised policy type");
}

json sim_json(const SimReport& r) { return io::sim_report_to_json(r); }

int cmd_simulate(const Common& c, const Stochastic& st, const std::string& policy_path, int horizon) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  require_valid(spec, "simulator.simulate");
  const LinearPolicySet pol = load_policy(spec, policy_path, horizon);
  RunOptions opts{st.rollouts, st.seed, c.threads, 0};
  const SimReport r = simulate(spec, pol, opts);
  std::cout << "Monte Carlo cost " << fmt(r.mean_cost) << " +/- " << fmt(r.std_error) << " (" << r.n_rollouts
            << " rollouts, seed " << r.seed << ")\n";
  finish(c, sim_json(r), "simulate");
  return 0;
}

int cmd_sweep_mft(const Common& c, const Stochastic& st, const std::vector<int>& schedule, int horizon) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  require_valid(spec, "simulator.mft_sweep");
  const int T = horizon > 0 ? horizon : spec.horizon;
  RunOptions opts{st.rollouts, st.seed, c.threads, 0};
  const MftTable tab = mft_sweep(spec, T, schedule, opts);
  Table out({"n", "L_diff", "L_limit_diff", "predicted_cost", "cost_diff", "mc_cost", "mc_se", "mc_limit_cost",
             "mc_limit_se", "gap", "gap_se", "first_moment_distance", "second_moment_distance", "ui_surrogate"});
  json rows = json::array();
  std::cout << "     N        |dL|     J^N(pred)      MC gap     gap SE\n";
  for (const auto& r : tab.rows) {
    out.add({static_cast<double>(r.n), r.L_diff, r.L_limit_diff, r.predicted_cost, r.cost_diff, r.mc_cost, r.mc_se,
             r.mc_limit_cost, r.mc_limit_se, r.gap, r.gap_se, r.first_moment_distance, r.second_moment_distance,
             r.ui_surrogate});
    rows.push_back({{"n", r.n},
                    {"L_diff", r.L_diff},
                    {"L_limit_diff", r.L_limit_diff},
                    {"predicted_cost", r.predicted_cost},
                    {"cost_diff", r.cost_diff},
                    {"mc_cost", r.mc_cost},
                    {"mc_se", r.mc_se},
                    {"mc_limit_cost", r.mc_limit_cost},
                    {"mc_limit_se", r.mc_limit_se},
                    {"gap", r.gap},
                    {"gap_se", r.gap_se},
                    {"first_moment_distance", r.first_moment_distance},
                    {"second_moment_distance", r.second_moment_distance},
                    {"ui_surrogate", r.ui_surrogate}});
    std::cout << std::setw(6) << r.n << std::setw(12) << std::setprecision(3) << r.L_diff << std::setw(14)
              << std::setprecision(8) << r.predicted_cost << std::setw(12) << std::setprecision(3) << r.gap
              << std::setw(11) << r.gap_se << "\n";
  }
  std::cout << "L differences non-increasing: " << (tab.L_diff_monotone ? "yes" : "no") << "\n";
  out.write(c.table_path);
  finish(c,
         {{"horizon", T},
          {"n_rollouts", st.rollouts},
          {"seed", st.seed},
          {"rows", rows},
          {"L_limit", io::matrices_to_json(tab.L_limit)},
          {"L_diff_monotone", tab.L_diff_monotone},
          {"ui_sup", tab.ui_sup}},
         "sweep-mft");
  return 0;
}

int cmd_verify(const Common& c, const Stochastic& st, const std::string& policy_path) {
  const TeamSpec spec = io::load_spec(c.spec_path);
  require_valid(spec, "simulator.verify");
  const RunOptions opts{st.rollouts, st.seed, c.threads, 0};
  json checks = json::object();
  std::vector<std::string> failed;
  auto record = [&](const std::string& name, bool passed, json detail) {
    detail["passed"] = passed;
    checks[name] = detail;
    std::cout << (passed ? "pass  " : "FAIL  ") << name << "\n";
    if (!passed) failed.push_back(name);
  };
  auto skip = [&](const std::string& name, const std::string& why) {
    checks[name] = {{"skipped", true}, {"reason", why}};
    std::cout << "skip  " << name << "  (" << why << ")\n";
  };

  // Person-by-person stationarity of the solved or supplied policy.
  PbpReport pbp;
  if (spec.info.kind == InfoKind::delayed) {
    GraphPolicy gp;
    if (!policy_path.empty()) {
      json j = io::read_json_file(policy_path);
      if (j.contains("policy")) j = j.at("policy");
      gp = io::graph_policy_from_json(j, spec);
    } else {
      gp = solve_delayed_finite(spec).policy;
    }
    pbp = pbp_check(spec, gp, 1e-4, 1e-7, gp.stationary ? spec.horizon : gp.horizon);
  } else {
    TreePolicy tp;
    if (!policy_path.empty()) {
      json j = io::read_json_file(policy_path);
      if (j.contains("policy")) j = j.at("policy");
      tp = io::tree_policy_from_json(j);
    } else {
      tp = solve_tree(spec, spec.horizon, resolve_population(spec));
    }
    pbp = pbp_check(spec, tp);
  }
  record("pbp_check", pbp.passed,
         {{"base_cost", pbp.base_cost},
          {"max_decrease", pbp.max_decrease},
          {"threshold", pbp.threshold},
          {"worst", pbp.worst},
          {"evaluations", pbp.evaluations}});

  // Structural theorems on a random asymmetric measurable policy.
  std::mt19937_64 gen(st.seed);
  const LinearPolicySet rnd = random_measurable_policy(spec, spec.horizon, gen);
  std::vector<int> sigma(spec.n_dm);
  std::iota(sigma.begin(), sigma.end(), 0);
  if (spec.n_dm >= 2) std::swap(sigma[0], sigma[1]);
  const Check* ex = validate(spec).find("exchangeable structure");
  const bool exchangeable = (ex == nullptr || ex->passed) && detail::delays_invariant(spec, sigma);
  if (spec.n_dm < 2) {
    skip("exchangeability_check", "single decision maker");
    skip("symmetrization_check", "single decision maker");
  } else if (!exchangeable) {
    skip("exchangeability_check", "spec is not exchangeable");
    skip("symmetrization_check", "spec is not exchangeable");
  } else {
    const DeltaReport d = exchangeability_check(spec, rnd, sigma, opts);
    record("exchangeability_check", d.within,
           {{"delta", d.delta}, {"std_error", d.std_error}, {"base_cost", d.base_cost}, {"other_cost", d.other_cost}});
    const SymmetrizationReport s = symmetrization_check(spec, rnd, opts);
    record("symmetrization_check", s.passed,
           {{"cost_orig", s.cost_orig},
            {"cost_sym", s.cost_sym},
            {"delta", s.delta},
            {"std_error", s.std_error},
            {"n_permutations", s.n_permutations},
            {"sampled", s.sampled}});
  }

  if (spec.info.kind == InfoKind::tree) {
    const CertaintyEquivalenceReport ce = certainty_equivalence_check(spec, opts);
    record("certainty_equivalence_check", ce.passed,
           {{"gains_equal", ce.gains_equal},
            {"pbp_passed", ce.pbp.passed},
            {"pbp_max_decrease", ce.pbp.max_decrease},
            {"mc_cost", ce.mc.mean_cost},
            {"mc_std_error", ce.mc.std_error},
            {"predicted_cost", ce.predicted_cost},
            {"mc_within", ce.mc_within}});
  } else {
    skip("certainty_equivalence_check", "tree specs only");
  }

  finish(c, {{"checks", checks}, {"passed", failed.empty()}, {"n_rollouts", st.rollouts}, {"seed", st.seed}},
         "verify");
  if (!failed.empty()) {
    for (const auto& f : failed) {
      std::cerr << "verify: " << f << " failed";
      if (f == "pbp_check") std::cerr << " (max decrease " << pbp.max_decrease << " at " << pbp.worst << ")";
      std::cerr << "\n";
    }
    return 1;
  }
  return 0;
}

std::vector<int> parse_schedule(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--schedule must be a comma-separated list of integers");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Solvers and Monte Carlo checks for symmetric LQG team problems"};
  app.require_subcommand(1);

  Common common;
  Stochastic stoch;
  int horizon = 0;
  int n = 0;
  int n_max = 256;
  double tol = 1e-7;
  std::string policy_path;
  std::string schedule;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("spec", common.spec_path, "Spec file (JSON)")->required();
    sub->add_option("--out", common.out_path, "Write the machine-readable report here");
    sub->add_option("--table", common.table_path, "Write a comma-separated table here");
    sub->add_option("--threads", common.threads, "Worker threads for Monte Carlo")->check(CLI::PositiveNumber);
  };
  auto add_stochastic = [&](CLI::App* sub) {
    sub->add_option("--seed", stoch.seed, "Random seed")->required();
    sub->add_option("--rollouts", stoch.rollouts, "Monte Carlo rollouts")->check(CLI::PositiveNumber);
  };

  auto* check = app.add_subcommand("check", "Validate a spec");
  add_common(check);
  auto* tree = app.add_subcommand("solve-tree", "Finite-horizon tree problem");
  add_common(tree);
  tree->add_option("--horizon", horizon, "Override the problem horizon");
  auto* tree_inf = app.add_subcommand("solve-tree-inf", "Infinite-horizon tree problem");
  add_common(tree_inf);
  tree_inf->add_option("--tol", tol, "Prefix disagreement tolerance under horizon doubling");
  auto* ndm = app.add_subcommand("solve-ndm", "N-DM tree problem");
  add_common(ndm);
  ndm->add_option("--n", n, "Number of decision makers")->required();
  ndm->add_option("--horizon", horizon, "Override the problem horizon");
  auto* mf = app.add_subcommand("solve-mf", "Mean-field limit by doubling N");
  add_common(mf);
  mf->add_option("--n-max", n_max, "Largest population in the doubling schedule");
  mf->add_option("--horizon", horizon, "Override the problem horizon");
  auto* del = app.add_subcommand("solve-delayed", "Finite-horizon delayed-sharing problem");
  add_common(del);
  del->add_option("--horizon", horizon, "Override the problem horizon");
  auto* del_inf = app.add_subcommand("solve-delayed-inf", "Infinite-horizon delayed-sharing problem");
  add_common(del_inf);
  auto* dare = app.add_subcommand("dare", "Discrete algebraic Riccati equation of the problem's model");
  add_common(dare);
  auto* sim = app.add_subcommand("simulate", "Monte Carlo cost of a policy");
  add_common(sim);
  add_stochastic(sim);
  sim->add_option("--policy", policy_path, "Solver report or policy file")->required();
  sim->add_option("--horizon", horizon, "Horizon for stationary policies");
  auto* sweep = app.add_subcommand("sweep-mft", "Mean-field convergence table");
  add_common(sweep);
  add_stochastic(sweep);
  sweep->add_option("--schedule", schedule, "Comma-separated population sizes")->required();
  sweep->add_option("--horizon", horizon, "Override the problem horizon");
  auto* verify = app.add_subcommand("verify", "Run the structural checks");
  add_common(verify);
  add_stochastic(verify);
  verify->add_option("--policy", policy_path, "Policy to test for stationarity instead of the solved one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    if (*check) return cmd_check(common);
    if (*tree) return cmd_solve_tree(common, horizon);
    if (*tree_inf) return cmd_solve_tree_inf(common, tol);
    if (*ndm) return cmd_solve_ndm(common, n, horizon);
    if (*mf) return cmd_solve_mf(common, n_max, horizon);
    if (*del) return cmd_solve_delayed(common, horizon);
    if (*del_inf) return cmd_solve_delayed_inf(common);
    if (*dare) return cmd_dare(common);
    if (*sim) return cmd_simulate(common, stoch, policy_path, horizon);
    if (*sweep) return cmd_sweep_mft(common, stoch, parse_schedule(schedule), horizon);
    if (*verify) return cmd_verify(common, stoch, policy_path);
  } catch (const UsageError& e) {
    std::cerr << "usage: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "io: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 3;
}
