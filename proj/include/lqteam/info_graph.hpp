#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lqteam/errors.hpp"
#include "lqteam/linalg.hpp"
#include "lqteam/team_model.hpp"

namespace lqteam {

/// Sorted set of 0-based DM indices.
using DmSet = std::vector<int>;

/// Delayed-sharing information graph. Node s_k^j collects the DMs that know
/// x^j with delay at most k; every node has exactly one successor.
struct InfoGraph {
  int n_dm = 0;
  std::vector<DmSet> nodes;          // sorted by size, then lexicographically
  std::vector<int> successor;        // successor[r] = index of s with r -> s
  std::vector<int> root;             // root[i] = index of s_0^i
  std::vector<std::vector<int>> shortest_delay;  // D[i][j], kInfiniteDelay if unreachable

  int size() const { return static_cast<int>(nodes.size()); }
  bool self_loop(int r) const { return successor[r] == r; }
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < size(); ++r) out.emplace_back(r, successor[r]);
    return out;
  }
  int find(const DmSet& s) const {
    const auto it = std::find(nodes.begin(), nodes.end(), s);
    return it == nodes.end() ? -1 : static_cast<int>(it - nodes.begin());
  }
  /// Position of DM i inside node r, or -1.
  int position(int r, int i) const {
    const auto& s = nodes[r];
    const auto it = std::lower_bound(s.begin(), s.end(), i);
    return (it != s.end() && *it == i) ? static_cast<int>(it - s.begin()) : -1;
  }
};

/// DM labels in reports are 1-based, e.g. "{1,2}".
inline std::string node_label(const DmSet& s) {
  std::string out = "{";
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k) out += ",";
    out += std::to_string(s[k] + 1);
  }
  return out + "}";
}

inline std::string pair_label(int i, int j, int n_dm) {
  if (n_dm < 10) return std::to_string(i + 1) + std::to_string(j + 1);
  return std::to_string(i + 1) + "," + std::to_string(j + 1);
}

/// All-pairs shortest delays D[i][j] along directed links j -> i, with link
/// weight delays[i][j] (Floyd-Warshall).
inline std::vector<std::vector<int>> shortest_delays(const DelayMatrix& delays) {
  const int N = static_cast<int>(delays.size());
  std::vector<std::vector<int>> D = delays;
  for (int i = 0; i < N; ++i) {
    if (static_cast<int>(D[i].size()) != N) throw ValidationError("info_graph: delay matrix must be NxN");
    for (int j = 0; j < N; ++j) {
      if (D[i][j] < 0) throw ValidationError("info_graph: delays must be nonnegative");
    }
    D[i][i] = 0;
  }
  for (int k = 0; k < N; ++k) {
    for (int i = 0; i < N; ++i) {
      if (D[i][k] == kInfiniteDelay) continue;
      for (int j = 0; j < N; ++j) {
        if (D[k][j] == kInfiniteDelay) continue;
        D[i][j] = std::min(D[i][j], D[i][k] + D[k][j]);
      }
    }
  }
  return D;
}

namespace detail {

inline bool has_zero_delay_cycle(const DelayMatrix& delays) {
  const int N = static_cast<int>(delays.size());
  // reach[i][j]: j reaches i through zero-delay links between distinct DMs.
  std::vector<std::vector<bool>> reach(N, std::vector<bool>(N, false));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) reach[i][j] = i != j && delays[i][j] == 0;
  for (int k = 0; k < N; ++k)
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (i != j && reach[i][j] && reach[j][i]) return true;
  return false;
}

inline DmSet within(const std::vector<std::vector<int>>& D, int j, int k) {
  DmSet s;
  for (int i = 0; i < static_cast<int>(D.size()); ++i)
    if (D[i][j] <= k) s.push_back(i);
  return s;
}

}  // namespace detail

inline InfoGraph build_info_graph(const DelayMatrix& delays) {
  const int N = static_cast<int>(delays.size());
  if (N == 0) throw ValidationError("info_graph.build_info_graph: empty delay matrix");
  for (int i = 0; i < N; ++i) {
    if (static_cast<int>(delays[i].size()) != N)
      throw ValidationError("info_graph.build_info_graph: delay matrix must be NxN");
    if (delays[i][i] != 0) throw ValidationError("info_graph.build_info_graph: D[i][i] must be 0");
    for (int j = 0; j < N; ++j) {
      if (delays[i][j] != kInfiniteDelay && delays[i][j] > 1) {
        throw ValidationError("info_graph.build_info_graph: unsupported structure: delay " +
                              std::to_string(delays[i][j]) + " > 1 on link " + pair_label(i, j, N));
      }
    }
  }
  if (detail::has_zero_delay_cycle(delays))
    throw ValidationError("info_graph.build_info_graph: zero-delay cycle");

  InfoGraph g;
  g.n_dm = N;
  g.shortest_delay = shortest_delays(delays);
  std::set<DmSet> found;
  std::map<DmSet, DmSet> succ;
  for (int j = 0; j < N; ++j) {
    for (int k = 0;; ++k) {
      const DmSet s = detail::within(g.shortest_delay, j, k);
      const DmSet next = detail::within(g.shortest_delay, j, k + 1);
      found.insert(s);
      const auto [it, inserted] = succ.emplace(s, next);
      if (!inserted && it->second != next) {
        throw ValidationError("info_graph.build_info_graph: successor of " + node_label(s) +
                              " is not unique");
      }
      if (next == s) break;
    }
  }
  g.nodes.assign(found.begin(), found.end());
  std::stable_sort(g.nodes.begin(), g.nodes.end(), [](const DmSet& a, const DmSet& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  g.successor.resize(g.nodes.size());
  for (int r = 0; r < g.size(); ++r) g.successor[r] = g.find(succ.at(g.nodes[r]));
  g.root.resize(N);
  for (int i = 0; i < N; ++i) g.root[i] = g.find(detail::within(g.shortest_delay, i, 0));
  return g;
}

/// Structural checks for blocked dynamics under a delay pattern.
inline ValidationReport validate_sparsity(const DelayMatrix& delays, const BlockedDynamics& dyn) {
  ValidationReport rep;
  const int N = static_cast<int>(delays.size());
  bool bounded = true;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      if (delays[i][j] != kInfiniteDelay && delays[i][j] > 1) bounded = false;
  rep.add("delays at most one", bounded, "finite link delays must be 0 or 1");
  const bool cycle = detail::has_zero_delay_cycle(delays);
  rep.add("zero-delay cycle", !cycle, cycle ? "directed cycle with total delay 0" : "");
  const auto D = shortest_delays(delays);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      if (D[i][j] <= 1) continue;
      const std::string ij = pair_label(i, j, N);
      std::ostringstream os;
      os << "shortest-path delay D_" << ij << " = "
         << (D[i][j] == kInfiniteDelay ? std::string("inf") : std::to_string(D[i][j]));
      if (linalg::max_abs(dyn.A_blocks[i][j]) != 0.0)
        rep.add("sparsity: A^{" + ij + "} must be zero", false, os.str());
      if (linalg::max_abs(dyn.B_blocks[i][j]) != 0.0)
        rep.add("sparsity: B^{" + ij + "} must be zero", false, os.str());
    }
  }
  rep.add("sparsity pattern", rep.ok(), "blocks vanish wherever D_ij > 1");
  return rep;
}

/// Stacks the (block_rows x block_cols) blocks of M whose block indices lie
/// in rows x cols, in the given order.
inline Matrix partition(const Eigen::Ref<const Matrix>& M, const DmSet& rows, const DmSet& cols,
                        Eigen::Index block_rows, Eigen::Index block_cols) {
  if (block_rows <= 0 || block_cols <= 0 || M.rows() % block_rows != 0 || M.cols() % block_cols != 0)
    throw ValidationError("info_graph.partition: matrix is not a whole number of blocks");
  const auto nr = M.rows() / block_rows;
  const auto nc = M.cols() / block_cols;
  Matrix out(static_cast<Eigen::Index>(rows.size()) * block_rows,
             static_cast<Eigen::Index>(cols.size()) * block_cols);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a] < 0 || rows[a] >= nr) throw ValidationError("info_graph.partition: row index out of range");
    for (std::size_t b = 0; b < cols.size(); ++b) {
      if (cols[b] < 0 || cols[b] >= nc)
        throw ValidationError("info_graph.partition: column index out of range");
      out.block(a * block_rows, b * block_cols, block_rows, block_cols) =
          M.block(rows[a] * block_rows, cols[b] * block_cols, block_rows, block_cols);
    }
  }
  return out;
}

inline Matrix partition(const Eigen::Ref<const Matrix>& M, const DmSet& rows, const DmSet& cols,
                        Eigen::Index block_size = 1) {
  return partition(M, rows, cols, block_size, block_size);
}

}  // namespace lqteam
