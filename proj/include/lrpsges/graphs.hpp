#ifndef LRPSGES_GRAPHS_HPP
#define LRPSGES_GRAPHS_HPP

// Partially directed graphs: DAGs, CPDAGs and the intermediate PDAGs that
// appear during greedy search, plus the usual algebra on them (skeletons,
// d-separation, Meek rules, DAG <-> CPDAG conversion, class enumeration).

#include <algorithm>
#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "lrpsges/errors.hpp"

namespace lrpsges {

using Edge = std::pair<int, int>;

/// Graph with directed and undirected edges, no self-loops and at most one
/// edge per node pair.
///
/// Stored as a dense mark matrix: mark(i, j) == 1 when the edge between i
/// and j may be traversed from i to j. A directed edge i -> j sets only
/// mark(i, j); an undirected edge sets both.
class Pdag {
 public:
  Pdag() = default;
  explicit Pdag(int num_nodes) : n_(num_nodes), mark_(static_cast<std::size_t>(num_nodes) * num_nodes, 0) {
    if (num_nodes < 0) throw InvalidArgument("Pdag: negative node count");
  }

  int num_nodes() const noexcept { return n_; }

  bool adjacent(int a, int b) const { return at(a, b) || at(b, a); }
  bool has_directed(int from, int to) const { return at(from, to) && !at(to, from); }
  bool has_undirected(int a, int b) const { return at(a, b) && at(b, a); }

  void add_directed(int from, int to) {
    check_new_pair(from, to);
    set(from, to, 1);
  }
  void add_undirected(int a, int b) {
    check_new_pair(a, b);
    set(a, b, 1);
    set(b, a, 1);
  }
  void remove_edge(int a, int b) {
    check_nodes(a, b);
    set(a, b, 0);
    set(b, a, 0);
  }
  /// Turns an existing edge between the pair into from -> to.
  void orient(int from, int to) {
    if (!adjacent(from, to)) throw InvalidArgument("orient: nodes are not adjacent");
    set(from, to, 1);
    set(to, from, 0);
  }
  /// Turns an existing edge into an undirected one.
  void unorient(int a, int b) {
    if (!adjacent(a, b)) throw InvalidArgument("unorient: nodes are not adjacent");
    set(a, b, 1);
    set(b, a, 1);
  }

  std::vector<int> parents(int v) const {
    std::vector<int> out;
    for (int u = 0; u < n_; ++u)
      if (has_directed(u, v)) out.push_back(u);
    return out;
  }
  std::vector<int> children(int v) const {
    std::vector<int> out;
    for (int u = 0; u < n_; ++u)
      if (has_directed(v, u)) out.push_back(u);
    return out;
  }
  /// Nodes joined to v by an undirected edge.
  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int u = 0; u < n_; ++u)
      if (u != v && has_undirected(u, v)) out.push_back(u);
    return out;
  }
  std::vector<int> adjacents(int v) const {
    std::vector<int> out;
    for (int u = 0; u < n_; ++u)
      if (u != v && adjacent(u, v)) out.push_back(u);
    return out;
  }
  int degree(int v) const {
    int d = 0;
    for (int u = 0; u < n_; ++u) d += (u != v && adjacent(u, v)) ? 1 : 0;
    return d;
  }

  /// Directed edges sorted by (from, to).
  std::vector<Edge> directed_edges() const {
    std::vector<Edge> out;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (has_directed(i, j)) out.emplace_back(i, j);
    return out;
  }
  /// Undirected edges as (a, b) with a < b, sorted.
  std::vector<Edge> undirected_edges() const {
    std::vector<Edge> out;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        if (has_undirected(i, j)) out.emplace_back(i, j);
    return out;
  }
  int num_edges() const {
    int c = 0;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j) c += adjacent(i, j) ? 1 : 0;
    return c;
  }
  int num_undirected() const { return static_cast<int>(undirected_edges().size()); }

  friend bool operator==(const Pdag& a, const Pdag& b) { return a.n_ == b.n_ && a.mark_ == b.mark_; }

 private:
  bool at(int i, int j) const {
    check_nodes(i, j);
    return mark_[static_cast<std::size_t>(i) * n_ + j] != 0;
  }
  void set(int i, int j, std::uint8_t v) { mark_[static_cast<std::size_t>(i) * n_ + j] = v; }
  void check_nodes(int a, int b) const {
    if (a < 0 || b < 0 || a >= n_ || b >= n_) throw InvalidArgument("node index out of range");
  }
  void check_new_pair(int a, int b) const {
    check_nodes(a, b);
    if (a == b) throw InvalidArgument("self-loops are not allowed");
    if (adjacent(a, b)) {
      throw InvalidArgument("pair (" + std::to_string(a) + "," + std::to_string(b) + ") already has an edge");
    }
  }

  int n_ = 0;
  std::vector<std::uint8_t> mark_;
};

/// Topological order of the directed part (undirected edges ignored), or
/// nullopt when it has a cycle. Among available nodes the smallest index
/// goes first.
inline std::optional<std::vector<int>> topological_order(const Pdag& g) {
  const int n = g.num_nodes();
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  for (auto [a, b] : g.directed_edges()) ++indeg[static_cast<std::size_t>(b)];
  std::vector<int> order;
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  for (int step = 0; step < n; ++step) {
    int next = -1;
    for (int v = 0; v < n; ++v) {
      if (!done[static_cast<std::size_t>(v)] && indeg[static_cast<std::size_t>(v)] == 0) {
        next = v;
        break;
      }
    }
    if (next < 0) return std::nullopt;
    done[static_cast<std::size_t>(next)] = true;
    order.push_back(next);
    for (int c : g.children(next)) --indeg[static_cast<std::size_t>(c)];
  }
  return order;
}

inline bool is_acyclic(const Pdag& g) { return topological_order(g).has_value(); }

/// Directed acyclic graph.
class Dag {
 public:
  Dag() = default;
  explicit Dag(Pdag g) : g_(std::move(g)) {
    if (g_.num_undirected() != 0) throw InvalidArgument("Dag: graph has undirected edges");
    if (!is_acyclic(g_)) throw InvalidArgument("Dag: graph has a directed cycle");
  }
  /// Builds from a list of directed edges.
  Dag(int num_nodes, const std::vector<Edge>& edges) : Dag(from_edges(num_nodes, edges)) {}

  const Pdag& graph() const noexcept { return g_; }
  int num_nodes() const noexcept { return g_.num_nodes(); }
  std::vector<int> parents(int v) const { return g_.parents(v); }
  std::vector<int> children(int v) const { return g_.children(v); }
  std::vector<int> topological_order() const { return *lrpsges::topological_order(g_); }

  friend bool operator==(const Dag& a, const Dag& b) { return a.g_ == b.g_; }

 private:
  static Pdag from_edges(int n, const std::vector<Edge>& edges) {
    Pdag g(n);
    for (auto [a, b] : edges) g.add_directed(a, b);
    return g;
  }
  Pdag g_;
};

/// Every edge made undirected.
inline Pdag skeleton(const Pdag& g) {
  Pdag out(g.num_nodes());
  for (int i = 0; i < g.num_nodes(); ++i)
    for (int j = i + 1; j < g.num_nodes(); ++j)
      if (g.adjacent(i, j)) out.add_undirected(i, j);
  return out;
}

inline bool is_clique(const Pdag& g, const std::vector<int>& nodes) {
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      if (!g.adjacent(nodes[a], nodes[b])) return false;
  return true;
}

/// Unshielded colliders a -> c <- b as (a, c, b) with a < b.
inline std::vector<std::tuple<int, int, int>> v_structures(const Pdag& g) {
  std::vector<std::tuple<int, int, int>> out;
  for (int c = 0; c < g.num_nodes(); ++c) {
    const auto pa = g.parents(c);
    for (std::size_t x = 0; x < pa.size(); ++x)
      for (std::size_t y = x + 1; y < pa.size(); ++y)
        if (!g.adjacent(pa[x], pa[y])) out.emplace_back(pa[x], c, pa[y]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace detail {

inline void check_dsep_query(int n, int i, int j, const std::vector<int>& given) {
  if (i == j || i < 0 || j < 0 || i >= n || j >= n) throw InvalidArgument("d-separation: bad node pair");
  for (int s : given) {
    if (s == i || s == j || s < 0 || s >= n) throw InvalidArgument("d-separation: bad conditioning set");
  }
}

}  // namespace detail

/// d-separation of i and j given `given`, by reachability over active
/// trails (Bayes-ball).
inline bool d_separated(const Dag& dag, int i, int j, const std::vector<int>& given) {
  const Pdag& g = dag.graph();
  const int n = g.num_nodes();
  detail::check_dsep_query(n, i, j, given);

  std::vector<bool> in_given(static_cast<std::size_t>(n), false);
  for (int s : given) in_given[static_cast<std::size_t>(s)] = true;
  // Nodes with a descendant in the conditioning set (including itself).
  std::vector<bool> anc(static_cast<std::size_t>(n), false);
  std::deque<int> queue(given.begin(), given.end());
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    if (anc[static_cast<std::size_t>(v)]) continue;
    anc[static_cast<std::size_t>(v)] = true;
    for (int p : g.parents(v)) queue.push_back(p);
  }

  // Visit states: (node, arrived-from-child) and (node, arrived-from-parent).
  std::vector<bool> seen_up(static_cast<std::size_t>(n), false);
  std::vector<bool> seen_down(static_cast<std::size_t>(n), false);
  std::deque<std::pair<int, bool>> frontier{{i, true}};
  while (!frontier.empty()) {
    auto [v, up] = frontier.front();
    frontier.pop_front();
    auto& seen = up ? seen_up : seen_down;
    if (seen[static_cast<std::size_t>(v)]) continue;
    seen[static_cast<std::size_t>(v)] = true;
    const bool blocked = in_given[static_cast<std::size_t>(v)];
    if (v == j && !blocked) return false;
    if (up) {
      if (!blocked) {
        for (int p : g.parents(v)) frontier.emplace_back(p, true);
        for (int c : g.children(v)) frontier.emplace_back(c, false);
      }
    } else {
      if (!blocked) {
        for (int c : g.children(v)) frontier.emplace_back(c, false);
      }
      if (anc[static_cast<std::size_t>(v)]) {
        for (int p : g.parents(v)) frontier.emplace_back(p, true);
      }
    }
  }
  return true;
}

/// d-separation via the moral graph of the ancestral set of {i, j} u given.
inline bool d_separated_moral(const Dag& dag, int i, int j, const std::vector<int>& given) {
  const Pdag& g = dag.graph();
  const int n = g.num_nodes();
  detail::check_dsep_query(n, i, j, given);

  std::vector<bool> keep(static_cast<std::size_t>(n), false);
  std::deque<int> queue(given.begin(), given.end());
  queue.push_back(i);
  queue.push_back(j);
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    if (keep[static_cast<std::size_t>(v)]) continue;
    keep[static_cast<std::size_t>(v)] = true;
    for (int p : g.parents(v)) queue.push_back(p);
  }
  std::vector<std::vector<bool>> moral(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(n), false));
  auto link = [&](int a, int b) {
    moral[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
    moral[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
  };
  for (int v = 0; v < n; ++v) {
    if (!keep[static_cast<std::size_t>(v)]) continue;
    const auto pa = g.parents(v);
    for (std::size_t a = 0; a < pa.size(); ++a) {
      link(pa[a], v);
      for (std::size_t b = a + 1; b < pa.size(); ++b) link(pa[a], pa[b]);
    }
  }
  std::vector<bool> blocked(static_cast<std::size_t>(n), false);
  for (int s : given) blocked[static_cast<std::size_t>(s)] = true;
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  queue = {i};
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    if (seen[static_cast<std::size_t>(v)]) continue;
    seen[static_cast<std::size_t>(v)] = true;
    if (v == j) return false;
    for (int u = 0; u < n; ++u) {
      if (keep[static_cast<std::size_t>(u)] && !blocked[static_cast<std::size_t>(u)] &&
          moral[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)]) {
        queue.push_back(u);
      }
    }
  }
  return true;
}

/// CPDAG of the Markov equivalence class of `dag`, by ordering the edges and
/// labelling each one compelled or reversible.
inline Pdag dag_to_cpdag(const Dag& dag) {
  const Pdag& g = dag.graph();
  const int n = g.num_nodes();
  const auto order = dag.topological_order();
  std::vector<int> pos(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) pos[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;

  // Edge order: by head in increasing topological position, then by tail in
  // decreasing position.
  std::vector<Edge> edges;
  for (int y : order) {
    auto pa = g.parents(y);
    std::sort(pa.begin(), pa.end(), [&](int a, int b) { return pos[static_cast<std::size_t>(a)] > pos[static_cast<std::size_t>(b)]; });
    for (int x : pa) edges.emplace_back(x, y);
  }

  enum Label : std::uint8_t { kUnknown, kCompelled, kReversible };
  std::vector<Label> label(static_cast<std::size_t>(n) * n, kUnknown);
  auto lab = [&](int x, int y) -> Label& { return label[static_cast<std::size_t>(x) * n + y]; };
  auto label_into = [&](int y, Label value) {
    for (int z : g.parents(y))
      if (lab(z, y) == kUnknown) lab(z, y) = value;
  };

  for (auto [x, y] : edges) {
    if (lab(x, y) != kUnknown) continue;
    bool done = false;
    for (int w : g.parents(x)) {
      if (lab(w, x) != kCompelled) continue;
      if (!g.has_directed(w, y)) {
        lab(x, y) = kCompelled;
        label_into(y, kCompelled);
        done = true;
        break;
      }
      lab(w, y) = kCompelled;
    }
    if (done) continue;
    bool compelled = false;
    for (int z : g.parents(y)) {
      if (z != x && !g.has_directed(z, x)) {
        compelled = true;
        break;
      }
    }
    lab(x, y) = compelled ? kCompelled : kReversible;
    label_into(y, compelled ? kCompelled : kReversible);
  }

  Pdag out(n);
  for (auto [x, y] : edges) {
    if (lab(x, y) == kCompelled) {
      out.add_directed(x, y);
    } else {
      out.add_undirected(x, y);
    }
  }
  return out;
}

/// Applies Meek's orientation rules R1-R4 until nothing changes.
/// Raises InconsistentPdag when the result has a directed cycle.
inline Pdag meek_closure(Pdag g) {
  const int n = g.num_nodes();
  bool changed = true;
  while (changed) {
    changed = false;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a == b || !g.has_undirected(a, b)) continue;
        bool orient = false;
        // R1: c -> a - b with c, b non-adjacent.
        for (int c = 0; c < n && !orient; ++c) {
          if (c != b && g.has_directed(c, a) && !g.adjacent(c, b)) orient = true;
        }
        // R2: a -> c -> b with a - b.
        for (int c = 0; c < n && !orient; ++c) {
          if (g.has_directed(a, c) && g.has_directed(c, b)) orient = true;
        }
        // R3: a - c -> b, a - d -> b, c and d non-adjacent.
        for (int c = 0; c < n && !orient; ++c) {
          if (c == b || !g.has_undirected(a, c) || !g.has_directed(c, b)) continue;
          for (int d = c + 1; d < n && !orient; ++d) {
            if (d != b && g.has_undirected(a, d) && g.has_directed(d, b) && !g.adjacent(c, d)) orient = true;
          }
        }
        // R4: c -> d -> b with a adjacent to c and d, c and b non-adjacent.
        for (int d = 0; d < n && !orient; ++d) {
          if (d == a || !g.has_directed(d, b) || !g.adjacent(a, d)) continue;
          for (int c = 0; c < n && !orient; ++c) {
            if (c != a && c != b && g.has_directed(c, d) && g.adjacent(a, c) && !g.adjacent(c, b)) orient = true;
          }
        }
        if (orient) {
          g.orient(a, b);
          changed = true;
        }
      }
    }
  }
  if (!is_acyclic(g)) throw InconsistentPdag("orientation rules produced a directed cycle");
  return g;
}

/// A DAG with the same skeleton and v-structures as `g` that keeps every
/// directed edge of `g` (Dor-Tarsi). Raises InconsistentPdag if none exists.
inline Dag pdag_to_dag(const Pdag& g) {
  const int n = g.num_nodes();
  Pdag work = g;
  Pdag out(n);
  for (auto [a, b] : g.directed_edges()) out.add_directed(a, b);
  std::vector<bool> alive(static_cast<std::size_t>(n), true);
  for (int removed = 0; removed < n; ++removed) {
    int pick = -1;
    for (int v = 0; v < n && pick < 0; ++v) {
      if (!alive[static_cast<std::size_t>(v)]) continue;
      bool sink = true;
      for (int u = 0; u < n && sink; ++u)
        if (alive[static_cast<std::size_t>(u)] && work.has_directed(v, u)) sink = false;
      if (!sink) continue;
      std::vector<int> adj;
      for (int u = 0; u < n; ++u)
        if (alive[static_cast<std::size_t>(u)] && u != v && work.adjacent(u, v)) adj.push_back(u);
      bool ok = true;
      for (int u : adj) {
        if (!work.has_undirected(u, v)) continue;
        for (int w : adj)
          if (w != u && !work.adjacent(u, w)) ok = false;
        if (!ok) break;
      }
      if (ok) pick = v;
    }
    if (pick < 0) throw InconsistentPdag("PDAG admits no consistent DAG extension");
    for (int u = 0; u < n; ++u) {
      if (alive[static_cast<std::size_t>(u)] && u != pick && work.has_undirected(u, pick)) out.add_directed(u, pick);
    }
    alive[static_cast<std::size_t>(pick)] = false;
  }
  return Dag(std::move(out));
}

/// CPDAG of the class represented by a consistent PDAG.
inline Pdag complete_pdag(const Pdag& g) { return dag_to_cpdag(pdag_to_dag(g)); }

/// All DAGs in the Markov equivalence class of the CPDAG `c`.
/// Raises TooLarge above `max_undirected` undirected edges.
inline std::vector<Dag> enumerate_class(const Pdag& c, int max_undirected = 12) {
  if (c.num_undirected() > max_undirected) {
    throw TooLarge("class enumeration limited to " + std::to_string(max_undirected) + " undirected edges, got " +
                   std::to_string(c.num_undirected()));
  }
  const auto target_v = v_structures(c);
  std::vector<Dag> out;
  auto recurse = [&](auto&& self, const Pdag& g) -> void {
    const auto und = g.undirected_edges();
    if (und.empty()) {
      if (is_acyclic(g) && v_structures(g) == target_v) out.emplace_back(g);
      return;
    }
    const auto [a, b] = und.front();
    for (const Edge& dir : {Edge{a, b}, Edge{b, a}}) {
      Pdag next = g;
      next.orient(dir.first, dir.second);
      try {
        next = meek_closure(std::move(next));
      } catch (const InconsistentPdag&) {
        continue;
      }
      self(self, next);
    }
  };
  recurse(recurse, c);
  if (out.empty()) throw InconsistentPdag("graph is not a valid CPDAG: no member DAGs");
  return out;
}

/// Writes the edge-list format: "pdag <n>" then one "i --> j" or "i --- j"
/// line per edge, ordered by (i, j).
inline void write_edge_list(std::ostream& os, const Pdag& g) {
  os << "pdag " << g.num_nodes() << '\n';
  for (int i = 0; i < g.num_nodes(); ++i) {
    for (int j = 0; j < g.num_nodes(); ++j) {
      if (g.has_directed(i, j)) {
        os << i << " --> " << j << '\n';
      } else if (i < j && g.has_undirected(i, j)) {
        os << i << " --- " << j << '\n';
      }
    }
  }
}

inline std::string to_edge_list(const Pdag& g) {
  std::ostringstream os;
  write_edge_list(os, g);
  return os.str();
}

inline Pdag read_edge_list(std::istream& is) {
  std::string line;
  std::optional<Pdag> g;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (!g) {
      int n = -1;
      if (first != "pdag" || !(ls >> n) || n < 0) throw FormatError("expected header 'pdag <num_nodes>'");
      g.emplace(n);
      continue;
    }
    std::string arrow;
    int b = -1;
    int a = -1;
    try {
      a = std::stoi(first);
    } catch (const std::exception&) {
      throw FormatError("line " + std::to_string(line_no) + ": bad node index '" + first + "'");
    }
    if (!(ls >> arrow >> b)) throw FormatError("line " + std::to_string(line_no) + ": expected 'i --> j' or 'i --- j'");
    try {
      if (arrow == "-->") {
        g->add_directed(a, b);
      } else if (arrow == "---") {
        g->add_undirected(a, b);
      } else {
        throw FormatError("line " + std::to_string(line_no) + ": unknown edge mark '" + arrow + "'");
      }
    } catch (const InvalidArgument& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!g) throw FormatError("empty edge list");
  return *g;
}

inline Pdag parse_edge_list(const std::string& text) {
  std::istringstream is(text);
  return read_edge_list(is);
}

}  // namespace lrpsges

#endif  // LRPSGES_GRAPHS_HPP
