#include <gtest/gtest.h>

#include <map>
#include <set>

#include "lrpsges/errors.hpp"
#include "lrpsges/graphs.hpp"
#include "lrpsges/simsem.hpp"
#include "oracles.hpp"

using namespace lrpsges;

namespace {

std::set<Edge> edge_set(const Pdag& g) {
  std::set<Edge> out;
  for (auto e : g.directed_edges()) out.insert(e);
  for (auto [a, b] : g.undirected_edges()) out.insert({std::min(a, b), -1 - std::max(a, b)});
  return out;
}

/// CPDAG computed from a group of equivalent DAGs: an edge stays directed
/// only if every member orients it the same way.
Pdag cpdag_from_members(const std::vector<oracle::Adj>& members) {
  const int n = static_cast<int>(members.front().size());
  Pdag out(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      bool fwd = false;
      bool bwd = false;
      for (const auto& m : members) {
        fwd = fwd || m[i][j];
        bwd = bwd || m[j][i];
      }
      if (fwd && bwd) {
        out.add_undirected(i, j);
      } else if (fwd) {
        out.add_directed(i, j);
      } else if (bwd) {
        out.add_directed(j, i);
      }
    }
  }
  return out;
}

// Observed part of the two-hidden-variable example: X1..X5 are 0..4, the
// hidden H1, H2 are 5 and 6.
Dag hidden_example_dag() {
  return Dag(7, {{0, 1}, {2, 1}, {3, 4}, {5, 0}, {5, 1}, {5, 3}, {6, 1}, {6, 3}, {6, 4}});
}

}  // namespace

TEST(Pdag, RejectsBadEdges) {
  Pdag g(3);
  g.add_directed(0, 1);
  EXPECT_THROW(g.add_directed(1, 0), InvalidArgument);
  EXPECT_THROW(g.add_undirected(0, 1), InvalidArgument);
  EXPECT_THROW(g.add_directed(2, 2), InvalidArgument);
  EXPECT_THROW(g.add_directed(0, 3), InvalidArgument);
  EXPECT_THROW(Dag(3, {{0, 1}, {1, 2}, {2, 0}}), InvalidArgument);
  Pdag u(2);
  u.add_undirected(0, 1);
  EXPECT_THROW(Dag{u}, InvalidArgument);
}

TEST(Skeleton, Examples) {
  const Pdag s = skeleton(Dag(2, {{0, 1}}).graph());
  EXPECT_TRUE(s.has_undirected(0, 1));
  EXPECT_EQ(skeleton(Pdag(4)).num_edges(), 0);
  // 1 -> 2 <- 3, 4 -> 5
  const Pdag g5 = skeleton(Dag(5, {{0, 1}, {2, 1}, {3, 4}}).graph());
  EXPECT_EQ(g5.num_edges(), 3);
  EXPECT_TRUE(g5.has_undirected(0, 1));
  EXPECT_TRUE(g5.has_undirected(1, 2));
  EXPECT_TRUE(g5.has_undirected(3, 4));
  EXPECT_EQ(g5.num_undirected(), 3);
}

TEST(Acyclicity, Examples) {
  Pdag chain(3);
  chain.add_directed(0, 1);
  chain.add_directed(1, 2);
  EXPECT_TRUE(is_acyclic(chain));
  Pdag cycle(3);
  cycle.add_directed(0, 1);
  cycle.add_directed(1, 2);
  cycle.add_directed(2, 0);
  EXPECT_FALSE(is_acyclic(cycle));
  Pdag mixed(3);
  mixed.add_directed(0, 1);
  mixed.add_directed(1, 2);
  mixed.add_undirected(0, 2);
  EXPECT_TRUE(is_acyclic(mixed));
}

TEST(Acyclicity, GeneratedGraphsAreDags) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SimDesign d;
    d.p = 20;
    d.h = 3;
    d.n = 10;
    d.sparsity = 0.2;
    d.seed = seed;
    const LinearSem sem = random_sem(d);
    EXPECT_TRUE(is_acyclic(sem.joint_graph()));
    EXPECT_TRUE(is_acyclic(sem.observed_dag().graph()));
  }
}

TEST(DSeparation, TextbookExamples) {
  const Dag chain(3, {{0, 1}, {1, 2}});
  EXPECT_TRUE(d_separated(chain, 0, 2, {1}));
  EXPECT_FALSE(d_separated(chain, 0, 2, {}));
  const Dag collider(3, {{0, 2}, {1, 2}});
  EXPECT_TRUE(d_separated(collider, 0, 1, {}));
  EXPECT_FALSE(d_separated(collider, 0, 1, {2}));
  const Dag with_child(4, {{0, 2}, {1, 2}, {2, 3}});
  EXPECT_FALSE(d_separated(with_child, 0, 1, {3}));
  EXPECT_THROW(d_separated(chain, 0, 0, {}), InvalidArgument);
  EXPECT_THROW(d_separated(chain, 0, 2, {0}), InvalidArgument);
}

TEST(DSeparation, HiddenVariableExample) {
  const Dag g = hidden_example_dag();
  // Pairs joined in the marginal ancestral graph: no observed set separates them.
  const std::vector<Edge> joined = {{0, 1}, {1, 2}, {3, 4}, {0, 3}, {0, 4}, {1, 3}, {1, 4}};
  for (auto [a, b] : joined) {
    std::vector<int> rest;
    for (int v = 0; v < 5; ++v)
      if (v != a && v != b) rest.push_back(v);
    for (std::uint32_t mask = 0; mask < (1U << rest.size()); ++mask) {
      std::vector<int> z;
      for (std::size_t k = 0; k < rest.size(); ++k)
        if (mask >> k & 1U) z.push_back(rest[k]);
      EXPECT_FALSE(d_separated(g, a, b, z)) << a << "," << b;
    }
  }
  // X1 and X3 only meet at colliders.
  EXPECT_TRUE(d_separated(g, 0, 2, {}));
  EXPECT_FALSE(d_separated(g, 0, 2, {1}));
}

TEST(DSeparation, AgreesWithPathOracleAndMoralisation) {
  CounterRng rng(50, Stream::kTestFixtures);
  for (int rep = 0; rep < 60; ++rep) {
    const int p = 3 + static_cast<int>(rng.below(4));
    const Dag g = random_dag(p, rng.uniform(0.2, 0.7), rng);
    const auto a = oracle::adjacency(g);
    for (int i = 0; i < p; ++i) {
      for (int j = i + 1; j < p; ++j) {
        for (std::uint32_t mask = 0; mask < (1U << p); ++mask) {
          if (mask >> i & 1U || mask >> j & 1U) continue;
          std::vector<int> z;
          for (int v = 0; v < p; ++v)
            if (mask >> v & 1U) z.push_back(v);
          const bool expect = oracle::dsep_paths(a, i, j, z);
          ASSERT_EQ(d_separated(g, i, j, z), expect);
          ASSERT_EQ(d_separated_moral(g, i, j, z), expect);
        }
      }
    }
  }
}

TEST(Cpdag, Examples) {
  const Pdag chain = dag_to_cpdag(Dag(3, {{0, 1}, {1, 2}}));
  EXPECT_TRUE(chain.has_undirected(0, 1));
  EXPECT_TRUE(chain.has_undirected(1, 2));
  EXPECT_EQ(chain.num_edges(), 2);
  const Dag collider(3, {{0, 2}, {1, 2}});
  EXPECT_EQ(dag_to_cpdag(collider), collider.graph());
  const Pdag g5 = dag_to_cpdag(Dag(5, {{0, 1}, {2, 1}, {3, 4}}));
  EXPECT_TRUE(g5.has_directed(0, 1));
  EXPECT_TRUE(g5.has_directed(2, 1));
  EXPECT_TRUE(g5.has_undirected(3, 4));
}

TEST(Cpdag, MatchesEquivalenceClassOracle) {
  for (int n = 2; n <= 4; ++n) {
    const auto dags = oracle::all_dags(n);
    std::map<oracle::DsepSet, std::vector<oracle::Adj>> classes;
    for (const auto& a : dags) classes[oracle::dsep_relation(a)].push_back(a);
    for (const auto& [rel, members] : classes) {
      const Pdag expected = cpdag_from_members(members);
      // Equivalent DAGs share skeleton and colliders.
      for (const auto& m : members) EXPECT_EQ(oracle::pattern(m), oracle::pattern(members.front()));
      for (const auto& m : members) {
        const Pdag got = dag_to_cpdag(oracle::to_dag(m));
        ASSERT_EQ(edge_set(got), edge_set(expected)) << to_edge_list(oracle::to_dag(m).graph());
      }
      const auto cls = enumerate_class(expected);
      EXPECT_EQ(cls.size(), members.size());
      for (const auto& d : cls) EXPECT_EQ(oracle::dsep_relation(oracle::adjacency(d)), rel);
    }
  }
}

TEST(Meek, RuleExamples) {
  // R1: 1 -> 2 --- 3, 1 and 3 not adjacent.
  Pdag r1(3);
  r1.add_directed(0, 1);
  r1.add_undirected(1, 2);
  EXPECT_TRUE(meek_closure(r1).has_directed(1, 2));
  // R2: a -> b -> c with a --- c orients a -> c.
  Pdag r2(3);
  r2.add_directed(0, 1);
  r2.add_directed(1, 2);
  r2.add_undirected(0, 2);
  EXPECT_TRUE(meek_closure(r2).has_directed(0, 2));
  // R3: a --- b, a --- c, a --- d, c -> b <- d, c and d not adjacent.
  Pdag r3(4);
  r3.add_undirected(0, 1);
  r3.add_undirected(0, 2);
  r3.add_undirected(0, 3);
  r3.add_directed(2, 1);
  r3.add_directed(3, 1);
  EXPECT_TRUE(meek_closure(r3).has_directed(0, 1));
  // R4: a --- b with d -> c -> b, a --- d, a --- c, d and b not adjacent.
  Pdag r4(4);
  r4.add_undirected(0, 1);
  r4.add_directed(3, 2);
  r4.add_directed(2, 1);
  r4.add_undirected(0, 2);
  r4.add_undirected(0, 3);
  EXPECT_TRUE(meek_closure(r4).has_directed(0, 1));
}

TEST(Meek, CycleIsInconsistent) {
  Pdag g(3);
  g.add_directed(0, 1);
  g.add_directed(1, 2);
  g.add_directed(2, 0);
  EXPECT_THROW(meek_closure(g), InconsistentPdag);
}

TEST(Meek, CpdagIsFixedPoint) {
  CounterRng rng(51, Stream::kTestFixtures);
  for (int rep = 0; rep < 1000; ++rep) {
    const int p = 2 + static_cast<int>(rng.below(9));
    const Pdag c = dag_to_cpdag(random_dag(p, rng.uniform(0.1, 0.6), rng));
    const Pdag m = meek_closure(c);
    ASSERT_EQ(m, c);
    ASSERT_EQ(meek_closure(m), m);
  }
}

TEST(EnumerateClass, Examples) {
  Pdag one(2);
  one.add_undirected(0, 1);
  EXPECT_EQ(enumerate_class(one).size(), 2U);
  const Dag collider(3, {{0, 2}, {1, 2}});
  EXPECT_EQ(enumerate_class(collider.graph()).size(), 1U);
  Pdag chain(3);
  chain.add_undirected(0, 1);
  chain.add_undirected(1, 2);
  const auto members = enumerate_class(chain);
  EXPECT_EQ(members.size(), 3U);
  for (const auto& d : members) EXPECT_TRUE(v_structures(d.graph()).empty());
}

TEST(EnumerateClass, GuardRaisesTooLarge) {
  Pdag complete(6);
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) complete.add_undirected(i, j);
  EXPECT_THROW(enumerate_class(complete), TooLarge);
  EXPECT_EQ(enumerate_class(complete, 15).size(), 720U);
}

TEST(EquivalenceClass, RandomDagProperties) {
  CounterRng rng(52, Stream::kTestFixtures);
  for (int rep = 0; rep < 40; ++rep) {
    const int p = 3 + static_cast<int>(rng.below(4));
    const Dag g = random_dag(p, rng.uniform(0.2, 0.6), rng);
    const Pdag c = dag_to_cpdag(g);
    EXPECT_EQ(skeleton(c), skeleton(g.graph()));
    const auto rel = oracle::dsep_relation(oracle::adjacency(g));
    bool contains_g = false;
    for (const Dag& m : enumerate_class(c)) {
      EXPECT_EQ(oracle::dsep_relation(oracle::adjacency(m)), rel);
      EXPECT_EQ(dag_to_cpdag(m), c);
      contains_g = contains_g || m == g;
    }
    EXPECT_TRUE(contains_g);
  }
}

TEST(Extension, KeepsDirectedEdgesAndPattern) {
  CounterRng rng(53, Stream::kTestFixtures);
  for (int rep = 0; rep < 300; ++rep) {
    const int p = 2 + static_cast<int>(rng.below(9));
    const Dag g = random_dag(p, rng.uniform(0.1, 0.6), rng);
    const Pdag c = dag_to_cpdag(g);
    const Dag ext = pdag_to_dag(c);
    for (auto [a, b] : c.directed_edges()) EXPECT_TRUE(ext.graph().has_directed(a, b));
    EXPECT_EQ(skeleton(ext.graph()), skeleton(c));
    EXPECT_EQ(v_structures(ext.graph()), v_structures(g.graph()));
    EXPECT_EQ(complete_pdag(c), c);
  }
}

TEST(Extension, RejectsNonExtendable) {
  // Undirected 4-cycle has no consistent extension without a new collider.
  Pdag g(4);
  g.add_undirected(0, 1);
  g.add_undirected(1, 2);
  g.add_undirected(2, 3);
  g.add_undirected(3, 0);
  EXPECT_THROW(pdag_to_dag(g), InconsistentPdag);
}

TEST(EdgeList, RoundTripAndErrors) {
  Pdag g(4);
  g.add_directed(0, 1);
  g.add_undirected(2, 3);
  g.add_directed(2, 1);
  const std::string text = to_edge_list(g);
  EXPECT_EQ(text, "pdag 4\n0 --> 1\n2 --> 1\n2 --- 3\n");
  EXPECT_EQ(parse_edge_list(text), g);
  EXPECT_THROW(parse_edge_list(""), FormatError);
  EXPECT_THROW(parse_edge_list("graph 3\n"), FormatError);
  EXPECT_THROW(parse_edge_list("pdag 3\n0 -> 1\n"), FormatError);
  EXPECT_THROW(parse_edge_list("pdag 3\n0 --> 5\n"), FormatError);
  EXPECT_THROW(parse_edge_list("pdag 3\n0 --> 1\n1 --- 0\n"), FormatError);
}

TEST(GraphDegree, ExcludesSelf) {
  Pdag g(3);
  g.add_directed(0, 1);
  g.add_undirected(1, 2);
  EXPECT_EQ(g.degree(1), 2);
  EXPECT_EQ(g.degree(0), 1);
}
