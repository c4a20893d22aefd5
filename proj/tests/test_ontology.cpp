// Copyright 2026 The mdhc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>
#include <set>
#include <string>

#include "mdhc/ontology.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace {

using namespace mdhc;

TEST(ParseOntology, MinimalFile) {
    const auto o = parse_ontology(
        "# tiny\n"
        "node 0 concept Entity\n"
        "node 1 category Dog\n"
        "edge 0 1\n");
    EXPECT_EQ(o.root_id(), 0);
    EXPECT_EQ(o.size(), 2u);
    EXPECT_EQ(o.category_count(), 1u);
    EXPECT_EQ(o.node(1).name, "Dog");
}

TEST(ParseOntology, NamesMayContainSpaces) {
    const auto o = parse_ontology("node 7 concept living thing\nnode 9 category golden retriever\nedge 7 9\n");
    EXPECT_EQ(o.node(7).name, "living thing");
    EXPECT_EQ(o.node(9).name, "golden retriever");
}

TEST(ParseOntology, RejectsCycle) {
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 concept B\nnode 2 category C\n"
                                "edge 0 1\nedge 1 0\nedge 1 2\n"),
                 CycleError);
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 concept B\nnode 2 concept C\n"
                                "node 3 category D\n"
                                "edge 0 1\nedge 1 2\nedge 2 1\nedge 2 3\n"),
                 CycleError);
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 category B\nedge 0 0\nedge 0 1\n"),
                 CycleError);
}

TEST(ParseOntology, RejectsDanglingEdge) {
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 category B\nedge 0 1\nedge 0 5\n"),
                 DanglingEdgeError);
}

TEST(ParseOntology, RejectsNonLeafCategory) {
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 category B\nnode 2 category C\n"
                                "edge 0 1\nedge 1 2\n"),
                 NonLeafCategoryError);
}

TEST(ParseOntology, RejectsMalformedLines) {
    EXPECT_THROW(parse_ontology("node x concept A\n"), ParseError);
    EXPECT_THROW(parse_ontology("node 0 widget A\n"), ParseError);
    EXPECT_THROW(parse_ontology("node 0 concept\n"), ParseError);
    EXPECT_THROW(parse_ontology("vertex 0 concept A\n"), ParseError);
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 category B\nedge 0 1 2\n"), ParseError);
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 0 category B\n"), ParseError);
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 category B\nedge 0 1\nedge 0 1\n"),
                 ParseError);
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 category B\nedge 0 1\nnode 2 category C\n"),
                 ParseError);
    EXPECT_THROW(parse_ontology(""), ParseError);
}

TEST(ParseOntology, RootMustBeUniqueConcept) {
    EXPECT_THROW(parse_ontology("node 0 concept A\nnode 1 concept B\nnode 2 category C\n"
                                "edge 0 2\nedge 1 2\n"),
                 ParseError);
    EXPECT_THROW(parse_ontology("node 0 category A\n"), ParseError);
}

TEST(ParseOntology, RandomDagRoundTripsThroughText) {
    std::mt19937_64 rng(20);
    for (int round = 0; round < 20; ++round) {
        const auto o = oracle::random_dag(rng, 6, 14);
        const auto text = format_ontology(o);
        const auto back = parse_ontology(text);
        EXPECT_EQ(back.size(), 20u);
        EXPECT_EQ(back.edges(), o.edges());
        EXPECT_EQ(back.root_id(), o.root_id());
        EXPECT_EQ(format_ontology(back), text);
    }
}

TEST(DescendantCounts, SingleConcept) {
    const auto o = parse_ontology("node 0 concept R\nnode 1 category a\nnode 2 category b\n"
                                  "node 3 category c\nedge 0 1\nedge 0 2\nedge 0 3\n");
    const auto eta = descendant_counts(o);
    EXPECT_EQ(eta.at(0), 3u);
    EXPECT_EQ(eta.at(1), 0u);
}

TEST(DescendantCounts, SharedCategoryCountedOnce) {
    // 0 -> {1, 2}; 1 -> {3, 4}; 2 -> {4, 5}; 4 shared.
    const auto o = parse_ontology(
        "node 0 concept R\nnode 1 concept A\nnode 2 concept B\n"
        "node 3 category x\nnode 4 category y\nnode 5 category z\n"
        "edge 0 1\nedge 0 2\nedge 1 3\nedge 1 4\nedge 2 4\nedge 2 5\n");
    const auto eta = descendant_counts(o);
    EXPECT_EQ(eta.at(1), 2u);
    EXPECT_EQ(eta.at(2), 2u);
    EXPECT_EQ(eta.at(0), 3u);
    const auto all = descendant_counts(o, DescendantCount::AllNodes);
    EXPECT_EQ(all.at(0), 5u);
}

TEST(DescendantCounts, MatchesReachabilityOracle) {
    std::mt19937_64 rng(3);
    for (int round = 0; round < 30; ++round) {
        const auto o = oracle::random_dag(rng, 5 + round, 10 + 2 * round, 0.3);
        const auto g = oracle::graph_of(o);
        const auto eta = descendant_counts(o);
        const auto all = descendant_counts(o, DescendantCount::AllNodes);
        for (const auto& n : o.nodes()) {
            std::set<NodeId> r;
            oracle::reach(g, n.id, r);
            EXPECT_EQ(eta.at(n.id), oracle::leaf_count(g, n.id));
            EXPECT_EQ(all.at(n.id), r.size());
        }
        EXPECT_EQ(eta.at(o.root_id()), o.category_count());
    }
}

TEST(Condense, FigureTwoStyleOntology) {
    const auto o = fixtures::street_ontology();
    const auto h = condense(o, 0.9, 20);
    EXPECT_EQ(oracle::check_condensed(o, h, 0.9, 20), "");

    // The chain above Living Thing and Artifact disappears into Entity.
    for (NodeId gone : {1, 2, 3}) EXPECT_FALSE(h.contains(gone)) << gone;
    EXPECT_EQ(h.parent(fixtures::kLivingThing), fixtures::kEntity);
    EXPECT_EQ(h.parent(fixtures::kArtifact), fixtures::kEntity);

    // The singleton chains above the three odd categories are gone as well.
    for (NodeId cat : {fixtures::kTrafficLight, fixtures::kStreetSign, fixtures::kBubble}) {
        EXPECT_EQ(h.parent(cat), fixtures::kEntity) << cat;
        EXPECT_TRUE(ancestor_chain(h, cat).empty());
    }
    EXPECT_EQ(h.concepts().size(), 6u);
    EXPECT_EQ(h.height(), 2);
    EXPECT_EQ(h.descendant_count(fixtures::kEntity), 100u);
    EXPECT_EQ(h.categories().size(), 100u);

    std::set<NodeId> absorbed;
    std::set<NodeId> removed;
    for (const auto& r : h.log().removed) {
        if (r.action == RemovalAction::Absorbed) {
            absorbed.insert(r.id);
            EXPECT_EQ(r.into, r.id == 12 ? 11 : fixtures::kEntity);
        } else {
            removed.insert(r.id);
        }
    }
    // Signal is the sole child of Sign, so it is absorbed before pruning.
    EXPECT_EQ(absorbed, (std::set<NodeId>{1, 2, 3, 12}));
    EXPECT_EQ(removed, (std::set<NodeId>{10, 11, 13}));
}

TEST(Condense, BalancedTreeIsFixedPoint) {
    const auto tree = balanced_tree(2, 3, 3);
    const auto o = tree.to_ontology();
    const auto h = condense(o, 1.0, 1);
    EXPECT_EQ(format_hierarchy(h), format_hierarchy(tree));
    EXPECT_TRUE(h.log().removed.empty());
}

TEST(Condense, RandomDagsSatisfyInvariants) {
    std::mt19937_64 rng(200);
    for (int round = 0; round < 40; ++round) {
        const auto o = oracle::random_dag(rng, 60, 140);
        const auto h = condense(o, 0.9, 5);
        EXPECT_EQ(oracle::check_condensed(o, h, 0.9, 5), "") << "round " << round;
    }
}

TEST(Condense, IsIdempotent) {
    std::mt19937_64 rng(77);
    for (int round = 0; round < 25; ++round) {
        const auto o = oracle::random_dag(rng, 40, 80);
        std::uniform_real_distribution<double> tau_d(0.5, 1.0);
        const double tau = tau_d(rng);
        const std::size_t delta = 1 + rng() % 10;
        const auto once = condense(o, tau, delta);
        const auto twice = condense(once.to_ontology(), tau, delta);
        EXPECT_EQ(format_hierarchy(twice), format_hierarchy(once));
        EXPECT_TRUE(twice.log().removed.empty());
    }
}

TEST(Condense, AllNodesModeStillYieldsValidTree) {
    std::mt19937_64 rng(8);
    for (int round = 0; round < 10; ++round) {
        const auto o = oracle::random_dag(rng, 30, 60);
        const auto h = condense(o, 0.8, 4, DescendantCount::AllNodes);
        EXPECT_EQ(h.categories().size(), 60u);
        // Structural invariants only: the τ/δ checks use leaf counts.
        EXPECT_EQ(oracle::check_condensed(o, h, 2.0, 1), "");
    }
}

TEST(Condense, FlatResultIsValid) {
    const auto o = parse_ontology(
        "node 0 concept R\nnode 1 concept A\nnode 2 concept B\n"
        "node 3 category a\nnode 4 category b\nnode 5 category c\n"
        "edge 0 1\nedge 0 2\nedge 1 3\nedge 1 4\nedge 2 5\n");
    const auto h = condense(o, 0.9, 3);
    EXPECT_TRUE(h.concepts().empty());
    EXPECT_EQ(h.height(), 0);
    EXPECT_EQ(h.children(0).size(), 3u);
}

TEST(Condense, RejectsBadArguments) {
    const auto o = parse_ontology("node 0 concept R\nnode 1 category a\nedge 0 1\n");
    EXPECT_THROW(condense(o, 0.0, 1), std::invalid_argument);
    EXPECT_THROW(condense(o, 1.5, 1), std::invalid_argument);
    EXPECT_THROW(condense(o, 0.9, 0), std::invalid_argument);
    EXPECT_THROW(condense(o, 0.9, 2), DegenerateHierarchyError);
    const auto empty = parse_ontology("node 0 concept R\nnode 1 concept A\nedge 0 1\n");
    EXPECT_THROW(condense(empty, 0.9, 1), DegenerateHierarchyError);
}

TEST(Condense, SharedNodeStaysWithFirstVisitedParent) {
    // 4 is reachable from 1 and from 2; the traversal meets it under 1.
    const auto o = parse_ontology(
        "node 0 concept R\nnode 1 concept A\nnode 2 concept B\n"
        "node 3 category a\nnode 4 category b\nnode 5 category c\nnode 6 category d\n"
        "edge 0 1\nedge 0 2\nedge 1 3\nedge 1 4\nedge 2 4\nedge 2 5\nedge 2 6\n");
    const auto h = condense(o, 1.0, 1);
    EXPECT_EQ(h.parent(4), 1);
    ASSERT_EQ(h.log().dropped_edges.size(), 1u);
    EXPECT_EQ(h.log().dropped_edges[0], (Edge{2, 4}));
}

TEST(Condense, RemovalLogJson) {
    const auto h = condense(fixtures::street_ontology(), 0.9, 20);
    const auto j = removal_log_json(h);
    EXPECT_DOUBLE_EQ(j.at("tau").get<double>(), 0.9);
    EXPECT_EQ(j.at("delta").get<int>(), 20);
    EXPECT_EQ(j.at("count_mode"), "category_leaves");
    EXPECT_EQ(j.at("removed").size(), h.log().removed.size());
    EXPECT_EQ(j.at("removed")[0].at("action"), "absorbed");
}

TEST(AncestorChain, CategoryUnderRootIsEmpty) {
    const auto h = CondensedHierarchy::from_tree(
        parse_ontology("node 0 concept R\nnode 1 category a\nedge 0 1\n"));
    EXPECT_TRUE(ancestor_chain(h, 1).empty());
    EXPECT_TRUE(ancestor_chain(h, 0).empty());
}

TEST(AncestorChain, Chimpanzee) {
    const auto h = fixtures::primate_hierarchy();
    EXPECT_EQ(ancestor_chain(h, fixtures::kChimpanzee),
              (ChainSet{fixtures::kLivingThingP, fixtures::kChordate, fixtures::kMammal,
                        fixtures::kPrimate}));
    EXPECT_EQ(ancestor_chain(h, fixtures::kMammal),
              (ChainSet{fixtures::kLivingThingP, fixtures::kChordate, fixtures::kMammal}));
}

TEST(AncestorChain, UnknownNode) {
    const auto h = fixtures::primate_hierarchy();
    EXPECT_THROW(ancestor_chain(h, 12345), UnknownNodeError);
    EXPECT_THROW(lca(h, 12345, fixtures::kChimpanzee), UnknownNodeError);
}

TEST(AncestorChain, MatchesParentWalk) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto h = random_tree(8, 20, 3, seed);
        for (const auto& n : h.nodes()) {
            EXPECT_EQ(ancestor_chain(h, n.id), oracle::chain_of(h, n.id));
        }
        // Chain plus the category is a root-to-leaf path.
        for (auto c : h.categories()) {
            auto chain = ancestor_chain(h, c);
            chain.push_back(c);
            NodeId above = h.root();
            for (auto x : chain) {
                EXPECT_EQ(h.parent(x), above);
                above = x;
            }
        }
    }
}

TEST(Lca, SameNodeAndSiblings) {
    const auto h = CondensedHierarchy::from_tree(parse_ontology(
        "node 0 concept R\nnode 1 concept P\nnode 2 category a\nnode 3 category b\n"
        "node 4 category c\nedge 0 1\nedge 0 4\nedge 1 2\nedge 1 3\n"));
    EXPECT_EQ(lca(h, 2, 2).node, 2);
    EXPECT_EQ(lca(h, 2, 2).height, 0);
    EXPECT_EQ(lca(h, 2, 3).node, 1);
    EXPECT_EQ(lca(h, 2, 3).height, 1);
    EXPECT_EQ(lca(h, 2, 4).node, 0);
    EXPECT_EQ(lca(h, 2, 4).height, 2);
}

TEST(Lca, MatchesAncestorSetOracle) {
    std::mt19937_64 rng(5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto h = random_tree(10, 25, 4, seed);
        const auto& nodes = h.nodes();
        for (int k = 0; k < 50; ++k) {
            const auto a = nodes[rng() % nodes.size()].id;
            const auto b = nodes[rng() % nodes.size()].id;
            const auto got = lca(h, a, b);
            const auto want = oracle::lca(h, a, b);
            EXPECT_EQ(got.node, want.first);
            EXPECT_EQ(got.height, want.second);
            EXPECT_EQ(lca(h, b, a).node, got.node);
        }
    }
}

TEST(CondensedHierarchy, FromTreeRejectsSharedNodes) {
    const auto o = parse_ontology(
        "node 0 concept R\nnode 1 concept A\nnode 2 category a\n"
        "edge 0 1\nedge 0 2\nedge 1 2\n");
    EXPECT_THROW(CondensedHierarchy::from_tree(o), ParseError);
}

TEST(CondensedHierarchy, FormatRoundTrip) {
    const auto h = condense(fixtures::street_ontology(), 0.9, 20);
    const auto text = format_hierarchy(h);
    const auto back = CondensedHierarchy::from_tree(parse_ontology(text));
    EXPECT_EQ(format_hierarchy(back), text);
    EXPECT_EQ(back.concepts(), h.concepts());
}

}  // namespace
