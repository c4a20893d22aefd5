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

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mdhc/dataio.hpp"
#include "mdhc/head.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace {

using namespace mdhc;

std::vector<double> random_features(std::size_t d0, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(d0);
    for (auto& v : x) v = n(rng);
    return x;
}

/// Random parameters including nonzero biases.
HeadParameters<double> random_parameters(const HeadTopology& t, std::uint64_t seed) {
    auto p = init_parameters<double>(t, seed);
    std::mt19937_64 rng(seed ^ 0x5eedu);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& v : p.values()) v += 0.1 * u(rng);
    return p;
}

CondensedHierarchy toy_hierarchy() {
    return CondensedHierarchy::from_tree(
        parse_ontology("node 0 concept root\nnode 1 concept c\nnode 2 category k\n"
                       "edge 0 1\nedge 1 2\n"));
}

TEST(BuildTopology, FlatHierarchy) {
    const auto h = CondensedHierarchy::from_tree(parse_ontology(
        "node 0 concept R\nnode 1 category a\nnode 2 category b\nnode 3 category c\n"
        "node 4 category d\nedge 0 1\nedge 0 2\nedge 0 3\nedge 0 4\n"));
    const auto t = build_topology(h, 10);
    EXPECT_EQ(t.concept_count(), 0u);
    EXPECT_EQ(t.category_count(), 4u);
    EXPECT_EQ(t.unit(0).child_categories.size(), 4u);
    EXPECT_EQ(t.unit(0).hidden_size, 10u);
    EXPECT_EQ(t.height(), 0);
}

TEST(BuildTopology, SizesAndAssignments) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto h = random_tree(7, 18, 3, seed);
        const auto t = build_topology(h, 16, 3);
        ASSERT_EQ(t.concept_count(), h.concepts().size());
        EXPECT_EQ(t.unit(0).node_id, h.root());
        EXPECT_EQ(t.unit(0).hidden_size, 16u);
        std::vector<int> owner(t.category_count(), 0);
        for (std::size_t u = 0; u < t.units().size(); ++u) {
            const auto& unit = t.unit(u);
            if (u > 0) {
                EXPECT_EQ(unit.hidden_size, 3 * h.descendant_count(unit.node_id));
                EXPECT_EQ(t.unit(static_cast<std::size_t>(unit.parent)).node_id, *h.parent(unit.node_id));
            }
            EXPECT_LE(unit.depth, t.height());
            for (auto j : unit.child_categories) {
                ++owner[j];
                EXPECT_EQ(h.parent(t.category_ids()[j]), unit.node_id);
            }
            for (auto c : unit.child_units) EXPECT_EQ(h.parent(t.unit(c).node_id), unit.node_id);
        }
        for (auto n : owner) EXPECT_EQ(n, 1);
        EXPECT_EQ(t.height(), h.height());
    }
}

TEST(BuildTopology, IndexLookups) {
    const auto h = fixtures::synthetic_hierarchy();
    const auto t = build_topology(h, 40);
    EXPECT_EQ(t.concept_index(1), 0u);
    EXPECT_EQ(t.concept_id(0), 1);
    EXPECT_EQ(t.unit_index(0), 0u);
    EXPECT_EQ(t.category_index(8), 0u);
    EXPECT_THROW(t.concept_index(0), UnknownNodeError);
    EXPECT_THROW(t.category_index(1), UnknownNodeError);
    EXPECT_NE(t.hash(), build_topology(h, 41).hash());
    EXPECT_EQ(t.hash(), build_topology(h, 40).hash());
}

TEST(InitParameters, DeterministicAndBiasFree) {
    const auto t = build_topology(fixtures::synthetic_hierarchy(), 32);
    const auto a = init_parameters<double>(t, 9);
    const auto b = init_parameters<double>(t, 9);
    const auto c = init_parameters<double>(t, 10);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    for (std::size_t k = 0; k < a.layout().blocks().size(); ++k) {
        const auto kind = a.layout().blocks()[k].kind;
        if (kind == BlockKind::GateBias || kind == BlockKind::CategoryBias ||
            kind == BlockKind::ConceptBias) {
            for (double v : a.block(k)) EXPECT_EQ(v, 0.0);
        }
    }
    const std::vector<double> zero(32, 0.0);
    const auto tr = forward(a, t, std::span<const double>(zero));
    for (std::size_t u = 1; u < tr.gate.size(); ++u) EXPECT_EQ(tr.gate[u], 0.5);
}

TEST(InitParameters, GlorotSpread) {
    // One concept of 40 leaves below a 2048-wide input: its hidden block is 80 x 2048.
    std::string text = "node 0 concept root\nnode 1 concept c\nnode 2 category other\n";
    for (int k = 0; k < 40; ++k) text += "node " + std::to_string(10 + k) + " category k\n";
    text += "edge 0 1\nedge 0 2\n";
    for (int k = 0; k < 40; ++k) text += "edge 1 " + std::to_string(10 + k) + "\n";
    const auto t = build_topology(CondensedHierarchy::from_tree(parse_ontology(text)), 2048);
    const auto p = init_parameters<double>(t, 1);
    const auto& ub = p.layout().unit(0);
    ASSERT_EQ(ub.concept_weight.size(), 1u);
    const auto w = p.block(ub.concept_weight[0]);
    ASSERT_EQ(w.size(), 80u * 2048u);
    const double s = std::sqrt(6.0 / (2048.0 + 80.0));
    double mean = 0.0;
    for (double v : w) {
        EXPECT_LE(std::abs(v), s);
        mean += v;
    }
    mean /= static_cast<double>(w.size());
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(w.size()));
    EXPECT_NEAR(sd / (s / std::sqrt(3.0)), 1.0, 0.05);
}

TEST(Forward, ZeroNetwork) {
    const auto t = build_topology(fixtures::synthetic_hierarchy(), 32);
    HeadParameters<double> p(std::make_shared<const ParameterLayout>(t));
    const auto x = random_features(32, 1);
    const auto tr = forward(p, t, std::span<const double>(x));
    for (std::size_t u = 1; u < tr.gate.size(); ++u) EXPECT_EQ(tr.gate[u], 0.5);
    for (std::size_t j = 0; j < t.category_count(); ++j) {
        EXPECT_EQ(tr.raw_logits[j], 0.0);
        EXPECT_EQ(tr.logits[j], 0.0);
        EXPECT_DOUBLE_EQ(tr.probs[j], 1.0 / 24.0);
    }
}

TEST(Forward, HandComputedToy) {
    const auto t = build_topology(toy_hierarchy(), 1, 1);
    HeadParameters<double> p(std::make_shared<const ParameterLayout>(t));
    const auto& root = p.layout().unit(0);
    const auto& c = p.layout().unit(1);
    p.block(root.concept_weight[0])[0] = 1.0;
    p.block(c.gate_weight)[0] = 1.0;
    p.block(c.category_weight)[0] = 1.0;
    const std::vector<double> x{2.0};
    const auto tr = forward(p, t, std::span<const double>(x));
    // h = ReLU(1 * 2) = 2, z = sigmoid(2), x = 2 * z.
    const double z = 1.0 / (1.0 + std::exp(-2.0));
    EXPECT_NEAR(tr.gate[1], 0.8807970779778823, 1e-15);
    EXPECT_NEAR(tr.gate[1], z, 1e-15);
    EXPECT_EQ(tr.hidden[1][0], 2.0);
    EXPECT_EQ(tr.raw_logits[0], 2.0);
    EXPECT_NEAR(tr.logits[0], 1.7615941559557646, 1e-15);
    EXPECT_EQ(tr.probs[0], 1.0);
}

TEST(Forward, GateInvariants) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto h = random_tree(6, 12, 3, seed);
        const auto t = build_topology(h, 16);
        const auto p = random_parameters(t, seed);
        const auto x = random_features(16, seed + 100);
        const auto tr = forward(p, t, std::span<const double>(x));
        double sum = 0.0;
        for (double v : tr.probs) sum += v;
        EXPECT_NEAR(sum, 1.0, 1e-9);
        for (std::size_t u = 0; u < t.units().size(); ++u) {
            const auto& unit = t.unit(u);
            if (u > 0) {
                EXPECT_GT(tr.gate[u], 0.0);
                EXPECT_LT(tr.gate[u], 1.0);
            }
            for (auto j : unit.child_categories) {
                EXPECT_EQ(tr.logits[j], tr.raw_logits[j] * tr.gate[u]);
            }
            for (auto c : unit.child_units) {
                for (std::size_t i = 0; i < tr.hidden[c].size(); ++i) {
                    EXPECT_EQ(tr.hidden[c][i], tr.pre_gate[c][i] * tr.gate[u]);
                }
            }
        }
        const auto again = forward(p, t, std::span<const double>(x));
        EXPECT_EQ(again.probs, tr.probs);
        EXPECT_EQ(again.hidden, tr.hidden);
    }
}

TEST(Forward, SaturatedGateSilencesChildren) {
    const auto h = fixtures::synthetic_hierarchy();
    const auto t = build_topology(h, 40);
    auto p = random_parameters(t, 3);
    const auto a = t.unit_index(1);
    p.block(p.layout().unit(a).gate_bias)[0] = -50.0;
    std::fill(p.block(p.layout().unit(a).gate_weight).begin(),
              p.block(p.layout().unit(a).gate_weight).end(), 0.0);
    const auto x = random_features(40, 4);
    const auto tr = forward(p, t, std::span<const double>(x));
    for (auto c : t.unit(a).child_units) {
        for (double v : tr.hidden[c]) EXPECT_LT(std::abs(v), 1e-18);
    }
}

TEST(Forward, ScalingGateScalesChildLogits) {
    const auto h = fixtures::synthetic_hierarchy();
    const auto t = build_topology(h, 40);
    const auto p = random_parameters(t, 5);
    const auto x = random_features(40, 6);
    const auto leaf = t.unit_index(3);  // A1 holds categories directly
    const auto base = forward(p, t, std::span<const double>(x));
    GateOverrides<double> half{{leaf - 1, base.gate[leaf] * 0.25}};
    const auto scaled = forward(p, t, std::span<const double>(x), &half);
    for (auto j : t.unit(leaf).child_categories) {
        EXPECT_NEAR(scaled.logits[j], 0.25 * base.logits[j], 1e-15 * std::abs(base.logits[j]) + 1e-300);
    }
}

TEST(Forward, RejectsWrongWidth) {
    const auto t = build_topology(fixtures::synthetic_hierarchy(), 40);
    const auto p = init_parameters<double>(t, 1);
    const std::vector<double> x(39, 0.0);
    EXPECT_THROW(forward(p, t, std::span<const double>(x)), ShapeMismatchError);
}

TEST(Forward, SinglePrecisionTracksDouble) {
    const auto t = build_topology(fixtures::synthetic_hierarchy(), 40);
    const auto p = random_parameters(t, 7);
    const auto pf = p.cast<float>();
    const auto x = random_features(40, 8);
    std::vector<float> xf(x.begin(), x.end());
    const auto a = forward(p, t, std::span<const double>(x));
    const auto b = forward(pf, t, std::span<const float>(xf));
    for (std::size_t j = 0; j < a.probs.size(); ++j) EXPECT_NEAR(a.probs[j], b.probs[j], 1e-5);
}

TEST(CountParameters, FlatTopology) {
    const auto h = CondensedHierarchy::from_tree(parse_ontology(
        "node 0 concept R\nnode 1 category a\nnode 2 category b\nnode 3 category c\n"
        "edge 0 1\nedge 0 2\nedge 0 3\n"));
    const auto r = count_parameters(build_topology(h, 50));
    EXPECT_EQ(r.total, 50u * 3u + 3u);
    EXPECT_EQ(r.total, r.flat_total);
    EXPECT_FALSE(r.balanced_arity.has_value());
}

TEST(CountParameters, MatchesEnumeration) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto h = random_tree(3 + seed % 8, 10 + seed, 1 + seed % 3, seed);
        const std::size_t d0 = 8 + seed;
        const std::size_t mu = 1 + seed % 3;
        const auto r = count_parameters(build_topology(h, d0, mu));
        EXPECT_EQ(r.total, oracle::enumerate_weights(h, d0, mu));
        std::size_t sum = 0;
        for (const auto& b : r.per_block) sum += b.count;
        EXPECT_EQ(sum, r.total);
    }
}

TEST(CountParameters, BalancedBinaryTreeWithinBound) {
    const auto h = balanced_tree(2, 2, 6);
    const auto r = count_parameters(build_topology(h, 2048));
    ASSERT_EQ(r.balanced_arity, 2u);
    EXPECT_DOUBLE_EQ(*r.bound, 2.0 * 2048.0 * (24.0 + 2.0 + 2.0));
    EXPECT_TRUE(r.within_bound);
    EXPECT_LE(static_cast<double>(r.total), *r.bound);
}

TEST(CountParameters, BoundFailsForNarrowInputs) {
    // The concept-to-concept blocks grow with the product of the two hidden
    // widths, so with a small input width the balanced budget is exceeded.
    const auto h = balanced_tree(2, 2, 6);
    const auto r = count_parameters(build_topology(h, 64));
    ASSERT_TRUE(r.bound.has_value());
    EXPECT_EQ(r.total, 4734u);
    EXPECT_DOUBLE_EQ(*r.bound, 3584.0);
    EXPECT_FALSE(r.within_bound);
}

TEST(CountParameters, BalancedArityDetection) {
    EXPECT_EQ(balanced_arity(build_topology(balanced_tree(3, 2, 4), 64)), 3u);
    EXPECT_EQ(balanced_arity(build_topology(fixtures::synthetic_hierarchy(), 64)), std::nullopt);
}

}  // namespace
