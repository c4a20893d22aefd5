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

#ifndef MDHC_TESTS_FIXTURES_HPP_
#define MDHC_TESTS_FIXTURES_HPP_

#include <string>
#include <vector>

#include "mdhc/ontology.hpp"

namespace fixtures {

using mdhc::NodeId;

inline constexpr NodeId kEntity = 0;
inline constexpr NodeId kLivingThing = 4;
inline constexpr NodeId kArtifact = 5;
inline constexpr NodeId kTrafficLight = 100;
inline constexpr NodeId kStreetSign = 101;
inline constexpr NodeId kBubble = 102;

/// A street-scene ontology: a redundant chain Entity > Physical Entity >
/// Object > Whole above Living Thing (55 categories) and Artifact (42), and
/// three categories that each hang below a private single-child chain.
inline mdhc::Ontology street_ontology() {
    using mdhc::NodeKind;
    std::vector<mdhc::Node> nodes{
        {0, NodeKind::Concept, "entity"},        {1, NodeKind::Concept, "physical entity"},
        {2, NodeKind::Concept, "object"},        {3, NodeKind::Concept, "whole"},
        {4, NodeKind::Concept, "living thing"},  {5, NodeKind::Concept, "artifact"},
        {6, NodeKind::Concept, "instrumentality"}, {7, NodeKind::Concept, "structure"},
        {8, NodeKind::Concept, "animal"},        {9, NodeKind::Concept, "plant"},
        {10, NodeKind::Concept, "device"},       {11, NodeKind::Concept, "sign"},
        {12, NodeKind::Concept, "signal"},       {13, NodeKind::Concept, "sphere"},
        {100, NodeKind::Category, "traffic light"},
        {101, NodeKind::Category, "street sign"},
        {102, NodeKind::Category, "bubble"},
    };
    std::vector<mdhc::Edge> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4},  {3, 5},   {5, 6},  {5, 7},
                                  {4, 8}, {4, 9}, {1, 10}, {2, 11}, {11, 12}, {3, 13},
                                  {10, 100}, {12, 101}, {13, 102}};
    auto add = [&](NodeId parent, NodeId first, int count) {
        for (int k = 0; k < count; ++k) {
            nodes.push_back({first + k, NodeKind::Category, "species " + std::to_string(first + k)});
            edges.push_back({parent, first + k});
        }
    };
    add(8, 200, 30);
    add(9, 230, 25);
    add(6, 300, 22);
    add(7, 322, 20);
    return mdhc::Ontology::create(std::move(nodes), std::move(edges));
}

inline constexpr NodeId kLivingThingP = 1;
inline constexpr NodeId kChordate = 2;
inline constexpr NodeId kMammal = 3;
inline constexpr NodeId kPrimate = 4;
inline constexpr NodeId kChimpanzee = 5;

inline mdhc::CondensedHierarchy primate_hierarchy() {
    return mdhc::CondensedHierarchy::from_tree(mdhc::parse_ontology(
        "node 0 concept entity\n"
        "node 1 concept living thing\n"
        "node 2 concept chordate\n"
        "node 3 concept mammal\n"
        "node 4 concept primate\n"
        "node 5 category chimpanzee\n"
        "node 6 category gorilla\n"
        "node 7 category dog\n"
        "node 8 category salmon\n"
        "node 9 category oak\n"
        "node 10 category car\n"
        "edge 0 1\nedge 0 10\nedge 1 2\nedge 1 9\nedge 2 3\nedge 2 8\n"
        "edge 3 4\nedge 3 7\nedge 4 5\nedge 4 6\n"));
}

/// Seven concepts over two concept levels and 24 categories:
/// root > {A, B}; A > {A1, A2, A3}; B > {B1, B2}; 5, 5, 5, 5 and 4
/// categories under A1, A2, A3, B1, B2.
inline mdhc::CondensedHierarchy synthetic_hierarchy() {
    using mdhc::NodeKind;
    std::vector<mdhc::Node> nodes{{0, NodeKind::Concept, "root"}, {1, NodeKind::Concept, "A"},
                                  {2, NodeKind::Concept, "B"},    {3, NodeKind::Concept, "A1"},
                                  {4, NodeKind::Concept, "A2"},   {5, NodeKind::Concept, "A3"},
                                  {6, NodeKind::Concept, "B1"},   {7, NodeKind::Concept, "B2"}};
    std::vector<mdhc::Edge> edges{{0, 1}, {0, 2}, {1, 3}, {1, 4}, {1, 5}, {2, 6}, {2, 7}};
    NodeId next = 8;
    const std::pair<NodeId, int> leaves[] = {{3, 5}, {4, 5}, {5, 5}, {6, 5}, {7, 4}};
    for (auto [parent, count] : leaves) {
        for (int k = 0; k < count; ++k) {
            nodes.push_back({next, NodeKind::Category, "cat" + std::to_string(next)});
            edges.push_back({parent, next++});
        }
    }
    return mdhc::CondensedHierarchy::from_tree(mdhc::Ontology::create(std::move(nodes), std::move(edges)));
}

}  // namespace fixtures

#endif  // MDHC_TESTS_FIXTURES_HPP_
