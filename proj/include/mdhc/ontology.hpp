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

#ifndef MDHC_ONTOLOGY_HPP_
#define MDHC_ONTOLOGY_HPP_

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mdhc/error.hpp"

namespace mdhc {

using NodeId = std::int64_t;

/// Ordered list of concept ids from the first level below the root down to a
/// node. The root itself is never part of a chain.
using ChainSet = std::vector<NodeId>;

enum class NodeKind { Concept, Category };

struct Node {
    NodeId id = 0;
    NodeKind kind = NodeKind::Concept;
    std::string name;
};

struct Edge {
    NodeId parent = 0;
    NodeId child = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline std::string_view kind_name(NodeKind kind) {
    return kind == NodeKind::Concept ? "concept" : "category";
}

/// What the descendant count of a concept measures.
enum class DescendantCount {
    CategoryLeaves,  // distinct category leaves reachable from the node
    AllNodes,        // distinct nodes (concepts and categories) below the node
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::string_view next_token(std::string_view& rest) {
    rest = trim(rest);
    const auto end = rest.find_first_of(" \t");
    auto token = rest.substr(0, end);
    rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
    return token;
}

inline NodeId parse_id(std::string_view token, std::size_t line_no) {
    NodeId value = 0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (token.empty() || ec != std::errc{} || ptr != last) {
        throw ParseError("line " + std::to_string(line_no) + ": invalid node id '" +
                         std::string(token) + "'");
    }
    return value;
}

}  // namespace detail

/// A validated label DAG. Nodes are kept sorted by id; children lists are in
/// ascending id order.
class Ontology {
public:
    Ontology() = default;

    /// Validates and builds. Checks run in the order: duplicate ids, dangling
    /// edges, duplicate edges, cycles, root uniqueness, category leaves.
    static Ontology create(std::vector<Node> nodes, std::vector<Edge> edges) {
        Ontology o;
        std::sort(nodes.begin(), nodes.end(),
                  [](const Node& a, const Node& b) { return a.id < b.id; });
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!o.index_.emplace(nodes[i].id, i).second) {
                throw ParseError("duplicate node id " + std::to_string(nodes[i].id));
            }
        }
        if (nodes.empty()) throw ParseError("hierarchy declares no nodes");
        for (const auto& e : edges) {
            if (!o.index_.contains(e.parent) || !o.index_.contains(e.child)) {
                throw DanglingEdgeError("edge " + std::to_string(e.parent) + " -> " +
                                        std::to_string(e.child) +
                                        " references an undeclared node");
            }
        }
        std::sort(edges.begin(), edges.end());
        if (auto dup = std::adjacent_find(edges.begin(), edges.end()); dup != edges.end()) {
            throw ParseError("duplicate edge " + std::to_string(dup->parent) + " -> " +
                             std::to_string(dup->child));
        }
        o.nodes_ = std::move(nodes);
        o.edges_ = std::move(edges);

        const std::size_t n = o.nodes_.size();
        o.children_.assign(n, {});
        o.parents_.assign(n, {});
        for (const auto& e : o.edges_) {
            const auto p = o.index_.at(e.parent);
            const auto c = o.index_.at(e.child);
            if (p == c) throw CycleError("self loop on node " + std::to_string(e.parent));
            o.children_[p].push_back(c);
            o.parents_[c].push_back(p);
        }
        // Edges are sorted by (parent, child) and indices follow id order, so
        // children lists are already ascending.

        // Kahn's algorithm; anything left over sits on a cycle.
        std::vector<std::size_t> indegree(n);
        for (std::size_t i = 0; i < n; ++i) indegree[i] = o.parents_[i].size();
        std::vector<std::size_t> queue;
        for (std::size_t i = 0; i < n; ++i) {
            if (indegree[i] == 0) queue.push_back(i);
        }
        std::size_t roots = queue.size();
        for (std::size_t head = 0; head < queue.size(); ++head) {
            for (auto c : o.children_[queue[head]]) {
                if (--indegree[c] == 0) queue.push_back(c);
            }
        }
        if (queue.size() != n) {
            for (std::size_t i = 0; i < n; ++i) {
                if (indegree[i] != 0) {
                    throw CycleError("cycle through node " + std::to_string(o.nodes_[i].id));
                }
            }
        }
        if (roots != 1) {
            throw ParseError("hierarchy must have exactly one root, found " +
                             std::to_string(roots));
        }
        o.root_ = queue.front();
        if (o.nodes_[o.root_].kind != NodeKind::Concept) {
            throw ParseError("root node " + std::to_string(o.nodes_[o.root_].id) +
                             " must be a concept");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (o.nodes_[i].kind == NodeKind::Category && !o.children_[i].empty()) {
                throw NonLeafCategoryError("category " + std::to_string(o.nodes_[i].id) +
                                           " has children");
            }
        }
        return o;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t size() const { return nodes_.size(); }
    NodeId root_id() const { return nodes_[root_].id; }
    std::size_t root_index() const { return root_; }

    bool contains(NodeId id) const { return index_.contains(id); }
    std::size_t index_of(NodeId id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw UnknownNodeError("unknown node " + std::to_string(id));
        return it->second;
    }
    const Node& node(NodeId id) const { return nodes_[index_of(id)]; }

    std::span<const std::size_t> children(std::size_t index) const { return children_[index]; }
    std::span<const std::size_t> parents(std::size_t index) const { return parents_[index]; }

    std::size_t category_count() const {
        return static_cast<std::size_t>(std::count_if(
            nodes_.begin(), nodes_.end(),
            [](const Node& nd) { return nd.kind == NodeKind::Category; }));
    }

private:
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::vector<std::size_t>> parents_;
    std::size_t root_ = 0;
};

/// Parses the line-oriented hierarchy format:
///
///     # comment
///     node <id> <concept|category> <name ...>
///     edge <parent_id> <child_id>
///
/// All node lines precede the edge lines. The root is the unique node
/// without parents.
inline Ontology parse_ontology(std::string_view text) {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto eol = text.find('\n');
        auto line = text.substr(0, eol);
        text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line.front() == '#') continue;

        auto rest = line;
        const auto keyword = detail::next_token(rest);
        const auto where = "line " + std::to_string(line_no) + ": ";
        if (keyword == "node") {
            if (!edges.empty()) throw ParseError(where + "node declared after edges");
            Node nd;
            nd.id = detail::parse_id(detail::next_token(rest), line_no);
            const auto kind = detail::next_token(rest);
            if (kind == "concept") {
                nd.kind = NodeKind::Concept;
            } else if (kind == "category") {
                nd.kind = NodeKind::Category;
            } else {
                throw ParseError(where + "unknown node kind '" + std::string(kind) + "'");
            }
            nd.name = std::string(detail::trim(rest));
            if (nd.name.empty()) throw ParseError(where + "node without a name");
            nodes.push_back(std::move(nd));
        } else if (keyword == "edge") {
            Edge e;
            e.parent = detail::parse_id(detail::next_token(rest), line_no);
            e.child = detail::parse_id(detail::next_token(rest), line_no);
            if (!detail::trim(rest).empty()) throw ParseError(where + "trailing tokens after edge");
            edges.push_back(e);
        } else {
            throw ParseError(where + "unexpected keyword '" + std::string(keyword) + "'");
        }
    }
    return Ontology::create(std::move(nodes), std::move(edges));
}

inline std::string format_ontology(const Ontology& o) {
    std::ostringstream out;
    for (const auto& nd : o.nodes()) {
        out << "node " << nd.id << ' ' << kind_name(nd.kind) << ' ' << nd.name << '\n';
    }
    for (const auto& e : o.edges()) out << "edge " << e.parent << ' ' << e.child << '\n';
    return out.str();
}

/// Descendant count per node of a DAG, counting every descendant once even
/// when it is reachable along several paths. Categories report 0.
inline std::unordered_map<NodeId, std::size_t> descendant_counts(
    const Ontology& o, DescendantCount mode = DescendantCount::CategoryLeaves) {
    const std::size_t n = o.size();
    const std::size_t words = (n + 63) / 64;
    std::vector<std::vector<std::uint64_t>> reach(n, std::vector<std::uint64_t>(words, 0));

    // Reverse topological order via iterative post-order DFS from the root.
    std::vector<std::size_t> order;
    std::vector<char> seen(n, 0);
    std::vector<std::pair<std::size_t, std::size_t>> stack{{o.root_index(), 0}};
    seen[o.root_index()] = 1;
    while (!stack.empty()) {
        auto& [node, pos] = stack.back();
        auto kids = o.children(node);
        if (pos < kids.size()) {
            const auto c = kids[pos++];
            if (!seen[c]) {
                seen[c] = 1;
                stack.emplace_back(c, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (auto node : order) {
        for (auto c : o.children(node)) {
            const bool counted = mode == DescendantCount::AllNodes ||
                                 o.nodes()[c].kind == NodeKind::Category;
            if (counted) reach[node][c / 64] |= std::uint64_t{1} << (c % 64);
            for (std::size_t w = 0; w < words; ++w) reach[node][w] |= reach[c][w];
        }
    }
    std::unordered_map<NodeId, std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t total = 0;
        for (auto w : reach[i]) total += static_cast<std::size_t>(__builtin_popcountll(w));
        counts.emplace(o.nodes()[i].id, total);
    }
    return counts;
}

enum class RemovalAction { Absorbed, Removed, Collapsed };

inline std::string_view action_name(RemovalAction a) {
    switch (a) {
        case RemovalAction::Absorbed: return "absorbed";
        case RemovalAction::Removed: return "removed";
        case RemovalAction::Collapsed: return "collapsed";
    }
    return "?";
}

/// One concept eliminated by condensation; `into` is the node that received
/// its children at the time of removal.
struct RemovalEntry {
    NodeId id = 0;
    std::string name;
    RemovalAction action = RemovalAction::Removed;
    NodeId into = 0;
};

struct CondenseLog {
    double tau = 1.0;
    std::size_t delta = 1;
    DescendantCount count_mode = DescendantCount::CategoryLeaves;
    std::vector<Edge> dropped_edges;  // DAG edges not used by the spanning tree
    std::vector<RemovalEntry> removed;
};

/// Rooted label tree. Every non-root node has exactly one parent, categories
/// are leaves, and node ids are those of the source file.
class CondensedHierarchy {
public:
    CondensedHierarchy() = default;

    /// Adopts an ontology that already is a tree, without condensing it.
    static CondensedHierarchy from_tree(const Ontology& o) {
        for (std::size_t i = 0; i < o.size(); ++i) {
            if (o.parents(i).size() > 1) {
                throw ParseError("node " + std::to_string(o.nodes()[i].id) +
                                 " has several parents; condense the hierarchy first");
            }
        }
        return assemble(o.nodes(), o.edges(), o.root_id(), {});
    }

    NodeId root() const { return nodes_[root_].id; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }

    bool contains(NodeId id) const { return index_.contains(id); }
    const Node& node(NodeId id) const { return nodes_[index_of(id)]; }
    bool is_category(NodeId id) const { return node(id).kind == NodeKind::Category; }

    std::optional<NodeId> parent(NodeId id) const {
        const auto p = parent_[index_of(id)];
        if (p < 0) return std::nullopt;
        return nodes_[static_cast<std::size_t>(p)].id;
    }
    std::span<const NodeId> children(NodeId id) const { return children_[index_of(id)]; }

    /// η: number of category leaves below the node (0 for a category).
    std::size_t descendant_count(NodeId id) const { return eta_[index_of(id)]; }
    /// Edge distance from the root.
    int depth(NodeId id) const { return depth_[index_of(id)]; }
    /// Longest edge distance from the node down to a category leaf.
    int subtree_height(NodeId id) const { return below_[index_of(id)]; }
    /// ρ: number of concept levels below the root.
    int height() const { return height_; }

    /// Category ids, ascending.
    const std::vector<NodeId>& categories() const { return categories_; }
    /// Non-root concept ids in depth-first pre-order (children by ascending id).
    const std::vector<NodeId>& concepts() const { return concepts_; }

    const CondenseLog& log() const { return log_; }

    /// Tree as a plain ontology, e.g. for re-condensing or writing.
    Ontology to_ontology() const {
        std::vector<Edge> edges;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (parent_[i] >= 0) {
                edges.push_back({nodes_[static_cast<std::size_t>(parent_[i])].id, nodes_[i].id});
            }
        }
        return Ontology::create(nodes_, std::move(edges));
    }

    std::size_t index_of(NodeId id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw UnknownNodeError("unknown node " + std::to_string(id));
        return it->second;
    }

    /// Builds from nodes and tree edges that are known to be valid.
    static CondensedHierarchy assemble(std::vector<Node> nodes, std::vector<Edge> edges,
                                       NodeId root, CondenseLog log) {
        CondensedHierarchy h;
        std::sort(nodes.begin(), nodes.end(),
                  [](const Node& a, const Node& b) { return a.id < b.id; });
        h.nodes_ = std::move(nodes);
        for (std::size_t i = 0; i < h.nodes_.size(); ++i) h.index_.emplace(h.nodes_[i].id, i);
        const std::size_t n = h.nodes_.size();
        h.parent_.assign(n, -1);
        h.children_.assign(n, {});
        std::sort(edges.begin(), edges.end());
        for (const auto& e : edges) {
            h.parent_[h.index_.at(e.child)] = static_cast<std::ptrdiff_t>(h.index_.at(e.parent));
            h.children_[h.index_.at(e.parent)].push_back(e.child);
        }
        h.root_ = h.index_.at(root);
        h.log_ = std::move(log);

        h.eta_.assign(n, 0);
        h.depth_.assign(n, 0);
        h.below_.assign(n, 0);
        std::vector<std::size_t> preorder;
        std::vector<std::size_t> stack{h.root_};
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            preorder.push_back(i);
            const auto& kids = h.children_[i];
            for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
                const auto c = h.index_.at(*it);
                h.depth_[c] = h.depth_[i] + 1;
                stack.push_back(c);
            }
        }
        for (auto it = preorder.rbegin(); it != preorder.rend(); ++it) {
            const auto i = *it;
            if (h.nodes_[i].kind == NodeKind::Category) continue;
            for (auto cid : h.children_[i]) {
                const auto c = h.index_.at(cid);
                h.eta_[i] += h.nodes_[c].kind == NodeKind::Category ? 1 : h.eta_[c];
                h.below_[i] = std::max(h.below_[i], h.below_[c] + 1);
            }
        }
        h.height_ = 0;
        for (auto i : preorder) {
            if (h.nodes_[i].kind == NodeKind::Concept && i != h.root_) {
                h.concepts_.push_back(h.nodes_[i].id);
                h.height_ = std::max(h.height_, h.depth_[i]);
            }
        }
        for (const auto& nd : h.nodes_) {
            if (nd.kind == NodeKind::Category) h.categories_.push_back(nd.id);
        }
        return h;
    }

private:
    std::vector<Node> nodes_;
    std::unordered_map<NodeId, std::size_t> index_;
    std::vector<std::ptrdiff_t> parent_;
    std::vector<std::vector<NodeId>> children_;
    std::vector<std::size_t> eta_;
    std::vector<int> depth_;
    std::vector<int> below_;
    std::vector<NodeId> categories_;
    std::vector<NodeId> concepts_;
    std::size_t root_ = 0;
    int height_ = 0;
    CondenseLog log_;
};

namespace detail {

/// Mutable spanning tree over ontology indices used while condensing.
class WorkingTree {
public:
    WorkingTree(const Ontology& o, DescendantCount mode) : o_(o), mode_(mode) {
        const std::size_t n = o.size();
        parent_.assign(n, -1);
        kids_.assign(n, {});
        alive_.assign(n, 0);
        eta_.assign(n, 0);

        // DFS spanning tree: a shared node stays with the first parent that
        // reaches it.
        std::vector<std::pair<std::size_t, std::size_t>> stack{{o.root_index(), 0}};
        alive_[o.root_index()] = 1;
        while (!stack.empty()) {
            auto& [node, pos] = stack.back();
            auto children = o.children(node);
            if (pos < children.size()) {
                const auto c = children[pos++];
                if (!alive_[c]) {
                    alive_[c] = 1;
                    parent_[c] = static_cast<std::ptrdiff_t>(node);
                    kids_[node].push_back(c);
                    stack.emplace_back(c, 0);
                } else {
                    dropped_.push_back({o.nodes()[node].id, o.nodes()[c].id});
                }
            } else {
                stack.pop_back();
            }
        }
        recount();
    }

    bool is_concept(std::size_t i) const { return o_.nodes()[i].kind == NodeKind::Concept; }
    std::size_t root() const { return o_.root_index(); }
    std::size_t eta(std::size_t i) const { return eta_[i]; }
    const std::vector<std::size_t>& kids(std::size_t i) const { return kids_[i]; }
    std::ptrdiff_t parent(std::size_t i) const { return parent_[i]; }
    const std::vector<Edge>& dropped() const { return dropped_; }

    /// Removes `node` and hands its children to `into` (its current parent).
    void splice(std::size_t node, std::size_t into) {
        auto& siblings = kids_[into];
        siblings.erase(std::find(siblings.begin(), siblings.end(), node));
        for (auto c : kids_[node]) {
            parent_[c] = static_cast<std::ptrdiff_t>(into);
            siblings.push_back(c);
        }
        std::sort(siblings.begin(), siblings.end());
        kids_[node].clear();
        alive_[node] = 0;
        parent_[node] = -1;
        recount();
    }

    std::vector<std::size_t> preorder_concepts() const {
        std::vector<std::size_t> out;
        std::vector<std::size_t> stack{root()};
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            out.push_back(i);
            for (auto it = kids_[i].rbegin(); it != kids_[i].rend(); ++it) {
                if (is_concept(*it)) stack.push_back(*it);
            }
        }
        return out;
    }

    CondensedHierarchy finish(CondenseLog log) const {
        std::vector<Node> nodes;
        std::vector<Edge> edges;
        for (std::size_t i = 0; i < o_.size(); ++i) {
            if (!alive_[i]) continue;
            nodes.push_back(o_.nodes()[i]);
            if (parent_[i] >= 0) {
                edges.push_back({o_.nodes()[static_cast<std::size_t>(parent_[i])].id,
                                 o_.nodes()[i].id});
            }
        }
        log.dropped_edges = dropped_;
        return CondensedHierarchy::assemble(std::move(nodes), std::move(edges), o_.root_id(),
                                            std::move(log));
    }

private:
    void recount() {
        auto order = preorder_concepts();
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            std::size_t total = 0;
            for (auto c : kids_[*it]) {
                if (is_concept(c)) {
                    total += eta_[c] + (mode_ == DescendantCount::AllNodes ? 1 : 0);
                } else {
                    total += 1;
                }
            }
            eta_[*it] = total;
        }
    }

    const Ontology& o_;
    DescendantCount mode_;
    std::vector<std::ptrdiff_t> parent_;
    std::vector<std::vector<std::size_t>> kids_;
    std::vector<char> alive_;
    std::vector<std::size_t> eta_;
    std::vector<Edge> dropped_;
};

}  // namespace detail

/// Condenses a label DAG into a compact tree.
///
/// A depth-first traversal first resolves the DAG into a spanning tree
/// (shared nodes stay with their first-visited parent, children visited by
/// ascending id). The tree is then rewritten until none of these apply:
///
///  - a child concept holding a fraction >= `tau` of its parent's
///    descendants is absorbed by the parent;
///  - a non-root concept with fewer than `delta` descendants is removed and
///    its children move to its parent;
///  - a concept whose only child is a single concept is collapsed.
///
/// The root is never removed and the set of categories is preserved.
inline CondensedHierarchy condense(const Ontology& o, double tau, std::size_t delta,
                                   DescendantCount mode = DescendantCount::CategoryLeaves) {
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
    if (delta < 1) throw std::invalid_argument("delta must be at least 1");
    const std::size_t n_categories = o.category_count();
    if (n_categories == 0 || delta > n_categories) {
        throw DegenerateHierarchyError("delta = " + std::to_string(delta) + " exceeds the " +
                                       std::to_string(n_categories) +
                                       " categories; every concept would be eliminated");
    }

    detail::WorkingTree tree(o, mode);
    CondenseLog log{tau, delta, mode, {}, {}};
    auto record = [&](std::size_t node, RemovalAction action, std::size_t into) {
        log.removed.push_back(
            {o.nodes()[node].id, o.nodes()[node].name, action, o.nodes()[into].id});
    };

    auto absorb_pass = [&] {
        bool changed = false;
        std::vector<std::size_t> stack{tree.root()};
        while (!stack.empty()) {
            const auto g = stack.back();
            stack.pop_back();
            for (bool again = true; again;) {
                again = false;
                if (tree.eta(g) == 0) break;
                for (auto c : tree.kids(g)) {
                    if (!tree.is_concept(c)) continue;
                    const double ratio =
                        static_cast<double>(tree.eta(c)) / static_cast<double>(tree.eta(g));
                    if (ratio >= tau) {
                        record(c, RemovalAction::Absorbed, g);
                        tree.splice(c, g);
                        again = changed = true;
                        break;
                    }
                }
            }
            const auto& kids = tree.kids(g);
            for (auto it = kids.rbegin(); it != kids.rend(); ++it) {
                if (tree.is_concept(*it)) stack.push_back(*it);
            }
        }
        return changed;
    };

    auto prune_pass = [&] {
        bool changed = false;
        auto order = tree.preorder_concepts();
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const auto g = *it;
            if (g == tree.root() || tree.eta(g) >= delta) continue;
            const auto p = static_cast<std::size_t>(tree.parent(g));
            record(g, RemovalAction::Removed, p);
            tree.splice(g, p);
            changed = true;
        }
        return changed;
    };

    auto collapse_pass = [&] {
        bool changed = false;
        for (auto g : tree.preorder_concepts()) {
            if (tree.parent(g) < 0 && g != tree.root()) continue;  // removed earlier this pass
            while (tree.kids(g).size() == 1 && tree.is_concept(tree.kids(g).front())) {
                const auto only = tree.kids(g).front();
                if (g == tree.root()) {
                    record(only, RemovalAction::Collapsed, g);
                    tree.splice(only, g);
                } else {
                    const auto p = static_cast<std::size_t>(tree.parent(g));
                    record(g, RemovalAction::Collapsed, p);
                    tree.splice(g, p);
                    changed = true;
                    break;
                }
                changed = true;
            }
        }
        return changed;
    };

    for (bool changed = true; changed;) {
        changed = false;
        while (absorb_pass()) changed = true;
        while (prune_pass()) changed = true;
        while (collapse_pass()) changed = true;
    }
    return tree.finish(std::move(log));
}

/// Concepts from just below the root down to `id` (a concept) or to the
/// parent of `id` (a category).
inline ChainSet ancestor_chain(const CondensedHierarchy& h, NodeId id) {
    ChainSet chain;
    std::optional<NodeId> cur = h.is_category(id) ? h.parent(id) : std::optional<NodeId>(id);
    while (cur && *cur != h.root()) {
        chain.push_back(*cur);
        cur = h.parent(*cur);
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

struct LcaResult {
    NodeId node = 0;
    int height = 0;  // longest edge distance from `node` down to a category
};

inline LcaResult lca(const CondensedHierarchy& h, NodeId a, NodeId b) {
    auto da = h.depth(a);
    auto db = h.depth(b);
    while (da > db) {
        a = *h.parent(a);
        --da;
    }
    while (db > da) {
        b = *h.parent(b);
        --db;
    }
    while (a != b) {
        a = *h.parent(a);
        b = *h.parent(b);
    }
    return {a, h.subtree_height(a)};
}

/// Writes a tree in the hierarchy file format: nodes by ascending id, then
/// edges by (parent, child).
inline std::string format_hierarchy(const CondensedHierarchy& h) {
    std::ostringstream out;
    for (const auto& nd : h.nodes()) {
        out << "node " << nd.id << ' ' << kind_name(nd.kind) << ' ' << nd.name << '\n';
    }
    for (const auto& nd : h.nodes()) {
        for (auto c : h.children(nd.id)) out << "edge " << nd.id << ' ' << c << '\n';
    }
    return out.str();
}

inline nlohmann::json removal_log_json(const CondensedHierarchy& h) {
    const auto& log = h.log();
    nlohmann::json j;
    j["tau"] = log.tau;
    j["delta"] = log.delta;
    j["count_mode"] =
        log.count_mode == DescendantCount::CategoryLeaves ? "category_leaves" : "all_nodes";
    j["dropped_edges"] = nlohmann::json::array();
    for (const auto& e : log.dropped_edges) j["dropped_edges"].push_back({e.parent, e.child});
    j["removed"] = nlohmann::json::array();
    for (const auto& r : log.removed) {
        j["removed"].push_back({{"id", r.id},
                                {"name", r.name},
                                {"action", std::string(action_name(r.action))},
                                {"into", r.into}});
    }
    return j;
}

}  // namespace mdhc

#endif  // MDHC_ONTOLOGY_HPP_
