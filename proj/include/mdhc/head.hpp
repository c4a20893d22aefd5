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

#ifndef MDHC_HEAD_HPP_
#define MDHC_HEAD_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdhc/error.hpp"
#include "mdhc/ontology.hpp"

namespace mdhc {

/// One group of hidden nodes. Unit 0 is the root, whose hidden vector is the
/// input feature vector; every other unit is a predicted concept.
struct ConceptUnit {
    NodeId node_id = 0;
    std::size_t hidden_size = 0;
    std::ptrdiff_t parent = -1;                 // unit index, -1 for the root
    std::vector<std::size_t> child_units;       // ascending node id
    std::vector<std::size_t> child_categories;  // category indices, ascending id
    int depth = 0;
    std::size_t eta = 0;
};

namespace detail {

class Fnv1a {
public:
    void add(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            state_ ^= (v >> (8 * i)) & 0xffu;
            state_ *= 0x100000001b3ull;
        }
    }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace detail

class HeadTopology {
public:
    std::size_t input_width() const { return d0_; }
    std::size_t multiplier() const { return mu_; }
    const std::vector<ConceptUnit>& units() const { return units_; }
    const ConceptUnit& unit(std::size_t u) const { return units_[u]; }

    /// N
    std::size_t category_count() const { return category_ids_.size(); }
    /// M, the root excluded.
    std::size_t concept_count() const { return units_.size() - 1; }
    /// Deepest concept level (ρ).
    int height() const { return height_; }

    const std::vector<NodeId>& category_ids() const { return category_ids_; }
    NodeId concept_id(std::size_t concept_index) const { return units_[concept_index + 1].node_id; }

    std::size_t category_index(NodeId id) const {
        auto it = category_index_.find(id);
        if (it == category_index_.end()) {
            throw UnknownNodeError("unknown category " + std::to_string(id));
        }
        return it->second;
    }
    /// Position of a concept in the z vector (unit index minus one).
    std::size_t concept_index(NodeId id) const {
        auto it = unit_index_.find(id);
        if (it == unit_index_.end() || it->second == 0) {
            throw UnknownNodeError("unknown concept " + std::to_string(id));
        }
        return it->second - 1;
    }
    std::size_t unit_index(NodeId id) const {
        auto it = unit_index_.find(id);
        if (it == unit_index_.end()) throw UnknownNodeError("unknown concept " + std::to_string(id));
        return it->second;
    }
    /// Unit whose hidden vector feeds category `j`.
    std::size_t category_unit(std::size_t j) const { return category_unit_[j]; }

    std::uint64_t hash() const {
        detail::Fnv1a f;
        f.add(d0_);
        f.add(mu_);
        f.add(units_.size());
        for (const auto& u : units_) {
            f.add(static_cast<std::uint64_t>(u.node_id));
            f.add(u.hidden_size);
            f.add(static_cast<std::uint64_t>(u.parent));
            f.add(u.child_units.size());
            for (auto c : u.child_units) f.add(static_cast<std::uint64_t>(units_[c].node_id));
            f.add(u.child_categories.size());
            for (auto j : u.child_categories) f.add(static_cast<std::uint64_t>(category_ids_[j]));
        }
        return f.value();
    }

    friend HeadTopology build_topology(const CondensedHierarchy& h, std::size_t d0,
                                       std::size_t mu);

private:
    std::size_t d0_ = 0;
    std::size_t mu_ = 0;
    int height_ = 0;
    std::vector<ConceptUnit> units_;
    std::vector<NodeId> category_ids_;
    std::vector<std::size_t> category_unit_;
    std::unordered_map<NodeId, std::size_t> category_index_;
    std::unordered_map<NodeId, std::size_t> unit_index_;
};

/// Lays out one hidden group per concept, sized μ·η, with the root fed by the
/// d0-wide feature vector.
inline HeadTopology build_topology(const CondensedHierarchy& h, std::size_t d0,
                                   std::size_t mu = 2) {
    if (d0 < 1) throw std::invalid_argument("input width must be positive");
    if (mu < 1) throw std::invalid_argument("hidden-size multiplier must be positive");
    HeadTopology t;
    t.d0_ = d0;
    t.mu_ = mu;
    t.category_ids_ = h.categories();
    for (std::size_t j = 0; j < t.category_ids_.size(); ++j) {
        t.category_index_.emplace(t.category_ids_[j], j);
    }
    t.category_unit_.assign(t.category_ids_.size(), 0);

    std::vector<NodeId> order{h.root()};
    order.insert(order.end(), h.concepts().begin(), h.concepts().end());
    for (std::size_t u = 0; u < order.size(); ++u) t.unit_index_.emplace(order[u], u);

    t.units_.resize(order.size());
    for (std::size_t u = 0; u < order.size(); ++u) {
        auto& unit = t.units_[u];
        unit.node_id = order[u];
        unit.eta = h.descendant_count(order[u]);
        unit.depth = h.depth(order[u]);
        unit.hidden_size = u == 0 ? d0 : mu * unit.eta;
        if (u != 0) unit.parent = static_cast<std::ptrdiff_t>(t.unit_index_.at(*h.parent(order[u])));
        for (auto c : h.children(order[u])) {
            if (h.is_category(c)) {
                const auto j = t.category_index_.at(c);
                unit.child_categories.push_back(j);
                t.category_unit_[j] = u;
            } else {
                unit.child_units.push_back(t.unit_index_.at(c));
            }
        }
        t.height_ = std::max(t.height_, unit.depth);
    }
    return t;
}

enum class BlockKind {
    GateWeight,      // u, one row of the concept's own hidden width
    GateBias,        // b_z
    CategoryWeight,  // v, one row per child category
    CategoryBias,    // b_j
    ConceptWeight,   // W, child hidden x parent hidden
    ConceptBias,     // bias of the child's pre-activation
};

inline std::string_view block_kind_name(BlockKind k) {
    switch (k) {
        case BlockKind::GateWeight: return "gate_weight";
        case BlockKind::GateBias: return "gate_bias";
        case BlockKind::CategoryWeight: return "category_weight";
        case BlockKind::CategoryBias: return "category_bias";
        case BlockKind::ConceptWeight: return "concept_weight";
        case BlockKind::ConceptBias: return "concept_bias";
    }
    return "?";
}

/// Blocks updated during the concept-only stage of training.
inline bool is_concept_block(BlockKind k) {
    return k != BlockKind::CategoryWeight && k != BlockKind::CategoryBias;
}

struct BlockInfo {
    BlockKind kind = BlockKind::GateWeight;
    std::size_t unit = 0;    // owning unit (whose hidden vector is the input)
    std::size_t target = 0;  // receiving unit for concept blocks, else `unit`
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return rows * cols; }
};

class ParameterLayout {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    struct UnitBlocks {
        std::size_t gate_weight = npos;
        std::size_t gate_bias = npos;
        std::size_t category_weight = npos;
        std::size_t category_bias = npos;
        std::vector<std::size_t> concept_weight;  // aligned with ConceptUnit::child_units
        std::vector<std::size_t> concept_bias;
    };

    explicit ParameterLayout(const HeadTopology& t) {
        units_.resize(t.units().size());
        for (std::size_t u = 0; u < t.units().size(); ++u) {
            const auto& unit = t.unit(u);
            auto& ub = units_[u];
            const auto d = unit.hidden_size;
            if (u != 0) {
                ub.gate_weight = add(BlockKind::GateWeight, u, u, 1, d);
                ub.gate_bias = add(BlockKind::GateBias, u, u, 1, 1);
            }
            if (!unit.child_categories.empty()) {
                const auto b = unit.child_categories.size();
                ub.category_weight = add(BlockKind::CategoryWeight, u, u, b, d);
                ub.category_bias = add(BlockKind::CategoryBias, u, u, b, 1);
            }
            for (auto c : unit.child_units) {
                const auto dc = t.unit(c).hidden_size;
                ub.concept_weight.push_back(add(BlockKind::ConceptWeight, u, c, dc, d));
                ub.concept_bias.push_back(add(BlockKind::ConceptBias, u, c, dc, 1));
            }
        }
    }

    const std::vector<BlockInfo>& blocks() const { return blocks_; }
    const UnitBlocks& unit(std::size_t u) const { return units_[u]; }
    std::size_t total() const { return total_; }

private:
    std::size_t add(BlockKind kind, std::size_t unit, std::size_t target, std::size_t rows,
                    std::size_t cols) {
        blocks_.push_back({kind, unit, target, rows, cols, total_});
        total_ += rows * cols;
        return blocks_.size() - 1;
    }

    std::vector<BlockInfo> blocks_;
    std::vector<UnitBlocks> units_;
    std::size_t total_ = 0;
};

/// Flat parameter storage partitioned into the blocks of a ParameterLayout.
template <typename T>
class HeadParameters {
public:
    using scalar_type = T;

    HeadParameters() = default;
    explicit HeadParameters(std::shared_ptr<const ParameterLayout> layout)
        : layout_(std::move(layout)), values_(layout_->total(), T(0)) {}

    const ParameterLayout& layout() const { return *layout_; }
    std::shared_ptr<const ParameterLayout> shared_layout() const { return layout_; }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    std::span<T> block(std::size_t b) {
        const auto& info = layout_->blocks()[b];
        return std::span<T>(values_).subspan(info.offset, info.size());
    }
    std::span<const T> block(std::size_t b) const {
        const auto& info = layout_->blocks()[b];
        return std::span<const T>(values_).subspan(info.offset, info.size());
    }

    void set_zero() { std::fill(values_.begin(), values_.end(), T(0)); }

    template <typename U>
    HeadParameters<U> cast() const {
        HeadParameters<U> out(layout_);
        std::transform(values_.begin(), values_.end(), out.values().begin(),
                       [](T v) { return static_cast<U>(v); });
        return out;
    }

    friend bool operator==(const HeadParameters& a, const HeadParameters& b) {
        return a.values_ == b.values_;
    }

private:
    std::shared_ptr<const ParameterLayout> layout_;
    std::vector<T> values_;
};

/// Gradients share the parameter layout block for block.
template <typename T>
using GradientSet = HeadParameters<T>;

namespace detail {

/// Uniform draw in [0, 1) from the top 53 bits, independent of the standard
/// library's distribution implementation.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
T sigmoid(T a) {
    if (a >= T(0)) return T(1) / (T(1) + std::exp(-a));
    const T e = std::exp(a);
    return e / (T(1) + e);
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
    T s = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// In-place softmax over `x`, written to `out`.
template <typename T>
void softmax(std::span<const T> x, std::span<T> out) {
    if (x.empty()) return;
    const T m = *std::max_element(x.begin(), x.end());
    T sum = T(0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = std::exp(x[i] - m);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
}

}  // namespace detail

/// Glorot-uniform weights per block, zero biases (so every gate starts at
/// 0.5 for a zero input). Deterministic for a given seed.
template <typename T = double>
HeadParameters<T> init_parameters(const HeadTopology& t, std::uint64_t seed) {
    HeadParameters<T> p(std::make_shared<const ParameterLayout>(t));
    std::mt19937_64 rng(seed);
    for (std::size_t b = 0; b < p.layout().blocks().size(); ++b) {
        const auto& info = p.layout().blocks()[b];
        if (info.kind == BlockKind::GateBias || info.kind == BlockKind::CategoryBias ||
            info.kind == BlockKind::ConceptBias) {
            continue;
        }
        const double fan_in = static_cast<double>(info.cols);
        const double fan_out = static_cast<double>(info.rows);
        const double s = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : p.block(b)) v = static_cast<T>((2.0 * detail::uniform01(rng) - 1.0) * s);
    }
    return p;
}

/// Every activation of one forward pass, kept for backpropagation.
template <typename T>
struct ForwardTrace {
    std::uint64_t topology_hash = 0;
    /// h: per unit, after the parent's gate (the root holds the features).
    std::vector<std::vector<T>> hidden;
    /// h̃: per unit, ReLU output before the parent's gate.
    std::vector<std::vector<T>> pre_gate;
    /// z: per unit; the root gate is fixed at 1.
    std::vector<T> gate;
    std::vector<T> raw_logits;  // x̃
    std::vector<T> logits;      // x = x̃ · z(parent)
    std::vector<T> probs;       // softmax over all N logits

    /// The M predicted concept gates, in unit order.
    std::vector<T> concept_gates() const { return {gate.begin() + 1, gate.end()}; }
};

/// Gates forced to a fixed value, keyed by concept index.
template <typename T>
using GateOverrides = std::unordered_map<std::size_t, T>;

template <typename T>
ForwardTrace<T> forward(const HeadParameters<T>& p, const HeadTopology& t,
                        std::span<const T> features,
                        const GateOverrides<T>* forced_gates = nullptr) {
    if (features.size() != t.input_width()) {
        throw ShapeMismatchError("feature width " + std::to_string(features.size()) +
                                 " does not match input width " +
                                 std::to_string(t.input_width()));
    }
    const auto& layout = p.layout();
    const std::size_t units = t.units().size();
    const std::size_t n = t.category_count();

    ForwardTrace<T> tr;
    tr.topology_hash = t.hash();
    tr.hidden.resize(units);
    tr.pre_gate.resize(units);
    tr.gate.assign(units, T(1));
    tr.raw_logits.assign(n, T(0));
    tr.logits.assign(n, T(0));
    tr.probs.assign(n, T(0));
    tr.hidden[0].assign(features.begin(), features.end());
    tr.pre_gate[0] = tr.hidden[0];

    for (std::size_t u = 0; u < units; ++u) {
        const auto& unit = t.unit(u);
        const auto& ub = layout.unit(u);
        std::span<const T> h = tr.hidden[u];
        if (u != 0) {
            const T a = detail::dot(p.block(ub.gate_weight), h) + p.block(ub.gate_bias)[0];
            tr.gate[u] = detail::sigmoid(a);
            if (forced_gates) {
                if (auto it = forced_gates->find(u - 1); it != forced_gates->end()) {
                    tr.gate[u] = it->second;
                }
            }
        }
        const T z = tr.gate[u];
        if (!unit.child_categories.empty()) {
            auto w = p.block(ub.category_weight);
            auto b = p.block(ub.category_bias);
            const auto d = unit.hidden_size;
            for (std::size_t r = 0; r < unit.child_categories.size(); ++r) {
                const auto j = unit.child_categories[r];
                tr.raw_logits[j] = detail::dot(w.subspan(r * d, d), h) + b[r];
                tr.logits[j] = tr.raw_logits[j] * z;
            }
        }
        for (std::size_t k = 0; k < unit.child_units.size(); ++k) {
            const auto c = unit.child_units[k];
            const auto dc = t.unit(c).hidden_size;
            const auto d = unit.hidden_size;
            auto w = p.block(ub.concept_weight[k]);
            auto b = p.block(ub.concept_bias[k]);
            auto& pre = tr.pre_gate[c];
            auto& post = tr.hidden[c];
            pre.resize(dc);
            post.resize(dc);
            for (std::size_t r = 0; r < dc; ++r) {
                pre[r] = std::max(T(0), detail::dot(w.subspan(r * d, d), h) + b[r]);
                post[r] = pre[r] * z;
            }
        }
    }
    detail::softmax<T>(tr.logits, tr.probs);
    return tr;
}

struct BlockCount {
    BlockKind kind;
    std::size_t unit;
    std::size_t target;
    std::size_t count;
};

struct ParamCountReport {
    std::size_t total = 0;
    std::vector<BlockCount> per_block;
    /// d0·N + N: a single dense layer over the categories.
    std::size_t flat_total = 0;
    /// Set when every internal concept splits α ways and the leaves are even.
    std::optional<std::size_t> balanced_arity;
    std::optional<double> bound;
    bool within_bound = false;
};

/// μ·d0·(N + ρ + α/(α−1)), the weight budget of a balanced α-way hierarchy.
inline double balanced_bound(const HeadTopology& t, std::size_t alpha) {
    const double a = static_cast<double>(alpha);
    return static_cast<double>(t.multiplier()) * static_cast<double>(t.input_width()) *
           (static_cast<double>(t.category_count()) + t.height() + a / (a - 1.0));
}

/// Branching factor if the concept tree is a balanced α-way decomposition:
/// every internal unit has α concept children and no categories, leaf
/// concepts share a depth and a category count.
inline std::optional<std::size_t> balanced_arity(const HeadTopology& t) {
    if (t.concept_count() == 0) return std::nullopt;
    std::optional<std::size_t> alpha;
    std::optional<int> leaf_depth;
    std::optional<std::size_t> leaf_size;
    for (const auto& u : t.units()) {
        if (!u.child_units.empty()) {
            if (!u.child_categories.empty()) return std::nullopt;
            if (!alpha) alpha = u.child_units.size();
            if (*alpha != u.child_units.size()) return std::nullopt;
        } else {
            if (!leaf_depth) leaf_depth = u.depth;
            if (!leaf_size) leaf_size = u.child_categories.size();
            if (*leaf_depth != u.depth || *leaf_size != u.child_categories.size()) {
                return std::nullopt;
            }
        }
    }
    if (!alpha || *alpha < 2) return std::nullopt;
    return alpha;
}

inline ParamCountReport count_parameters(const HeadTopology& t) {
    ParamCountReport r;
    const ParameterLayout layout(t);
    for (const auto& b : layout.blocks()) {
        r.per_block.push_back({b.kind, b.unit, b.target, b.size()});
        r.total += b.size();
    }
    r.flat_total = t.input_width() * t.category_count() + t.category_count();
    r.balanced_arity = balanced_arity(t);
    if (r.balanced_arity) {
        r.bound = balanced_bound(t, *r.balanced_arity);
        r.within_bound = static_cast<double>(r.total) <= *r.bound;
    }
    return r;
}

}  // namespace mdhc

#endif  // MDHC_HEAD_HPP_
