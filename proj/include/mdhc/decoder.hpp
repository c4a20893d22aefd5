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

#ifndef MDHC_DECODER_HPP_
#define MDHC_DECODER_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "mdhc/head.hpp"
#include "mdhc/ontology.hpp"

namespace mdhc {

struct Prediction {
    NodeId category_id = 0;
    std::size_t category_index = 0;
    double category_prob = 0.0;
    ChainSet chain;
    std::vector<double> chain_scores;  // z (or marginal) of each chain member
    std::vector<std::uint8_t> z_thresholded;  // per concept, after parent zeroing
};

/// Index of the largest probability; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> probs) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < probs.size(); ++j) {
        if (probs[j] > probs[best]) best = j;
    }
    return best;
}

namespace detail {

/// Greedy walk from the root: at every level follow the child concept with
/// the largest score among those at or above `threshold`.
inline void greedy_chain(const HeadTopology& t, std::span<const double> unit_scores,
                         double threshold, ChainSet& chain, std::vector<double>& scores) {
    std::size_t cur = 0;
    while (true) {
        std::ptrdiff_t best = -1;
        for (auto c : t.unit(cur).child_units) {
            if (unit_scores[c] < threshold) continue;
            if (best < 0 || unit_scores[c] > unit_scores[static_cast<std::size_t>(best)]) {
                best = static_cast<std::ptrdiff_t>(c);
            }
        }
        if (best < 0) break;
        cur = static_cast<std::size_t>(best);
        chain.push_back(t.unit(cur).node_id);
        scores.push_back(unit_scores[cur]);
    }
}

}  // namespace detail

/// Category by argmax; concepts by thresholding gates top-down, where a gate
/// is zeroed whenever its parent's (already zeroed) gate falls below the
/// threshold. The chain follows the most confident qualifying child at each
/// level and stops when none qualifies.
template <typename T>
Prediction decode_scores(std::span<const T> probs, std::span<const T> concept_gates,
                         const HeadTopology& t, double threshold = 0.5) {
    Prediction pred;
    pred.category_index = argmax(probs);
    pred.category_id = t.category_ids()[pred.category_index];
    pred.category_prob = static_cast<double>(probs[pred.category_index]);

    const auto units = t.units().size();
    std::vector<double> gated(units, 1.0);
    pred.z_thresholded.assign(units - 1, 0);
    for (std::size_t u = 1; u < units; ++u) {
        const auto parent = static_cast<std::size_t>(t.unit(u).parent);
        const bool parent_off = parent != 0 && gated[parent] < threshold;
        gated[u] = parent_off ? 0.0 : static_cast<double>(concept_gates[u - 1]);
        pred.z_thresholded[u - 1] = gated[u] >= threshold ? 1 : 0;
    }
    detail::greedy_chain(t, gated, threshold, pred.chain, pred.chain_scores);
    return pred;
}

template <typename T>
Prediction decode(const ForwardTrace<T>& trace, const HeadTopology& t, double threshold = 0.5) {
    const auto z = trace.concept_gates();
    return decode_scores<T>(trace.probs, z, t, threshold);
}

/// Probability mass under every unit (root first): the sum of the softmax
/// probabilities of the categories below it.
template <typename T>
std::vector<double> concept_marginals(std::span<const T> probs, const HeadTopology& t) {
    const auto units = t.units().size();
    std::vector<double> mass(units, 0.0);
    for (std::size_t u = units; u-- > 0;) {
        const auto& unit = t.unit(u);
        for (auto j : unit.child_categories) mass[u] += static_cast<double>(probs[j]);
        for (auto c : unit.child_units) mass[u] += mass[c];
    }
    return mass;
}

/// Marginal-aggregation baseline: greedy max-marginal path from the root,
/// continuing while the marginal reaches the threshold.
template <typename T>
Prediction decode_pragg(std::span<const T> probs, const HeadTopology& t, double threshold = 0.5) {
    Prediction pred;
    pred.category_index = argmax(probs);
    pred.category_id = t.category_ids()[pred.category_index];
    pred.category_prob = static_cast<double>(probs[pred.category_index]);
    const auto mass = concept_marginals(probs, t);
    pred.z_thresholded.assign(t.concept_count(), 0);
    for (std::size_t u = 1; u < mass.size(); ++u) {
        pred.z_thresholded[u - 1] = mass[u] >= threshold ? 1 : 0;
    }
    detail::greedy_chain(t, mass, threshold, pred.chain, pred.chain_scores);
    return pred;
}

}  // namespace mdhc

#endif  // MDHC_DECODER_HPP_
