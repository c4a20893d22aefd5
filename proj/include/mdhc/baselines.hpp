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

#ifndef MDHC_BASELINES_HPP_
#define MDHC_BASELINES_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mdhc/decoder.hpp"
#include "mdhc/head.hpp"
#include "mdhc/training.hpp"

namespace mdhc {

template <typename T>
struct FlatOutput {
    std::vector<T> logits;  // N category logits followed by M concept logits
    std::vector<T> probs;   // softmax over the N categories
    std::vector<T> z;       // sigmoid of each concept logit
};

/// Concept decode of the flat head: every concept whose sigmoid reaches the
/// threshold, in concept order. The set need not form a path.
template <typename T>
Prediction decode_flat(std::span<const T> probs, std::span<const T> z, const HeadTopology& t,
                       double threshold = 0.5) {
    Prediction pred;
    pred.category_index = argmax(probs);
    pred.category_id = t.category_ids()[pred.category_index];
    pred.category_prob = static_cast<double>(probs[pred.category_index]);
    pred.z_thresholded.assign(z.size(), 0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (static_cast<double>(z[i]) < threshold) continue;
        pred.z_thresholded[i] = 1;
        pred.chain.push_back(t.concept_id(i));
        pred.chain_scores.push_back(static_cast<double>(z[i]));
    }
    return pred;
}

/// Identity of a flat head over the topology's orderings.
inline std::uint64_t flat_hash(const HeadTopology& t) {
    detail::Fnv1a f;
    f.add(0x464c4154ull);  // "FLAT"
    f.add(t.hash());
    return f.value();
}

/// Single dense layer with N + M outputs: softmax over the categories and
/// independent sigmoids over the concepts. The topology only supplies the
/// category and concept orderings.
template <typename T>
class FlatModel {
public:
    using scalar_type = T;

    FlatModel(HeadTopology topology, std::uint64_t seed) : topology_(std::move(topology)) {
        const auto rows = outputs();
        const auto d0 = topology_.input_width();
        values_.assign(rows * d0 + rows, T(0));
        std::mt19937_64 rng(seed);
        const double s = std::sqrt(6.0 / static_cast<double>(d0 + rows));
        for (std::size_t i = 0; i < rows * d0; ++i) {
            values_[i] = static_cast<T>((2.0 * detail::uniform01(rng) - 1.0) * s);
        }
    }

    FlatModel(HeadTopology topology, std::vector<T> values)
        : topology_(std::move(topology)), values_(std::move(values)) {
        if (values_.size() != outputs() * topology_.input_width() + outputs()) {
            throw ShapeMismatchError("flat parameter vector has the wrong length");
        }
    }

    const HeadTopology& topology() const { return topology_; }
    std::size_t outputs() const { return topology_.category_count() + topology_.concept_count(); }
    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    std::span<const T> weights() const {
        return std::span<const T>(values_).first(outputs() * topology_.input_width());
    }
    std::span<const T> bias() const {
        return std::span<const T>(values_).last(outputs());
    }

    std::uint64_t hash() const { return flat_hash(topology_); }

    std::vector<std::uint8_t> concept_mask() const {
        const auto n = topology_.category_count();
        const auto d0 = topology_.input_width();
        std::vector<std::uint8_t> mask(values_.size(), 0);
        for (std::size_t r = n; r < outputs(); ++r) {
            std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(r * d0), d0, 1);
            mask[outputs() * d0 + r] = 1;
        }
        return mask;
    }

    FlatOutput<T> flat_forward(std::span<const T> features) const {
        const auto d0 = topology_.input_width();
        if (features.size() != d0) {
            throw ShapeMismatchError("feature width " + std::to_string(features.size()) +
                                     " does not match input width " + std::to_string(d0));
        }
        const auto n = topology_.category_count();
        FlatOutput<T> out;
        out.logits.resize(outputs());
        auto w = weights();
        auto b = bias();
        for (std::size_t r = 0; r < outputs(); ++r) {
            out.logits[r] = detail::dot(w.subspan(r * d0, d0), features) + b[r];
        }
        out.probs.resize(n);
        detail::softmax<T>(std::span<const T>(out.logits).first(n), out.probs);
        out.z.resize(outputs() - n);
        for (std::size_t i = 0; i < out.z.size(); ++i) out.z[i] = detail::sigmoid(out.logits[n + i]);
        return out;
    }

    LossParts<T> accumulate(std::span<const T> features, std::size_t label,
                            std::span<const std::uint8_t> targets, const LossConfig& cfg, T scale,
                            std::span<T> grad) const {
        const auto out = flat_forward(features);
        const auto n = topology_.category_count();
        const auto m = topology_.concept_count();
        const auto d0 = topology_.input_width();
        LossParts<T> loss;
        loss.category = category_loss<T>(out.probs, label);
        loss.concept_part = concept_loss<T>(out.z, targets, cfg.kind);
        const T con_weight = m ? static_cast<T>(cfg.lambda) / static_cast<T>(m) : T(0);
        auto gb = grad.subspan(outputs() * d0);
        for (std::size_t r = 0; r < outputs(); ++r) {
            const T g = r < n ? scale * (out.probs[r] - (r == label ? T(1) : T(0)))
                              : scale * con_weight *
                                    detail::concept_loss_slope(out.z[r - n], targets[r - n], cfg.kind);
            gb[r] += g;
            for (std::size_t i = 0; i < d0; ++i) grad[r * d0 + i] += g * features[i];
        }
        return loss;
    }

    Prediction predict(std::span<const T> features, double threshold) const {
        const auto out = flat_forward(features);
        return decode_flat<T>(out.probs, out.z, topology_, threshold);
    }

    std::vector<T> category_probs(std::span<const T> features) const {
        return flat_forward(features).probs;
    }

private:
    HeadTopology topology_;
    std::vector<T> values_;
};

}  // namespace mdhc

#endif  // MDHC_BASELINES_HPP_
