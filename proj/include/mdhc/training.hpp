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

#ifndef MDHC_TRAINING_HPP_
#define MDHC_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mdhc/dataio.hpp"
#include "mdhc/decoder.hpp"
#include "mdhc/error.hpp"
#include "mdhc/head.hpp"
#include "mdhc/metrics.hpp"
#include "mdhc/ontology.hpp"

namespace mdhc {

/// Bit per concept (in CondensedHierarchy::concepts() order): set iff the
/// concept is an ancestor of the category.
using ConceptTarget = std::vector<std::uint8_t>;

inline ConceptTarget concept_targets(const CondensedHierarchy& h, NodeId category) {
    if (!h.contains(category) || !h.is_category(category)) {
        throw UnknownNodeError("unknown category " + std::to_string(category));
    }
    ConceptTarget bits(h.concepts().size(), 0);
    const auto chain = ancestor_chain(h, category);
    for (std::size_t i = 0; i < h.concepts().size(); ++i) {
        if (std::find(chain.begin(), chain.end(), h.concepts()[i]) != chain.end()) bits[i] = 1;
    }
    return bits;
}

enum class ConceptLoss { BinaryCrossEntropy, MeanSquaredError };

struct LossConfig {
    double lambda = 5.0;
    ConceptLoss kind = ConceptLoss::BinaryCrossEntropy;
};

/// Gates are clamped to [kGateClamp, 1 - kGateClamp] inside the BCE.
inline constexpr double kGateClamp = 1e-12;

template <typename T>
T category_loss(std::span<const T> probs, std::size_t label) {
    return -std::log(std::max(probs[label], std::numeric_limits<T>::min()));
}

/// Mean over concepts of the per-concept BCE (or squared error).
template <typename T>
T concept_loss(std::span<const T> z, std::span<const std::uint8_t> target, ConceptLoss kind) {
    if (z.empty()) return T(0);
    T sum = T(0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const T t = target[i] ? T(1) : T(0);
        if (kind == ConceptLoss::BinaryCrossEntropy) {
            const T zc = std::clamp(z[i], T(kGateClamp), T(1) - T(kGateClamp));
            sum -= t * std::log(zc) + (T(1) - t) * std::log(T(1) - zc);
        } else {
            sum += (z[i] - t) * (z[i] - t);
        }
    }
    return sum / static_cast<T>(z.size());
}

template <typename T>
struct LossParts {
    T category = T(0);
    T concept_part = T(0);
    T combined(double lambda) const { return category + static_cast<T>(lambda) * concept_part; }
};

/// L_CE + λ·L_CON for one forward pass; `label` is the category index.
template <typename T>
T combined_loss(const ForwardTrace<T>& trace, std::size_t label,
                std::span<const std::uint8_t> targets, const LossConfig& cfg) {
    const auto z = trace.concept_gates();
    return category_loss<T>(trace.probs, label) +
           static_cast<T>(cfg.lambda) * concept_loss<T>(z, targets, cfg.kind);
}

namespace detail {

/// dL_CON/da for a gate z = sigmoid(a), per concept, before λ and 1/M.
template <typename T>
T concept_loss_slope(T z, std::uint8_t target, ConceptLoss kind) {
    const T t = target ? T(1) : T(0);
    if (kind == ConceptLoss::BinaryCrossEntropy) {
        if (z < T(kGateClamp) || z > T(1) - T(kGateClamp)) return T(0);
        return z - t;
    }
    return T(2) * (z - t) * z * (T(1) - z);
}

}  // namespace detail

/// Adds `scale` times the gradient of the combined loss into `grad` (laid out
/// like the parameters). Returns the loss terms of this example.
template <typename T>
LossParts<T> accumulate_backward(const ForwardTrace<T>& trace, const HeadTopology& t,
                                 const HeadParameters<T>& p, std::size_t label,
                                 std::span<const std::uint8_t> targets, const LossConfig& cfg,
                                 T scale, std::span<T> grad) {
    const auto units = t.units().size();
    if (trace.topology_hash != t.hash() || trace.gate.size() != units ||
        trace.probs.size() != t.category_count() || grad.size() != p.values().size() ||
        targets.size() != t.concept_count()) {
        throw TraceMismatchError("trace, topology, targets and gradient buffer disagree");
    }
    const auto& layout = p.layout();
    const T m = static_cast<T>(t.concept_count());
    const T con_weight = t.concept_count() ? static_cast<T>(cfg.lambda) / m : T(0);

    LossParts<T> loss;
    loss.category = category_loss<T>(trace.probs, label);
    loss.concept_part = concept_loss<T>(trace.concept_gates(), targets, cfg.kind);

    std::vector<std::vector<T>> g_hidden(units);
    for (std::size_t u = 0; u < units; ++u) g_hidden[u].assign(t.unit(u).hidden_size, T(0));

    auto block = [&](std::size_t b) {
        const auto& info = layout.blocks()[b];
        return grad.subspan(info.offset, info.size());
    };

    for (std::size_t u = units; u-- > 0;) {
        const auto& unit = t.unit(u);
        const auto& ub = layout.unit(u);
        const auto d = unit.hidden_size;
        std::span<const T> h = trace.hidden[u];
        auto& gh = g_hidden[u];
        const T z = trace.gate[u];
        T g_z = T(0);

        if (!unit.child_categories.empty()) {
            auto w = p.block(ub.category_weight);
            auto gw = block(ub.category_weight);
            auto gb = block(ub.category_bias);
            for (std::size_t r = 0; r < unit.child_categories.size(); ++r) {
                const auto j = unit.child_categories[r];
                const T g_x = scale * (trace.probs[j] - (j == label ? T(1) : T(0)));
                g_z += g_x * trace.raw_logits[j];
                const T g_raw = g_x * z;
                gb[r] += g_raw;
                for (std::size_t i = 0; i < d; ++i) {
                    gw[r * d + i] += g_raw * h[i];
                    gh[i] += g_raw * w[r * d + i];
                }
            }
        }
        for (std::size_t k = 0; k < unit.child_units.size(); ++k) {
            const auto c = unit.child_units[k];
            const auto dc = t.unit(c).hidden_size;
            const auto& pre = trace.pre_gate[c];
            const auto& g_post = g_hidden[c];
            auto w = p.block(ub.concept_weight[k]);
            auto gw = block(ub.concept_weight[k]);
            auto gb = block(ub.concept_bias[k]);
            for (std::size_t r = 0; r < dc; ++r) {
                g_z += g_post[r] * pre[r];
                if (!(pre[r] > T(0))) continue;  // ReLU slope is 0 at and below 0
                const T g_pre = g_post[r] * z;
                gb[r] += g_pre;
                for (std::size_t i = 0; i < d; ++i) {
                    gw[r * d + i] += g_pre * h[i];
                    gh[i] += g_pre * w[r * d + i];
                }
            }
        }
        if (u != 0) {
            const T g_a = g_z * z * (T(1) - z) +
                          scale * con_weight * detail::concept_loss_slope(z, targets[u - 1], cfg.kind);
            auto uw = p.block(ub.gate_weight);
            auto gu = block(ub.gate_weight);
            block(ub.gate_bias)[0] += g_a;
            for (std::size_t i = 0; i < d; ++i) {
                gu[i] += g_a * h[i];
                gh[i] += g_a * uw[i];
            }
        }
    }
    return loss;
}

/// Exact reverse-mode gradient of the combined loss of one example.
template <typename T>
GradientSet<T> backward(const ForwardTrace<T>& trace, const HeadTopology& t,
                        const HeadParameters<T>& p, std::size_t label,
                        std::span<const std::uint8_t> targets, const LossConfig& cfg) {
    GradientSet<T> g(p.shared_layout());
    accumulate_backward(trace, t, p, label, targets, cfg, T(1), g.values());
    return g;
}

struct OptimizerConfig {
    double learning_rate = 0.01;
    double rms_decay = 0.9;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double epsilon = 1e-8;
    double lr_decay = 0.94;            // multiplier applied every lr_decay_epochs
    std::size_t lr_decay_epochs = 2;
};

/// RMSProp with momentum:
///   g ← g + wd·w;  v ← ρ·v + (1−ρ)·g²;  m ← β·m + g/√(v+ε);  w ← w − lr·m
template <typename T>
struct OptimizerState {
    OptimizerConfig config;
    double learning_rate = 0.0;
    std::vector<T> mean_square;
    std::vector<T> velocity;

    OptimizerState() = default;
    OptimizerState(const OptimizerConfig& cfg, std::size_t size)
        : config(cfg), learning_rate(cfg.learning_rate), mean_square(size, T(0)),
          velocity(size, T(0)) {
        if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    }

    /// Step schedule: lr·decay^⌊epoch / every⌋, epochs counted from 0.
    void begin_epoch(std::size_t epoch) {
        const auto every = std::max<std::size_t>(config.lr_decay_epochs, 1);
        learning_rate = config.learning_rate *
                        std::pow(config.lr_decay, static_cast<double>(epoch / every));
    }
};

/// One update. Entries with a zero in `mask` (when given) are left untouched,
/// accumulators included.
template <typename T>
void optimizer_step(std::span<T> params, std::span<const T> grads, OptimizerState<T>& state,
                    std::span<const std::uint8_t> mask = {}) {
    if (grads.size() != params.size() || state.mean_square.size() != params.size() ||
        (!mask.empty() && mask.size() != params.size())) {
        throw ShapeMismatchError("optimizer buffers do not match the parameters");
    }
    const auto& c = state.config;
    const T rho = static_cast<T>(c.rms_decay);
    const T beta = static_cast<T>(c.momentum);
    const T wd = static_cast<T>(c.weight_decay);
    const T eps = static_cast<T>(c.epsilon);
    const T lr = static_cast<T>(state.learning_rate);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        const T g = grads[i] + wd * params[i];
        state.mean_square[i] = rho * state.mean_square[i] + (T(1) - rho) * g * g;
        state.velocity[i] = beta * state.velocity[i] + g / std::sqrt(state.mean_square[i] + eps);
        params[i] -= lr * state.velocity[i];
    }
}

/// The multilayer gated head behind the generic trainer interface.
template <typename T>
class MultilayerModel {
public:
    using scalar_type = T;

    MultilayerModel(HeadTopology topology, HeadParameters<T> params)
        : topology_(std::move(topology)), params_(std::move(params)) {}

    const HeadTopology& topology() const { return topology_; }
    const HeadParameters<T>& parameters() const { return params_; }
    HeadParameters<T>& parameters() { return params_; }
    std::span<T> values() { return params_.values(); }
    std::span<const T> values() const { return params_.values(); }

    /// 1 for entries trained during the concept-only stage.
    std::vector<std::uint8_t> concept_mask() const {
        std::vector<std::uint8_t> mask(params_.values().size(), 0);
        for (const auto& b : params_.layout().blocks()) {
            if (!is_concept_block(b.kind)) continue;
            std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(b.offset), b.size(), 1);
        }
        return mask;
    }

    LossParts<T> accumulate(std::span<const T> features, std::size_t label,
                            std::span<const std::uint8_t> targets, const LossConfig& cfg, T scale,
                            std::span<T> grad) const {
        const auto trace = forward(params_, topology_, features);
        return accumulate_backward(trace, topology_, params_, label, targets, cfg, scale, grad);
    }

    Prediction predict(std::span<const T> features, double threshold) const {
        return decode(forward(params_, topology_, features), topology_, threshold);
    }

    std::vector<T> category_probs(std::span<const T> features) const {
        return forward(params_, topology_, features).probs;
    }

private:
    HeadTopology topology_;
    HeadParameters<T> params_;
};

struct TrainConfig {
    LossConfig loss;
    OptimizerConfig optimizer;
    std::size_t batch_size = 64;
    std::size_t epochs = 20;
    /// Epochs at the start during which only concept blocks are updated.
    std::size_t stage_epochs = 2;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    /// Reduce per-example gradients in example order regardless of threads.
    bool deterministic = true;
    double threshold = 0.5;
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double category_loss = 0.0;
    double concept_loss = 0.0;
    double acc_cat = 0.0;
    double acc_con = 0.0;
    double acc_comb = 0.0;
};

inline std::string epoch_csv_header() { return "epoch,L_CE,L_CON,acc_cat,acc_con,acc_comb"; }

inline std::string epoch_csv_row(const EpochLog& e) {
    return std::to_string(e.epoch) + ',' + detail::format_double(e.category_loss) + ',' +
           detail::format_double(e.concept_loss) + ',' + detail::format_double(e.acc_cat) + ',' +
           detail::format_double(e.acc_con) + ',' + detail::format_double(e.acc_comb);
}

/// Predictions of a model over a dataset.
template <typename Model>
std::vector<Prediction> predict_all(const Model& model, const FeatureDataset& ds,
                                    double threshold) {
    using T = typename Model::scalar_type;
    std::vector<Prediction> out;
    out.reserve(ds.size());
    std::vector<T> x(ds.width);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto row = ds.row(i);
        std::transform(row.begin(), row.end(), x.begin(), [](double v) { return static_cast<T>(v); });
        out.push_back(model.predict(x, threshold));
    }
    return out;
}

inline std::vector<EvalRecord> to_records(std::span<const Prediction> preds) {
    std::vector<EvalRecord> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back({p.category_id, p.chain});
    return out;
}

template <typename Model>
MetricsReport evaluate_model(const Model& model, const FeatureDataset& ds,
                             const CondensedHierarchy& h, double threshold) {
    const auto records = to_records(predict_all(model, ds, threshold));
    return evaluate(records, ds.labels, h);
}

namespace detail {

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
    threads = std::min(std::max<std::size_t>(threads, 1), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i, 0);
        return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += threads) body(i, w);
        });
    }
}

}  // namespace detail

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch training over a shuffled (seeded) order. During the first
/// `stage_epochs` epochs only concept blocks are updated. Each epoch logs the
/// mean training losses and the accuracies on `heldout` (or on the training
/// set when no held-out set is given).
template <typename Model>
std::vector<EpochLog> train(Model& model, const FeatureDataset& data,
                            const FeatureDataset* heldout, const CondensedHierarchy& h,
                            const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
    using T = typename Model::scalar_type;
    const auto& topo = model.topology();
    if (data.width != topo.input_width() || (heldout && heldout->width != topo.input_width())) {
        throw DimensionError("dataset width " + std::to_string(data.width) +
                             " does not match the head input width " +
                             std::to_string(topo.input_width()));
    }
    if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    const std::size_t n = data.size();
    const std::size_t p = model.values().size();

    std::vector<T> features(data.features.size());
    std::transform(data.features.begin(), data.features.end(), features.begin(),
                   [](double v) { return static_cast<T>(v); });
    std::vector<std::size_t> labels(n);
    std::vector<ConceptTarget> targets(topo.category_count());
    for (std::size_t j = 0; j < topo.category_count(); ++j) {
        targets[j] = concept_targets(h, topo.category_ids()[j]);
    }
    for (std::size_t i = 0; i < n; ++i) labels[i] = topo.category_index(data.labels[i]);

    const auto mask = model.concept_mask();
    OptimizerState<T> opt(cfg.optimizer, p);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::vector<T> grad(p);
    std::vector<std::vector<T>> scratch;
    std::vector<LossParts<T>> losses;
    std::vector<EpochLog> log;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        opt.begin_epoch(epoch);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        const bool stage_one = epoch < cfg.stage_epochs;
        double sum_ce = 0.0;
        double sum_con = 0.0;

        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, n - start);
            const T scale = T(1) / static_cast<T>(b);
            std::fill(grad.begin(), grad.end(), T(0));
            losses.assign(b, {});
            auto example = [&](std::size_t k) {
                const auto i = order[start + k];
                return std::span<const T>(features).subspan(i * data.width, data.width);
            };
            const auto& m = model;
            if (cfg.threads <= 1) {
                for (std::size_t k = 0; k < b; ++k) {
                    const auto i = order[start + k];
                    losses[k] = m.accumulate(example(k), labels[i], targets[labels[i]], cfg.loss,
                                             scale, grad);
                }
            } else if (cfg.deterministic) {
                scratch.resize(b);
                detail::parallel_for(b, cfg.threads, [&](std::size_t k, std::size_t) {
                    scratch[k].assign(p, T(0));
                    const auto i = order[start + k];
                    losses[k] = m.accumulate(example(k), labels[i], targets[labels[i]], cfg.loss,
                                             scale, scratch[k]);
                });
                for (std::size_t k = 0; k < b; ++k) {
                    for (std::size_t q = 0; q < p; ++q) grad[q] += scratch[k][q];
                }
            } else {
                const auto workers = std::min(cfg.threads, b);
                scratch.assign(workers, std::vector<T>(p, T(0)));
                detail::parallel_for(b, workers, [&](std::size_t k, std::size_t w) {
                    const auto i = order[start + k];
                    losses[k] = m.accumulate(example(k), labels[i], targets[labels[i]], cfg.loss,
                                             scale, scratch[w]);
                });
                for (const auto& s : scratch) {
                    for (std::size_t q = 0; q < p; ++q) grad[q] += s[q];
                }
            }
            for (const auto& l : losses) {
                sum_ce += static_cast<double>(l.category);
                sum_con += static_cast<double>(l.concept_part);
            }
            optimizer_step<T>(model.values(), grad, opt,
                              stage_one ? std::span<const std::uint8_t>(mask)
                                        : std::span<const std::uint8_t>{});
        }

        EpochLog e;
        e.epoch = epoch + 1;
        e.category_loss = n ? sum_ce / static_cast<double>(n) : 0.0;
        e.concept_loss = n ? sum_con / static_cast<double>(n) : 0.0;
        const auto report = evaluate_model(model, heldout ? *heldout : data, h, cfg.threshold);
        e.acc_cat = report.acc_cat;
        e.acc_con = report.acc_con;
        e.acc_comb = report.acc_comb;
        log.push_back(e);
        if (on_epoch) on_epoch(e);
    }
    return log;
}

}  // namespace mdhc

#endif  // MDHC_TRAINING_HPP_
