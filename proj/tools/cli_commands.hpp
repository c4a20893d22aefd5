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
#ifndef MDHC_TOOLS_CLI_COMMANDS_HPP_
#define MDHC_TOOLS_CLI_COMMANDS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mdhc/mdhc.hpp"

namespace mdhc::cli {

namespace fs = std::filesystem;

/// Bad or inconsistent flags; reported with exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) throw FormatError("failed writing " + path.string());
}

inline CondensedHierarchy load_hierarchy(const fs::path& path) {
    return CondensedHierarchy::from_tree(parse_ontology(read_text(path)));
}

inline FeatureFormat parse_format(const std::string& s) {
    if (s == "bin") return FeatureFormat::Binary;
    if (s == "csv") return FeatureFormat::Csv;
    throw UsageError("unknown format '" + s + "' (expected bin or csv)");
}

inline std::size_t default_threads() {
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Number of concepts at each depth below the root.
inline std::vector<std::size_t> concepts_per_level(const CondensedHierarchy& h) {
    std::vector<std::size_t> levels(static_cast<std::size_t>(h.height()), 0);
    for (auto c : h.concepts()) ++levels[static_cast<std::size_t>(h.depth(c) - 1)];
    return levels;
}

// ---------------------------------------------------------------------------
// condense

struct CondenseOptions {
    fs::path input;
    fs::path output;
    fs::path log;  // defaults to <output>.log.json
    double tau = 0.9;
    std::size_t delta = 20;
    bool count_all_nodes = false;
};

inline int cmd_condense(const CondenseOptions& o, std::ostream& out) {
    const auto ontology = parse_ontology(read_text(o.input));
    const auto h = condense(ontology, o.tau, o.delta,
                            o.count_all_nodes ? DescendantCount::AllNodes
                                              : DescendantCount::CategoryLeaves);
    write_text(o.output, format_hierarchy(h));
    const auto log_path = o.log.empty() ? fs::path(o.output.string() + ".log.json") : o.log;
    write_text(log_path, removal_log_json(h).dump(2) + "\n");
    out << "concepts (M): " << h.concepts().size() << '\n';
    out << "categories (N): " << h.categories().size() << '\n';
    out << "height (rho): " << h.height() << '\n';
    const auto levels = concepts_per_level(h);
    for (std::size_t l = 0; l < levels.size(); ++l) {
        out << "  level " << l + 1 << ": " << levels[l] << " concepts\n";
    }
    out << "removed: " << h.log().removed.size() << ", dropped edges: "
        << h.log().dropped_edges.size() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gen-synth

struct GenSynthOptions {
    fs::path hierarchy;
    fs::path features;
    fs::path labels;
    std::string format = "bin";
    std::size_t d0 = 64;
    std::size_t per_category = 100;
    double sigma = 0.15;
    double level_gain = 1.0;
    std::uint64_t seed = 1;
    /// When set, the train part goes to features/labels and the rest to the
    /// test paths.
    std::optional<double> split;
    fs::path test_features;
    fs::path test_labels;
};

inline int cmd_gen_synth(const GenSynthOptions& o, std::ostream& out) {
    const auto fmt = parse_format(o.format);
    if (o.split && o.test_features.empty()) {
        throw UsageError("--split needs --test-features");
    }
    if (o.split && fmt == FeatureFormat::Binary && o.test_labels.empty()) {
        throw UsageError("--split with --format bin needs --test-labels");
    }
    if (fmt == FeatureFormat::Binary && o.labels.empty()) {
        throw UsageError("--format bin needs --labels");
    }
    const auto h = load_hierarchy(o.hierarchy);
    const auto ds = gen_synthetic(h, o.d0, o.per_category, o.sigma, o.seed, o.level_gain);
    if (o.split) {
        const auto [train, test] = split(ds, *o.split, o.seed);
        save_dataset(train, o.features, o.labels, fmt);
        save_dataset(test, o.test_features, o.test_labels, fmt);
        out << "wrote " << train.size() << " train and " << test.size() << " test examples, d0 "
            << ds.width << '\n';
    } else {
        save_dataset(ds, o.features, o.labels, fmt);
        out << "wrote " << ds.size() << " examples, d0 " << ds.width << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    fs::path hierarchy;
    fs::path features;
    fs::path labels;
    fs::path heldout_features;
    fs::path heldout_labels;
    std::string format = "bin";
    fs::path checkpoint;
    fs::path epoch_csv;  // defaults to <checkpoint>.epochs.csv
    bool epoch_checkpoints = false;
    std::string model = "md";
    std::string precision = "f64";
    std::string loss = "bce";
    double lambda = 5.0;
    std::size_t mu = 2;
    std::size_t epochs = 20;
    std::size_t stage_epochs = 2;
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    double weight_decay = 1e-4;
    double threshold = 0.5;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    bool deterministic = true;
};

/// Applies the keys of a JSON training config, skipping any option given on
/// the command line.
inline void apply_train_config(TrainOptions& o, const nlohmann::json& j,
                               const std::set<std::string>& explicit_flags) {
    static const std::set<std::string> known{
        "model",   "precision",     "loss",         "lambda",     "mu",
        "epochs",  "stage_epochs",  "batch_size",   "learning_rate", "weight_decay",
        "threshold", "seed",        "threads",      "deterministic"};
    if (!j.is_object()) throw UsageError("training config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw UsageError("unknown training config key '" + key + "'");
        if (explicit_flags.contains(key)) continue;
        try {
            if (key == "model") o.model = value.get<std::string>();
            else if (key == "precision") o.precision = value.get<std::string>();
            else if (key == "loss") o.loss = value.get<std::string>();
            else if (key == "lambda") o.lambda = value.get<double>();
            else if (key == "mu") o.mu = value.get<std::size_t>();
            else if (key == "epochs") o.epochs = value.get<std::size_t>();
            else if (key == "stage_epochs") o.stage_epochs = value.get<std::size_t>();
            else if (key == "batch_size") o.batch_size = value.get<std::size_t>();
            else if (key == "learning_rate") o.learning_rate = value.get<double>();
            else if (key == "weight_decay") o.weight_decay = value.get<double>();
            else if (key == "threshold") o.threshold = value.get<double>();
            else if (key == "seed") o.seed = value.get<std::uint64_t>();
            else if (key == "threads") o.threads = value.get<std::size_t>();
            else if (key == "deterministic") o.deterministic = value.get<bool>();
        } catch (const nlohmann::json::exception&) {
            throw UsageError("training config key '" + key + "' has the wrong type");
        }
    }
}

inline ConceptLoss parse_loss(const std::string& s) {
    if (s == "bce") return ConceptLoss::BinaryCrossEntropy;
    if (s == "mse") return ConceptLoss::MeanSquaredError;
    throw UsageError("unknown loss '" + s + "' (expected bce or mse)");
}

inline TrainConfig to_train_config(const TrainOptions& o) {
    if (o.model != "md" && o.model != "flat") throw UsageError("--model must be md or flat");
    if (o.precision != "f32" && o.precision != "f64") throw UsageError("--precision must be f32 or f64");
    if (o.batch_size == 0) throw UsageError("--batch-size must be positive");
    if (o.mu == 0) throw UsageError("--mu must be positive");
    if (!o.heldout_labels.empty() && o.heldout_features.empty()) {
        throw UsageError("--heldout-labels needs --heldout-features");
    }
    if (!o.heldout_features.empty() && o.heldout_labels.empty() &&
        parse_format(o.format) == FeatureFormat::Binary) {
        throw UsageError("--heldout-features in bin format needs --heldout-labels");
    }
    if (o.labels.empty() && parse_format(o.format) == FeatureFormat::Binary) {
        throw UsageError("--format bin needs --labels");
    }
    TrainConfig cfg;
    cfg.loss = {o.lambda, parse_loss(o.loss)};
    cfg.optimizer.learning_rate = o.learning_rate;
    cfg.optimizer.weight_decay = o.weight_decay;
    cfg.batch_size = o.batch_size;
    cfg.epochs = o.epochs;
    cfg.stage_epochs = o.stage_epochs;
    cfg.seed = o.seed;
    cfg.threads = std::max<std::size_t>(1, o.threads);
    cfg.deterministic = o.deterministic;
    cfg.threshold = o.threshold;
    return cfg;
}

namespace detail {

template <typename Model>
void run_training(Model& model, const FeatureDataset& data, const FeatureDataset* heldout,
                  const CondensedHierarchy& h, const TrainConfig& cfg, const TrainOptions& o,
                  std::ostream& out) {
    const auto csv_path =
        o.epoch_csv.empty() ? fs::path(o.checkpoint.string() + ".epochs.csv") : o.epoch_csv;
    std::ofstream csv(csv_path);
    if (!csv) throw FormatError("cannot write " + csv_path.string());
    csv << epoch_csv_header() << '\n';
    out << epoch_csv_header() << '\n';
    train(model, data, heldout, h, cfg, [&](const EpochLog& e) {
        const auto row = epoch_csv_row(e);
        csv << row << '\n';
        out << row << '\n';
        if (o.epoch_checkpoints) {
            save_checkpoint(o.checkpoint.string() + ".epoch" + std::to_string(e.epoch), model);
        }
    });
    if (!csv) throw FormatError("failed writing " + csv_path.string());
    save_checkpoint(o.checkpoint, model);
}

template <typename T>
void train_precision(const TrainOptions& o, const TrainConfig& cfg, const CondensedHierarchy& h,
                     const FeatureDataset& data, const FeatureDataset* heldout, std::ostream& out) {
    auto topo = build_topology(h, data.width, o.mu);
    if (o.model == "flat") {
        FlatModel<T> model(std::move(topo), o.seed);
        run_training(model, data, heldout, h, cfg, o, out);
    } else {
        auto params = init_parameters<T>(topo, o.seed);
        MultilayerModel<T> model(std::move(topo), std::move(params));
        run_training(model, data, heldout, h, cfg, o, out);
    }
}

}  // namespace detail

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
    const auto cfg = to_train_config(o);
    const auto fmt = parse_format(o.format);
    const auto h = load_hierarchy(o.hierarchy);
    const auto data = load_dataset(o.features, o.labels, h, fmt);
    std::optional<FeatureDataset> heldout;
    if (!o.heldout_features.empty()) {
        heldout = load_dataset(o.heldout_features, o.heldout_labels, h, fmt);
    }
    const FeatureDataset* held = heldout ? &*heldout : nullptr;
    if (o.precision == "f32") {
        detail::train_precision<float>(o, cfg, h, data, held, out);
    } else {
        detail::train_precision<double>(o, cfg, h, data, held, out);
    }
    out << "checkpoint: " << o.checkpoint.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / predict

struct EvalOptions {
    fs::path checkpoint;
    fs::path predictions;  // alternative to a checkpoint: a predict output file
    fs::path hierarchy;
    fs::path features;
    fs::path labels;
    std::string format = "bin";
    std::string mode = "md";
    double threshold = 0.5;
    std::size_t threads = 1;
    fs::path json_out;
};

namespace detail {

inline std::vector<Prediction> predict_checkpoint(const AnyModel& model, const FeatureDataset& ds,
                                                  const std::string& mode, double threshold,
                                                  std::size_t threads) {
    const std::size_t n = ds.ids.size();
    std::vector<Prediction> preds(n);
    if (mode == "flat") {
        const auto* flat = std::get_if<FlatModel<double>>(&model);
        if (!flat) throw UsageError("--mode flat needs a flat checkpoint");
        mdhc::detail::parallel_for(n, threads, [&](std::size_t i, std::size_t) {
            preds[i] = flat->predict(ds.row(i), threshold);
        });
        return preds;
    }
    const auto* md = std::get_if<MultilayerModel<double>>(&model);
    if (!md) throw UsageError("--mode " + mode + " needs a multilayer checkpoint");
    if (mode == "md") {
        mdhc::detail::parallel_for(n, threads, [&](std::size_t i, std::size_t) {
            preds[i] = md->predict(ds.row(i), threshold);
        });
    } else if (mode == "pragg") {
        mdhc::detail::parallel_for(n, threads, [&](std::size_t i, std::size_t) {
            const auto probs = md->category_probs(ds.row(i));
            preds[i] = decode_pragg<double>(probs, md->topology(), threshold);
        });
    } else {
        throw UsageError("unknown mode '" + mode + "' (expected md, flat or pragg)");
    }
    return preds;
}

/// Label-free loading for prediction: CSV carries labels inline; binary
/// features may come without a label file.
inline FeatureDataset load_unlabelled(const fs::path& features, const fs::path& labels,
                                      const CondensedHierarchy& h, FeatureFormat fmt) {
    if (fmt == FeatureFormat::Csv || !labels.empty()) return load_dataset(features, labels, h, fmt);
    std::ifstream in(features, std::ios::binary);
    if (!in) throw FormatError("cannot open " + features.string());
    return read_features_binary(in);
}

}  // namespace detail

/// One line per example: `id,category,prob,chain` where the chain is
/// `concept:score` pairs joined by ';'.
inline std::string format_predictions(const FeatureDataset& ds, std::span<const Prediction> preds) {
    std::ostringstream s;
    s << "id,category,prob,chain\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        s << ds.ids[i] << ',' << preds[i].category_id << ','
          << mdhc::detail::format_double(preds[i].category_prob) << ',';
        for (std::size_t k = 0; k < preds[i].chain.size(); ++k) {
            if (k) s << ';';
            s << preds[i].chain[k] << ':' << mdhc::detail::format_double(preds[i].chain_scores[k]);
        }
        s << '\n';
    }
    return s.str();
}

struct PredictionRow {
    std::int64_t id = 0;
    EvalRecord record;
};

inline std::vector<PredictionRow> parse_predictions(const std::string& text) {
    std::vector<PredictionRow> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "id,category,prob,chain") throw FormatError("prediction file has a bad header");
            continue;
        }
        const auto cells = mdhc::detail::split_csv(line);
        if (cells.size() != 4) {
            throw FormatError("line " + std::to_string(line_no) + ": expected 4 columns");
        }
        PredictionRow row;
        row.id = mdhc::detail::parse_number<std::int64_t>(cells[0], line_no);
        row.record.predicted_category = mdhc::detail::parse_number<NodeId>(cells[1], line_no);
        std::string_view chain = cells[3];
        while (!chain.empty()) {
            const auto end = std::min(chain.find(';'), chain.size());
            const auto item = chain.substr(0, end);
            const auto colon = item.find(':');
            row.record.predicted_chain.push_back(
                mdhc::detail::parse_number<NodeId>(item.substr(0, colon), line_no));
            chain.remove_prefix(std::min(end + 1, chain.size()));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void print_report(const std::string& name, const MetricsReport& r, std::ostream& out) {
    const std::vector<std::pair<std::string, MetricsReport>> rows{{name, r}};
    out << format_table(rows);
    out << to_json(r).dump() << '\n';
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
    if (o.checkpoint.empty() == o.predictions.empty()) {
        throw UsageError("give exactly one of --checkpoint and --predictions");
    }
    const auto h = load_hierarchy(o.hierarchy);
    MetricsReport report;
    std::string name = o.mode;
    if (!o.predictions.empty()) {
        if (o.labels.empty()) throw UsageError("--predictions needs --labels");
        const auto rows = parse_predictions(read_text(o.predictions));
        FeatureDataset truth;
        std::ifstream lin(o.labels);
        if (!lin) throw FormatError("cannot open " + o.labels.string());
        truth.ids.clear();
        read_labels_csv(lin, truth);
        std::map<std::int64_t, NodeId> by_id;
        for (std::size_t i = 0; i < truth.size(); ++i) by_id[truth.ids[i]] = truth.labels[i];
        std::vector<EvalRecord> records;
        std::vector<NodeId> labels;
        for (const auto& row : rows) {
            auto it = by_id.find(row.id);
            if (it == by_id.end()) throw LengthMismatchError("no label for example " + std::to_string(row.id));
            records.push_back(row.record);
            labels.push_back(it->second);
        }
        if (records.size() != truth.size()) {
            throw LengthMismatchError(std::to_string(records.size()) + " predictions for " +
                                      std::to_string(truth.size()) + " labels");
        }
        report = evaluate(records, labels, h);
        name = "file";
    } else {
        const auto model = load_checkpoint(o.checkpoint, h);
        const auto ds = load_dataset(o.features, o.labels, h, parse_format(o.format));
        const auto preds = detail::predict_checkpoint(model, ds, o.mode, o.threshold,
                                                      std::max<std::size_t>(1, o.threads));
        report = evaluate(to_records(preds), ds.labels, h);
    }
    print_report(name, report, out);
    if (!o.json_out.empty()) write_text(o.json_out, to_json(report).dump(2) + "\n");
    return kExitOk;
}

struct PredictOptions {
    fs::path checkpoint;
    fs::path hierarchy;
    fs::path features;
    fs::path labels;
    fs::path output;  // stdout when empty
    std::string format = "bin";
    std::string mode = "md";
    double threshold = 0.5;
    std::size_t threads = 1;
};

inline int cmd_predict(const PredictOptions& o, std::ostream& out) {
    const auto h = load_hierarchy(o.hierarchy);
    const auto model = load_checkpoint(o.checkpoint, h);
    const auto ds = detail::load_unlabelled(o.features, o.labels, h, parse_format(o.format));
    const auto preds = detail::predict_checkpoint(model, ds, o.mode, o.threshold,
                                                  std::max<std::size_t>(1, o.threads));
    const auto text = format_predictions(ds, preds);
    if (o.output.empty()) {
        out << text;
    } else {
        write_text(o.output, text);
        out << "wrote " << preds.size() << " predictions to " << o.output.string() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOptions {
    std::uint64_t seed = 1;
    std::size_t d0 = 16;
    std::size_t concepts = 6;
    std::size_t categories = 12;
    std::size_t levels = 3;
    std::size_t mu = 2;
    double eps = 1e-6;
    std::string precision = "f64";
    /// Test hook: perturb the analytic gradient of this block.
    std::optional<std::size_t> corrupt_block;
};

struct GradcheckCase {
    std::string loss;
    double lambda = 0.0;
    std::vector<double> block_error;
};

/// Analytic gradients (in the requested precision) against central
/// differences of the 64-bit loss.
inline std::vector<GradcheckCase> gradient_check(const GradcheckOptions& o) {
    const auto h = random_tree(o.concepts, o.categories, o.levels, o.seed);
    const auto t = build_topology(h, o.d0, o.mu);
    auto p = init_parameters<double>(t, o.seed);
    std::mt19937_64 rng(o.seed + 1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : p.values()) v += 0.05 * n(rng);
    std::vector<double> x(o.d0);
    for (auto& v : x) v = n(rng);
    const auto label = static_cast<std::size_t>(rng() % t.category_count());
    const auto targets = concept_targets(h, t.category_ids()[label]);
    if (o.corrupt_block && *o.corrupt_block >= p.layout().blocks().size()) {
        throw UsageError("--corrupt-block out of range");
    }

    std::vector<GradcheckCase> cases;
    for (auto kind : {ConceptLoss::BinaryCrossEntropy, ConceptLoss::MeanSquaredError}) {
        for (double lambda : {0.0, 5.0}) {
            const LossConfig cfg{lambda, kind};
            std::vector<double> analytic(p.values().size());
            if (o.precision == "f32") {
                const auto pf = p.cast<float>();
                const std::vector<float> xf(x.begin(), x.end());
                const auto g = backward(forward(pf, t, std::span<const float>(xf)), t, pf, label, targets, cfg);
                std::copy(g.values().begin(), g.values().end(), analytic.begin());
            } else {
                const auto g = backward(forward(p, t, std::span<const double>(x)), t, p, label, targets, cfg);
                std::copy(g.values().begin(), g.values().end(), analytic.begin());
            }
            if (o.corrupt_block) {
                const auto& info = p.layout().blocks()[*o.corrupt_block];
                for (std::size_t i = 0; i < info.size(); ++i) analytic[info.offset + i] += 1.0;
            }
            // The reference loss runs in extended precision so that rounding
            // stays far below the truncation error of the central difference.
            auto q = p.cast<long double>();
            const std::vector<long double> xl(x.begin(), x.end());
            const auto eps = static_cast<long double>(o.eps);
            auto loss = [&] {
                return combined_loss(forward(q, t, std::span<const long double>(xl)), label, targets, cfg);
            };
            std::vector<double> numeric(p.values().size());
            for (std::size_t i = 0; i < numeric.size(); ++i) {
                const long double keep = q.values()[i];
                q.values()[i] = keep + eps;
                const long double up = loss();
                q.values()[i] = keep - eps;
                const long double down = loss();
                q.values()[i] = keep;
                numeric[i] = static_cast<double>((up - down) / (2.0L * eps));
            }
            GradcheckCase c{kind == ConceptLoss::BinaryCrossEntropy ? "bce" : "mse", lambda, {}};
            for (const auto& info : p.layout().blocks()) {
                double diff = 0.0, na = 0.0, nn = 0.0;
                for (std::size_t i = info.offset; i < info.offset + info.size(); ++i) {
                    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
                    na += analytic[i] * analytic[i];
                    nn += numeric[i] * numeric[i];
                }
                c.block_error.push_back(std::sqrt(diff) / std::max(std::sqrt(na) + std::sqrt(nn), 1e-8));
            }
            cases.push_back(std::move(c));
        }
    }
    return cases;
}

inline int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out) {
    if (o.precision != "f32" && o.precision != "f64") throw UsageError("--precision must be f32 or f64");
    const double tolerance = o.precision == "f32" ? 1e-2 : 1e-5;
    const auto h = random_tree(o.concepts, o.categories, o.levels, o.seed);
    const auto t = build_topology(h, o.d0, o.mu);
    const ParameterLayout layout(t);
    const auto cases = gradient_check(o);
    std::vector<double> worst(layout.blocks().size(), 0.0);
    for (const auto& c : cases) {
        for (std::size_t b = 0; b < worst.size(); ++b) worst[b] = std::max(worst[b], c.block_error[b]);
    }
    std::size_t failed = 0;
    out << "block                unit  target  size   max_rel_err\n";
    for (std::size_t b = 0; b < worst.size(); ++b) {
        const auto& info = layout.blocks()[b];
        char line[160];
        std::snprintf(line, sizeof line, "%-20s %4zu  %6zu  %5zu  %.3e%s\n",
                      std::string(block_kind_name(info.kind)).c_str(), info.unit, info.target,
                      info.size(), worst[b], worst[b] <= tolerance ? "" : "  FAIL");
        out << line;
        if (worst[b] > tolerance) ++failed;
    }
    const double overall = worst.empty() ? 0.0 : *std::max_element(worst.begin(), worst.end());
    out << "precision " << o.precision << ", tolerance " << tolerance << ", max relative error "
        << overall << '\n';
    if (failed) {
        for (std::size_t b = 0; b < worst.size(); ++b) {
            if (worst[b] <= tolerance) continue;
            const auto& info = layout.blocks()[b];
            out << "gradient check failed in block " << b << " (" << block_kind_name(info.kind)
                << " of unit " << info.unit << ")\n";
        }
        return kExitFailure;
    }
    out << "gradient check passed\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// paramcount

struct ParamcountOptions {
    fs::path hierarchy;
    std::size_t d0 = 2048;
    std::size_t mu = 2;
    bool json = false;
};

inline int cmd_paramcount(const ParamcountOptions& o, std::ostream& out) {
    const auto h = load_hierarchy(o.hierarchy);
    const auto t = build_topology(h, o.d0, o.mu);
    const auto r = count_parameters(t);
    std::map<std::string, std::size_t> by_kind;
    for (const auto& b : r.per_block) by_kind[std::string(block_kind_name(b.kind))] += b.count;
    const double ratio = static_cast<double>(r.total) / static_cast<double>(r.flat_total);
    if (o.json) {
        nlohmann::json j{{"total", r.total},
                         {"flat_total", r.flat_total},
                         {"ratio", ratio},
                         {"per_kind", by_kind},
                         {"M", t.concept_count()},
                         {"N", t.category_count()},
                         {"rho", t.height()}};
        if (r.balanced_arity) {
            j["balanced_arity"] = *r.balanced_arity;
            j["bound"] = *r.bound;
            j["within_bound"] = r.within_bound;
        }
        out << j.dump(2) << '\n';
        return kExitOk;
    }
    out << "d0 " << o.d0 << ", mu " << o.mu << ", M " << t.concept_count() << ", N "
        << t.category_count() << ", rho " << t.height() << '\n';
    for (const auto& [kind, count] : by_kind) {
        out << "  " << std::left << std::setw(16) << kind << count << '\n';
    }
    out << "total " << r.total << '\n';
    out << "flat head (d0*N + N) " << r.flat_total << '\n';
    out << "ratio " << ratio << '\n';
    if (r.balanced_arity) {
        out << "balanced arity " << *r.balanced_arity << ", bound mu*d0*(N + rho + a/(a-1)) = "
            << *r.bound << (r.within_bound ? " (within)" : " (exceeded)") << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect

struct InspectOptions {
    fs::path hierarchy;
    fs::path checkpoint;
    bool tree = false;
};

inline void print_tree(const CondensedHierarchy& h, NodeId id, int indent, std::ostream& out) {
    out << std::string(static_cast<std::size_t>(2 * indent), ' ') << id << ' ' << h.node(id).name;
    if (!h.is_category(id)) out << " [eta " << h.descendant_count(id) << ']';
    out << '\n';
    for (auto c : h.children(id)) {
        if (!h.is_category(c)) print_tree(h, c, indent + 1, out);
    }
}

inline int cmd_inspect(const InspectOptions& o, std::ostream& out) {
    const auto h = load_hierarchy(o.hierarchy);
    out << "nodes " << h.size() << ", concepts (M) " << h.concepts().size() << ", categories (N) "
        << h.categories().size() << ", height (rho) " << h.height() << '\n';
    const auto levels = concepts_per_level(h);
    for (std::size_t l = 0; l < levels.size(); ++l) {
        out << "  level " << l + 1 << ": " << levels[l] << " concepts\n";
    }
    if (o.tree) print_tree(h, h.root(), 0, out);
    if (o.checkpoint.empty()) return kExitOk;

    const auto model = load_checkpoint(o.checkpoint, h);
    if (const auto* md = std::get_if<MultilayerModel<double>>(&model)) {
        const auto& p = md->parameters();
        out << "multilayer head, d0 " << md->topology().input_width() << ", mu "
            << md->topology().multiplier() << ", topology " << hash_hex(md->topology().hash())
            << ", " << p.values().size() << " parameters\n";
        for (std::size_t b = 0; b < p.layout().blocks().size(); ++b) {
            const auto& info = p.layout().blocks()[b];
            double norm = 0.0;
            for (double v : p.block(b)) norm += v * v;
            char line[160];
            std::snprintf(line, sizeof line, "  %-16s unit %3zu -> %3zu  size %7zu  norm %.6g\n",
                          std::string(block_kind_name(info.kind)).c_str(), info.unit, info.target,
                          info.size(), std::sqrt(norm));
            out << line;
        }
    } else {
        const auto& flat = std::get<FlatModel<double>>(model);
        out << "flat head, d0 " << flat.topology().input_width() << ", " << flat.outputs()
            << " outputs, " << flat.values().size() << " parameters\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// Command-line front end.

/// Parses argv and runs the chosen subcommand. Every option also reads an
/// MDHC_<NAME> environment variable (flags win).
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"mdhc: hierarchical concept heads over precomputed features", "mdhc"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "mdhc 1.0.0");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    auto env = [](CLI::Option* opt) {
        const auto& longs = opt->get_lnames();
        const std::string name = longs.empty() ? opt->get_name() : longs.front();
        std::string var = "MDHC_";
        for (char c : name) var += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        opt->envname(var);
        return opt;
    };

    CondenseOptions condense_o;
    auto* condense_cmd = app.add_subcommand("condense", "Condense an ontology into a tree");
    env(condense_cmd->add_option("--input,-i", condense_o.input, "Ontology file")->required());
    env(condense_cmd->add_option("--output,-o", condense_o.output, "Condensed hierarchy file")->required());
    env(condense_cmd->add_option("--log", condense_o.log, "Removal log (JSON)"));
    env(condense_cmd->add_option("--tau", condense_o.tau, "Absorption ratio")->check(CLI::Range(0.0, 1.0))->capture_default_str());
    env(condense_cmd->add_option("--delta", condense_o.delta, "Minimum descendant count")->check(CLI::PositiveNumber)->capture_default_str());
    env(condense_cmd->add_flag("--count-all-nodes", condense_o.count_all_nodes, "Count every descendant instead of category leaves"));

    GenSynthOptions gen_o;
    std::string gen_split;
    auto* gen_cmd = app.add_subcommand("gen-synth", "Generate hierarchical Gaussian features");
    env(gen_cmd->add_option("--hierarchy", gen_o.hierarchy, "Hierarchy file")->required());
    env(gen_cmd->add_option("--features", gen_o.features, "Feature output")->required());
    env(gen_cmd->add_option("--labels", gen_o.labels, "Label output (bin format)"));
    env(gen_cmd->add_option("--format", gen_o.format, "bin or csv")->capture_default_str());
    env(gen_cmd->add_option("--d0", gen_o.d0, "Feature width")->capture_default_str());
    env(gen_cmd->add_option("--per-category", gen_o.per_category, "Examples per category")->capture_default_str());
    env(gen_cmd->add_option("--sigma", gen_o.sigma, "Noise standard deviation")->capture_default_str());
    env(gen_cmd->add_option("--level-gain", gen_o.level_gain, "Per-level scale")->capture_default_str());
    env(gen_cmd->add_option("--seed", gen_o.seed, "Random seed")->capture_default_str());
    auto* split_opt = env(gen_cmd->add_option("--split", gen_split, "Train fraction"));
    env(gen_cmd->add_option("--test-features", gen_o.test_features, "Test feature output"));
    env(gen_cmd->add_option("--test-labels", gen_o.test_labels, "Test label output"));

    TrainOptions train_o;
    std::string train_config;
    auto* train_cmd = app.add_subcommand("train", "Train a head and write a checkpoint");
    std::map<std::string, CLI::Option*> train_flags;
    env(train_cmd->add_option("--hierarchy", train_o.hierarchy, "Hierarchy file")->required());
    env(train_cmd->add_option("--features", train_o.features, "Feature file")->required());
    env(train_cmd->add_option("--labels", train_o.labels, "Label file (bin format)"));
    env(train_cmd->add_option("--heldout-features", train_o.heldout_features, "Held-out features"));
    env(train_cmd->add_option("--heldout-labels", train_o.heldout_labels, "Held-out labels"));
    env(train_cmd->add_option("--format", train_o.format, "bin or csv")->capture_default_str());
    env(train_cmd->add_option("--checkpoint,-o", train_o.checkpoint, "Checkpoint output")->required());
    env(train_cmd->add_option("--epoch-csv", train_o.epoch_csv, "Epoch log output"));
    env(train_cmd->add_flag("--epoch-checkpoints", train_o.epoch_checkpoints, "Also save <checkpoint>.epoch<k>"));
    env(train_cmd->add_option("--config", train_config, "JSON training config"));
    train_flags["model"] = env(train_cmd->add_option("--model", train_o.model, "md or flat")->capture_default_str());
    train_flags["precision"] = env(train_cmd->add_option("--precision", train_o.precision, "f64 or f32")->capture_default_str());
    train_flags["loss"] = env(train_cmd->add_option("--loss", train_o.loss, "bce or mse")->capture_default_str());
    train_flags["lambda"] = env(train_cmd->add_option("--lambda", train_o.lambda, "Concept loss weight")->capture_default_str());
    train_flags["mu"] = env(train_cmd->add_option("--mu", train_o.mu, "Hidden-size multiplier")->capture_default_str());
    train_flags["epochs"] = env(train_cmd->add_option("--epochs", train_o.epochs, "Epochs")->capture_default_str());
    train_flags["stage_epochs"] = env(train_cmd->add_option("--stage-epochs", train_o.stage_epochs, "Concept-only epochs")->capture_default_str());
    train_flags["batch_size"] = env(train_cmd->add_option("--batch-size", train_o.batch_size, "Mini-batch size")->capture_default_str());
    train_flags["learning_rate"] = env(train_cmd->add_option("--learning-rate", train_o.learning_rate, "Learning rate")->capture_default_str());
    train_flags["weight_decay"] = env(train_cmd->add_option("--weight-decay", train_o.weight_decay, "Weight decay")->capture_default_str());
    train_flags["threshold"] = env(train_cmd->add_option("--threshold", train_o.threshold, "Concept threshold")->capture_default_str());
    train_flags["seed"] = env(train_cmd->add_option("--seed", train_o.seed, "Random seed")->capture_default_str());
    train_o.threads = default_threads();
    train_flags["threads"] = env(train_cmd->add_option("--threads", train_o.threads, "Worker threads")->capture_default_str());
    train_flags["deterministic"] = env(train_cmd->add_option("--deterministic", train_o.deterministic, "Reduce gradients in example order")->capture_default_str());

    EvalOptions eval_o;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or a prediction file");
    env(eval_cmd->add_option("--checkpoint", eval_o.checkpoint, "Checkpoint"));
    env(eval_cmd->add_option("--predictions", eval_o.predictions, "Prediction file from predict"));
    env(eval_cmd->add_option("--hierarchy", eval_o.hierarchy, "Hierarchy file")->required());
    env(eval_cmd->add_option("--features", eval_o.features, "Feature file"));
    env(eval_cmd->add_option("--labels", eval_o.labels, "Label file"));
    env(eval_cmd->add_option("--format", eval_o.format, "bin or csv")->capture_default_str());
    env(eval_cmd->add_option("--mode", eval_o.mode, "md, flat or pragg")->capture_default_str());
    env(eval_cmd->add_option("--threshold", eval_o.threshold, "Concept threshold")->capture_default_str());
    eval_o.threads = default_threads();
    env(eval_cmd->add_option("--threads", eval_o.threads, "Worker threads"));
    env(eval_cmd->add_option("--json", eval_o.json_out, "Write the report as JSON"));

    PredictOptions predict_o;
    auto* predict_cmd = app.add_subcommand("predict", "Write per-example predictions");
    env(predict_cmd->add_option("--checkpoint", predict_o.checkpoint, "Checkpoint")->required());
    env(predict_cmd->add_option("--hierarchy", predict_o.hierarchy, "Hierarchy file")->required());
    env(predict_cmd->add_option("--features", predict_o.features, "Feature file")->required());
    env(predict_cmd->add_option("--labels", predict_o.labels, "Label file; supplies example ids"));
    env(predict_cmd->add_option("--output,-o", predict_o.output, "Output file (default stdout)"));
    env(predict_cmd->add_option("--format", predict_o.format, "bin or csv")->capture_default_str());
    env(predict_cmd->add_option("--mode", predict_o.mode, "md, flat or pragg")->capture_default_str());
    env(predict_cmd->add_option("--threshold", predict_o.threshold, "Concept threshold")->capture_default_str());
    predict_o.threads = default_threads();
    env(predict_cmd->add_option("--threads", predict_o.threads, "Worker threads"));

    GradcheckOptions grad_o;
    std::size_t corrupt = 0;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
    env(grad_cmd->add_option("--seed", grad_o.seed, "Random seed")->capture_default_str());
    env(grad_cmd->add_option("--d0", grad_o.d0, "Feature width")->capture_default_str());
    env(grad_cmd->add_option("--concepts", grad_o.concepts, "Concepts")->capture_default_str());
    env(grad_cmd->add_option("--categories", grad_o.categories, "Categories")->capture_default_str());
    env(grad_cmd->add_option("--levels", grad_o.levels, "Concept levels")->capture_default_str());
    env(grad_cmd->add_option("--mu", grad_o.mu, "Hidden-size multiplier")->capture_default_str());
    env(grad_cmd->add_option("--eps", grad_o.eps, "Finite-difference step")->capture_default_str());
    env(grad_cmd->add_option("--precision", grad_o.precision, "f64 or f32")->capture_default_str());
    auto* corrupt_opt = env(grad_cmd->add_option("--corrupt-block", corrupt, "Test hook")->group(""));

    ParamcountOptions count_o;
    auto* count_cmd = app.add_subcommand("paramcount", "Count head parameters");
    env(count_cmd->add_option("--hierarchy", count_o.hierarchy, "Hierarchy file")->required());
    env(count_cmd->add_option("--d0", count_o.d0, "Feature width")->capture_default_str());
    env(count_cmd->add_option("--mu", count_o.mu, "Hidden-size multiplier")->capture_default_str());
    env(count_cmd->add_flag("--json", count_o.json, "JSON output"));

    InspectOptions inspect_o;
    auto* inspect_cmd = app.add_subcommand("inspect", "Summarise a hierarchy or checkpoint");
    env(inspect_cmd->add_option("--hierarchy", inspect_o.hierarchy, "Hierarchy file")->required());
    env(inspect_cmd->add_option("--checkpoint", inspect_o.checkpoint, "Checkpoint"));
    env(inspect_cmd->add_flag("--tree", inspect_o.tree, "Print the concept tree"));

    // Shared flags accepted by every subcommand for uniform scripting.
    bool deterministic_unused = true;
    for (auto* cmd : {condense_cmd, gen_cmd, eval_cmd, predict_cmd, grad_cmd, count_cmd, inspect_cmd}) {
        if (!cmd->get_option_no_throw("--deterministic")) {
            cmd->add_option("--deterministic", deterministic_unused, "Accepted for uniformity")->group("");
        }
    }

    try {
        std::vector<std::string> args;
        for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "mdhc 1.0.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*condense_cmd) return cmd_condense(condense_o, out);
        if (*gen_cmd) {
            if (*split_opt) {
                try {
                    gen_o.split = std::stod(gen_split);
                } catch (const std::exception&) {
                    throw UsageError("--split must be a number");
                }
                if (!(*gen_o.split > 0.0 && *gen_o.split < 1.0)) throw UsageError("--split must lie in (0, 1)");
            }
            return cmd_gen_synth(gen_o, out);
        }
        if (*train_cmd) {
            if (!train_config.empty()) {
                std::set<std::string> given;
                for (const auto& [key, opt] : train_flags) {
                    if (opt->count() > 0) {
                        given.insert(key);
                    }
                }
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(read_text(train_config));
                } catch (const nlohmann::json::parse_error& e) {
                    throw UsageError(std::string("bad training config: ") + e.what());
                }
                apply_train_config(train_o, j, given);
            }
            return cmd_train(train_o, out);
        }
        if (*eval_cmd) return cmd_eval(eval_o, out);
        if (*predict_cmd) return cmd_predict(predict_o, out);
        if (*grad_cmd) {
            if (*corrupt_opt) grad_o.corrupt_block = corrupt;
            return cmd_gradcheck(grad_o, out);
        }
        if (*count_cmd) return cmd_paramcount(count_o, out);
        if (*inspect_cmd) return cmd_inspect(inspect_o, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace mdhc::cli

#endif  // MDHC_TOOLS_CLI_COMMANDS_HPP_
