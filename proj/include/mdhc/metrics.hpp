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

#ifndef MDHC_METRICS_HPP_
#define MDHC_METRICS_HPP_

#include <algorithm>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdhc/error.hpp"
#include "mdhc/ontology.hpp"

namespace mdhc {

struct HierPR {
    double precision = 1.0;
    double recall = 1.0;
};

namespace detail {

struct ChainOverlap {
    std::size_t common = 0;
    std::size_t predicted = 0;
    std::size_t truth = 0;
    std::size_t unite() const { return predicted + truth - common; }
};

inline ChainOverlap overlap(const ChainSet& pred, const ChainSet& truth) {
    ChainSet a = pred;
    ChainSet b = truth;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    ChainSet both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    return {both.size(), a.size(), b.size()};
}

}  // namespace detail

/// Set-overlap precision and recall of two concept chains (root excluded).
/// An empty prediction has precision 1 only when the truth is empty too; an
/// empty truth always has recall 1.
inline HierPR hier_pr(const ChainSet& pred, const ChainSet& truth) {
    const auto o = detail::overlap(pred, truth);
    HierPR r;
    if (o.predicted == 0) {
        r.precision = o.truth == 0 ? 1.0 : 0.0;
    } else {
        r.precision = static_cast<double>(o.common) / static_cast<double>(o.predicted);
    }
    r.recall = o.truth == 0 ? 1.0 : static_cast<double>(o.common) / static_cast<double>(o.truth);
    return r;
}

struct EvalRecord {
    NodeId predicted_category = 0;
    ChainSet predicted_chain;
};

struct MetricsReport {
    std::size_t count = 0;
    double acc_cat = 0.0;
    double acc_con = 0.0;
    double acc_comb = 0.0;
    double mhp = 0.0;
    double mhr = 0.0;
    /// Mean LCA height over misclassified examples; 0 when there are none.
    double h_lca_mean = 0.0;
    bool h_lca_defined = false;
    std::size_t misclassified = 0;
    double n_diff = 0.0;
    double iou_concept = 0.0;
};

inline MetricsReport evaluate(std::span<const EvalRecord> predictions,
                              std::span<const NodeId> truths, const CondensedHierarchy& h) {
    if (predictions.size() != truths.size()) {
        throw LengthMismatchError("got " + std::to_string(predictions.size()) +
                                  " predictions for " + std::to_string(truths.size()) +
                                  " labels");
    }
    MetricsReport r;
    r.count = truths.size();
    if (r.count == 0) return r;

    std::size_t cat = 0;
    std::size_t con = 0;
    std::size_t comb = 0;
    std::size_t diff = 0;
    double sum_p = 0.0;
    double sum_r = 0.0;
    double sum_iou = 0.0;
    double sum_lca = 0.0;
    for (std::size_t i = 0; i < r.count; ++i) {
        const auto& pred = predictions[i];
        const auto truth_chain = ancestor_chain(h, truths[i]);
        const auto pr = hier_pr(pred.predicted_chain, truth_chain);
        const auto o = detail::overlap(pred.predicted_chain, truth_chain);
        const bool cat_ok = pred.predicted_category == truths[i];
        const bool con_ok = o.common == o.predicted && o.common == o.truth;
        cat += cat_ok;
        con += con_ok;
        comb += cat_ok && con_ok;
        sum_p += pr.precision;
        sum_r += pr.recall;
        sum_iou += o.unite() == 0 ? 1.0
                                  : static_cast<double>(o.common) / static_cast<double>(o.unite());
        if (ancestor_chain(h, pred.predicted_category) != truth_chain) ++diff;
        if (!cat_ok) {
            ++r.misclassified;
            sum_lca += lca(h, pred.predicted_category, truths[i]).height;
        }
    }
    const auto n = static_cast<double>(r.count);
    r.acc_cat = static_cast<double>(cat) / n;
    r.acc_con = static_cast<double>(con) / n;
    r.acc_comb = static_cast<double>(comb) / n;
    r.mhp = sum_p / n;
    r.mhr = sum_r / n;
    r.iou_concept = sum_iou / n;
    r.n_diff = static_cast<double>(diff) / n;
    r.h_lca_defined = r.misclassified > 0;
    r.h_lca_mean = r.h_lca_defined ? sum_lca / static_cast<double>(r.misclassified) : 0.0;
    return r;
}

inline nlohmann::json to_json(const MetricsReport& r) {
    return {{"count", r.count},
            {"acc_cat", r.acc_cat},
            {"acc_con", r.acc_con},
            {"acc_comb", r.acc_comb},
            {"mhp", r.mhp},
            {"mhr", r.mhr},
            {"h_lca_mean", r.h_lca_mean},
            {"h_lca_defined", r.h_lca_defined},
            {"misclassified", r.misclassified},
            {"n_diff", r.n_diff},
            {"iou_concept", r.iou_concept}};
}

/// Aligned table in percent, one row per (name, report).
inline std::string format_table(std::span<const std::pair<std::string, MetricsReport>> rows) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-12s %9s %9s %9s %9s %9s %7s %8s %9s\n", "Method",
                  "Acc_CAT", "Acc_CON", "Acc_COMB", "mhP", "mhR", "h_LCA", "N_diff", "IoU_CON");
    out += line;
    for (const auto& [name, r] : rows) {
        std::snprintf(line, sizeof line, "%-12s %9.2f %9.2f %9.2f %9.2f %9.2f %7.3f %8.2f %9.2f\n",
                      name.c_str(), 100 * r.acc_cat, 100 * r.acc_con, 100 * r.acc_comb,
                      100 * r.mhp, 100 * r.mhr, r.h_lca_mean, 100 * r.n_diff,
                      100 * r.iou_concept);
        out += line;
    }
    return out;
}

}  // namespace mdhc

#endif  // MDHC_METRICS_HPP_
