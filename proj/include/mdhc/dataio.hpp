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

#ifndef MDHC_DATAIO_HPP_
#define MDHC_DATAIO_HPP_

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdhc/error.hpp"
#include "mdhc/ontology.hpp"

namespace mdhc {

/// Precomputed feature vectors with their category labels.
struct FeatureDataset {
    std::size_t width = 0;          // d0
    std::vector<double> features;   // size() x width, row-major
    std::vector<NodeId> labels;     // category ids
    std::vector<std::int64_t> ids;  // example ids

    std::size_t size() const { return labels.size(); }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features).subspan(i * width, width);
    }

    /// Subset in the given order.
    FeatureDataset select(std::span<const std::size_t> rows) const {
        FeatureDataset out;
        out.width = width;
        for (auto r : rows) {
            auto x = row(r);
            out.features.insert(out.features.end(), x.begin(), x.end());
            out.labels.push_back(labels[r]);
            out.ids.push_back(ids[r]);
        }
        return out;
    }

    void validate(const CondensedHierarchy& h) const {
        if (features.size() != labels.size() * width || ids.size() != labels.size()) {
            throw FormatError("feature, label and id counts disagree");
        }
        for (std::size_t i = 0; i < features.size(); ++i) {
            if (!std::isfinite(features[i])) {
                throw NonFiniteError("non-finite feature in example " +
                                     std::to_string(ids[i / width]));
            }
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (!h.contains(labels[i]) || !h.is_category(labels[i])) {
                throw UnknownLabelError("example " + std::to_string(ids[i]) + ": label " +
                                        std::to_string(labels[i]) +
                                        " is not a category of the hierarchy");
            }
        }
    }
};

enum class FeatureFormat { Binary, Csv };
enum class FeatureDtype : std::uint32_t { F32 = 1, F64 = 2 };

namespace detail {

inline constexpr std::array<char, 4> kFeatureMagic{'M', 'D', 'F', 'V'};
inline constexpr std::uint32_t kFeatureVersion = 1;

template <typename U>
void write_le(std::ostream& out, U value) {
    static_assert(std::is_unsigned_v<U>);
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U read_le(std::istream& in) {
    std::array<unsigned char, sizeof(U)> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
        throw FormatError("unexpected end of binary file");
    }
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
}

inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_le<std::uint64_t>(in)); }

inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

template <typename V>
V parse_number(std::string_view s, std::size_t line_no) {
    V v{};
    s = trim(s);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError("line " + std::to_string(line_no) + ": bad number '" +
                          std::string(s) + "'");
    }
    return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    while (true) {
        const auto comma = line.find(',');
        out.push_back(line.substr(0, comma));
        if (comma == std::string_view::npos) break;
        line = line.substr(comma + 1);
    }
    return out;
}

}  // namespace detail

/// Binary features: "MDFV", u32 version, u64 count, u64 width, u32 dtype,
/// then row-major little-endian values. Labels travel separately.
inline void write_features_binary(std::ostream& out, const FeatureDataset& ds,
                                  FeatureDtype dtype = FeatureDtype::F64) {
    out.write(detail::kFeatureMagic.data(), 4);
    detail::write_le<std::uint32_t>(out, detail::kFeatureVersion);
    detail::write_le<std::uint64_t>(out, ds.size());
    detail::write_le<std::uint64_t>(out, ds.width);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dtype));
    for (double v : ds.features) {
        if (dtype == FeatureDtype::F64) {
            detail::write_f64(out, v);
        } else {
            detail::write_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
}

/// Reads binary features; labels are left empty and ids are 0..count-1.
inline FeatureDataset read_features_binary(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || magic != detail::kFeatureMagic) {
        throw FormatError("not a feature file (bad magic)");
    }
    if (const auto v = detail::read_le<std::uint32_t>(in); v != detail::kFeatureVersion) {
        throw FormatError("unsupported feature file version " + std::to_string(v));
    }
    FeatureDataset ds;
    const auto count = detail::read_le<std::uint64_t>(in);
    ds.width = detail::read_le<std::uint64_t>(in);
    const auto dtype = detail::read_le<std::uint32_t>(in);
    if (dtype != 1 && dtype != 2) throw FormatError("unknown dtype code " + std::to_string(dtype));
    ds.features.resize(count * ds.width);
    for (auto& v : ds.features) {
        v = dtype == 2 ? detail::read_f64(in)
                       : static_cast<double>(std::bit_cast<float>(detail::read_le<std::uint32_t>(in)));
    }
    ds.ids.resize(count);
    for (std::size_t i = 0; i < count; ++i) ds.ids[i] = static_cast<std::int64_t>(i);
    return ds;
}

/// Label file: header `id,label`, one row per example in feature order.
inline void write_labels_csv(std::ostream& out, const FeatureDataset& ds) {
    out << "id,label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) out << ds.ids[i] << ',' << ds.labels[i] << '\n';
}

inline void read_labels_csv(std::istream& in, FeatureDataset& ds) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::int64_t> ids;
    std::vector<NodeId> labels;
    while (std::getline(in, line)) {
        ++line_no;
        auto view = detail::trim(line);
        if (view.empty()) continue;
        if (line_no == 1) {
            if (view != "id,label") throw FormatError("label file must start with 'id,label'");
            continue;
        }
        auto cells = detail::split_csv(view);
        if (cells.size() != 2) throw FormatError("line " + std::to_string(line_no) + ": expected id,label");
        ids.push_back(detail::parse_number<std::int64_t>(cells[0], line_no));
        labels.push_back(detail::parse_number<NodeId>(cells[1], line_no));
    }
    if (labels.size() * ds.width != ds.features.size()) {
        throw FormatError("label file has " + std::to_string(labels.size()) +
                          " rows but the feature file holds " +
                          std::to_string(ds.width ? ds.features.size() / ds.width : 0) +
                          " examples");
    }
    ds.ids = std::move(ids);
    ds.labels = std::move(labels);
}

/// Single-file CSV: header `id,label,f0,...,f{d0-1}`. Values are written in
/// shortest round-trip form.
inline void write_dataset_csv(std::ostream& out, const FeatureDataset& ds) {
    out << "id,label";
    for (std::size_t k = 0; k < ds.width; ++k) out << ",f" << k;
    out << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.ids[i] << ',' << ds.labels[i];
        for (double v : ds.row(i)) out << ',' << detail::format_double(v);
        out << '\n';
    }
}

inline FeatureDataset read_dataset_csv(std::istream& in) {
    FeatureDataset ds;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto view = detail::trim(line);
        if (view.empty()) continue;
        auto cells = detail::split_csv(view);
        if (!header) {
            if (cells.size() < 2 || detail::trim(cells[0]) != "id" ||
                detail::trim(cells[1]) != "label") {
                throw FormatError("CSV header must start with 'id,label'");
            }
            ds.width = cells.size() - 2;
            for (std::size_t k = 0; k < ds.width; ++k) {
                if (detail::trim(cells[k + 2]) != "f" + std::to_string(k)) {
                    throw FormatError("CSV header column " + std::to_string(k + 2) +
                                      " must be f" + std::to_string(k));
                }
            }
            header = true;
            continue;
        }
        if (cells.size() != ds.width + 2) {
            throw FormatError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(ds.width + 2) + " columns");
        }
        ds.ids.push_back(detail::parse_number<std::int64_t>(cells[0], line_no));
        ds.labels.push_back(detail::parse_number<NodeId>(cells[1], line_no));
        for (std::size_t k = 0; k < ds.width; ++k) {
            ds.features.push_back(detail::parse_number<double>(cells[k + 2], line_no));
        }
    }
    if (!header) throw FormatError("empty CSV file");
    return ds;
}

/// Loads features and labels and checks them against the hierarchy. For the
/// CSV format the label file is unused (labels are inline).
inline FeatureDataset load_dataset(const std::filesystem::path& feature_file,
                                   const std::filesystem::path& label_file,
                                   const CondensedHierarchy& h,
                                   FeatureFormat format = FeatureFormat::Binary) {
    FeatureDataset ds;
    if (format == FeatureFormat::Binary) {
        std::ifstream fin(feature_file, std::ios::binary);
        if (!fin) throw FormatError("cannot open " + feature_file.string());
        ds = read_features_binary(fin);
        std::ifstream lin(label_file);
        if (!lin) throw FormatError("cannot open " + label_file.string());
        read_labels_csv(lin, ds);
    } else {
        std::ifstream fin(feature_file);
        if (!fin) throw FormatError("cannot open " + feature_file.string());
        ds = read_dataset_csv(fin);
    }
    ds.validate(h);
    return ds;
}

inline void save_dataset(const FeatureDataset& ds, const std::filesystem::path& feature_file,
                         const std::filesystem::path& label_file,
                         FeatureFormat format = FeatureFormat::Binary) {
    if (format == FeatureFormat::Binary) {
        std::ofstream fout(feature_file, std::ios::binary);
        write_features_binary(fout, ds);
        std::ofstream lout(label_file);
        write_labels_csv(lout, ds);
        if (!fout || !lout) throw FormatError("failed writing dataset");
    } else {
        std::ofstream fout(feature_file);
        write_dataset_csv(fout, ds);
        if (!fout) throw FormatError("failed writing " + feature_file.string());
    }
}

/// Stratified split: within every category a seeded shuffle picks
/// round(fraction · count) training examples. Both halves keep input order.
inline std::pair<FeatureDataset, FeatureDataset> split(const FeatureDataset& ds,
                                                       double train_fraction,
                                                       std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    }
    std::map<NodeId, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < ds.size(); ++i) by_label[ds.labels[i]].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (auto& [label, rows] : by_label) {
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto k = static_cast<std::size_t>(
            std::lround(train_fraction * static_cast<double>(rows.size())));
        train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(k));
        test_rows.insert(test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(k), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    return {ds.select(train_rows), ds.select(test_rows)};
}

/// Hierarchical Gaussian features. Every node owns one coordinate axis
/// (its position in id order); an example of category c is the sum of
/// `level_gain^depth` along the axes of all nodes on the root path to c, plus
/// isotropic noise of standard deviation `sigma`. Examples are grouped by
/// category in ascending id order.
inline FeatureDataset gen_synthetic(const CondensedHierarchy& h, std::size_t d0,
                                    std::size_t per_category, double sigma,
                                    std::uint64_t seed, double level_gain = 1.0) {
    if (d0 < h.size()) {
        throw DimensionError("feature width " + std::to_string(d0) + " is smaller than the " +
                             std::to_string(h.size()) + " hierarchy nodes");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    FeatureDataset ds;
    ds.width = d0;
    std::vector<double> mean(d0);
    for (auto c : h.categories()) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::optional<NodeId> cur = c; cur; cur = h.parent(*cur)) {
            mean[h.index_of(*cur)] = std::pow(level_gain, h.depth(*cur));
        }
        for (std::size_t k = 0; k < per_category; ++k) {
            for (std::size_t f = 0; f < d0; ++f) {
                ds.features.push_back(sigma > 0.0 ? mean[f] + sigma * noise(rng) : mean[f]);
            }
            ds.labels.push_back(c);
            ds.ids.push_back(static_cast<std::int64_t>(ds.ids.size()));
        }
    }
    return ds;
}

/// Random tree with `concepts` concepts spread over exactly `levels` levels
/// and `categories` categories. Every leaf concept receives at least one
/// category. Ids: root 0, concepts 1..M, categories M+1..M+N.
inline CondensedHierarchy random_tree(std::size_t concepts, std::size_t categories,
                                      std::size_t levels, std::uint64_t seed) {
    if (levels > concepts || (concepts > 0 && levels == 0)) {
        throw std::invalid_argument("need at least one concept per level");
    }
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    std::vector<Node> nodes{{0, NodeKind::Concept, "root"}};
    std::vector<Edge> edges;
    std::vector<std::vector<NodeId>> by_level(levels + 1);
    by_level[0].push_back(0);
    std::map<NodeId, std::size_t> concept_children;
    for (std::size_t i = 1; i <= concepts; ++i) {
        const auto level = i <= levels ? i : 1 + pick(levels);
        const auto& parents = by_level[level - 1];
        const NodeId parent = parents[pick(parents.size())];
        const auto id = static_cast<NodeId>(i);
        nodes.push_back({id, NodeKind::Concept, "concept_" + std::to_string(i)});
        edges.push_back({parent, id});
        by_level[level].push_back(id);
        ++concept_children[parent];
    }
    std::vector<NodeId> leaf_concepts;
    for (std::size_t i = 1; i <= concepts; ++i) {
        if (!concept_children.contains(static_cast<NodeId>(i))) leaf_concepts.push_back(static_cast<NodeId>(i));
    }
    if (categories < leaf_concepts.size()) {
        throw std::invalid_argument("not enough categories to populate every leaf concept");
    }
    for (std::size_t k = 0; k < categories; ++k) {
        const auto id = static_cast<NodeId>(concepts + 1 + k);
        const NodeId parent = k < leaf_concepts.size() ? leaf_concepts[k]
                                                       : static_cast<NodeId>(pick(concepts + 1));
        nodes.push_back({id, NodeKind::Category, "category_" + std::to_string(k)});
        edges.push_back({parent, id});
    }
    return CondensedHierarchy::from_tree(Ontology::create(std::move(nodes), std::move(edges)));
}

/// Balanced α-way concept tree `levels` deep with `leaf_categories`
/// categories under each deepest concept.
inline CondensedHierarchy balanced_tree(std::size_t alpha, std::size_t levels,
                                        std::size_t leaf_categories) {
    std::vector<Node> nodes{{0, NodeKind::Concept, "root"}};
    std::vector<Edge> edges;
    NodeId next = 1;
    std::vector<NodeId> frontier{0};
    for (std::size_t l = 0; l < levels; ++l) {
        std::vector<NodeId> below;
        for (auto p : frontier) {
            for (std::size_t k = 0; k < alpha; ++k) {
                nodes.push_back({next, NodeKind::Concept, "concept_" + std::to_string(next)});
                edges.push_back({p, next});
                below.push_back(next++);
            }
        }
        frontier = std::move(below);
    }
    for (auto p : frontier) {
        for (std::size_t k = 0; k < leaf_categories; ++k) {
            nodes.push_back({next, NodeKind::Category, "category_" + std::to_string(next)});
            edges.push_back({p, next++});
        }
    }
    return CondensedHierarchy::from_tree(Ontology::create(std::move(nodes), std::move(edges)));
}

}  // namespace mdhc

#endif  // MDHC_DATAIO_HPP_
