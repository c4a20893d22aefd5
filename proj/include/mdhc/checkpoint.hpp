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

#ifndef MDHC_CHECKPOINT_HPP_
#define MDHC_CHECKPOINT_HPP_

// Checkpoint layout (all integers and floats little-endian):
//
//   "MDHC"  u32 version  u64 topology hash  u64 value count  f64 values...
//
// Values follow the declared block order of the parameter layout. A JSON
// description of the topology is written next to it as <checkpoint>.json.

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mdhc/baselines.hpp"
#include "mdhc/dataio.hpp"
#include "mdhc/head.hpp"
#include "mdhc/training.hpp"

namespace mdhc {

inline constexpr std::array<char, 4> kCheckpointMagic{'M', 'D', 'H', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointData {
    std::uint64_t topology_hash = 0;
    std::vector<double> values;
};

template <typename T>
void write_checkpoint(std::ostream& out, std::uint64_t topology_hash, std::span<const T> values) {
    out.write(kCheckpointMagic.data(), 4);
    detail::write_le<std::uint32_t>(out, kCheckpointVersion);
    detail::write_le<std::uint64_t>(out, topology_hash);
    detail::write_le<std::uint64_t>(out, values.size());
    for (T v : values) detail::write_f64(out, static_cast<double>(v));
}

inline CheckpointData read_checkpoint(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4) || magic != kCheckpointMagic) {
        throw FormatError("not a checkpoint (bad magic)");
    }
    if (const auto v = detail::read_le<std::uint32_t>(in); v != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(v));
    }
    CheckpointData data;
    data.topology_hash = detail::read_le<std::uint64_t>(in);
    data.values.resize(detail::read_le<std::uint64_t>(in));
    for (auto& v : data.values) v = detail::read_f64(in);
    return data;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline nlohmann::json topology_json(const HeadTopology& t) {
    nlohmann::json units = nlohmann::json::array();
    for (const auto& u : t.units()) {
        nlohmann::json children = nlohmann::json::array();
        for (auto c : u.child_units) children.push_back(t.unit(c).node_id);
        nlohmann::json cats = nlohmann::json::array();
        for (auto j : u.child_categories) cats.push_back(t.category_ids()[j]);
        units.push_back({{"concept_id", u.node_id},
                         {"hidden_size", u.hidden_size},
                         {"parent_concept_id",
                          u.parent < 0 ? nlohmann::json(nullptr)
                                       : nlohmann::json(t.unit(static_cast<std::size_t>(u.parent)).node_id)},
                         {"child_concept_ids", children},
                         {"child_category_ids", cats},
                         {"depth", u.depth}});
    }
    return {{"d0", t.input_width()},
            {"mu", t.multiplier()},
            {"N", t.category_count()},
            {"M", t.concept_count()},
            {"height", t.height()},
            {"hash", hash_hex(t.hash())},
            {"units", units}};
}

inline std::filesystem::path topology_path(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".json";
    return p;
}

namespace detail {

template <typename T>
void save_files(const std::filesystem::path& path, std::uint64_t hash, std::span<const T> values,
                nlohmann::json meta) {
    std::ofstream out(path, std::ios::binary);
    write_checkpoint<T>(out, hash, values);
    if (!out) throw FormatError("failed writing " + path.string());
    std::ofstream js(topology_path(path));
    js << meta.dump(2) << '\n';
    if (!js) throw FormatError("failed writing " + topology_path(path).string());
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const MultilayerModel<T>& model) {
    auto meta = topology_json(model.topology());
    meta["model"] = "md";
    meta["precision"] = sizeof(T) == 4 ? "f32" : "f64";
    detail::save_files<T>(path, model.topology().hash(), model.values(), std::move(meta));
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const FlatModel<T>& model) {
    auto meta = topology_json(model.topology());
    meta["model"] = "flat";
    meta["hash"] = hash_hex(model.hash());
    meta["precision"] = sizeof(T) == 4 ? "f32" : "f64";
    detail::save_files<T>(path, model.hash(), model.values(), std::move(meta));
}

using AnyModel = std::variant<MultilayerModel<double>, FlatModel<double>>;

/// Rebuilds a model from a checkpoint and the hierarchy it was trained on.
/// Throws TopologyMismatchError when the hierarchy does not reproduce the
/// checkpoint's topology hash.
inline AnyModel load_checkpoint(const std::filesystem::path& path, const CondensedHierarchy& h) {
    std::ifstream js(topology_path(path));
    if (!js) throw FormatError("missing topology description " + topology_path(path).string());
    const auto meta = nlohmann::json::parse(js);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    auto data = read_checkpoint(in);

    auto topo = build_topology(h, meta.at("d0").get<std::size_t>(), meta.at("mu").get<std::size_t>());
    const auto kind = meta.value("model", std::string("md"));
    auto check = [&](std::uint64_t expected) {
        if (expected != data.topology_hash) {
            throw TopologyMismatchError("hierarchy topology " + hash_hex(expected) +
                                        " does not match checkpoint topology " +
                                        hash_hex(data.topology_hash));
        }
    };
    if (kind == "flat") {
        check(flat_hash(topo));
        return FlatModel<double>(std::move(topo), std::move(data.values));
    }
    check(topo.hash());
    HeadParameters<double> params(std::make_shared<const ParameterLayout>(topo));
    if (params.values().size() != data.values.size()) {
        throw ShapeMismatchError("checkpoint holds " + std::to_string(data.values.size()) +
                                 " values, topology needs " + std::to_string(params.values().size()));
    }
    std::copy(data.values.begin(), data.values.end(), params.values().begin());
    return MultilayerModel<double>(std::move(topo), std::move(params));
}

}  // namespace mdhc

#endif  // MDHC_CHECKPOINT_HPP_
