// Copyright (c) 2026, The driftguard authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "driftguard/error.hpp"
#include "driftguard/json_util.hpp"
#include "driftguard/model/multi_head_model.hpp"

namespace driftguard::model {

/// One entry of a model's training lineage.
struct StageRecord {
  std::size_t stage = 0;
  std::string task_id;
  std::string strategy;
  std::uint64_t seed = 0;

  friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

struct Checkpoint {
  MultiHeadModel model;
  std::vector<StageRecord> provenance;
};

/// Container layout:
///   8 bytes  magic "DGCKPT\r\n"
///   u32 LE   format version
///   u64 LE   header length
///   header   UTF-8 JSON (featurizer, encoder shape, tasks, tensor table, provenance)
///   payload  f64 LE, tensors back to back in header order
inline constexpr std::array<char, 8> kCheckpointMagic{'D', 'G', 'C', 'K', 'P', 'T', '\r', '\n'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos, const std::string& what) {
  if (in.size() < pos + sizeof(T)) {
    throw FormatError("truncated checkpoint at byte " + std::to_string(pos) + " while reading " + what);
  }
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  pos += sizeof(T);
  return value;
}

inline json featurizer_to_json(const data::FeaturizerConfig& f) {
  return json{{"dimension", f.dimension},
              {"ngram_orders", f.ngram_orders},
              {"salt_a", f.salt_a},
              {"salt_b", f.salt_b},
              {"seed", f.seed}};
}

template <typename E>
data::FeaturizerConfig featurizer_from_json(const json& j, const std::string& location) {
  JsonReader<E> r(j, location);
  r.only({"dimension", "ngram_orders", "salt_a", "salt_b", "seed"});
  data::FeaturizerConfig f;
  f.dimension = r.template get_or<std::size_t>("dimension", f.dimension);
  f.ngram_orders = r.template get_or<std::vector<int>>("ngram_orders", f.ngram_orders);
  f.salt_a = r.template get_or<std::uint64_t>("salt_a", f.salt_a);
  f.salt_b = r.template get_or<std::uint64_t>("salt_b", f.salt_b);
  f.seed = r.template get_or<std::uint64_t>("seed", f.seed);
  try {
    f.validate();
  } catch (const InvalidInput& e) {
    r.fail(e.what());
  }
  return f;
}

inline json stage_record_to_json(const StageRecord& s) {
  return json{{"stage", s.stage}, {"task_id", s.task_id}, {"strategy", s.strategy}, {"seed", s.seed}};
}

template <typename E>
StageRecord stage_record_from_json(const json& j, const std::string& location) {
  JsonReader<E> r(j, location);
  r.only({"stage", "task_id", "strategy", "seed"});
  return StageRecord{r.template get<std::size_t>("stage"), r.template get<std::string>("task_id"),
                     r.template get<std::string>("strategy"), r.template get<std::uint64_t>("seed")};
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline std::string serialize_checkpoint(const MultiHeadModel& model,
                                        const std::vector<StageRecord>& provenance) {
  json header;
  header["format_version"] = kCheckpointVersion;
  header["featurizer"] = detail::featurizer_to_json(model.featurizer_config());

  json enc_dims = json::array({model.encoder().input_dim()});
  json dropout = json::array();
  for (const auto& layer : model.encoder().layers()) {
    enc_dims.push_back(layer.out_dim());
    dropout.push_back(layer.dropout);
  }
  header["encoder"] = json{{"dims", enc_dims}, {"dropout", dropout}};

  header["tasks"] = json::array();
  for (const auto& t : model.tasks()) header["tasks"].push_back(task_spec_to_json(t));

  json tensors = json::array();
  std::string payload;
  auto add = [&](const std::string& name, const nn::Matrix& m) {
    tensors.push_back(json{{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    for (double v : m.values()) detail::put_le(payload, v);
  };
  for (std::size_t i = 0; i < model.encoder().depth(); ++i) {
    const auto& l = model.encoder().layers()[i];
    add("encoder." + std::to_string(i) + ".weight", l.weight);
    add("encoder." + std::to_string(i) + ".bias", l.bias);
  }
  for (std::size_t h = 0; h < model.head_count(); ++h) {
    const auto& l = model.head(h).layers().front();
    add("head." + model.tasks()[h].task_id + ".weight", l.weight);
    add("head." + model.tasks()[h].task_id + ".bias", l.bias);
  }
  header["tensors"] = tensors;
  header["provenance"] = json::array();
  for (const auto& s : provenance) header["provenance"].push_back(detail::stage_record_to_json(s));
  header["payload_bytes"] = payload.size();

  const std::string header_text = header.dump();
  std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le(out, kCheckpointVersion);
  detail::put_le(out, static_cast<std::uint64_t>(header_text.size()));
  out += header_text;
  out += payload;
  return out;
}

inline Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < kCheckpointMagic.size() ||
      !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
    throw FormatError("not a checkpoint: bad magic bytes at offset 0");
  }
  std::size_t pos = kCheckpointMagic.size();
  const auto version = detail::get_le<std::uint32_t>(bytes, pos, "format version");
  if (version != kCheckpointVersion) {
    throw VersionMismatch("checkpoint format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = detail::get_le<std::uint64_t>(bytes, pos, "header length");
  if (bytes.size() - pos < header_len) {
    throw FormatError("truncated checkpoint: header needs " + std::to_string(header_len) +
                      " bytes at offset " + std::to_string(pos));
  }
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;

  using R = JsonReader<FormatError>;
  R root(header, "header");
  root.only({"format_version", "featurizer", "encoder", "tasks", "tensors", "provenance",
             "payload_bytes"});
  if (root.get<std::uint32_t>("format_version") != version) {
    throw VersionMismatch("header format_version disagrees with container version");
  }
  auto featurizer = detail::featurizer_from_json<FormatError>(root.at("featurizer"), root.path("featurizer"));

  R enc = root.child("encoder");
  enc.only({"dims", "dropout"});
  const auto dims = enc.get<std::vector<std::size_t>>("dims");
  const auto dropout = enc.get<std::vector<double>>("dropout");
  if (dims.size() < 2 || dropout.size() + 1 != dims.size()) enc.fail("dims/dropout lengths disagree");

  std::vector<TaskSpec> specs;
  const json& tasks = root.at("tasks");
  if (!tasks.is_array()) root.fail("field 'tasks' must be an array");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    specs.push_back(task_spec_from_json<FormatError>(tasks[i], "header.tasks[" + std::to_string(i) + "]"));
  }

  const auto payload_bytes = root.get<std::uint64_t>("payload_bytes");
  if (bytes.size() - pos != payload_bytes) {
    throw FormatError("checkpoint payload at offset " + std::to_string(pos) + " has " +
                      std::to_string(bytes.size() - pos) + " bytes, header declares " +
                      std::to_string(payload_bytes));
  }

  const json& table = root.at("tensors");
  if (!table.is_array()) root.fail("field 'tensors' must be an array");
  std::size_t next = 0;
  auto read_tensor = [&](const std::string& expected_name, std::size_t rows, std::size_t cols) {
    const std::string loc = "header.tensors[" + std::to_string(next) + "]";
    if (next >= table.size()) throw FormatError(loc + ": missing tensor '" + expected_name + "'");
    R t(table[next++], loc);
    t.only({"name", "rows", "cols"});
    if (t.get<std::string>("name") != expected_name || t.get<std::size_t>("rows") != rows ||
        t.get<std::size_t>("cols") != cols) {
      t.fail("expected tensor '" + expected_name + "' of shape " + std::to_string(rows) + "x" +
             std::to_string(cols));
    }
    std::vector<double> values(rows * cols);
    for (double& v : values) v = detail::get_le<double>(bytes, pos, expected_name);
    nn::Matrix m(rows, cols, std::move(values));
    if (!m.all_finite()) throw FormatError(loc + ": non-finite values in '" + expected_name + "'");
    return m;
  };

  std::vector<nn::AffineLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    nn::AffineLayer l;
    l.weight = read_tensor("encoder." + std::to_string(i) + ".weight", dims[i + 1], dims[i]);
    l.bias = read_tensor("encoder." + std::to_string(i) + ".bias", dims[i + 1], 1);
    l.activation = nn::Activation::kRelu;
    l.dropout = dropout[i];
    layers.push_back(std::move(l));
  }
  std::vector<nn::LayerStack> heads;
  for (const auto& spec : specs) {
    nn::AffineLayer l;
    l.weight = read_tensor("head." + spec.task_id + ".weight", spec.class_count(), dims.back());
    l.bias = read_tensor("head." + spec.task_id + ".bias", spec.class_count(), 1);
    l.activation = nn::Activation::kIdentity;
    heads.emplace_back(std::vector<nn::AffineLayer>{std::move(l)});
  }
  if (next != table.size()) throw FormatError("header.tensors: unexpected extra tensors");
  if (dims.front() != featurizer.dimension) {
    throw FormatError("header.encoder: input dim does not match featurizer dimension");
  }

  Checkpoint ckpt;
  try {
    ckpt.model = MultiHeadModel::from_parts(featurizer, nn::LayerStack(std::move(layers)),
                                            std::move(specs), std::move(heads));
  } catch (const Error& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what());
  }
  const json& prov = root.at("provenance");
  if (!prov.is_array()) root.fail("field 'provenance' must be an array");
  for (std::size_t i = 0; i < prov.size(); ++i) {
    ckpt.provenance.push_back(detail::stage_record_from_json<FormatError>(
        prov[i], "header.provenance[" + std::to_string(i) + "]"));
  }
  return ckpt;
}

inline void save(const MultiHeadModel& model, const std::filesystem::path& path,
                 const std::vector<StageRecord>& provenance = {}) {
  detail::write_file_atomic(path, serialize_checkpoint(model, provenance));
}

inline Checkpoint load(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return deserialize_checkpoint(bytes);
  } catch (const FormatError& e) {
    if (dynamic_cast<const VersionMismatch*>(&e) != nullptr) {
      throw VersionMismatch(path.string() + ": " + e.what());
    }
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace driftguard::model
