#pragma once

// Anchor-dump and rollout-record file formats.
//
// A pool is a JSON manifest plus a binary payload of little-endian float32
// values. Per instance the payload holds the L start-anchor rows followed by
// the L end-anchor rows, each row D floats, so the payload is exactly
// N * 2 * L * D * 4 bytes. Rollout records are JSON Lines, one object per
// instance.

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "shift/error.hpp"
#include "shift/matrix.hpp"

namespace shift {

inline constexpr std::string_view kPoolDtype = "f32le";
inline constexpr std::string_view kAnchorOrder = "start_then_end";

struct PoolManifest {
  std::string pool_id;
  std::size_t instance_count = 0;
  std::size_t hidden_dim = 0;
  std::size_t layer_count = 1;
  std::vector<std::string> instance_ids;
  // Payload file, relative to the manifest's directory. Empty means
  // "<manifest stem>.bin".
  std::string payload_path;

  std::size_t expected_payload_bytes() const noexcept {
    return instance_count * 2 * layer_count * hidden_dim * sizeof(float);
  }

  friend bool operator==(const PoolManifest&, const PoolManifest&) = default;
};

// One instance's anchor hidden states, one row per dumped layer.
struct AnchorRecord {
  std::string instance_id;
  Matrix<float> start_states;
  Matrix<float> end_states;

  friend bool operator==(const AnchorRecord&, const AnchorRecord&) = default;
};

struct Pool {
  PoolManifest manifest;
  std::vector<AnchorRecord> records;
};

struct RolloutRecord {
  std::string instance_id;
  std::vector<std::string> answers;
  Matrix<double> cot_embeddings;  // R x E; 0 x 0 when absent
  std::vector<double> question_token_logprobs;
  std::vector<double> answer_token_logprobs;
  std::optional<std::size_t> question_token_len;
  std::optional<std::size_t> response_token_len;

  // Number of rollouts backing this record.
  std::size_t rollout_count() const noexcept {
    return answers.empty() ? cot_embeddings.rows() : answers.size();
  }

  friend bool operator==(const RolloutRecord&, const RolloutRecord&) = default;
};

inline void validate_record(const AnchorRecord& record) {
  if (record.start_states.rows() != record.end_states.rows() ||
      record.start_states.cols() != record.end_states.cols()) {
    fail(ErrorCode::kShapeMismatch,
         "start/end anchor shapes differ for instance '" +
             record.instance_id + "'");
  }
  if (record.start_states.empty()) {
    fail(ErrorCode::kShapeMismatch,
         "empty anchor matrices for instance '" + record.instance_id + "'");
  }
  for (const auto* m : {&record.start_states, &record.end_states}) {
    for (const float v : m->data()) {
      if (!std::isfinite(v)) {
        fail(ErrorCode::kNonFiniteValue,
             "non-finite anchor value in instance '" + record.instance_id +
                 "'");
      }
    }
  }
}

namespace detail {

inline void put_f32le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<char>(bits & 0xffu));
  out.push_back(static_cast<char>((bits >> 8) & 0xffu));
  out.push_back(static_cast<char>((bits >> 16) & 0xffu));
  out.push_back(static_cast<char>((bits >> 24) & 0xffu));
}

inline float get_f32le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "short write to '" + path.string() + "'");
}

inline std::filesystem::path payload_file(
    const std::filesystem::path& manifest_path, const PoolManifest& m) {
  if (!m.payload_path.empty()) {
    return manifest_path.parent_path() / m.payload_path;
  }
  auto p = manifest_path;
  p.replace_extension(".bin");
  return p;
}

template <typename T>
T required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) {
    fail(ErrorCode::kMalformedManifest,
         std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kMalformedManifest,
         std::string("field '") + key + "' has the wrong type");
  }
}

inline std::size_t required_positive(const nlohmann::json& j, const char* key) {
  const auto& v = j.contains(key) ? j.at(key) : nlohmann::json();
  if (!v.is_number_integer()) {
    fail(ErrorCode::kMalformedManifest,
         std::string("field '") + key + "' must be an integer");
  }
  const auto n = v.get<std::int64_t>();
  if (n < 0) {
    fail(ErrorCode::kMalformedManifest,
         std::string("field '") + key + "' is negative");
  }
  return static_cast<std::size_t>(n);
}

}  // namespace detail

inline nlohmann::json manifest_to_json(const PoolManifest& m) {
  nlohmann::json j = {
      {"pool_id", m.pool_id},
      {"instance_count", m.instance_count},
      {"hidden_dim", m.hidden_dim},
      {"layer_count", m.layer_count},
      {"instance_ids", m.instance_ids},
      {"dtype", kPoolDtype},
      {"anchor_order", kAnchorOrder},
  };
  if (!m.payload_path.empty()) j["payload_path"] = m.payload_path;
  return j;
}

// Schema check only; payload size is checked against the file separately.
// Unknown fields are ignored.
inline PoolManifest manifest_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    fail(ErrorCode::kMalformedManifest, "manifest is not a JSON object");
  }
  PoolManifest m;
  m.pool_id = detail::required<std::string>(j, "pool_id");
  m.instance_count = detail::required_positive(j, "instance_count");
  m.hidden_dim = detail::required_positive(j, "hidden_dim");
  m.layer_count = detail::required_positive(j, "layer_count");
  m.instance_ids = detail::required<std::vector<std::string>>(j, "instance_ids");
  if (detail::required<std::string>(j, "dtype") != kPoolDtype) {
    fail(ErrorCode::kMalformedManifest, "dtype must be f32le");
  }
  if (detail::required<std::string>(j, "anchor_order") != kAnchorOrder) {
    fail(ErrorCode::kMalformedManifest, "anchor_order must be start_then_end");
  }
  if (j.contains("payload_path")) {
    m.payload_path = detail::required<std::string>(j, "payload_path");
  }
  if (m.instance_count == 0) fail(ErrorCode::kEmptyPool, "instance_count is 0");
  if (m.hidden_dim == 0 || m.layer_count == 0) {
    fail(ErrorCode::kMalformedManifest, "hidden_dim and layer_count must be >= 1");
  }
  if (m.instance_ids.size() != m.instance_count) {
    fail(ErrorCode::kMalformedManifest,
         "instance_ids has " + std::to_string(m.instance_ids.size()) +
             " entries, instance_count is " + std::to_string(m.instance_count));
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : m.instance_ids) {
    if (!seen.insert(id).second) {
      fail(ErrorCode::kMalformedManifest, "duplicate instance id '" + id + "'");
    }
  }
  return m;
}

inline std::string encode_payload(std::span<const AnchorRecord> records) {
  std::string bytes;
  for (const auto& r : records) {
    for (const float v : r.start_states.data()) detail::put_f32le(bytes, v);
    for (const float v : r.end_states.data()) detail::put_f32le(bytes, v);
  }
  return bytes;
}

inline std::vector<AnchorRecord> decode_payload(const PoolManifest& m,
                                                std::string_view bytes) {
  if (bytes.size() != m.expected_payload_bytes()) {
    fail(ErrorCode::kSizeMismatch,
         "payload has " + std::to_string(bytes.size()) + " bytes, expected " +
             std::to_string(m.expected_payload_bytes()));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t per_matrix = m.layer_count * m.hidden_dim;
  std::vector<AnchorRecord> records;
  records.reserve(m.instance_count);
  for (std::size_t i = 0; i < m.instance_count; ++i) {
    AnchorRecord r{m.instance_ids[i], Matrix<float>(m.layer_count, m.hidden_dim),
                   Matrix<float>(m.layer_count, m.hidden_dim)};
    for (auto* target : {&r.start_states, &r.end_states}) {
      auto out = target->data();
      for (std::size_t k = 0; k < per_matrix; ++k, p += 4) {
        out[k] = detail::get_f32le(p);
      }
    }
    validate_record(r);
    records.push_back(std::move(r));
  }
  return records;
}

inline Pool read_pool(const std::filesystem::path& manifest_path) {
  const std::string text = detail::read_file_bytes(manifest_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kMalformedManifest,
         "'" + manifest_path.string() + "' is not valid JSON: " + e.what());
  }
  Pool pool;
  pool.manifest = manifest_from_json(j);
  const std::string bytes =
      detail::read_file_bytes(detail::payload_file(manifest_path, pool.manifest));
  pool.records = decode_payload(pool.manifest, bytes);
  return pool;
}

// Writes the manifest to `manifest_path` and the payload next to it.
inline void write_pool(std::span<const AnchorRecord> records,
                       const PoolManifest& manifest,
                       const std::filesystem::path& manifest_path) {
  if (manifest.instance_count == 0 || records.empty()) {
    fail(ErrorCode::kEmptyPool, "cannot write a pool with no instances");
  }
  if (records.size() != manifest.instance_count ||
      manifest.instance_ids.size() != manifest.instance_count) {
    fail(ErrorCode::kShapeMismatch, "record count does not match manifest");
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.instance_id != manifest.instance_ids[i]) {
      fail(ErrorCode::kShapeMismatch,
           "record " + std::to_string(i) + " id '" + r.instance_id +
               "' does not match manifest id '" + manifest.instance_ids[i] + "'");
    }
    if (r.start_states.rows() != manifest.layer_count ||
        r.start_states.cols() != manifest.hidden_dim) {
      fail(ErrorCode::kShapeMismatch,
           "record '" + r.instance_id + "' is not layer_count x hidden_dim");
    }
    validate_record(r);
  }
  // Re-validate the manifest itself (duplicate ids and so on).
  manifest_from_json(manifest_to_json(manifest));

  detail::write_file_bytes(manifest_path, manifest_to_json(manifest).dump(2) + "\n");
  detail::write_file_bytes(detail::payload_file(manifest_path, manifest),
                           encode_payload(records));
}

inline void write_pool(const Pool& pool,
                       const std::filesystem::path& manifest_path) {
  write_pool(pool.records, pool.manifest, manifest_path);
}

// Manifest derived from records, with ids in record order.
inline PoolManifest make_manifest(std::string pool_id,
                                  std::span<const AnchorRecord> records) {
  PoolManifest m;
  m.pool_id = std::move(pool_id);
  m.instance_count = records.size();
  if (!records.empty()) {
    m.layer_count = records.front().start_states.rows();
    m.hidden_dim = records.front().start_states.cols();
  }
  for (const auto& r : records) m.instance_ids.push_back(r.instance_id);
  return m;
}

// ---------------------------------------------------------------------------
// Rollout records (JSON Lines)

namespace detail {

[[noreturn]] inline void bad_record(const std::string& what) {
  fail(ErrorCode::kMalformedRecord, what);
}

inline std::vector<double> logprob_list(const nlohmann::json& j,
                                        const char* key,
                                        const std::string& id) {
  std::vector<double> out;
  if (!j.contains(key) || j.at(key).is_null()) return out;
  const auto& arr = j.at(key);
  if (!arr.is_array()) bad_record(std::string(key) + " must be an array");
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) bad_record(std::string(key) + " must hold numbers");
    const double x = v.get<double>();
    if (!std::isfinite(x)) bad_record(std::string(key) + " holds a non-finite value");
    if (x > 0.0) {
      fail(ErrorCode::kPositiveLogprob,
           "instance '" + id + "' has " + key + " entry " + std::to_string(x));
    }
    out.push_back(x);
  }
  return out;
}

inline std::optional<std::size_t> token_len(const nlohmann::json& j,
                                            const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    bad_record(std::string(key) + " must be a nonnegative integer");
  }
  return static_cast<std::size_t>(v.get<std::int64_t>());
}

}  // namespace detail

inline RolloutRecord rollout_from_json(const nlohmann::json& j) {
  if (!j.is_object()) detail::bad_record("rollout record is not an object");
  if (!j.contains("instance_id") || !j.at("instance_id").is_string()) {
    detail::bad_record("rollout record lacks a string instance_id");
  }
  RolloutRecord r;
  r.instance_id = j.at("instance_id").get<std::string>();
  if (j.contains("answers") && !j.at("answers").is_null()) {
    const auto& a = j.at("answers");
    if (!a.is_array()) detail::bad_record("answers must be an array");
    for (const auto& v : a) {
      if (!v.is_string()) detail::bad_record("answers must hold strings");
      r.answers.push_back(v.get<std::string>());
    }
  }
  if (j.contains("cot_embeddings") && !j.at("cot_embeddings").is_null()) {
    const auto& e = j.at("cot_embeddings");
    if (!e.is_array()) detail::bad_record("cot_embeddings must be an array");
    std::vector<double> flat;
    std::size_t cols = 0;
    for (std::size_t row = 0; row < e.size(); ++row) {
      const auto& rv = e[row];
      if (!rv.is_array()) detail::bad_record("cot_embeddings rows must be arrays");
      if (row == 0) {
        cols = rv.size();
        if (cols == 0) detail::bad_record("cot_embeddings rows are empty");
      } else if (rv.size() != cols) {
        detail::bad_record("cot_embeddings rows are ragged");
      }
      for (const auto& v : rv) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
          detail::bad_record("cot_embeddings must hold finite numbers");
        }
        flat.push_back(v.get<double>());
      }
    }
    r.cot_embeddings = Matrix<double>(e.size(), cols, std::move(flat));
  }
  r.question_token_logprobs =
      detail::logprob_list(j, "question_token_logprobs", r.instance_id);
  r.answer_token_logprobs =
      detail::logprob_list(j, "answer_token_logprobs", r.instance_id);
  r.question_token_len = detail::token_len(j, "question_token_len");
  r.response_token_len = detail::token_len(j, "response_token_len");
  if (!r.answers.empty() && r.cot_embeddings.rows() != 0 &&
      r.cot_embeddings.rows() != r.answers.size()) {
    detail::bad_record("instance '" + r.instance_id +
                       "' has a different number of answers and embeddings");
  }
  return r;
}

inline nlohmann::json rollout_to_json(const RolloutRecord& r) {
  nlohmann::json j;
  j["instance_id"] = r.instance_id;
  j["answers"] = r.answers;
  auto emb = nlohmann::json::array();
  for (std::size_t i = 0; i < r.cot_embeddings.rows(); ++i) {
    const auto row = r.cot_embeddings.row(i);
    emb.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["cot_embeddings"] = std::move(emb);
  j["question_token_logprobs"] = r.question_token_logprobs;
  j["answer_token_logprobs"] = r.answer_token_logprobs;
  if (r.question_token_len) j["question_token_len"] = *r.question_token_len;
  if (r.response_token_len) j["response_token_len"] = *r.response_token_len;
  return j;
}

inline std::vector<RolloutRecord> parse_rollout_records(std::string_view text) {
  std::vector<RolloutRecord> out;
  std::unordered_set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      detail::bad_record("line " + std::to_string(line_no) + " is not valid JSON");
    }
    auto r = rollout_from_json(j);
    if (!seen.insert(r.instance_id).second) {
      detail::bad_record("duplicate instance_id '" + r.instance_id + "' on line " +
                         std::to_string(line_no));
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RolloutRecord> read_rollout_records(
    const std::filesystem::path& path) {
  return parse_rollout_records(detail::read_file_bytes(path));
}

inline void write_rollout_records(std::span<const RolloutRecord> records,
                                  const std::filesystem::path& path) {
  std::string text;
  for (const auto& r : records) text += rollout_to_json(r).dump() + "\n";
  detail::write_file_bytes(path, text);
}

}  // namespace shift
