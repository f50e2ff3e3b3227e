#pragma once

// RDPF representation-interchange files, span pooling and lexical
// baseline features.
//
// File layout (all integers little-endian):
//   bytes 0..3   magic "RDPF"
//   u32          format version (1)
//   u64          header byte length N
//   N bytes      UTF-8 JSON header
//   payload      IEEE-754 float32 LE, layer-major, then node, then component
//
// Header keys: model_name, hidden_dim, layers (sorted, unique), condition
// (contextual | node_only | bow), index ([[graph_id, node_id], ...]) and an
// optional free-form "meta" object. The writer emits the header with sorted
// keys and no whitespace, so read -> write reproduces a file byte for byte.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dagprobe/error.hpp"
#include "dagprobe/graph.hpp"
#include "dagprobe/io_util.hpp"
#include "dagprobe/matrix.hpp"
#include "json.hpp"

namespace dagprobe {

inline constexpr char kRdpfMagic[4] = {'R', 'D', 'P', 'F'};
inline constexpr std::uint32_t kRdpfVersion = 1;

enum class Condition { contextual, node_only, bow };

inline std::string to_string(Condition c) {
  switch (c) {
    case Condition::contextual: return "contextual";
    case Condition::node_only: return "node_only";
    case Condition::bow: return "bow";
  }
  return "?";
}

inline Condition condition_from_string(std::string_view s) {
  if (s == "contextual") return Condition::contextual;
  if (s == "node_only") return Condition::node_only;
  if (s == "bow") return Condition::bow;
  throw FormatError("unknown condition '" + std::string(s) + "'");
}

struct NodeKey {
  std::string graph_id;
  std::string node_id;

  bool operator==(const NodeKey&) const = default;
};

struct StoreHeader {
  std::string model_name;
  std::size_t hidden_dim = 0;
  std::vector<int> layers;
  Condition condition = Condition::contextual;
  std::vector<NodeKey> index;
  nlohmann::json meta = nlohmann::json::object();

  bool operator==(const StoreHeader&) const = default;
};

/// Per-layer, per-node float32 vectors. Immutable once constructed.
class FeatureStore {
 public:
  FeatureStore() = default;

  FeatureStore(StoreHeader header, std::vector<float> payload)
      : header_(std::move(header)), payload_(std::move(payload)) {
    check();
    for (std::size_t i = 0; i < header_.index.size(); ++i)
      positions_.emplace(key(header_.index[i].graph_id, header_.index[i].node_id), i);
  }

  const StoreHeader& header() const { return header_; }
  std::span<const float> payload() const { return payload_; }
  std::size_t dim() const { return header_.hidden_dim; }
  std::size_t node_count() const { return header_.index.size(); }
  const std::vector<int>& layers() const { return header_.layers; }

  std::size_t layer_position(int layer) const {
    auto it = std::lower_bound(header_.layers.begin(), header_.layers.end(), layer);
    if (it == header_.layers.end() || *it != layer)
      throw ValidationError("layer " + std::to_string(layer) + " not present in store");
    return static_cast<std::size_t>(it - header_.layers.begin());
  }

  std::optional<std::size_t> node_position(std::string_view graph_id,
                                           std::string_view node_id) const {
    auto it = positions_.find(key(graph_id, node_id));
    if (it == positions_.end()) return std::nullopt;
    return it->second;
  }

  std::span<const float> vector(std::size_t layer_pos, std::size_t node_pos) const {
    const std::size_t d = header_.hidden_dim;
    return {payload_.data() + (layer_pos * node_count() + node_pos) * d, d};
  }

  /// Node vectors of one graph at one layer, as an n x d matrix in the
  /// graph's canonical node order.
  Matrix graph_features(const ReasoningGraph& g, int layer) const {
    const std::size_t lp = layer_position(layer);
    Matrix m(g.size(), dim());
    for (std::size_t v = 0; v < g.size(); ++v) {
      auto pos = node_position(g.graph_id, g.nodes[v].node_id);
      if (!pos)
        throw ValidationError("store has no vector for node '" + g.nodes[v].node_id +
                              "' of graph '" + g.graph_id + "'");
      auto src = vector(lp, *pos);
      auto dst = m.row(v);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k];
    }
    return m;
  }

  /// Every indexed (graph_id, node_id) must exist in the graph collection.
  void validate_against(const std::vector<ReasoningGraph>& graphs) const {
    std::unordered_map<std::string, const ReasoningGraph*> by_id;
    for (const auto& g : graphs) by_id.emplace(g.graph_id, &g);
    for (const auto& k : header_.index) {
      auto it = by_id.find(k.graph_id);
      if (it == by_id.end() || !find_node(*it->second, k.node_id))
        throw ValidationError("store index entry (" + k.graph_id + ", " + k.node_id +
                              ") is not in the graph file");
    }
  }

  bool operator==(const FeatureStore& o) const {
    return header_ == o.header_ && payload_ == o.payload_;
  }

 private:
  StoreHeader header_;
  std::vector<float> payload_;
  std::unordered_map<std::string, std::size_t> positions_;

  static std::string key(std::string_view g, std::string_view n) {
    std::string k(g);
    k.push_back('\x1f');
    k.append(n);
    return k;
  }

  void check() const {
    if (header_.hidden_dim == 0) throw ValidationError("store hidden_dim must be positive");
    if (header_.layers.empty()) throw ValidationError("store has no layers");
    if (header_.index.empty()) throw ValidationError("store has no nodes");
    if (!std::is_sorted(header_.layers.begin(), header_.layers.end()) ||
        std::adjacent_find(header_.layers.begin(), header_.layers.end()) != header_.layers.end())
      throw ValidationError("store layers must be sorted and unique");
    const std::size_t expected = header_.layers.size() * header_.index.size() * header_.hidden_dim;
    if (payload_.size() != expected)
      throw FormatError("payload length mismatch: expected " + std::to_string(expected) +
                        " floats, got " + std::to_string(payload_.size()));
    for (std::size_t i = 0; i < payload_.size(); ++i)
      if (!std::isfinite(payload_[i]))
        throw ValidationError("non-finite value at payload offset " + std::to_string(i));
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

inline nlohmann::json header_to_json(const StoreHeader& h) {
  nlohmann::json j;
  j["model_name"] = h.model_name;
  j["hidden_dim"] = h.hidden_dim;
  j["layers"] = h.layers;
  j["condition"] = to_string(h.condition);
  auto index = nlohmann::json::array();
  for (const auto& k : h.index) index.push_back({k.graph_id, k.node_id});
  j["index"] = std::move(index);
  j["meta"] = h.meta;
  return j;
}

inline StoreHeader header_from_json(const nlohmann::json& j) {
  try {
    StoreHeader h;
    h.model_name = j.at("model_name").get<std::string>();
    h.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    h.layers = j.at("layers").get<std::vector<int>>();
    h.condition = condition_from_string(j.at("condition").get<std::string>());
    for (const auto& e : j.at("index")) {
      if (!e.is_array() || e.size() != 2) throw FormatError("index entries must be [graph_id, node_id]");
      h.index.push_back({e[0].get<std::string>(), e[1].get<std::string>()});
    }
    if (j.contains("meta")) h.meta = j.at("meta");
    return h;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("store header schema mismatch: ") + ex.what());
  }
}

}  // namespace detail

inline std::string encode_store(const FeatureStore& store) {
  const std::string header = detail::header_to_json(store.header()).dump();
  std::string out;
  out.reserve(16 + header.size() + store.payload().size() * 4);
  out.append(kRdpfMagic, 4);
  detail::put_u32(out, kRdpfVersion);
  detail::put_u64(out, header.size());
  out += header;
  for (float f : store.payload()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline FeatureStore decode_store(std::string_view bytes) {
  if (bytes.size() < 16) throw FormatError("RDPF file truncated before end of preamble");
  if (std::memcmp(bytes.data(), kRdpfMagic, 4) != 0) throw FormatError("bad magic: not an RDPF file");
  const auto version = static_cast<std::uint32_t>(detail::get_le(bytes, 4, 4));
  if (version != kRdpfVersion)
    throw VersionError("RDPF version mismatch: file has " + std::to_string(version) +
                       ", reader supports " + std::to_string(kRdpfVersion));
  const std::uint64_t header_len = detail::get_le(bytes, 8, 8);
  if (header_len > bytes.size() - 16) throw FormatError("RDPF header length exceeds file size");
  nlohmann::json hj;
  try {
    hj = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::parse_error& ex) {
    throw FormatError(std::string("RDPF header is not valid JSON: ") + ex.what());
  }
  StoreHeader header = detail::header_from_json(hj);
  const std::size_t payload_bytes = bytes.size() - 16 - header_len;
  const std::size_t expected = header.layers.size() * header.index.size() * header.hidden_dim;
  if (payload_bytes != expected * 4)
    throw FormatError("payload length mismatch: expected " + std::to_string(expected * 4) +
                      " bytes, got " + std::to_string(payload_bytes));
  std::vector<float> payload(expected);
  const std::size_t base = 16 + header_len;
  for (std::size_t i = 0; i < expected; ++i)
    payload[i] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(bytes, base + 4 * i, 4)));
  return FeatureStore(std::move(header), std::move(payload));
}

inline void write_store(const FeatureStore& store, const fs::path& path) {
  write_file_atomic(path, encode_store(store));
}

inline FeatureStore read_store(const fs::path& path) {
  return decode_store(read_text_file(path));
}

/// Half-open character interval [begin, end).
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// Mean of the hidden-state rows whose token interval overlaps the node span
/// by at least one character.
inline std::vector<double> pool_span(const Matrix& hidden_states,
                                     std::span<const TokenSpan> token_offsets,
                                     TokenSpan node_span) {
  if (token_offsets.size() != hidden_states.rows())
    throw ValidationError("token offsets and hidden states disagree on token count");
  std::vector<double> mean(hidden_states.cols(), 0.0);
  std::size_t count = 0;
  for (std::size_t t = 0; t < token_offsets.size(); ++t) {
    const auto lo = std::max(token_offsets[t].begin, node_span.begin);
    const auto hi = std::min(token_offsets[t].end, node_span.end);
    if (hi <= lo) continue;
    auto row = hidden_states.row(t);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += row[k];
    ++count;
  }
  if (count == 0)
    throw ValidationError("no token overlaps the node span [" + std::to_string(node_span.begin) +
                          ", " + std::to_string(node_span.end) + ")");
  for (double& x : mean) x /= static_cast<double>(count);
  return mean;
}

/// Lowercased alphanumeric tokens; everything else separates.
inline std::vector<std::string> lexical_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || uc >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Feature-hashed, L2-normalized bag of words.
inline std::vector<double> bow_features(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < 2) throw ValidationError("bag-of-words dimension must be at least 2");
  std::vector<double> v(dim, 0.0);
  const std::string seed_bytes = hex64(seed);
  for (const std::string& tok : lexical_tokens(text)) {
    std::uint64_t h = fnv1a64(tok, fnv1a64(seed_bytes));
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    v[h % dim] += 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

/// Single-layer bag-of-words store over every node of every graph.
inline FeatureStore bow_store(const std::vector<ReasoningGraph>& graphs, std::size_t dim,
                              std::uint64_t seed) {
  StoreHeader h;
  h.model_name = "bag-of-words";
  h.hidden_dim = dim;
  h.layers = {0};
  h.condition = Condition::bow;
  h.meta = {{"hash_seed", seed}, {"featurizer", "hashed-bow-l2"}};
  std::vector<float> payload;
  for (const auto& g : graphs) {
    for (const auto& n : g.nodes) {
      h.index.push_back({g.graph_id, n.node_id});
      for (double x : bow_features(n.text, dim, seed)) payload.push_back(static_cast<float>(x));
    }
  }
  return FeatureStore(std::move(h), std::move(payload));
}

}  // namespace dagprobe
