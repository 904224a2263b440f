// Copyright 2026 The figmtl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Binary checkpoints: magic, version, a JSON header describing the model and
// its vocabulary, then every parameter as little-endian IEEE-754 doubles in
// ModelParams::named() order. Round trips are bit-exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "figmtl/corpus.hpp"
#include "figmtl/errors.hpp"
#include "figmtl/model.hpp"

namespace figmtl::checkpoint {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kMagic = "FIGMTLCK";
inline constexpr std::uint32_t kVersion = 1;

struct Checkpoint {
  model::ModelParams params;
  corpus::Vocabulary vocab;
  /// Free-form provenance stored alongside the weights.
  json metadata = json::object();
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

inline std::uint64_t get_uint(std::string_view in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw DataError("checkpoint is truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

inline json encoder_json(const model::EncoderConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model}, {"n_heads", c.n_heads},
              {"n_layers", c.n_layers},     {"max_len", c.max_len}, {"ffn_dim", c.ffn_dim},
              {"dropout", c.dropout}};
}

inline model::EncoderConfig encoder_from_json(const json& j) {
  model::EncoderConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.max_len = j.at("max_len").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  return c;
}

}  // namespace detail

inline std::string serialize(const Checkpoint& ck) {
  const auto& p = ck.params;
  if (p.config.vocab_size != ck.vocab.size()) {
    throw ContractError("checkpoint: model vocab_size " + std::to_string(p.config.vocab_size) +
                        " differs from vocabulary size " + std::to_string(ck.vocab.size()));
  }
  json header;
  header["encoder"] = detail::encoder_json(p.config);
  header["regime"] = model::to_string(p.regime);
  header["vocab_hash"] = corpus::hex64(ck.vocab.hash());
  header["vocab"] = ck.vocab.tokens();
  json tensors = json::array();
  const auto named = p.named();
  for (const auto& [name, t] : named) tensors.push_back({{"name", name}, {"shape", t.shape()}});
  header["tensors"] = tensors;
  header["metadata"] = ck.metadata;
  const std::string h = header.dump();

  std::string out(kMagic);
  detail::put_u32(out, kVersion);
  detail::put_u64(out, h.size());
  out += h;
  for (const auto& [name, t] : named)
    for (double v : t.data()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline Checkpoint deserialize(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw DataError("not a figmtl checkpoint");
  std::size_t pos = kMagic.size();
  const auto version = detail::get_uint(bytes, pos, 4);
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto hlen = detail::get_uint(bytes, pos, 8);
  if (pos + hlen > bytes.size()) throw DataError("checkpoint is truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, hlen));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += hlen;

  Checkpoint ck;
  try {
    ck.vocab = corpus::Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    if (corpus::hex64(ck.vocab.hash()) != header.at("vocab_hash").get<std::string>()) {
      throw DataError("checkpoint vocabulary hash mismatch");
    }
    const auto cfg = detail::encoder_from_json(header.at("encoder"));
    const auto regime = model::parse_regime(header.at("regime").get<std::string>());
    ck.params = model::init_params(cfg, regime, 0, 0.0);
    ck.metadata = header.value("metadata", json::object());
    const auto& tensors = header.at("tensors");
    auto named = ck.params.named();
    if (tensors.size() != named.size()) throw DataError("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < named.size(); ++i) {
      auto& [name, t] = named[i];
      if (tensors[i].at("name").get<std::string>() != name ||
          tensors[i].at("shape").get<ad::Shape>() != t.shape()) {
        throw DataError("checkpoint tensor " + std::to_string(i) + " does not match '" + name + "'");
      }
      auto dst = t.mutable_data();
      for (auto& v : dst) v = std::bit_cast<double>(detail::get_uint(bytes, pos, 8));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid checkpoint configuration: ") + e.what());
  }
  if (pos != bytes.size()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

inline void save(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = serialize(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

inline Checkpoint load(const std::filesystem::path& path) {
  return deserialize(corpus::detail::read_file(path));
}

}  // namespace figmtl::checkpoint
