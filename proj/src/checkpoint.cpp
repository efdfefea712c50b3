#include "triage/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <map>

#include "triage/errors.hpp"

namespace triage {

using ojson = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

ojson config_json(const ModelConfig& c) {
  ojson j;
  j["vocab_size"] = c.vocab_size;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["feed_forward"] = c.feed_forward;
  j["max_positions"] = c.max_positions;
  j["dropout"] = c.dropout;
  j["num_labels"] = c.num_labels;
  j["head"] = to_string(c.head);
  j["pooling"] = to_string(c.pooling);
  j["positional_embeddings"] = c.positional_embeddings;
  j["init_range"] = c.init_range;
  j["layer_norm_eps"] = c.layer_norm_eps;
  return j;
}

ModelConfig config_from(const ojson& j) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("vocab_size", c.vocab_size);
  get("hidden", c.hidden);
  get("layers", c.layers);
  get("heads", c.heads);
  get("feed_forward", c.feed_forward);
  get("max_positions", c.max_positions);
  get("dropout", c.dropout);
  get("num_labels", c.num_labels);
  if (j.contains("head")) c.head = parse_head_kind(j.at("head").get<std::string>());
  if (j.contains("pooling")) c.pooling = parse_pooling(j.at("pooling").get<std::string>());
  get("positional_embeddings", c.positional_embeddings);
  get("init_range", c.init_range);
  get("layer_norm_eps", c.layer_norm_eps);
  c.validate();
  return c;
}

LoraTarget parse_target(const std::string& s) {
  if (s == "query") return LoraTarget::Query;
  if (s == "key") return LoraTarget::Key;
  if (s == "value") return LoraTarget::Value;
  throw FormatError("unknown LoRA target '" + s + "'");
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return config_json(config).dump(2); }

ModelConfig model_config_from_json(std::string_view text) {
  try {
    return config_from(ojson::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const EncoderModel<float>& model, const CheckpointMeta& meta) {
  ojson header;
  header["format_version"] = kCheckpointVersion;
  header["model_config"] = config_json(model.config());
  header["tokenizer_hash"] = meta.tokenizer_hash;
  ojson adapter;
  adapter["rank"] = model.lora_rank();
  ojson targets = ojson::array();
  for (LoraTarget t : model.lora_targets()) targets.push_back(to_string(t));
  adapter["targets"] = targets;
  header["adapter"] = adapter;
  header["strategy"] = {{"name", meta.strategy}, {"max_len", meta.max_len}, {"segment_size", meta.segment_size}};
  header["extra"] = ojson::parse(meta.extra_json);
  ojson index = ojson::array();
  std::size_t offset = 0;
  model.weights().visit([&](const std::string& name, const Matrix<float>& m, ParamGroup) {
    index.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::size_t>(m.size());
  });
  header["tensors"] = index;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t length = text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&length), sizeof length);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  model.weights().visit([&](const std::string&, const Matrix<float>& m, ParamGroup) {
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  });
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::string_view(magic, sizeof magic) != kCheckpointMagic) {
    throw FormatError(path + ": not a triage checkpoint");
  }
  std::uint32_t version = 0;
  std::uint64_t length = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&length), sizeof length);
  if (!in || version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  if (length > (1u << 30)) throw FormatError(path + ": implausible header length");
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw FormatError(path + ": truncated header");

  Checkpoint ck;
  try {
    const ojson header = ojson::parse(text);
    const ModelConfig config = config_from(header.at("model_config"));
    ck.meta.tokenizer_hash = header.value("tokenizer_hash", "");
    const auto& strat = header.at("strategy");
    ck.meta.strategy = strat.value("name", "");
    ck.meta.max_len = strat.value("max_len", std::size_t{0});
    ck.meta.segment_size = strat.value("segment_size", std::size_t{0});
    ck.meta.extra_json = header.contains("extra") ? header.at("extra").dump() : "{}";

    // Rebuild the tensor layout: a fresh model with the same config and
    // adapter structure, then overwrite every tensor from the file.
    EncoderModel<float> model(config, 0);
    const auto& adapter = header.at("adapter");
    const int rank = adapter.at("rank").get<int>();
    if (rank > 0) {
      std::vector<LoraTarget> targets;
      for (const auto& t : adapter.at("targets")) targets.push_back(parse_target(t.get<std::string>()));
      model.inject_lora(rank, targets, 0);
    }
    std::map<std::string, std::pair<std::array<long, 2>, std::size_t>> index;
    for (const auto& t : header.at("tensors")) {
      index[t.at("name").get<std::string>()] = {
          {t.at("shape").at(0).get<long>(), t.at("shape").at(1).get<long>()}, t.at("offset").get<std::size_t>()};
    }
    const auto data_start = in.tellg();
    std::size_t expected = 0;
    model.weights().visit([&](const std::string& name, Matrix<float>& m, ParamGroup) {
      auto it = index.find(name);
      if (it == index.end()) throw FormatError(path + ": missing tensor " + name);
      const auto& [shape, offset] = it->second;
      if (shape[0] != m.rows() || shape[1] != m.cols()) throw FormatError(path + ": shape mismatch for " + name);
      in.seekg(data_start + static_cast<std::streamoff>(offset * sizeof(float)));
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
      if (!in) throw FormatError(path + ": truncated tensor data for " + name);
      ++expected;
    });
    if (expected != index.size()) throw FormatError(path + ": unexpected extra tensors");
    ck.model = std::move(model);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": malformed checkpoint header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path + ": " + e.what());
  }
  return ck;
}

}  // namespace triage
