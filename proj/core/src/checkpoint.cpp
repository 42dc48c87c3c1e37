#include "aigflow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aigflow/error.hpp"

namespace aigflow {

using nlohmann::json;

namespace {

json config_json(const ModelConfig& c) {
  return {{"d", c.d},           {"tokenizer_rounds", c.tokenizer_rounds}, {"tx_depth", c.tx_depth},
          {"heads", c.heads},   {"pool_depth", c.pool_depth},             {"leaky_slope", c.leaky_slope},
          {"seed", c.seed}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.d = j.at("d").get<std::size_t>();
  c.tokenizer_rounds = j.at("tokenizer_rounds").get<std::size_t>();
  c.tx_depth = j.at("tx_depth").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.pool_depth = j.at("pool_depth").get<std::size_t>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

void put_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

json read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint manifest " + manifest.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, "checkpoint manifest: " + std::string(e.what()));
  }
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& manifest) {
  json params = json::array();
  std::string blob;
  for (const auto& e : model.params().entries()) {
    params.push_back({{"name", e.name},
                      {"shape", {e.tensor.rows(), e.tensor.cols()}},
                      {"offset", blob.size()},
                      {"bytes", e.tensor.numel() * 8}});
    for (double v : e.tensor.values()) put_le(blob, v);
  }
  const auto bin = blob_path(manifest);
  json j = {{"format", "aigflow-checkpoint"},
            {"version", 1},
            {"config", config_json(model.config())},
            {"blob", bin.filename().string()},
            {"blob_bytes", blob.size()},
            {"parameters", params}};
  std::ofstream mo(manifest, std::ios::binary);
  std::ofstream bo(bin, std::ios::binary);
  if (!mo || !bo) throw Error(ErrorCode::kIo, "cannot write checkpoint " + manifest.string());
  mo << j.dump(2) << '\n';
  bo.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!mo || !bo) throw Error(ErrorCode::kIo, "short write for checkpoint " + manifest.string());
}

void load_parameters(Model& model, const std::filesystem::path& manifest) {
  const json j = read_manifest(manifest);
  if (config_from(j.at("config")) != model.config())
    throw Error(ErrorCode::kShapeMismatch, "checkpoint config differs from the model config");
  const auto bin = manifest.parent_path() / j.at("blob").get<std::string>();
  std::ifstream bi(bin, std::ios::binary);
  if (!bi) throw Error(ErrorCode::kIo, "cannot open checkpoint blob " + bin.string());
  std::ostringstream ss;
  ss << bi.rdbuf();
  const std::string blob = ss.str();
  if (blob.size() != j.at("blob_bytes").get<std::size_t>())
    throw Error(ErrorCode::kShapeMismatch, "checkpoint blob has " + std::to_string(blob.size()) + " bytes");

  const auto& table = j.at("parameters");
  auto& entries = model.params().entries();
  if (table.size() != entries.size())
    throw Error(ErrorCode::kShapeMismatch, "checkpoint has " + std::to_string(table.size()) + " parameters, model " +
                                               std::to_string(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& row = table[i];
    Tensor t = entries[i].tensor;
    const auto shape = row.at("shape");
    if (row.at("name").get<std::string>() != entries[i].name || shape.at(0).get<std::size_t>() != t.rows() ||
        shape.at(1).get<std::size_t>() != t.cols() || row.at("bytes").get<std::size_t>() != t.numel() * 8)
      throw Error(ErrorCode::kShapeMismatch, "checkpoint parameter " + std::to_string(i) + " ('" +
                                                 row.at("name").get<std::string>() + "') does not match '" +
                                                 entries[i].name + "'");
    const auto offset = row.at("offset").get<std::size_t>();
    if (offset + t.numel() * 8 > blob.size()) throw Error(ErrorCode::kShapeMismatch, "checkpoint offset out of range");
    auto vals = t.mutable_values();
    for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = get_le(blob.data() + offset + 8 * k);
  }
}

Model load_checkpoint(const std::filesystem::path& manifest) {
  Model model(config_from(read_manifest(manifest).at("config")));
  load_parameters(model, manifest);
  return model;
}

}  // namespace aigflow
