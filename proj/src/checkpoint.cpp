#include "oolib/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace oolib {

namespace {
constexpr char kMagic[8] = {'O', 'O', 'W', 'M', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::string& path, const ParamSet& params,
                     const std::string& meta_json) {
  nlohmann::json manifest;
  manifest["meta"] = meta_json.empty() ? nlohmann::json::object()
                                       : nlohmann::json::parse(meta_json);
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    tensors.push_back({{"name", params.names[i]},
                       {"rows", params.values[i].rows},
                       {"cols", params.values[i].cols}});
  }
  manifest["tensors"] = std::move(tensors);
  const std::string header = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const Tensor& t : params.values) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!out) throw IoError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path + " is not a checkpoint file");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated manifest in " + path);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad manifest in " + path + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.meta_json = manifest.value("meta", nlohmann::json::object()).dump();
  for (const auto& entry : manifest.at("tensors")) {
    Tensor t(entry.at("rows").get<int>(), entry.at("cols").get<int>());
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw IoError("truncated blob in " + path);
    ckpt.params.add(entry.at("name").get<std::string>(), std::move(t));
  }
  return ckpt;
}

}  // namespace oolib
