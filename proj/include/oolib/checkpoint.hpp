#pragma once

#include <string>

#include "oolib/optim.hpp"

namespace oolib {

// Single-file checkpoint: 8-byte magic, u64 little-endian manifest length,
// JSON manifest (parameter names/shapes plus caller metadata under "meta"),
// then the raw little-endian float64 blob in parameter order.
void save_checkpoint(const std::string& path, const ParamSet& params,
                     const std::string& meta_json);

struct Checkpoint {
  ParamSet params;
  std::string meta_json;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace oolib
