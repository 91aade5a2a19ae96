#pragma once

#include <string>

#include "kdda/nn.hpp"

namespace kdda {

// Versioned binary checkpoint:
//   bytes 0-3   magic "DGKD"
//   u32 LE      format version (currently 1)
//   u32 LE      layer-spec string length L
//   L bytes     layer spec (same syntax as Model::from_spec)
//   u64 LE      parameter count P
//   P * f64 LE  parameters in Model::params() order
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace kdda
