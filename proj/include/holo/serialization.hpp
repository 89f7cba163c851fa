#pragma once

#include <string>
#include <utility>
#include <vector>

#include "holo/tensor.hpp"

namespace holo {

/// Versioned binary container of named tensors, little-endian float32 with
/// shape metadata. Used for model checkpoints and standalone kernel tensors.
void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path);

}  // namespace holo
