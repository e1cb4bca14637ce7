#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "personaforge/tensor/tensor.hpp"

namespace personaforge::tensor {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Loaded checkpoint contents. Tensors are independent copies.
struct Checkpoint {
  ParameterList tensors;
  nlohmann::json meta = nlohmann::json::object();

  const Tensor* find(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
};

// Layout: 8-byte little-endian header length N, N bytes of UTF-8 JSON
// {"format":"personaforge-checkpoint","version":1,"meta":{...},
//  "tensors":[{"name","shape","offset","count"}]}, then the float64
// little-endian payload. Offsets are in bytes from the payload start.
void save_checkpoint(const std::filesystem::path& path, const ParameterList& parameters,
                     const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values into `parameters` by name; shapes must agree. Names missing
/// from the checkpoint are an error unless allow_missing is set.
void restore_parameters(const Checkpoint& checkpoint, const ParameterList& parameters,
                        bool allow_missing = false);

/// Deep copy of every tensor, preserving names.
ParameterList clone_parameters(const ParameterList& parameters);

}  // namespace personaforge::tensor
