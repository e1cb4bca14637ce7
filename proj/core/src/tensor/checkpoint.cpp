#include "personaforge/tensor/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>

namespace personaforge::tensor {

namespace {

constexpr const char* kFormat = "personaforge-checkpoint";
constexpr int kVersion = 1;

void write_u64(std::ostream& out, std::uint64_t value) {
  std::array<char, 8> bytes{};
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t read_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw CheckpointError("checkpoint: truncated file");
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& entry : tensors) {
    if (entry.name == name) return &entry.tensor;
  }
  return nullptr;
}

const Tensor& Checkpoint::at(const std::string& name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw CheckpointError("checkpoint: no tensor named '" + name + "'");
  return *t;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterList& parameters,
                     const nlohmann::json& meta) {
  nlohmann::json header = {{"format", kFormat}, {"version", kVersion}, {"meta", meta}};
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : parameters) {
    entries.push_back({{"name", name},
                       {"shape", tensor.shape()},
                       {"offset", offset},
                       {"count", tensor.numel()}});
    offset += tensor.numel() * 8;
  }
  header["tensors"] = std::move(entries);
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("checkpoint: cannot write " + tmp.string());
    write_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& entry : parameters) {
      for (double v : entry.tensor.data()) write_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw CheckpointError("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  const std::uint64_t header_len = read_u64(in);
  if (header_len > (std::uint64_t{1} << 30)) {
    throw CheckpointError("checkpoint: implausible header length in " + path.string());
  }
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw CheckpointError("checkpoint: truncated header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint: bad header in " + path.string() + ": " + e.what());
  }
  if (header.value("format", "") != kFormat) {
    throw CheckpointError("checkpoint: " + path.string() + " is not a personaforge checkpoint");
  }
  if (header.value("version", 0) != kVersion) {
    throw CheckpointError("checkpoint: unsupported version " +
                          header.value("version", nlohmann::json()).dump());
  }

  Checkpoint result;
  result.meta = header.value("meta", nlohmann::json::object());
  const auto payload_start = in.tellg();
  for (const auto& entry : header.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    const auto count = entry.at("count").get<std::uint64_t>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    if (shape_numel(shape) != count) {
      throw CheckpointError("checkpoint: entry '" + entry.at("name").get<std::string>() +
                            "' has inconsistent shape/count");
    }
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    std::vector<double> values(count);
    for (auto& v : values) v = std::bit_cast<double>(read_u64(in));
    result.tensors.push_back(
        {entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values))});
  }
  return result;
}

void restore_parameters(const Checkpoint& checkpoint, const ParameterList& parameters,
                        bool allow_missing) {
  for (const auto& [name, target] : parameters) {
    const Tensor* source = checkpoint.find(name);
    if (source == nullptr) {
      if (allow_missing) continue;
      throw CheckpointError("checkpoint: missing tensor '" + name + "'");
    }
    if (source->shape() != target.shape()) {
      throw CheckpointError("checkpoint: tensor '" + name + "' has shape " +
                            shape_string(source->shape()) + ", expected " +
                            shape_string(target.shape()));
    }
    Tensor handle = target;
    std::copy(source->data().begin(), source->data().end(), handle.data().begin());
  }
}

ParameterList clone_parameters(const ParameterList& parameters) {
  ParameterList copy;
  copy.reserve(parameters.size());
  for (const auto& [name, tensor] : parameters) copy.push_back({name, tensor.clone()});
  return copy;
}

}  // namespace personaforge::tensor
