#include "personaforge/gan/variants.hpp"

#include <fstream>

#include "personaforge/store/image_io.hpp"
#include "personaforge/tensor/ops.hpp"

namespace personaforge::gan {

namespace ts = tensor;
using tensor::Tensor;

nlohmann::json VariantBatch::metadata() const {
  nlohmann::json items = nlohmann::json::array();
  for (const Variant& v : variants) {
    items.push_back({{"variant_id", v.id}, {"latent_seed", seed}, {"latent_index", v.latent_index}});
  }
  return {{"source_id", source_id}, {"industry", industry}, {"lambda", mix},
          {"seed", seed},           {"noise_seed", seed},   {"variants", items}};
}

Tensor mixed_style(const Tensor& w_src, const Tensor& z, const GeneratorParams& params,
                   double mix) {
  return ts::add(ts::scale(w_src, mix), ts::scale(map_latent(z, params), 1.0 - mix));
}

VariantBatch generate_variants(const store::ContentAsset& source, const Tensor& source_image,
                               const GanModel& model, std::size_t k, double mix,
                               std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("generate_variants: k must be positive");
  if (!(mix >= 0.0 && mix <= 1.0)) {
    throw std::invalid_argument("generate_variants: lambda must lie in [0, 1]");
  }
  ts::NoGradGuard no_grad;
  const Tensor w_src = style_of(source_image, model.style);
  if (!w_src.all_finite()) {
    throw ts::NumericError("generate_variants: non-finite source style for " + source.id);
  }
  VariantBatch batch{source.id, store::normalize_industry(source.industry), mix, seed, {}};
  for (std::size_t i = 0; i < k; ++i) {
    const Tensor w = mixed_style(w_src, latent_for(seed, i), model.generator, mix);
    batch.variants.push_back({source.id + "-" + std::to_string(seed) + "-" + std::to_string(i), i,
                              synthesize(w, model.generator, seed)});
  }
  return batch;
}

const std::vector<std::string>& ModelRegistry::default_industries() {
  static const std::vector<std::string> names = {"automobile", "fast_food", "fashion"};
  return names;
}

ModelRegistry::ModelRegistry() {
  for (const auto& name : default_industries()) entries_[name] = std::nullopt;
}

ModelRegistry::ModelRegistry(std::filesystem::path file) : ModelRegistry() {
  file_ = std::move(file);
}

ModelRegistry ModelRegistry::load(const std::filesystem::path& file) {
  ModelRegistry registry(file);
  if (!std::filesystem::exists(file)) return registry;
  std::ifstream in(file);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(file.string() + ": " + e.what());
  }
  if (!j.contains("industries") || !j["industries"].is_object()) {
    throw std::runtime_error(file.string() + ": missing \"industries\" object");
  }
  for (const auto& [name, ref] : j["industries"].items()) {
    const std::string key = store::normalize_industry(name);
    if (ref.is_null()) {
      registry.entries_[key] = std::nullopt;
    } else if (ref.is_string()) {
      registry.entries_[key] = ref.get<std::string>();
    } else {
      throw std::runtime_error(file.string() + ": industry \"" + name + "\" must map to a path or null");
    }
  }
  return registry;
}

void ModelRegistry::save() const {
  if (file_.empty()) throw std::logic_error("model registry has no backing file");
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  const auto tmp = std::filesystem::path(file_.string() + ".tmp");
  {
    std::ofstream out(tmp);
    out << to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, file_);
}

std::vector<std::string> ModelRegistry::industries() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

bool ModelRegistry::has_industry(const std::string& industry) const {
  return entries_.count(store::normalize_industry(industry)) > 0;
}

void ModelRegistry::add_industry(const std::string& industry) {
  entries_.try_emplace(store::normalize_industry(industry), std::nullopt);
}

void ModelRegistry::publish(const std::string& industry, const std::filesystem::path& checkpoint) {
  std::filesystem::path ref = checkpoint;
  if (!file_.empty() && checkpoint.is_absolute()) {
    const auto relative = checkpoint.lexically_relative(std::filesystem::absolute(file_).parent_path());
    if (!relative.empty() && *relative.begin() != "..") ref = relative;
  }
  const std::string key = store::normalize_industry(industry);
  entries_[key] = ref.generic_string();
  std::lock_guard lock(cache_->mutex);
  cache_->models.erase(key);
}

std::optional<std::filesystem::path> ModelRegistry::checkpoint(const std::string& industry) const {
  const auto it = entries_.find(store::normalize_industry(industry));
  if (it == entries_.end()) throw std::out_of_range("unknown industry: " + industry);
  if (!it->second) return std::nullopt;
  return resolve(*it->second);
}

std::shared_ptr<const GanModel> ModelRegistry::model(const std::string& industry) const {
  const std::string key = store::normalize_industry(industry);
  const auto path = checkpoint(key);
  if (!path) throw ModelNotTrainedError("no generator trained for industry " + key);
  std::error_code ec;
  const auto stamp = std::filesystem::last_write_time(*path, ec);
  if (ec) throw ModelNotTrainedError("generator checkpoint for " + key + " not found: " + path->string());
  const std::string version = path->string() + "@" +
                              std::to_string(stamp.time_since_epoch().count()) + ":" +
                              std::to_string(std::filesystem::file_size(*path, ec));
  std::lock_guard lock(cache_->mutex);
  const auto it = cache_->models.find(key);
  if (it != cache_->models.end() && it->second.first == version) return it->second.second;
  auto loaded = std::make_shared<const GanModel>(GanModel::load(*path));
  cache_->models[key] = {version, loaded};
  return loaded;
}

nlohmann::json ModelRegistry::to_json() const {
  nlohmann::json industries = nlohmann::json::object();
  for (const auto& [name, ref] : entries_) {
    industries[name] = ref ? nlohmann::json(*ref) : nlohmann::json(nullptr);
  }
  return {{"industries", industries}};
}

std::filesystem::path ModelRegistry::resolve(const std::string& ref) const {
  const std::filesystem::path p(ref);
  if (p.is_absolute() || file_.empty()) return p;
  return file_.parent_path() / p;
}

}  // namespace personaforge::gan
