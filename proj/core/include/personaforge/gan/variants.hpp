#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "personaforge/gan/generator.hpp"
#include "personaforge/store/records.hpp"

namespace personaforge::gan {

class ModelNotTrainedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultMix = 0.7;

struct Variant {
  std::string id;
  std::uint64_t latent_index = 0;
  tensor::Tensor image;  // [3, 32, 32]
};

struct VariantBatch {
  std::string source_id;
  std::string industry;
  double mix = kDefaultMix;
  std::uint64_t seed = 0;
  std::vector<Variant> variants;

  nlohmann::json metadata() const;
};

/// mix * w_src + (1 - mix) * map_latent(z).
tensor::Tensor mixed_style(const tensor::Tensor& w_src, const tensor::Tensor& z,
                           const GeneratorParams& params, double mix);

/// k variants of a source asset whose [3,64,64] image is `source_image`.
/// Variant i uses z_i = latent_for(seed, i); all share noise seed `seed`.
VariantBatch generate_variants(const store::ContentAsset& source,
                               const tensor::Tensor& source_image, const GanModel& model,
                               std::size_t k, double mix, std::uint64_t seed);

/// Industry -> generator checkpoint map persisted as JSON
/// {"industries": {"automobile": "models/automobile.ckpt", "fashion": null}}.
/// Relative paths resolve against the registry file's directory.
class ModelRegistry {
 public:
  static const std::vector<std::string>& default_industries();

  ModelRegistry();
  explicit ModelRegistry(std::filesystem::path file);

  static ModelRegistry load(const std::filesystem::path& file);
  void save() const;

  std::vector<std::string> industries() const;
  bool has_industry(const std::string& industry) const;
  void add_industry(const std::string& industry);
  void publish(const std::string& industry, const std::filesystem::path& checkpoint);
  std::optional<std::filesystem::path> checkpoint(const std::string& industry) const;

  /// Loaded model for the industry; throws ModelNotTrainedError if none is
  /// published and std::out_of_range for an unknown industry.
  std::shared_ptr<const GanModel> model(const std::string& industry) const;

  nlohmann::json to_json() const;

 private:
  std::filesystem::path resolve(const std::string& ref) const;

  std::filesystem::path file_;
  std::map<std::string, std::optional<std::string>> entries_;
  struct Cache {
    std::mutex mutex;
    std::map<std::string, std::pair<std::string, std::shared_ptr<const GanModel>>> models;
  };
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

}  // namespace personaforge::gan
