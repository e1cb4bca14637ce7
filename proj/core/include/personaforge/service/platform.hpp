#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "personaforge/feedback/scheduler.hpp"
#include "personaforge/fusion/classifier.hpp"
#include "personaforge/gan/training.hpp"
#include "personaforge/gan/variants.hpp"
#include "personaforge/recommend/cohort.hpp"
#include "personaforge/store/store.hpp"
#include "personaforge/training/trainer.hpp"

namespace personaforge::service {

inline constexpr const char* kApiVersion = "v1";
inline constexpr const char* kApiPrefix = "/api/v1";
inline constexpr std::size_t kMaxVariants = 8;

/// Failure with an HTTP status and a machine-readable code.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message,
           nlohmann::json details = nlohmann::json::array())
      : std::runtime_error(message), status_(status), code_(std::move(code)), details_(std::move(details)) {}

  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const nlohmann::json& details() const { return details_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string code_;
  nlohmann::json details_;
};

struct SourceConfig {
  std::string kind;  // brand | users
  std::filesystem::path path;
  store::BrandFilter filter;
};

struct PlatformConfig {
  fusion::ViewMode profiler_mode = fusion::ViewMode::kFused;
  training::TrainConfig profiler;
  gan::GanConfig generator;
  recommend::RankConfig ranking;
  std::size_t min_cohort = recommend::kDefaultMinCohort;
  double mix = gan::kDefaultMix;
  feedback::ScheduleConfig schedule;
  std::int64_t clock_start = 0;
  std::vector<std::string> industries = gan::ModelRegistry::default_industries();
  bool admin = true;
  std::uint64_t manifest_seed = 0;
  std::vector<SourceConfig> sources;

  /// Unknown keys are rejected. Relative source paths resolve against `base`.
  static PlatformConfig from_json(const nlohmann::json& j, const std::filesystem::path& base = {});
  static PlatformConfig load(const std::filesystem::path& file);
  void validate() const;
};

struct Response {
  int status = 200;
  nlohmann::json body;
  std::string binary;  // set for image responses
  std::string content_type = "application/json";
  std::string schema;  // response schema name; "error" for failures
};

struct Request {
  std::string method;
  std::string path;  // without query string
  std::string body;
  std::string idempotency_key;
};

/// Maps n positions to a seeded permutation (Fisher-Yates driven by
/// mt19937_64 with rejection-sampled bounded draws). result[i] is the item
/// shown at position i.
std::vector<std::size_t> shuffle_positions(std::size_t n, std::uint64_t seed);

/// Number of original cards shown next to k generated ones: ceil(k / 5).
std::size_t originals_for(std::size_t k);

/// Texts of every post plus the flagged images, read from the store root.
fusion::ProfileInputs profile_inputs(const store::UserProfile& user, const store::Store& store,
                                     const encoders::Vocabulary& vocab);
/// Labeled users of a snapshot as training examples.
std::vector<training::LabeledExample> labeled_examples(const store::StoreState& state,
                                                       const store::Store& store);

/// The platform behind the HTTP API. Requests are serialized for writes;
/// retraining runs on a single background worker in submission order.
///
/// Data layout under the store root: the store files, models/profiler.ckpt,
/// models/registry.json, models/<industry>.ckpt, ledger.jsonl and
/// rounds/<round id>/<card id>.png.
class Platform {
 public:
  Platform(std::filesystem::path root, PlatformConfig config);
  ~Platform();
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  Response handle(const Request& request);

  nlohmann::json health() const;
  nlohmann::json industries() const;
  nlohmann::json ingest(const nlohmann::json& request);
  nlohmann::json infer(const nlohmann::json& request);
  nlohmann::json generate(const nlohmann::json& request);
  nlohmann::json round(const std::string& round_id) const;
  std::string card_png(const std::string& round_id, const std::string& card_id) const;
  nlohmann::json submit_feedback(const nlohmann::json& request);
  nlohmann::json close_round(const std::string& round_id);
  nlohmann::json retrain(const nlohmann::json& request);
  nlohmann::json job(const std::string& job_id) const;
  nlohmann::json tick(const nlohmann::json& request);

  /// Blocks until the job queue is empty and no job is running.
  void wait_idle();

  /// Server-side round document, including originality markers.
  nlohmann::json stored_round(const std::string& round_id) const;

  const std::filesystem::path& root() const { return root_; }
  const PlatformConfig& config() const { return config_; }
  store::Store& store() { return *store_; }
  std::int64_t now() const;

  std::filesystem::path profiler_path() const { return root_ / "models" / "profiler.ckpt"; }
  std::filesystem::path registry_path() const { return root_ / "models" / "registry.json"; }
  std::filesystem::path ledger_path() const { return root_ / "ledger.jsonl"; }

 private:
  Response dispatch(const Request& request);
  void require_admin() const;
  std::string next_id(const std::string& counter, const std::string& prefix);
  std::shared_ptr<const fusion::ProfilerModel> profiler() const;
  nlohmann::json enqueue(const std::string& target, const std::optional<std::string>& industry);
  bool job_pending(const std::string& target, const std::optional<std::string>& industry) const;
  void set_job(const std::string& job_id, const nlohmann::json& patch);
  void worker_loop();
  nlohmann::json run_job(const nlohmann::json& job);
  nlohmann::json train_profiler_job();
  nlohmann::json train_generator_job(const std::string& industry);
  void persist();

  std::filesystem::path root_;
  PlatformConfig config_;
  std::unique_ptr<store::Store> store_;
  gan::ModelRegistry registry_;

  std::mutex request_mutex_;
  mutable std::mutex persist_mutex_;
  mutable std::mutex registry_mutex_;
  mutable std::mutex profiler_mutex_;
  mutable std::shared_ptr<const fusion::ProfilerModel> profiler_;
  mutable std::string profiler_version_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace personaforge::service
