#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace personaforge::feedback {

enum class TaskKind { kIngestion, kProfilerRetrain, kGeneratorRetrain };

inline constexpr std::array<TaskKind, 3> kTaskKinds = {
    TaskKind::kIngestion, TaskKind::kProfilerRetrain, TaskKind::kGeneratorRetrain};

std::string_view task_name(TaskKind kind);
TaskKind parse_task(std::string_view name);

struct ScheduleConfig {
  std::int64_t ingestion_hours = 12;
  std::int64_t profiler_hours = 168;
  std::int64_t generator_hours = 24;

  std::int64_t interval(TaskKind kind) const;
  /// Intervals must be positive; the profiler interval must lie in [24, 720].
  void validate() const;
};

struct DueTask {
  TaskKind kind = TaskKind::kIngestion;
  std::int64_t due_at = 0;  // logical hours
  bool manual = false;

  bool operator==(const DueTask&) const = default;
};

/// Periodic tasks on a logical clock measured in hours. Each task is due at
/// every positive multiple of its interval after the start time.
class Scheduler {
 public:
  explicit Scheduler(ScheduleConfig config = {}, std::int64_t start = 0);

  std::int64_t now() const { return now_; }
  const ScheduleConfig& config() const { return config_; }

  /// Moves the clock forward and returns every task that fell due in
  /// (now, now + hours], ordered by due time then kind.
  std::vector<DueTask> advance(std::int64_t hours);
  /// A task due immediately; the periodic schedule is unaffected.
  DueTask trigger(TaskKind kind) const;

  nlohmann::json to_json() const;
  static Scheduler from_json(const nlohmann::json& j);

 private:
  ScheduleConfig config_;
  std::int64_t start_ = 0;
  std::int64_t now_ = 0;
};

}  // namespace personaforge::feedback
