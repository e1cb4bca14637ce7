#include "personaforge/feedback/scheduler.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace personaforge::feedback {

std::string_view task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kIngestion: return "ingestion";
    case TaskKind::kProfilerRetrain: return "profiler_retrain";
    case TaskKind::kGeneratorRetrain: return "generator_retrain";
  }
  return "unknown";
}

TaskKind parse_task(std::string_view name) {
  for (TaskKind k : kTaskKinds) {
    if (task_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown task: " + std::string(name));
}

std::int64_t ScheduleConfig::interval(TaskKind kind) const {
  switch (kind) {
    case TaskKind::kIngestion: return ingestion_hours;
    case TaskKind::kProfilerRetrain: return profiler_hours;
    case TaskKind::kGeneratorRetrain: return generator_hours;
  }
  return 0;
}

void ScheduleConfig::validate() const {
  if (ingestion_hours <= 0 || generator_hours <= 0) {
    throw std::invalid_argument("schedule: intervals must be positive");
  }
  if (profiler_hours < 24 || profiler_hours > 720) {
    throw std::invalid_argument("schedule: profiler interval must lie in [24, 720] hours");
  }
}

Scheduler::Scheduler(ScheduleConfig config, std::int64_t start)
    : config_(config), start_(start), now_(start) {
  config_.validate();
}

std::vector<DueTask> Scheduler::advance(std::int64_t hours) {
  if (hours < 0) throw std::invalid_argument("scheduler: cannot move the clock backwards");
  const std::int64_t from = now_ - start_, to = from + hours;
  std::vector<DueTask> due;
  for (TaskKind kind : kTaskKinds) {
    const std::int64_t step = config_.interval(kind);
    for (std::int64_t k = from / step + 1; k * step <= to; ++k) {
      due.push_back({kind, start_ + k * step, false});
    }
  }
  std::stable_sort(due.begin(), due.end(),
                   [](const DueTask& a, const DueTask& b) { return a.due_at < b.due_at; });
  now_ += hours;
  return due;
}

DueTask Scheduler::trigger(TaskKind kind) const { return {kind, now_, true}; }

nlohmann::json Scheduler::to_json() const {
  return {{"start", start_},
          {"now", now_},
          {"intervals",
           {{"ingestion", config_.ingestion_hours},
            {"profiler_retrain", config_.profiler_hours},
            {"generator_retrain", config_.generator_hours}}}};
}

Scheduler Scheduler::from_json(const nlohmann::json& j) {
  ScheduleConfig config;
  const auto& intervals = j.at("intervals");
  config.ingestion_hours = intervals.at("ingestion").get<std::int64_t>();
  config.profiler_hours = intervals.at("profiler_retrain").get<std::int64_t>();
  config.generator_hours = intervals.at("generator_retrain").get<std::int64_t>();
  Scheduler s(config, j.at("start").get<std::int64_t>());
  s.now_ = j.at("now").get<std::int64_t>();
  if (s.now_ < s.start_) throw std::invalid_argument("scheduler: now precedes start");
  return s;
}

}  // namespace personaforge::feedback
