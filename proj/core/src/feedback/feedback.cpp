#include "personaforge/feedback/feedback.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace personaforge::feedback {

namespace {

std::uint64_t fnv1a(std::string_view text, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

std::string_view compliance_name(Compliance c) {
  switch (c) {
    case Compliance::kYes: return "yes";
    case Compliance::kNo: return "no";
    case Compliance::kDontKnow: return "dont_know";
  }
  return "dont_know";
}

Compliance parse_compliance(std::string_view text) {
  if (text == "yes") return Compliance::kYes;
  if (text == "no") return Compliance::kNo;
  if (text == "dont_know") return Compliance::kDontKnow;
  throw FeedbackError("compliance", "compliance must be yes, no or dont_know");
}

void FeedbackRecord::validate() const {
  if (round_id.empty()) throw FeedbackError("round_id", "round_id must be nonempty");
  if (card_id.empty()) throw FeedbackError("card_id", "card_id must be nonempty");
  if (attractiveness < 0 || attractiveness > 100) {
    throw FeedbackError("attractiveness", "attractiveness must be in [0, 100]");
  }
  if (preference < 1 || preference > 5) {
    throw FeedbackError("preference", "preference must be in [1, 5]");
  }
}

void to_json(nlohmann::json& j, const FeedbackRecord& f) {
  j = {{"round_id", f.round_id},
       {"card_id", f.card_id},
       {"attractiveness", f.attractiveness},
       {"preference", f.preference},
       {"compliance", compliance_name(f.compliance)},
       {"would_click", f.would_click ? "yes" : "no"},
       {"timestamp", f.timestamp}};
}

void from_json(const nlohmann::json& j, FeedbackRecord& f) {
  auto integer = [&](const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) {
      throw FeedbackError(key, std::string(key) + " must be an integer");
    }
    return it->get<int>();
  };
  auto text = [&](const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw FeedbackError(key, std::string(key) + " must be a string");
    }
    return it->get<std::string>();
  };
  f.round_id = text("round_id");
  f.card_id = text("card_id");
  f.attractiveness = integer("attractiveness");
  f.preference = integer("preference");
  f.compliance = parse_compliance(text("compliance"));
  const auto click = j.find("would_click");
  if (click != j.end() && click->is_boolean()) {
    f.would_click = click->get<bool>();
  } else {
    const std::string v = text("would_click");
    if (v != "yes" && v != "no") throw FeedbackError("would_click", "would_click must be yes or no");
    f.would_click = v == "yes";
  }
  f.timestamp = j.value("timestamp", std::int64_t{0});
  f.validate();
}

bool judge_variant(const FeedbackRecord& f) { return f.preference >= 4 || f.would_click; }

std::vector<std::string> RoundSettlement::penalized() const {
  std::vector<std::string> out;
  for (const auto& s : sources)
    if (s.penalized) out.push_back(s.source_id);
  return out;
}

std::vector<std::string> RoundSettlement::prioritized() const {
  std::vector<std::string> out;
  for (const auto& s : sources)
    if (!s.penalized) out.push_back(s.source_id);
  return out;
}

nlohmann::json RoundSettlement::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& s : sources) {
    items.push_back({{"source_id", s.source_id},
                     {"successes", s.successes},
                     {"failures", s.failures},
                     {"penalized", s.penalized},
                     {"multiplicity", s.multiplicity}});
  }
  return {{"round_id", round_id},
          {"sources", items},
          {"penalized", penalized()},
          {"prioritized", prioritized()}};
}

RoundSettlement RoundSettlement::from_json(const nlohmann::json& j) {
  RoundSettlement s;
  s.round_id = j.at("round_id").get<std::string>();
  for (const auto& item : j.at("sources")) {
    s.sources.push_back({item.at("source_id").get<std::string>(), item.at("successes").get<int>(),
                         item.at("failures").get<int>(), item.at("penalized").get<bool>(),
                         item.at("multiplicity").get<int>()});
  }
  return s;
}

RoundSettlement settle_round(const std::string& round_id, std::span<const RoundVariant> variants,
                             std::span<const FeedbackRecord> feedback) {
  std::set<std::string> successful_cards;
  for (const auto& f : feedback) {
    if (f.round_id == round_id && judge_variant(f)) successful_cards.insert(f.card_id);
  }
  std::map<std::string, SourceOutcome> by_source;
  for (const auto& v : variants) {
    SourceOutcome& o = by_source[v.source_id];
    o.source_id = v.source_id;
    if (successful_cards.count(v.card_id)) {
      ++o.successes;
    } else {
      ++o.failures;
    }
  }
  RoundSettlement settlement{round_id, {}};
  for (auto& [_, o] : by_source) {
    o.penalized = o.successes == 0;
    o.multiplicity = o.penalized ? 0 : std::min(kMaxMultiplicity, 1 + o.successes);
    settlement.sources.push_back(o);
  }
  return settlement;
}

bool RetrainManifest::contains(const std::string& asset_id) const {
  return std::any_of(entries.begin(), entries.end(),
                     [&](const ManifestEntry& e) { return e.asset_id == asset_id; });
}

std::size_t RetrainManifest::image_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += 1 + e.recipes.size();
  return n;
}

nlohmann::json RetrainManifest::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& e : entries) items.push_back({{"asset_id", e.asset_id}, {"recipes", e.recipes}});
  return {{"round_id", round_id}, {"industry", industry}, {"entries", items}};
}

RetrainManifest RetrainManifest::from_json(const nlohmann::json& j) {
  RetrainManifest m;
  m.round_id = j.at("round_id").get<std::string>();
  m.industry = j.at("industry").get<std::string>();
  for (const auto& item : j.at("entries")) {
    m.entries.push_back({item.at("asset_id").get<std::string>(),
                         item.at("recipes").get<std::vector<Recipe>>()});
  }
  return m;
}

const RoundSettlement& SourceLedger::apply(const RoundSettlement& settlement) {
  const auto existing = rounds_.find(settlement.round_id);
  if (existing != rounds_.end()) return existing->second;
  for (const auto& o : settlement.sources) {
    SourceEntry& e = entries_[o.source_id];
    e.successes += o.successes;
    e.failures += o.failures;
    e.penalized = o.penalized;
    e.multiplicity = o.multiplicity;
  }
  return rounds_.emplace(settlement.round_id, settlement).first->second;
}

bool SourceLedger::settled(const std::string& round_id) const { return rounds_.count(round_id) > 0; }

const RoundSettlement* SourceLedger::settlement(const std::string& round_id) const {
  const auto it = rounds_.find(round_id);
  return it == rounds_.end() ? nullptr : &it->second;
}

const SourceEntry* SourceLedger::find(const std::string& asset_id) const {
  const auto it = entries_.find(asset_id);
  return it == entries_.end() ? nullptr : &it->second;
}

bool SourceLedger::is_penalized(const std::string& asset_id) const {
  const SourceEntry* e = find(asset_id);
  return e && e->penalized;
}

RetrainManifest SourceLedger::manifest(const std::string& round_id, const std::string& industry,
                                       std::span<const store::ContentAsset> candidates,
                                       std::uint64_t seed) const {
  const std::string wanted = store::normalize_industry(industry);
  RetrainManifest m{round_id, wanted, {}};
  std::set<std::string> seen;
  for (const auto& asset : candidates) {
    if (store::normalize_industry(asset.industry) != wanted || !seen.insert(asset.id).second) continue;
    const SourceEntry* e = find(asset.id);
    if (e && e->penalized) continue;
    ManifestEntry entry{asset.id, {}};
    if (e && e->multiplicity > 0) {
      entry.recipes = recipes_for(static_cast<std::size_t>(e->multiplicity), fnv1a(asset.id, seed));
    }
    m.entries.push_back(std::move(entry));
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.asset_id < b.asset_id; });
  return m;
}

nlohmann::json SourceLedger::to_json() const {
  nlohmann::json sources = nlohmann::json::object();
  for (const auto& [id, e] : entries_) {
    sources[id] = {{"successes", e.successes},
                   {"failures", e.failures},
                   {"penalized", e.penalized},
                   {"multiplicity", e.multiplicity}};
  }
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& [_, s] : rounds_) rounds.push_back(s.to_json());
  return {{"sources", sources}, {"rounds", rounds}};
}

SourceLedger SourceLedger::from_json(const nlohmann::json& j) {
  SourceLedger ledger;
  for (const auto& [id, e] : j.at("sources").items()) {
    ledger.entries_[id] = {e.at("successes").get<int>(), e.at("failures").get<int>(),
                           e.at("penalized").get<bool>(), e.at("multiplicity").get<int>()};
  }
  for (const auto& r : j.at("rounds")) {
    RoundSettlement s = RoundSettlement::from_json(r);
    ledger.rounds_.emplace(s.round_id, std::move(s));
  }
  return ledger;
}

LedgerLog::LedgerLog(std::filesystem::path file) : file_(std::move(file)) {}

std::vector<nlohmann::json> LedgerLog::lines() const {
  std::vector<nlohmann::json> out;
  std::ifstream in(file_);
  if (!in) return out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type != "settlement" && type != "manifest" && type != "snapshot") {
        throw std::runtime_error("unknown entry type \"" + type + "\"");
      }
      out.push_back(std::move(j));
    } catch (const std::exception& e) {
      throw LedgerError(file_.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

SourceLedger LedgerLog::load() const {
  SourceLedger ledger;
  std::size_t number = 0;
  for (const auto& j : lines()) {
    ++number;
    try {
      const std::string type = j.at("type");
      if (type == "snapshot") ledger = SourceLedger::from_json(j.at("ledger"));
      if (type == "settlement") ledger.apply(RoundSettlement::from_json(j.at("settlement")));
    } catch (const nlohmann::json::exception& e) {
      throw LedgerError(file_.string() + ": entry " + std::to_string(number) + ": " + e.what());
    }
  }
  return ledger;
}

void LedgerLog::append(const nlohmann::json& line) const {
  if (file_.has_parent_path()) std::filesystem::create_directories(file_.parent_path());
  std::ofstream out(file_, std::ios::app);
  out << line.dump() << '\n';
  if (!out) throw LedgerError("cannot append to " + file_.string());
}

void LedgerLog::append_settlement(const RoundSettlement& settlement) const {
  append({{"type", "settlement"}, {"settlement", settlement.to_json()}});
}

void LedgerLog::append_manifest(const RetrainManifest& manifest) const {
  append({{"type", "manifest"}, {"manifest", manifest.to_json()}});
}

std::vector<RetrainManifest> LedgerLog::manifests() const {
  std::vector<RetrainManifest> out;
  for (const auto& j : lines()) {
    if (j.at("type") == "manifest") out.push_back(RetrainManifest::from_json(j.at("manifest")));
  }
  return out;
}

void LedgerLog::compact() const {
  const SourceLedger ledger = load();
  const auto kept = manifests();
  const auto tmp = std::filesystem::path(file_.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << nlohmann::json{{"type", "snapshot"}, {"ledger", ledger.to_json()}}.dump() << '\n';
    for (const auto& m : kept) {
      out << nlohmann::json{{"type", "manifest"}, {"manifest", m.to_json()}}.dump() << '\n';
    }
    if (!out) throw LedgerError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, file_);
}

}  // namespace personaforge::feedback
