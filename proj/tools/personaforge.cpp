#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "personaforge/service/demo.hpp"
#include "personaforge/service/platform.hpp"
#include "personaforge/service/server.hpp"
#include "personaforge/store/store.hpp"
#include "personaforge/training/corpus.hpp"
#include "personaforge/training/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace personaforge;

namespace {

struct Failure {
  int code;
};

struct Globals {
  std::string data_dir;
  std::string config;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> steps;
};

service::PlatformConfig load_config(const Globals& g) {
  auto config = g.config.empty() ? service::PlatformConfig{} : service::PlatformConfig::load(g.config);
  if (g.epochs) config.profiler.max_epochs = *g.epochs;
  if (g.steps) config.generator.steps = *g.steps;
  return config;
}

std::unique_ptr<service::Platform> open_platform(const Globals& g) {
  return std::make_unique<service::Platform>(store::data_dir(g.data_dir), load_config(g));
}

json call(service::Platform& platform, const std::string& method, const std::string& path,
          const json& body = nullptr) {
  const auto r = platform.handle(
      {method, std::string(service::kApiPrefix) + path, body.is_null() ? "" : body.dump(), ""});
  if (r.status >= 400) {
    std::cerr << "error " << r.status << ": " << r.body.dump() << '\n';
    throw Failure{1};
  }
  return r.body;
}

json run_job(service::Platform& platform, const json& request) {
  const auto job = call(platform, "POST", "/admin/retrain", request);
  platform.wait_idle();
  const auto done = call(platform, "GET", "/jobs/" + job.at("job_id").get<std::string>());
  if (done.at("status") != "succeeded") {
    std::cerr << "job failed: " << done.value("error", "unknown error") << '\n';
    std::cout << done.dump(2) << '\n';
    throw Failure{1};
  }
  return done;
}

service::HttpServer* active_server = nullptr;

void on_signal(int) {
  if (active_server) active_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"personaforge: personality-driven content generation platform"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--data-dir", g.data_dir, "Store root (default: $PERSONAFORGE_DATA or ./personaforge-data)");
  app.add_option("--config", g.config, "Platform config JSON")->check(CLI::ExistingFile);

  auto* ingest = app.add_subcommand("ingest", "Ingest a brand corpus, user corpus or timeline");
  std::string kind = "brand", path;
  std::vector<std::string> industries, keywords;
  ingest->add_option("--kind", kind, "brand | users | timeline")->check(CLI::IsMember({"brand", "users", "timeline"}));
  ingest->add_option("path", path, "Corpus directory or timeline file")->required();
  ingest->add_option("--industry", industries, "Restrict brand ingestion to these industries");
  ingest->add_option("--keyword", keywords, "Admit only assets mentioning a keyword");

  auto* train_profiler = app.add_subcommand("train-profiler", "Train the personality profiler on labeled users");
  train_profiler->add_option("--epochs", g.epochs, "Maximum epochs");

  auto* train_generator = app.add_subcommand("train-generator", "Train an industry generator");
  std::string industry;
  train_generator->add_option("--industry", industry)->required();
  train_generator->add_option("--steps", g.steps, "Training steps");

  auto* infer = app.add_subcommand("infer", "Infer a user's personality type");
  std::string user, handle, platform_name = "twitter";
  infer->add_option("--user", user, "User id");
  infer->add_option("--handle", handle, "Handle (with --platform)");
  infer->add_option("--platform", platform_name)->check(CLI::IsMember({"twitter", "instagram"}));

  auto* generate = app.add_subcommand("generate", "Generate a round of variants and originals");
  int k = 5;
  std::optional<std::uint64_t> seed;
  std::optional<double> mix;
  std::string out_dir;
  generate->add_option("--user", user)->required();
  generate->add_option("--industry", industry)->required();
  generate->add_option("-k,--num-variants", k)->check(CLI::Range(1, 8));
  generate->add_option("--seed", seed);
  generate->add_option("--lambda", mix)->check(CLI::Range(0.0, 1.0));
  generate->add_option("--out", out_dir, "Directory for card PNGs and round.json (default ./<round id>)");

  auto* fb = app.add_subcommand("feedback", "Rate one card of a round");
  std::string round_id, card_id, compliance = "dont_know", would_click = "no";
  int attractiveness = 50, preference = 3;
  fb->add_option("--round", round_id)->required();
  fb->add_option("--card", card_id)->required();
  fb->add_option("--attractiveness", attractiveness)->required();
  fb->add_option("--preference", preference)->required();
  fb->add_option("--compliance", compliance)->check(CLI::IsMember({"yes", "no", "dont_know"}));
  fb->add_option("--would-click", would_click)->check(CLI::IsMember({"yes", "no"}));

  auto* close = app.add_subcommand("close-round", "Settle a round and write its retrain manifest");
  close->add_option("--round", round_id)->required();

  auto* tick = app.add_subcommand("tick", "Advance the logical clock and run due tasks");
  int hours = 12;
  tick->add_option("--hours", hours)->check(CLI::NonNegativeNumber);

  auto* eval = app.add_subcommand("eval-matrix", "Train text, image and fused profilers and print macro-F1");
  std::string corpus = "synthetic";
  std::size_t users = 500;
  std::uint64_t eval_seed = 7;
  bool table = false;
  eval->add_option("--corpus", corpus, "synthetic or a labeled user corpus directory");
  eval->add_option("--seed", eval_seed);
  eval->add_option("--users", users, "Synthetic corpus size")->check(CLI::PositiveNumber);
  eval->add_option("--epochs", g.epochs);
  eval->add_flag("--table", table, "Print an aligned table to stderr as well");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  service::ServerOptions server_options;
  std::string static_dir;
  serve->add_option("--host", server_options.host);
  serve->add_option("--port", server_options.port)->check(CLI::Range(0, 65535));
  serve->add_option("--static-dir", static_dir, "Dashboard build to serve at /");

  auto* demo = app.add_subcommand("demo-data", "Write demo corpora and a matching config");
  service::DemoOptions demo_options;
  std::string demo_out;
  demo->add_option("out", demo_out)->required();
  demo->add_option("--users", demo_options.users)->check(CLI::Range(2, 100000));
  demo->add_option("--assets", demo_options.assets_per_industry)->check(CLI::PositiveNumber);
  demo->add_option("--seed", demo_options.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) {
      auto p = open_platform(g);
      json body = {{"kind", kind}, {"path", fs::absolute(path).string()}};
      if (!industries.empty()) body["industries"] = industries;
      if (!keywords.empty()) body["keywords"] = keywords;
      const auto report = call(*p, "POST", "/admin/ingest", body);
      for (const auto& d : report.at("diagnostics")) std::cerr << d.get<std::string>() << '\n';
      std::cout << report.dump(2) << '\n';
    } else if (*train_profiler) {
      auto p = open_platform(g);
      std::cout << run_job(*p, {{"target", "profiler"}}).dump(2) << '\n';
    } else if (*train_generator) {
      auto p = open_platform(g);
      std::cout << run_job(*p, {{"target", "generator"}, {"industry", industry}}).dump(2) << '\n';
    } else if (*infer) {
      if (user.empty() == handle.empty()) {
        std::cerr << "infer: give exactly one of --user or --handle\n";
        return 2;
      }
      auto p = open_platform(g);
      const json body = user.empty() ? json{{"handle", handle}, {"platform", platform_name}} : json{{"user_id", user}};
      std::cout << call(*p, "POST", "/profiles/infer", body).dump(2) << '\n';
    } else if (*generate) {
      auto p = open_platform(g);
      json body = {{"user_id", user}, {"industry", industry}, {"num_variants", k}};
      if (seed) body["seed"] = *seed;
      if (mix) body["lambda"] = *mix;
      const auto round = call(*p, "POST", "/generate", body);
      const fs::path dir = out_dir.empty() ? fs::path(round.at("round_id").get<std::string>()) : fs::path(out_dir);
      fs::create_directories(dir);
      for (const auto& card : round.at("cards")) {
        const std::string id = card.at("card_id");
        const auto png = p->card_png(round.at("round_id"), id);
        std::ofstream(dir / (id + ".png"), std::ios::binary) << png;
      }
      std::ofstream(dir / "round.json") << round.dump(2) << '\n';
      std::cout << round.dump(2) << '\n';
    } else if (*fb) {
      auto p = open_platform(g);
      std::cout << call(*p, "POST", "/feedback",
                        {{"round_id", round_id}, {"card_id", card_id}, {"attractiveness", attractiveness},
                         {"preference", preference}, {"compliance", compliance}, {"would_click", would_click}})
                       .dump(2)
                << '\n';
    } else if (*close) {
      auto p = open_platform(g);
      std::cout << call(*p, "POST", "/rounds/" + round_id + "/close").dump(2) << '\n';
    } else if (*tick) {
      auto p = open_platform(g);
      const auto result = call(*p, "POST", "/admin/tick", {{"hours", hours}});
      p->wait_idle();
      std::cout << result.dump(2) << '\n';
    } else if (*eval) {
      training::TrainConfig config = load_config(g).profiler;
      config.seed = eval_seed;
      const auto examples = corpus == "synthetic" ? training::synthesize_corpus(users, {}, eval_seed)
                                                  : training::load_labeled_corpus(corpus);
      const auto report = training::evaluate_matrix(examples, config);
      if (table) std::cerr << report.table();
      std::cout << report.to_json().dump(2) << '\n';
    } else if (*serve) {
      auto p = open_platform(g);
      server_options.static_dir = static_dir;
      service::HttpServer server(*p, server_options);
      const int port = server.bind();
      std::cerr << "serving " << service::kApiPrefix << " on http://" << server_options.host << ":" << port
                << " (data " << p->root().string() << ")\n";
      active_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      active_server = nullptr;
    } else if (*demo) {
      const auto layout = service::write_demo_data(demo_out, demo_options);
      std::cout << json{{"brands", layout.brands.string()},
                        {"users", layout.users.string()},
                        {"timeline", layout.timeline.string()},
                        {"config", layout.config.string()},
                        {"demo_user", layout.demo_user}}
                       .dump(2)
                << '\n';
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
