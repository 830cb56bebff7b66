// hsdep: synthetic-cohort depression-severity pipeline.
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"

#include "hs/ingest_service.hpp"
#include "hs/pipeline.hpp"

namespace {

using hs::pipeline::PipelineConfig;

int serve(const PipelineConfig& cfg, const std::string& host, int port) {
  hs::ingest::Store store(cfg.path(hs::pipeline::artifact::kStore));
  httplib::Server srv;
  auto reply = [](httplib::Response& res, const hs::ingest::Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump() + "\n", "application/json");
  };
  srv.Post("/participants", [&](const httplib::Request& req, httplib::Response& res) {
    reply(res, hs::ingest::handle_register(store, req.body));
  });
  srv.Post("/ingest", [&](const httplib::Request& req, httplib::Response& res) {
    reply(res, hs::ingest::handle_ingest(store, req.body));
  });
  srv.Get(R"(/participants/([^/]+)/weeks/(\d+))", [&](const httplib::Request& req, httplib::Response& res) {
    reply(res, hs::ingest::handle_fetch(store, req.matches[1], std::stoi(req.matches[2])));
  });
  std::cout << "serve: listening on " << host << ":" << port << " (store " << store.root().string() << ")"
            << std::endl;
  if (!srv.listen(host, port)) {
    std::cerr << "hsdep: error: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depression-severity estimation pipeline on a synthetic cohort"};
  app.require_subcommand(1);

  std::string config_path, data_dir;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--data-dir", data_dir, "data root (default: $HS_DATA_DIR, else the config's data_dir)");
  auto* seed_opt = app.add_option("--seed", seed, "master seed");
  app.add_option("--set", overrides, "extra key=value settings, applied last");

  int n = 0, weeks = 0;
  auto* gen = app.add_subcommand("generate", "synthetic cohort into the acquisition store");
  auto* n_opt = gen->add_option("--n", n, "participants");
  auto* weeks_opt = gen->add_option("--weeks", weeks, "weeks per participant");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* srv = app.add_subcommand("serve", "run the ingest service");
  srv->add_option("--host", host);
  srv->add_option("--port", port);

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"preprocess", "resample, filter and gravity-split stored accelerometer data"},
      {"train-har", "train the activity CNN on labeled bouts"},
      {"train-sentiment", "train the Naive Bayes tweet classifier"},
      {"featurize", "weekly 27-feature vectors per participant"},
      {"select-features", "wrapper feature selection by LOOCV RMSD"},
      {"fit-gds", "lasso GDS regression on the selected features"},
      {"classify", "LOOCV severity classification"},
      {"evaluate", "metrics and ROC points"},
      {"report", "report with config, metrics and feature correlations"},
      {"all", "every stage from generate to report"},
  };
  for (const auto& [name, help] : stages) app.add_subcommand(name, help);

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = PipelineConfig::parse(hs::read_file(config_path));
    if (const char* env = std::getenv("HS_DATA_DIR"); env && *env) cfg.data_dir = env;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (*seed_opt) cfg.seed = seed;
    if (*n_opt) cfg.participants = n;
    if (*weeks_opt) cfg.weeks = weeks;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw hs::SpecError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "serve") return serve(cfg, host, port);
    if (name == "all") {
      for (const auto& stage : hs::pipeline::stage_names())
        std::cout << hs::pipeline::run_stage(stage, cfg).summary << std::endl;
      return 0;
    }
    std::cout << hs::pipeline::run_stage(name, cfg).summary << std::endl;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "hsdep: error: " << e.what() << "\n";
    return 1;
  }
}
