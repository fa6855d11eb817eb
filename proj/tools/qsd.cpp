#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qsd/config.hpp"
#include "qsd/error.hpp"
#include "qsd/harness.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kMethodError = 3;

bool is_config_error(qsd::ErrorCode c) {
  return c == qsd::ErrorCode::kConfigInvalid || c == qsd::ErrorCode::kParse;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-stationary distribution toolkit"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::string out_dir = ".";
  std::string config_path;
  std::string model;
  std::string out;
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out-dir", out_dir, "Directory for output files");
  app.add_option("--config", config_path, "Experiment config (qsdconfig v1)");
  app.add_option("--model", model, "point | two-state | bd:p,q[,K] | gw:b,d | file:<path>");
  app.add_option("--replicas", replicas, "Independent replicas");
  app.add_option("--out", out, "Output file stem (a .csv/.json suffix is dropped)");

  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [method, keys] : qsd::method_parameters()) {
    CLI::App* sub = app.add_subcommand(method, "Run the " + method + " method");
    subs[method] = sub;
    for (const auto& key : keys) sub->add_option("--" + key, values[method][key]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    qsd::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = qsd::load_config(config_path);
    std::string method;
    for (const auto& [name, sub] : subs) {
      if (sub->parsed()) method = name;
    }
    if (!method.empty()) {
      if (!cfg.method.empty() && cfg.method != method) {
        throw qsd::Error(qsd::ErrorCode::kConfigInvalid,
                         "config method '" + cfg.method + "' does not match subcommand '" + method + "'");
      }
      cfg.method = method;
      for (const auto& [key, value] : values[method]) {
        if (subs[method]->count("--" + key) > 0) cfg.sections[method][key] = value;
      }
    }
    if (cfg.method.empty()) {
      std::cerr << app.help();
      return kConfigError;
    }
    if (!model.empty()) cfg.model = model;
    if (seed) cfg.seed = seed;
    if (replicas) cfg.replicas = *replicas;
    if (!out.empty()) {
      std::filesystem::path p(out);
      if (p.extension() == ".csv" || p.extension() == ".json") p.replace_extension();
      cfg.output = p.filename().string();
    }
    qsd::validate_config(cfg);
    const auto rec = qsd::run_config(cfg, out_dir);
    for (const auto& f : rec.data_files) std::cout << f << "\n";
    std::cout << rec.summary_file << "\n";
    return 0;
  } catch (const qsd::Error& e) {
    std::cerr << "qsd: " << e.what() << "\n";
    return is_config_error(e.code()) ? kConfigError : kMethodError;
  } catch (const std::exception& e) {
    std::cerr << "qsd: " << e.what() << "\n";
    return kMethodError;
  }
}
