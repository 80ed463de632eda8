// expfun: config-driven runner for the exponential-functional toolkit.
//
//   expfun <subcommand> [-c run.cfg] [--set key=value ...] [--workers N]
//
// CSV goes to stdout (out.stdout) and, when out.dir is set, to
// <out.dir>/<subcommand>.csv next to a key=value manifest. Errors print one
// JSON record on stderr and exit with 2 (config), 3 (numeric guard or
// domain), 4 (oracle failure) or 1 (anything else).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "expfun/experiments.hpp"

namespace fs = std::filesystem;
using namespace expfun;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return 2;
    case ErrorKind::NumericGuard:
    case ErrorKind::Domain: return 3;
    case ErrorKind::Oracle: return 4;
  }
  return 1;
}

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct Manifest {
  std::vector<std::pair<std::string, std::string>> kv;
  void put(const std::string& k, const std::string& v) { kv.emplace_back(k, v); }
  void write(const fs::path& p) const {
    std::ofstream out(p);
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::Config, "cannot write " + p.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exponential functionals of random walks: estimation and verification"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  unsigned workers = 0;
  app.add_option("-c,--config", config_path, "flat key=value config file");
  app.add_option("--set", overrides, "override a config key (key=value), repeatable");
  app.add_option("-w,--workers", workers, "shorthand for --set mc.workers=N");
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"classify", "Lambda, rho, tilted law and regime tag"},
      {"tau-tail", "P(tau_0^- > n) over the n-ladder"},
      {"estimate", "E[F(I_n)] over the n-ladder with the regime's sampler"},
      {"constants", "limiting constant of the regime with per-term trace"},
      {"verify", "ratio convergence against the limiting constant"},
      {"renewal", "V or V-hat table"},
      {"selftest", "exact DP / enumeration oracle suites"}};
  for (const auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  Manifest man;
  man.put("subcommand", sub);
  man.put("started_at", timestamp());
  fs::path out_dir;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Config cfg = config_path.empty() ? Config{} : Config::load(config_path);
    for (const auto& o : overrides) cfg.apply_override(o);
    if (workers) cfg.set("mc.workers", std::to_string(workers));
    out_dir = cfg.str("out.dir");
    man.put("config", config_path.empty() ? "<defaults>" : config_path);
    man.put("seed", cfg.str("mc.seed"));
    man.put("config_hash", cfg.hash());
    for (const auto& [k, v] : cfg.values()) man.put("cfg." + k, v);

    const Experiment ex(cfg);
    const Report rep = run_subcommand(sub, ex);
    const std::string csv = render_csv(rep.rows, ex.opt.seed, cfg.hash());

    if (sub == "classify") {
      for (const auto& [k, v] : rep.info) std::cout << k << '=' << v << '\n';
    } else if (cfg.flag("out.stdout")) {
      std::cout << csv;
    }
    for (const auto& [k, v] : rep.info) man.put("info." + k, v);
    man.put("rows", std::to_string(rep.rows.size()));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    man.put("elapsed_s", format_number(secs));
    const int rc = rep.oracle_failures ? exit_code(ErrorKind::Oracle) : 0;
    man.put("status", rc ? "oracle_failure" : "ok");
    man.put("exit_code", std::to_string(rc));
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      write_file(out_dir / (sub + ".csv"), csv);
      man.put("csv", (out_dir / (sub + ".csv")).string());
      man.write(out_dir / (sub + ".manifest"));
    }
    if (rc) {
      nlohmann::json rec = {{"error", {{"kind", "oracle"},
                                       {"message", std::to_string(rep.oracle_failures) + " oracle suite(s) failed"},
                                       {"subcommand", sub},
                                       {"exit_code", rc}}}};
      std::cerr << rec.dump() << '\n';
    }
    return rc;
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    const int rc = err ? exit_code(err->kind()) : 1;
    const std::string kind = err ? to_string(err->kind()) : "internal";
    nlohmann::json rec = {{"error", {{"kind", kind}, {"message", e.what()}, {"subcommand", sub}, {"exit_code", rc}}}};
    std::cerr << rec.dump() << '\n';
    man.put("status", "error");
    man.put("error.kind", kind);
    man.put("error.message", e.what());
    man.put("exit_code", std::to_string(rc));
    if (!out_dir.empty()) {
      std::error_code ec;
      fs::create_directories(out_dir, ec);
      if (!ec) man.write(out_dir / (sub + ".manifest"));
    }
    return rc;
  }
}
