// Copyright 2026 The assocmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// assocmem: command-line front end.
//
// Exit status: 0 success, 1 property failure or runtime/IO error, 2 config or
// usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "assocmem/config.hpp"
#include "assocmem/experiments.hpp"
#include "assocmem/parallel.hpp"
#include "assocmem/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 0;  // 0: hardware concurrency
  std::optional<std::string> out;
};

int report_run(const assocmem::RunResult& r) {
  std::cout << "wrote " << r.files.size() << " files to " << r.dir.string() << '\n';
  std::cout << r.manifest.at("summary").dump(2) << '\n';
  return kOk;
}

assocmem::RunOptions run_options(const Globals& g) {
  assocmem::RunOptions opt;
  opt.jobs = g.jobs == 0 ? assocmem::default_jobs() : g.jobs;
  if (g.out) opt.out_dir = *g.out;
  return opt;
}

int run_config_command(const Globals& g, const std::string& path, const std::string& command) {
  auto cfg = assocmem::make_config(assocmem::parse_config_text([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw assocmem::ConfigError("", "cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }()), g.seed, command);
  return report_run(assocmem::run_experiment(cfg, run_options(g)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"assocmem: training dynamics of associative memories under cross-entropy"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "override the configuration seed");
  app.add_option("--jobs", g.jobs, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "output directory (default: $ASSOCMEM_OUT/<id> or ./assocmem-out/<id>)");
  app.set_version_flag("--version", std::string(assocmem::kVersion));

  std::string config_path;
  int status = kOk;
  auto config_command = [&](const std::string& name, const std::string& command, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->add_option("config", config_path, "TOML config or JSON manifest")->required();
    sub->callback([&, command] { status = run_config_command(g, config_path, command); });
  };
  config_command("simulate", "simulate", "run one training trajectory");
  config_command("landscape", "landscape", "loss / 0-1 / sharpness rasters over gamma coordinates");
  config_command("phase", "phase", "steps-to-perfect-accuracy phase diagram");
  config_command("closed-form", "closed_form", "closed-form oracles against simulation");

  std::string figure;
  std::string figure_config;
  auto* repro = app.add_subcommand("reproduce", "regenerate a figure at desk scale");
  repro->fallthrough();
  std::vector<std::string> ids;
  for (const auto& f : assocmem::figure_registry()) ids.push_back(f.id);
  repro->add_option("figure", figure, "fig1 .. fig6")->required()->check(CLI::IsMember(ids));
  repro->add_option("--config", figure_config, "replay a saved manifest or config instead of the registry defaults");
  repro->callback([&] {
    std::optional<assocmem::Json> doc;
    if (!figure_config.empty()) {
      std::ifstream in(figure_config, std::ios::binary);
      if (!in) throw assocmem::ConfigError("", "cannot open config file '" + figure_config + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      doc = assocmem::parse_config_text(ss.str());
    }
    const auto cfg = assocmem::figure_config(figure, g.seed, doc);
    const auto& info = assocmem::figure_info(figure);
    std::cout << info.figure << "\nscale: " << info.scale << '\n';
    status = report_run(assocmem::run_experiment(cfg, run_options(g)));
  });

  auto* list = app.add_subcommand("list", "list registered experiments");
  list->callback([&] {
    for (const auto& f : assocmem::figure_registry()) std::cout << f.id << "  " << f.figure << "\n      scale: " << f.scale << '\n';
  });

  bool strict = false;
  std::vector<std::string> only;
  auto* ver = app.add_subcommand("verify", "run the property suite");
  ver->fallthrough();
  ver->add_flag("--strict", strict, "closed-form comparisons at 1e-8 instead of 1e-6");
  ver->add_option("--only", only, "run properties whose name contains one of these");
  ver->callback([&] {
    assocmem::VerifyOptions opt;
    opt.strict = strict;
    opt.only = only;
    if (g.seed) opt.seed = *g.seed;
    const auto report = assocmem::verify(opt);
    assocmem::print_report(std::cout, report);
    status = report.passed() ? kOk : kFailure;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  } catch (const assocmem::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const assocmem::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return status;
}
