// Copyright 2026 The fnproc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fnproc/kernels.hpp"
#include "fnproc/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Functional neural processes: train, evaluate and plot-data tool"};
  app.require_subcommand(1);

  fnproc::CommandOptions opts;
  std::uint64_t seed = 0;
  std::string out;
  for (const char* name : {"train", "eval", "bands"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out, "override the output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fnproc::kExitConfig;
  }

  if (const char* t = std::getenv("FNPROC_THREADS")) {
    try {
      const int n = std::stoi(t);
      if (n < 1) throw std::out_of_range("threads");
      fnproc::kernels::set_max_threads(n);
    } catch (const std::exception&) {
      std::cerr << "config error: FNPROC_THREADS must be a positive integer, got '" << t << "'\n";
      return fnproc::kExitConfig;
    }
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed") > 0) opts.seed = seed;
  if (sub->count("--out") > 0) opts.out = out;
  return fnproc::run_command(sub->get_name(), opts, std::cerr);
}
