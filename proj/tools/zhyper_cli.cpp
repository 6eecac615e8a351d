// Copyright 2026 The Zhyper Authors.
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

// zhyper: data generation, training, adapter export, evaluation, parameter
// budgets and the invariant suite, on top of the C API.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "zhyper/zhyper.h"

namespace fs = std::filesystem;

namespace {

/// Thrown on a failed C call; carries the status for the exit code.
struct ApiFailure {
  zh_status status;
  std::string message;
};

void ok(zh_status s) {
  if (s != ZH_OK) throw ApiFailure{s, zh_last_error()};
}

int exit_code(zh_status s) {
  switch (s) {
    case ZH_ERR_TRAINING:
    case ZH_ERR_IO:
    case ZH_ERR_INTERNAL:
      return 2;
    default:
      return 1;
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  zh_string_free(s);
  return out;
}

using ConfigPtr = std::unique_ptr<zh_config, decltype(&zh_config_free)>;
using RunPtr = std::unique_ptr<zh_run, decltype(&zh_run_close)>;
using EvalPtr = std::unique_ptr<zh_eval, decltype(&zh_eval_free)>;

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string preset = "ref-7b";
  std::size_t rank = 8;
  bool rank_set = false;
  std::string variant;
  std::string mode;
  std::string context_id;
  std::string adapter;
  std::size_t steps = 0;
  bool steps_set = false;
  std::string data;
  std::string run;
  std::string method;
  std::string embedding;
  std::string text;
  std::string csv;
  std::size_t log_every = 100;
};

ConfigPtr make_config(const Options& o) {
  zh_config* raw = nullptr;
  ok(zh_config_create(&raw));
  ConfigPtr cfg(raw, zh_config_free);
  if (!o.config.empty()) ok(zh_config_load(cfg.get(), o.config.c_str()));
  if (o.seed_set) ok(zh_config_set(cfg.get(), "seed", std::to_string(o.seed).c_str()));
  if (o.rank_set) ok(zh_config_set(cfg.get(), "rank", std::to_string(o.rank).c_str()));
  if (o.steps_set) ok(zh_config_set(cfg.get(), "steps", std::to_string(o.steps).c_str()));
  if (!o.mode.empty()) ok(zh_config_set(cfg.get(), "mode", o.mode.c_str()));
  if (!o.variant.empty()) {
    ok(zh_config_set(cfg.get(), "mode", ("zhyper-" + o.variant).c_str()));
  }
  return cfg;
}

RunPtr open_run(const std::string& dir) {
  zh_run* raw = nullptr;
  ok(zh_run_open(dir.c_str(), &raw));
  return RunPtr(raw, zh_run_close);
}

std::string digest(const fs::path& p) {
  char* out = nullptr;
  ok(zh_file_digest(p.string().c_str(), &out));
  return take(out);
}

/// Replay record: command line, inputs and a digest of every artifact.
void write_manifest(const fs::path& out, const std::vector<std::string>& argv, const Options& o,
                    const std::string& config_text) {
  std::vector<fs::path> files;
  fs::path manifest;
  if (fs::is_directory(out)) {
    manifest = out / "run_manifest.txt";
    for (const auto& e : fs::recursive_directory_iterator(out)) {
      if (e.is_regular_file() && e.path() != manifest) files.push_back(e.path());
    }
  } else {
    manifest = out.string() + ".manifest.txt";
    files.push_back(out);
  }
  std::sort(files.begin(), files.end());
  std::ofstream f(manifest);
  f << "command =";
  for (const auto& a : argv) f << ' ' << a;
  f << "\nconfig_file = " << (o.config.empty() ? "-" : o.config) << '\n'
    << "seed = " << o.seed << '\n'
    << "output = " << out.string() << '\n';
  if (!config_text.empty()) {
    f << "[config]\n" << config_text;
  }
  f << "[artifacts]\n";
  for (const auto& p : files) {
    f << fs::relative(p, fs::is_directory(out) ? out : out.parent_path()).string() << " = "
      << digest(p) << '\n';
  }
}

std::string config_text(const zh_config* cfg) {
  char* s = nullptr;
  ok(zh_config_to_string(cfg, &s));
  return take(s);
}

void progress(size_t step, double lr, double loss, void* user) {
  const auto every = *static_cast<std::size_t*>(user);
  if (every && step % every == 0) {
    std::printf("step %6zu  lr %.3e  loss %.6f\n", step, lr, loss);
    std::fflush(stdout);
  }
}

void print_eval(const zh_eval* e) {
  char* s = nullptr;
  ok(zh_eval_format(e, &s));
  std::cout << take(s);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  Options o;
  CLI::App app{"Context-conditioned LoRA adapters from a factorized hypernetwork"};
  app.require_subcommand(1);

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&o](const std::uint64_t& s) { o.seed = s; o.seed_set = true; }, "root seed");
  };

  auto* gen = app.add_subcommand("gen-data", "write the synthetic corpus and contexts");
  common(gen);
  gen->add_option("--out", o.out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a conditioned model");
  common(train);
  train->add_option("--data", o.data, "corpus directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", o.out, "run directory")->required();
  train->add_option("--mode", o.mode, "training mode")
      ->check(CLI::IsMember({"zhyper-diag", "zhyper-square", "mtl", "oracle"}));
  train->add_option("--variant", o.variant, "shorthand for --mode zhyper-<variant>")
      ->check(CLI::IsMember({"diag", "square"}));
  train->add_option_function<std::size_t>(
      "--rank", [&o](const std::size_t& r) { o.rank = r; o.rank_set = true; }, "LoRA rank");
  train->add_option_function<std::size_t>(
      "--steps", [&o](const std::size_t& s) { o.steps = s; o.steps_set = true; }, "optimizer steps");
  train->add_option("--log-every", o.log_every, "progress interval (0 = quiet)");

  auto* eval = app.add_subcommand("eval", "evaluate a run on the corpus eval splits");
  common(eval);
  eval->add_option("--run", o.run, "run directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--data", o.data, "corpus directory")->required()->check(CLI::ExistingDirectory);
  auto* ctx_opt = eval->add_option("--context-id", o.context_id, "evaluate one context");
  eval->add_option("--adapter", o.adapter, "evaluate one ZADP adapter")
      ->check(CLI::ExistingFile)
      ->excludes(ctx_opt);
  eval->add_option("--out", o.out, "also write the report to this file");

  auto* adapter = app.add_subcommand("gen-adapter", "materialize a per-context adapter");
  common(adapter);
  adapter->add_option("--run", o.run, "run directory")->required()->check(CLI::ExistingDirectory);
  adapter->add_option("--out", o.out, "ZADP output file")->required();
  auto* a_ctx = adapter->add_option("--context-id", o.context_id, "context id in the store");
  adapter->add_option("--data", o.data, "corpus directory or .zemb store")->needs(a_ctx);
  auto* a_emb = adapter->add_option("--embedding", o.embedding, "raw embedding (ZTSR file)")
                    ->check(CLI::ExistingFile)
                    ->excludes(a_ctx);
  adapter->add_option("--text", o.text, "free text, embedded with $ZHYPER_EMBEDDER")
      ->excludes(a_ctx)
      ->excludes(a_emb);

  auto* params = app.add_subcommand("params", "parameter budgets");
  common(params);
  params->add_option("--preset", o.preset, "architecture preset")
      ->check(CLI::IsMember({"ref-7b", "desk-7b-shape"}));
  params->add_option("--rank", o.rank, "LoRA rank")->check(CLI::PositiveNumber);
  params->add_option("--method", o.method, "mtl, zhyper-diag, zhyper-square, t2l, hyperlora or all");
  params->add_option("--variant", o.variant, "shorthand for --method zhyper-<variant>")
      ->check(CLI::IsMember({"diag", "square"}));
  params->add_option("--csv", o.csv, "write the itemized CSV here");

  auto* check = app.add_subcommand("check", "run the invariant suite");
  check->add_option("--seed", o.seed, "seed for the randomized checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) {
      ConfigPtr cfg = make_config(o);
      ok(zh_gen_data(cfg.get(), o.out.c_str()));
      write_manifest(o.out, args, o, config_text(cfg.get()));
      std::cout << "corpus written to " << o.out << '\n';
    } else if (*train) {
      ConfigPtr cfg = make_config(o);
      ok(zh_train(cfg.get(), o.data.c_str(), o.out.c_str(), progress, &o.log_every));
      write_manifest(o.out, args, o, config_text(cfg.get()));
      std::cout << "run written to " << o.out << '\n';
    } else if (*eval) {
      RunPtr run = open_run(o.run);
      zh_eval* raw = nullptr;
      if (!o.context_id.empty()) {
        ok(zh_run_eval_context(run.get(), o.data.c_str(), o.context_id.c_str(), &raw));
      } else if (!o.adapter.empty()) {
        ok(zh_run_eval_adapter(run.get(), o.data.c_str(), o.adapter.c_str(), &raw));
      } else {
        ok(zh_run_eval(run.get(), o.data.c_str(), &raw));
      }
      EvalPtr e(raw, zh_eval_free);
      print_eval(e.get());
      if (!o.out.empty()) {
        char* s = nullptr;
        ok(zh_eval_format(e.get(), &s));
        std::ofstream(o.out) << take(s);
        write_manifest(o.out, args, o, "");
      }
    } else if (*adapter) {
      RunPtr run = open_run(o.run);
      size_t n = 0;
      if (!o.context_id.empty()) {
        const std::string store = o.data.empty() ? "contexts.zemb" : o.data;
        ok(zh_run_gen_adapter(run.get(), store.c_str(), o.context_id.c_str(), o.out.c_str(), &n));
      } else if (!o.embedding.empty()) {
        ok(zh_run_gen_adapter_from_vector(run.get(), o.embedding.c_str(), o.out.c_str(), &n));
      } else if (!o.text.empty()) {
        const char* embedder = std::getenv("ZHYPER_EMBEDDER");
        if (!embedder || !*embedder) {
          std::cerr << "error: --text needs ZHYPER_EMBEDDER to name an embedder command\n";
          return 1;
        }
        ok(zh_run_gen_adapter_from_text(run.get(), embedder, o.text.c_str(), o.out.c_str(), &n));
      } else {
        std::cerr << "error: gen-adapter needs --context-id, --embedding or --text\n";
        return 1;
      }
      write_manifest(o.out, args, o, "");
      std::cout << "adapter written to " << o.out << " (" << n << " modulation values)\n";
    } else if (*params) {
      std::string method = o.method;
      if (method.empty()) method = o.variant.empty() ? "all" : "zhyper-" + o.variant;
      ConfigPtr cfg(nullptr, zh_config_free);
      if (!o.config.empty()) cfg = make_config(o);
      char* table = nullptr;
      char* csv = nullptr;
      ok(zh_budget_report(method.c_str(), o.preset.c_str(), o.rank, cfg.get(), &table, &csv));
      std::cout << "preset " << o.preset << ", r = " << o.rank << '\n' << take(table);
      const std::string csv_text = take(csv);
      if (!o.csv.empty()) std::ofstream(o.csv) << csv_text;
    } else if (*check) {
      char* report = nullptr;
      int failed = 0;
      ok(zh_check(o.seed, &report, &failed));
      std::cout << take(report);
      std::cout << (failed ? std::to_string(failed) + " check(s) failed\n" : "all checks passed\n");
      return failed ? 2 : 0;
    }
  } catch (const ApiFailure& f) {
    std::cerr << "error (" << zh_status_name(f.status) << "): " << f.message << '\n';
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
