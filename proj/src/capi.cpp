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

#include "zhyper/zhyper.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "zhyper/check.hpp"
#include "zhyper/complexity.hpp"
#include "zhyper/error.hpp"
#include "zhyper/ops.hpp"
#include "zhyper/tasks.hpp"
#include "zhyper/text.hpp"
#include "zhyper/training.hpp"

using namespace zhyper;

struct zh_config {
  TrainConfig train;
  ModelConfig model = ModelConfig::desk_7b_shape();
  HyperConfig hyper;
  std::size_t n_train = 256;
  std::size_t n_eval = 64;
  std::size_t descriptions_per_task = 4;
  double description_noise = 0.5;
  bool one_hot = false;

  zh_config() {
    hyper.n_layers = model.n_layers;
    hyper.d_context = 32;
    hyper.d_type = 8;
    hyper.d_layer = 8;
    hyper.d_mlp_in = 32;
    hyper.d_mlp_hidden = 64;
    hyper.d_mlp_out = 64;
    hyper.rank = 8;
  }
};

struct zh_run {
  LoadedRun run;
};

struct zh_eval {
  std::vector<std::string> labels;
  std::vector<std::string> task_ids;
  std::vector<std::vector<EvalCell>> rows;
  std::optional<EvalMatrix> matrix;
};

namespace {

thread_local std::string g_last_error;

zh_status fail(zh_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
zh_status guarded(F&& f) {
  try {
    g_last_error.clear();
    f();
    return ZH_OK;
  } catch (const DimensionError& e) {
    return fail(ZH_ERR_DIMENSION, e.what());
  } catch (const ContractError& e) {
    return fail(ZH_ERR_ARGUMENT, e.what());
  } catch (const KeyError& e) {
    return fail(ZH_ERR_KEY, e.what());
  } catch (const InputError& e) {
    return fail(ZH_ERR_INPUT, e.what());
  } catch (const FormatError& e) {
    return fail(ZH_ERR_FORMAT, e.what());
  } catch (const ConfigError& e) {
    return fail(ZH_ERR_CONFIG, e.what());
  } catch (const TrainingError& e) {
    return fail(ZH_ERR_TRAINING, e.what());
  } catch (const Error& e) {
    return fail(ZH_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(ZH_ERR_IO, e.what());
  } catch (const std::out_of_range& e) {
    return fail(ZH_ERR_KEY, e.what());
  } catch (const std::exception& e) {
    return fail(ZH_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ZH_ERR_INTERNAL, "unknown exception");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw ContractError(std::string(what) + " must not be null");
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_key(zh_config& cfg, const std::string& key, const std::string& value) {
  if (key == "n_train") cfg.n_train = parse_u64(value, key);
  else if (key == "n_eval") cfg.n_eval = parse_u64(value, key);
  else if (key == "descriptions_per_task") cfg.descriptions_per_task = parse_u64(value, key);
  else if (key == "description_noise") cfg.description_noise = parse_double(value, key);
  else if (key == "one_hot") cfg.one_hot = parse_bool(value, key);
  else if (!apply_kv({{key, value}}, &cfg.train, &cfg.model, &cfg.hyper).empty()) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  cfg.hyper.n_layers = cfg.model.n_layers;
}

ContextStore open_store(const std::string& path) {
  std::filesystem::path p(path);
  if (std::filesystem::is_directory(p)) p /= "contexts.zemb";
  return load_context_store(p);
}

std::size_t write_adapter(const zh_run* run, const Tensor& c, const char* out_path) {
  const AdapterSet set = materialize_adapter(run->run.model, c);
  save_zadp(out_path, set);
  return set.signal_size();
}

zh_eval* single_row(const ConditionedModel& m, const DatasetBundle& bundle,
                    const AdapterSet& adapters, const std::string& label) {
  auto* e = new zh_eval;
  e->labels.push_back(label);
  std::vector<EvalCell> row;
  for (const auto& d : bundle.datasets) {
    if (d.eval.empty()) throw ConfigError("dataset '" + d.id + "' has no eval split");
    e->task_ids.push_back(d.id);
    row.push_back(eval_cell(m, d, adapters));
  }
  e->rows.push_back(std::move(row));
  return e;
}

}  // namespace

extern "C" {

const char* zh_version(void) { return "0.1.0"; }

const char* zh_status_name(zh_status s) {
  switch (s) {
    case ZH_OK: return "ok";
    case ZH_ERR_ARGUMENT: return "argument error";
    case ZH_ERR_CONFIG: return "configuration error";
    case ZH_ERR_INPUT: return "input error";
    case ZH_ERR_KEY: return "key error";
    case ZH_ERR_DIMENSION: return "dimension error";
    case ZH_ERR_FORMAT: return "format error";
    case ZH_ERR_TRAINING: return "training error";
    case ZH_ERR_IO: return "i/o error";
    case ZH_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* zh_last_error(void) { return g_last_error.c_str(); }

void zh_string_free(char* s) { std::free(s); }

zh_status zh_config_create(zh_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new zh_config;
  });
}

void zh_config_free(zh_config* cfg) { delete cfg; }

zh_status zh_config_load(zh_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "config");
    require(path, "path");
    for (const auto& [k, v] : parse_kv(read_text(path))) set_key(*cfg, k, v);
  });
}

zh_status zh_config_set(zh_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    set_key(*cfg, key, value);
  });
}

zh_status zh_config_to_string(const zh_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "config");
    require(out, "out");
    std::ostringstream o;
    o << format_train_config(cfg->train) << format_model_config(cfg->model)
      << format_hyper_config(cfg->hyper) << "n_train = " << cfg->n_train << '\n'
      << "n_eval = " << cfg->n_eval << '\n'
      << "descriptions_per_task = " << cfg->descriptions_per_task << '\n'
      << "description_noise = " << format_double(cfg->description_noise) << '\n'
      << "one_hot = " << (cfg->one_hot ? "true" : "false") << '\n';
    *out = dup(o.str());
  });
}

zh_status zh_gen_data(const zh_config* cfg, const char* dir) {
  return guarded([&] {
    require(cfg, "config");
    require(dir, "dir");
    const auto specs = default_task_specs(cfg->train.seed, cfg->n_train, cfg->n_eval);
    CorpusOptions opts;
    opts.d_context = cfg->hyper.d_context;
    opts.descriptions_per_task = cfg->descriptions_per_task;
    opts.description_noise = cfg->description_noise;
    opts.one_hot = cfg->one_hot;
    opts.seed = cfg->train.seed;
    save_corpus(dir, specs, opts, gen_corpus(specs, opts));
  });
}

zh_status zh_train(const zh_config* cfg, const char* data_dir, const char* run_dir,
                   zh_progress_fn progress, void* user) {
  return guarded([&] {
    require(cfg, "config");
    require(data_dir, "data_dir");
    require(run_dir, "run_dir");
    const Corpus corpus = load_corpus(data_dir);
    if (corpus.store.d_context() != cfg->hyper.d_context) {
      throw ConfigError("corpus contexts have d_c " + std::to_string(corpus.store.d_context()) +
                        " but the config sets d_context = " +
                        std::to_string(cfg->hyper.d_context));
    }
    ConditionedModel model = build_model(cfg->model, cfg->hyper, cfg->train.mode, cfg->train.seed);
    ProgressFn fn;
    if (progress) fn = [&](const TracePoint& p) { progress(p.step, p.lr, p.loss, user); };
    const TrainResult result = train(model, corpus.bundle, cfg->train, fn);
    save_run(run_dir, model, cfg->train, result);
  });
}

zh_status zh_run_open(const char* run_dir, zh_run** out) {
  return guarded([&] {
    require(run_dir, "run_dir");
    require(out, "out");
    *out = new zh_run{load_run(run_dir)};
  });
}

void zh_run_close(zh_run* run) { delete run; }

zh_status zh_run_trace_length(const zh_run* run, size_t* out) {
  return guarded([&] {
    require(run, "run");
    require(out, "out");
    *out = run->run.trace.size();
  });
}

zh_status zh_run_trace_at(const zh_run* run, size_t i, size_t* step, double* lr, double* loss) {
  return guarded([&] {
    require(run, "run");
    const auto& p = run->run.trace.at(i);
    if (step) *step = p.step;
    if (lr) *lr = p.lr;
    if (loss) *loss = p.loss;
  });
}

zh_status zh_run_gen_adapter(const zh_run* run, const char* store, const char* context_id,
                             const char* out_path, size_t* signal_size) {
  return guarded([&] {
    require(run, "run");
    require(store, "store");
    require(context_id, "context_id");
    require(out_path, "out_path");
    const ContextStore s = open_store(store);
    const std::size_t n = write_adapter(run, s.get(context_id).embedding, out_path);
    if (signal_size) *signal_size = n;
  });
}

zh_status zh_run_gen_adapter_from_vector(const zh_run* run, const char* ztsr_path,
                                         const char* out_path, size_t* signal_size) {
  return guarded([&] {
    require(run, "run");
    require(ztsr_path, "ztsr_path");
    require(out_path, "out_path");
    Tensor c = load_ztsr(ztsr_path);
    if (c.rank() != 1) c = reshape(c, {c.numel()});
    const std::size_t n = write_adapter(run, c, out_path);
    if (signal_size) *signal_size = n;
  });
}

zh_status zh_run_gen_adapter_from_text(const zh_run* run, const char* embedder, const char* text,
                                       const char* out_path, size_t* signal_size) {
  return guarded([&] {
    require(run, "run");
    require(embedder, "embedder");
    require(text, "text");
    require(out_path, "out_path");
    const ContextStore s = run_external_embedder(embedder, {text});
    if (s.size() != 1) {
      throw FormatError("embedder returned " + std::to_string(s.size()) + " records for 1 text");
    }
    const std::size_t n = write_adapter(run, s.records()[0].embedding, out_path);
    if (signal_size) *signal_size = n;
  });
}

zh_status zh_run_eval(const zh_run* run, const char* data_dir, zh_eval** out) {
  return guarded([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    require(out, "out");
    const Corpus corpus = load_corpus(data_dir);
    EvalMatrix m = eval_conditioned(run->run.model, corpus.bundle);
    auto* e = new zh_eval;
    e->labels = m.context_ids;
    e->task_ids = m.task_ids;
    e->rows = m.cells;
    e->matrix = std::move(m);
    *out = e;
  });
}

zh_status zh_run_eval_context(const zh_run* run, const char* data_dir, const char* context_id,
                              zh_eval** out) {
  return guarded([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    require(context_id, "context_id");
    require(out, "out");
    const Corpus corpus = load_corpus(data_dir);
    const AdapterSet a =
        materialize_adapter(run->run.model, corpus.store.get(context_id).embedding);
    *out = single_row(run->run.model, corpus.bundle, a, context_id);
  });
}

zh_status zh_run_eval_adapter(const zh_run* run, const char* data_dir, const char* adapter_path,
                              zh_eval** out) {
  return guarded([&] {
    require(run, "run");
    require(data_dir, "data_dir");
    require(adapter_path, "adapter_path");
    require(out, "out");
    const Corpus corpus = load_corpus(data_dir);
    const AdapterSet a = load_zadp(adapter_path);
    if (a.n_layers() != run->run.model.cfg.n_layers) {
      throw DimensionError("adapter has " + std::to_string(a.n_layers()) +
                           " layers, model has " + std::to_string(run->run.model.cfg.n_layers));
    }
    *out = single_row(run->run.model, corpus.bundle, a, adapter_path);
  });
}

void zh_eval_free(zh_eval* e) { delete e; }

size_t zh_eval_rows(const zh_eval* e) { return e ? e->rows.size() : 0; }

size_t zh_eval_tasks(const zh_eval* e) { return e ? e->task_ids.size() : 0; }

const char* zh_eval_row_label(const zh_eval* e, size_t row) {
  return e && row < e->labels.size() ? e->labels[row].c_str() : nullptr;
}

const char* zh_eval_task_id(const zh_eval* e, size_t task) {
  return e && task < e->task_ids.size() ? e->task_ids[task].c_str() : nullptr;
}

zh_status zh_eval_cell(const zh_eval* e, size_t row, size_t task, double* loss,
                       double* accuracy) {
  return guarded([&] {
    require(e, "eval");
    const EvalCell& c = e->rows.at(row).at(task);
    if (loss) *loss = c.loss;
    if (accuracy) *accuracy = c.accuracy;
  });
}

zh_status zh_eval_grouped(const zh_eval* e, size_t group, size_t task, double* loss,
                          double* accuracy) {
  return guarded([&] {
    require(e, "eval");
    if (!e->matrix) throw ContractError("single-row evaluation has no grouped cells");
    const EvalCell& c = e->matrix->grouped.at(group).at(task);
    if (loss) *loss = c.loss;
    if (accuracy) *accuracy = c.accuracy;
  });
}

zh_status zh_eval_unconditioned(const zh_eval* e, size_t task, double* loss, double* accuracy) {
  return guarded([&] {
    require(e, "eval");
    if (!e->matrix) throw ContractError("single-row evaluation has no unconditioned row");
    const EvalCell& c = e->matrix->unconditioned.at(task);
    if (loss) *loss = c.loss;
    if (accuracy) *accuracy = c.accuracy;
  });
}

int zh_eval_diagonal_dominant(const zh_eval* e) {
  return e && e->matrix && e->matrix->diagonal_dominant() ? 1 : 0;
}

zh_status zh_eval_format(const zh_eval* e, char** out) {
  return guarded([&] {
    require(e, "eval");
    require(out, "out");
    if (e->matrix) {
      *out = dup(format_eval_matrix(*e->matrix));
      return;
    }
    std::ostringstream o;
    o << "row";
    for (const auto& t : e->task_ids) o << ',' << t << "_loss," << t << "_accuracy";
    o << '\n';
    for (std::size_t r = 0; r < e->rows.size(); ++r) {
      o << e->labels[r];
      for (const auto& c : e->rows[r]) o << ',' << format_double(c.loss) << ',' << format_double(c.accuracy);
      o << '\n';
    }
    *out = dup(o.str());
  });
}

namespace {

HyperSpec hyper_spec(const zh_config* cfg) {
  HyperSpec h;
  if (cfg) {
    h.d_context = cfg->hyper.d_context;
    h.d_type = cfg->hyper.d_type;
    h.d_layer = cfg->hyper.d_layer;
    h.d_mlp_in = cfg->hyper.d_mlp_in;
    h.d_mlp_hidden = cfg->hyper.d_mlp_hidden;
    h.d_mlp_out = cfg->hyper.d_mlp_out;
  }
  return h;
}

}  // namespace

zh_status zh_budget_total(const char* method, const char* preset, size_t rank,
                          const zh_config* hyper, uint64_t* total) {
  return guarded([&] {
    require(method, "method");
    require(preset, "preset");
    require(total, "total");
    *total = method_budget(parse_method(method), ArchSpec::preset(preset, rank), hyper_spec(hyper))
                 .total;
  });
}

zh_status zh_budget_report(const char* method, const char* preset, size_t rank,
                           const zh_config* hyper, char** table, char** csv) {
  return guarded([&] {
    require(preset, "preset");
    const ArchSpec spec = ArchSpec::preset(preset, rank);
    std::vector<ParamBudget> budgets;
    if (method && *method && std::strcmp(method, "all") != 0) {
      budgets.push_back(method_budget(parse_method(method), spec, hyper_spec(hyper)));
    } else {
      for (Method m : all_methods()) budgets.push_back(method_budget(m, spec, hyper_spec(hyper)));
    }
    if (table) *table = dup(format_budget_table(budgets));
    if (csv) *csv = dup(format_budget_csv(budgets));
  });
}

zh_status zh_check(uint64_t seed, char** report, int* failed) {
  return guarded([&] {
    const auto results = run_invariant_checks(seed);
    int n = 0;
    std::ostringstream o;
    for (const auto& r : results) {
      n += !r.passed;
      o << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    }
    if (report) *report = dup(o.str());
    if (failed) *failed = n;
  });
}

zh_status zh_file_digest(const char* path, char** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::uint8_t b : read_file(path)) {
      h ^= b;
      h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    *out = dup(buf);
  });
}

}  // extern "C"
