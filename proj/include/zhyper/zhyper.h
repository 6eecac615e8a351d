/*
 * Copyright 2026 The Zhyper Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to libzhyper. Every call returns a zh_status; on failure
 * zh_last_error() holds a message for the calling thread. Strings returned
 * through char** out-parameters are owned by the caller and released with
 * zh_string_free. */

#ifndef ZHYPER_H_
#define ZHYPER_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ZH_API __declspec(dllexport)
#else
#define ZH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum zh_status {
  ZH_OK = 0,
  ZH_ERR_ARGUMENT = 1,   /* null handle, bad enum value */
  ZH_ERR_CONFIG = 2,     /* invalid configuration or flag value */
  ZH_ERR_INPUT = 3,      /* bad token ids, lengths */
  ZH_ERR_KEY = 4,        /* unknown id or site */
  ZH_ERR_DIMENSION = 5,  /* shape mismatch */
  ZH_ERR_FORMAT = 6,     /* malformed or corrupted file */
  ZH_ERR_TRAINING = 7,   /* non-finite loss */
  ZH_ERR_IO = 8,         /* file system or subprocess failure */
  ZH_ERR_INTERNAL = 9
} zh_status;

ZH_API const char* zh_version(void);
ZH_API const char* zh_status_name(zh_status s);
/* Message of the last failed call on this thread ("" if none). */
ZH_API const char* zh_last_error(void);
ZH_API void zh_string_free(char* s);

/* ---- configuration ------------------------------------------------------ */

/* Training, model, hypernetwork and corpus settings as key = value pairs. */
typedef struct zh_config zh_config;

ZH_API zh_status zh_config_create(zh_config** out);
ZH_API void zh_config_free(zh_config* cfg);
/* Reads a key = value file; unknown keys are an error. */
ZH_API zh_status zh_config_load(zh_config* cfg, const char* path);
ZH_API zh_status zh_config_set(zh_config* cfg, const char* key, const char* value);
ZH_API zh_status zh_config_to_string(const zh_config* cfg, char** out);

/* ---- data --------------------------------------------------------------- */

/* Writes the default three-task corpus and its context store to dir. */
ZH_API zh_status zh_gen_data(const zh_config* cfg, const char* dir);

/* ---- training ----------------------------------------------------------- */

typedef void (*zh_progress_fn)(size_t step, double lr, double loss, void* user);

/* Trains on the corpus in data_dir and writes a run directory. */
ZH_API zh_status zh_train(const zh_config* cfg, const char* data_dir, const char* run_dir,
                          zh_progress_fn progress, void* user);

typedef struct zh_run zh_run;

ZH_API zh_status zh_run_open(const char* run_dir, zh_run** out);
ZH_API void zh_run_close(zh_run* run);
ZH_API zh_status zh_run_trace_length(const zh_run* run, size_t* out);
ZH_API zh_status zh_run_trace_at(const zh_run* run, size_t i, size_t* step, double* lr,
                                 double* loss);

/* ---- adapters ----------------------------------------------------------- */

/* Materializes the adapter for one context of a ZEMB store (a corpus
 * directory or a .zemb file) and writes it as ZADP. signal_size may be NULL. */
ZH_API zh_status zh_run_gen_adapter(const zh_run* run, const char* store, const char* context_id,
                                    const char* out_path, size_t* signal_size);
/* Same from a raw [d_c] embedding stored as a ZTSR file. */
ZH_API zh_status zh_run_gen_adapter_from_vector(const zh_run* run, const char* ztsr_path,
                                                const char* out_path, size_t* signal_size);
/* Same from free text, embedded by an external command (stdin: text,
 * stdout: ZEMB). */
ZH_API zh_status zh_run_gen_adapter_from_text(const zh_run* run, const char* embedder,
                                              const char* text, const char* out_path,
                                              size_t* signal_size);

/* ---- evaluation --------------------------------------------------------- */

/* Rows x tasks matrix of mean eval loss and greedy accuracy. */
typedef struct zh_eval zh_eval;

/* Every context of the corpus against every task, plus the z = ones row. */
ZH_API zh_status zh_run_eval(const zh_run* run, const char* data_dir, zh_eval** out);
/* A single row: one context id. */
ZH_API zh_status zh_run_eval_context(const zh_run* run, const char* data_dir,
                                     const char* context_id, zh_eval** out);
/* A single row: a ZADP adapter file. */
ZH_API zh_status zh_run_eval_adapter(const zh_run* run, const char* data_dir,
                                     const char* adapter_path, zh_eval** out);
ZH_API void zh_eval_free(zh_eval* e);

ZH_API size_t zh_eval_rows(const zh_eval* e);
ZH_API size_t zh_eval_tasks(const zh_eval* e);
ZH_API const char* zh_eval_row_label(const zh_eval* e, size_t row);
ZH_API const char* zh_eval_task_id(const zh_eval* e, size_t task);
ZH_API zh_status zh_eval_cell(const zh_eval* e, size_t row, size_t task, double* loss,
                              double* accuracy);
/* Per-task context-group means; only for zh_run_eval results. */
ZH_API zh_status zh_eval_grouped(const zh_eval* e, size_t group, size_t task, double* loss,
                                 double* accuracy);
ZH_API zh_status zh_eval_unconditioned(const zh_eval* e, size_t task, double* loss,
                                       double* accuracy);
/* 1 when every task's matched loss beats every mismatched group. */
ZH_API int zh_eval_diagonal_dominant(const zh_eval* e);
ZH_API zh_status zh_eval_format(const zh_eval* e, char** out);

/* ---- budgets ------------------------------------------------------------ */

/* method: mtl, zhyper-diag, zhyper-square, t2l, hyperlora.
 * preset: ref-7b or desk-7b-shape. hyper may be NULL (canonical widths). */
ZH_API zh_status zh_budget_total(const char* method, const char* preset, size_t rank,
                                 const zh_config* hyper, uint64_t* total);
ZH_API zh_status zh_budget_report(const char* method, const char* preset, size_t rank,
                                  const zh_config* hyper, char** table, char** csv);

/* ---- invariant suite ---------------------------------------------------- */

/* Runs the built-in checks; *failed receives the number of failures. */
ZH_API zh_status zh_check(uint64_t seed, char** report, int* failed);

/* ---- misc --------------------------------------------------------------- */

/* FNV-1a 64 of a file's bytes as 16 hex digits. */
ZH_API zh_status zh_file_digest(const char* path, char** out);

#ifdef __cplusplus
}
#endif

#endif /* ZHYPER_H_ */
