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

#include "zhyper/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "zhyper/error.hpp"
#include "zhyper/ops.hpp"
#include "zhyper/text.hpp"

namespace zhyper {

const char* generator_name(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::BiasedUnigram:
      return "biased-unigram";
    case GeneratorKind::CyclicGrammar:
      return "cyclic-grammar";
    case GeneratorKind::CopyWithMarker:
      return "copy-with-marker";
  }
  return "?";
}

GeneratorKind parse_generator(const std::string& name) {
  if (name == "biased-unigram") return GeneratorKind::BiasedUnigram;
  if (name == "cyclic-grammar") return GeneratorKind::CyclicGrammar;
  if (name == "copy-with-marker") return GeneratorKind::CopyWithMarker;
  throw ConfigError("unknown generator kind '" + name + "'");
}

namespace {

void validate_spec(const SyntheticTaskSpec& s) {
  const std::string where = "task '" + s.task_id + "': ";
  if (s.task_id.empty()) throw ConfigError("task id must not be empty");
  if (s.vocab_size < 2 || s.vocab_size > 0xFFFF) {
    throw ConfigError(where + "vocab_size must lie in [2, 65535]");
  }
  if (s.prompt_len == 0 || s.response_len == 0) {
    throw ConfigError(where + "prompt_len and response_len must be positive");
  }
  auto in_vocab = [&](int t) { return t >= 0 && static_cast<std::size_t>(t) < s.vocab_size; };
  switch (s.kind) {
    case GeneratorKind::BiasedUnigram: {
      if (s.bias.size() != s.vocab_size) {
        throw ConfigError(where + "bias needs one weight per vocabulary entry");
      }
      double total = 0.0;
      for (double b : s.bias) {
        if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError(where + "bias weights must be >= 0");
        total += b;
      }
      if (total <= 0.0) throw ConfigError(where + "bias has no mass");
      break;
    }
    case GeneratorKind::CyclicGrammar:
      if (s.cycle.empty()) throw ConfigError(where + "cycle must not be empty");
      for (int t : s.cycle) {
        if (!in_vocab(t)) throw ConfigError(where + "cycle token " + std::to_string(t) + " outside vocabulary");
      }
      break;
    case GeneratorKind::CopyWithMarker:
      if (!in_vocab(s.marker)) throw ConfigError(where + "marker outside vocabulary");
      for (int t : s.alphabet) {
        if (!in_vocab(t) || t == s.marker) {
          throw ConfigError(where + "alphabet token " + std::to_string(t) +
                            " is the marker or outside the vocabulary");
        }
      }
      if (std::set<int>(s.alphabet.begin(), s.alphabet.end()).size() != s.alphabet.size()) {
        throw ConfigError(where + "alphabet repeats a token");
      }
      break;
  }
}

std::vector<int> draw_prompt(const SyntheticTaskSpec& s, Rng& rng) {
  std::vector<int> out(s.prompt_len);
  for (auto& t : out) {
    if (s.kind == GeneratorKind::CopyWithMarker && !s.alphabet.empty()) {
      t = s.alphabet[rng.below(s.alphabet.size())];
    } else if (s.kind == GeneratorKind::CopyWithMarker) {
      // Uniform over every token except the marker.
      auto v = static_cast<int>(rng.below(s.vocab_size - 1));
      t = v >= s.marker ? v + 1 : v;
    } else {
      t = static_cast<int>(rng.below(s.vocab_size));
    }
  }
  return out;
}

std::size_t draw_weighted(const std::vector<double>& weights, double total, Rng& rng) {
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding fallthrough: last token with positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

Example draw_example(const SyntheticTaskSpec& s, Rng& rng) {
  Example ex;
  ex.tokens = draw_prompt(s, rng);
  ex.prompt_len = s.prompt_len;
  switch (s.kind) {
    case GeneratorKind::BiasedUnigram: {
      double total = 0.0;
      for (double b : s.bias) total += b;
      for (std::size_t i = 0; i < s.response_len; ++i) {
        ex.tokens.push_back(static_cast<int>(draw_weighted(s.bias, total, rng)));
      }
      break;
    }
    case GeneratorKind::CyclicGrammar: {
      std::size_t phase = rng.below(s.cycle.size());
      for (std::size_t i = 0; i < s.response_len; ++i) {
        ex.tokens.push_back(s.cycle[(phase + i) % s.cycle.size()]);
      }
      break;
    }
    case GeneratorKind::CopyWithMarker: {
      ex.tokens.push_back(s.marker);
      for (std::size_t i = 1; i < s.response_len; ++i) {
        ex.tokens.push_back(ex.tokens[(i - 1) % s.prompt_len]);
      }
      break;
    }
  }
  return ex;
}

}  // namespace

std::vector<double> emission_distribution(const SyntheticTaskSpec& s) {
  validate_spec(s);
  std::vector<double> p(s.vocab_size, 0.0);
  switch (s.kind) {
    case GeneratorKind::BiasedUnigram: {
      double total = 0.0;
      for (double b : s.bias) total += b;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = s.bias[i] / total;
      break;
    }
    case GeneratorKind::CyclicGrammar:
      // A uniform start phase makes every position uniform over the cycle.
      for (int t : s.cycle) p[static_cast<std::size_t>(t)] += 1.0 / static_cast<double>(s.cycle.size());
      break;
    case GeneratorKind::CopyWithMarker: {
      const double n = static_cast<double>(s.response_len);
      if (s.alphabet.empty()) {
        const double other = (n - 1.0) / n / static_cast<double>(s.vocab_size - 1);
        for (auto& v : p) v = other;
      } else {
        const double other = (n - 1.0) / n / static_cast<double>(s.alphabet.size());
        for (int t : s.alphabet) p[static_cast<std::size_t>(t)] = other;
      }
      p[static_cast<std::size_t>(s.marker)] = 1.0 / n;
      break;
    }
  }
  return p;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  const std::size_t n = std::max(p.size(), q.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = i < p.size() ? p[i] : 0.0;
    const double b = i < q.size() ? q[i] : 0.0;
    tv += std::abs(a - b);
  }
  return 0.5 * tv;
}

Corpus gen_corpus(const std::vector<SyntheticTaskSpec>& specs, const CorpusOptions& opts) {
  if (specs.empty()) throw ConfigError("no task specs");
  if (opts.d_context == 0 || opts.descriptions_per_task == 0) {
    throw ConfigError("d_context and descriptions_per_task must be positive");
  }
  std::set<std::string> ids;
  for (const auto& s : specs) {
    validate_spec(s);
    if (!ids.insert(s.task_id).second) throw ConfigError("duplicate task id '" + s.task_id + "'");
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t j = i + 1; j < specs.size(); ++j) {
      const double tv = total_variation(emission_distribution(specs[i]), emission_distribution(specs[j]));
      if (tv < 0.2) {
        throw ConfigError("tasks '" + specs[i].task_id + "' and '" + specs[j].task_id +
                          "' are too similar (total variation " + format_double(tv) + " < 0.2)");
      }
    }
  }
  if (opts.one_hot && opts.d_context < specs.size()) {
    throw ConfigError("one-hot contexts need d_context >= number of tasks");
  }

  Corpus corpus{DatasetBundle{}, ContextStore(opts.d_context)};
  for (const auto& s : specs) {
    Rng rng = Rng(s.seed).split(s.task_id);
    Dataset d;
    d.id = s.task_id;
    std::set<std::vector<int>> seen;
    for (std::size_t i = 0; i < s.n_train; ++i) {
      d.train.push_back(draw_example(s, rng));
      seen.insert(d.train.back().tokens);
    }
    // Eval sequences never repeat a training sequence.
    std::size_t attempts = 0;
    while (d.eval.size() < s.n_eval) {
      Example ex = draw_example(s, rng);
      if (seen.count(ex.tokens)) {
        if (++attempts > 100 * (s.n_eval + 1)) {
          throw ConfigError("task '" + s.task_id + "': cannot draw disjoint eval split");
        }
        continue;
      }
      d.eval.push_back(std::move(ex));
    }
    corpus.bundle.datasets.push_back(std::move(d));
  }

  // Pseudo-embeddings: an orthonormalized direction per task plus
  // per-description noise.
  Rng crng = Rng(opts.seed).split("contexts");
  const std::size_t dc = opts.d_context;
  std::vector<std::vector<double>> dirs;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    std::vector<double> v(dc);
    for (auto& x : v) x = crng.gaussian();
    for (const auto& u : dirs) {
      if (dirs.size() >= dc) break;
      double dot = 0.0;
      for (std::size_t k = 0; k < dc; ++k) dot += v[k] * u[k];
      for (std::size_t k = 0; k < dc; ++k) v[k] -= dot * u[k];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  const double amp = std::sqrt(static_cast<double>(dc));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    for (std::size_t j = 0; j < opts.descriptions_per_task; ++j) {
      std::vector<double> c(dc, 0.0);
      if (opts.one_hot) {
        c[i] = 1.0;
      } else {
        for (std::size_t k = 0; k < dc; ++k) {
          c[k] = amp * dirs[i][k] + opts.description_noise * crng.gaussian();
        }
      }
      ContextRecord r;
      r.id = specs[i].task_id + "/d" + std::to_string(j);
      r.dataset_id = specs[i].task_id;
      r.text = "Task " + specs[i].task_id + ": " + generator_name(specs[i].kind) +
               " responses, description variant " + std::to_string(j);
      // Stored as float32 on disk; round now so memory matches a reload.
      for (auto& x : c) x = static_cast<double>(static_cast<float>(x));
      r.embedding = Tensor::from({dc}, std::move(c));
      corpus.store.add(std::move(r));
    }
  }
  corpus.bundle = assign_contexts(corpus.store, std::move(corpus.bundle)).bundle;
  return corpus;
}

std::vector<SyntheticTaskSpec> default_task_specs(std::uint64_t seed, std::size_t n_train,
                                                  std::size_t n_eval) {
  SyntheticTaskSpec unigram;
  unigram.task_id = "unigram";
  unigram.kind = GeneratorKind::BiasedUnigram;
  unigram.bias.assign(32, 0.0);
  const double weights[] = {8, 4, 2, 1, 1, 1};
  for (std::size_t i = 0; i < 6; ++i) unigram.bias[i] = weights[i];

  SyntheticTaskSpec cycle;
  cycle.task_id = "cycle";
  cycle.kind = GeneratorKind::CyclicGrammar;
  cycle.cycle = {10, 13, 11, 15};

  SyntheticTaskSpec copy;
  copy.task_id = "copy";
  copy.kind = GeneratorKind::CopyWithMarker;
  copy.marker = 31;
  copy.alphabet = {16, 17, 18, 19, 20, 21, 22, 23};

  std::vector<SyntheticTaskSpec> out{unigram, cycle, copy};
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].n_train = n_train;
    out[i].n_eval = n_eval;
    out[i].seed = seed + i;
  }
  return out;
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.emplace_back(trim(item));
  return out;
}

Bytes encode_tokens(const std::string& task, const std::string& split,
                    const std::vector<Example>& examples, std::size_t prompt_len,
                    std::size_t seq_len) {
  ByteWriter w;
  w.raw("ZTOK v1 task=" + task + " split=" + split + " count=" +
        std::to_string(examples.size()) + " prompt_len=" + std::to_string(prompt_len) +
        " seq_len=" + std::to_string(seq_len) + "\n");
  for (const auto& ex : examples) {
    for (int t : ex.tokens) w.u16(static_cast<std::uint16_t>(t));
  }
  return w.take();
}

std::vector<Example> decode_tokens(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  const auto nl = std::find(bytes.begin(), bytes.end(), std::uint8_t{'\n'});
  if (nl == bytes.end()) throw FormatError(path.string() + ": missing header line");
  std::istringstream header(std::string(bytes.begin(), nl));
  std::string magic, version, field;
  header >> magic >> version;
  if (magic != "ZTOK" || version != "v1") throw FormatError(path.string() + ": not a ZTOK v1 file");
  std::size_t count = 0, prompt_len = 0, seq_len = 0;
  while (header >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = field.substr(0, eq), v = field.substr(eq + 1);
    if (k == "count") count = parse_u64(v, "count");
    if (k == "prompt_len") prompt_len = parse_u64(v, "prompt_len");
    if (k == "seq_len") seq_len = parse_u64(v, "seq_len");
  }
  const std::size_t offset = static_cast<std::size_t>(nl - bytes.begin()) + 1;
  ByteReader in(std::span<const std::uint8_t>(bytes).subspan(offset));
  if (in.remaining() != count * seq_len * 2) {
    throw FormatError(path.string() + ": payload holds " + std::to_string(in.remaining()) +
                      " bytes, header promises " + std::to_string(count * seq_len * 2));
  }
  std::vector<Example> out(count);
  for (auto& ex : out) {
    ex.prompt_len = prompt_len;
    ex.tokens.resize(seq_len);
    for (auto& t : ex.tokens) t = in.u16("token");
  }
  return out;
}

}  // namespace

void save_corpus(const std::filesystem::path& dir, const std::vector<SyntheticTaskSpec>& specs,
                 const CorpusOptions& opts, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  std::ostringstream m;
  m << "# zhyper corpus v1\n"
    << "d_context = " << opts.d_context << '\n'
    << "descriptions_per_task = " << opts.descriptions_per_task << '\n'
    << "description_noise = " << format_double(opts.description_noise) << '\n'
    << "one_hot = " << (opts.one_hot ? "true" : "false") << '\n'
    << "seed = " << opts.seed << '\n';
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const auto& d = corpus.bundle.datasets.at(i);
    m << "[task " << s.task_id << "]\n"
      << "kind = " << generator_name(s.kind) << '\n'
      << "bias = " << join(s.bias) << '\n'
      << "cycle = " << join(s.cycle) << '\n'
      << "marker = " << s.marker << '\n'
      << "alphabet = " << join(s.alphabet) << '\n'
      << "vocab_size = " << s.vocab_size << '\n'
      << "prompt_len = " << s.prompt_len << '\n'
      << "response_len = " << s.response_len << '\n'
      << "n_train = " << s.n_train << '\n'
      << "n_eval = " << s.n_eval << '\n'
      << "seed = " << s.seed << '\n'
      << "train_examples = " << d.train.size() << '\n'
      << "eval_examples = " << d.eval.size() << '\n';
    const std::size_t seq = s.prompt_len + s.response_len;
    write_file(dir / (s.task_id + ".train.tok"),
               encode_tokens(s.task_id, "train", d.train, s.prompt_len, seq));
    write_file(dir / (s.task_id + ".eval.tok"),
               encode_tokens(s.task_id, "eval", d.eval, s.prompt_len, seq));
  }
  write_text(dir / "corpus.txt", m.str());
  save_context_store(dir / "contexts.zemb", corpus.store);
}

namespace {

struct ParsedCorpus {
  CorpusOptions opts;
  std::vector<SyntheticTaskSpec> specs;
};

ParsedCorpus parse_corpus_manifest(const std::string& text) {
  ParsedCorpus out;
  std::istringstream in(text);
  std::string line;
  SyntheticTaskSpec* cur = nullptr;
  while (std::getline(in, line)) {
    auto v = trim(line);
    if (v.empty() || v[0] == '#') continue;
    if (v.front() == '[') {
      if (!v.starts_with("[task ") || v.back() != ']') {
        throw FormatError("corpus manifest: bad section '" + std::string(v) + "'");
      }
      out.specs.emplace_back();
      cur = &out.specs.back();
      cur->task_id = std::string(v.substr(6, v.size() - 7));
      continue;
    }
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) throw FormatError("corpus manifest: bad line '" + std::string(v) + "'");
    const std::string k(trim(v.substr(0, eq))), val(trim(v.substr(eq + 1)));
    if (!cur) {
      if (k == "d_context") out.opts.d_context = parse_u64(val, k);
      else if (k == "descriptions_per_task") out.opts.descriptions_per_task = parse_u64(val, k);
      else if (k == "description_noise") out.opts.description_noise = parse_double(val, k);
      else if (k == "one_hot") out.opts.one_hot = parse_bool(val, k);
      else if (k == "seed") out.opts.seed = parse_u64(val, k);
      continue;
    }
    if (k == "kind") cur->kind = parse_generator(val);
    else if (k == "bias") {
      cur->bias.clear();
      for (const auto& x : split_csv(val)) cur->bias.push_back(parse_double(x, k));
    } else if (k == "cycle") {
      cur->cycle.clear();
      for (const auto& x : split_csv(val)) cur->cycle.push_back(static_cast<int>(parse_u64(x, k)));
    } else if (k == "alphabet") {
      cur->alphabet.clear();
      for (const auto& x : split_csv(val)) cur->alphabet.push_back(static_cast<int>(parse_u64(x, k)));
    } else if (k == "marker") cur->marker = static_cast<int>(parse_u64(val, k));
    else if (k == "vocab_size") cur->vocab_size = parse_u64(val, k);
    else if (k == "prompt_len") cur->prompt_len = parse_u64(val, k);
    else if (k == "response_len") cur->response_len = parse_u64(val, k);
    else if (k == "n_train") cur->n_train = parse_u64(val, k);
    else if (k == "n_eval") cur->n_eval = parse_u64(val, k);
    else if (k == "seed") cur->seed = parse_u64(val, k);
  }
  return out;
}

}  // namespace

std::vector<SyntheticTaskSpec> load_corpus_specs(const std::filesystem::path& dir) {
  return parse_corpus_manifest(read_text(dir / "corpus.txt")).specs;
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const auto parsed = parse_corpus_manifest(read_text(dir / "corpus.txt"));
  DatasetBundle bundle;
  for (const auto& s : parsed.specs) {
    Dataset d;
    d.id = s.task_id;
    d.train = decode_tokens(dir / (s.task_id + ".train.tok"));
    d.eval = decode_tokens(dir / (s.task_id + ".eval.tok"));
    bundle.datasets.push_back(std::move(d));
  }
  ContextStore store = load_context_store(dir / "contexts.zemb");
  auto assigned = assign_contexts(store, std::move(bundle));
  return Corpus{std::move(assigned.bundle), std::move(store)};
}

double EvalMatrix::best_mismatched_loss(std::size_t task) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grouped.size(); ++g) {
    if (g != task) best = std::min(best, grouped[g][task].loss);
  }
  return best;
}

bool EvalMatrix::diagonal_dominant() const {
  for (std::size_t t = 0; t < task_ids.size(); ++t) {
    if (!(matched_loss(t) < best_mismatched_loss(t))) return false;
  }
  return true;
}

EvalCell eval_cell(const ConditionedModel& model, const Dataset& task, const AdapterSet& adapters) {
  double loss = 0.0;
  std::size_t correct = 0, count = 0;
  for (const auto& ex : task.eval) {
    const auto inputs = ex.inputs();
    const auto targets = ex.targets();
    Tensor logits = forward_adapted(model.cfg, model.base, inputs, &adapters);
    loss += cross_entropy_sum(logits, targets, 0.0).item();
    const std::size_t v = logits.cols();
    for (std::size_t r = 0; r < targets.size(); ++r) {
      if (targets[r] < 0) continue;
      ++count;
      std::size_t arg = 0;
      for (std::size_t j = 1; j < v; ++j) {
        if (logits.at(r, j) > logits.at(r, arg)) arg = j;
      }
      correct += static_cast<int>(arg) == targets[r];
    }
  }
  if (count == 0) throw ConfigError("task '" + task.id + "' has no eval targets");
  return EvalCell{loss / static_cast<double>(count),
                  static_cast<double>(correct) / static_cast<double>(count)};
}

EvalMatrix eval_conditioned(const ConditionedModel& model, const DatasetBundle& bundle) {
  bundle.validate();
  for (const auto& d : bundle.datasets) {
    if (d.eval.empty()) throw ConfigError("dataset '" + d.id + "' has no eval split");
  }
  EvalMatrix m;
  for (const auto& d : bundle.datasets) m.task_ids.push_back(d.id);
  const std::size_t n = bundle.datasets.size();
  m.grouped.assign(n, std::vector<EvalCell>(n));
  for (std::size_t g = 0; g < n; ++g) {
    const auto& group = bundle.contexts[g];
    for (const auto& ctx : group) {
      const AdapterSet adapters = materialize_adapter(model, ctx.embedding);
      std::vector<EvalCell> row;
      for (std::size_t t = 0; t < n; ++t) {
        row.push_back(eval_cell(model, bundle.datasets[t], adapters));
        m.grouped[g][t].loss += row.back().loss / static_cast<double>(group.size());
        m.grouped[g][t].accuracy += row.back().accuracy / static_cast<double>(group.size());
      }
      m.context_ids.push_back(ctx.id);
      m.context_tasks.push_back(ctx.dataset_id);
      m.cells.push_back(std::move(row));
    }
  }
  // z = ones: the shared pairs alone, detached.
  AdapterSet plain(model.cfg.n_layers, 0b11);
  for (const auto& [site, pair] : model.pairs) {
    plain.insert(site, AdapterEntry{LoRAPair{pair.a.detach(), pair.b.detach(), pair.scale},
                                    Modulation::identity()});
  }
  for (std::size_t t = 0; t < n; ++t) {
    m.unconditioned.push_back(eval_cell(model, bundle.datasets[t], plain));
  }
  return m;
}

std::string format_eval_matrix(const EvalMatrix& m) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(4);
  std::size_t w = 14;
  for (const auto& id : m.context_ids) w = std::max(w, id.size() + 2);
  o << std::left << std::setw(static_cast<int>(w)) << "context";
  for (const auto& t : m.task_ids) o << std::right << std::setw(18) << (t + " loss/acc");
  o << '\n';
  auto row = [&](const std::string& label, const std::vector<EvalCell>& cells) {
    o << std::left << std::setw(static_cast<int>(w)) << label;
    for (const auto& c : cells) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4) << c.loss << '/' << std::setprecision(3) << c.accuracy;
      o << std::right << std::setw(18) << cell.str();
    }
    o << '\n';
  };
  for (std::size_t i = 0; i < m.context_ids.size(); ++i) row(m.context_ids[i], m.cells[i]);
  for (std::size_t g = 0; g < m.grouped.size(); ++g) row("[" + m.task_ids[g] + "]", m.grouped[g]);
  row("[z=ones]", m.unconditioned);
  o << "diagonal dominance: " << (m.diagonal_dominant() ? "yes" : "no") << '\n';
  for (std::size_t t = 0; t < m.task_ids.size(); ++t) {
    o << "  " << m.task_ids[t] << ": matched " << m.matched_loss(t) << ", best mismatched "
      << m.best_mismatched_loss(t) << ", z=ones " << m.unconditioned[t].loss << '\n';
  }
  return o.str();
}

}  // namespace zhyper
