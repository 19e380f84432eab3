// Copyright 2026 Orthros Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "orthros/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "orthros/bleu.h"
#include "orthros/checkpoint.h"
#include "orthros/common.h"
#include "orthros/kvconfig.h"

namespace orthros {
namespace {

double decode_pass_ms(OrthrosModel<float>& model, const Corpus& eval_set,
                      const DecodeConfig& config,
                      std::vector<TokenSeq>* hyps) {
  if (hyps != nullptr) hyps->clear();
  const auto start = std::chrono::steady_clock::now();
  for (const Triplet& ex : eval_set.items) {
    Hypothesis h = translate(model, ex.frames, config);
    if (hyps != nullptr) hyps->push_back(h.tokens);
  }
  const auto stop = std::chrono::steady_clock::now();
  const double total_ms =
      std::chrono::duration<double, std::milli>(stop - start).count();
  return total_ms / static_cast<double>(eval_set.items.size());
}

std::string format_cell(double v, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%*.2f", width, v);
  return buf;
}

}  // namespace

BenchResult bench_latency(OrthrosModel<float>& model, const Corpus& eval_set,
                          const DecodeConfig& config, int runs, int warmup) {
  config.validate();
  check(!eval_set.items.empty(), "bench: empty eval set");
  check(runs >= 2, "bench: runs must be at least 2");
  check(warmup >= 1, "bench: warmup must be at least 1");

  BenchResult r;
  r.config = config;
  r.family = config.mode;

  std::vector<TokenSeq> hyps;
  for (int w = 0; w < warmup; ++w)
    decode_pass_ms(model, eval_set, config, w == 0 ? &hyps : nullptr);
  std::vector<std::vector<TokenSeq>> refs;
  for (const Triplet& ex : eval_set.items) refs.push_back({ex.translation});
  r.bleu = corpus_bleu(hyps, refs);

  std::vector<double> per_run;
  for (int i = 0; i < runs; ++i)
    per_run.push_back(decode_pass_ms(model, eval_set, config, nullptr));
  double sum = 0.0;
  for (double v : per_run) sum += v;
  r.mean_ms = sum / runs;
  double ss = 0.0;
  for (double v : per_run) ss += (v - r.mean_ms) * (v - r.mean_ms);
  r.std_ms = std::sqrt(ss / (runs - 1));
  return r;
}

void assign_speedups(std::vector<BenchResult>& results,
                     const std::string& reference) {
  const BenchResult* ref = nullptr;
  for (const BenchResult& r : results)
    if (r.label == reference) ref = &r;
  check(ref != nullptr, "bench: reference system not found");
  for (BenchResult& r : results) r.speedup = ref->mean_ms / r.mean_ms;
}

ExperimentMatrix parse_matrix(const std::string& path) {
  const KvConfig kv = KvConfig::from_file(path);
  ExperimentMatrix m;
  m.data_dir = kv.require_string("data");
  m.split = kv.get_string("split", m.split);
  check(m.split == "dev" || m.split == "test", "matrix: unknown split");
  m.runs = static_cast<int>(kv.get_int("runs", m.runs));
  m.reference = kv.get_string("reference", "");

  std::istringstream ids(kv.require_string("cells"));
  std::string id;
  while (ids >> id) {
    MatrixCell cell;
    cell.id = id;
    const std::string p = "cell." + id + ".";
    cell.ckpt = kv.get_string(p + "ckpt", "");
    check(!cell.ckpt.empty(), "matrix: cell " + id + " has no checkpoint");
    cell.config.mode = kv.get_string(p + "mode", cell.config.mode);
    cell.config.iterations = static_cast<int>(
        kv.get_int(p + "iterations", cell.config.iterations));
    cell.config.length_beam = static_cast<int>(
        kv.get_int(p + "length_beam", cell.config.length_beam));
    cell.config.beam = static_cast<int>(kv.get_int(p + "beam",
                                                   cell.config.beam));
    cell.config.use_ar_selection =
        kv.get_bool(p + "ar_selection", cell.config.use_ar_selection);
    cell.config.use_smart_updates =
        kv.get_bool(p + "smart", cell.config.use_smart_updates);
    cell.config.length_mode =
        kv.get_string(p + "length_mode", cell.config.length_mode);
    cell.config.alpha = kv.get_double(p + "alpha", cell.config.alpha);
    cell.config.validate();
    cell.label = kv.get_string(p + "label", id);
    cell.family = kv.get_string(p + "family", cell.config.mode);
    m.cells.push_back(cell);
  }
  check(!m.cells.empty(), "matrix: no cells");
  kv.require_consumed();
  return m;
}

std::vector<BenchResult> run_experiment_matrix(const ExperimentMatrix& matrix) {
  const Corpus eval_set =
      load_corpus(matrix.data_dir + "/" + matrix.split + ".bin");
  std::vector<BenchResult> results;
  for (const MatrixCell& cell : matrix.cells) {
    check(std::filesystem::exists(cell.ckpt),
          "bench: missing checkpoint for cell " + cell.id);
    OrthrosModel<float> model = load_checkpoint(cell.ckpt);
    DecodeConfig config = cell.config;
    config.max_len = model.config().n_max;
    BenchResult r = bench_latency(model, eval_set, config, matrix.runs);
    r.label = cell.label;
    r.family = cell.family;
    results.push_back(r);
  }
  if (!matrix.reference.empty()) assign_speedups(results, matrix.reference);
  return results;
}

std::string format_bench_table(const std::vector<BenchResult>& results) {
  size_t label_w = 6;
  for (const BenchResult& r : results)
    label_w = std::max(label_w, r.label.size());
  std::ostringstream out;
  out << "system";
  out << std::string(label_w - 6, ' ');
  out << "    bleu   mean_ms    std_ms   speedup\n";
  for (const BenchResult& r : results) {
    out << r.label << std::string(label_w - r.label.size(), ' ');
    out << format_cell(r.bleu, 8) << format_cell(r.mean_ms, 10)
        << format_cell(r.std_ms, 10) << format_cell(r.speedup, 10) << "\n";
  }
  return out.str();
}

std::string format_bench_records(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  for (const BenchResult& r : results) {
    out << "label=" << r.label << "\tmode=" << r.config.mode
        << "\titerations=" << r.config.iterations
        << "\tlength_beam=" << r.config.length_beam
        << "\tbeam=" << r.config.beam
        << "\tar_selection=" << (r.config.use_ar_selection ? 1 : 0)
        << "\tbleu=" << format_double(r.bleu)
        << "\tmean_ms=" << format_double(r.mean_ms)
        << "\tstd_ms=" << format_double(r.std_ms)
        << "\tspeedup=" << format_double(r.speedup) << "\n";
  }
  return out.str();
}

std::string format_tradeoff_series(const std::vector<BenchResult>& results) {
  std::vector<std::pair<std::string, std::vector<const BenchResult*>>> groups;
  for (const BenchResult& r : results) {
    const std::string family = r.family.empty() ? r.config.mode : r.family;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == family; });
    if (it == groups.end()) {
      groups.push_back({family, {&r}});
    } else {
      it->second.push_back(&r);
    }
  }
  std::ostringstream out;
  for (const auto& [family, rows] : groups) {
    out << "# family: " << family << "\n";
    for (const BenchResult* r : rows)
      out << format_double(r->speedup) << " " << format_double(r->bleu)
          << "\n";
  }
  return out.str();
}

}  // namespace orthros
