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

#ifndef ORTHROS_BENCH_H_
#define ORTHROS_BENCH_H_

#include <string>
#include <vector>

#include "orthros/decode.h"
#include "orthros/model.h"
#include "orthros/synthdata.h"

namespace orthros {

// One evaluated system: decode settings plus its measured quality and speed.
struct BenchResult {
  std::string label;
  std::string family;  // trade-off curve grouping; defaults to the mode
  DecodeConfig config;
  double bleu = 0.0;
  double mean_ms = 0.0;  // per-sentence decode latency, batch size 1
  double std_ms = 0.0;   // across timed runs
  double speedup = 0.0;  // reference mean / this mean; 0 until assigned
};

// Times `runs` full decode passes over the eval set after `warmup` untimed
// passes (the first of which also produces the hypotheses scored by BLEU).
// Only the per-sentence translate() call sits inside the timed region.
BenchResult bench_latency(OrthrosModel<float>& model, const Corpus& eval_set,
                          const DecodeConfig& config, int runs = 5,
                          int warmup = 1);

// Fills every result's speedup as ref.mean_ms / result.mean_ms, where ref is
// the row whose label matches `reference`.
void assign_speedups(std::vector<BenchResult>& results,
                     const std::string& reference);

struct MatrixCell {
  std::string id;      // key used in the matrix file
  std::string label;   // display label (defaults to id)
  std::string family;  // trade-off curve grouping (defaults to mode)
  std::string ckpt;
  DecodeConfig config;
};

struct ExperimentMatrix {
  std::string data_dir;
  std::string split = "test";
  int runs = 5;
  std::string reference;  // label of the 1.00x anchor; empty = no speedups
  std::vector<MatrixCell> cells;
};

ExperimentMatrix parse_matrix(const std::string& path);

// Evaluates each cell serially (timing cells must not share the machine) and
// assigns speedups against the configured reference.
std::vector<BenchResult> run_experiment_matrix(const ExperimentMatrix& matrix);

// Human-readable aligned table.
std::string format_bench_table(const std::vector<BenchResult>& results);

// Machine-readable line-delimited key=value records, one row per line.
std::string format_bench_records(const std::vector<BenchResult>& results);

// Plot-ready (speedup, bleu) pairs grouped into one section per family.
std::string format_tradeoff_series(const std::vector<BenchResult>& results);

}  // namespace orthros

#endif  // ORTHROS_BENCH_H_
