// Copyright 2026 Orthros Authors
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

// Training loop: task wiring, batching with gradient accumulation, Adam +
// Noam schedule, validation-based checkpoint keeping, metrics stream, and
// the sequence-level knowledge-distillation pipeline.

#ifndef ORTHROS_TRAIN_H_
#define ORTHROS_TRAIN_H_

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "orthros/losses.h"
#include "orthros/model.h"
#include "orthros/synthdata.h"

namespace orthros {

// What one model trains on. All speech tasks share the frame encoder; mt
// runs the text encoder and is the Seq-KD teacher.
enum class Task { kStOrthros, kAsr, kMt, kStAr, kStCtc };

Task parse_task(const std::string& name);
std::string task_name(Task task);

// Model dimensions for a task on a dataset: vocabulary sizes and input_dim
// always derive from the TaskSpec; the rest comes from `base`.
ModelConfig model_config_for_task(Task task, const TaskSpec& spec,
                                  const ModelConfig& base);

// Source-layout core ids (base 2) <-> target-layout core ids (base 4).
std::vector<int> map_src_to_tgt(const std::vector<int>& src);
std::vector<int> map_tgt_to_src(const std::vector<int>& tgt);

// One combined flat key=value file for model + training hyperparameters.
// Unknown keys are errors.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);

// One line per optimizer step; all fields always present, unused loss
// terms record 0.
struct MetricsRecord {
  int step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_cmlm = 0.0;
  double loss_ar = 0.0;
  double loss_lp = 0.0;
  double loss_asr = 0.0;
  double wall_ms = 0.0;
};
std::string format_metrics(const MetricsRecord& r);
MetricsRecord parse_metrics(const std::string& line);

struct TrainResult {
  int steps = 0;
  std::vector<MetricsRecord> metrics;
  double best_val_loss = 0.0;
  bool has_val = false;
  // Kept checkpoint paths, best validation loss first.
  std::vector<std::string> checkpoints;
};

// Copy parameters by prefix from a source model (shape-checked).
void copy_params_with_prefix(OrthrosModel<float>& dst,
                             const OrthrosModel<float>& src,
                             const std::vector<std::string>& prefixes);

// Mean validation loss (task objective, no dropout, fixed masks).
double validation_loss(OrthrosModel<float>& m, const Corpus& dev, Task task,
                       const TrainConfig& cfg);

// The loop: per step, batch_size*accum_steps sequences are forwarded off
// one encode pass each, gradients accumulate, one adam step fires, one
// metrics record is emitted. out_dir "" keeps no checkpoint files.
// val_interval 0 validates every max(1, max_steps/5) steps.
TrainResult train(OrthrosModel<float>& m, const Corpus& train_data,
                  const Corpus& dev_data, Task task, const TrainConfig& cfg,
                  const std::string& out_dir = "",
                  std::ostream* metrics_out = nullptr, int val_interval = 0);

// Sequence-level knowledge distillation: replace every translation with the
// teacher's output on the transcription. Frames and transcriptions are
// untouched.
using TeacherFn = std::function<std::vector<int>(const std::vector<int>&)>;
Corpus distill_dataset(const TeacherFn& teacher, const Corpus& data);
Corpus distill_dataset(OrthrosModel<float>& teacher, const Corpus& data,
                       int beam = 4);

}  // namespace orthros

#endif  // ORTHROS_TRAIN_H_
