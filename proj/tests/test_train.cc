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

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "orthros/checkpoint.h"
#include "orthros/train.h"
#include "orthros/vocab.h"

namespace orthros {
namespace {

// Small task: short sentences, short durations, deterministic lexicon
// unless stated otherwise.
TaskSpec small_spec() {
  TaskSpec s;
  s.v_src_core = 4;
  s.v_tgt_core = 8;
  s.synonyms = 2;
  s.l_min = 3;
  s.l_max = 4;
  s.d_min = 4;
  s.d_max = 5;
  s.sigma = 0.05;
  s.p_silence = 0.0;
  s.p_fertility2 = 0.0;
  s.reorder_window = 1;
  s.input_dim = 6;
  s.seed = 5;
  return s;
}

ModelConfig tiny_base() {
  ModelConfig c;
  c.d_model = 16;
  c.d_ff = 32;
  c.n_heads = 2;
  c.n_enc_layers = 2;
  c.n_dec_layers = 1;
  c.n_max = 16;
  c.dropout = 0.0;
  return c;
}

std::vector<Tensor<float>> param_snapshot(const OrthrosModel<float>& m) {
  std::vector<Tensor<float>> out;
  for (const Parameter<float>& p : m.params()) out.push_back(p.value);
  return out;
}

bool params_equal(const std::vector<Tensor<float>>& a,
                  const std::vector<Tensor<float>>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::memcmp(a[i].data.data(), b[i].data.data(),
                    sizeof(float) * a[i].data.size()) != 0)
      return false;
  return true;
}

// Plug-in conditional entropy H(Y | Y_src) in nats over a corpus.
double conditional_entropy(const Corpus& c) {
  std::map<std::vector<int>, std::map<std::vector<int>, int>> by_src;
  for (const Triplet& ex : c.items)
    ++by_src[ex.transcription][ex.translation];
  double h = 0.0;
  const double n = static_cast<double>(c.items.size());
  for (const auto& [src, ys] : by_src) {
    int total = 0;
    for (const auto& [y, cnt] : ys) total += cnt;
    for (const auto& [y, cnt] : ys) {
      const double p = static_cast<double>(cnt) / total;
      h -= (total / n) * p * std::log(p);
    }
  }
  return h;
}

TEST_CASE("task names and model dimensions") {
  CHECK(parse_task("st-orthros") == Task::kStOrthros);
  CHECK(parse_task("asr") == Task::kAsr);
  CHECK(parse_task("mt") == Task::kMt);
  CHECK(parse_task("st-ar") == Task::kStAr);
  CHECK(parse_task("st-ctc") == Task::kStCtc);
  CHECK_THROWS_WITH(parse_task("st"), "train: unknown task");
  for (const char* name : {"st-orthros", "asr", "mt", "st-ar", "st-ctc"})
    CHECK(task_name(parse_task(name)) == name);

  const TaskSpec spec = small_spec();
  const ModelConfig base = tiny_base();
  ModelConfig c = model_config_for_task(Task::kStOrthros, spec, base);
  CHECK(c.v_src == 2 + 4);
  CHECK(c.v_tgt == 4 + 8);
  CHECK(c.input_dim == 6);
  CHECK(c.frontend == "frames");
  CHECK(c.d_model == 16);

  c = model_config_for_task(Task::kAsr, spec, base);
  CHECK(c.v_src == 2 + 4);
  CHECK(c.v_tgt == 4 + 4);

  c = model_config_for_task(Task::kMt, spec, base);
  CHECK(c.frontend == "text");
  CHECK(c.v_tgt == 4 + 8);

  c = model_config_for_task(Task::kStCtc, spec, base);
  CHECK(c.v_src == 2 + 8);  // CTC head covers the translation cores
  CHECK(c.v_tgt == 4 + 8);
}

TEST_CASE("token id maps") {
  CHECK(map_src_to_tgt({2, 3, 5}) == std::vector<int>{4, 5, 7});
  CHECK(map_tgt_to_src({4, 5, 7}) == std::vector<int>{2, 3, 5});
  CHECK(map_src_to_tgt(map_tgt_to_src({9, 4, 6})) == std::vector<int>{9, 4, 6});
  CHECK_THROWS_WITH(map_src_to_tgt({1}), "train: source token out of range");
  CHECK_THROWS_WITH(map_tgt_to_src({3}), "train: target token out of range");
}

TEST_CASE("run config file round trip") {
  const std::string dir = "/tmp/orthros_train_test";
  std::filesystem::create_directories(dir);
  RunConfig rc;
  rc.model.d_model = 24;
  rc.model.n_heads = 3;
  rc.model.dropout = 0.05;
  rc.train.lambda_ar = 0.25;
  rc.train.use_smart = true;
  rc.train.max_steps = 77;
  rc.train.seed = 9;
  rc.train.warmup_steps = 600;
  rc.train.lr_constant = 0.4;
  {
    std::ofstream out(dir + "/run.cfg");
    out << serialize_run_config(rc);
  }
  const RunConfig back = load_run_config(dir + "/run.cfg");
  CHECK(back.model.d_model == 24);
  CHECK(back.model.n_heads == 3);
  CHECK(back.model.dropout == 0.05);
  CHECK(back.train.lambda_ar == 0.25);
  CHECK(back.train.use_smart);
  CHECK(back.train.max_steps == 77);
  CHECK(back.train.seed == 9);
  CHECK(back.train.warmup_steps == 600);
  CHECK(back.train.lr_constant == 0.4);
  // Untouched fields keep defaults.
  CHECK(back.train.lambda_lp == 0.1);
  CHECK(back.train.keep_checkpoints == 5);

  {
    std::ofstream out(dir + "/bad.cfg");
    out << "d_model = 24\nlearning_rate = 3\n";
  }
  CHECK_THROWS(load_run_config(dir + "/bad.cfg"));
}

TEST_CASE("metrics records format and parse") {
  MetricsRecord r;
  r.step = 42;
  r.lr = 1.25e-4;
  r.loss_total = 3.5;
  r.loss_cmlm = 2.0;
  r.loss_ar = 1.0;
  r.loss_lp = 0.25;
  r.loss_asr = 0.25;
  r.wall_ms = 12.5;
  const std::string line = format_metrics(r);
  const MetricsRecord back = parse_metrics(line);
  CHECK(back.step == 42);
  CHECK(back.lr == r.lr);
  CHECK(back.loss_total == r.loss_total);
  CHECK(back.loss_cmlm == r.loss_cmlm);
  CHECK(back.loss_ar == r.loss_ar);
  CHECK(back.loss_lp == r.loss_lp);
  CHECK(back.loss_asr == r.loss_asr);
  CHECK(back.wall_ms == r.wall_ms);
  CHECK_THROWS_WITH(parse_metrics("step=1 bogus=2"), "metrics: unknown field");
  CHECK_THROWS_WITH(parse_metrics("step=1"), "metrics: missing fields");
}

TEST_CASE("copy_params_with_prefix for pretraining initialization") {
  const TaskSpec spec = small_spec();
  OrthrosModel<float> asr(model_config_for_task(Task::kAsr, spec, tiny_base()));
  asr.init_parameters(3);
  OrthrosModel<float> st(
      model_config_for_task(Task::kStOrthros, spec, tiny_base()));
  st.init_parameters(4);

  const std::vector<Tensor<float>> before = param_snapshot(st);
  copy_params_with_prefix(st, asr, {"encoder."});
  size_t idx = 0;
  for (const Parameter<float>& p : st.params()) {
    if (p.name.rfind("encoder.", 0) == 0) {
      CHECK(std::memcmp(p.value.data.data(),
                        asr.find(p.name)->value.data.data(),
                        sizeof(float) * p.value.data.size()) == 0);
    } else {
      CHECK(std::memcmp(p.value.data.data(), before[idx].data.data(),
                        sizeof(float) * p.value.data.size()) == 0);
    }
    ++idx;
  }

  // v_tgt differs between the two models: copying the AR head must fail.
  CHECK_THROWS_WITH(copy_params_with_prefix(st, asr, {"ar."}),
                    "init: parameter shape mismatch");
}

TEST_CASE("train is a no-op at 0 steps") {
  const TaskSpec spec = small_spec();
  const CorpusSplits data = build_corpus(spec, 8, 4, 1);
  OrthrosModel<float> m(
      model_config_for_task(Task::kStOrthros, spec, tiny_base()));
  m.init_parameters(1);
  const std::vector<Tensor<float>> before = param_snapshot(m);
  TrainConfig cfg;
  cfg.max_steps = 0;
  const TrainResult r = train(m, data.train, data.dev, Task::kStOrthros, cfg);
  CHECK(r.steps == 0);
  CHECK(r.metrics.empty());
  CHECK(params_equal(before, param_snapshot(m)));
}

TEST_CASE("training runs every task and is seed-deterministic") {
  const TaskSpec spec = small_spec();
  const CorpusSplits data = build_corpus(spec, 12, 4, 1);
  for (Task task : {Task::kStOrthros, Task::kAsr, Task::kMt, Task::kStAr,
                    Task::kStCtc}) {
    CAPTURE(task_name(task));
    TrainConfig cfg;
    cfg.max_steps = 3;
    cfg.batch_size = 2;
    cfg.accum_steps = 2;
    cfg.seed = 11;

    OrthrosModel<float> m1(model_config_for_task(task, spec, tiny_base()));
    m1.init_parameters(2);
    std::ostringstream s1;
    const TrainResult r1 = train(m1, data.train, data.dev, task, cfg, "", &s1);

    OrthrosModel<float> m2(model_config_for_task(task, spec, tiny_base()));
    m2.init_parameters(2);
    std::ostringstream s2;
    const TrainResult r2 = train(m2, data.train, data.dev, task, cfg, "", &s2);

    CHECK(r1.steps == 3);
    CHECK(r1.metrics.size() == 3);
    REQUIRE(r2.metrics.size() == r1.metrics.size());
    for (size_t i = 0; i < r1.metrics.size(); ++i) {
      CHECK(r1.metrics[i].step == r2.metrics[i].step);
      CHECK(r1.metrics[i].lr == r2.metrics[i].lr);
      CHECK(r1.metrics[i].loss_total == r2.metrics[i].loss_total);
      CHECK(r1.metrics[i].loss_cmlm == r2.metrics[i].loss_cmlm);
      CHECK(r1.metrics[i].loss_ar == r2.metrics[i].loss_ar);
      CHECK(r1.metrics[i].loss_lp == r2.metrics[i].loss_lp);
      CHECK(r1.metrics[i].loss_asr == r2.metrics[i].loss_asr);
      CHECK(std::isfinite(r1.metrics[i].loss_total));
    }
    CHECK(params_equal(param_snapshot(m1), param_snapshot(m2)));
    CHECK(r1.best_val_loss == r2.best_val_loss);
    CHECK(r1.has_val);
    // Streams differ only in wall_ms.
    CHECK(s1.str().substr(0, s1.str().find("wall_ms")) ==
          s2.str().substr(0, s2.str().find("wall_ms")));

    // Single-head tasks leave the unused loss fields at zero.
    if (task == Task::kMt || task == Task::kStAr) {
      CHECK(r1.metrics[0].loss_ar == r1.metrics[0].loss_total);
      CHECK(r1.metrics[0].loss_cmlm == 0.0);
      CHECK(r1.metrics[0].loss_asr == 0.0);
    }
    if (task == Task::kStCtc) {
      CHECK(r1.metrics[0].loss_asr == r1.metrics[0].loss_total);
      CHECK(r1.metrics[0].loss_ar == 0.0);
    }
  }
}

TEST_CASE("smart objective trains") {
  const TaskSpec spec = small_spec();
  const CorpusSplits data = build_corpus(spec, 8, 2, 1);
  TrainConfig cfg;
  cfg.max_steps = 2;
  cfg.batch_size = 2;
  cfg.use_smart = true;
  OrthrosModel<float> m(
      model_config_for_task(Task::kStOrthros, spec, tiny_base()));
  m.init_parameters(6);
  const TrainResult r = train(m, data.train, data.dev, Task::kStOrthros, cfg);
  CHECK(r.steps == 2);
  for (const MetricsRecord& rec : r.metrics) {
    CHECK(std::isfinite(rec.loss_total));
    CHECK(rec.loss_cmlm > 0.0);
  }
}

TEST_CASE("validation loss is deterministic and checkpoints are kept") {
  const TaskSpec spec = small_spec();
  const CorpusSplits data = build_corpus(spec, 10, 4, 1);
  OrthrosModel<float> m(
      model_config_for_task(Task::kStOrthros, spec, tiny_base()));
  m.init_parameters(5);
  TrainConfig cfg;
  const double v1 = validation_loss(m, data.dev, Task::kStOrthros, cfg);
  const double v2 = validation_loss(m, data.dev, Task::kStOrthros, cfg);
  CHECK(v1 == v2);
  CHECK(std::isfinite(v1));

  const std::string out_dir = "/tmp/orthros_train_test/ckpts";
  std::filesystem::remove_all(out_dir);
  cfg.max_steps = 10;
  cfg.batch_size = 1;
  cfg.keep_checkpoints = 3;
  const TrainResult r =
      train(m, data.train, data.dev, Task::kStOrthros, cfg, out_dir, nullptr,
            /*val_interval=*/2);
  CHECK(r.has_val);
  CHECK(std::isfinite(r.best_val_loss));
  CHECK(!r.checkpoints.empty());
  CHECK(r.checkpoints.size() <= 3);
  size_t on_disk = 0;
  for (const auto& e : std::filesystem::directory_iterator(out_dir)) {
    (void)e;
    ++on_disk;
  }
  CHECK(on_disk == r.checkpoints.size());
  // Best checkpoint loads and reproduces its validation loss.
  OrthrosModel<float> best = load_checkpoint(r.checkpoints.front());
  CHECK(validation_loss(best, data.dev, Task::kStOrthros, cfg) ==
        doctest::Approx(r.best_val_loss).epsilon(1e-12));
}

TEST_CASE("non-finite loss aborts with a diagnostic record") {
  const TaskSpec spec = small_spec();
  const CorpusSplits data = build_corpus(spec, 4, 2, 1);
  OrthrosModel<float> m(
      model_config_for_task(Task::kStAr, spec, tiny_base()));
  m.init_parameters(1);
  m.p("ar.out.b").value.fill(std::numeric_limits<float>::infinity());
  TrainConfig cfg;
  cfg.max_steps = 2;
  cfg.batch_size = 1;
  std::ostringstream stream;
  CHECK_THROWS_WITH(train(m, data.train, data.dev, Task::kStAr, cfg, "", &stream),
                    "train: non-finite loss");
  CHECK(stream.str().find("step=1") != std::string::npos);
  CHECK(stream.str().find("loss_total=") != std::string::npos);
}

TEST_CASE("distillation") {
  TaskSpec spec = small_spec();
  spec.synonyms = 2;
  spec.seed = 21;
  const CorpusSplits data = build_corpus(spec, 300, 1, 1);

  SUBCASE("identity teacher copies the transcription") {
    const Corpus d = distill_dataset(
        [](const std::vector<int>& src) { return src; }, data.train);
    REQUIRE(d.items.size() == data.train.items.size());
    for (size_t i = 0; i < d.items.size(); ++i)
      CHECK(d.items[i].translation == data.train.items[i].transcription);
  }

  SUBCASE("frames and transcriptions are preserved") {
    const Corpus d = distill_dataset(
        [](const std::vector<int>& src) {
          std::vector<int> out;
          for (int c : src) out.push_back(kTgtCoreBase + ((c * 7) % 8));
          return out;
        },
        data.train);
    REQUIRE(d.items.size() == data.train.items.size());
    CHECK(d.spec == data.train.spec);
    for (size_t i = 0; i < d.items.size(); ++i) {
      CHECK(d.items[i].transcription == data.train.items[i].transcription);
      CHECK(std::memcmp(d.items[i].frames.data.data(),
                        data.train.items[i].frames.data.data(),
                        sizeof(float) * d.items[i].frames.data.size()) == 0);
    }
  }

  SUBCASE("any deterministic teacher removes conditional entropy") {
    const double raw = conditional_entropy(data.train);
    CHECK(raw > 0.1);  // s=2 synonyms leave real multimodality in the sample
    const Corpus d = distill_dataset(
        [](const std::vector<int>& src) {
          std::vector<int> out;
          for (int c : src) out.push_back(kTgtCoreBase + ((c * 5) % 8));
          return out;
        },
        data.train);
    CHECK(conditional_entropy(d) == 0.0);
  }

  SUBCASE("model teacher is deterministic and checks vocabulary") {
    OrthrosModel<float> teacher(
        model_config_for_task(Task::kMt, spec, tiny_base()));
    teacher.init_parameters(19);
    Corpus sub;
    sub.spec = data.train.spec;
    sub.items.assign(data.train.items.begin(), data.train.items.begin() + 12);
    const Corpus d1 = distill_dataset(teacher, sub, 4);
    const Corpus d2 = distill_dataset(teacher, sub, 4);
    REQUIRE(d1.items.size() == 12);
    for (size_t i = 0; i < d1.items.size(); ++i) {
      CHECK(d1.items[i].translation == d2.items[i].translation);
      CHECK(!d1.items[i].translation.empty());
      for (int tok : d1.items[i].translation) CHECK(tok >= kTgtCoreBase);
    }
    CHECK(conditional_entropy(d1) == 0.0);

    TaskSpec big = spec;
    big.v_src_core = 40;  // teacher embedding table too small
    Corpus bad;
    bad.spec = big;
    bad.items = sub.items;
    CHECK_THROWS_WITH(distill_dataset(teacher, bad, 4),
                      "distill: teacher vocabulary mismatch");
  }
}

TEST_CASE("overfit: loss halves on a 16-example dataset") {
  TaskSpec spec = small_spec();
  spec.synonyms = 1;  // deterministic lexicon: a pure memorization target
  spec.sigma = 0.02;
  spec.seed = 31;
  const CorpusSplits data = build_corpus(spec, 16, 4, 1);
  ModelConfig base;  // desk-scale defaults
  OrthrosModel<float> m(
      model_config_for_task(Task::kStOrthros, spec, base));
  m.init_parameters(1);
  TrainConfig cfg;
  cfg.max_steps = 500;
  cfg.batch_size = 8;
  cfg.seed = 1;
  const TrainResult r =
      train(m, data.train, data.dev, Task::kStOrthros, cfg, "", nullptr,
            /*val_interval=*/500);
  REQUIRE(r.metrics.size() == 500);
  const double first = r.metrics.front().loss_total;
  double tail = 0.0;
  for (size_t i = r.metrics.size() - 10; i < r.metrics.size(); ++i)
    tail += r.metrics[i].loss_total;
  tail /= 10.0;
  CAPTURE(first);
  CAPTURE(tail);
  CHECK(tail <= 0.5 * first);
}

}  // namespace
}  // namespace orthros
