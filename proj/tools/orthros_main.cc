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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "orthros/bench.h"
#include "orthros/bleu.h"
#include "orthros/checkpoint.h"
#include "orthros/decode.h"
#include "orthros/kvconfig.h"
#include "orthros/synthdata.h"
#include "orthros/train.h"

namespace orthros {
namespace {

TaskSpec load_task_spec(const std::string& path) {
  const KvConfig kv = KvConfig::from_file(path);
  TaskSpec s;
  s.v_src_core = static_cast<int>(kv.get_int("v_src_core", s.v_src_core));
  s.v_tgt_core = static_cast<int>(kv.get_int("v_tgt_core", s.v_tgt_core));
  s.synonyms = static_cast<int>(kv.get_int("synonyms", s.synonyms));
  s.l_min = static_cast<int>(kv.get_int("l_min", s.l_min));
  s.l_max = static_cast<int>(kv.get_int("l_max", s.l_max));
  s.d_min = static_cast<int>(kv.get_int("d_min", s.d_min));
  s.d_max = static_cast<int>(kv.get_int("d_max", s.d_max));
  s.sigma = kv.get_double("sigma", s.sigma);
  s.p_silence = kv.get_double("p_silence", s.p_silence);
  s.p_fertility2 = kv.get_double("p_fertility2", s.p_fertility2);
  s.reorder_window =
      static_cast<int>(kv.get_int("reorder_window", s.reorder_window));
  s.input_dim = static_cast<int>(kv.get_int("input_dim", s.input_dim));
  s.seed = static_cast<uint64_t>(kv.get_int("seed", 1));
  kv.require_consumed();
  s.validate();
  return s;
}

// Hypothesis files: one sentence per line, space-separated token ids.
std::vector<std::vector<int>> load_token_lines(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "cli: cannot open " + path);
  std::vector<std::vector<int>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<int> toks;
    int t;
    while (ls >> t) toks.push_back(t);
    out.push_back(toks);
  }
  return out;
}

int cmd_gen_data(const std::string& spec_path, const std::string& out_dir,
                 int n_train, int n_dev, int n_test, int64_t seed,
                 bool seed_set) {
  TaskSpec spec = load_task_spec(spec_path);
  if (seed_set) spec.seed = static_cast<uint64_t>(seed);
  std::filesystem::create_directories(out_dir);
  build_corpus(spec, n_train, n_dev, n_test, out_dir);
  std::printf("wrote %d/%d/%d triplets to %s\n", n_train, n_dev, n_test,
              out_dir.c_str());
  return 0;
}

int cmd_train(const std::string& task_name, const std::string& data_dir,
              const std::string& config_path, const std::string& out_dir,
              const std::string& init_encoder,
              const std::string& init_ar_decoder, int64_t seed,
              bool seed_set) {
  const Task task = parse_task(task_name);
  const Corpus train_data = load_corpus(data_dir + "/train.bin");
  const Corpus dev_data = load_corpus(data_dir + "/dev.bin");
  RunConfig rc = load_run_config(config_path);
  if (seed_set) rc.train.seed = static_cast<uint64_t>(seed);

  OrthrosModel<float> model(
      model_config_for_task(task, train_data.spec, rc.model));
  model.init_parameters(rc.train.seed);
  if (!init_encoder.empty()) {
    const OrthrosModel<float> src = load_checkpoint(init_encoder);
    copy_params_with_prefix(model, src, {"encoder."});
  }
  if (!init_ar_decoder.empty()) {
    const OrthrosModel<float> src = load_checkpoint(init_ar_decoder);
    copy_params_with_prefix(model, src, {"ar.", "tgt_embed."});
  }

  std::filesystem::create_directories(out_dir);
  std::ofstream metrics(out_dir + "/metrics.txt");
  const TrainResult r =
      train(model, train_data, dev_data, task, rc.train, out_dir, &metrics);
  save_checkpoint(out_dir + "/final.ckpt", model);
  std::printf("trained %lld steps", static_cast<long long>(r.steps));
  if (r.has_val)
    std::printf(", best validation loss %s",
                format_double(r.best_val_loss).c_str());
  std::printf("\n");
  return 0;
}

int cmd_distill(const std::string& teacher_path, const std::string& data_dir,
                const std::string& out_dir, int beam) {
  OrthrosModel<float> teacher = load_checkpoint(teacher_path);
  std::filesystem::create_directories(out_dir);
  for (const char* split : {"train", "dev", "test"}) {
    const std::string src = data_dir + "/" + split + ".bin";
    if (!std::filesystem::exists(src)) continue;
    const Corpus distilled = distill_dataset(teacher, load_corpus(src), beam);
    save_corpus(out_dir + "/" + split + ".bin", distilled);
    std::printf("distilled %zu %s triplets\n", distilled.items.size(), split);
  }
  return 0;
}

int cmd_average(const std::vector<std::string>& inputs,
                const std::string& out_path) {
  const OrthrosModel<float> avg = average_checkpoints(inputs);
  save_checkpoint(out_path, avg);
  std::printf("averaged %zu checkpoints into %s\n", inputs.size(),
              out_path.c_str());
  return 0;
}

int cmd_decode(const std::string& ckpt, const std::string& data_dir,
               const std::string& split, const DecodeConfig& base,
               const std::string& out_path) {
  OrthrosModel<float> model = load_checkpoint(ckpt);
  const Corpus eval_set = load_corpus(data_dir + "/" + split + ".bin");
  DecodeConfig cfg = base;
  if (cfg.length_mode == "ctc-scale") cfg.length_mode = "ctc_scale";
  cfg.max_len = model.config().n_max;
  cfg.validate();
  std::ofstream out(out_path);
  check(out.good(), "cli: cannot open " + out_path);
  for (const Triplet& ex : eval_set.items) {
    const Hypothesis h = translate(model, ex.frames, cfg);
    for (size_t i = 0; i < h.tokens.size(); ++i)
      out << (i ? " " : "") << h.tokens[i];
    out << "\n";
  }
  std::printf("decoded %zu sentences to %s\n", eval_set.items.size(),
              out_path.c_str());
  return 0;
}

int cmd_eval_bleu(const std::string& hyp_path, const std::string& ref_spec) {
  const std::vector<std::vector<int>> hyps = load_token_lines(hyp_path);
  // --ref takes DIR/split, e.g. out/data/test.
  const Corpus refs = load_corpus(ref_spec + ".bin");
  check(hyps.size() == refs.items.size(),
        "cli: hypothesis/reference count mismatch");
  std::vector<std::vector<TokenSeq>> ref_sets;
  for (const Triplet& ex : refs.items) ref_sets.push_back({ex.translation});
  const BleuBreakdown b = corpus_bleu_detail(hyps, ref_sets);
  std::printf("BLEU = %.2f (", b.score);
  for (size_t n = 0; n < b.precisions.size(); ++n)
    std::printf("%s%.1f", n ? "/" : "", 100.0 * b.precisions[n]);
  std::printf(", BP = %.3f, hyp_len = %lld, ref_len = %lld)\n",
              b.brevity_penalty, static_cast<long long>(b.hyp_len),
              static_cast<long long>(b.ref_len));
  return 0;
}

int cmd_bench(const std::string& ckpt, const std::string& data_dir,
              const std::string& matrix_path, const std::string& out_path,
              int runs) {
  ExperimentMatrix matrix = parse_matrix(matrix_path);
  if (!data_dir.empty()) matrix.data_dir = data_dir;
  if (runs > 0) matrix.runs = runs;
  if (!ckpt.empty())
    for (MatrixCell& cell : matrix.cells)
      if (cell.ckpt.empty()) cell.ckpt = ckpt;
  const std::vector<BenchResult> rows = run_experiment_matrix(matrix);

  const std::string table = format_bench_table(rows);
  std::fputs(table.c_str(), stdout);
  std::ofstream out(out_path);
  check(out.good(), "cli: cannot open " + out_path);
  out << table << "\n"
      << format_bench_records(rows) << "\n"
      << format_tradeoff_series(rows);
  std::printf("wrote %zu rows to %s\n", rows.size(), out_path.c_str());
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"Orthros: non-autoregressive end-to-end speech translation"};
  app.require_subcommand(1);

  // gen-data
  std::string spec_path, out_dir;
  int n_train = 1000, n_dev = 100, n_test = 100;
  int64_t seed = 0;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("--spec", spec_path, "task spec file")->required();
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--train", n_train, "training triplets");
  gen->add_option("--dev", n_dev, "dev triplets");
  gen->add_option("--test", n_test, "test triplets");
  auto* gen_seed = gen->add_option("--seed", seed, "generator seed");

  // train
  std::string task_name, data_dir, config_path, init_encoder, init_ar_decoder;
  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--task", task_name, "asr|mt|st-ar|st-orthros|st-ctc")
      ->required();
  tr->add_option("--data", data_dir, "corpus directory")->required();
  tr->add_option("--config", config_path, "run config file")->required();
  tr->add_option("--out", out_dir, "output directory")->required();
  tr->add_option("--init-encoder", init_encoder, "encoder donor checkpoint");
  tr->add_option("--init-ar-decoder", init_ar_decoder,
                 "AR decoder donor checkpoint");
  auto* tr_seed = tr->add_option("--seed", seed, "training seed");

  // distill
  std::string teacher_path;
  int beam = 4;
  auto* di = app.add_subcommand("distill", "sequence-level distillation");
  di->add_option("--teacher", teacher_path, "MT teacher checkpoint")
      ->required();
  di->add_option("--data", data_dir, "corpus directory")->required();
  di->add_option("--out", out_dir, "output directory")->required();
  di->add_option("--beam", beam, "teacher beam width");

  // average
  std::vector<std::string> avg_inputs;
  std::string avg_out;
  auto* av = app.add_subcommand("average", "average checkpoints");
  av->add_option("--inputs", avg_inputs, "input checkpoints")->required();
  av->add_option("--out", avg_out, "output checkpoint")->required();

  // decode
  std::string ckpt, split = "test", out_file;
  DecodeConfig dc;
  auto* de = app.add_subcommand("decode", "translate a corpus split");
  de->add_option("--ckpt", ckpt, "model checkpoint")->required();
  de->add_option("--data", data_dir, "corpus directory")->required();
  de->add_option("--split", split, "dev|test")
      ->check(CLI::IsMember({"dev", "test"}));
  de->add_option("--mode", dc.mode, "ar|nar|ctc")
      ->check(CLI::IsMember({"ar", "nar", "ctc"}));
  de->add_option("--iterations", dc.iterations, "refinement passes T");
  de->add_option("--length-beam", dc.length_beam, "length candidates l");
  de->add_option("--beam", dc.beam, "AR beam width b");
  de->add_flag("--ar-selection", dc.use_ar_selection,
               "rescore candidates with the AR decoder");
  de->add_option("--length-mode", dc.length_mode, "classifier|ctc-scale")
      ->check(CLI::IsMember({"classifier", "ctc-scale"}));
  de->add_option("--alpha", dc.alpha, "ctc-scale length ratio");
  de->add_option("--out", out_file, "hypothesis file")->required();

  // eval-bleu
  std::string hyp_path, ref_spec;
  auto* ev = app.add_subcommand("eval-bleu", "score hypotheses");
  ev->add_option("--hyp", hyp_path, "hypothesis file")->required();
  ev->add_option("--ref", ref_spec, "reference DIR/split")->required();

  // bench
  std::string matrix_path;
  int runs = 0;
  auto* be = app.add_subcommand("bench", "run the experiment matrix");
  be->add_option("--ckpt", ckpt, "fallback checkpoint for cells without one");
  be->add_option("--data", data_dir, "corpus directory override");
  be->add_option("--matrix", matrix_path, "experiment matrix file")
      ->required();
  be->add_option("--out", out_file, "report file")->required();
  be->add_option("--runs", runs, "timed runs per cell");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed())
    return cmd_gen_data(spec_path, out_dir, n_train, n_dev, n_test, seed,
                        gen_seed->count() > 0);
  if (tr->parsed())
    return cmd_train(task_name, data_dir, config_path, out_dir, init_encoder,
                     init_ar_decoder, seed, tr_seed->count() > 0);
  if (di->parsed()) return cmd_distill(teacher_path, data_dir, out_dir, beam);
  if (av->parsed()) return cmd_average(avg_inputs, avg_out);
  if (de->parsed()) return cmd_decode(ckpt, data_dir, split, dc, out_file);
  if (ev->parsed()) return cmd_eval_bleu(hyp_path, ref_spec);
  if (be->parsed())
    return cmd_bench(ckpt, data_dir, matrix_path, out_file, runs);
  return 1;
}

}  // namespace
}  // namespace orthros

int main(int argc, char** argv) {
  try {
    return orthros::run(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
