// Copyright 2026 The tfse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// tfse command-line tool. Links only the C interface.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fnmatch.h>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tfse/tfse.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

// Input/config problems are the user's to fix; numeric blowups, lock
// contention and internal faults are runtime failures.
int exit_code_for(tfse_status s) {
  switch (s) {
    case TFSE_OK: return kExitOk;
    case TFSE_ERR_NUMERIC:
    case TFSE_ERR_BUSY:
    case TFSE_ERR_INTERNAL: return kExitRuntime;
    default: return kExitUsage;
  }
}

int report(tfse_status s, const std::string& what) {
  if (s == TFSE_OK) return kExitOk;
  std::cerr << "tfse " << what << ": " << tfse_status_name(s) << ": " << tfse_last_error() << "\n";
  return exit_code_for(s);
}

struct ModelFree {
  void operator()(tfse_model* m) const { tfse_model_free(m); }
};
using ModelPtr = std::unique_ptr<tfse_model, ModelFree>;

struct StringFree {
  void operator()(char* s) const { tfse_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringFree>;

std::string with_commas(std::uint64_t n) {
  std::string s = std::to_string(n);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

std::string format_params(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fM", static_cast<double>(n) / 1e6);
  return std::string(buf) + " (" + with_commas(n) + ")";
}

std::string join_overrides(const std::vector<std::string>& sets) {
  std::string out;
  for (const auto& s : sets) out += s + "\n";
  return out;
}

bool has_glob(const std::string& s) { return s.find_first_of("*?[") != std::string::npos; }

// Expands a file, a directory (all .wav inside) or a glob in the file name.
std::vector<fs::path> expand_inputs(const std::string& spec) {
  std::vector<fs::path> out;
  const fs::path p(spec);
  if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  } else if (has_glob(p.filename().string())) {
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    const std::string pat = p.filename().string();
    if (fs::is_directory(dir))
      for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && fnmatch(pat.c_str(), e.path().filename().c_str(), 0) == 0)
          out.push_back(e.path());
  } else {
    out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---- train ----

struct TrainArgs {
  std::string config, out;
  std::vector<std::string> sets;
  bool resume = false, quiet = false;
};

void print_step(std::uint64_t step, double lr, double loss, void* user) {
  const auto every = *static_cast<std::uint64_t*>(user);
  if (every && step % every == 0) std::printf("step %llu lr %.4e loss %.6f\n", static_cast<unsigned long long>(step), lr, loss);
}

int cmd_train(const TrainArgs& a) {
  std::uint64_t every = a.quiet ? 0 : 10;
  const std::string ov = join_overrides(a.sets);
  const auto s = tfse_train(a.config.c_str(), ov.c_str(), a.out.c_str(), a.resume ? 1 : 0, print_step, &every);
  if (s == TFSE_OK) std::printf("checkpoint written to %s\n", (fs::path(a.out) / "checkpoint").c_str());
  return report(s, "train");
}

// ---- enhance ----

struct EnhanceArgs {
  std::string checkpoint, in, out;
};

int cmd_enhance(const EnhanceArgs& a) {
  tfse_model* raw = nullptr;
  if (auto s = tfse_model_load(a.checkpoint.c_str(), &raw); s != TFSE_OK) return report(s, "enhance");
  ModelPtr model(raw);
  const bool batch = fs::is_directory(a.in) || has_glob(fs::path(a.in).filename().string());
  if (!batch) return report(tfse_enhance_file(model.get(), a.in.c_str(), a.out.c_str()), "enhance");

  const auto inputs = expand_inputs(a.in);
  if (inputs.empty()) {
    std::cerr << "tfse enhance: no .wav files match '" << a.in << "'\n";
    return kExitUsage;
  }
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec || !fs::is_directory(a.out)) {
    std::cerr << "tfse enhance: cannot create output directory '" << a.out << "'\n";
    return kExitUsage;
  }
  for (const auto& in : inputs) {
    const fs::path out = fs::path(a.out) / in.filename();
    if (int rc = report(tfse_enhance_file(model.get(), in.c_str(), out.c_str()), "enhance " + in.string()))
      return rc;
    std::printf("%s -> %s\n", in.c_str(), out.c_str());
  }
  return kExitOk;
}

// ---- params ----

int cmd_params(const std::vector<std::string>& configs) {
  for (const auto& c : configs) {
    tfse_model* raw = nullptr;
    if (auto s = tfse_model_from_config(c.c_str(), &raw); s != TFSE_OK) return report(s, "params " + c);
    ModelPtr model(raw);
    std::uint64_t n = 0;
    char name[64];
    if (auto s = tfse_model_param_count(model.get(), &n); s != TFSE_OK) return report(s, "params");
    if (auto s = tfse_model_name(model.get(), name, sizeof name); s != TFSE_OK) return report(s, "params");
    if (configs.size() == 1)
      std::printf("%s\n", format_params(n).c_str());
    else
      std::printf("%-16s %s\n", name, format_params(n).c_str());
  }
  return kExitOk;
}

// ---- bench ----

struct BenchArgs {
  std::vector<std::string> configs;
  std::string checkpoint, lengths, lock;
  int batch = 0, runs = 0, warmup = -1, train_steps = 0;
  bool train_step = false, assert_trends = false;
  double attention_ratio = 1.5;
};

struct BenchRow {
  std::string name;
  tfse_bench_result r;
};

bool starts_with(const std::string& s, const char* p) { return s.rfind(p, 0) == 0; }

bool is_attention_name(const std::string& n) {
  return starts_with(n, "Transformer") || starts_with(n, "Conformer");
}

// Directional checks across the benchmarked models: attention RTF grows
// faster with length than BiMamba's, and BixLSTM steps cost more than
// BiMamba steps.
bool check_trends(const std::vector<BenchRow>& rows, bool train_step, double ratio) {
  bool ok = true, any = false;
  for (const auto& m : rows) {
    if (!starts_with(m.name, "BiMamba")) continue;
    for (const auto& o : rows) {
      if (is_attention_name(o.name) && m.r.rtf_growth > 0) {
        const double q = o.r.rtf_growth / m.r.rtf_growth;
        const bool pass = q >= ratio;
        std::printf("trend %s: rtf growth %s %.3f / %s %.3f = %.3f (need >= %.2f)\n", pass ? "PASS" : "FAIL",
                    o.name.c_str(), o.r.rtf_growth, m.name.c_str(), m.r.rtf_growth, q, ratio);
        ok = ok && pass;
        any = true;
      }
      if (train_step && (starts_with(o.name, "C-BixLSTM") || starts_with(o.name, "P-BixLSTM"))) {
        const bool pass = o.r.sec_per_step > m.r.sec_per_step;
        std::printf("trend %s: sec/step %s %.4f > %s %.4f\n", pass ? "PASS" : "FAIL", o.name.c_str(),
                    o.r.sec_per_step, m.name.c_str(), m.r.sec_per_step);
        ok = ok && pass;
        any = true;
      }
    }
  }
  if (!any) {
    std::printf("trend FAIL: need a BiMamba model plus an attention or BixLSTM model to compare\n");
    return false;
  }
  return ok;
}

int cmd_bench(const BenchArgs& a) {
  std::string ov;
  if (!a.lengths.empty()) ov += "bench_lengths=" + a.lengths + "\n";
  if (a.batch > 0) ov += "bench_batch=" + std::to_string(a.batch) + "\n";
  if (a.runs > 0) ov += "bench_runs=" + std::to_string(a.runs) + "\n";
  if (a.warmup >= 0) ov += "bench_warmup=" + std::to_string(a.warmup) + "\n";
  if (a.train_steps > 0) ov += "bench_train_steps=" + std::to_string(a.train_steps) + "\n";
  const char* lock = a.lock.empty() ? nullptr : a.lock.c_str();
  const char* ckpt = a.checkpoint.empty() ? nullptr : a.checkpoint.c_str();

  std::vector<std::string> configs = a.configs;
  if (configs.empty()) configs.push_back("");
  std::vector<BenchRow> rows;
  bool header = true;
  for (const auto& c : configs) {
    tfse_bench_result r{};
    char* csv = nullptr;
    const auto s = tfse_bench(c.empty() ? nullptr : c.c_str(), ckpt, ov.c_str(), a.train_step ? 1 : 0, lock, &r, &csv);
    if (s != TFSE_OK) return report(s, "bench " + c);
    OwnedString owned(csv);
    std::string text(csv);
    if (!header) text = text.substr(text.find('\n') + 1);
    header = false;
    std::fputs(text.c_str(), stdout);
    std::fflush(stdout);
    rows.push_back({r.model, r});
  }
  if (a.assert_trends && !check_trends(rows, a.train_step, a.attention_ratio)) return kExitVerify;
  return kExitOk;
}

// ---- verify ----

void print_check(const char* name, int passed, double value, double threshold, const char* detail, void*) {
  std::printf("%s  %-40s value=%.3e bound=%.3e  %s\n", passed ? "PASS" : "FAIL", name, value, threshold, detail);
  std::fflush(stdout);
}

int cmd_verify(bool inject_fault) {
  int all = 0;
  if (auto s = tfse_verify(inject_fault ? 1 : 0, print_check, nullptr, &all); s != TFSE_OK)
    return report(s, "verify");
  std::printf("%s\n", all ? "all checks passed" : "verification FAILED");
  return all ? kExitOk : kExitVerify;
}

// ---- score ----

struct ScoreArgs {
  std::string checkpoint, manifest, scorer, csv_out;
  std::uint64_t seed = 7;
  bool oracle = false;
};

int cmd_score(const ScoreArgs& a) {
  if (!a.oracle && a.checkpoint.empty()) {
    std::cerr << "tfse score: --checkpoint or --oracle is required\n";
    return kExitUsage;
  }
  char* csv = nullptr;
  char* table = nullptr;
  const auto s = tfse_score(a.checkpoint.empty() ? nullptr : a.checkpoint.c_str(), a.manifest.c_str(), a.seed,
                            a.scorer.empty() ? nullptr : a.scorer.c_str(), a.oracle ? 1 : 0, &csv, &table);
  if (s != TFSE_OK) return report(s, "score");
  OwnedString c(csv), t(table);
  std::fputs(table, stdout);
  if (!a.csv_out.empty()) {
    std::FILE* f = std::fopen(a.csv_out.c_str(), "w");
    if (!f) {
      std::cerr << "tfse score: cannot write '" << a.csv_out << "'\n";
      return kExitUsage;
    }
    std::fputs(csv, f);
    std::fclose(f);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tfse: time-frequency speech enhancement with attention, Mamba and xLSTM backbones"};
  app.set_version_flag("--version", std::string(tfse_version()));
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("--config", ta.config, "run config file")->required();
  train->add_option("--out", ta.out, "output directory")->required();
  train->add_option("--set", ta.sets, "override a config key (key=value), repeatable");
  train->add_flag("--resume", ta.resume, "continue from <out>/checkpoint");
  train->add_flag("--quiet", ta.quiet, "no per-step output");

  EnhanceArgs ea;
  auto* enh = app.add_subcommand("enhance", "enhance a WAV file, a directory or a glob");
  enh->add_option("--checkpoint", ea.checkpoint, "checkpoint directory")->required();
  enh->add_option("--in", ea.in, "input wav, directory or glob")->required();
  enh->add_option("--out", ea.out, "output wav (or directory for batch input)")->required();

  std::vector<std::string> pconfigs;
  auto* params = app.add_subcommand("params", "print the parameter count of a config");
  params->add_option("--config", pconfigs, "config file(s)")->required();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "measure RTF per input length (and optionally sec/step)");
  bench->add_option("--config", ba.configs, "config file(s)");
  bench->add_option("--checkpoint", ba.checkpoint, "checkpoint directory supplying the model");
  bench->add_option("--lengths", ba.lengths, "comma-separated lengths in seconds (default 10,20,40)");
  bench->add_option("--batch", ba.batch, "utterances per forward pass");
  bench->add_option("--runs", ba.runs, "timed runs per length");
  bench->add_option("--warmup", ba.warmup, "untimed warm-up runs");
  bench->add_flag("--train-step", ba.train_step, "also time training steps");
  bench->add_option("--train-steps", ba.train_steps, "timed training steps");
  bench->add_flag("--assert-trends", ba.assert_trends, "check directional trends across the benchmarked models");
  bench->add_option("--attention-ratio", ba.attention_ratio, "required attention/BiMamba RTF-growth ratio");
  bench->add_option("--lock", ba.lock, "lock file (default $TFSE_BENCH_LOCK or the temp dir)");

  bool inject = false;
  auto* verify = app.add_subcommand("verify", "run the self-verification suite");
  verify->add_flag("--inject-fault", inject, "swap in a wrong backward rule (negative control)");

  ScoreArgs sa;
  auto* score = app.add_subcommand("score", "ESTOI and SNR per input SNR on an eval manifest");
  score->add_option("--checkpoint", sa.checkpoint, "checkpoint directory");
  score->add_option("--manifest", sa.manifest, "eval manifest")->required();
  score->add_flag("--oracle", sa.oracle, "score the oracle phase-sensitive mask instead");
  score->add_option("--scorer", sa.scorer, "external scorer command: <cmd> <ref.wav> <deg.wav>");
  score->add_option("--seed", sa.seed, "noise-segment seed");
  score->add_option("--csv", sa.csv_out, "also write the table as CSV");

  std::string sdir;
  std::size_t n_speech = 16, n_noise = 8, n_eval = 12;
  double secs = 4.0;
  std::uint64_t sseed = 1;
  auto* synth = app.add_subcommand("synth-corpus", "write a synthetic speech/noise corpus with manifests");
  synth->add_option("--out", sdir, "output directory")->required();
  synth->add_option("--speech", n_speech, "speech clips");
  synth->add_option("--noise", n_noise, "noise clips");
  synth->add_option("--eval", n_eval, "eval clean clips");
  synth->add_option("--seconds", secs, "clip length");
  synth->add_option("--seed", sseed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*train) return cmd_train(ta);
  if (*enh) return cmd_enhance(ea);
  if (*params) return cmd_params(pconfigs);
  if (*bench) {
    if (ba.configs.empty() && ba.checkpoint.empty()) {
      std::cerr << "tfse bench: --config or --checkpoint is required\n";
      return kExitUsage;
    }
    return cmd_bench(ba);
  }
  if (*verify) return cmd_verify(inject);
  if (*score) return cmd_score(sa);
  if (*synth) return report(tfse_synth_corpus(sdir.c_str(), n_speech, n_noise, n_eval, secs, sseed), "synth-corpus");
  return kExitUsage;
}
