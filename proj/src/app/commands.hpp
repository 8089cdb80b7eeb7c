// SPDX-License-Identifier: Apache-2.0
//
// The work behind each subcommand, independent of flag parsing. Each
// command writes its files and a manifest into `out` and prints a short
// summary to `log`.
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "app/manifest.hpp"

namespace hlik::app {

struct GenArgs {
  uint64_t seed = 0;
  int n_traj = 20;
  double duration = 5.0;
  double dt = 0.02;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string arch = "fista";
  int history = 5;
  std::string ablate = "none";
  uint64_t seed = 0;
  int epochs = 20;
  double lr = 0.1;
  std::string lr_schedule = "cosine";  // or "constant"
  double momentum = 0.9;
  int batch = 64;
  double val_fraction = 0.1;
  int window_stride = 1;
  double history_jitter = 0.0;
  double history_jitter_prob = 0.5;
  std::string out;
};

struct SolveArgs {
  std::string chain;
  std::string model;
  std::string data;
  std::string mode = "baseline";
  std::optional<double> lambda_fixed;
  bool raw_elbow_target = false;
  std::string out;
};

struct EvaluateArgs {
  std::string ref_data;
  std::string baseline_solutions;
  std::string hlik_solutions;
  std::string chain;
  double challenging_fraction = 0.2;
  std::string out;
};

struct BenchArgs {
  std::string chain;
  std::string model;
  std::string data;
  std::string mode = "hlik";
  int repeats = 5;
  int warmup = 1;
  int max_traj = 10;  // 0 = all
  std::string out;    // optional
};

/// Files read from a data argument: a directory holding dataset.csv, or a
/// CSV file.
std::filesystem::path dataset_path(const std::string& data);

/// Each fills the command-specific parts of `manifest` (seeds, inputs,
/// outputs, result); the caller adds config and timestamps and writes it.
void run_gen(const GenArgs& a, RunManifest& manifest, std::ostream& log);
void run_train(const TrainArgs& a, RunManifest& manifest, std::ostream& log);
void run_solve(const SolveArgs& a, RunManifest& manifest, std::ostream& log, std::ostream& warn);
void run_evaluate(const EvaluateArgs& a, RunManifest& manifest, std::ostream& log);
void run_bench(const BenchArgs& a, RunManifest& manifest, std::ostream& log);

}  // namespace hlik::app
