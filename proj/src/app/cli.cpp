// SPDX-License-Identifier: Apache-2.0
#include "app/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>

#include "app/commands.hpp"
#include "hlik/errors.hpp"

namespace hlik::app {
namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Moves the contents of `--config FILE` in front of the explicit flags, so
/// that with last-value-wins parsing explicit flags override the file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  if (args.empty()) return args;
  for (size_t i = 1; i < args.size(); ++i) {
    std::string path;
    size_t erase = 0;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      path = args[i + 1];
      erase = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      erase = 1;
    } else {
      continue;
    }
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + erase));
    const std::vector<std::string> extra = config_file_args(path);
    args.insert(args.begin() + 1, extra.begin(), extra.end());
    return args;
  }
  return args;
}

/// Resolved option values of a parsed subcommand, keyed by long name.
std::map<std::string, std::string> resolved_config(const CLI::App& sub) {
  std::map<std::string, std::string> config;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 && opt->as<bool>() ? "true" : "false";
    } else {
      value = opt->count() > 0 ? opt->results().back() : opt->get_default_str();
    }
    config[name] = value;
  }
  return config;
}

int rerun(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Replays the command recorded in a manifest", "hlik rerun");
  std::string manifest_path, out_dir;
  app.add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  app.add_option("--out", out_dir, "output directory (default: the recorded one)");
  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  app.parse(rev);

  const RunManifest m = read_manifest(manifest_path);
  std::vector<std::string> replay = {m.command};
  for (const auto& [key, value] : m.config) {
    std::string v = key == "out" && !out_dir.empty() ? out_dir : value;
    if (v.empty()) continue;
    replay.push_back("--" + key + "=" + v);
  }
  return run_cli(replay, out, err);
}

}  // namespace

std::vector<std::string> config_file_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(row) + ": expected key=value");
    }
    std::string key = trim(s.substr(0, eq));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty() || key.find_first_of(" \t") != std::string::npos || key == "config") {
      throw ParseError(path + ":" + std::to_string(row) + ": bad key '" + key + "'");
    }
    out.push_back("--" + key + "=" + trim(s.substr(eq + 1)));
  }
  return out;
}

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app("Human-like inverse kinematics: data generation, elbow-model training, IK and evaluation", "hlik");
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenArgs gen;
  CLI::App* g = app.add_subcommand("gen", "Generate a synthetic reference-trajectory dataset");
  g->add_option("--seed", gen.seed, "dataset seed");
  g->add_option("--n-traj", gen.n_traj, "number of trajectories");
  g->add_option("--duration", gen.duration, "seconds per trajectory");
  g->add_option("--dt", gen.dt, "sample period in seconds");
  g->add_option("--out", gen.out, "output directory")->required();

  TrainArgs train;
  CLI::App* t = app.add_subcommand("train", "Train an elbow-pose model; keeps the best validation epoch");
  t->add_option("--data", train.data, "dataset directory or CSV")->required();
  t->add_option("--arch", train.arch, "fista or mlp");
  t->add_option("--T", train.history, "history length in frames");
  t->add_option("--ablate", train.ablate, "none, no_spatial, no_temporal or no_film");
  t->add_option("--seed", train.seed, "initialization, split and shuffling seed");
  t->add_option("--epochs", train.epochs, "training epochs");
  t->add_option("--lr", train.lr, "SGD learning rate");
  t->add_option("--lr-schedule", train.lr_schedule, "cosine (decay to 0 over the run) or constant");
  t->add_option("--momentum", train.momentum, "SGD momentum");
  t->add_option("--batch", train.batch, "mini-batch size");
  t->add_option("--val-fraction", train.val_fraction, "share of trajectories held out for validation");
  t->add_option("--window-stride", train.window_stride, "use every k-th training window per epoch");
  t->add_option("--history-jitter", train.history_jitter, "std of the swivel jitter of training histories (rad)");
  t->add_option("--history-jitter-prob", train.history_jitter_prob, "share of training windows jittered");
  t->add_option("--out", train.out, "output directory")->required();

  SolveArgs solve;
  CLI::App* s = app.add_subcommand("solve", "Solve reference trajectories in streaming order");
  s->add_option("--chain", solve.chain, "chain description file")->required();
  s->add_option("--model", solve.model, "elbow model (hlik mode)");
  s->add_option("--data", solve.data, "dataset directory or CSV")->required();
  s->add_option("--mode", solve.mode, "baseline or hlik");
  s->add_option("--lambda-fixed", solve.lambda_fixed, "constant LM damping instead of the adaptive schedule");
  s->add_flag("--raw-elbow-target", solve.raw_elbow_target,
              "use the network's elbow pose as is, without projecting it onto the reachable elbow circle");
  s->add_option("--out", solve.out, "output directory")->required();

  EvaluateArgs eval;
  CLI::App* e = app.add_subcommand("evaluate", "Compare baseline and HL-IK solutions against the reference");
  e->add_option("--ref-data", eval.ref_data, "reference dataset directory or CSV")->required();
  e->add_option("--baseline-solutions", eval.baseline_solutions, "baseline solve directory or CSV")->required();
  e->add_option("--hlik-solutions", eval.hlik_solutions, "HL-IK solve directory or CSV")->required();
  e->add_option("--chain", eval.chain, "chain description file")->required();
  e->add_option("--challenging-fraction", eval.challenging_fraction,
                "share of trajectories, by baseline keypoint error, in the challenging subset");
  e->add_option("--out", eval.out, "output directory")->required();

  BenchArgs bench;
  CLI::App* b = app.add_subcommand("bench", "Time the per-step Preprocess and IK stages");
  b->add_option("--chain", bench.chain, "chain description file")->required();
  b->add_option("--model", bench.model, "elbow model (hlik mode)");
  b->add_option("--data", bench.data, "dataset directory or CSV")->required();
  b->add_option("--mode", bench.mode, "baseline or hlik");
  b->add_option("--repeats", bench.repeats, "timed passes over the data");
  b->add_option("--warmup", bench.warmup, "untimed passes before the timed ones");
  b->add_option("--max-traj", bench.max_traj, "trajectories per pass (0 = all)");
  b->add_option("--out", bench.out, "optional output directory for bench.json and a manifest");

  for (CLI::App* sub : {g, t, s, e, b}) {
    sub->add_option_function<std::string>("--config", [](const std::string&) {}, "key=value file, under explicit flags");
  }

  try {
    if (!args.empty() && args[0] == "rerun") return rerun(args, out, err);
    args = expand_config(std::move(args));
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);

    CLI::App* sub = app.get_subcommands().front();
    RunManifest manifest;
    manifest.command = sub->get_name();
    manifest.config = resolved_config(*sub);
    manifest.config.erase("config");
    manifest.tool_version = kToolVersion;
    const auto wall0 = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    manifest.started_utc = utc_timestamp(wall0);

    std::string out_dir;
    if (sub == g) {
      run_gen(gen, manifest, out);
      out_dir = gen.out;
    } else if (sub == t) {
      run_train(train, manifest, out);
      out_dir = train.out;
    } else if (sub == s) {
      run_solve(solve, manifest, out, err);
      out_dir = solve.out;
    } else if (sub == e) {
      run_evaluate(eval, manifest, out);
      out_dir = eval.out;
    } else {
      run_bench(bench, manifest, out);
      out_dir = bench.out;
    }
    manifest.finished_utc = utc_timestamp(std::chrono::system_clock::now());
    manifest.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out_dir.empty()) write_manifest(out_dir, manifest);
    return 0;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error UsageError: " << one_line(ex.what()) << '\n';
    return 2;
  } catch (const UsageError& ex) {
    err << "error UsageError: " << one_line(ex.what()) << '\n';
    return 2;
  } catch (const Error& ex) {
    err << "error " << ex.code() << ": " << one_line(ex.what()) << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& ex) {
    err << "error IoError: " << one_line(ex.what()) << '\n';
    return 1;
  } catch (const std::exception& ex) {
    err << "error InternalError: " << one_line(ex.what()) << '\n';
    return 1;
  }
}

}  // namespace hlik::app
