// SPDX-License-Identifier: Apache-2.0
#include "app/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hlik/chain.hpp"
#include "hlik/datagen.hpp"
#include "hlik/errors.hpp"
#include "hlik/fista/io.hpp"
#include "hlik/fista/train.hpp"
#include "hlik/metrics.hpp"
#include "hlik/parallel.hpp"
#include "hlik/pipeline.hpp"

namespace hlik::app {
namespace fs = std::filesystem;

namespace {

void make_out_dir(const std::string& out) {
  if (out.empty()) throw UsageError("--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create output directory '" + out + "'");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

Dataset load_dataset(const std::string& data) {
  if (data.empty()) throw UsageError("--data is required");
  return import_csv(dataset_path(data));
}

KinematicChain load_chain_arg(const std::string& chain) {
  if (chain.empty()) throw UsageError("--chain is required");
  return load_chain(chain);
}

StreamOptions stream_options(std::optional<double> lambda_fixed, bool raw_elbow_target) {
  StreamOptions o;
  if (lambda_fixed) {
    if (!(*lambda_fixed > 0.0) || !std::isfinite(*lambda_fixed)) {
      throw ValidationError("--lambda-fixed must be a positive number");
    }
    for (SolverConfig* c : {&o.first_step, &o.warm}) {
      c->damping = DampingMode::Fixed;
      c->lambda = *lambda_fixed;
    }
  }
  o.project_elbow = !raw_elbow_target;
  return o;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(v.size()));
  return r;
}

}  // namespace

fs::path dataset_path(const std::string& data) {
  const fs::path p(data);
  return fs::is_directory(p) ? p / "dataset.csv" : p;
}

void run_gen(const GenArgs& a, RunManifest& manifest, std::ostream& log) {
  if (a.n_traj < 1) throw ValidationError("--n-traj must be at least 1");
  GenerateOptions g;
  g.seed = a.seed;
  g.n_traj = a.n_traj;
  g.duration = a.duration;
  g.dt = a.dt;
  g.threads = resolve_threads();
  make_out_dir(a.out);
  const Dataset data = generate(g);

  const fs::path csv = fs::path(a.out) / "dataset.csv";
  export_csv(csv, data);

  size_t rows = 0;
  for (const Trajectory& t : data) rows += t.frames.size();
  manifest.seeds["seed"] = a.seed;
  manifest.outputs["dataset"] = csv.string();
  manifest.result = {{"trajectories", data.size()}, {"rows", rows}};
  log << "gen: " << data.size() << " trajectories, " << rows << " rows -> " << csv.string() << '\n';
}

void run_train(const TrainArgs& a, RunManifest& manifest, std::ostream& log) {
  const fista::Architecture arch = fista::parse_architecture(a.arch);
  fista::ModelConfig config =
      arch == fista::Architecture::Mlp ? fista::ModelConfig::mlp_baseline(a.history) : fista::ModelConfig{};
  config.history = a.history;
  config.ablate = fista::parse_ablation(a.ablate);
  if (arch == fista::Architecture::Mlp && config.ablate != fista::Ablation::None) {
    throw ValidationError("--ablate applies to the fista architecture only");
  }
  config.validate();

  fista::TrainOptions o;
  o.lr = a.lr;
  if (a.lr_schedule != "cosine" && a.lr_schedule != "constant") {
    throw ValidationError("unknown --lr-schedule '" + a.lr_schedule + "' (expected cosine or constant)");
  }
  o.cosine_decay = a.lr_schedule == "cosine";
  o.momentum = a.momentum;
  o.batch = a.batch;
  o.epochs = a.epochs;
  o.seed = a.seed;
  o.val_fraction = a.val_fraction;
  o.window_stride = a.window_stride;
  o.history_jitter = a.history_jitter;
  o.history_jitter_prob = a.history_jitter_prob;
  if (a.epochs <= 0) throw ValidationError("--epochs must be positive (nothing to checkpoint)");

  if (a.data.empty()) throw UsageError("--data is required");
  const fs::path data_path = dataset_path(a.data);
  const Dataset data = import_csv(data_path);
  make_out_dir(a.out);

  const fista::TrainResult r = fista::train(config, data, o, [&](const fista::EpochStats& e) {
    log << "epoch " << e.epoch << " train " << sci(e.train_mse) << " val " << sci(e.val_mse) << '\n';
  });

  const fs::path model = fs::path(a.out) / "model.fsta";
  const fs::path curve = fs::path(a.out) / "learning_curve.csv";
  fista::save_model(model, r.best);
  fista::write_learning_curve(curve, r.report);

  manifest.seeds["seed"] = a.seed;
  manifest.inputs["data"] = data_path.string();
  manifest.outputs["model"] = model.string();
  manifest.outputs["learning_curve"] = curve.string();
  manifest.result = {{"best_epoch", r.report.best_epoch},
                     {"best_val_mse", r.report.best_val_mse},
                     {"train_windows", r.report.train_windows},
                     {"val_windows", r.report.val_windows},
                     {"architecture", std::string(fista::to_string(config.arch))},
                     {"ablation", std::string(fista::to_string(config.ablate))}};
  log << "train: best val MSE " << sci(r.report.best_val_mse) << " at epoch " << r.report.best_epoch << " -> "
      << model.string() << '\n';
}

void run_solve(const SolveArgs& a, RunManifest& manifest, std::ostream& log, std::ostream& warn) {
  const SolveMode mode = parse_solve_mode(a.mode);
  if (mode == SolveMode::Hlik && a.model.empty()) throw UsageError("hlik mode needs --model");
  if (mode == SolveMode::Baseline && !a.model.empty()) {
    warn << "warning: baseline mode ignores --model\n";
  }
  const KinematicChain chain = load_chain_arg(a.chain);
  const Dataset data = load_dataset(a.data);
  std::optional<fista::Model> model;
  if (mode == SolveMode::Hlik) model = fista::load_model(a.model);
  const StreamOptions options = stream_options(a.lambda_fixed, a.raw_elbow_target);
  make_out_dir(a.out);

  const ArmGeometry geometry = arm_geometry(chain);
  std::vector<TrajectorySolution> solutions;
  std::vector<TrajectoryErrors> errors;
  solutions.reserve(data.size());
  for (const Trajectory& t : data) {
    solutions.push_back(solve_trajectory(chain, t, mode, model ? &*model : nullptr, options));
    errors.push_back(evaluate_solution(chain, t, solutions.back(), geometry));
  }

  const fs::path sol_csv = fs::path(a.out) / "solutions.csv";
  const fs::path err_csv = fs::path(a.out) / "step_errors.csv";
  export_solutions_csv(sol_csv, solutions);
  {
    std::ofstream out(err_csv);
    if (!out) throw IoError("cannot write '" + err_csv.string() + "'");
    out << "traj_id,step";
    for (const char* n : MetricValues::names()) out << ',' << n;
    out << '\n';
    char buf[64];
    for (const TrajectoryErrors& e : errors) {
      for (size_t i = 0; i < e.steps.size(); ++i) {
        out << e.id << ',' << i;
        for (int k = 0; k < MetricValues::kCount; ++k) {
          std::snprintf(buf, sizeof buf, ",%.17g", e.steps[i][k]);
          out << buf;
        }
        out << '\n';
      }
    }
    if (!out) throw IoError("write to '" + err_csv.string() + "' failed");
  }

  size_t steps = 0, converged = 0;
  double ee_sq = 0.0;
  for (size_t k = 0; k < solutions.size(); ++k) {
    for (size_t i = 0; i < solutions[k].steps.size(); ++i) {
      ++steps;
      converged += solutions[k].steps[i].converged ? 1 : 0;
      ee_sq += errors[k].steps[i].ee_pos_err_sq;
    }
  }
  const double ee_mean = steps ? ee_sq / static_cast<double>(steps) : 0.0;
  manifest.inputs["chain"] = a.chain;
  manifest.inputs["data"] = dataset_path(a.data).string();
  if (mode == SolveMode::Hlik) manifest.inputs["model"] = a.model;
  manifest.outputs["solutions"] = sol_csv.string();
  manifest.outputs["step_errors"] = err_csv.string();
  manifest.result = {{"mode", std::string(to_string(mode))},
                     {"trajectories", solutions.size()},
                     {"steps", steps},
                     {"converged_steps", converged},
                     {"mean_ee_pos_err_sq", ee_mean}};
  log << "solve (" << to_string(mode) << "): " << solutions.size() << " trajectories, " << steps << " steps, "
      << converged << " converged, mean EE position error " << sci(std::sqrt(ee_mean)) << " m -> "
      << sol_csv.string() << '\n';
}

void run_evaluate(const EvaluateArgs& a, RunManifest& manifest, std::ostream& log) {
  if (a.ref_data.empty() || a.baseline_solutions.empty() || a.hlik_solutions.empty()) {
    throw UsageError("--ref-data, --baseline-solutions and --hlik-solutions are required");
  }
  const KinematicChain chain = load_chain_arg(a.chain);
  const Dataset ref = load_dataset(a.ref_data);
  auto solutions_path = [](const std::string& s) {
    return fs::is_directory(s) ? fs::path(s) / "solutions.csv" : fs::path(s);
  };
  const std::vector<TrajectorySolution> base = import_solutions_csv(solutions_path(a.baseline_solutions));
  const std::vector<TrajectorySolution> hl = import_solutions_csv(solutions_path(a.hlik_solutions));
  for (const auto* s : {&base, &hl}) {
    if (s->size() != ref.size()) {
      throw MismatchedStreams("reference has " + std::to_string(ref.size()) + " trajectories but a solution file has " +
                              std::to_string(s->size()));
    }
  }
  make_out_dir(a.out);

  const ArmGeometry geometry = arm_geometry(chain);
  std::vector<TrajectoryErrors> eb(ref.size()), eh(ref.size());
  parallel_for(ref.size(), resolve_threads(), [&](size_t i) {
    eb[i] = evaluate_solution(chain, ref[i], base[i], geometry);
    eh[i] = evaluate_solution(chain, ref[i], hl[i], geometry);
  });
  const MetricsReport report = aggregate(eb, eh, a.challenging_fraction);

  const fs::path json_path = fs::path(a.out) / "metrics.json";
  const fs::path csv_path = fs::path(a.out) / "metrics.csv";
  {
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot write '" + json_path.string() + "'");
    out << to_json(report).dump(2) << '\n';
    if (!out) throw IoError("write to '" + json_path.string() + "' failed");
  }
  write_metrics_csv(csv_path, report);

  manifest.inputs["ref_data"] = dataset_path(a.ref_data).string();
  manifest.inputs["baseline_solutions"] = solutions_path(a.baseline_solutions).string();
  manifest.inputs["hlik_solutions"] = solutions_path(a.hlik_solutions).string();
  manifest.inputs["chain"] = a.chain;
  manifest.outputs["metrics_json"] = json_path.string();
  manifest.outputs["metrics_csv"] = csv_path.string();
  manifest.result = to_json(report)["reduction_percent"];

  const auto& names = MetricValues::names();
  log << "evaluate: " << ref.size() << " trajectories, " << report.challenging_count << " challenging\n";
  log << "metric                 baseline        hlik            reduction%  challenging%\n";
  for (int k = 0; k < MetricValues::kCount; ++k) {
    char line[160];
    std::snprintf(line, sizeof line, "%-22s %-15.6e %-15.6e %10.2f  %12.2f\n", names[k],
                  report.baseline.full.mean[k], report.hlik.full.mean[k], report.reduction_full[k],
                  report.reduction_challenging[k]);
    log << line;
  }
}

void run_bench(const BenchArgs& a, RunManifest& manifest, std::ostream& log) {
  const SolveMode mode = parse_solve_mode(a.mode);
  if (mode == SolveMode::Hlik && a.model.empty()) throw UsageError("hlik mode needs --model");
  if (a.repeats < 1) throw ValidationError("--repeats must be at least 1");
  if (a.warmup < 0) throw ValidationError("--warmup must be non-negative");
  if (a.max_traj < 0) throw ValidationError("--max-traj must be non-negative");
  const KinematicChain chain = load_chain_arg(a.chain);
  Dataset data = load_dataset(a.data);
  if (a.max_traj > 0 && data.size() > static_cast<size_t>(a.max_traj)) data.resize(a.max_traj);
  std::optional<fista::Model> model;
  if (mode == SolveMode::Hlik) model = fista::load_model(a.model);

  // Per repeat: mean per-step time of every warm-started step (step 0 of
  // each trajectory, the cold start, is excluded).
  std::vector<double> pre, ik, sum, total;
  size_t steps = 0;
  for (int r = 0; r < a.warmup + a.repeats; ++r) {
    double sp = 0.0, si = 0.0, st = 0.0;
    size_t n = 0;
    for (const Trajectory& t : data) {
      const TrajectorySolution s = solve_trajectory(chain, t, mode, model ? &*model : nullptr);
      for (size_t i = 1; i < s.steps.size(); ++i) {
        sp += s.steps[i].preprocess_seconds;
        si += s.steps[i].ik_seconds;
        st += s.steps[i].total_seconds;
        ++n;
      }
    }
    if (n == 0) throw EmptyDataset("no warm-started steps to time");
    if (r < a.warmup) continue;
    const double k = 1e3 / static_cast<double>(n);
    pre.push_back(sp * k);
    ik.push_back(si * k);
    sum.push_back((sp + si) * k);
    total.push_back(st * k);
    steps = n;
  }

  const MeanStd p = mean_std(pre), i = mean_std(ik), s = mean_std(sum), t = mean_std(total);
  log << "bench (" << to_string(mode) << "): " << data.size() << " trajectories, " << steps
      << " warm-started steps per repeat, " << a.repeats << " repeats, " << a.warmup
      << " warm-up repeats excluded\n";
  log << "per-arm per-step time [ms], mean +- std over repeats\n";
  log << "  Preprocess   " << fixed(p.mean, 4) << " +- " << fixed(p.std, 4) << '\n';
  log << "  IK           " << fixed(i.mean, 4) << " +- " << fixed(i.std, 4) << '\n';
  log << "  Sum          " << fixed(s.mean, 4) << " +- " << fixed(s.std, 4) << '\n';
  log << "  Total        " << fixed(t.mean, 4) << " +- " << fixed(t.std, 4) << '\n';

  manifest.inputs["chain"] = a.chain;
  manifest.inputs["data"] = dataset_path(a.data).string();
  if (mode == SolveMode::Hlik) manifest.inputs["model"] = a.model;
  auto stat = [](const MeanStd& m) { return nlohmann::json{{"mean_ms", m.mean}, {"std_ms", m.std}}; };
  manifest.result = {{"mode", std::string(to_string(mode))},
                     {"trajectories", data.size()},
                     {"steps_per_repeat", steps},
                     {"repeats", a.repeats},
                     {"warmup_repeats", a.warmup},
                     {"preprocess", stat(p)},
                     {"ik", stat(i)},
                     {"stage_sum", stat(s)},
                     {"total", stat(t)}};
  if (!a.out.empty()) {
    make_out_dir(a.out);
    const fs::path json_path = fs::path(a.out) / "bench.json";
    std::ofstream out(json_path);
    if (!out) throw IoError("cannot write '" + json_path.string() + "'");
    out << manifest.result.dump(2) << '\n';
    if (!out) throw IoError("write to '" + json_path.string() + "' failed");
    manifest.outputs["bench"] = json_path.string();
  }
}

}  // namespace hlik::app
