// citl: command-line front end.
//
//   citl train-source --data src.csv --out src_model.json
//   citl transfer     --source-model src_model.json --data tgt.csv --out tgt_model.json
//   citl predict      --model tgt_model.json --data x.csv [--out pred.csv]
//   citl evaluate     --source src.csv --target tgt.csv --seeds 5
//   citl synth        --seed 1 --shift 0.5 --out-dir tasks/
//   citl ablate       [--source src.csv --target tgt.csv] --seeds 20
//
// Exit codes: 0 ok, 2 input/IO/config error, 3 no admissible candidate,
// 4 dimension mismatch between a model and its data.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "citl/citl.hpp"
#include "citl/config.hpp"
#include "citl/csv.hpp"
#include "citl/eval.hpp"
#include "citl/rscn.hpp"

namespace {

using namespace citl;

constexpr int kExitInput = 2;
constexpr int kExitNoCandidate = 3;
constexpr int kExitDimension = 4;

struct Common {
  std::string config_path;
  std::vector<std::string> sets;  // key=value overrides
  bool deterministic = false;
  KeyValues flags;                // typed flags, appended after --set
};

// Typed override flag that lands in Common::flags under `key`.
void add_override(CLI::App* app, Common& c, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&c, key](const std::string& v) { c.flags.emplace_back(key, v); }, help);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "flat key=value config file");
  app->add_option("--set", c.sets, "config override key=value (repeatable)");
  add_override(app, c, "--seed", "seed", "master seed");
}

void add_growth_flags(CLI::App* app, Common& c, const std::string& eps_key = "eps") {
  add_override(app, c, "--eps", eps_key, "stop threshold on the training residual norm");
  add_override(app, c, "--L-max", "L_max", "maximum hidden nodes");
  add_override(app, c, "--T-max", "T_max", "candidates per weight range");
  add_override(app, c, "--activation", "activation", "sigmoid or tanh");
}

void add_transfer_flags(CLI::App* app, Common& c) {
  add_override(app, c, "--c-t", "C_T", "labeled target penalty");
  add_override(app, c, "--c-tu", "C_Tu", "pseudo-label agreement penalty");
  add_override(app, c, "--eta", "eta", "manifold smoothness weight");
  add_override(app, c, "--k-nn", "k_nn", "graph neighbours");
  add_override(app, c, "--mode", "mode", "global or incremental");
  add_override(app, c, "--labeled", "labeled", "labeled target cycles");
  add_override(app, c, "--semisup", "semisup", "unlabeled cycles used for training");
}

Settings resolve(const Common& c) {
  Settings s;
  if (!c.config_path.empty()) apply_settings(s, read_config_file(c.config_path));
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
    apply_setting(s, kv.substr(0, eq), kv.substr(eq + 1));
  }
  apply_settings(s, c.flags);
  validate(s);
  return s;
}

// Input cycles from the canonical CSV, or from a raw trace pair resampled to
// the configured dimension.
struct DataSource {
  std::string csv;
  std::string traces;
  std::string capacity;
};

void add_data(CLI::App* app, DataSource& d, const std::string& flag, const std::string& what) {
  app->add_option(flag, d.csv, what + " (canonical cycle CSV)");
  app->add_option(flag + "-traces", d.traces, what + " raw trace CSV (cycle_id,time_s,voltage_V)");
  app->add_option(flag + "-capacity", d.capacity, what + " capacity CSV (cycle_id,discharge_capacity_Ah)");
}

CycleMatrix load(const DataSource& d, std::size_t dim, const std::string& what) {
  if (!d.csv.empty()) return csv::read_cycles(d.csv);
  if (!d.traces.empty() && !d.capacity.empty()) return ingest_traces(csv::read_raw_traces(d.traces, d.capacity), dim);
  throw Error(ErrorCode::InvalidConfig, what + ": give a cycle CSV or a trace/capacity pair");
}

std::string sibling(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

void emit_warnings(const GrowthLog& log) {
  for (const auto& w : log.warnings) std::cerr << "warning: " << w << '\n';
}

void write_reports(const std::string& path, const std::vector<EvalReport>& reports,
                   const nlohmann::ordered_json& config, bool table) {
  if (path.empty() || path == "-") {
    write_report(std::cout, reports, config);
  } else {
    write_report(path, reports, config);
    if (table) print_table(std::cout, reports);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Constructive incremental transfer learning for SOH regression"};
  app.require_subcommand(1);
  app.footer("Config keys: " + [] {
    std::string s;
    for (const auto& k : known_keys()) s += (s.empty() ? "" : ", ") + k;
    return s;
  }());

  // train-source
  Common ts_c;
  DataSource ts_data;
  std::string ts_out, ts_log;
  auto* ts = app.add_subcommand("train-source", "grow the source estimator");
  add_common(ts, ts_c);
  add_growth_flags(ts, ts_c, "source_eps");
  add_data(ts, ts_data, "--data", "source cycles");
  ts->add_option("--out", ts_out, "model JSON")->required();
  ts->add_option("--log", ts_log, "growth log CSV (default <out>_growth.csv)");
  add_override(ts, ts_c, "--C", "C", "ridge penalty");

  // transfer
  Common tr_c;
  DataSource tr_data;
  std::string tr_src, tr_out, tr_log, tr_report;
  auto* tr = app.add_subcommand("transfer", "grow the target estimator from a source model");
  add_common(tr, tr_c);
  add_growth_flags(tr, tr_c);
  add_transfer_flags(tr, tr_c);
  add_data(tr, tr_data, "--data", "target cycles");
  tr->add_option("--source-model", tr_src, "source model JSON")->required();
  tr->add_option("--out", tr_out, "model JSON")->required();
  tr->add_option("--log", tr_log, "growth log CSV (default <out>_growth.csv)");
  tr->add_option("--report", tr_report, "report CSV (default <out>_report.csv)");
  tr->add_flag("--deterministic-report", tr_c.deterministic, "write zero timings");

  // predict
  DataSource pr_data;
  std::string pr_model, pr_out;
  std::size_t pr_dim = 0;
  auto* pr = app.add_subcommand("predict", "predict SOH with a saved model");
  add_data(pr, pr_data, "--data", "input cycles");
  pr->add_option("--model", pr_model, "model JSON")->required();
  pr->add_option("--out", pr_out, "predictions CSV (default stdout)");
  pr->add_option("--dim", pr_dim, "resampling dimension for raw traces (default: the model's)");

  // evaluate
  Common ev_c;
  DataSource ev_src, ev_tgt;
  std::string ev_out;
  std::size_t ev_seeds = 1;
  auto* ev = app.add_subcommand("evaluate", "run the A->B task for one or more seeds");
  add_common(ev, ev_c);
  add_growth_flags(ev, ev_c);
  add_transfer_flags(ev, ev_c);
  add_data(ev, ev_src, "--source", "source cycles");
  add_data(ev, ev_tgt, "--target", "target cycles");
  ev->add_option("--seeds", ev_seeds, "number of consecutive seeds starting at --seed");
  ev->add_option("--out", ev_out, "report CSV (default stdout)");
  ev->add_flag("--deterministic-report", ev_c.deterministic, "write zero timings");

  // synth
  Common sy_c;
  std::string sy_dir;
  auto* sy = app.add_subcommand("synth", "write a synthetic source/target pair");
  add_common(sy, sy_c);
  add_override(sy, sy_c, "--shift", "shift", "domain shift");
  add_override(sy, sy_c, "--noise-sd", "noise_sd", "voltage noise");
  add_override(sy, sy_c, "--n-cycles", "n_cycles", "cycles per cell");
  add_override(sy, sy_c, "--d", "d", "feature dimension");
  sy->add_option("--out-dir", sy_dir, "output directory")->required();

  // ablate
  Common ab_c;
  DataSource ab_src, ab_tgt;
  std::string ab_out;
  std::size_t ab_seeds = 20;
  auto* ab = app.add_subcommand("ablate", "four-variant ablation (synthetic tasks unless data is given)");
  add_common(ab, ab_c);
  add_growth_flags(ab, ab_c);
  add_transfer_flags(ab, ab_c);
  add_data(ab, ab_src, "--source", "source cycles");
  add_data(ab, ab_tgt, "--target", "target cycles");
  ab->add_option("--seeds", ab_seeds, "number of consecutive seeds starting at --seed");
  ab->add_option("--out", ab_out, "report CSV (default stdout)");
  ab->add_flag("--deterministic-report", ab_c.deterministic, "write zero timings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  if (*ts) {
    const Settings s = resolve(ts_c);
    const CycleMatrix data = load(ts_data, s.feature_dim, "--data");
    GrowConfig g = s.task.source;
    g.seed = derive_seed(s.seed, 1);
    GrowResult fit = train_source(data, g);
    emit_warnings(fit.log);
    save_model(ts_out, fit.model);
    write_growth_log(ts_log.empty() ? sibling(ts_out, "_growth.csv") : ts_log, fit.log);
    return 0;
  }

  if (*tr) {
    const Settings s = resolve(tr_c);
    const ShallowModel source = load_model(tr_src);
    const CycleMatrix raw = load(tr_data, source.d, "--data");
    if (raw.dim() != source.d) {
      throw Error(ErrorCode::DimensionMismatch, "target data has " + std::to_string(raw.dim()) +
                                                    " features, source model expects " + std::to_string(source.d));
    }
    TaskConfig task = s.task;
    task.record_timing = !tr_c.deterministic;
    const CycleMatrix target = normalized(raw, source.norm);
    const TargetSplit split = split_protocol(target, task.split);
    TransferConfig tc = task.target;
    tc.growth.seed = derive_seed(s.seed, 2);

    const auto t0 = std::chrono::steady_clock::now();
    GrowResult fit = grow_target(split.labeled, split.unlabeled, source, tc);
    const double train_s =
        task.record_timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() : 0.0;
    emit_warnings(fit.log);

    EvalReport rep = evaluate_model(fit.model, split.test, task.record_timing);
    rep.task = task.name;
    rep.seed = s.seed;
    rep.variant = std::string("citl_") + to_string(tc.mode);
    rep.train_time_s = train_s;

    save_model(tr_out, fit.model);
    write_growth_log(tr_log.empty() ? sibling(tr_out, "_growth.csv") : tr_log, fit.log);
    auto config = to_json(s);
    config["source_model"] = tr_src;
    write_report(tr_report.empty() ? sibling(tr_out, "_report.csv") : tr_report, {rep}, config);
    return 0;
  }

  if (*pr) {
    const ShallowModel model = load_model(pr_model);
    const CycleMatrix data = load(pr_data, pr_dim > 0 ? pr_dim : model.d, "--data");
    if (data.dim() != model.d) {
      throw Error(ErrorCode::DimensionMismatch, "data has " + std::to_string(data.dim()) +
                                                    " features, model expects " + std::to_string(model.d));
    }
    const Matrix yhat = predict_raw(model, data.x);
    if (pr_out.empty() || pr_out == "-") {
      std::cout << "cycle_id,soh_pred\n";
      for (std::size_t i = 0; i < yhat.rows(); ++i)
        std::cout << data.cycle_ids[i] << ',' << csv::format_double(yhat(i, 0)) << '\n';
    } else {
      csv::write_predictions(pr_out, data.cycle_ids, yhat);
    }
    return 0;
  }

  if (*ev) {
    const Settings s = resolve(ev_c);
    const CycleMatrix src = load(ev_src, s.feature_dim, "--source");
    const CycleMatrix tgt = load(ev_tgt, s.feature_dim, "--target");
    if (src.dim() != tgt.dim()) throw Error(ErrorCode::DimensionMismatch, "source and target widths differ");
    TaskConfig task = s.task;
    task.record_timing = !ev_c.deterministic;
    std::vector<EvalReport> reports;
    for (std::size_t i = 0; i < ev_seeds; ++i) reports.push_back(run_task(src, tgt, task, s.seed + i));
    write_reports(ev_out, reports, to_json(s), true);
    return 0;
  }

  if (*sy) {
    Settings s = resolve(sy_c);
    s.synth.seed = s.seed;
    const SynthTask task = synth_generate(s.synth);
    std::filesystem::create_directories(sy_dir);
    const auto dir = std::filesystem::path(sy_dir);
    csv::write_cycles((dir / "source.csv").string(), task.source);
    csv::write_cycles((dir / "target.csv").string(), task.target);
    return 0;
  }

  if (*ab) {
    const Settings s = resolve(ab_c);
    TaskConfig task = s.task;
    task.record_timing = !ab_c.deterministic;
    const bool synthetic = ab_src.csv.empty() && ab_src.traces.empty();
    std::optional<CycleMatrix> src, tgt;
    if (!synthetic) {
      src = load(ab_src, s.feature_dim, "--source");
      tgt = load(ab_tgt, s.feature_dim, "--target");
      if (src->dim() != tgt->dim()) throw Error(ErrorCode::DimensionMismatch, "source and target widths differ");
    }
    std::vector<EvalReport> reports;
    for (std::size_t i = 0; i < ab_seeds; ++i) {
      const std::uint64_t seed = s.seed + i;
      std::vector<EvalReport> rows;
      if (synthetic) {
        SynthConfig sc = s.synth;
        sc.seed = seed;
        const SynthTask pair = synth_generate(sc);
        rows = run_ablation(pair.source, pair.target, task, {seed});
      } else {
        rows = run_ablation(*src, *tgt, task, {seed});
      }
      reports.insert(reports.end(), rows.begin(), rows.end());
    }
    auto config = to_json(s);
    if (synthetic) config["synth"] = to_json(s.synth);
    write_reports(ab_out, reports, config, true);
    return 0;
  }
  return kExitInput;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const citl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case citl::ErrorCode::NoCandidateFound: return kExitNoCandidate;
      case citl::ErrorCode::DimensionMismatch: return kExitDimension;
      default: return kExitInput;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
}
