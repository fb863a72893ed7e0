#pragma once

// gen -> train -> eval -> report stages. Layout under RunConfig::out:
//
//   datasets/<label>.csv + .json
//   models/naive_linear.model, learnt_linear.model, learnt_nonlinear.model
//   models/loss_learnt_linear.csv, loss_learnt_nonlinear.csv
//   reports/table.csv, summary.json, config.ini, table1.md
//   reports/slices/<label>_alt<altitude>.csv
//   reports/contours/<label>_alt<altitude>_<model>.csv
//
// Seeds come from run.seed through named substreams, so each stage is
// reproducible on its own.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "downwash/config.hpp"
#include "downwash/eval.hpp"
#include "downwash/io.hpp"
#include "downwash/model_io.hpp"
#include "downwash/models.hpp"

namespace downwash {

namespace fs = std::filesystem;

inline constexpr const char* kNaiveName = "naive_linear";
inline constexpr const char* kLinearName = "learnt_linear";
inline constexpr const char* kDeepSetName = "learnt_nonlinear";

struct RunPaths {
  fs::path root;
  fs::path datasets() const { return root / "datasets"; }
  fs::path models() const { return root / "models"; }
  fs::path reports() const { return root / "reports"; }
  fs::path dataset(const std::string& label) const { return datasets() / (label + ".csv"); }
  fs::path model(const std::string& name) const { return models() / (name + ".model"); }
};

inline RunPaths run_paths(const RunConfig& cfg) { return {fs::path(cfg.out)}; }

namespace detail {

inline void log_line(std::ostream* log, const std::string& s) {
  if (log) *log << s << std::endl;
}

/// Every stride-th record, stride chosen so at most `max_records` remain.
inline std::vector<SetSample> subsampled_samples(const Dataset& ds, std::size_t max_records) {
  const std::size_t n = ds.records.size();
  const std::size_t stride = n > max_records ? (n + max_records - 1) / max_records : 1;
  std::vector<SetSample> out;
  out.reserve(n / stride + 1);
  for (std::size_t i = 0; i < n; i += stride) {
    out.push_back(make_sample(ds.records[i].snapshot, ds.records[i].measured));
  }
  return out;
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

inline std::string loss_csv(const std::vector<double>& history) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out += std::to_string(i) + "," + format_double(history[i]) + "\n";
  }
  return out;
}

}  // namespace detail

/// Generates every configured dataset; returns the CSV paths.
inline std::vector<fs::path> run_gen(const RunConfig& cfg, std::ostream* log = nullptr) {
  cfg.validate();
  const auto paths = run_paths(cfg);
  std::vector<fs::path> written;
  for (const auto& f : cfg.datasets) {
    SweepRequest req;
    req.kind = f.kind;
    req.k = f.k;
    req.oracle = cfg.dataset_oracle;
    req.sweep = cfg.sweep_for(f);
    req.field = cfg.field;
    req.merge = cfg.merge;
    req.noise = cfg.noise_for(f);
    const auto ds = generate_sweep(req);
    const auto path = paths.dataset(f.label());
    save_dataset(ds, path);
    detail::log_line(log, "gen " + f.label() + ": " + std::to_string(ds.records.size()) + " records -> " +
                              path.string());
    written.push_back(path);
  }
  return written;
}

struct TrainOutputs {
  GridLookupModel naive;
  LinearAggModel linear;
  DeepSetModel deepset;
  std::vector<double> linear_loss;
  std::vector<double> deepset_loss;
};

/// Fits the naive grid and trains both learnt models from the datasets in
/// `dataset_dir` (default: <out>/datasets). Writes model files and loss
/// histories. DivergenceError propagates.
inline TrainOutputs run_train(const RunConfig& cfg, std::ostream* log = nullptr,
                              const fs::path& dataset_dir = {}) {
  cfg.validate();
  const auto paths = run_paths(cfg);
  const fs::path dir = dataset_dir.empty() ? paths.datasets() : dataset_dir;
  const auto dataset_path = [&](const std::string& label) {
    const auto p = dir / (label + ".csv");
    if (!fs::exists(p)) throw IoError("dataset not found: " + p.string() + " (run gen first)");
    return p;
  };

  TrainOutputs out;
  {
    const auto ds = load_dataset(dataset_path(cfg.naive_dataset));
    const auto spec = grid_spec_for_sweep(ds.meta.sweep, cfg.naive_e_step);
    out.naive = fit_grid(ds, spec);
    out.naive.metadata["dataset"] = cfg.naive_dataset;
    detail::log_line(log, std::string("train ") + kNaiveName + ": " + std::to_string(spec.cell_count()) +
                              " cells from " + std::to_string(ds.records.size()) + " records");
  }

  std::vector<SetSample> samples;
  const auto labels = cfg.effective_train_datasets();
  for (const auto& label : labels) {
    const auto ds = load_dataset(dataset_path(label));
    auto part = detail::subsampled_samples(ds, cfg.max_records_per_dataset);
    detail::log_line(log, "train: " + label + " contributes " + std::to_string(part.size()) + " records");
    samples.insert(samples.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }

  const auto progress = [&](const std::string& name) {
    return [log, name, total = cfg.train.epochs](std::size_t epoch, double loss) {
      if (log && (epoch % 10 == 0 || epoch + 1 == total)) {
        *log << "train " << name << ": epoch " << epoch + 1 << "/" << total << " loss " << format_double(loss)
             << std::endl;
      }
    };
  };
  const auto metadata = [&](const std::vector<double>& history) {
    Metadata m;
    m["seed"] = std::to_string(cfg.seed);
    m["epochs"] = std::to_string(cfg.train.epochs);
    m["datasets"] = detail::join(labels, ",");
    m["records"] = std::to_string(samples.size());
    m["final_loss"] = history.empty() ? "nan" : format_double(history.back());
    return m;
  };

  {
    Rng init(derive_seed(cfg.seed, "init/linear"), 0);
    auto model = LinearAggModel::create(cfg.hidden, cfg.psi_depth, init);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "shuffle/linear");
    auto result = train(std::move(model), samples, tc, progress(kLinearName));
    out.linear = std::move(result.model);
    out.linear_loss = std::move(result.loss_history);
    out.linear.metadata = metadata(out.linear_loss);
  }
  {
    Rng init(derive_seed(cfg.seed, "init/deepset"), 0);
    auto model = DeepSetModel::create(cfg.hidden, cfg.embed, cfg.phi_depth, cfg.rho_depth, init);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "shuffle/deepset");
    auto result = train(std::move(model), samples, tc, progress(kDeepSetName));
    out.deepset = std::move(result.model);
    out.deepset_loss = std::move(result.loss_history);
    out.deepset.metadata = metadata(out.deepset_loss);
  }

  save_model(out.naive, paths.model(kNaiveName));
  save_model(out.linear, paths.model(kLinearName));
  save_model(out.deepset, paths.model(kDeepSetName));
  write_text_file(paths.models() / (std::string("loss_") + kLinearName + ".csv"), detail::loss_csv(out.linear_loss));
  write_text_file(paths.models() / (std::string("loss_") + kDeepSetName + ".csv"), detail::loss_csv(out.deepset_loss));
  detail::log_line(log, "train: models written to " + paths.models().string());
  return out;
}

/// Models loaded for evaluation; predictors reference the owned models.
struct LoadedModels {
  std::vector<GridLookupModel> grids;
  std::vector<LinearAggModel> linears;
  std::vector<DeepSetModel> deepsets;
  std::vector<NamedPredictor> predictors;

  LoadedModels() = default;
  LoadedModels(const LoadedModels&) = delete;
  LoadedModels& operator=(const LoadedModels&) = delete;
};

/// Each model is named by its file stem, in the order given.
inline void load_models(const std::vector<fs::path>& files, LoadedModels& out) {
  out.grids.reserve(files.size());
  out.linears.reserve(files.size());
  out.deepsets.reserve(files.size());
  for (const auto& f : files) {
    if (!fs::exists(f)) throw IoError("model file not found: " + f.string());
    const auto name = f.stem().string();
    switch (model_type(f)) {
      case ModelType::kGrid:
        out.predictors.push_back({name, as_predictor(out.grids.emplace_back(load_grid_model(f)))});
        break;
      case ModelType::kLinear:
        out.predictors.push_back({name, as_predictor(out.linears.emplace_back(load_linear_model(f)))});
        break;
      case ModelType::kDeepSet:
        out.predictors.push_back({name, as_predictor(out.deepsets.emplace_back(load_deepset_model(f)))});
        break;
    }
  }
}

inline std::vector<fs::path> default_model_files(const RunConfig& cfg) {
  const auto paths = run_paths(cfg);
  return {paths.model(kNaiveName), paths.model(kLinearName), paths.model(kDeepSetName)};
}

struct EvalOutputs {
  EvalReport report;
  std::vector<std::pair<std::string, SliceProfile>> slices;  // (file stem, profile)
  nlohmann::ordered_json summary;
};

/// Benchmarks the models (default: the three trained ones) against
/// eval.oracle and writes the report files.
inline EvalOutputs run_eval(const RunConfig& cfg, std::ostream* log = nullptr,
                            const std::vector<fs::path>& model_files = {}) {
  cfg.validate();
  const auto paths = run_paths(cfg);
  LoadedModels loaded;
  load_models(model_files.empty() ? default_model_files(cfg) : model_files, loaded);
  BenchmarkRequest req;
  req.models = loaded.predictors;
  for (auto kind : cfg.reference_oracles) {
    req.references.push_back(
        {"oracle_" + std::string(to_string(kind)), oracle_predictor(kind, cfg.field, cfg.merge)});
  }
  std::vector<NamedPredictor> all = req.models;
  all.insert(all.end(), req.references.begin(), req.references.end());
  for (const auto& f : cfg.eval_formations) req.formations.push_back(cfg.formation_spec(f));
  req.oracle = cfg.eval_oracle;
  req.altitudes = cfg.eval_altitudes;
  req.extent = cfg.eval_extent;
  req.resolution = cfg.eval_resolution;
  req.field = cfg.field;
  req.merge = cfg.merge;

  EvalOutputs out;
  out.report = benchmark(req);
  detail::log_line(log, "eval: " + std::to_string(out.report.rows.size()) + " table rows");

  const auto truth = oracle_predictor(cfg.eval_oracle, cfg.field, cfg.merge);
  auto slices_json = nlohmann::ordered_json::array();
  for (const auto& f : req.formations) {
    for (double alt : cfg.eval_altitudes) {
      const std::string stem = f.label() + "_alt" + format_double(alt);
      auto s = slice_profile(all, truth, f, alt, cfg.slice_axis, cfg.eval_extent, cfg.slice_resolution);
      write_text_file(paths.reports() / "slices" / (stem + ".csv"), slice_to_csv(s));
      nlohmann::ordered_json sj;
      sj["formation"] = f.label();
      sj["altitude"] = alt;
      nlohmann::ordered_json peaks;
      for (std::size_t i = 0; i < s.model_names.size(); ++i) peaks[s.model_names[i]] = count_peaks(s.model_values[i]);
      peaks["ground_truth"] = count_peaks(s.truth);
      sj["peaks"] = peaks;
      slices_json.push_back(sj);

      for (const auto& p : all) {
        const auto g = contour_grid(p.predict, f, alt, cfg.eval_extent, cfg.contour_resolution);
        write_text_file(paths.reports() / "contours" / (stem + "_" + p.name + ".csv"), contour_to_csv(g));
      }
      const auto g = contour_grid(truth, f, alt, cfg.eval_extent, cfg.contour_resolution);
      write_text_file(paths.reports() / "contours" / (stem + "_ground_truth.csv"), contour_to_csv(g));
      out.slices.emplace_back(stem, std::move(s));
    }
  }

  out.summary["format"] = "downwash-report";
  out.summary["version"] = 1;
  out.summary["table"] = report_to_json(out.report);
  out.summary["slices"] = slices_json;
  write_text_file(paths.reports() / "table.csv", report_to_csv(out.report));
  write_text_file(paths.reports() / "summary.json", out.summary.dump(2) + "\n");
  write_text_file(paths.reports() / "config.ini", config_to_ini(cfg));
  detail::log_line(log, "eval: reports written to " + paths.reports().string());
  return out;
}

/// Table 1 style markdown from reports/summary.json: one table per
/// altitude, a row per (formation, model), winners in bold.
inline std::string run_report(const RunConfig& cfg) {
  const auto paths = run_paths(cfg);
  const auto file = paths.reports() / "summary.json";
  if (!fs::exists(file)) throw IoError("report not found: " + file.string() + " (run eval first)");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("cannot parse " + file.string() + ": " + e.what());
  }
  const auto& table = j.at("table");
  std::vector<double> altitudes;
  for (const auto& r : table.at("rows")) {
    const double a = r.at("altitude");
    if (std::find(altitudes.begin(), altitudes.end(), a) == altitudes.end()) altitudes.push_back(a);
  }
  std::string out = "# Normalized integrated plane error (oracle: " + table.at("oracle").get<std::string>() + ")\n";
  for (double alt : altitudes) {
    out += "\n## Relative altitude " + format_double(alt) + " m\n\n| formation | model |";
    for (const char* a : Wrench6::kAxisNames) out += std::string(" ") + a + " |";
    out += "\n|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : table.at("rows")) {
      if (r.at("altitude").get<double>() != alt) continue;
      out += "| " + r.at("formation").get<std::string>() + " k=" + std::to_string(r.at("k").get<int>()) + " | " +
             r.at("model").get<std::string>() + " |";
      for (const char* a : Wrench6::kAxisNames) {
        const auto& v = r.at("errors").at(a);
        bool won = false;
        for (const auto& w : r.at("wins")) won = won || w.get<std::string>() == a;
        std::string cell = v.is_null() ? "n/a" : [&] {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.3f", v.get<double>());
          return std::string(buf);
        }();
        out += " " + (won ? "**" + cell + "**" : cell) + " |";
      }
      out += "\n";
    }
  }
  write_text_file(paths.reports() / "table1.md", out);
  return out;
}

}  // namespace downwash
