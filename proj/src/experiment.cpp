#include "deskdrive/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>

#include "deskdrive/rng.hpp"
#include "deskdrive/scene_io.hpp"
#include "deskdrive/sensor.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace deskdrive {

namespace {

std::string fmt(const char* f, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

int sensor_arm_index(const std::string& name) {
  if (name == "hd") return 0;
  if (name == "vision") return 1;
  if (name == "sim_vision") return 2;
  throw std::invalid_argument("unknown arm: " + name);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  sensors["hd"] = hd_sensor_config();
  sensors["vision"] = vision_sensor_config();
  sensors["sim_vision"] = sim_vision_sensor_config();
  // Desk-scale step budget; the constant-steps rule in epochs_for_fraction
  // still reproduces the reference epoch table from its own default.
  train.epochs_at_full_data = 16;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = t.substr(1, t.size() - 2);
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    std::string key = section + "." + trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    auto d = [&] { return std::stod(val); };
    auto i = [&] { return std::stoi(val); };
    auto u = [&] { return static_cast<uint64_t>(std::stoull(val)); };

    if (key == "data.full_hours") cfg.full_hours = d();
    else if (key == "data.finetune_hours") cfg.finetune_hours = d();
    else if (key == "data.test_hours") cfg.test_hours = d();
    else if (key == "data.val_hours") cfg.val_hours = d();
    else if (key == "data.data_seed") cfg.data_seed = u();
    else if (key == "data.mix") {
      auto parts = split_list(val);
      if (parts.size() != kScenarioKindCount)
        throw std::runtime_error("config: mix needs 7 weights");
      for (size_t k = 0; k < parts.size(); ++k) cfg.mix[k] = std::stod(parts[k]);
    } else if (key == "sweep.fractions") {
      cfg.fractions.clear();
      for (const auto& p : split_list(val)) cfg.fractions.push_back(std::stod(p));
    } else if (key == "sweep.arms") {
      cfg.arms = split_list(val);
      for (const auto& a : cfg.arms) sensor_arm_index(a);
    } else if (key == "sweep.seeds") {
      cfg.seeds.clear();
      for (const auto& p : split_list(val))
        cfg.seeds.push_back(static_cast<uint64_t>(std::stoull(p)));
    } else if (key == "sweep.eval_passes") cfg.eval_passes = i();
    else if (key == "sweep.eval_seed") cfg.eval_seed = u();
    else if (key == "train.base_lr") cfg.train.base_lr = d();
    else if (key == "train.batch_size") cfg.train.batch_size = i();
    else if (key == "train.epochs_at_full_data") cfg.train.epochs_at_full_data = i();
    else if (key == "train.warmup_frac") cfg.train.warmup_frac = d();
    else if (key == "train.perturb_prob") cfg.train.perturb_prob = d();
    else if (key == "train.perturb_lat_max") cfg.train.perturb_lat_max = d();
    else if (key == "train.perturb_yaw_max_deg") cfg.train.perturb_yaw_max_deg = d();
    else if (key == "train.seed") cfg.train.seed = u();
    else if (key == "arch.embed_dim") cfg.train.arch.embed_dim = i();
    else if (key == "arch.heads") cfg.train.arch.heads = i();
    else if (key == "arch.blocks") cfg.train.arch.blocks = i();
    else if (key == "arch.ff_dim") cfg.train.arch.ff_dim = i();
    else if (key == "finetune.max_epochs") cfg.ft.max_epochs = i();
    else if (key == "finetune.lr_factor") cfg.ft.lr_factor = d();
    else if (key == "finetune.eval_passes") cfg.ft.eval_passes = i();
    else if (key == "finetune.eval_seed") cfg.ft.eval_seed = u();
    else if (key.rfind("sensor.", 0) == 0) {
      size_t dot = key.find('.', 7);
      if (dot == std::string::npos)
        throw std::runtime_error("config: bad sensor key " + key);
      std::string name = key.substr(7, dot - 7);
      std::string field = key.substr(dot + 1);
      auto it = cfg.sensors.find(name);
      if (it == cfg.sensors.end())
        throw std::runtime_error("config: unknown sensor " + name);
      SensorConfig& sc = it->second;
      if (field == "fov_deg") sc.fov_deg = d();
      else if (field == "range_m") sc.range_m = d();
      else if (field == "dropout_base") sc.dropout_base = d();
      else if (field == "pos_noise_base") sc.pos_noise_base = d();
      else if (field == "pos_noise_slope") sc.pos_noise_slope = d();
      else if (field == "yaw_noise_deg") sc.yaw_noise_deg = d();
      else if (field == "false_pos_per_min") sc.false_pos_per_min = d();
      else if (field == "loc_drift_sigma") sc.loc_drift_sigma = d();
      else throw std::runtime_error("config: unknown sensor field " + field);
    } else {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": unknown key " + key);
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_file(path));
}

std::string experiment_config_to_text(const ExperimentConfig& cfg) {
  std::string s;
  auto num = [](double v) { return fmt("%.9g", v); };
  s += "[data]\n";
  s += "full_hours = " + num(cfg.full_hours) + "\n";
  s += "finetune_hours = " + num(cfg.finetune_hours) + "\n";
  s += "test_hours = " + num(cfg.test_hours) + "\n";
  s += "val_hours = " + num(cfg.val_hours) + "\n";
  s += "data_seed = " + std::to_string(cfg.data_seed) + "\n";
  s += "mix = ";
  for (size_t k = 0; k < cfg.mix.size(); ++k)
    s += (k ? "," : "") + num(cfg.mix[k]);
  s += "\n\n[sweep]\n";
  s += "fractions = ";
  for (size_t k = 0; k < cfg.fractions.size(); ++k)
    s += (k ? "," : "") + num(cfg.fractions[k]);
  s += "\narms = ";
  for (size_t k = 0; k < cfg.arms.size(); ++k) s += (k ? "," : "") + cfg.arms[k];
  s += "\nseeds = ";
  for (size_t k = 0; k < cfg.seeds.size(); ++k)
    s += (k ? "," : "") + std::to_string(cfg.seeds[k]);
  s += "\neval_passes = " + std::to_string(cfg.eval_passes) + "\n";
  s += "eval_seed = " + std::to_string(cfg.eval_seed) + "\n";
  s += "\n[train]\n";
  s += "base_lr = " + num(cfg.train.base_lr) + "\n";
  s += "batch_size = " + std::to_string(cfg.train.batch_size) + "\n";
  s += "epochs_at_full_data = " + std::to_string(cfg.train.epochs_at_full_data) + "\n";
  s += "warmup_frac = " + num(cfg.train.warmup_frac) + "\n";
  s += "perturb_prob = " + num(cfg.train.perturb_prob) + "\n";
  s += "perturb_lat_max = " + num(cfg.train.perturb_lat_max) + "\n";
  s += "perturb_yaw_max_deg = " + num(cfg.train.perturb_yaw_max_deg) + "\n";
  s += "seed = " + std::to_string(cfg.train.seed) + "\n";
  s += "\n[arch]\n";
  s += "embed_dim = " + std::to_string(cfg.train.arch.embed_dim) + "\n";
  s += "heads = " + std::to_string(cfg.train.arch.heads) + "\n";
  s += "blocks = " + std::to_string(cfg.train.arch.blocks) + "\n";
  s += "ff_dim = " + std::to_string(cfg.train.arch.ff_dim) + "\n";
  s += "\n[finetune]\n";
  s += "max_epochs = " + std::to_string(cfg.ft.max_epochs) + "\n";
  s += "lr_factor = " + num(cfg.ft.lr_factor) + "\n";
  s += "eval_passes = " + std::to_string(cfg.ft.eval_passes) + "\n";
  s += "eval_seed = " + std::to_string(cfg.ft.eval_seed) + "\n";
  for (const auto& [name, sc] : cfg.sensors) {
    s += "\n[sensor." + name + "]\n";
    s += "fov_deg = " + num(sc.fov_deg) + "\n";
    s += "range_m = " + num(sc.range_m) + "\n";
    s += "dropout_base = " + num(sc.dropout_base) + "\n";
    s += "pos_noise_base = " + num(sc.pos_noise_base) + "\n";
    s += "pos_noise_slope = " + num(sc.pos_noise_slope) + "\n";
    s += "yaw_noise_deg = " + num(sc.yaw_noise_deg) + "\n";
    s += "false_pos_per_min = " + num(sc.false_pos_per_min) + "\n";
    s += "loc_drift_sigma = " + num(sc.loc_drift_sigma) + "\n";
  }
  return s;
}

namespace {

void write_split(const std::string& dir, std::span<const DriveLog> logs) {
  fs::create_directories(dir);
  std::string manifest;
  char name[64];
  for (size_t i = 0; i < logs.size(); ++i) {
    std::snprintf(name, sizeof(name), "snip_%05zu.jsonl", i);
    save_log(logs[i], dir + "/" + name);
    nlohmann::json line{{"path", name},
                        {"kind", logs[i].meta.scenario},
                        {"duration", logs[i].duration()},
                        {"seed", logs[i].meta.seed},
                        {"sensor", logs[i].meta.sensor}};
    manifest += line.dump();
    manifest.push_back('\n');
  }
  write_file_atomic(dir + "/manifest.jsonl", manifest);
}

double subset_hours(std::span<const DriveLog> logs, size_t count) {
  double s = 0.0;
  for (size_t i = 0; i < count && i < logs.size(); ++i) s += logs[i].duration();
  return s / 3600.0;
}

std::string cell_name(const std::string& arm, double fraction, uint64_t seed) {
  return arm + "_f" + fmt("%.9g", fraction) + "_s" + std::to_string(seed);
}

}  // namespace

DataBundle prepare_data(const ExperimentConfig& cfg, const std::string& out_dir,
                        bool write_files) {
  DataBundle d;
  d.train_full = gen_dataset(cfg.full_hours, cfg.mix, substream(cfg.data_seed, 101));
  d.finetune_hd = gen_dataset(cfg.finetune_hours, cfg.mix, substream(cfg.data_seed, 102));
  d.test_set = gen_dataset(cfg.test_hours, cfg.mix, substream(cfg.data_seed, 103));
  d.val_set = gen_dataset(cfg.val_hours, cfg.mix, substream(cfg.data_seed, 104));

  for (const std::string& arm : cfg.arms) {
    const SensorConfig& sc = cfg.sensors.at(arm);
    int ai = sensor_arm_index(arm);
    std::vector<DriveLog> degraded(d.train_full.size());
    for (size_t i = 0; i < d.train_full.size(); ++i)
      degraded[i] = degrade_log(d.train_full[i], sc,
                                substream(cfg.data_seed, 200 + static_cast<uint64_t>(ai), i));
    d.train_by_arm[arm] = std::move(degraded);
  }
  {
    const SensorConfig& hd = cfg.sensors.at("hd");
    for (size_t i = 0; i < d.finetune_hd.size(); ++i)
      d.finetune_hd[i] = degrade_log(d.finetune_hd[i], hd,
                                     substream(cfg.data_seed, 210, i));
  }

  if (write_files) {
    write_split(out_dir + "/data/train", d.train_full);
    for (const auto& [arm, logs] : d.train_by_arm)
      write_split(out_dir + "/data/train_" + arm, logs);
    write_split(out_dir + "/data/finetune_hd", d.finetune_hd);
    write_split(out_dir + "/data/test", d.test_set);
    write_split(out_dir + "/data/val", d.val_set);
  }
  return d;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::create_directories(out_dir + "/checkpoints");
  fs::create_directories(out_dir + "/train_logs");

  const std::string cfg_text = experiment_config_to_text(cfg);
  bool reuse_ok = false;
  const std::string cfg_path = out_dir + "/config_effective.txt";
  if (fs::exists(cfg_path)) reuse_ok = read_file(cfg_path) == cfg_text;
  write_file_atomic(cfg_path, cfg_text);

  DataBundle data = prepare_data(cfg, out_dir, true);
  const SensorConfig& eval_sensor = cfg.sensors.at("hd");

  SweepResult res;
  for (const std::string& arm : cfg.arms) {
    const std::vector<DriveLog>& train_logs = data.train_by_arm.at(arm);
    for (double fraction : cfg.fractions) {
      size_t count = static_cast<size_t>(
          std::ceil(fraction * static_cast<double>(train_logs.size()) - 1e-9));
      count = std::clamp<size_t>(count, 1, train_logs.size());
      std::span<const DriveLog> subset(train_logs.data(), count);
      double hours = subset_hours(train_logs, count);
      int epochs = epochs_for_fraction(fraction, cfg.train.epochs_at_full_data);
      for (uint64_t seed : cfg.seeds) {
        const std::string cell = cell_name(arm, fraction, seed);
        try {
          TrainConfig tcfg = cfg.train;
          tcfg.seed = seed;

          const std::string ck_path = out_dir + "/checkpoints/" + cell + ".ckpt";
          PlannerParams params;
          if (reuse_ok && fs::exists(ck_path)) {
            params = load_checkpoint(ck_path).params;
          } else {
            TrainResult tr = train(subset, tcfg, epochs, arm);
            params = std::move(tr.params);
            save_checkpoint({params, {}, false, epochs}, ck_path);
            write_file_atomic(out_dir + "/train_logs/" + cell + ".csv", tr.csv_log);
          }

          EvalStats before = evaluate_params(params, data.test_set, eval_sensor,
                                             cfg.eval_seed, cfg.eval_passes)
                                 .stats;

          const std::string ft_path = out_dir + "/checkpoints/" + cell + "_ft.ckpt";
          PlannerParams ft_params;
          if (reuse_ok && fs::exists(ft_path)) {
            ft_params = load_checkpoint(ft_path).params;
          } else {
            ft_params = finetune(params, data.finetune_hd, tcfg, cfg.ft,
                                 data.val_set, eval_sensor);
            save_checkpoint({ft_params, {}, false, 0}, ft_path);
          }

          EvalStats after = evaluate_params(ft_params, data.test_set, eval_sensor,
                                            cfg.eval_seed, cfg.eval_passes)
                                .stats;

          res.cells.push_back({arm, fraction, hours, seed, before, after});
        } catch (const std::exception& e) {
          res.failures.push_back(cell + ": " + e.what());
        }
      }
    }
  }

  // aggregate across seeds
  for (const std::string& arm : cfg.arms) {
    for (double fraction : cfg.fractions) {
      for (bool ft : {true, false}) {
        std::vector<EvalStats> stats;
        std::vector<uint64_t> seeds;
        double hours = 0.0;
        for (const CellResult& c : res.cells) {
          if (c.arm != arm || c.fraction != fraction) continue;
          stats.push_back(ft ? c.after_ft : c.before_ft);
          seeds.push_back(c.seed);
          hours = c.hours;
        }
        if (stats.empty()) continue;
        EvalReport rep = aggregate(stats, seeds);
        ResultRow row;
        row.arm = arm;
        row.fraction = fraction;
        row.hours = hours;
        row.finetuned = ft;
        row.n_seeds = rep.n_seeds;
        row.mean = rep.mean;
        row.stddev = rep.stddev;
        res.rows.push_back(std::move(row));
      }
    }
  }

  // per-seed detail
  std::string runs =
      "arm,fraction,hours,finetuned,seed,front,side,rear,offroad,l2,i1k,miles\n";
  for (const CellResult& c : res.cells) {
    for (bool ft : {false, true}) {
      const EvalStats& s = ft ? c.after_ft : c.before_ft;
      runs += c.arm + "," + fmt("%.9g", c.fraction) + "," + fmt("%.9g", c.hours) +
              "," + (ft ? "1" : "0") + "," + std::to_string(c.seed);
      const double vals[] = {s.front_per_1k, s.side_per_1k, s.rear_per_1k,
                             s.offroad_per_1k, s.l2_m, s.i1k, s.miles};
      for (double v : vals) runs += "," + fmt("%.9g", v);
      runs.push_back('\n');
    }
  }
  write_file_atomic(out_dir + "/runs.csv", runs);
  write_file_atomic(out_dir + "/results.csv", results_to_csv(res.rows));
  write_file_atomic(out_dir + "/table.txt", render_table(res.rows));
  auto curves = sweep_curves(res.rows);
  write_file_atomic(out_dir + "/curves.svg", render_curves_svg(curves));
  if (!res.failures.empty()) {
    std::string f;
    for (const std::string& msg : res.failures) f += msg + "\n";
    write_file_atomic(out_dir + "/failures.txt", f);
  }
  return res;
}

SweepResult run_finetune_ablation(const ExperimentConfig& cfg,
                                  const std::string& out_dir) {
  SweepResult res;
  const std::string results_path = out_dir + "/results.csv";
  const std::string cfg_path = out_dir + "/config_effective.txt";
  bool have = fs::exists(results_path) && fs::exists(cfg_path) &&
              read_file(cfg_path) == experiment_config_to_text(cfg);
  if (have) {
    res.rows = results_from_csv(read_file(results_path));
  } else {
    res = run_sweep(cfg, out_dir);
  }
  auto curves = ablation_curves(res.rows, "vision");
  write_file_atomic(out_dir + "/ablation.svg", render_curves_svg(curves));
  std::vector<ResultRow> vision_rows;
  for (const ResultRow& r : res.rows)
    if (r.arm == "vision") vision_rows.push_back(r);
  write_file_atomic(out_dir + "/ablation_table.txt", render_table(vision_rows));
  return res;
}

void render_report_files(const std::string& results_csv_path,
                         const std::string& table_path,
                         const std::string& svg_path) {
  std::vector<ResultRow> rows = results_from_csv(read_file(results_csv_path));
  write_file_atomic(table_path, render_table(rows));
  write_file_atomic(svg_path, render_curves_svg(sweep_curves(rows)));
}

}  // namespace deskdrive
