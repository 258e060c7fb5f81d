#include "tdrl/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "tdrl/condition.hpp"
#include "tdrl/dataset.hpp"
#include "tdrl/evaluation.hpp"
#include "tdrl/parallel.hpp"
#include "tdrl/reports.hpp"
#include "tdrl/trainer.hpp"

namespace fs = std::filesystem;

namespace tdrl {

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;
  int64_t seed = -1;  // -1: take from config
  bool deterministic = false;
};

std::string timestamp_now(bool deterministic) {
  if (deterministic) return "1970-01-01T00:00:00Z";
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string hash_of_text(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(reinterpret_cast<const uint8_t*>(text.data()), text.size())));
  return buf;
}

void write_run_manifest(const GlobalOpts& g, const std::string& command,
                        const std::vector<std::string>& argv_snapshot,
                        const std::string& config_snapshot,
                        const std::vector<std::string>& artifacts,
                        const std::vector<std::pair<std::string, std::string>>& input_hashes,
                        const std::string& started, uint64_t seed) {
  nlohmann::ordered_json j;
  j["kind"] = "run";
  j["command"] = command;
  j["argv"] = argv_snapshot;
  j["config_snapshot"] = config_snapshot;
  j["seed"] = seed;
  j["deterministic"] = g.deterministic;
  j["started"] = started;
  j["finished"] = timestamp_now(g.deterministic);
  nlohmann::ordered_json arts = nlohmann::ordered_json::array();
  for (const auto& a : artifacts) arts.push_back(a);
  j["artifacts"] = std::move(arts);
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [k, v] : input_hashes) inputs[k] = v;
  j["input_hashes"] = std::move(inputs);
  write_text_file(g.out_dir + "/run.json", j.dump(2) + "\n");
}

GeneratorSpec spec_from_config(const Config& cfg) {
  GeneratorSpec spec;
  spec.family = family_from_name(cfg.require_string("family"));
  const bool stationary = spec.family == Family::heteronoise_fixed ||
                          spec.family == Family::gaussian_additive ||
                          spec.family == Family::linear_nongaussian;
  spec.n = static_cast<int>(cfg.get_int("n", spec.family == Family::modular ? 9 : 8));
  spec.L = static_cast<int>(cfg.get_int("L", spec.family == Family::gaussian_additive ||
                                                     spec.family == Family::linear_nongaussian
                                                 ? 1
                                                 : 2));
  spec.T = static_cast<int>(cfg.get_int("T", 20));
  spec.num_seqs = static_cast<int>(cfg.get_int("num_seqs", stationary ? 5000 : 375));
  spec.m = static_cast<int>(cfg.get_int("m", stationary ? 1 : (spec.family == Family::modular ? 5 : 20)));
  int df = spec.n, dc = 0, dob = 0;
  if (spec.family == Family::changing_dynamics) {
    df = 0;
    dc = spec.n;
  } else if (spec.family == Family::modular) {
    df = 6;
    dc = 2;
    dob = spec.n - 8;
  }
  spec.n_fix = static_cast<int>(cfg.get_int("n_fix", df));
  spec.n_chg = static_cast<int>(cfg.get_int("n_chg", dc));
  spec.n_obs = static_cast<int>(cfg.get_int("n_obs", dob));
  spec.noise.sigma = cfg.get_double("sigma", spec.family == Family::gaussian_additive ? 0.5 : 0.1);
  spec.noise.beta = cfg.get_double("beta", 4.0);
  spec.noise.lambda = cfg.get_double("lambda", 1.0);
  spec.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
  spec.edge_density = cfg.get_double("edge_density", 1.0);
  spec.hidden = static_cast<int>(cfg.get_int("hidden", 16));
  spec.burn_in = static_cast<int>(cfg.get_int("burn_in", 50));
  return spec;
}

int cmd_gen(const GlobalOpts& g, const std::vector<std::string>& argv_snapshot) {
  const std::string started = timestamp_now(g.deterministic);
  const std::string cfg_text = read_text_file(g.config_path);
  const Config cfg = Config::parse(cfg_text);
  GeneratorSpec spec = spec_from_config(cfg);
  const int mixing_depth = static_cast<int>(cfg.get_int("mixing_depth", 3));
  cfg.check_no_unknown_keys("gen config");
  if (g.seed >= 0) spec.seed = static_cast<uint64_t>(g.seed);
  spec.validate();

  const Dataset ds = build_dataset(spec, mixing_depth);
  write_dataset(ds, g.out_dir);
  write_run_manifest(g, "gen", argv_snapshot, cfg.materialize(),
                     {"manifest.json", "payload.bin"}, {{"config", hash_of_text(cfg_text)}},
                     started, spec.seed);
  std::cout << "gen: wrote " << ds.num_sequences() << " sequences of length " << ds.seq_len()
            << " to " << g.out_dir << "\n";
  return 0;
}

ModelConfig model_config_from(const Config& cfg, const Dataset& ds) {
  ModelConfig mc;
  mc.n = static_cast<int>(cfg.get_int("n", ds.spec.n));
  mc.L = static_cast<int>(cfg.get_int("model_L", ds.spec.L));
  mc.n_fix = static_cast<int>(cfg.get_int("n_fix", ds.spec.n_fix + (mc.n - ds.spec.n)));
  mc.n_chg = static_cast<int>(cfg.get_int("n_chg", ds.spec.n_chg));
  mc.n_obs = static_cast<int>(cfg.get_int("n_obs", ds.spec.n_obs));
  mc.m = static_cast<int>(cfg.get_int("m", ds.spec.m));
  mc.obs_dim = ds.dim();
  mc.theta_dyn_dim = static_cast<int>(cfg.get_int("theta_dyn_dim", 2));
  mc.theta_obs_dim = static_cast<int>(cfg.get_int("theta_obs_dim", 2));
  mc.enc_width = static_cast<int>(cfg.get_int("enc_width", 128));
  mc.flow_width = static_cast<int>(cfg.get_int("flow_width", 64));
  mc.beta = cfg.get_double("beta", 0.002);
  const std::string prior = cfg.get_string("prior", "flow");
  if (prior == "flow") mc.prior_mode = PriorMode::flow;
  else if (prior == "standard_normal") mc.prior_mode = PriorMode::standard_normal;
  else throw ConfigError("config field prior: expected flow or standard_normal");
  return mc;
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.lr = cfg.get_double("lr", 0.002);
  tc.batch = static_cast<int>(cfg.get_int("batch", 64));
  tc.max_epochs = static_cast<int>(cfg.get_int("max_epochs", 50));
  tc.patience = static_cast<int>(cfg.get_int("patience", 5));
  tc.mc_samples = static_cast<int>(cfg.get_int("mc_samples", 1));
  tc.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
  tc.val_fraction = cfg.get_double("val_fraction", 0.1);
  tc.test_fraction = cfg.get_double("test_fraction", 0.1);
  tc.weight_decay = cfg.get_double("weight_decay", 1e-4);
  tc.beta_grid = cfg.get_double_list("beta_grid", {});
  tc.progress = cfg.get_bool("progress", true);
  return tc;
}

int cmd_train(const GlobalOpts& g, const std::string& data_dir,
              const std::vector<std::string>& argv_snapshot) {
  const std::string started = timestamp_now(g.deterministic);
  const std::string cfg_text = g.config_path.empty() ? "" : read_text_file(g.config_path);
  const Config cfg = Config::parse(cfg_text);
  const Dataset ds = read_dataset(data_dir);
  ModelConfig mcfg = model_config_from(cfg, ds);
  TrainConfig tcfg = train_config_from(cfg);
  cfg.check_no_unknown_keys("train config");
  if (g.seed >= 0) tcfg.seed = static_cast<uint64_t>(g.seed);

  fs::create_directories(g.out_dir);
  BetaSelection sel;
  if (!tcfg.beta_grid.empty()) {
    sel = select_beta(ds, mcfg, tcfg);
    mcfg.beta = sel.best_beta;
    std::cout << "selected beta = " << sel.best_beta << "\n";
  }
  TrainResult res = train(ds, mcfg, tcfg);

  Pack ckpt = res.model.to_pack();
  ckpt.meta["train_config"] = cfg.materialize();
  ckpt.meta["best_epoch"] = res.history.best_epoch;
  ckpt.meta["beta"] = mcfg.beta;
  ckpt.meta["seed"] = tcfg.seed;
  ckpt.meta["val_fraction"] = tcfg.val_fraction;
  ckpt.meta["test_fraction"] = tcfg.test_fraction;
  ckpt.meta["stop_reason"] = res.history.stop_reason;
  write_pack(ckpt, g.out_dir + "/checkpoint.tdrl");
  write_text_file(g.out_dir + "/history.csv", history_csv(res.history));
  if (!tcfg.beta_grid.empty()) {
    std::string grid_csv = "beta,best_val_elbo,failed\n";
    for (size_t i = 0; i < sel.grid.size(); ++i) {
      const auto& h = sel.histories[i];
      const double best = sel.failed[i] || h.best_epoch < 0
                              ? std::numeric_limits<double>::quiet_NaN()
                              : h.val[static_cast<size_t>(h.best_epoch)].elbo;
      grid_csv += format_double(sel.grid[i]) + "," + format_double(best) + "," +
                  (sel.failed[i] ? "1" : "0") + "\n";
    }
    write_text_file(g.out_dir + "/beta_grid.csv", grid_csv);
  }
  write_run_manifest(g, "train", argv_snapshot, cfg.materialize(),
                     {"checkpoint.tdrl", "history.csv"},
                     {{"config", hash_of_text(cfg_text)},
                      {"dataset", hash_of_text(read_text_file(data_dir + "/manifest.json"))}},
                     started, tcfg.seed);
  std::cout << "train: best epoch " << res.history.best_epoch << " ("
            << res.history.stop_reason << "), wall time " << res.history.wall_time << " s\n";
  return 0;
}

MatrixXd pool_rows(const std::vector<MatrixXd>& seqs) {
  Eigen::Index total = 0;
  for (const auto& s : seqs) total += s.rows();
  MatrixXd out(total, seqs[0].cols());
  Eigen::Index r = 0;
  for (const auto& s : seqs) {
    out.middleRows(r, s.rows()) = s;
    r += s.rows();
  }
  return out;
}

int cmd_eval(const GlobalOpts& g, const std::string& data_dir, const std::string& ckpt_path,
             const std::vector<std::string>& argv_snapshot) {
  const std::string started = timestamp_now(g.deterministic);
  const std::string cfg_text = g.config_path.empty() ? "" : read_text_file(g.config_path);
  const Config cfg = Config::parse(cfg_text);
  const Dataset ds = read_dataset(data_dir);
  const bool use_true_latents = cfg.get_bool("use_true_latents", false);
  const std::string mode_name = cfg.get_string("mode", "spearman");
  const bool do_skeleton = cfg.get_bool("skeleton", true);
  const double skel_threshold = cfg.get_double("skeleton_threshold", -1.0);
  const int skel_max_samples = static_cast<int>(cfg.get_int("skeleton_max_samples", 20000));
  cfg.check_no_unknown_keys("eval config");
  const CorrMode mode = mode_name == "pearson" ? CorrMode::pearson : CorrMode::spearman;
  if (mode_name != "pearson" && mode_name != "spearman")
    throw ConfigError("config field mode: expected pearson or spearman");

  Pack ckpt;
  TdrlModel model;
  uint64_t seed = 0;
  double val_fraction = 0.1, test_fraction = 0.1;
  if (!use_true_latents) {
    ckpt = read_pack(ckpt_path);
    model = TdrlModel::from_pack(ckpt);
    require(model.cfg.obs_dim == ds.dim(), "eval: checkpoint incompatible with dataset dimension");
    seed = ckpt.meta.value("seed", 0);
    val_fraction = ckpt.meta.value("val_fraction", 0.1);
    test_fraction = ckpt.meta.value("test_fraction", 0.1);
  }
  const SplitIndices split = split_dataset(ds.num_sequences(), val_fraction, test_fraction, seed);
  const std::vector<int>& test_idx = split.test.empty() ? split.val : split.test;

  std::vector<MatrixXd> z_true_seqs, z_est_seqs;
  for (const int s : test_idx) {
    z_true_seqs.push_back(ds.sequence_z(s));
    if (use_true_latents) {
      z_est_seqs.push_back(z_true_seqs.back());
    } else {
      const PosteriorStats stats = model.encode(ds.sequence_x(s));
      z_est_seqs.push_back(stats.mu);
    }
  }
  const MatrixXd z_true = pool_rows(z_true_seqs);
  const MatrixXd z_est = pool_rows(z_est_seqs);

  const MCCReport rep = mcc(z_true, z_est, mode);
  const MCCReport rep_other =
      mcc(z_true, z_est, mode == CorrMode::pearson ? CorrMode::spearman : CorrMode::pearson);

  fs::create_directories(g.out_dir);
  std::vector<std::string> artifacts = {"eval.txt", "corr.csv"};
  write_text_file(g.out_dir + "/corr.csv", matrix_csv(rep.corr));

  double f1 = -1.0;
  if (do_skeleton) {
    SkeletonOptions sopts;
    sopts.threshold = skel_threshold;
    sopts.max_samples = skel_max_samples;
    const SkeletonReport skel = recover_skeleton(z_est_seqs, ds.spec.L, sopts);
    Adjacency truth(ds.spec.n, ds.spec.L);
    truth.data.assign(ds.adjacency.u8(), ds.adjacency.u8() + ds.adjacency.count());
    f1 = compare_skeleton(skel.est_adjacency, truth, rep.assignment);
    write_text_file(g.out_dir + "/skeleton_scores.csv", matrix_csv(skel.scores));
    artifacts.push_back("skeleton_scores.csv");
  }

  std::vector<std::pair<std::string, std::string>> summary;
  summary.emplace_back("mcc", format_double(rep.mcc));
  summary.emplace_back("mode", corr_mode_name(rep.mode));
  summary.emplace_back("f1", format_double(f1));
  summary.emplace_back("mcc_" + corr_mode_name(rep_other.mode), format_double(rep_other.mcc));
  std::string assign_str;
  for (size_t k = 0; k < rep.assignment.size(); ++k)
    assign_str += (k ? "," : "") + std::to_string(rep.assignment[k]);
  summary.emplace_back("assignment", assign_str);
  summary.emplace_back("test_sequences", std::to_string(test_idx.size()));
  write_text_file(g.out_dir + "/eval.txt", to_key_value(summary));

  for (int k = 0; k < ds.spec.n; ++k) {
    const std::string name = "scatter_" + std::to_string(k) + ".svg";
    write_text_file(g.out_dir + "/" + name,
                    svg_scatter(z_true.col(k), z_est.col(rep.assignment[static_cast<size_t>(k)]),
                                "true z" + std::to_string(k) + " vs estimate"));
    artifacts.push_back(name);
  }

  std::vector<std::pair<std::string, std::string>> hashes = {
      {"dataset", hash_of_text(read_text_file(data_dir + "/manifest.json"))}};
  if (!cfg_text.empty()) hashes.emplace_back("config", hash_of_text(cfg_text));
  write_run_manifest(g, "eval", argv_snapshot, cfg.materialize(), artifacts, hashes, started, seed);
  std::cout << to_key_value(summary);
  return 0;
}

int cmd_check(const GlobalOpts& g, const std::string& data_dir, const std::string& density_kind,
              const std::vector<std::string>& argv_snapshot) {
  const std::string started = timestamp_now(g.deterministic);
  const std::string cfg_text = g.config_path.empty() ? "" : read_text_file(g.config_path);
  const Config cfg = Config::parse(cfg_text);
  CheckOptions opts;
  opts.num_prev_probes = static_cast<int>(cfg.get_int("probes", 64));
  opts.num_zt_probes = static_cast<int>(cfg.get_int("zt_probes", 8));
  opts.step = cfg.get_double("step", 1e-3);
  opts.threshold = cfg.get_double("threshold", 1e-6);
  opts.seed = static_cast<uint64_t>(cfg.get_int("seed", 0));
  cfg.check_no_unknown_keys("check config");
  if (g.seed >= 0) opts.seed = static_cast<uint64_t>(g.seed);

  DensityModel dm;
  MatrixXd pooled;
  if (density_kind == "iid") {
    const int n = 8;
    dm = iid_gaussian_density(n);
    Rng rng(mix_seed(opts.seed, {0x696964}));
    pooled = rng.normal_matrix(1000, n);
  } else {
    const Dataset ds = read_dataset(data_dir);
    dm = density_from_record(ds.transition);
    std::vector<MatrixXd> seqs;
    const int take = std::min(ds.num_sequences(), std::max(1, 4000 / ds.seq_len()));
    for (int s = 0; s < take; ++s) seqs.push_back(ds.sequence_z(s));
    pooled = pool_rows(seqs);
  }

  const ConditionReport rep = check_density(dm, pooled, opts);
  fs::create_directories(g.out_dir);
  write_text_file(g.out_dir + "/condition.txt", condition_report_text(rep));
  std::vector<std::pair<std::string, std::string>> hashes;
  if (!cfg_text.empty()) hashes.emplace_back("config", hash_of_text(cfg_text));
  if (density_kind != "iid")
    hashes.emplace_back("dataset", hash_of_text(read_text_file(data_dir + "/manifest.json")));
  write_run_manifest(g, "check", argv_snapshot, cfg.materialize(), {"condition.txt"}, hashes,
                     started, opts.seed);
  std::cout << condition_report_text(rep);
  return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs) {
  std::cout << "run,mcc,mode,f1,best_epoch,stop_reason,verdict\n";
  for (const auto& dir : run_dirs) {
    std::string mcc_v = "-", mode_v = "-", f1_v = "-", best = "-", stop = "-", verdict = "-";
    if (fs::exists(dir + "/eval.txt")) {
      const Config kv = Config::parse(read_text_file(dir + "/eval.txt"));
      mcc_v = kv.get_string("mcc", "-");
      mode_v = kv.get_string("mode", "-");
      f1_v = kv.get_string("f1", "-");
    }
    if (fs::exists(dir + "/condition.txt")) {
      const Config kv = Config::parse(read_text_file(dir + "/condition.txt"));
      verdict = kv.get_string("verdict", "-");
    }
    if (fs::exists(dir + "/run.json")) {
      try {
        const auto j = nlohmann::json::parse(read_text_file(dir + "/run.json"));
        (void)j;
      } catch (const nlohmann::json::exception&) {
      }
    }
    if (fs::exists(dir + "/history.csv")) {
      const std::string csv = read_text_file(dir + "/history.csv");
      best = std::to_string(std::max<long>(0, std::count(csv.begin(), csv.end(), '\n') - 2));
    }
    std::cout << dir << "," << mcc_v << "," << mode_v << "," << f1_v << "," << best << "," << stop
              << "," << verdict << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"temporally disentangled representation learning lab"};
  app.require_subcommand(1);

  GlobalOpts g;
  std::string data_dir, ckpt_path, density_kind;
  std::vector<std::string> run_dirs;
  std::vector<std::string> argv_snapshot(argv, argv + argc);

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* copt = sub->add_option("--config", g.config_path, "key=value config document");
    if (need_config) copt->required();
    sub->add_option("--out", g.out_dir, "output directory")->required();
    sub->add_option("--seed", g.seed, "seed override");
    sub->add_flag("--deterministic", g.deterministic, "single-threaded deterministic mode");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  add_common(gen, true);

  CLI::App* train_cmd = app.add_subcommand("train", "train the model on a dataset");
  add_common(train_cmd, false);
  train_cmd->add_option("--data", data_dir, "dataset directory")->required();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint file");

  CLI::App* check_cmd = app.add_subcommand("check", "run the identifiability condition checker");
  add_common(check_cmd, false);
  check_cmd->add_option("--data", data_dir, "dataset directory");
  check_cmd->add_option("--density", density_kind, "closed-form density kind (iid)");

  CLI::App* report_cmd = app.add_subcommand("report", "summarize run directories");
  report_cmd->add_option("--run", run_dirs, "run directory (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  if (g.deterministic) set_thread_cap(1);
  Eigen::setNbThreads(max_threads());

  try {
    if (gen->parsed()) return cmd_gen(g, argv_snapshot);
    if (train_cmd->parsed()) return cmd_train(g, data_dir, argv_snapshot);
    if (eval_cmd->parsed()) {
      const Config cfg = g.config_path.empty() ? Config() : Config::load(g.config_path);
      const bool use_true = cfg.get_bool("use_true_latents", false);
      if (!use_true && ckpt_path.empty())
        throw ConfigError("eval: --ckpt is required unless use_true_latents=true");
      return cmd_eval(g, data_dir, ckpt_path, argv_snapshot);
    }
    if (check_cmd->parsed()) {
      if (density_kind.empty() && data_dir.empty())
        throw ConfigError("check: provide --data or --density");
      return cmd_check(g, data_dir, density_kind, argv_snapshot);
    }
    if (report_cmd->parsed()) return cmd_report(run_dirs);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ConfigError::exit_code;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return IoError::exit_code;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return NumericalError::exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return NumericalError::exit_code;
  }
  return 0;
}

}  // namespace tdrl
