// Command-line driver: staged pipeline (gen-data, train-victim, attack,
// train-knockoff, evaluate) plus grid sweeps. Every subcommand takes an
// optional config file and repeated key=value overrides; artifacts live under
// --out-dir with fixed names so stages can be rerun independently. Any stage
// recomputes missing inputs from the config (and persists them), which is
// byte-equivalent to running the earlier stages thanks to named seed streams.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "knockoff/config.hpp"
#include "knockoff/report.hpp"
#include "knockoff/sweeps.hpp"

namespace {

using namespace knockoff;

constexpr const char* kVictimTrainFile = "victim_train.kds";
constexpr const char* kVictimTestFile = "victim_test.kds";
constexpr const char* kPoolFile = "pool.kds";
constexpr const char* kHierarchyFile = "hierarchy.json";
constexpr const char* kVictimModelFile = "victim.kmd";
constexpr const char* kTransferFile = "transfer.kds";
constexpr const char* kKnockoffModelFile = "knockoff.kmd";
constexpr const char* kSweepFile = "sweep.csv";
constexpr const char* kEvaluationFile = "evaluation.json";

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("config", args.config_path, "config file (key = value lines)")
      ->check(CLI::ExistingFile);
  sub->add_option("--set,-s", args.overrides, "config override key=value (repeatable)");
  sub->add_option("--out-dir,-o", args.out_dir, "artifact directory")->capture_default_str();
  sub->add_option("--seed", args.seed, "override the global seed");
  sub->add_option("--jobs,-j", args.jobs, "worker threads for sweeps")->capture_default_str();
}

ConfigFile resolve_config(const CommonArgs& args) {
  ConfigFile cfg = args.config_path.empty() ? ConfigFile{} : load_config(args.config_path);
  for (const auto& ov : args.overrides) apply_override(cfg, ov);
  if (args.seed) cfg.experiment.seed = *args.seed;
  return cfg;
}

std::string path_in(const CommonArgs& args, const char* name) {
  return args.out_dir + "/" + name;
}

bool exists(const std::string& path) { return std::filesystem::exists(path); }

void ensure_out_dir(const CommonArgs& args) {
  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);
  if (ec) throw IoError(args.out_dir + ": cannot create output directory");
}

// Artifact cache: each getter loads the file when present, otherwise computes
// from the config and saves. All computation runs off named seed streams, so
// a recomputed artifact is bit-identical to one produced by an earlier stage.
struct Stage {
  const CommonArgs& args;
  ConfigFile cfg;

  std::optional<TrainTestSplit> split_;
  std::optional<PoolBundle> bundle_;
  std::optional<MlpModel> victim_;

  explicit Stage(const CommonArgs& a) : args(a), cfg(resolve_config(a)) { ensure_out_dir(a); }

  const ExperimentConfig& exp() const { return cfg.experiment; }

  TrainTestSplit& split() {
    if (!split_) {
      std::string train_path = path_in(args, kVictimTrainFile);
      std::string test_path = path_in(args, kVictimTestFile);
      if (exists(train_path) && exists(test_path)) {
        split_ = TrainTestSplit{load_dataset(train_path), load_dataset(test_path)};
      } else {
        split_ = gen_synthetic(victim_spec(exp()));
        save_dataset(split_->train, train_path);
        save_dataset(split_->test, test_path);
      }
    }
    return *split_;
  }

  PoolBundle& bundle() {
    if (!bundle_) {
      std::string pool_path = path_in(args, kPoolFile);
      std::string hier_path = path_in(args, kHierarchyFile);
      if (exists(pool_path) && exists(hier_path)) {
        bundle_ = PoolBundle{load_pool(pool_path), load_hierarchy(hier_path)};
      } else {
        bundle_ = build_pool(exp(), split().train);
        if (exp().overlap_filter)
          bundle_->pool = semi_open_filter(bundle_->pool, split().train, exp().overlap, exp().seed);
        save_pool(bundle_->pool, exp().k, pool_path);
        save_hierarchy(bundle_->hierarchy, hier_path);
      }
    }
    return *bundle_;
  }

  MlpModel& victim() {
    if (!victim_) {
      std::string path = path_in(args, kVictimModelFile);
      if (exists(path)) {
        victim_ = load_model(path);
      } else {
        victim_ = build_victim(exp(), split().train);
        save_model(*victim_, path);
      }
    }
    return *victim_;
  }

  double victim_top1() { return top1_accuracy(victim(), split().test); }
};

int cmd_gen_data(const CommonArgs& args) {
  Stage st(args);
  // force regeneration: this stage owns these artifacts
  for (const char* f : {kVictimTrainFile, kVictimTestFile, kPoolFile, kHierarchyFile})
    std::filesystem::remove(path_in(args, f));
  auto& split = st.split();
  auto& bundle = st.bundle();
  std::printf("victim train %zu, test %zu, pool %zu samples over %zu labels\n",
              split.train.samples.size(), split.test.samples.size(), bundle.pool.samples.size(),
              bundle.pool.n_z());
  std::printf("label overlap %.4g%%\n",
              label_overlap(split.train.class_names, bundle.pool.z_names));
  return 0;
}

int cmd_train_victim(const CommonArgs& args) {
  Stage st(args);
  std::filesystem::remove(path_in(args, kVictimModelFile));
  st.victim();
  std::printf("victim top1 %.4f on %zu test samples\n", st.victim_top1(),
              st.split().test.samples.size());
  return 0;
}

int cmd_attack(const CommonArgs& args) {
  Stage st(args);
  const auto& e = st.exp();
  VictimBlackbox bb(st.victim(), e.defense);
  double vt = st.victim_top1();
  AttackReport rep =
      run_attack(st.bundle().pool, st.bundle().hierarchy, bb, st.split().test, vt, e.attack, e.seed);

  save_transfer(rep.transfer, path_in(args, kTransferFile));
  save_model(rep.final_model, path_in(args, kKnockoffModelFile));
  emit_results(rep, st.split().test, args.out_dir);

  std::printf("%s attack, defense %s: %zu queries, knockoff top1 %.4f (%.4fx of victim %.4f)\n",
              format_strategy(rep.strategy).c_str(), format_defense(rep.defense).c_str(),
              rep.query_count, rep.final_top1, vt > 0.0 ? rep.final_top1 / vt : 0.0, vt);
  if (rep.exhausted_early) std::printf("pool exhausted before the budget was spent\n");
  std::printf("wall time %.2fs\n", rep.wall_time_sec);
  return 0;
}

int cmd_train_knockoff(const CommonArgs& args) {
  Stage st(args);
  std::string transfer_path = path_in(args, kTransferFile);
  if (!exists(transfer_path))
    throw IoError(transfer_path + ": no transfer set; run the attack subcommand first");
  TransferSet transfer = load_transfer(transfer_path);

  const auto& e = st.exp();
  Rng rng(e.seed, "offline/retrain");
  MlpModel m = train_knockoff_offline(transfer, e.attack.knockoff_hidden, e.attack.offline, rng);
  save_model(m, path_in(args, kKnockoffModelFile));

  double top1 = top1_accuracy(m, st.split().test);
  double vt = st.victim_top1();
  std::printf("retrained knockoff on %zu transfer samples: top1 %.4f (%.4fx)\n",
              transfer.entries.size(), top1, vt > 0.0 ? top1 / vt : 0.0);
  return 0;
}

int cmd_evaluate(const CommonArgs& args) {
  Stage st(args);
  std::string model_path = path_in(args, kKnockoffModelFile);
  if (!exists(model_path))
    throw IoError(model_path + ": no knockoff model; run attack or train-knockoff first");
  MlpModel knockoff = load_model(model_path);

  const Dataset& test = st.split().test;
  double top1 = top1_accuracy(knockoff, test);
  double vt = st.victim_top1();
  PerClassStats per_class = per_class_stats(knockoff, test);

  nlohmann::ordered_json j;
  j["knockoff_top1"] = top1;
  j["victim_top1"] = vt;
  j["relative"] = vt > 0.0 ? top1 / vt : 0.0;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < per_class.total.size(); ++c) {
    nlohmann::ordered_json row;
    row["class"] = c;
    row["name"] = test.class_names[c];
    row["accuracy"] = per_class.accuracy(c);
    classes.push_back(std::move(row));
  }
  j["per_class"] = std::move(classes);

  std::string transfer_path = path_in(args, kTransferFile);
  if (exists(transfer_path)) {
    auto groups = seen_unseen_report(knockoff, test, load_transfer(transfer_path));
    nlohmann::ordered_json su;
    if (groups.seen) {
      su["seen"]["n_classes"] = groups.seen->n_classes;
      su["seen"]["mean_per_class_accuracy"] = groups.seen->mean_per_class_accuracy;
    }
    if (groups.unseen) {
      su["unseen"]["n_classes"] = groups.unseen->n_classes;
      su["unseen"]["mean_per_class_accuracy"] = groups.unseen->mean_per_class_accuracy;
    }
    j["coverage"] = std::move(su);
  }

  std::string body = j.dump(2) + "\n";
  io::write_text_file(path_in(args, kEvaluationFile), body);
  std::fputs(body.c_str(), stdout);
  return 0;
}

std::string member_dir_name(const std::string& label) {
  std::string out;
  for (char c : label)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_') ? c : '_';
  return out;
}

int cmd_sweep(const CommonArgs& args) {
  Stage st(args);
  PreparedRun base = prepare_for_sweep(st.cfg);
  SweepResult res = run_sweep(st.cfg, base, args.jobs);

  io::write_text_file(path_in(args, kSweepFile), sweep_csv(res.rows));
  for (std::size_t i = 0; i < res.reports.size(); ++i) {
    if (res.reports[i].curve.empty()) continue;
    emit_results(res.reports[i], base.test,
                 args.out_dir + "/members/" + member_dir_name(res.rows[i].label));
  }
  std::printf("%s sweep, %zu members (victim top1 %.4f):\n",
              format_sweep_kind(st.cfg.sweep.kind).c_str(), res.rows.size(), base.victim_top1);
  for (const auto& row : res.rows)
    std::printf("  %-28s top1 %.4f  relative %.4f\n", row.label.c_str(), row.final_top1,
                row.relative);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model-stealing testbed: train a victim, query it, fit a knockoff"};
  app.require_subcommand(1);

  CommonArgs args;
  int (*selected)(const CommonArgs&) = nullptr;
  auto reg = [&](const char* name, const char* desc, int (*fn)(const CommonArgs&)) {
    CLI::App* sub = app.add_subcommand(name, desc);
    add_common(sub, args);
    sub->callback([&selected, fn]() { selected = fn; });
  };
  reg("gen-data", "generate victim datasets, query pool, and label hierarchy", cmd_gen_data);
  reg("train-victim", "train and persist the victim model", cmd_train_victim);
  reg("attack", "build a transfer set against the victim and train a knockoff", cmd_attack);
  reg("train-knockoff", "retrain a knockoff offline from a saved transfer set", cmd_train_knockoff);
  reg("evaluate", "score a saved knockoff against the victim test set", cmd_evaluate);
  reg("sweep", "run a defense, capacity, or overlap grid", cmd_sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // usage problems are config errors
  }

  try {
    return selected(args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
