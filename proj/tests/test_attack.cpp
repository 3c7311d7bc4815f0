#include <gtest/gtest.h>

#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "knockoff/attack.hpp"
#include "knockoff/experiment.hpp"

namespace knockoff {
namespace {

std::string temp_path(const std::string& name) { return testing::TempDir() + name; }

// pool with n_z labels, count samples each, all features distinct
SamplePool toy_pool(std::size_t n_z, std::size_t count, std::size_t d_in = 3) {
  SamplePool p;
  p.d_in = d_in;
  for (std::size_t z = 0; z < n_z; ++z) p.z_names.push_back("z" + std::to_string(z));
  for (std::size_t z = 0; z < n_z; ++z) {
    for (std::size_t i = 0; i < count; ++i) {
      LabeledSample s;
      s.features.assign(d_in, 0.0);
      s.features[0] = static_cast<double>(z);
      s.features[1] = static_cast<double>(i) * 0.25;
      s.adversary_label = static_cast<std::uint32_t>(z);
      p.samples.push_back(std::move(s));
    }
  }
  return p;
}

VictimBlackbox uniform_blackbox(std::size_t d_in, std::size_t k,
                                DefensePolicy defense = DefensePolicy{}) {
  return VictimBlackbox(make_mlp({d_in, k}), defense);
}

std::multiset<std::vector<double>> feature_multiset(const std::vector<TransferEntry>& entries) {
  std::multiset<std::vector<double>> out;
  for (const auto& e : entries) out.insert(e.features);
  return out;
}

TEST(TransferFile, RoundTripIsExact) {
  TransferSet t;
  t.d_in = 4;
  t.k = 3;
  t.z_names = {"a", "b"};
  Rng rng(7, "transfer-test");
  for (std::size_t i = 0; i < 5; ++i) {
    TransferEntry e;
    for (std::size_t j = 0; j < 4; ++j) e.features.push_back(rng.gaussian());
    e.target = {rng.uniform01(), rng.uniform01(), rng.uniform01()};
    e.z = static_cast<std::uint32_t>(i % 2);
    e.step = i + 1;
    t.entries.push_back(std::move(e));
  }
  std::string path = temp_path("transfer_rt.kds");
  save_transfer(t, path);
  TransferSet r = load_transfer(path);

  EXPECT_EQ(r.d_in, t.d_in);
  EXPECT_EQ(r.k, t.k);
  EXPECT_EQ(r.z_names, t.z_names);
  ASSERT_EQ(r.entries.size(), t.entries.size());
  for (std::size_t i = 0; i < t.entries.size(); ++i) {
    EXPECT_EQ(r.entries[i].features, t.entries[i].features);
    EXPECT_EQ(r.entries[i].target, t.entries[i].target);
    EXPECT_EQ(r.entries[i].z, t.entries[i].z);
    EXPECT_EQ(r.entries[i].step, i + 1);
  }
  std::remove(path.c_str());
}

TEST(TransferFile, DatasetWithoutTargetsRejected) {
  auto pool = toy_pool(2, 3);
  std::string path = temp_path("transfer_nt.kds");
  save_pool(pool, 2, path);
  EXPECT_THROW(load_transfer(path), IoError);
  std::remove(path.c_str());
}

TEST(ConstructRandom, ZeroBudgetQueriesNothing) {
  auto pool = toy_pool(3, 5);
  auto bb = uniform_blackbox(3, 4);
  Rng rng(1, "attack");
  auto t = construct_random(pool, bb, 0, rng);
  EXPECT_TRUE(t.entries.empty());
  EXPECT_EQ(bb.query_count(), 0u);
  EXPECT_EQ(t.z_names, pool.z_names);
  EXPECT_EQ(t.k, 4u);
}

TEST(ConstructRandom, FullBudgetDrawsEverySampleOnce) {
  auto pool = toy_pool(4, 6);
  auto bb = uniform_blackbox(3, 2);
  Rng rng(3, "attack");
  auto t = construct_random(pool, bb, pool.samples.size(), rng);
  ASSERT_EQ(t.entries.size(), pool.samples.size());
  EXPECT_EQ(bb.query_count(), pool.samples.size());

  std::multiset<std::vector<double>> want;
  for (const auto& s : pool.samples) want.insert(s.features);
  EXPECT_EQ(feature_multiset(t.entries), want);
  for (std::size_t i = 0; i < t.entries.size(); ++i) EXPECT_EQ(t.entries[i].step, i + 1);
}

TEST(ConstructRandom, OverdraftThrows) {
  auto pool = toy_pool(2, 4);
  auto bb = uniform_blackbox(3, 2);
  Rng rng(3, "attack");
  EXPECT_THROW(construct_random(pool, bb, pool.samples.size() + 1, rng), PoolExhausted);
}

TEST(ConstructRandom, DeterministicWithPrefixProperty) {
  auto pool = toy_pool(5, 20);
  auto run = [&](std::size_t budget) {
    auto bb = uniform_blackbox(3, 4);
    Rng rng(11, "attack");
    return construct_random(pool, bb, budget, rng);
  };
  auto a = run(50);
  auto b = run(50);
  auto full = run(100);
  ASSERT_EQ(a.entries.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(a.entries[i].features, b.entries[i].features);
    EXPECT_EQ(a.entries[i].features, full.entries[i].features);
    EXPECT_EQ(a.entries[i].z, full.entries[i].z);
  }
}

TEST(ConstructAdaptive, SpendsExactBudgetWithBatchRemainder) {
  auto pool = toy_pool(2, 20);
  auto bb = uniform_blackbox(3, 4);
  PolicyTree tree = policy_flat(pool.z_names);
  AttackConfig cfg;
  cfg.budget = 10;
  cfg.batch_size = 4;
  RewardState rewards(cfg.rewards, 4);
  Rng rng(5, "attack");
  auto res = construct_adaptive(pool, bb, tree, rewards, cfg, rng);

  ASSERT_EQ(res.transfer.entries.size(), 10u);
  EXPECT_EQ(bb.query_count(), 10u);
  EXPECT_FALSE(res.transfer.exhausted_early);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(res.transfer.entries[i].step, i + 1);
  // distinct pool rows, so no sample may repeat
  std::set<std::vector<double>> uniq;
  for (const auto& e : res.transfer.entries) uniq.insert(e.features);
  EXPECT_EQ(uniq.size(), 10u);
}

TEST(ConstructAdaptive, ExhaustsEarlyWhenBudgetExceedsPool) {
  auto pool = toy_pool(3, 10);
  auto bb = uniform_blackbox(3, 2);
  PolicyTree tree = policy_flat(pool.z_names);
  AttackConfig cfg;
  cfg.budget = 50;
  cfg.batch_size = 4;
  RewardState rewards(cfg.rewards, 2);
  Rng rng(9, "attack");
  auto res = construct_adaptive(pool, bb, tree, rewards, cfg, rng);

  EXPECT_TRUE(res.transfer.exhausted_early);
  EXPECT_EQ(res.transfer.entries.size(), 30u);
  EXPECT_TRUE(all_masked(tree));

  std::multiset<std::vector<double>> want;
  for (const auto& s : pool.samples) want.insert(s.features);
  EXPECT_EQ(feature_multiset(res.transfer.entries), want);
}

TEST(ConstructAdaptive, EmptyLabelIsMaskedAndNeverDrawn) {
  auto pool = toy_pool(3, 8);
  // erase every sample of the middle label but keep its name
  std::vector<LabeledSample> kept;
  for (auto& s : pool.samples)
    if (s.adversary_label != 1) kept.push_back(std::move(s));
  pool.samples = std::move(kept);

  auto bb = uniform_blackbox(3, 2);
  PolicyTree tree = policy_flat(pool.z_names);
  AttackConfig cfg;
  cfg.budget = 16;
  cfg.batch_size = 4;
  RewardState rewards(cfg.rewards, 2);
  Rng rng(2, "attack");
  auto res = construct_adaptive(pool, bb, tree, rewards, cfg, rng);

  ASSERT_EQ(res.transfer.entries.size(), 16u);
  EXPECT_DOUBLE_EQ(leaf_probability(tree, 1), 0.0);
  for (const auto& e : res.transfer.entries) EXPECT_NE(e.z, 1u);
}

TEST(ConstructAdaptive, SingleLabelConsumesWholeBudget) {
  auto pool = toy_pool(1, 40);
  auto bb = uniform_blackbox(3, 2);
  PolicyTree tree = policy_flat(pool.z_names);
  AttackConfig cfg;
  cfg.budget = 40;
  cfg.batch_size = 7;
  RewardState rewards(cfg.rewards, 2);
  Rng rng(4, "attack");
  auto res = construct_adaptive(pool, bb, tree, rewards, cfg, rng);
  EXPECT_EQ(res.transfer.entries.size(), 40u);
  EXPECT_FALSE(res.transfer.exhausted_early);
}

TEST(ConstructAdaptive, PolicyMismatchRejected) {
  auto pool = toy_pool(3, 4);
  auto bb = uniform_blackbox(3, 2);
  PolicyTree tree = policy_flat({"only", "two"});
  AttackConfig cfg;
  cfg.budget = 4;
  RewardState rewards(cfg.rewards, 2);
  Rng rng(1, "attack");
  EXPECT_THROW(construct_adaptive(pool, bb, tree, rewards, cfg, rng), std::invalid_argument);
}

TEST(ValidateAttackConfig, CheckpointRules) {
  AttackConfig cfg;
  cfg.budget = 100;
  cfg.checkpoints = {10, 50, 100};
  EXPECT_NO_THROW(validate_attack_config(cfg, 200));

  cfg.checkpoints = {10, 10};
  EXPECT_THROW(validate_attack_config(cfg, 200), std::invalid_argument);
  cfg.checkpoints = {0, 50};
  EXPECT_THROW(validate_attack_config(cfg, 200), std::invalid_argument);
  cfg.checkpoints = {150};
  EXPECT_THROW(validate_attack_config(cfg, 200), std::invalid_argument);
  cfg.checkpoints.clear();
  EXPECT_THROW(validate_attack_config(cfg, 50), PoolExhausted);
  cfg.budget = 10;
  cfg.batch_size = 0;
  EXPECT_THROW(validate_attack_config(cfg, 50), std::invalid_argument);
}

TEST(TrainKnockoffOffline, EmptyTransferRejected) {
  TransferSet t;
  t.d_in = 3;
  t.k = 2;
  Rng rng(1, "offline");
  EXPECT_THROW(train_knockoff_offline(t, {8}, TrainConfig{}, rng), std::invalid_argument);
}

TEST(WarmStart, KeepsTrunkAndQueriesNothing) {
  auto pool = toy_pool(3, 10, 4);
  Rng rng(6, "warm");
  MlpModel m = warm_start_knockoff(pool, 5, {8}, 3, rng);
  EXPECT_EQ(m.input_dim(), 4u);
  EXPECT_EQ(m.output_dim(), 5u);
  ASSERT_EQ(m.layer_dims.size(), 3u);
  EXPECT_EQ(m.layer_dims[1], 8u);
  EXPECT_THROW(warm_start_knockoff(pool, 5, {}, 3, rng), std::invalid_argument);
}

// --- experiment builders ---------------------------------------------------

ExperimentConfig small_closed_config() {
  ExperimentConfig cfg;
  cfg.seed = 42;
  cfg.d_in = 16;
  cfg.k = 4;
  cfg.train_per_class = 30;
  cfg.test_per_class = 20;
  cfg.victim_hidden = {16};
  cfg.victim_train.epochs = 40;
  cfg.pool_kind = PoolKind::closed_world;
  cfg.pool_labels = 12;
  cfg.pool_size = 320;
  return cfg;
}

TEST(Experiment, VictimSpecPlacesClassesOnAxes) {
  auto cfg = small_closed_config();
  auto spec = victim_spec(cfg);
  EXPECT_EQ(spec.d_in, 16u);
  EXPECT_EQ(spec.k, 4u);
  ASSERT_EQ(spec.class_means.size(), 4u);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t j = 0; j < 16; ++j)
      EXPECT_DOUBLE_EQ(spec.class_means[c][j], j == c ? cfg.class_radius : 0.0);
  }
  EXPECT_EQ(spec.seed, substream_seed(42, "data"));

  cfg.k = 20;  // more classes than axes
  EXPECT_THROW(victim_spec(cfg), std::invalid_argument);
}

TEST(Experiment, MultiModalClassesClusterAroundTheirModes) {
  auto cfg = small_closed_config();
  cfg.modes_per_class = 3;
  cfg.sigma = 0.3;
  auto spec = victim_spec(cfg);
  EXPECT_TRUE(spec.class_means.empty());
  ASSERT_EQ(spec.class_modes.size(), cfg.k);
  for (const auto& modes : spec.class_modes) {
    ASSERT_EQ(modes.size(), 3u);
    for (const auto& m : modes) {
      double norm = 0.0;
      for (double v : m) norm += v * v;
      EXPECT_NEAR(std::sqrt(norm), cfg.class_radius, 1e-9);
    }
  }

  // every sample sits close to one of its own class's modes
  auto split = gen_synthetic(spec);
  for (const auto& s : split.train.samples) {
    double best = 1e300;
    for (const auto& m : spec.class_modes[static_cast<std::size_t>(s.victim_label)]) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < cfg.d_in; ++j)
        d2 += (s.features[j] - m[j]) * (s.features[j] - m[j]);
      best = std::min(best, d2);
    }
    // 16 dims at sigma 0.3: E[d2] = 1.44, generous ceiling
    EXPECT_LT(best, 16.0 * cfg.sigma * cfg.sigma);
  }

  // same seed, same world; different seed, different modes
  auto again = victim_spec(cfg);
  EXPECT_EQ(again.class_modes, spec.class_modes);
  cfg.seed = 43;
  EXPECT_NE(victim_spec(cfg).class_modes, spec.class_modes);

  cfg.modes_per_class = 0;
  EXPECT_THROW(victim_spec(cfg), std::invalid_argument);
}

TEST(Experiment, ClosedWorldPoolContainsVictimDataPlusWilds) {
  auto cfg = small_closed_config();
  auto split = gen_synthetic(victim_spec(cfg));
  auto bundle = build_pool(cfg, split.train);
  const auto& pool = bundle.pool;

  EXPECT_EQ(pool.n_z(), 12u);
  EXPECT_EQ(pool.samples.size(), 320u);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(pool.z_names[c], split.train.class_names[c]);
  EXPECT_NEAR(label_overlap(split.train.class_names, pool.z_names), 100.0, 1e-12);

  // victim rows come first, bitwise intact, ground truth stripped
  ASSERT_GE(pool.samples.size(), split.train.samples.size());
  for (std::size_t i = 0; i < split.train.samples.size(); ++i) {
    EXPECT_EQ(pool.samples[i].features, split.train.samples[i].features);
    EXPECT_EQ(pool.samples[i].victim_label, -1);
    EXPECT_EQ(pool.samples[i].adversary_label,
              static_cast<std::uint32_t>(split.train.samples[i].victim_label));
  }

  // 200 wild samples over 8 labels, split evenly
  std::vector<std::size_t> counts(pool.n_z(), 0);
  for (const auto& s : pool.samples) counts[s.adversary_label] += 1;
  for (std::size_t z = 4; z < 12; ++z) EXPECT_EQ(counts[z], 25u);

  EXPECT_NO_THROW(validate_hierarchy(bundle.hierarchy, pool.n_z()));
  // one coarse node per source: victim_data plus two wild groups of k labels
  ASSERT_EQ(bundle.hierarchy.root.children.size(), 3u);
  EXPECT_EQ(bundle.hierarchy.root.children[0].name, "victim_data");
  EXPECT_EQ(bundle.hierarchy.root.children[0].children.size(), 4u);
  EXPECT_EQ(bundle.hierarchy.root.children[1].children.size(), 4u);
  EXPECT_EQ(bundle.hierarchy.root.children[2].children.size(), 4u);
}

TEST(Experiment, ClosedWorldWildCentersAreOrthogonalToClasses) {
  auto cfg = small_closed_config();
  cfg.pool_size = 920;  // 800 wild draws, 100 per label
  cfg.train_per_class = 30;
  auto split = gen_synthetic(victim_spec(cfg));
  auto bundle = build_pool(cfg, split.train);

  // empirical wild means should sit near radius on a tail axis and near zero
  // on every class axis
  std::vector<std::vector<double>> mean(bundle.pool.n_z(), std::vector<double>(cfg.d_in, 0.0));
  std::vector<std::size_t> counts(bundle.pool.n_z(), 0);
  for (const auto& s : bundle.pool.samples) {
    counts[s.adversary_label] += 1;
    for (std::size_t j = 0; j < cfg.d_in; ++j) mean[s.adversary_label][j] += s.features[j];
  }
  // each wild center sits at wild_radius_scale * class_radius along tail
  // axes (a factor 1/sqrt(2) of that per axis for the diagonal directions)
  double wild_radius = cfg.class_radius * cfg.wild_radius_scale;
  for (std::size_t z = cfg.k; z < bundle.pool.n_z(); ++z) {
    ASSERT_EQ(counts[z], 100u);
    double class_axis_peak = 0.0;
    double tail_axis_peak = 0.0;
    for (std::size_t j = 0; j < cfg.d_in; ++j) {
      double m = std::abs(mean[z][j] / 100.0);
      if (j < cfg.k)
        class_axis_peak = std::max(class_axis_peak, m);
      else
        tail_axis_peak = std::max(tail_axis_peak, m);
    }
    EXPECT_LT(class_axis_peak, 0.35);  // sampling noise only
    EXPECT_GT(tail_axis_peak, wild_radius * 0.55);
  }
}

TEST(Experiment, ClosedWorldRejectsBadShapes) {
  auto cfg = small_closed_config();
  auto split = gen_synthetic(victim_spec(cfg));
  cfg.pool_labels = 4;  // no room for wild labels
  EXPECT_THROW(build_pool(cfg, split.train), std::invalid_argument);
  cfg.pool_labels = 12;
  cfg.pool_size = 100;  // smaller than the victim data alone
  EXPECT_THROW(build_pool(cfg, split.train), std::invalid_argument);
}

TEST(Experiment, OpenWorldPoolSharesNamesButNotData) {
  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.d_in = 32;
  cfg.k = 8;
  cfg.train_per_class = 20;
  cfg.test_per_class = 10;
  cfg.pool_kind = PoolKind::open_world;
  cfg.pool_labels = 8;
  cfg.pool_size = 160;
  cfg.analog_fraction = 0.25;
  cfg.n_coarse = 4;
  auto split = gen_synthetic(victim_spec(cfg));
  auto bundle = build_pool(cfg, split.train);
  const auto& pool = bundle.pool;

  EXPECT_EQ(pool.n_z(), 8u);
  EXPECT_EQ(pool.samples.size(), 160u);
  // 8 * 0.25 = 2 analog labels carrying real victim class names
  EXPECT_EQ(pool.z_names[0], split.train.class_names[0]);
  EXPECT_EQ(pool.z_names[1], split.train.class_names[1]);
  EXPECT_NEAR(label_overlap(split.train.class_names, pool.z_names), 25.0, 1e-12);

  // shared names, disjoint rows: no pool feature vector equals a train one
  std::set<std::vector<double>> train_rows;
  for (const auto& s : split.train.samples) train_rows.insert(s.features);
  for (const auto& s : pool.samples) EXPECT_EQ(train_rows.count(s.features), 0u);

  EXPECT_NO_THROW(validate_hierarchy(bundle.hierarchy, pool.n_z()));
  EXPECT_EQ(bundle.hierarchy.root.children.size(), 4u);
}

TEST(Experiment, VictimDataPoolMirrorsTrainingSet) {
  auto cfg = small_closed_config();
  cfg.pool_kind = PoolKind::victim_data;
  auto split = gen_synthetic(victim_spec(cfg));
  auto bundle = build_pool(cfg, split.train);
  EXPECT_EQ(bundle.pool.n_z(), cfg.k);
  EXPECT_EQ(bundle.pool.z_names, split.train.class_names);
  ASSERT_EQ(bundle.pool.samples.size(), split.train.samples.size());
  for (std::size_t i = 0; i < bundle.pool.samples.size(); ++i)
    EXPECT_EQ(bundle.pool.samples[i].features, split.train.samples[i].features);
}

TEST(Experiment, PoolBuildIsDeterministic) {
  auto cfg = small_closed_config();
  auto split = gen_synthetic(victim_spec(cfg));
  auto a = build_pool(cfg, split.train);
  auto b = build_pool(cfg, split.train);
  ASSERT_EQ(a.pool.samples.size(), b.pool.samples.size());
  for (std::size_t i = 0; i < a.pool.samples.size(); ++i)
    EXPECT_EQ(a.pool.samples[i].features, b.pool.samples[i].features);
}

// --- end-to-end attacks ----------------------------------------------------

struct PreparedExperiment {
  Dataset train, test;
  SamplePool pool;
  Hierarchy hierarchy;
  MlpModel victim;
  double victim_top1 = 0.0;
};

PreparedExperiment prepare(const ExperimentConfig& cfg) {
  PreparedExperiment p;
  auto split = gen_synthetic(victim_spec(cfg));
  p.train = std::move(split.train);
  p.test = std::move(split.test);
  auto bundle = build_pool(cfg, p.train);
  p.pool = std::move(bundle.pool);
  p.hierarchy = std::move(bundle.hierarchy);
  p.victim = build_victim(cfg, p.train);
  p.victim_top1 = top1_accuracy(p.victim, p.test);
  return p;
}

TEST(RunAttack, CurveEndsAtBudgetAndFinalModelMatches) {
  auto cfg = small_closed_config();
  auto p = prepare(cfg);
  ASSERT_GT(p.victim_top1, 0.8);

  AttackConfig atk;
  atk.strategy = Strategy::random;
  atk.budget = 200;
  atk.checkpoints = {50, 100};
  atk.knockoff_hidden = {16};
  atk.offline.epochs = 30;

  VictimBlackbox bb(p.victim, DefensePolicy{});
  auto rep = run_attack(p.pool, p.hierarchy, bb, p.test, p.victim_top1, atk, 3);

  ASSERT_EQ(rep.curve.size(), 3u);
  EXPECT_EQ(rep.curve[0].budget, 50u);
  EXPECT_EQ(rep.curve[1].budget, 100u);
  EXPECT_EQ(rep.curve[2].budget, 200u);
  EXPECT_EQ(rep.query_count, 200u);
  EXPECT_EQ(rep.transfer.entries.size(), 200u);
  EXPECT_DOUBLE_EQ(rep.final_top1, rep.curve.back().top1);
  for (const auto& pt : rep.curve)
    EXPECT_DOUBLE_EQ(pt.relative, pt.top1 / p.victim_top1);
  // the reported model really is the final retrain
  EXPECT_DOUBLE_EQ(top1_accuracy(rep.final_model, p.test), rep.final_top1);
  EXPECT_FALSE(rep.exhausted_early);
  EXPECT_TRUE(rep.policy_snapshot.empty());  // random strategy has no policy
  EXPECT_EQ(rep.per_class.total.size(), cfg.k);
}

TEST(RunAttack, DeterministicAcrossRuns) {
  auto cfg = small_closed_config();
  auto p = prepare(cfg);

  AttackConfig atk;
  atk.strategy = Strategy::adaptive;
  atk.budget = 120;
  atk.batch_size = 4;
  atk.knockoff_hidden = {16};
  atk.offline.epochs = 20;
  atk.rewards.signals = {RewardSignal::cert};

  auto run_once = [&]() {
    VictimBlackbox bb(p.victim, DefensePolicy{});
    return run_attack(p.pool, p.hierarchy, bb, p.test, p.victim_top1, atk, 17);
  };
  auto a = run_once();
  auto b = run_once();

  ASSERT_EQ(a.transfer.entries.size(), b.transfer.entries.size());
  for (std::size_t i = 0; i < a.transfer.entries.size(); ++i) {
    EXPECT_EQ(a.transfer.entries[i].features, b.transfer.entries[i].features);
    EXPECT_EQ(a.transfer.entries[i].target, b.transfer.entries[i].target);
    EXPECT_EQ(a.transfer.entries[i].z, b.transfer.entries[i].z);
  }
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i)
    EXPECT_DOUBLE_EQ(a.curve[i].top1, b.curve[i].top1);
  for (std::size_t l = 0; l < a.final_model.weights.size(); ++l)
    EXPECT_EQ(a.final_model.weights[l].data, b.final_model.weights[l].data);
  ASSERT_EQ(a.policy_snapshot.size(), b.policy_snapshot.size());
  for (std::size_t i = 0; i < a.policy_snapshot.size(); ++i) {
    EXPECT_DOUBLE_EQ(a.policy_snapshot[i].pi, b.policy_snapshot[i].pi);
    EXPECT_EQ(a.policy_snapshot[i].visits, b.policy_snapshot[i].visits);
  }
}

TEST(RunAttack, KnockoffDistillsVictimOnItsOwnData) {
  // transfer set drawn from the victim's own training data with undefended
  // posteriors: distillation should recover most of the victim's accuracy
  auto cfg = small_closed_config();
  cfg.pool_kind = PoolKind::victim_data;
  cfg.victim_train.epochs = 60;
  auto p = prepare(cfg);
  ASSERT_GT(p.victim_top1, 0.85);

  AttackConfig atk;
  atk.strategy = Strategy::random;
  atk.budget = p.pool.samples.size();
  atk.knockoff_hidden = {16};
  atk.offline.epochs = 60;

  VictimBlackbox bb(p.victim, DefensePolicy{});
  auto rep = run_attack(p.pool, p.hierarchy, bb, p.test, p.victim_top1, atk, 5);
  EXPECT_GE(rep.curve.back().relative, 0.85);
}

// closed world with enough victim-label stock that the rewarding arms cannot
// run dry inside the budget, so terminal probabilities reflect concentration
ExperimentConfig concentration_config() {
  auto cfg = small_closed_config();
  cfg.train_per_class = 100;  // 400 victim samples in the pool
  cfg.pool_size = 1040;       // plus 80 per wild label
  cfg.victim_train.epochs = 60;
  return cfg;
}

TEST(RunAttack, AdaptiveConcentratesOnVictimLabels) {
  // victim-class labels give confident posteriors, orthogonal wild labels
  // give flatter ones, so the cert reward should steer the policy toward the
  // victim labels
  auto cfg = concentration_config();
  auto p = prepare(cfg);
  ASSERT_GT(p.victim_top1, 0.8);

  AttackConfig atk;
  atk.strategy = Strategy::adaptive;
  atk.budget = 400;
  atk.batch_size = 4;
  atk.knockoff_hidden = {16};
  atk.offline.epochs = 20;
  atk.rewards.signals = {RewardSignal::cert};

  VictimBlackbox bb(p.victim, DefensePolicy{});
  auto rep = run_attack(p.pool, p.hierarchy, bb, p.test, p.victim_top1, atk, 21);

  ASSERT_EQ(rep.policy_snapshot.size(), p.pool.n_z());
  double victim_mass = 0.0;
  double total_mass = 0.0;
  for (const auto& row : rep.policy_snapshot) {
    total_mass += row.pi;
    if (row.z < cfg.k) victim_mass += row.pi;
  }
  EXPECT_NEAR(total_mass, 1.0, 1e-9);
  // uniform would be 4/12; demand a clear pull toward the victim's labels
  EXPECT_GT(victim_mass, 2.0 * 4.0 / 12.0);

  // draws skew the same way
  std::size_t victim_draws = 0;
  for (const auto& e : rep.transfer.entries)
    if (e.z < cfg.k) victim_draws += 1;
  EXPECT_GT(static_cast<double>(victim_draws) / 400.0, 1.5 * 4.0 / 12.0);
}

TEST(RunAttack, FlatBanditPrefersVictimArms) {
  // a flat policy is one big sibling group, so any arm's gain pushes every
  // other arm down, victim arms included; the stable signature of learning is
  // the per-arm preference of victim labels over wild labels, with stock deep
  // enough that no arm exhausts and gets masked mid-run
  auto cfg = concentration_config();
  cfg.train_per_class = 300;
  cfg.pool_size = 1840;
  auto p = prepare(cfg);

  AttackConfig atk;
  atk.strategy = Strategy::adaptive_flat;
  atk.budget = 600;
  atk.batch_size = 2;
  atk.knockoff_hidden = {16};
  atk.offline.epochs = 20;
  atk.rewards.signals = {RewardSignal::cert};

  VictimBlackbox bb(p.victim, DefensePolicy{});
  auto rep = run_attack(p.pool, p.hierarchy, bb, p.test, p.victim_top1, atk, 23);
  double victim_mass = 0.0;
  for (const auto& row : rep.policy_snapshot)
    if (row.z < cfg.k) victim_mass += row.pi;
  double mean_victim_pi = victim_mass / 4.0;
  double mean_wild_pi = (1.0 - victim_mass) / 8.0;
  EXPECT_GT(mean_victim_pi, 1.5 * mean_wild_pi);
}

TEST(RunAttack, MultiSignalRewardsRun) {
  auto cfg = small_closed_config();
  auto p = prepare(cfg);
  AttackConfig atk;
  atk.strategy = Strategy::adaptive;
  atk.budget = 80;
  atk.knockoff_hidden = {16};
  atk.offline.epochs = 10;
  atk.rewards.signals = {RewardSignal::cert, RewardSignal::div, RewardSignal::loss};
  VictimBlackbox bb(p.victim, DefensePolicy{});
  auto rep = run_attack(p.pool, p.hierarchy, bb, p.test, p.victim_top1, atk, 31);
  EXPECT_EQ(rep.query_count, 80u);
  EXPECT_EQ(rep.transfer.entries.size(), 80u);
}

TEST(RunExperiment, EndToEndWithOverlapFilterIdentity) {
  auto cfg = small_closed_config();
  cfg.attack.strategy = Strategy::random;
  cfg.attack.budget = 150;
  cfg.attack.knockoff_hidden = {16};
  cfg.attack.offline.epochs = 20;
  cfg.overlap_filter = true;
  cfg.overlap.tau_data = 1.0;
  cfg.overlap.tau_labels = 1.0;

  auto res = run_experiment(cfg);
  EXPECT_GT(res.victim_top1, 0.8);
  EXPECT_EQ(res.pool.samples.size(), cfg.pool_size);  // tau = 1 keeps everything
  EXPECT_EQ(res.report.query_count, 150u);
  EXPECT_GE(res.report.final_top1, 0.0);
  EXPECT_LE(res.report.final_top1, 1.0);
  EXPECT_EQ(res.report.curve.back().budget, 150u);
}

TEST(RunExperiment, DefendedVictimStillAnswersConsistently) {
  auto cfg = small_closed_config();
  cfg.defense = parse_defense("topk:2");
  cfg.attack.strategy = Strategy::random;
  cfg.attack.budget = 100;
  cfg.attack.knockoff_hidden = {16};
  cfg.attack.offline.epochs = 20;
  auto res = run_experiment(cfg);
  for (const auto& e : res.report.transfer.entries) {
    std::size_t nonzero = 0;
    for (double v : e.target)
      if (v != 0.0) nonzero += 1;
    EXPECT_LE(nonzero, 2u);
  }
}

}  // namespace
}  // namespace knockoff
