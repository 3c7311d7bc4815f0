#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "knockoff/attack.hpp"
#include "knockoff/io.hpp"
#include "knockoff/metrics.hpp"

namespace knockoff {

// all emitted reals go through one formatter so files are byte-stable
inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string curve_csv(const AttackReport& rep) {
  std::string out = "budget,top1,relative,strategy,defense,seed\n";
  for (const auto& pt : rep.curve) {
    out += std::to_string(pt.budget);
    out += ',';
    out += format_real(pt.top1);
    out += ',';
    out += format_real(pt.relative);
    out += ',';
    out += format_strategy(rep.strategy);
    out += ',';
    out += format_defense(rep.defense);
    out += ',';
    out += std::to_string(rep.seed);
    out += '\n';
  }
  return out;
}

inline std::string policy_snapshot_tsv(const std::vector<PolicySnapshotRow>& rows) {
  std::string out = "z\tname\tpi\tvisits\n";
  for (const auto& r : rows) {
    out += std::to_string(r.z);
    out += '\t';
    out += r.name;
    out += '\t';
    out += format_real(r.pi);
    out += '\t';
    out += std::to_string(r.visits);
    out += '\n';
  }
  return out;
}

struct GroupStats {
  std::size_t n_classes = 0;
  double mean_per_class_accuracy = 0.0;
};

// Classes whose pseudo-label (blackbox argmax) appeared in the transfer set
// versus those that never did. An empty group is absent, never reported as a
// zero.
struct SeenUnseenReport {
  std::optional<GroupStats> seen;
  std::optional<GroupStats> unseen;
};

inline SeenUnseenReport seen_unseen_report(const MlpModel& model, const Dataset& test,
                                           const TransferSet& transfer) {
  PerClassStats stats = per_class_stats(model, test);
  std::vector<char> seen(test.k, 0);
  for (const auto& e : transfer.entries) seen[static_cast<std::size_t>(argmax_index(e.target))] = 1;

  GroupStats s, u;
  double s_acc = 0.0, u_acc = 0.0;
  for (std::size_t c = 0; c < test.k; ++c) {
    if (seen[c]) {
      s.n_classes += 1;
      s_acc += stats.accuracy(c);
    } else {
      u.n_classes += 1;
      u_acc += stats.accuracy(c);
    }
  }
  SeenUnseenReport rep;
  if (s.n_classes > 0) {
    s.mean_per_class_accuracy = s_acc / static_cast<double>(s.n_classes);
    rep.seen = s;
  }
  if (u.n_classes > 0) {
    u.mean_per_class_accuracy = u_acc / static_cast<double>(u.n_classes);
    rep.unseen = u;
  }
  return rep;
}

// Summary holds everything except the curve (curve.csv) and the policy state
// (policy_snapshot.tsv). Wall time stays out: emitted files must be
// byte-identical across reruns of the same config.
inline std::string summary_json(const AttackReport& rep, const SeenUnseenReport& groups) {
  nlohmann::ordered_json j;
  j["strategy"] = format_strategy(rep.strategy);
  j["defense"] = format_defense(rep.defense);
  j["seed"] = rep.seed;
  j["query_count"] = rep.query_count;
  j["exhausted_early"] = rep.exhausted_early;
  j["victim_top1"] = rep.victim_top1;
  j["final_top1"] = rep.final_top1;
  j["final_relative"] = rep.victim_top1 > 0.0 ? rep.final_top1 / rep.victim_top1 : 0.0;

  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < rep.per_class.total.size(); ++c) {
    nlohmann::ordered_json row;
    row["class"] = c;
    row["accuracy"] = rep.per_class.accuracy(c);
    row["seen"] = c < rep.class_seen.size() && rep.class_seen[c] != 0;
    classes.push_back(std::move(row));
  }
  j["per_class"] = std::move(classes);

  auto group = [](const std::optional<GroupStats>& g) {
    nlohmann::ordered_json out;
    if (g) {
      out["n_classes"] = g->n_classes;
      out["mean_per_class_accuracy"] = g->mean_per_class_accuracy;
    }
    return out;  // empty object when the group is absent
  };
  nlohmann::ordered_json su;
  if (groups.seen) su["seen"] = group(groups.seen);
  if (groups.unseen) su["unseen"] = group(groups.unseen);
  j["coverage"] = std::move(su);
  return j.dump(2) + "\n";
}

// curve.csv + summary.json + policy_snapshot.tsv under dir.
inline void emit_results(const AttackReport& rep, const Dataset& victim_test, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create output directory");
  auto groups = rep.curve.empty() ? SeenUnseenReport{}
                                  : seen_unseen_report(rep.final_model, victim_test, rep.transfer);
  io::write_text_file(dir + "/curve.csv", curve_csv(rep));
  io::write_text_file(dir + "/summary.json", summary_json(rep, groups));
  io::write_text_file(dir + "/policy_snapshot.tsv", policy_snapshot_tsv(rep.policy_snapshot));
}

struct SweepRow {
  std::string label;
  double final_top1 = 0.0;
  double relative = 0.0;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "member,final_top1,relative\n";
  for (const auto& r : rows) {
    out += r.label;
    out += ',';
    out += format_real(r.final_top1);
    out += ',';
    out += format_real(r.relative);
    out += '\n';
  }
  return out;
}

}  // namespace knockoff
