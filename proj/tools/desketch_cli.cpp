// Copyright 2026 The Desketch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "desketch/adversary.hpp"
#include "desketch/entropy.hpp"
#include "desketch/f0_sketch.hpp"
#include "desketch/fp_large.hpp"
#include "desketch/oracle.hpp"
#include "desketch/robust.hpp"
#include "desketch/sign_sketch.hpp"
#include "desketch/sliding.hpp"
#include "desketch/space.hpp"
#include "desketch/stable_sketch.hpp"
#include "json.hpp"

using json = nlohmann::json;
using namespace desketch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitCapacity = 3;
constexpr int kExitIo = 4;

struct RunConfig {
  std::string task;
  double p = 2.0;
  double eps = 0.1;
  double delta = 0.05;
  uint64_t window = 0;
  uint64_t universe = 1024;
  std::string seed_str = "1";
  std::string constants = "practical";
  std::string input;
  std::string generator;  // kind:params, e.g. zipf:1.1, uniform, bursty
  std::string out;
  int checkpoints = 20;
  size_t length = 10000;
  std::string adversary = "probe";

  json to_json() const {
    return json{{"task", task},         {"p", p},
                {"eps", eps},           {"delta", delta},
                {"window", window},     {"universe", universe},
                {"seed", seed_str},     {"constants", constants},
                {"input", input},       {"generator", generator},
                {"out", out},           {"checkpoints", checkpoints},
                {"length", length},     {"adversary", adversary}};
  }
};

Seed parse_seed(const std::string& s) {
  uint64_t v;
  if (s.rfind("0x", 0) == 0)
    v = std::stoull(s.substr(2), nullptr, 16);
  else
    v = std::stoull(s);
  return Seed(v);
}

// Text format: one `item delta` pair per line, `#` starts a comment; CRLF
// tolerated.
UpdateSeq read_stream(const std::string& path, bool insertion_only,
                      uint64_t universe) {
  std::ifstream f(path);
  if (!f) throw std::ios_base::failure("cannot open input: " + path);
  UpdateSeq out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t h = line.find('#');
    if (h != std::string::npos) line = line.substr(0, h);
    std::istringstream ss(line);
    long long item, delta = 1;
    if (!(ss >> item)) continue;  // blank or comment-only
    ss >> delta;
    std::string tail;
    if (ss >> tail)
      throw std::invalid_argument("line " + std::to_string(lineno) +
                                  ": trailing tokens");
    if (item < 0 || static_cast<uint64_t>(item) >= universe)
      throw std::invalid_argument("line " + std::to_string(lineno) +
                                  ": item out of universe");
    if (delta == 0)
      throw std::invalid_argument("line " + std::to_string(lineno) +
                                  ": zero delta");
    if (insertion_only && delta < 0)
      throw std::invalid_argument(
          "line " + std::to_string(lineno) +
          ": negative delta in an insertion-only task");
    out.push_back({static_cast<uint64_t>(item), delta});
  }
  return out;
}

UpdateSeq make_stream(const RunConfig& cfg, bool insertion_only) {
  if (!cfg.input.empty())
    return read_stream(cfg.input, insertion_only, cfg.universe);
  std::string g = cfg.generator.empty() ? "zipf:1.1" : cfg.generator;
  std::string kind = g;
  double param = 1.1;
  size_t colon = g.find(':');
  if (colon != std::string::npos) {
    kind = g.substr(0, colon);
    param = std::stod(g.substr(colon + 1));
  }
  StreamKind k;
  if (kind == "uniform")
    k = StreamKind::Uniform;
  else if (kind == "zipf")
    k = StreamKind::Zipf;
  else if (kind == "bursty")
    k = StreamKind::Bursty;
  else if (kind == "delete-heavy")
    k = StreamKind::DeleteHeavy;
  else
    throw std::invalid_argument("unknown generator kind: " + kind);
  if (insertion_only && k == StreamKind::DeleteHeavy)
    throw std::invalid_argument(
        "delete-heavy generator requires a turnstile task");
  return generate_stream(k, cfg.universe, cfg.length,
                         derive_seed(parse_seed(cfg.seed_str), "gen"), param);
}

std::vector<size_t> checkpoint_positions(size_t m, int k) {
  std::vector<size_t> out;
  if (k <= 0 || m == 0) return out;
  for (int i = 1; i <= k; ++i)
    out.push_back(std::max<size_t>(1, m * i / k));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

json error_quantiles(std::vector<double> errs) {
  if (errs.empty()) return json::object();
  std::sort(errs.begin(), errs.end());
  auto q = [&](double t) {
    return errs[std::min(errs.size() - 1,
                         static_cast<size_t>(t * errs.size()))];
  };
  return json{{"p50", q(0.5)}, {"p90", q(0.9)}, {"p99", q(0.99)},
              {"max", errs.back()}};
}

void write_report(const RunConfig& cfg, json& report, double elapsed_s) {
  report["config"] = cfg.to_json();
  report["elapsed_seconds"] = elapsed_s;
  if (cfg.out.empty()) {
    std::cout << report.dump(2) << "\n";
    return;
  }
  std::ofstream f(cfg.out);
  if (!f) throw std::ios_base::failure("cannot write: " + cfg.out);
  f << report.dump(2) << "\n";
}

ConstantsMode mode_of(const RunConfig& cfg) {
  return cfg.constants == "paper" ? ConstantsMode::Paper
                                  : ConstantsMode::Practical;
}

// One-shot estimate with per-checkpoint tracking.
json run_estimate(const RunConfig& cfg) {
  UpdateSeq stream = make_stream(cfg, true);
  auto cps = checkpoint_positions(stream.size(), cfg.checkpoints);
  Seed seed = parse_seed(cfg.seed_str);

  ExactState oracle;
  std::vector<double> exact, est;
  auto track = [&](auto& sketch, auto query) {
    size_t ci = 0;
    for (size_t t = 1; t <= stream.size(); ++t) {
      sketch.update(stream[t - 1]);
      oracle.ingest(stream[t - 1]);
      while (ci < cps.size() && cps[ci] == t) {
        est.push_back(query(sketch));
        exact.push_back(oracle.moment(cfg.p));
        ++ci;
      }
    }
  };

  uint64_t cells = 0;
  if (cfg.p == 0.0) {
    F0Sketch s(seed, static_cast<uint32_t>(
                         std::max(64.0, 16.0 / (cfg.eps * cfg.eps))));
    track(s, [](F0Sketch& x) { return x.estimate(); });
    cells = static_cast<uint64_t>(s.capacity()) * F0Sketch::kLevels;
  } else if (cfg.p == 2.0) {
    TrackerConfig tc;
    tc.eps = cfg.eps;
    tc.delta = cfg.delta;
    SignSketch s(seed, tc.f2_rows(), tc.f2_cells() / tc.f2_rows() + 1,
                 tc.f2_groups());
    track(s, [](SignSketch& x) { return x.f2_estimate(); });
    cells = static_cast<uint64_t>(s.rows()) * s.buckets();
  } else if (cfg.p < 2.0) {
    uint32_t d = StableSketch::round_dim(
        static_cast<uint32_t>(16.0 / (cfg.eps * cfg.eps)), 3);
    StableSketch s(seed, cfg.p, d, 3, 5);
    track(s, [](StableSketch& x) { return x.li_estimate(); });
    cells = s.dim();
  } else if (cfg.p == std::floor(cfg.p) && cfg.p <= 8) {
    FpLargeTracker s(seed, static_cast<int>(cfg.p), cfg.eps, cfg.delta,
                     cfg.universe);
    track(s, [](FpLargeTracker& x) { return x.estimate(); });
  } else {
    throw std::invalid_argument(
        "estimate: p must be 0, in (0,2], or an integer <= 8");
  }

  std::vector<double> errs;
  for (size_t i = 0; i < est.size(); ++i)
    errs.push_back(exact[i] > 0 ? std::abs(est[i] - exact[i]) / exact[i]
                                : std::abs(est[i]));
  json rep;
  rep["checkpoints"] = cps;
  rep["estimates"] = est;
  rep["exact"] = exact;
  rep["relative_errors"] = errs;
  rep["error_quantiles"] = error_quantiles(errs);
  rep["sketch_cells"] = cells;
  return rep;
}

json run_sliding(const RunConfig& cfg) {
  UpdateSeq stream = make_stream(cfg, true);
  uint64_t w = cfg.window ? cfg.window : stream.size();
  auto cps = checkpoint_positions(stream.size(), cfg.checkpoints);
  Seed seed = parse_seed(cfg.seed_str);
  ExactState oracle;

  json rep;
  std::vector<double> est, exact, errs;
  json blockmap = json::array();
  auto record = [&](const SWQueryResult& r, size_t t) {
    est.push_back(r.value);
    size_t from = t >= w ? t - w + 1 : 1;
    double ex = oracle.moment(cfg.p, from, t);
    exact.push_back(ex);
    errs.push_back(ex > 0 ? std::abs(r.value - ex) / ex : std::abs(r.value));
    blockmap.push_back(json{{"t", t},
                            {"x", r.x},
                            {"suffix_index", r.suffix_index},
                            {"active_blocks", r.active_blocks},
                            {"heavy_correction", r.heavy_correction},
                            {"y_levels", r.y_levels}});
  };

  auto drive = [&](auto& hist) {
    size_t ci = 0;
    for (size_t t = 1; t <= stream.size(); ++t) {
      hist.ingest(stream[t - 1]);
      oracle.ingest(stream[t - 1]);
      while (ci < cps.size() && cps[ci] == t) {
        record(hist.query(w), t);
        ++ci;
      }
    }
  };
  SWParams params = SWParams::make(cfg.eps, cfg.p, mode_of(cfg), 1e12, w);
  if (cfg.p > 2.0) {
    SlidingLargeP hist(params, seed);
    drive(hist);
  } else {
    SlidingMoment hist(params, seed);
    drive(hist);
  }
  rep["checkpoints"] = cps;
  rep["estimates"] = est;
  rep["exact"] = exact;
  rep["relative_errors"] = errs;
  rep["error_quantiles"] = error_quantiles(errs);
  rep["blocks"] = blockmap;
  return rep;
}

class RobustF2Duel : public DuelAlgorithm {
 public:
  RobustF2Duel(const RobustParams& params, const Seed& seed)
      : ledger_(params, std::make_shared<F2Factory>(params), seed) {}
  double feed(const StreamUpdate& u) override { return ledger_.step(u); }
  const RobustLedger& ledger() const { return ledger_; }

 private:
  RobustLedger ledger_;
};

json run_robust_duel(const RunConfig& cfg) {
  Seed seed = parse_seed(cfg.seed_str);
  RobustParams params = RobustParams::make(cfg.eps, 1.0, mode_of(cfg));
  RobustF2Duel algo(params, derive_seed(seed, "algo"));

  std::unique_ptr<AdversaryStrategy> adv;
  if (cfg.adversary == "probe")
    adv = std::make_unique<OutputProbeAdversary>(derive_seed(seed, "adv"),
                                                 cfg.universe);
  else if (cfg.adversary == "inflate")
    adv = std::make_unique<EstimateInflationAdversary>(
        derive_seed(seed, "adv"), cfg.universe);
  else if (cfg.adversary == "stress")
    adv = std::make_unique<SmoothHistogramStressor>(derive_seed(seed, "adv"),
                                                    cfg.universe);
  else if (cfg.adversary == "oblivious")
    adv = std::make_unique<ObliviousWrapper>(make_stream(cfg, true));
  else
    throw std::invalid_argument("unknown adversary: " + cfg.adversary);

  DuelTranscript transcript = run_duel(algo, *adv, cfg.length, 2.0);

  json steps = json::array();
  for (const auto& s : transcript.steps)
    steps.push_back(json{{"item", s.update.item},
                         {"delta", s.update.delta},
                         {"output", s.output},
                         {"truth", s.truth},
                         {"rel_error", s.rel_error}});
  json reveals = json::array();
  for (const auto& r : algo.ledger().reveal_log())
    reveals.push_back(json{{"event", r.event},
                           {"instance", r.instance},
                           {"time", r.time},
                           {"value", r.value}});
  json rep;
  rep["summary"] = json{{"max_rel_error", transcript.max_rel_error},
                        {"mean_rel_error", transcript.mean_rel_error},
                        {"halted", transcript.halted},
                        {"halt_reason", transcript.halt_reason}};
  rep["steps"] = steps;
  rep["reveal_log"] = reveals;
  return rep;
}

json run_entropy(const RunConfig& cfg) {
  UpdateSeq stream = make_stream(cfg, true);
  auto cps = checkpoint_positions(stream.size(), cfg.checkpoints);
  Seed seed = parse_seed(cfg.seed_str);
  ExactState oracle;
  json rep;
  std::vector<double> est, exact;
  if (cfg.window > 0) {
    SlidingEntropy se(cfg.eps, static_cast<double>(stream.size()), seed,
                      cfg.window, mode_of(cfg));
    size_t ci = 0;
    for (size_t t = 1; t <= stream.size(); ++t) {
      se.ingest(stream[t - 1]);
      oracle.ingest(stream[t - 1]);
      while (ci < cps.size() && cps[ci] == t) {
        est.push_back(se.query(cfg.window));
        size_t from = t >= cfg.window ? t - cfg.window + 1 : 1;
        exact.push_back(oracle.entropy(from, t));
        ++ci;
      }
    }
    rep["nodes"] = se.nodes().y;
  } else {
    RobustEntropy re(cfg.eps, static_cast<double>(stream.size()), seed,
                     mode_of(cfg));
    size_t ci = 0;
    for (size_t t = 1; t <= stream.size(); ++t) {
      re.step(stream[t - 1]);
      oracle.ingest(stream[t - 1]);
      while (ci < cps.size() && cps[ci] == t) {
        est.push_back(re.output());
        exact.push_back(oracle.entropy());
        ++ci;
      }
    }
    rep["nodes"] = re.nodes().y;
  }
  std::vector<double> errs;
  for (size_t i = 0; i < est.size(); ++i)
    errs.push_back(std::abs(est[i] - exact[i]));
  rep["checkpoints"] = cps;
  rep["estimates"] = est;
  rep["exact"] = exact;
  rep["additive_errors"] = errs;
  rep["error_quantiles"] = error_quantiles(errs);
  return rep;
}

json run_heavy_hitters(const RunConfig& cfg) {
  UpdateSeq stream = make_stream(cfg, true);
  Seed seed = parse_seed(cfg.seed_str);
  RobustParams params = RobustParams::make(cfg.eps, 1.0, mode_of(cfg));
  RobustHeavyHitters hh(params, seed);
  ExactState oracle;
  for (const auto& u : stream) {
    hh.step(u);
    oracle.ingest(u);
  }
  auto reported = hh.report();
  double f2 = oracle.moment(2.0);
  double l2 = std::sqrt(f2);
  auto freq = oracle.frequencies(1, stream.size());
  json items = json::array();
  for (const auto& r : reported) {
    double truth =
        freq.count(r.item) ? static_cast<double>(freq.at(r.item)) : 0.0;
    items.push_back(json{{"item", r.item},
                         {"estimate", r.frequency},
                         {"exact", truth},
                         {"exact_over_l2", l2 > 0 ? truth / l2 : 0.0}});
  }
  json rep;
  rep["reported"] = items;
  rep["l2"] = l2;
  json reveals = json::array();
  for (const auto& r : hh.ledger().reveal_log())
    reveals.push_back(json{{"event", r.event},
                           {"instance", r.instance},
                           {"time", r.time},
                           {"value", r.value}});
  rep["reveal_log"] = reveals;
  return rep;
}

json run_oracle(const RunConfig& cfg) {
  UpdateSeq stream = make_stream(cfg, false);
  ExactState st;
  st.ingest(stream);
  json rep;
  rep["length"] = stream.size();
  rep["moment"] = st.moment(cfg.p);
  rep["f0"] = st.moment(0.0);
  rep["f1"] = st.moment(1.0);
  rep["f2"] = st.moment(2.0);
  if (!stream.empty()) rep["entropy"] = st.entropy();
  std::vector<double> prefix;
  {
    ExactState acc;
    for (const auto& u : stream) {
      acc.ingest(u);
      prefix.push_back(acc.moment(cfg.p));
    }
  }
  rep["flip_number"] = flip_number(prefix, cfg.eps);
  auto tw = twist_number(stream, cfg.p, cfg.eps, 12);
  rep["twist_number"] = tw.value;
  rep["twist_exhaustive"] = tw.exhaustive;
  return rep;
}

json run_bench(const RunConfig& cfg) {
  json rep;
  std::vector<double> eps_values{0.2, 0.1, 0.05};
  json rows = json::array();
  for (double e : eps_values) {
    RobustParams params = RobustParams::make(e, 2.0, mode_of(cfg));
    SpacePlan plan = plan_space(params, DEKind::FpSmall, 1.0);
    json levels = json::array();
    for (int k = 1; k <= plan.beta; ++k)
      levels.push_back(json{{"level", k},
                            {"gamma", plan.gamma[k]},
                            {"eta", plan.eta_k[k]},
                            {"cells_per_instance", plan.level_cells[k]},
                            {"instances", plan.level_instances[k]}});
    rows.push_back(json{{"eps", e},
                        {"tracker_cells", plan.tracker_cells},
                        {"total_cells", plan.total_cells()},
                        {"levels", levels}});
  }
  rep["allocations"] = rows;
  rep["loglog_slope"] =
      space_slope(eps_values, DEKind::FpSmall, 2.0, 1.0, mode_of(cfg));

  // Throughput probe on the configured stream.
  UpdateSeq stream = make_stream(cfg, true);
  Seed seed = parse_seed(cfg.seed_str);
  RobustParams params = RobustParams::make(cfg.eps, 1.0, mode_of(cfg));
  RobustLedger ledger(params, std::make_shared<F2Factory>(params), seed);
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& u : stream) ledger.step(u);
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  rep["robust_f2_updates_per_second"] = secs > 0 ? stream.size() / secs : 0.0;
  return rep;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desketch: difference-estimator sketches, robust and sliding"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--p", cfg.p, "moment order");
    sub->add_option("--eps", cfg.eps, "relative accuracy");
    sub->add_option("--delta", cfg.delta, "failure probability");
    sub->add_option("--window", cfg.window, "sliding window length");
    sub->add_option("--universe", cfg.universe, "item universe size");
    sub->add_option("--seed", cfg.seed_str, "seed (decimal or 0x hex)");
    sub->add_option("--constants", cfg.constants, "paper|practical")
        ->check(CLI::IsMember({"paper", "practical"}));
    sub->add_option("--input", cfg.input, "stream file (item delta lines)");
    sub->add_option("--generator", cfg.generator,
                    "kind:params (uniform|zipf:s|bursty|delete-heavy)");
    sub->add_option("--out", cfg.out, "report path (stdout when empty)");
    sub->add_option("--checkpoints", cfg.checkpoints, "checkpoint count");
    sub->add_option("--length", cfg.length, "generated stream length");
    sub->add_option("--adversary", cfg.adversary,
                    "probe|inflate|stress|oblivious");
  };
  for (const char* name : {"estimate", "sliding", "robust-duel", "entropy",
                           "heavy-hitters", "oracle", "bench"})
    add_common(app.add_subcommand(name));

  CLI11_PARSE(app, argc, argv);
  cfg.task = app.get_subcommands().front()->get_name();

  auto t0 = std::chrono::steady_clock::now();
  try {
    json rep;
    if (cfg.task == "estimate")
      rep = run_estimate(cfg);
    else if (cfg.task == "sliding")
      rep = run_sliding(cfg);
    else if (cfg.task == "robust-duel")
      rep = run_robust_duel(cfg);
    else if (cfg.task == "entropy")
      rep = run_entropy(cfg);
    else if (cfg.task == "heavy-hitters")
      rep = run_heavy_hitters(cfg);
    else if (cfg.task == "oracle")
      rep = run_oracle(cfg);
    else if (cfg.task == "bench")
      rep = run_bench(cfg);
    auto t1 = std::chrono::steady_clock::now();
    write_report(cfg, rep, std::chrono::duration<double>(t1 - t0).count());
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
