// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "maskinject.hpp"
#include "maskinject/oracles.hpp"

namespace fs = std::filesystem;
using namespace maskinject;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) {
    o.pass = false;
    o.detail += " [over time limit " + std::to_string(static_cast<int>(limit_s)) + " s]";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f s", secs);
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << title << " (" << buf << ")  " << o.detail
            << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v, int prec = 6) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << v;
  return ss.str();
}

BinaryMask random_mask(int w, int h, double density, Rng& rng) {
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < m.size(); ++i) m.set_index(i, rng.uniform() < density);
  return m;
}

FeatureMap random_features(int D, int h, int w, Rng& rng) {
  FeatureMap f(D, h, w);
  for (auto& v : f.values) v = rng.uniform(-1, 1);
  return f;
}

MaskSet random_masks(int n, int w, int h, Rng& rng, double density) {
  MaskSet s(w, h, false);
  for (int i = 0; i < n; ++i) s.push_back(random_mask(w, h, density, rng));
  s.disjoint = s.verify_disjoint();
  return s;
}

MaskSet random_blobs(int n, int w, int h, Rng& rng) {
  MaskSet s(w, h, false);
  for (int i = 0; i < n; ++i) {
    BinaryMask m(w, h);
    const int x0 = static_cast<int>(rng.uniform_int(0, w - 1)), y0 = static_cast<int>(rng.uniform_int(0, h - 1));
    const int x1 = static_cast<int>(rng.uniform_int(x0, w - 1)), y1 = static_cast<int>(rng.uniform_int(y0, h - 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (rng.uniform() < 0.85) m.set(x, y);
    s.push_back(m);
  }
  s.disjoint = s.verify_disjoint();
  return s;
}

MaskSet random_text(int K, int w, int h, Rng& rng) {
  MaskSet t(w, h, true);
  for (int k = 0; k < K; ++k) t.masks.emplace_back(w, h);
  for (int c = 0; c < w * h; ++c) {
    const auto k = rng.uniform_int(-1, K - 1);
    if (k >= 0) t.masks[static_cast<std::size_t>(k)].set_index(static_cast<std::size_t>(c));
  }
  return t;
}

SuiteConfig default_suite(std::uint64_t seed) {
  SuiteConfig s;
  s.seed = seed;
  return s;
}

// 1
Outcome probability_normalization() {
  SuiteConfig sc = default_suite(101);
  sc.scenes = 500;
  const auto scenes = gen_suite(sc);
  SamplerConfig cfg;
  double worst_mask = 0.0, worst_total = 0.0;
  std::size_t masks = 0;
  for (const auto& s : scenes) {
    const auto gt = class_masks(s.semantic, s.cost.classes);
    const auto tgt = probability_target(gt, cfg);
    double total = 0.0;
    for (std::size_t k = 0; k < gt.size(); ++k) {
      const auto cells = rasterize_to_grid(gt[k], cfg.grid_h, cfg.grid_w);
      double mass = 0.0;
      for (std::size_t c = 0; c < cells.size(); ++c)
        if (cells[c]) mass += tgt.grid.raw[c];
      worst_mask = std::max(worst_mask, std::abs(mass - tgt.expected[k]));
      total += tgt.expected[k];
      ++masks;
    }
    worst_total = std::max(worst_total, std::abs(tgt.grid.raw_mass() - total));
  }
  return {worst_mask <= 1e-9 && worst_total <= 1e-9, std::to_string(masks) + " masks, max |mass - P_k| " +
                                                          fmt(worst_mask) + ", max |total - sum P_k| " +
                                                          fmt(worst_total)};
}

// 2
Outcome expected_points_constants() {
  SamplerConfig cfg;
  cfg.g_p = 5;
  cfg.m_p = 10;
  std::size_t bad = 0;
  for (std::size_t a = 1; a <= 10000; ++a) {
    const int direct = static_cast<int>(std::min(std::ceil(static_cast<double>(a) / 5.0), 10.0));
    if (expected_points_for_area(a, cfg) != direct) ++bad;
  }
  return {bad == 0, std::to_string(bad) + " mismatches over areas 1..10000"};
}

// 3
Outcome sampling_expectation() {
  ProbabilityGrid g(32, 32);
  Rng rng(31);
  for (auto& p : g.probs) p = rng.uniform() < 0.3 ? rng.uniform() : 0.0;
  double mass = 0.0, var = 0.0;
  for (double p : g.probs) {
    mass += p;
    var += p * (1 - p);
  }
  const int seeds = 10000;
  double sum = 0.0;
  for (int s = 0; s < seeds; ++s) sum += static_cast<double>(sample_points(g, derive_seed(9, s), 512, 512).count());
  const double mean = sum / seeds, bound = 3.0 * std::sqrt(var / seeds);
  return {std::abs(mean - mass) <= bound,
          "mean N_p " + fmt(mean) + " vs sum probs " + fmt(mass) + " (3 sd " + fmt(bound) + ")"};
}

// 4
Outcome sparsity() {
  const auto scenes = gen_suite(default_suite(0));
  BenchConfig cfg;
  cfg.strategies = {Strategy::grid32, Strategy::tspp_target};
  const auto rep = bench_sampling(scenes, cfg);
  const double grid = rep.get("grid32").mean_points, tspp = rep.get("tspp-target").mean_points;
  using P = PublishedReference;
  return {tspp <= 120.0 && grid == 1024.0,
          "tspp-target " + fmt(tspp, 4) + " vs grid " + fmt(grid, 5) + " points, reduction " +
              fmt(100.0 * (1.0 - tspp / grid), 4) + "%, recall " + fmt(rep.get("tspp-target").recall, 4) +
              " (reference: " + std::to_string(P::tspp_points_ade150) + "/" + std::to_string(P::tspp_points_pc59) +
              " vs " + std::to_string(P::grid_points) + ", " + fmt(P::reduction_percent, 3) + "%)"};
}

// 5
Outcome edt_exact() {
  Rng rng(5);
  std::size_t bad = 0, fields = 0;
  for (int t = 0; t < 1000; ++t) {
    const int w = static_cast<int>(rng.uniform_int(1, 64)), h = static_cast<int>(rng.uniform_int(1, 64));
    auto m = random_mask(w, h, rng.uniform(0.001, 0.7), rng);
    if (m.empty()) m.set(0, 0);
    for (bool ref : {true, false}) {
      if (ref ? m.empty() : m.area() == m.size()) continue;
      const auto expect = oracle::oracle_edt(m, ref);
      const auto got = euclidean_distance_transform(m, ref ? Reference::set_pixels : Reference::unset_pixels, true);
      ++fields;
      for (std::size_t i = 0; i < m.size(); ++i)
        if (got.values[i] != static_cast<double>(expect[i])) {
          ++bad;
          break;
        }
    }
  }
  return {bad == 0, std::to_string(fields) + " fields on 1000 masks, " + std::to_string(bad) + " mismatched"};
}

// 6
Outcome smagg_oracle() {
  Rng rng(6);
  std::size_t bad = 0, union_bad = 0, count_bad = 0, merges = 0;
  for (int t = 0; t < 1000; ++t) {
    const int tw = static_cast<int>(rng.uniform_int(1, 8)), th = static_cast<int>(rng.uniform_int(1, 8));
    const int f = static_cast<int>(rng.uniform_int(1, 2));
    const auto sam = random_blobs(static_cast<int>(rng.uniform_int(0, 8)), tw * f, th * f, rng);
    const auto text = random_text(static_cast<int>(rng.uniform_int(0, 4)), tw, th, rng);
    const double alpha = rng.uniform(0.0, 0.95);
    const auto r = aggregate(sam, text, alpha);
    const auto o = oracle::oracle_aggregate(sam, text, alpha);
    bool same = r.masks.size() == o.masks.size();
    for (std::size_t i = 0; same && i < r.masks.size(); ++i)
      same = r.masks[i] == o.masks[i] && r.class_of[i] == o.class_of[i] && r.provenance[i] == o.provenance[i];
    bad += !same;
    union_bad += !(union_all(r.masks) == union_all(sam));
    count_bad += r.masks.size() > sam.size();
    merges += sam.size() - r.masks.size();
  }
  return {bad == 0 && union_bad == 0 && count_bad == 0,
          "1000 instances: " + std::to_string(bad) + " oracle mismatches, " + std::to_string(union_bad) +
              " union violations, " + std::to_string(count_bad) + " N_m > N_s; " + std::to_string(merges) +
              " proposals absorbed"};
}

// 7
Outcome dmi_correctness() {
  Rng rng(7);
  bool identity = true;
  double oracle_err = 0.0;
  auto track = [&](const FeatureMap& a, const FeatureMap& b) {
    if (!a.same_shape(b)) {
      oracle_err = INFINITY;
      return;
    }
    for (std::size_t i = 0; i < a.values.size(); ++i) oracle_err = std::max(oracle_err, std::abs(a.values[i] - b.values[i]));
  };
  for (int t = 0; t < 50; ++t) {
    const auto f = random_features(4, 8, 8, rng);
    const auto masks = random_masks(static_cast<int>(rng.uniform_int(1, 4)), 8, 8, rng, 0.4);
    auto p = HighFreqParams::init(4, rng.next());
    auto gamma = p.weights.block(HighFreqParams::kGamma);
    std::fill(gamma.begin(), gamma.end(), 0.0);
    identity = identity && high_freq_inject(f, masks, p).values == f.values;

    const auto e = mask_pool(f, masks);
    const auto rows = oracle::oracle_mask_pool(f, masks);
    for (std::size_t k = 0; k < rows.size(); ++k)
      for (std::size_t d = 0; d < rows[k].size(); ++d)
        oracle_err = std::max(oracle_err, std::abs(e.at(static_cast<int>(k), static_cast<int>(d)) - rows[k][d]));
    track(intra_mask_context(f, masks, e), oracle::oracle_intra(f, masks));
    track(cross_attention(f, e), oracle::oracle_cross_attention(f, rows));
    track(low_freq_inject(f, masks), oracle::oracle_low_freq(f, masks));
    auto q = HighFreqParams::init(4, rng.next());
    for (auto& v : q.weights.data()) v += rng.uniform(-0.2, 0.2);
    track(high_freq_inject(f, masks, q), oracle::oracle_high_freq(f, mask_summary(masks, q.tag_cap), q));
  }
  std::string grads;
  bool grads_ok = true;
  for (auto op : {GradOp::low_freq, GradOp::high_freq, GradOp::tspp, GradOp::cross_attention}) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto rep = gradcheck(op, seed);
      worst = std::max(worst, rep.max_rel_error());
      grads_ok = grads_ok && rep.passed();
    }
    grads += " " + grad_op_name(op) + " " + fmt(worst, 3);
  }
  return {identity && oracle_err <= 1e-12 && grads_ok,
          std::string("gamma=0 identity ") + (identity ? "exact" : "BROKEN") + ", oracle max err " +
              fmt(oracle_err, 3) + ", max rel grad err over 20 seeds:" + grads};
}

// 8
Outcome training() {
  const auto suite = gen_suite(default_suite(0));
  SamplerConfig sampler;
  std::vector<TrainingItem> data;
  for (const auto& s : suite) data.push_back(make_training_item(s, sampler));
  const auto init = TsppHeadParams::init(4, 16, 32, 32, derive_seed(0, 0x4eadull));
  std::vector<double> mse;
  double reduction = 0.0;
  for (double lambda : {0.1, 0.5, 1.0}) {
    TrainConfig cfg;
    cfg.lambda_mse = lambda;
    const auto r = train_head(data, init, cfg);
    mse.push_back(r.mse.back());
    if (lambda == 0.5) reduction = r.loss.back() / r.loss.front();
  }
  const bool reduced = reduction <= 0.5;
  const bool direction = mse[2] > mse[1];
  return {reduced && direction,
          "lambda=0.5 final/initial loss " + fmt(reduction, 4) + (reduced ? " (ok)" : " (too high)") +
              "; final mse at lambda 0.1/0.5/1.0: " + fmt(mse[0], 4) + " / " + fmt(mse[1], 4) + " / " +
              fmt(mse[2], 4) + (direction ? " (lambda=1.0 worse, ok)" : " (lambda=1.0 not worse than 0.5)")};
}

// 9
Outcome end_to_end() {
  const auto suite = gen_suite(default_suite(0));
  const auto head = TsppHeadParams::init(4, 16, 32, 32, 1);
  PipelineConfig cfg;
  cfg.prompts = PromptSource::target;
  cfg.split_min = 2;
  cfg.split_max = 4;
  cfg.seed = 9;
  const auto with = run_suite(suite, head, cfg);
  auto off = cfg;
  off.use_smagg = false;
  const auto without = run_suite(suite, head, off);
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    a += with[i].diag.miou;
    b += without[i].diag.miou;
  }
  a /= static_cast<double>(suite.size());
  b /= static_cast<double>(suite.size());
  const auto sweep = alpha_sweep(suite, {0.3, 0.5, 0.7}, head, cfg);
  std::string nm;
  for (const auto& r : sweep.rows) nm += " " + fmt(r.mean_merged, 4);
  return {a >= b && sweep.monotone, "mIoU with SMAgg " + fmt(a, 5) + " vs without " + fmt(b, 5) +
                                        "; mean N_m at alpha 0.3/0.5/0.7:" + nm +
                                        (sweep.monotone ? " (monotone per scene)" : " (NOT monotone)")};
}

// 10
int run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + std::string(MASKINJECT_CLI_PATH) + "' " + args +
                          " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "maskinject_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string suite = "--scenes 6 --max-objects 8 --seed 13 ";
  // {command with OUT placeholder, threads a, threads b}
  struct Case {
    std::string cmd;
    std::vector<std::string> outs;
  };
  const std::vector<Case> cases = {
      {"gen-scene --seed 21 --objects 8 --split-max 3 --out-labels OUT0.pgm --out-semantic OUT1.pgm "
       "--out-cost OUT2.fgrid --out-objects OUT3.csv",
       {"0.pgm", "1.pgm", "2.fgrid", "3.csv"}},
      {"pipeline --seed 4 --objects 8 --split-min 2 --split-max 4 --out OUT0.pgm --merged OUT1.pgm "
       "--points OUT2.csv --report OUT3.csv",
       {"0.pgm", "1.pgm", "2.csv", "3.csv"}},
      {"bench " + suite + "--repeats 3 --threads THREADS --out OUT0.csv", {"0.csv"}},
      {"alpha-sweep " + suite + "--split-min 2 --split-max 3 --threads THREADS --out OUT0.csv", {"0.csv"}},
      {"train-head " + suite + "--steps 5 --threads THREADS --out OUT0.fgrid --trace OUT1.csv", {"0.fgrid", "1.csv"}},
      {"gradcheck --op high-freq --seed 2 --instances 2 --out OUT0.csv", {"0.csv"}},
  };
  std::size_t compared = 0;
  std::vector<std::string> diffs;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    std::vector<std::string> tags;
    for (const char* threads : {"1", "1", "3"}) {
      const std::string tag = "c" + std::to_string(c) + "_" + std::to_string(tags.size()) + "_";
      std::string cmd = cases[c].cmd;
      for (std::size_t at; (at = cmd.find("OUT")) != std::string::npos;) cmd.replace(at, 3, tag);
      for (std::size_t at; (at = cmd.find("THREADS")) != std::string::npos;) cmd.replace(at, 7, threads);
      if (run_cli(dir, cmd) != 0) return {false, "command failed: " + cmd};
      tags.push_back(tag);
    }
    for (const auto& out : cases[c].outs) {
      const auto ref = slurp(dir / (tags[0] + out));
      if (ref.empty()) diffs.push_back(tags[0] + out + " empty");
      for (std::size_t r = 1; r < tags.size(); ++r) {
        ++compared;
        if (slurp(dir / (tags[r] + out)) != ref) diffs.push_back(tags[r] + out);
      }
    }
  }
  fs::remove_all(dir);
  std::string detail = std::to_string(compared) + " file comparisons (repeat and 1 vs 3 threads)";
  for (const auto& d : diffs) detail += ", differs: " + d;
  return {diffs.empty(), detail};
}

}  // namespace

int main() {
  criterion(1, "probability target normalization, 500 scenes", 30, probability_normalization);
  criterion(2, "expected point count constants", 0, expected_points_constants);
  criterion(3, "sampling expectation, 10000 seeds", 60, sampling_expectation);
  criterion(4, "prompt sparsity on the default suite", 0, sparsity);
  criterion(5, "EDT bit-exact on 1000 masks", 60, edt_exact);
  criterion(6, "aggregation oracle equivalence, 1000 instances", 0, smagg_oracle);
  criterion(7, "mask injection correctness and gradients", 120, dmi_correctness);
  criterion(8, "prompt head training", 300, training);
  criterion(9, "end-to-end direction checks", 300, end_to_end);
  criterion(10, "CLI determinism", 0, determinism);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
