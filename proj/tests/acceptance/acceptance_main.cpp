// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code is the number of failures.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>

#include "shiftbench/features.hpp"
#include "shiftbench/joint.hpp"
#include "shiftbench/metrics.hpp"
#include "shiftbench/model.hpp"
#include "shiftbench/report.hpp"
#include "shiftbench/sampler.hpp"
#include "shiftbench/shift_engine.hpp"
#include "shiftbench/sweep.hpp"
#include "shiftbench/trainer.hpp"

using namespace shiftbench;
namespace fs = std::filesystem;

namespace {

constexpr uint64_t kMaster = 0x5b1f7ac3ull;

// chi^2 inverse CDF at 0.9999, 3 degrees of freedom.
constexpr double kChi2Crit9999Df3 = 21.1075134661604;

struct Check {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }

  void note(const std::string& info) {
    if (!detail.empty()) detail += "; ";
    detail += info;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

void run_parallel(std::vector<std::function<void()>> jobs, size_t workers) {
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      jobs[i]();
    }
  };
  std::vector<std::thread> pool;
  for (size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

// Trains every learning rate in the grid for one (manifest, method) cell and
// returns the test accuracy of the model selected by validation top-1.
struct CellResult {
  double val = 0.0;
  double test = 0.0;
};

struct TrainJobSpec {
  const SplitManifest* manifest = nullptr;
  SamplerMode mode = SamplerMode::plain;
  double alpha = 0.0;
  double lr = 1e-3;
  uint64_t seed = 0;
};

CellResult run_training(const TrainJobSpec& job, const AttributedDataset& ds,
                        const DataAccess& access,
                        const AugmentationSource* oracle,
                        const TrainConfig& base) {
  const auto& schema = ds.schema();
  ModelSpec spec{ModelSpec::Kind::mlp1, access.feature_dim(),
                 schema.num_label_values(), 64};
  TrainConfig config = base;
  config.learning_rate = job.lr;
  TrainingSampler sampler =
      make_training_sampler(*job.manifest, ds, schema, job.mode, job.alpha,
                            oracle, derive_seed(job.seed, fnv1a64("sampler")));
  TrainedModel model =
      train(spec, config, *job.manifest, access, std::move(sampler), job.seed);
  return {model.best_val_top1,
          evaluate_top1(model, job.manifest->test, access)};
}

// Per-seed model selection over the lr grid; returns the selected test
// accuracy per seed. Trainings run on a small worker pool.
std::vector<double> selected_test_per_seed(
    const AttributedDataset& ds, const DataAccess& access,
    const AugmentationSource* oracle, const TrainConfig& base,
    const std::vector<const SplitManifest*>& manifests_per_seed,
    SamplerMode mode, double alpha, const std::vector<double>& lrs,
    uint64_t tag) {
  size_t n_seeds = manifests_per_seed.size();
  std::vector<CellResult> results(n_seeds * lrs.size());
  std::vector<std::function<void()>> jobs;
  for (size_t s = 0; s < n_seeds; ++s) {
    for (size_t li = 0; li < lrs.size(); ++li) {
      jobs.push_back([&, s, li]() {
        TrainJobSpec job;
        job.manifest = manifests_per_seed[s];
        job.mode = mode;
        job.alpha = alpha;
        job.lr = lrs[li];
        job.seed = derive_seed(kMaster, tag, s, li);
        results[s * lrs.size() + li] = run_training(job, ds, access, oracle, base);
      });
    }
  }
  run_parallel(std::move(jobs), 2);

  std::vector<double> out(n_seeds);
  for (size_t s = 0; s < n_seeds; ++s) {
    std::vector<double> vals;
    for (size_t li = 0; li < lrs.size(); ++li)
      vals.push_back(results[s * lrs.size() + li].val);
    out[s] = results[s * lrs.size() + select_best_index(vals)].test;
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---- criterion 1: distribution correctness (exact counts) ------------------

Check criterion1() {
  Check c;
  AttributedDataset ds = gen_sprites(100, derive_seed(kMaster, 1));
  const auto& schema = ds.schema();

  TestSplit split = make_test_split(ds, schema, 10, derive_seed(kMaster, 11));
  std::map<std::pair<uint32_t, uint32_t>, int> cell_counts;
  for (uint64_t id : split.test_ids) {
    const auto& r = ds.record(id);
    cell_counts[{r.attr[0], r.attr[1]}]++;
  }
  c.require(split.test_ids.size() == 90, "test split size != 90");
  for (const auto& [cell, count] : cell_counts)
    c.require(count == 10, "test cell count != 10");

  ShiftSpec sc;
  sc.kind = ShiftKind::spurious_correlation;
  sc.mapping = {{0, 0}, {1, 1}, {2, 2}};
  sc.n = 9;
  sc.test_per_cell = 10;
  SplitManifest m_sc =
      make_spurious_correlation(ds, schema, sc, derive_seed(kMaster, 12), split);
  size_t uncorrelated = 0;
  for (const auto& e : m_sc.train) {
    if (e.origin == Origin::uncorrelated) {
      ++uncorrelated;
    } else {
      const auto& r = ds.record(e.id);
      c.require(r.attr[1] == sc.mapping.at(r.attr[0]),
                "correlated entry violates the mapping");
    }
  }
  c.require(uncorrelated == 9, "uncorrelated count != 9, got " +
                                   std::to_string(uncorrelated));

  ShiftSpec ld;
  ld.kind = ShiftKind::low_data;
  ld.constrained = {2};
  ld.n = 10;
  ld.test_per_cell = 10;
  SplitManifest m_ld =
      make_low_data(ds, schema, ld, derive_seed(kMaster, 13), split);
  size_t blue_train = 0;
  for (const auto& e : m_ld.train) blue_train += (ds.record(e.id).attr[1] == 2);
  c.require(blue_train == 10, "low-data constrained count != 10, got " +
                                  std::to_string(blue_train));
  for (uint64_t id : m_ld.val)
    c.require(ds.record(id).attr[1] != 2, "low-data val leaked a constrained id");

  ShiftSpec unseen;
  unseen.kind = ShiftKind::unseen;
  unseen.constrained = {2};
  unseen.test_per_cell = 10;
  SplitManifest m_us = make_unseen(ds, schema, unseen, derive_seed(kMaster, 14), split);
  size_t blue_unseen = 0;
  for (const auto& e : m_us.train) blue_unseen += (ds.record(e.id).attr[1] == 2);
  for (uint64_t id : m_us.val) blue_unseen += (ds.record(id).attr[1] == 2);
  c.require(blue_unseen == 0, "unseen manifest still contains constrained ids");

  c.note("test 10/cell, sc 9 uncorrelated, lowdata 10, unseen 0");
  return c;
}

// ---- criterion 2: sampler statistics ---------------------------------------

Check criterion2() {
  Check c;
  std::vector<double> weights{3, 1, 1, 1};
  std::vector<double> probs{0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
  IndexSampler sampler(weights, derive_seed(kMaster, 2));
  const size_t n = 1000000;
  std::vector<uint64_t> counts(4, 0);
  for (size_t i = 0; i < n; ++i) counts[sampler.draw_one()]++;

  double chi2 = 0.0;
  for (size_t i = 0; i < 4; ++i) {
    double f = static_cast<double>(counts[i]) / static_cast<double>(n);
    double bound = 4.0 * std::sqrt(probs[i] * (1.0 - probs[i]) / n);
    c.require(std::abs(f - probs[i]) <= bound,
              "frequency " + fmt(f) + " outside 4 sigma of " + fmt(probs[i]));
    double expected = probs[i] * static_cast<double>(n);
    double d = static_cast<double>(counts[i]) - expected;
    chi2 += d * d / expected;
  }
  c.require(chi2 < kChi2Crit9999Df3, "chi-square " + fmt(chi2) + " >= critical");
  c.note("chi2=" + fmt(chi2) + " crit=" + fmt(kChi2Crit9999Df3));
  return c;
}

// ---- criterion 3: reweighting oracle ---------------------------------------

Check criterion3() {
  Check c;
  AttributeSchema schema;
  schema.attributes = {{"shape", {"square", "ellipse", "heart"}},
                       {"color", {"red", "green", "blue"}}};
  schema.label_index = 0;
  schema.nuisance_index = 1;

  std::vector<ExampleRecord> records;
  SplitManifest m;
  uint64_t id = 0;
  for (uint32_t u = 0; u < 3; ++u)
    for (uint32_t v = 0; v < 3; ++v)
      for (int k = 0; k < (u == v ? 90 : 1); ++k) {
        ExampleRecord r;
        r.sample_id = id;
        r.attr = {u, v};
        r.payload = Payload::make_features({1.0f});
        records.push_back(std::move(r));
        m.train.push_back({id, 1.0, Origin::bulk, std::nullopt});
        ++id;
      }
  AttributedDataset ds(schema, std::move(records));
  m.canonicalize();
  SplitManifest w = compute_reweight_weights(m, ds, schema);

  // Hand-evaluated W = p / p_train, normalized to mean 1 over 276 entries:
  // q_diag = 90/276, q_off = 1/276; raw_diag = (1/9)/(90/276), raw ratio 90.
  double diag_w = 0, off_w = 0;
  std::map<std::pair<uint32_t, uint32_t>, double> mass;
  for (const auto& e : w.train) {
    const auto& r = ds.record(e.id);
    if (r.attr[0] == r.attr[1])
      diag_w = e.weight;
    else
      off_w = e.weight;
    mass[{r.attr[0], r.attr[1]}] += e.weight;
  }
  double total = 276.0;
  double raw_diag = (1.0 / 9.0) / (90.0 / total);
  double raw_off = (1.0 / 9.0) / (1.0 / total);
  double raw_mean = (270.0 * raw_diag + 6.0 * raw_off) / total;
  c.require(std::abs(off_w / diag_w - 90.0) < 1e-9, "weight ratio != 90");
  c.require(std::abs(diag_w - raw_diag / raw_mean) < 1e-9,
            "diagonal weight mismatch vs hand evaluation");
  c.require(std::abs(off_w - raw_off / raw_mean) < 1e-9,
            "off-diagonal weight mismatch vs hand evaluation");

  double first = mass.begin()->second;
  for (const auto& [cell, v] : mass)
    c.require(std::abs(v - first) < 1e-9, "cell masses not uniform");
  c.require(std::abs(w.train_weight_mean() - 1.0) < 1e-9, "weight mean != 1");
  c.note("ratio=" + fmt(off_w / diag_w) + " mass=" + fmt(first));
  return c;
}

// ---- criterion 4: gradient checks ------------------------------------------

Check criterion4() {
  Check c;
  auto check_model = [&](const ModelSpec& spec, uint64_t tag) {
    double worst = 0.0;
    for (uint64_t batch_idx = 0; batch_idx < 20; ++batch_idx) {
      size_t n = spec.param_count();
      std::vector<double> params(n);
      Eigen::MatrixXd x(spec.input_dim, 10);
      std::vector<uint32_t> labels(10);

      // Redraw until no hidden pre-activation sits within the central
      // difference window of the relu kink, where the comparison is
      // ill-posed for any correct gradient.
      for (uint64_t attempt = 0;; ++attempt) {
        Pcg32 rng(derive_seed(kMaster, tag, batch_idx, attempt));
        for (auto& p : params) p = (rng.next_double() - 0.5) * 0.4;
        for (Eigen::Index j = 0; j < x.cols(); ++j)
          for (Eigen::Index i = 0; i < x.rows(); ++i)
            x(i, j) = rng.next_double() * 2.0 - 1.0;
        for (auto& y : labels)
          y = static_cast<uint32_t>(rng.bounded(spec.num_classes));
        if (spec.kind != ModelSpec::Kind::mlp1) break;
        Eigen::Map<const Eigen::MatrixXd> w1(params.data(), spec.hidden,
                                             spec.input_dim);
        Eigen::Map<const Eigen::VectorXd> b1(params.data() +
                                                 spec.hidden * spec.input_dim,
                                             spec.hidden);
        double clearance =
            ((w1 * x).colwise() + b1).cwiseAbs().minCoeff();
        if (clearance > 5e-4) break;
      }

      std::vector<double> grad(n), scratch(n), probe = params;
      Network<double>::loss_and_grad(spec, params, x, labels, grad);
      const double h = 1e-4;
      for (size_t i = 0; i < n; ++i) {
        probe[i] = params[i] + h;
        double up = Network<double>::loss_and_grad(spec, probe, x, labels, scratch);
        probe[i] = params[i] - h;
        double down =
            Network<double>::loss_and_grad(spec, probe, x, labels, scratch);
        probe[i] = params[i];
        double numeric = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
        worst = std::max(worst, std::abs(numeric - grad[i]) / denom);
      }
    }
    return worst;
  };

  double worst_linear =
      check_model({ModelSpec::Kind::softmax_linear, 14, 3, 0}, 41);
  double worst_mlp = check_model({ModelSpec::Kind::mlp1, 9, 4, 6}, 42);
  c.require(worst_linear < 1e-4,
            "softmax_linear rel err " + std::to_string(worst_linear));
  c.require(worst_mlp < 1e-4, "mlp1 rel err " + std::to_string(worst_mlp));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "rel err linear=%.2e mlp=%.2e", worst_linear,
                worst_mlp);
  c.note(buf);
  return c;
}

// ---- criteria 5-6: spurious correlation degradation and oracle recovery ----

struct SpuriousResults {
  std::vector<double> iid, sc, mix;
  double degradation_secs = 0.0;  // iid + sc trainings (criterion 5)
  double recovery_secs = 0.0;     // mixture trainings (criterion 6)
};

SpuriousResults run_spurious_block() {
  AttributedDataset ds = gen_sprites(3000, derive_seed(kMaster, 5));
  const auto& schema = ds.schema();
  DataAccess access(ds);
  SpriteSwapOracle oracle(schema);

  ShiftSpec iid;
  iid.kind = ShiftKind::low_data;
  iid.n = 1;
  iid.test_per_cell = 50;

  ShiftSpec sc;
  sc.kind = ShiftKind::spurious_correlation;
  sc.mapping = {{0, 0}, {1, 1}, {2, 2}};
  sc.n = 1;
  sc.test_per_cell = 50;

  const size_t n_seeds = 5;
  std::vector<SplitManifest> m_iid, m_sc;
  for (size_t s = 0; s < n_seeds; ++s) {
    m_iid.push_back(build_manifest(ds, schema, iid, derive_seed(kMaster, 51, s)));
    m_sc.push_back(build_manifest(ds, schema, sc, derive_seed(kMaster, 52, s)));
  }
  std::vector<const SplitManifest*> p_iid, p_sc;
  for (size_t s = 0; s < n_seeds; ++s) {
    p_iid.push_back(&m_iid[s]);
    p_sc.push_back(&m_sc[s]);
  }

  TrainConfig base;
  base.batch_size = 128;
  base.max_steps = 12000;
  base.eval_every = 300;
  base.patience = 8;
  std::vector<double> lrs{1e-2, 1e-3, 1e-4};

  SpuriousResults r;
  auto t0 = std::chrono::steady_clock::now();
  r.iid = selected_test_per_seed(ds, access, &oracle, base, p_iid,
                                 SamplerMode::plain, 0.0, lrs, 53);
  r.sc = selected_test_per_seed(ds, access, &oracle, base, p_sc,
                                SamplerMode::plain, 0.0, lrs, 54);
  auto t1 = std::chrono::steady_clock::now();
  r.mix = selected_test_per_seed(ds, access, &oracle, base, p_sc,
                                 SamplerMode::mixture, 1.0, lrs, 55);
  auto t2 = std::chrono::steady_clock::now();
  r.degradation_secs = std::chrono::duration<double>(t1 - t0).count();
  r.recovery_secs = std::chrono::duration<double>(t2 - t1).count();
  return r;
}

Check criterion5(const SpuriousResults& r) {
  Check c;
  double gap = mean_of(r.iid) - mean_of(r.sc);
  c.require(gap >= 0.25, "degradation gap " + fmt(gap) + " < 0.25");
  c.note("iid=" + fmt(mean_of(r.iid)) + " sc=" + fmt(mean_of(r.sc)) +
         " gap=" + fmt(gap) + " trainings=" + fmt(r.degradation_secs) + "s");
  return c;
}

Check criterion6(const SpuriousResults& r) {
  Check c;
  double diff = std::abs(mean_of(r.mix) - mean_of(r.iid));
  c.require(diff <= 0.05, "oracle augmentation lands at " + fmt(mean_of(r.mix)) +
                              ", more than 0.05 from the control " +
                              fmt(mean_of(r.iid)));
  c.note("mix=" + fmt(mean_of(r.mix)) + " iid=" + fmt(mean_of(r.iid)) +
         " |diff|=" + fmt(diff) + " trainings=" + fmt(r.recovery_secs) + "s");
  return c;
}

// ---- criterion 7: color-label unseen shift ----------------------------------

Check criterion7() {
  Check c;
  // Color is the label, shape the nuisance; hearts are held out of training.
  AttributedDataset ds = gen_sprites(400, derive_seed(kMaster, 7), 1, 0);
  const auto& schema = ds.schema();
  DataAccess access(ds);
  SpriteSwapOracle oracle(schema);

  ShiftSpec unseen;
  unseen.kind = ShiftKind::unseen;
  unseen.constrained = {2};  // heart
  unseen.test_per_cell = 50;

  const size_t n_seeds = 5;
  std::vector<SplitManifest> manifests;
  for (size_t s = 0; s < n_seeds; ++s)
    manifests.push_back(
        build_manifest(ds, schema, unseen, derive_seed(kMaster, 71, s)));
  std::vector<const SplitManifest*> ptrs;
  for (auto& m : manifests) ptrs.push_back(&m);

  TrainConfig base;
  base.batch_size = 128;
  base.max_steps = 1500;
  base.eval_every = 100;
  base.patience = 4;
  std::vector<double> lrs{1e-2, 1e-3, 1e-4};

  struct Method {
    const char* name;
    SamplerMode mode;
    double alpha;
    uint64_t tag;
  };
  std::vector<Method> methods{{"plain", SamplerMode::plain, 0.0, 72},
                              {"reweight", SamplerMode::reweight, 0.0, 73},
                              {"mixture", SamplerMode::mixture, 1.0, 74}};
  for (const auto& method : methods) {
    auto tests = selected_test_per_seed(ds, access, &oracle, base, ptrs,
                                        method.mode, method.alpha, lrs,
                                        method.tag);
    for (size_t s = 0; s < tests.size(); ++s)
      c.require(tests[s] >= 0.99, std::string(method.name) + " seed " +
                                      std::to_string(s) + " test " +
                                      fmt(tests[s]) + " < 0.99");
    c.note(std::string(method.name) + "=" + fmt(mean_of(tests)));
  }
  return c;
}

// ---- criterion 8: noise monotonicity ----------------------------------------

Check criterion8() {
  Check c;
  AttributedDataset ds = gen_sprites(1000, derive_seed(kMaster, 8));
  const auto& schema = ds.schema();
  DataAccess access(ds);

  TrainConfig base;
  base.learning_rate = 1e-3;
  base.batch_size = 128;
  base.max_steps = 6000;
  base.eval_every = 250;
  base.patience = 8;

  const size_t n_seeds = 5;
  std::vector<double> noise_levels{0.0, 0.25, 0.5};
  std::vector<SplitManifest> manifests;  // [noise][seed] flattened
  for (size_t ni = 0; ni < noise_levels.size(); ++ni) {
    for (size_t s = 0; s < n_seeds; ++s) {
      ShiftSpec ld;
      ld.kind = ShiftKind::low_data;
      ld.constrained = {2};
      ld.n = 10;
      ld.noise_p = noise_levels[ni];
      ld.test_per_cell = 50;
      // The same base split per seed; only the noise level varies.
      manifests.push_back(
          build_manifest(ds, schema, ld, derive_seed(kMaster, 81, s)));
    }
  }

  std::vector<double> tests(manifests.size());
  std::vector<std::function<void()>> jobs;
  for (size_t i = 0; i < manifests.size(); ++i) {
    jobs.push_back([&, i]() {
      TrainJobSpec job;
      job.manifest = &manifests[i];
      job.mode = SamplerMode::plain;
      job.lr = base.learning_rate;
      job.seed = derive_seed(kMaster, 82, i);
      tests[i] = run_training(job, ds, access, nullptr, base).test;
    });
  }
  run_parallel(std::move(jobs), 2);

  std::vector<double> means;
  for (size_t ni = 0; ni < noise_levels.size(); ++ni) {
    std::vector<double> per_seed(tests.begin() + ni * n_seeds,
                                 tests.begin() + (ni + 1) * n_seeds);
    means.push_back(mean_of(per_seed));
  }
  for (size_t ni = 1; ni < means.size(); ++ni)
    c.require(means[ni] <= means[ni - 1] + 0.02,
              "mean test rose from " + fmt(means[ni - 1]) + " to " +
                  fmt(means[ni]) + " at p=" + fmt(noise_levels[ni]));
  c.note("p0=" + fmt(means[0]) + " p25=" + fmt(means[1]) + " p50=" + fmt(means[2]));
  return c;
}

// ---- criterion 9: aggregation oracles ---------------------------------------

Check criterion9() {
  Check c;
  Pcg32 rng(derive_seed(kMaster, 9));
  for (int table_idx = 0; table_idx < 50; ++table_idx) {
    size_t n_methods = 2 + rng.bounded(8);
    size_t n_settings = 1 + rng.bounded(4);
    size_t n_seeds = 1 + rng.bounded(5);
    MetricsTable table;
    for (size_t m = 0; m < n_methods; ++m)
      for (size_t s = 0; s < n_settings; ++s)
        for (size_t seed = 0; seed < n_seeds; ++seed) {
          // Quantized accuracies so rank ties genuinely occur.
          double acc = static_cast<double>(rng.bounded(21)) / 20.0;
          table.rows.push_back({"m" + std::to_string(m),
                                "s" + std::to_string(s), s, seed, "lr=1",
                                acc, acc});
        }

    // mean/std oracle
    auto summary = aggregate_mean_std(table);
    for (const auto& row : summary) {
      std::vector<double> vals;
      for (const auto& r : table.rows)
        if (r.method == row.method && r.shift_id == row.shift_id && r.n == row.n)
          vals.push_back(r.test_top1);
      double mean = 0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0;
      for (double v : vals) var += (v - mean) * (v - mean);
      var /= static_cast<double>(vals.size());
      c.require(std::abs(row.mean - mean) < 1e-12, "mean mismatch");
      c.require(std::abs(row.stddev - std::sqrt(var)) < 1e-12, "std mismatch");
    }

    // percent-change oracle against the first method
    AggregateMatrix pc = percent_change(table, "m0");
    for (size_t mi = 0; mi < pc.methods.size(); ++mi)
      for (size_t si = 0; si < pc.settings.size(); ++si) {
        double base_sum = 0, meth_sum = 0;
        size_t base_n = 0, meth_n = 0;
        for (const auto& r : table.rows) {
          if (r.shift_id != pc.settings[si].shift_id || r.n != pc.settings[si].n)
            continue;
          if (r.method == "m0") {
            base_sum += r.test_top1;
            base_n++;
          }
          if (r.method == pc.methods[mi]) {
            meth_sum += r.test_top1;
            meth_n++;
          }
        }
        double base_mean = base_sum / static_cast<double>(base_n);
        double meth_mean = meth_sum / static_cast<double>(meth_n);
        double cell = pc.cells[mi][si];
        if (base_mean == 0.0) {
          c.require(std::isnan(cell), "zero baseline not flagged undefined");
        } else {
          double expected = 100.0 * (meth_mean - base_mean) / base_mean;
          c.require(std::abs(cell - expected) < 1e-12, "percent change mismatch");
        }
      }

    // rank oracle: average ranks by descending accuracy, midpoint medians
    RankResult ranks = rank_methods(table);
    std::vector<std::vector<double>> collected(n_methods);
    for (const auto& g : ranks.groups) {
      for (size_t mi = 0; mi < n_methods; ++mi) {
        double acc = 0;
        for (const auto& r : table.rows)
          if (r.method == ranks.methods[mi] &&
              r.shift_id == g.setting.shift_id && r.n == g.setting.n &&
              r.seed == g.seed)
            acc = r.test_top1;
        double rank = 1.0;
        int ties = 0;
        for (size_t mj = 0; mj < n_methods; ++mj) {
          double other = 0;
          for (const auto& r : table.rows)
            if (r.method == ranks.methods[mj] &&
                r.shift_id == g.setting.shift_id && r.n == g.setting.n &&
                r.seed == g.seed)
              other = r.test_top1;
          if (other > acc) rank += 1.0;
          if (mj != mi && other == acc) ties++;
        }
        double expected = rank + ties / 2.0;
        c.require(g.ranks[mi] == expected, "rank mismatch");
        c.require(g.ranks[mi] >= 1.0 &&
                      g.ranks[mi] <= static_cast<double>(n_methods),
                  "rank outside [1, methods]");
        collected[mi].push_back(g.ranks[mi]);
      }
    }
    for (size_t mi = 0; mi < n_methods; ++mi) {
      std::sort(collected[mi].begin(), collected[mi].end());
      size_t n = collected[mi].size();
      double median = n % 2 ? collected[mi][n / 2]
                            : (collected[mi][n / 2 - 1] + collected[mi][n / 2]) / 2;
      c.require(ranks.median_rank[mi] == median, "median rank mismatch");
    }
  }
  c.note("50 randomized tables match brute force");
  return c;
}

// ---- criterion 10: CLI pipeline determinism ----------------------------------

int run_cli_cmd(const std::string& workdir, const std::string& args) {
  std::string cmd = "cd " + workdir + " && " + std::string(SHIFTBENCH_CLI_PATH) +
                    " " + args + " > /dev/null";
  int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Check criterion10() {
  Check c;
  fs::path root = fs::path("acceptance_tmp");
  fs::remove_all(root);

  // Both runs execute identical commands and configs (relative paths) from
  // their own working directory, so every byte of input is the same.
  auto pipeline = [&](const std::string& name) -> fs::path {
    fs::path dir = root / name;
    fs::create_directories(dir);
    std::string d = dir.string();
    c.require(run_cli_cmd(d, "gen-data --per-cell 30 --seed 77 --out data") == 0,
              "gen-data failed");
    write_file(d + "/shift.json",
               R"({"cmd":"make-shift","schema":"data/schema.json",)"
               R"("dataset":"data/dataset.csv","seed":5,"out":"manifest.json",)"
               R"("spec":{"kind":"spurious_correlation","n":2,)"
               R"("mapping":{"0":0,"1":1,"2":2},"test_per_cell":3,)"
               R"("val_fraction":0.15}})");
    c.require(run_cli_cmd(d, "make-shift --config shift.json") == 0,
              "make-shift failed");
    write_file(d + "/train.json",
               R"({"cmd":"train","schema":"data/schema.json",)"
               R"("dataset":"data/dataset.csv","manifest":"manifest.json",)"
               R"("seed":9,"out":"model.bin","metrics_out":"metrics.csv",)"
               R"("name":"erm","model":{"kind":"mlp1","hidden":8},)"
               R"("train":{"learning_rate":0.001,"batch_size":32,)"
               R"("max_steps":60,"eval_every":20,"patience":3}})");
    c.require(run_cli_cmd(d, "train --config train.json") == 0, "train failed");
    c.require(run_cli_cmd(d, "report --metrics metrics.csv --kind mean_std "
                             "--format csv --out report.csv") == 0,
              "report csv failed");
    c.require(run_cli_cmd(d, "report --metrics metrics.csv --kind mean_std "
                             "--format svg --out report.svg") == 0,
              "report svg failed");
    return dir;
  };

  fs::path a = pipeline("runA");
  fs::path b = pipeline("runB");
  if (c.pass) {
    for (const char* file :
         {"data/schema.json", "data/dataset.csv", "manifest.json", "model.bin",
          "metrics.csv", "report.csv", "report.svg"}) {
      std::string fa = read_file((a / file).string());
      std::string fb = read_file((b / file).string());
      c.require(fa == fb, std::string(file) + " differs between reruns");
    }
  }
  if (c.pass) c.note("7 artifacts byte-identical across reruns");
  fs::remove_all(root);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select a subset of criteria, e.g. `acceptance 1 2 9`.
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  struct Criterion {
    int id;
    const char* name;
    std::function<Check()> run;
  };

  // Criteria 5 and 6 share one training block (same control, same manifests).
  SpuriousResults spurious;
  bool spurious_ready = false;
  auto ensure_spurious = [&]() {
    if (!spurious_ready) {
      spurious = run_spurious_block();
      spurious_ready = true;
    }
  };

  std::vector<Criterion> criteria = {
      {1, "distribution correctness", criterion1},
      {2, "sampler statistics", criterion2},
      {3, "reweighting oracle", criterion3},
      {4, "gradient checks", criterion4},
      {5, "spurious-correlation degradation",
       [&]() {
         ensure_spurious();
         return criterion5(spurious);
       }},
      {6, "oracle-augmentation recovery",
       [&]() {
         ensure_spurious();
         return criterion6(spurious);
       }},
      {7, "color-label unseen shift", criterion7},
      {8, "noise monotonicity", criterion8},
      {9, "aggregation oracles", criterion9},
      {10, "pipeline determinism", criterion10},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.id)) continue;
    Check result;
    auto start = std::chrono::steady_clock::now();
    try {
      result = criterion.run();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n",
                result.pass ? "PASS" : "FAIL", criterion.id, criterion.name,
                elapsed, result.detail.empty() ? "" : " -- ",
                result.detail.c_str());
    std::fflush(stdout);
    if (!result.pass) ++failures;
  }
  return failures;
}
