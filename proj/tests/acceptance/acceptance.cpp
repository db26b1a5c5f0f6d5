// Acceptance runner: one PASS/FAIL line per gated criterion. Exit status is the
// number of failures (capped at 1).
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dsom/distill.hpp"
#include "dsom/eval.hpp"
#include "dsom/kge.hpp"
#include "dsom/pipeline.hpp"
#include "dsom/reinforce.hpp"
#include "helpers.hpp"

using namespace dsom;
using dsom::test::max_fd_error;
using dsom::test::random_matrix;
using dsom::test::random_vector;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::set<EntityId> random_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::set<EntityId> s;
  while (s.size() < k) s.insert(static_cast<EntityId>(rng() % n));
  return s;
}

// ---- oracles -----------------------------------------------------------------

std::size_t sort_rank(const Vector& scores, EntityId target, const std::set<EntityId>& known) {
  std::vector<double> others;
  for (Eigen::Index e = 0; e < scores.size(); ++e)
    if (static_cast<EntityId>(e) != target && !known.count(static_cast<EntityId>(e))) others.push_back(scores[e]);
  std::sort(others.begin(), others.end(), std::greater<>());
  const auto above = static_cast<std::size_t>(
      std::find_if(others.begin(), others.end(), [&](double s) { return s <= scores[target]; }) - others.begin());
  const auto ties = static_cast<std::size_t>(std::count(others.begin(), others.end(), scores[target]));
  return 1 + above + ties / 2;
}

// Direct transcription of the neighbour-decoupled objective from raw logits.
double literal_ndkd(const Vector& zt, const Vector& zs, double tau, const std::set<EntityId>& nb, double alpha,
                    double beta) {
  const auto probs = [tau](const Vector& z) {
    std::vector<double> e(static_cast<std::size_t>(z.size()));
    double sum = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) sum += (e[static_cast<std::size_t>(i)] = std::exp((z[i] - z.maxCoeff()) / tau));
    for (double& x : e) x /= sum;
    return e;
  };
  const auto pt = probs(zt), ps = probs(zs);
  double bt = 0, bs = 0, rt = 0, rs = 0;
  for (std::size_t e = 0; e < pt.size(); ++e) {
    if (nb.count(static_cast<EntityId>(e))) {
      bt += pt[e];
      bs += ps[e];
    } else {
      rt += pt[e];
      rs += ps[e];
    }
  }
  bt /= static_cast<double>(nb.size());
  bs /= static_cast<double>(nb.size());
  double nn = 0;
  for (std::size_t e = 0; e < pt.size(); ++e)
    if (!nb.count(static_cast<EntityId>(e))) nn += (pt[e] / rt) * std::log((pt[e] / rt) / (ps[e] / rs));
  return alpha * (bt * std::log(bt / bs) + (1 - bt) * std::log((1 - bt) / (1 - bs))) + beta * nn;
}

// ---- criteria ----------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  std::size_t checks = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t n = 8 + rng() % 13, nr = 2 + rng() % 3, dim = 2 + rng() % 7;
    std::vector<Triple> batch;
    for (int i = 0; i < 4; ++i)
      batch.push_back({static_cast<EntityId>(rng() % n), static_cast<RelationId>(rng() % nr),
                       static_cast<EntityId>(rng() % n)});
    KgeModel model = trial % 2 == 0 ? KgeModel::structural(n, nr, dim, rng)
                                    : KgeModel::projected(random_matrix(static_cast<Eigen::Index>(n), 5, rng), nr, dim, rng);
    const LossAndGrads lg = ce_loss_and_grads(batch, model);
    auto params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k, ++checks)
      worst = std::max(worst, max_fd_error(*params[k], lg.grads[k], [&] { return ce_loss_and_grads(batch, model).loss; }));
  }
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 4 + rng() % 17;
    const double tau = 1.0 + trial % 4;
    const Vector zt = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
    Vector zs = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
    const ScaledDistribution tea = temp_scale(zt, tau);
    const KdResult v = vanilla_kd(tea, temp_scale(zs, tau));
    worst = std::max(worst, max_fd_error(zs, v.grad, [&] { return vanilla_kd(tea, temp_scale(zs, tau)).loss; }));
    const auto nb = random_subset(n, 1 + rng() % (n - 2), rng);
    const DecoupledView tv = decouple(tea, nb);
    const NdkdResult nd = ndkd_loss(tv, decouple(temp_scale(zs, tau), nb), 1.0, 1.5);
    worst = std::max(worst, max_fd_error(zs, nd.grad, [&] {
                       return ndkd_loss(tv, decouple(temp_scale(zs, tau), nb), 1.0, 1.5).loss;
                     }));
    checks += 2;
  }
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t in = 3 + rng() % 28, hidden = 2 + rng() % 15;
    PolicyNet p = PolicyNet::init(in, hidden, rng);
    p.b1 = random_matrix(static_cast<Eigen::Index>(hidden), 1, rng, 0.5);
    std::vector<RcSample> batch;
    for (int i = 0; i < 4; ++i)
      batch.push_back({random_vector(static_cast<Eigen::Index>(in), rng), Action{static_cast<int>(rng() % 7)},
                       i % 2 ? 11.0 : -11.0});
    const LossAndGrads lg = rc_loss_and_grads(p, batch);
    auto params = p.parameters();
    for (std::size_t k = 0; k < params.size(); ++k, ++checks)
      worst = std::max(worst, max_fd_error(*params[k], lg.grads[k], [&] { return rc_loss_and_grads(p, batch).loss; }));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 5.0,
          std::to_string(checks) + " tensors, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s"};
}

Outcome oracle_equivalence() {
  Rng rng(202);
  std::size_t rank_bad = 0, eval_bad = 0;
  double ndkd_err = 0, agg_err = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 3 + rng() % 30;
    Vector s = random_vector(static_cast<Eigen::Index>(n), rng);
    if (inst % 2) s = s.array().round();
    const auto target = static_cast<EntityId>(rng() % n);
    const auto known = random_subset(n, rng() % n, rng);
    rank_bad += filtered_rank(s, target, known) != sort_rank(s, target, known);

    // evaluate over a random split with a random lookup-table scorer.
    const std::size_t nr = 1 + rng() % 3;
    std::vector<Triple> split;
    FilterIndex filter;
    for (int i = 0; i < 5; ++i) {
      const Triple t{static_cast<EntityId>(rng() % n), static_cast<RelationId>(rng() % nr),
                     static_cast<EntityId>(rng() % n)};
      split.push_back(t);
      filter.insert(t);
      filter.insert({t.tail, static_cast<RelationId>(t.rel + nr), t.head});
    }
    std::map<std::pair<EntityId, RelationId>, Vector> table;
    for (EntityId h = 0; h < n; ++h)
      for (RelationId r = 0; r < 2 * nr; ++r) table[{h, r}] = random_vector(static_cast<Eigen::Index>(n), rng).array().round();
    const EvalResult res = evaluate([&](EntityId h, RelationId r) { return table.at({h, r}); }, split, filter, nr);
    for (std::size_t i = 0; i < split.size(); ++i) {
      const Triple t = split[i];
      const auto rev = static_cast<RelationId>(t.rel + nr);
      eval_bad += res.ranks[2 * i].rank != sort_rank(table.at({t.head, t.rel}), t.tail, filter.at(t.head, t.rel));
      eval_bad += res.ranks[2 * i + 1].rank != sort_rank(table.at({t.tail, rev}), t.head, filter.at(t.tail, rev));
    }

    if (n >= 3) {
      const double tau = 1.0 + inst % 5;
      const Vector zt = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
      const Vector zs = random_vector(static_cast<Eigen::Index>(n), rng, 2.0);
      const auto nb = random_subset(n, 1 + rng() % (n - 1), rng);
      const NdkdResult r = ndkd_loss(decouple(temp_scale(zt, tau), nb), decouple(temp_scale(zs, tau), nb), 1.0, 2.0);
      ndkd_err = std::max(ndkd_err, std::abs(r.loss - literal_ndkd(zt, zs, tau, nb, 1.0, 2.0)));
    }

    const std::vector<Vector> tv{random_vector(static_cast<Eigen::Index>(n), rng),
                                 random_vector(static_cast<Eigen::Index>(n), rng),
                                 random_vector(static_cast<Eigen::Index>(n), rng)};
    const Action a{static_cast<int>(rng() % 7)};
    const Vector agg = aggregate_teachers(tv, a);
    for (std::size_t e = 0; e < n; ++e) {
      double sum = 0;
      int k = 0;
      for (int m = 0; m < 3; ++m)
        if ((a.mask() >> m) & 1u) sum += tv[static_cast<std::size_t>(m)][static_cast<Eigen::Index>(e)], ++k;
      agg_err = std::max(agg_err, std::abs(agg[static_cast<Eigen::Index>(e)] - sum / k));
    }
  }
  return {rank_bad == 0 && eval_bad == 0 && ndkd_err < 1e-10 && agg_err < 1e-12,
          "rank mismatches " + std::to_string(rank_bad) + ", evaluate mismatches " + std::to_string(eval_bad) +
              ", ndkd err " + fmt("%.1e", ndkd_err) + ", aggregate err " + fmt("%.1e", agg_err)};
}

Outcome reward_truth_table() {
  const RewardConfig cfg;
  const bool table = compute_reward(0.5, 0.7, cfg) == 1.0 && compute_reward(0.9, 0.1, cfg) == -10.0 &&
                     compute_reward(0.4, 0.4, cfg) == -10.0 && compute_reward(0.2, 0.3, cfg) == 1.0;
  // Exhaustive over both outcomes of the sampled subset and of the baseline.
  std::set<double> deltas;
  for (double r : {1.0, -10.0})
    for (double b : {1.0, -10.0}) deltas.insert(r - b);
  // And through the real reward path on random teachers.
  Rng rng(303);
  bool path_ok = true;
  for (int i = 0; i < 5000; ++i) {
    const std::vector<Vector> tv{random_vector(6, rng, 3), random_vector(6, rng, 3), random_vector(6, rng, 3)};
    const double stu = std::abs(random_vector(1, rng, 2)[0]);
    const Action a{static_cast<int>(rng() % 7)};
    const double d = compute_reward(cross_entropy(aggregate_teachers(tv, a), 0), stu, cfg) - baseline_reward(tv, 0, stu, cfg);
    path_ok &= d == 0.0 || d == 11.0 || d == -11.0;
  }
  const bool ok = table && path_ok && deltas == std::set<double>{-11.0, 0.0, 11.0};
  return {ok, std::string("rewards {1,-10,-10} ") + (table ? "ok" : "wrong") + ", delta set {-11,0,11} " +
                  (path_ok ? "ok" : "violated")};
}

Outcome ndkd_reduces_to_dkd() {
  Rng rng(404);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng() % 30;
    const double tau = 0.5 + (rng() % 8);
    const double alpha = 0.1 + (rng() % 30) / 10.0, beta = 0.1 + (rng() % 30) / 10.0;
    const auto t = static_cast<EntityId>(rng() % n);
    const ScaledDistribution tea = temp_scale(random_vector(static_cast<Eigen::Index>(n), rng, 3.0), tau);
    const ScaledDistribution stu = temp_scale(random_vector(static_cast<Eigen::Index>(n), rng, 3.0), tau);
    const NdkdResult a = ndkd_loss(decouple(tea, {t}), decouple(stu, {t}), alpha, beta);
    const NdkdResult b = dkd_loss(tea, stu, t, alpha, beta);
    worst = std::max({worst, std::abs(a.loss - b.loss), (a.grad - b.grad).cwiseAbs().maxCoeff()});
  }
  return {worst < 1e-12, "1000 distributions, max |ndkd - dkd| " + fmt("%.1e", worst)};
}

Outcome bandit() {
  const auto t0 = Clock::now();
  int passed = 0;
  std::string steps;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const std::size_t n = 20;
    PolicyNet p = PolicyNet::init(3 * n, 1024, rng);
    AdamState opt;
    opt.learning_rate = 1e-3;
    const Action good = Action::from_mask(0b101);
    const std::vector<Vector> probe{random_vector(static_cast<Eigen::Index>(n), rng),
                                    random_vector(static_cast<Eigen::Index>(n), rng),
                                    random_vector(static_cast<Eigen::Index>(n), rng)};
    const Vector probe_state = build_state(probe, true);
    long reached = -1;
    for (long step = 1; step <= 2000; ++step) {
      const std::vector<Vector> tv{random_vector(static_cast<Eigen::Index>(n), rng),
                                   random_vector(static_cast<Eigen::Index>(n), rng),
                                   random_vector(static_cast<Eigen::Index>(n), rng)};
      Vector state = build_state(tv, true);
      const Action a = sample_action(policy_forward(p, state), rng);
      const std::vector<RcSample> batch{{std::move(state), a, a == good ? 11.0 : -11.0}};
      const LossAndGrads lg = rc_loss_and_grads(p, batch);
      auto params = p.parameters();
      optimizer_step(params, lg.grads, opt);
      if (policy_forward(p, probe_state)[good.index] > 0.9) {
        reached = step;
        break;
      }
    }
    passed += reached > 0;
    steps += (steps.empty() ? "" : ",") + (reached > 0 ? std::to_string(reached) : std::string("-"));
  }
  const double secs = seconds_since(t0);
  return {passed >= 4 && secs < 30.0,
          std::to_string(passed) + "/5 seeds reached p>0.9 (steps " + steps + "), " + fmt("%.1f", secs) + " s"};
}

// ---- desk scale ----------------------------------------------------------------

struct DeskRun {
  double ndkd = 0, vanilla = 0, avg = 0;
  double first_quartile_delta = 0, last_quartile_delta = 0;
};

TrainConfig desk_config(std::uint64_t seed) {
  TrainConfig c;
  c.dim = 32;
  c.learning_rate = 0.01;
  c.epochs = 60;
  c.teacher_epochs = 60;
  c.seed = seed;
  return c;
}

DeskRun desk_run(const Dataset& ds, const FeatureMatrix& visual, const FeatureMatrix& textual, std::uint64_t seed) {
  DeskRun out;
  const TrainConfig base = desk_config(seed);
  const PretrainResult pre = pretrain_teachers(ds, visual, textual, base);
  const FrozenTeachers frozen(pre.teachers);
  const TeacherLogitCache cache(frozen, ds.train_aug);
  const FilterIndex filter = build_filter_index(ds);
  const auto test_mrr = [&](const Scorer& s) { return evaluate(s, ds.test, filter, ds.num_relations()).metrics.mrr; };
  out.avg = test_mrr(ensemble_scorer(frozen, "avg"));

  const StudentResult ndkd = train_student(ds, cache, base);
  out.ndkd = test_mrr(model_scorer(ndkd.student));
  const std::size_t q = std::max<std::size_t>(ndkd.epochs.size() / 4, 1);
  for (std::size_t i = 0; i < q; ++i) {
    out.first_quartile_delta += ndkd.epochs[i].mean_delta / static_cast<double>(q);
    out.last_quartile_delta += ndkd.epochs[ndkd.epochs.size() - 1 - i].mean_delta / static_cast<double>(q);
  }

  TrainConfig vanilla = base;
  vanilla.kd_variant = KdVariant::vanilla;
  out.vanilla = test_mrr(model_scorer(train_student(ds, cache, vanilla).student));
  return out;
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---- determinism -------------------------------------------------------------

std::string run_pipeline_once(const fs::path& dir) {
  SynthConfig s;
  s.num_entities = 60;
  s.num_relations = 4;
  s.num_triples = 240;
  s.num_clusters = 2;
  s.feature_dim = 8;
  cmd_gen_synth(s, dir / "data");
  TrainConfig c;
  c.dim = 8;
  c.epochs = 4;
  c.teacher_epochs = 4;
  c.learning_rate = 0.02;
  c.policy_hidden = 32;
  c.batch_size = 32;
  const DataPaths data = DataPaths::in_dir(dir / "data");
  PretrainRequest pre{c, data, dir / "data" / "visual.feat", dir / "data" / "textual.feat", {}};
  pre.output.out = dir / "pretrain";
  pre.output.force = true;
  StudentRequest stu{c, data, cmd_pretrain(pre) / "teachers.ckpt", {}};
  stu.output.out = dir / "student";
  stu.output.force = true;
  EvalRequest ev;
  ev.data = data;
  ev.checkpoint = cmd_train_student(stu) / "student.ckpt";
  ev.output.out = dir / "eval";
  ev.output.force = true;
  const EvalOutput out = cmd_eval(ev);
  std::ifstream in(out.dir / "metrics.json", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsom acceptance"};
  std::string work_dir = "acceptance_work";
  bool skip_desk = false;
  app.add_option("--work-dir", work_dir, "Scratch directory");
  app.add_flag("--skip-desk", skip_desk, "Skip the desk-scale run (reported as FAIL)");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work_dir);

  int failures = 0;
  const auto report = [&](const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  };
  const auto guarded = [&](const std::string& name, const std::function<Outcome()>& f) {
    try {
      report(name, f());
    } catch (const std::exception& e) {
      report(name, {false, std::string("error: ") + e.what()});
    }
  };

  guarded("gradient-suite", gradient_suite);
  guarded("oracle-equivalence", oracle_equivalence);
  guarded("reward-truth-table", reward_truth_table);
  guarded("ndkd-dkd-reduction", ndkd_reduces_to_dkd);
  guarded("bandit-convergence", bandit);

  if (skip_desk) {
    report("desk-scale-ordering", {false, "skipped"});
    report("reward-trend", {false, "skipped"});
  } else {
    try {
      const auto t0 = Clock::now();
      const SynthSplits splits = generate_synthetic_kg(SynthConfig{});
      const Dataset ds = make_dataset(splits.train, splits.valid, splits.test);
      const SynthConfig synth;
      const auto [visual, textual] = synth_features(ds, synth.feature_dim, synth.signal_modalities, synth.seed);
      std::vector<double> ndkd, vanilla, avg;
      std::string trend;
      int rising = 0;
      for (std::uint64_t seed : {1, 2, 3}) {
        const DeskRun r = desk_run(ds, visual, textual, seed);
        ndkd.push_back(r.ndkd);
        vanilla.push_back(r.vanilla);
        avg.push_back(r.avg);
        rising += r.last_quartile_delta > r.first_quartile_delta;
        trend += (trend.empty() ? "" : "; ") + fmt("%.3f", r.first_quartile_delta) + " -> " +
                 fmt("%.3f", r.last_quartile_delta);
        std::cout << "  seed " << seed << ": ndkd+rc " << fmt("%.4f", r.ndkd) << ", vanilla+rc "
                  << fmt("%.4f", r.vanilla) << ", teacher avg " << fmt("%.4f", r.avg) << std::endl;
      }
      const double secs = seconds_since(t0);
      const double mn = median3(ndkd), mv = median3(vanilla), ma = median3(avg);
      report("desk-scale-ordering",
             {mn >= mv - 0.005 && mn >= ma + 0.02 && secs < 600.0,
              "median MRR ndkd+rc " + fmt("%.4f", mn) + ", vanilla+rc " + fmt("%.4f", mv) + ", teacher avg " +
                  fmt("%.4f", ma) + ", " + fmt("%.0f", secs) + " s"});
      report("reward-trend", {rising == 3, "epoch-mean delta first -> last quartile per seed: " + trend});
    } catch (const std::exception& e) {
      report("desk-scale-ordering", {false, std::string("error: ") + e.what()});
      report("reward-trend", {false, "not run"});
    }
  }

  guarded("determinism", [&] {
    const std::string a = run_pipeline_once(fs::path(work_dir) / "det_a");
    const std::string b = run_pipeline_once(fs::path(work_dir) / "det_b");
    return Outcome{!a.empty() && a == b, a == b ? "metrics JSON byte-identical" : "metrics JSON differs"};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
