#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "dsom/pipeline.hpp"
#include "helpers.hpp"
#include "toy.hpp"

using namespace dsom;
using dsom::test::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthConfig toy_synth() {
  SynthConfig s;
  s.num_entities = 60;
  s.num_relations = 4;
  s.num_triples = 200;
  s.num_clusters = 2;
  s.feature_dim = 8;
  s.seed = 5;
  return s;
}

TrainConfig toy_config() {
  TrainConfig c;
  c.dim = 8;
  c.learning_rate = 0.02;
  c.batch_size = 32;
  c.epochs = 3;
  c.teacher_epochs = 3;
  c.policy_hidden = 16;
  c.seed = 1;
  return c;
}

}  // namespace

TEST_CASE("synthetic KG generation") {
  const SynthSplits a = generate_synthetic_kg(SynthConfig{});
  CHECK(a.train.size() == 1600);
  CHECK(a.valid.size() == 200);
  CHECK(a.test.size() == 200);
  const SynthSplits b = generate_synthetic_kg(SynthConfig{});
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);

  std::set<SynthSplits::NameTriple> all;
  for (const auto* split : {&a.train, &a.valid, &a.test}) all.insert(split->begin(), split->end());
  CHECK(all.size() == 2000);

  SynthConfig too_many;
  too_many.num_entities = 4;
  too_many.num_relations = 1;
  too_many.num_triples = 17;
  CHECK_THROWS_AS(generate_synthetic_kg(too_many), InfeasibleSynthConfig);
  SynthConfig too_narrow;
  too_narrow.spread = 1;
  too_narrow.num_triples = 200 * 10 + 1;
  CHECK_THROWS_AS(generate_synthetic_kg(too_narrow), InfeasibleSynthConfig);
}

TEST_CASE("gen-synth output is deterministic") {
  TempDir a("gen-a"), b("gen-b");
  const auto ra = cmd_gen_synth(toy_synth(), a.path());
  const auto rb = cmd_gen_synth(toy_synth(), b.path());
  CHECK(ra.content_hash == rb.content_hash);
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "entities.tsv", "relations.tsv", "visual.feat",
                        "textual.feat"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  SynthConfig other = toy_synth();
  other.seed = 6;
  TempDir c("gen-c");
  CHECK(cmd_gen_synth(other, c.path()).content_hash != ra.content_hash);
  const FeatureMatrix v = read_feature_file(a / "visual.feat");
  CHECK(v.num_entities == 60);
  CHECK(v.modality == FeatureModality::visual);
}

TEST_CASE("pretrain -> train-student -> eval contract") {
  TempDir work("pipe");
  cmd_gen_synth(toy_synth(), work / "data");
  const DataPaths data = DataPaths::in_dir(work / "data");

  PretrainRequest pre;
  pre.config = toy_config();
  pre.data = data;
  pre.visual = work / "data" / "visual.feat";
  pre.textual = work / "data" / "textual.feat";
  pre.output.runs_root = work / "runs";
  const fs::path pre_dir = cmd_pretrain(pre);
  for (const char* f : {"teachers.ckpt", "pretrain_loss.csv", "teacher_valid.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(pre_dir / f), f);
  const auto pre_manifest = nlohmann::json::parse(slurp(pre_dir / "manifest.json"));
  CHECK(pre_manifest["phase"] == "pretrain");
  CHECK(slurp(pre_dir / "pretrain_loss.csv").rfind("# manifest " + pre_manifest["hash"].get<std::string>(), 0) == 0);
  // Same request, same run directory: refused without force.
  CHECK_THROWS(cmd_pretrain(pre));

  StudentRequest stu;
  stu.config = toy_config();
  stu.data = data;
  stu.teachers = pre_dir / "teachers.ckpt";
  stu.output.runs_root = work / "runs";
  const fs::path stu_dir = cmd_train_student(stu);
  for (const char* f : {"student.ckpt", "policy.ckpt", "loss_trace.csv", "reward_curve.csv", "strategy_stats.csv",
                        "manifest.json"})
    CHECK_MESSAGE(fs::exists(stu_dir / f), f);

  EvalRequest ev;
  ev.data = data;
  ev.checkpoint = stu_dir / "student.ckpt";
  ev.output.out = work / "eval1";
  const EvalOutput e1 = cmd_eval(ev);
  ev.output.out = work / "eval2";
  const EvalOutput e2 = cmd_eval(ev);
  CHECK(slurp(e1.dir / "metrics.json") == slurp(e2.dir / "metrics.json"));
  const auto metrics = nlohmann::json::parse(slurp(e1.dir / "metrics.json"));
  for (const char* key : {"mrr", "mr", "hits1", "hits3", "hits10", "count", "tie_policy"}) CHECK(metrics.contains(key));
  CHECK(metrics["count"] == 40);
  CHECK(metrics["manifest_hash"] == e1.manifest_hash);

  ev.checkpoint = pre_dir / "teachers.ckpt";
  ev.output.out = work / "eval_teachers";
  const EvalOutput teachers = cmd_eval(ev);
  const auto tm = nlohmann::json::parse(slurp(teachers.dir / "manifest.json"));
  CHECK(tm["extra"]["scorer"] == "avg");

  const std::string report = cmd_report({pre_dir, stu_dir, e1.dir, teachers.dir});
  CHECK(report.find("| ") != std::string::npos);
  CHECK(report.find("MRR") != std::string::npos);

  // A missing feature file names its modality.
  pre.visual = work / "data" / "nope.feat";
  pre.output.force = true;
  try {
    cmd_pretrain(pre);
    FAIL("expected an error");
  } catch (const PhaseError& err) {
    CHECK(std::string(err.what()).find("visual") != std::string::npos);
  }
}

TEST_CASE("student trained long enough fits the training split") {
  const auto toy = dsom::test::make_toy();
  TrainConfig c = toy_config();
  c.strategy = Strategy::teacher_avg;
  c.kd_variant = KdVariant::none;
  c.gamma = 0.0;
  c.epochs = 150;
  c.dim = 16;
  c.learning_rate = 0.05;
  c.eval_every = 0;
  Rng rng(1);
  const TeacherEnsemble ens = TeacherEnsemble::init(toy.ds.num_entities(), toy.ds.num_aug_relations(), 4, toy.visual,
                                                    toy.textual, rng);
  const FrozenTeachers frozen(ens);
  const StudentResult res = train_student(toy.ds, frozen, c);
  const auto m = evaluate(model_scorer(res.student), toy.ds.train, build_filter_index(toy.ds), toy.ds.num_relations());
  CHECK(m.metrics.mrr > 0.95);
  CHECK(res.epochs.size() == 150);
  CHECK_FALSE(res.policy.has_value());
}

TEST_CASE("manifest hash ignores timings") {
  RunManifest m;
  m.phase = "eval";
  const std::string h = m.hash();
  m.timings["eval"] = 12.5;
  CHECK(m.hash() == h);
  m.extra["split"] = "valid";
  CHECK(m.hash() != h);
}

TEST_CASE("identical pretrain runs write byte-identical checkpoints") {
  TempDir work("pipe-det");
  cmd_gen_synth(toy_synth(), work / "data");
  PretrainRequest pre;
  pre.config = toy_config();
  pre.data = DataPaths::in_dir(work / "data");
  pre.visual = work / "data" / "visual.feat";
  pre.textual = work / "data" / "textual.feat";
  pre.output.out = work / "a";
  cmd_pretrain(pre);
  pre.output.out = work / "b";
  cmd_pretrain(pre);
  CHECK(slurp(work / "a" / "teachers.ckpt") == slurp(work / "b" / "teachers.ckpt"));
}
