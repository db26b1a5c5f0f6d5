#include "dsom/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "dsom/checkpoint.hpp"
#include "dsom/util.hpp"

#ifndef DSOM_VERSION
#define DSOM_VERSION "0.1.0"
#endif

namespace dsom {

const char* version_string() { return DSOM_VERSION; }

using json = nlohmann::ordered_json;

namespace {

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

json manifest_body(const RunManifest& m) {
  json j;
  j["phase"] = m.phase;
  j["version"] = m.version;
  j["seed"] = m.config.seed;
  j["dataset_fingerprint"] = m.dataset_fingerprint;
  json cfg = json::object();
  for (const auto& [k, v] : m.config.to_map()) cfg[k] = v;
  j["config"] = cfg;
  j["inputs"] = m.inputs;
  j["extra"] = m.extra;
  return j;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

fs::path prepare_run_dir(const OutputOptions& opt, const std::string& phase, const std::string& hash) {
  const fs::path dir = opt.out ? *opt.out : opt.runs_root / (phase + "-" + hash.substr(0, 12));
  if (fs::exists(dir / "manifest.json") && !opt.force)
    throw IoError("run directory " + dir.string() + " already holds a run (use --force to overwrite)");
  fs::create_directories(dir);
  return dir;
}

/// Every CSV artifact starts with the manifest hash as a comment line.
std::ofstream open_csv(const fs::path& path, const std::string& hash, const std::string& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# manifest " << hash << "\n" << header << "\n";
  out.precision(17);
  return out;
}

Dataset load_data(const DataPaths& p) {
  for (const auto& [role, path] : {std::pair{"train", p.train}, {"valid", p.valid}, {"test", p.test}})
    if (!fs::exists(path)) throw IoError(std::string(role) + " split not found: " + path.string());
  return load_dataset(p.train, p.valid, p.test);
}

FeatureMatrix load_modality(const fs::path& path, FeatureModality expected, std::size_t num_entities) {
  const char* name = to_string(expected);
  if (path.empty() || !fs::exists(path))
    throw IoError(std::string(name) + " feature file not found: " + path.string());
  FeatureMatrix m;
  try {
    m = read_feature_file(path);
  } catch (const std::exception& e) {
    throw IoError(std::string(name) + " feature file " + path.string() + ": " + e.what());
  }
  if (m.modality != expected)
    throw IoError(std::string(name) + " feature file " + path.string() + " is tagged " + to_string(m.modality));
  if (m.num_entities != num_entities)
    throw IoError(std::string(name) + " feature file has " + std::to_string(m.num_entities) +
                  " rows but the dataset has " + std::to_string(num_entities) + " entities");
  return m;
}

void add_data_inputs(RunManifest& m, const DataPaths& p) {
  m.inputs["train"] = file_hash(p.train);
  m.inputs["valid"] = file_hash(p.valid);
  m.inputs["test"] = file_hash(p.test);
}

template <typename F>
auto with_phase(const std::string& phase, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const PhaseError&) {
    throw;
  } catch (const std::exception& e) {
    throw PhaseError(phase, e.what());
  }
}

Metrics valid_metrics(const Scorer& scorer, const Dataset& ds, const FilterIndex& filter) {
  return evaluate(scorer, ds.valid, filter, ds.num_relations()).metrics;
}

}  // namespace

std::string RunManifest::hash() const { return hex64([&] {
  Fnv1a h;
  h.update(manifest_body(*this).dump());
  return h.digest();
}()); }

std::string RunManifest::to_json(bool with_timings) const {
  json j = manifest_body(*this);
  j["hash"] = hash();
  if (with_timings) j["timings"] = timings;
  return j.dump(2) + "\n";
}

std::string file_hash(const fs::path& path) {
  Fnv1a h;
  h.update(slurp(path));
  return hex64(h.digest());
}

DataPaths DataPaths::in_dir(const fs::path& dir) { return {dir / "train.tsv", dir / "valid.tsv", dir / "test.tsv"}; }

const std::vector<Triple>& split_by_name(const Dataset& ds, const std::string& split) {
  if (split == "train") return ds.train;
  if (split == "valid") return ds.valid;
  if (split == "test") return ds.test;
  throw std::invalid_argument("unknown split '" + split + "' (train, valid, test)");
}

Scorer model_scorer(const KgeModel& model) {
  auto table = std::make_shared<ComplexEmbeddingTable>(model.entity_table());
  auto rels = std::make_shared<ComplexEmbeddingTable>(model.relations);
  return [table, rels](EntityId h, RelationId r) { return score_all(h, r, *table, *rels); };
}

Scorer ensemble_scorer(const FrozenTeachers& teachers, const std::string& name) {
  if (name == "avg")
    return [&teachers](EntityId h, RelationId r) { return averaged_teacher_probs(teachers.logits(h, r)); };
  for (Modality m : kModalityOrder)
    if (name == to_string(m)) return [&teachers, m](EntityId h, RelationId r) { return teachers.logits(m, h, r); };
  throw std::invalid_argument("unknown teacher scorer '" + name + "' (avg, structural, visual, textual)");
}

// ---- pre-training -----------------------------------------------------------

PretrainResult pretrain_teachers(const Dataset& ds, const FeatureMatrix& visual, const FeatureMatrix& textual,
                                 const TrainConfig& config) {
  config.validate();
  Rng rng(config.seed);
  PretrainResult out;
  out.teachers = TeacherEnsemble::init(ds.num_entities(), ds.num_aug_relations(), config.dim, visual, textual, rng);
  TeacherOptimizers opts;
  for (auto& s : opts.states) s.learning_rate = config.learning_rate;
  const FilterIndex filter = build_filter_index(ds);

  std::array<KgeModel, kNumModalities> best = out.teachers.models;
  std::array<double, kNumModalities> best_mrr;
  best_mrr.fill(-1.0);
  auto consider = [&](std::size_t epoch) {
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      const Metrics mt = valid_metrics(model_scorer(out.teachers.models[m]), ds, filter);
      if (mt.mrr > best_mrr[m]) {
        best_mrr[m] = mt.mrr;
        best[m] = out.teachers.models[m];
        out.valid_metrics[m] = mt;
        out.best_epoch[m] = epoch;
      }
    }
  };
  const bool select = config.eval_every != 0 && !ds.valid.empty();
  if (select) consider(0);
  for (std::size_t epoch = 1; epoch <= config.teacher_epochs; ++epoch) {
    out.losses.push_back(pretrain_epoch(out.teachers, opts, ds.train_aug, config, rng));
    if (select && (epoch % config.eval_every == 0 || epoch == config.teacher_epochs)) consider(epoch);
  }
  if (select) {
    out.teachers.models = best;
  } else {
    for (std::size_t m = 0; m < kNumModalities; ++m) {
      if (!ds.valid.empty()) out.valid_metrics[m] = valid_metrics(model_scorer(out.teachers.models[m]), ds, filter);
      out.best_epoch[m] = config.teacher_epochs;
    }
  }
  return out;
}

// ---- student ----------------------------------------------------------------

StudentResult train_student(const Dataset& ds, const TeacherLogitSource& teachers, const TrainConfig& config) {
  config.validate();
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  StudentResult out;
  out.student = KgeModel::structural(ds.num_entities(), ds.num_aug_relations(), config.dim, rng);
  const bool reinforced = config.strategy == Strategy::reinforced;
  if (reinforced) out.policy = PolicyNet::init(kNumModalities * ds.num_entities(), config.policy_hidden, rng);

  AdamState student_opt;
  student_opt.learning_rate = config.learning_rate;
  AdamState policy_opt;
  policy_opt.learning_rate = config.policy_lr;

  const NeighborIndex neighbors = build_neighbor_index(ds.train_aug);
  const FilterIndex filter = build_filter_index(ds);
  const bool select = config.eval_every != 0 && !ds.valid.empty();
  KgeModel best = out.student;
  double best_mrr = -1.0;

  std::vector<std::size_t> order(ds.train_aug.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Triple> batch;
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    std::array<std::size_t, kNumActions> counts{};
    double delta_sum = 0.0;
    std::size_t seen = 0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(ds.train_aug[order[i]]);

      StudentStep step = student_total_loss(batch, out.student, teachers, neighbors,
                                            out.policy ? &*out.policy : nullptr, config, rng);
      if (config.l2 > 0.0) {
        auto params = out.student.parameters();
        for (std::size_t p = 0; p < params.size(); ++p) step.student_grads[p] += config.l2 * *params[p];
      }
      auto params = out.student.parameters();
      optimizer_step(params, step.student_grads, student_opt);
      if (reinforced) {
        auto pp = out.policy->parameters();
        optimizer_step(pp, step.policy_grads, policy_opt);
        double d = 0.0;
        for (const auto& r : step.rewards) d += r.advantage;
        delta_sum += d;
        out.reward_curve.push_back({epoch, global_step, d / static_cast<double>(step.rewards.size())});
      }
      const double w = static_cast<double>(batch.size());
      log.loss.ce += w * step.loss.ce;
      log.loss.rc += w * step.loss.rc;
      log.loss.nekd += w * step.loss.nekd;
      log.loss.nnkd += w * step.loss.nnkd;
      log.loss.kd += w * step.loss.kd;
      log.loss.total += w * step.loss.total;
      for (std::size_t a = 0; a < kNumActions; ++a) counts[a] += step.action_counts[a];
      log.kd_skipped += step.kd_skipped;
      seen += batch.size();
      ++global_step;
    }

    const double n = static_cast<double>(std::max<std::size_t>(seen, 1));
    for (double* v : {&log.loss.ce, &log.loss.rc, &log.loss.nekd, &log.loss.nnkd, &log.loss.kd, &log.loss.total})
      *v /= n;
    log.mean_delta = delta_sum / n;
    for (std::size_t a = 0; a < kNumActions; ++a) log.action_fraction[a] = static_cast<double>(counts[a]) / n;

    if (select && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      const Metrics mt = valid_metrics(model_scorer(out.student), ds, filter);
      log.valid_mrr = mt.mrr;
      if (mt.mrr > best_mrr) {
        best_mrr = mt.mrr;
        best = out.student;
        out.best_epoch = epoch;
        out.best_valid = mt;
      }
    }
    out.epochs.push_back(log);
  }
  if (select && best_mrr >= 0.0) {
    out.student = best;
  } else {
    out.best_epoch = config.epochs;
    if (!ds.valid.empty()) out.best_valid = valid_metrics(model_scorer(out.student), ds, filter);
  }
  return out;
}

// ---- commands ---------------------------------------------------------------

GenSynthResult cmd_gen_synth(const SynthConfig& config, const fs::path& out_dir) {
  return with_phase("gen-synth", [&] {
    const SynthSplits splits = generate_synthetic_kg(config);
    const Dataset ds = make_dataset(splits.train, splits.valid, splits.test);
    auto [visual, textual] = synth_features(ds, config.feature_dim, config.signal_modalities, config.seed);
    fs::create_directories(out_dir);
    write_triples(out_dir / "train.tsv", ds.train, ds);
    write_triples(out_dir / "valid.tsv", ds.valid, ds);
    write_triples(out_dir / "test.tsv", ds.test, ds);
    ds.entities.dump(out_dir / "entities.tsv");
    ds.relations.dump(out_dir / "relations.tsv");
    write_feature_file(visual, out_dir / "visual.feat");
    write_feature_file(textual, out_dir / "textual.feat");
    Fnv1a h;
    for (const char* f : {"train.tsv", "valid.tsv", "test.tsv", "entities.tsv", "relations.tsv", "visual.feat",
                          "textual.feat"})
      h.update(slurp(out_dir / f));
    return GenSynthResult{out_dir, hex64(h.digest())};
  });
}

fs::path cmd_pretrain(const PretrainRequest& req) {
  return with_phase("pretrain", [&] {
    Stopwatch clock;
    req.config.validate();
    const Dataset ds = load_data(req.data);
    FeatureMatrix visual = load_modality(req.visual, FeatureModality::visual, ds.num_entities());
    FeatureMatrix textual = load_modality(req.textual, FeatureModality::textual, ds.num_entities());

    RunManifest manifest;
    manifest.phase = "pretrain";
    manifest.config = req.config;
    manifest.dataset_fingerprint = hex64(ds.fingerprint());
    add_data_inputs(manifest, req.data);
    manifest.inputs["visual"] = file_hash(req.visual);
    manifest.inputs["textual"] = file_hash(req.textual);
    manifest.extra["modality_order"] = "structural,visual,textual";
    manifest.extra["teacher_selection"] = req.config.eval_every ? "best_valid_mrr" : "last_epoch";
    const std::string hash = manifest.hash();
    const fs::path dir = prepare_run_dir(req.output, "pretrain", hash);

    if (req.config.missing_rate > 0.0) {
      visual = apply_missing_mask(visual, req.config.missing_rate, req.config.seed + 1);
      textual = apply_missing_mask(textual, req.config.missing_rate, req.config.seed + 2);
    }
    manifest.timings["load"] = clock.lap();
    const PretrainResult res = pretrain_teachers(ds, visual, textual, req.config);
    manifest.timings["train"] = clock.lap();

    save_teachers(dir / "teachers.ckpt", res.teachers, manifest.to_json(false));
    {
      auto csv = open_csv(dir / "pretrain_loss.csv", hash, "epoch,structural,visual,textual");
      for (std::size_t e = 0; e < res.losses.size(); ++e)
        csv << e + 1 << "," << res.losses[e][0] << "," << res.losses[e][1] << "," << res.losses[e][2] << "\n";
    }
    {
      auto csv = open_csv(dir / "teacher_valid.csv", hash, "modality,best_epoch,mrr,mr,hits1,hits3,hits10");
      for (std::size_t m = 0; m < kNumModalities; ++m) {
        const Metrics& mt = res.valid_metrics[m];
        csv << to_string(kModalityOrder[m]) << "," << res.best_epoch[m] << "," << mt.mrr << "," << mt.mr << ","
            << mt.hits1 << "," << mt.hits3 << "," << mt.hits10 << "\n";
      }
    }
    manifest.timings["write"] = clock.lap();
    write_text(dir / "manifest.json", manifest.to_json());
    return dir;
  });
}

fs::path cmd_train_student(const StudentRequest& req) {
  return with_phase("train-student", [&] {
    Stopwatch clock;
    req.config.validate();
    const Dataset ds = load_data(req.data);
    std::string teacher_manifest;
    const TeacherEnsemble ensemble = load_teachers(req.teachers, &teacher_manifest);
    const json tm = json::parse(teacher_manifest, nullptr, false);
    if (tm.is_discarded()) throw CheckpointError("teacher checkpoint manifest is not valid JSON");
    if (tm.value("extra", json::object()).value("modality_order", "") != "structural,visual,textual")
      throw CheckpointError("teacher checkpoint modality order does not match structural,visual,textual");
    if (tm.value("dataset_fingerprint", "") != hex64(ds.fingerprint()))
      throw CheckpointError("teacher checkpoint was trained on a different dataset");
    if (ensemble.num_entities() != ds.num_entities())
      throw CheckpointError("teacher checkpoint entity count does not match the dataset");

    RunManifest manifest;
    manifest.phase = "train-student";
    manifest.config = req.config;
    manifest.dataset_fingerprint = hex64(ds.fingerprint());
    add_data_inputs(manifest, req.data);
    manifest.inputs["teachers"] = file_hash(req.teachers);
    const std::string hash = manifest.hash();
    const fs::path dir = prepare_run_dir(req.output, "train-student", hash);

    const FrozenTeachers frozen(ensemble);
    std::unique_ptr<TeacherLogitCache> cache;
    switch (req.config.teacher_cache) {
      case TeacherCache::off:
        break;
      case TeacherCache::memory:
        cache = std::make_unique<TeacherLogitCache>(frozen, ds.train_aug);
        break;
      case TeacherCache::disk: {
        const fs::path path = dir / "teacher_cache.ckpt";
        {
          Checkpoint c = TeacherLogitCache(frozen, ds.train_aug).to_checkpoint();
          c.meta = manifest.to_json(false);
          save_checkpoint(path, c);
        }
        cache = std::make_unique<TeacherLogitCache>(frozen, load_checkpoint(path));
        break;
      }
    }
    const TeacherLogitSource& source = cache ? static_cast<const TeacherLogitSource&>(*cache) : frozen;
    manifest.timings["load"] = clock.lap();

    const StudentResult res = train_student(ds, source, req.config);
    manifest.timings["train"] = clock.lap();
    manifest.extra["best_epoch"] = std::to_string(res.best_epoch);

    {
      Checkpoint c;
      c.dim = res.student.dim();
      c.num_entities = res.student.num_entities();
      c.num_relations = res.student.relations.count();
      c.meta = manifest.to_json(false);
      put_model(c, "student", res.student);
      save_checkpoint(dir / "student.ckpt", c);
    }
    if (res.policy) {
      Checkpoint c;
      c.num_entities = ds.num_entities();
      json meta;
      meta["manifest_hash"] = hash;
      meta["standardize_state"] = req.config.standardize_state;
      meta["input_dim"] = res.policy->input_dim();
      meta["hidden"] = res.policy->hidden();
      c.meta = meta.dump();
      res.policy->store(c, "policy");
      save_checkpoint(dir / "policy.ckpt", c);
    }
    {
      auto csv = open_csv(dir / "loss_trace.csv", hash, "epoch,ce,rc,nekd,nnkd,kd,total,kd_skipped,valid_mrr");
      for (const auto& e : res.epochs)
        csv << e.epoch << "," << e.loss.ce << "," << e.loss.rc << "," << e.loss.nekd << "," << e.loss.nnkd << ","
            << e.loss.kd << "," << e.loss.total << "," << e.kd_skipped << "," << e.valid_mrr << "\n";
    }
    {
      auto csv = open_csv(dir / "reward_curve.csv", hash, "epoch,step,mean_delta");
      for (const auto& s : res.reward_curve) csv << s.epoch << "," << s.step << "," << s.mean_delta << "\n";
    }
    {
      std::string header = "epoch";
      for (std::size_t a = 0; a < kNumActions; ++a) header += "," + Action{static_cast<int>(a)}.label();
      header += ",mean_delta";
      auto csv = open_csv(dir / "strategy_stats.csv", hash, header);
      for (const auto& e : res.epochs) {
        csv << e.epoch;
        for (double f : e.action_fraction) csv << "," << f;
        csv << "," << e.mean_delta << "\n";
      }
    }
    manifest.timings["write"] = clock.lap();
    write_text(dir / "manifest.json", manifest.to_json());
    return dir;
  });
}

EvalOutput cmd_eval(const EvalRequest& req) {
  return with_phase("eval", [&] {
    Stopwatch clock;
    const Dataset ds = load_data(req.data);
    const std::vector<Triple>& split = split_by_name(ds, req.split);

    std::string magic(8, '\0');
    {
      std::ifstream in(req.checkpoint, std::ios::binary);
      if (!in) throw IoError("cannot open checkpoint " + req.checkpoint.string());
      in.read(magic.data(), 8);
    }
    const bool is_teachers = magic == "DSOMTEAM";
    std::string scorer_name = req.scorer;
    if (scorer_name == "auto") scorer_name = is_teachers ? "avg" : "student";

    std::optional<KgeModel> student;
    std::optional<TeacherEnsemble> ensemble;
    std::string ckpt_meta;
    if (is_teachers) {
      ensemble = load_teachers(req.checkpoint, &ckpt_meta);
      if (ensemble->num_entities() != ds.num_entities())
        throw CheckpointError("checkpoint entity count does not match the dataset");
    } else {
      if (scorer_name != "student")
        throw std::invalid_argument("scorer '" + scorer_name + "' needs a teacher checkpoint");
      const Checkpoint c = load_checkpoint(req.checkpoint);
      ckpt_meta = c.meta;
      student = get_model(c, "student");
      if (student->num_entities() != ds.num_entities())
        throw CheckpointError("checkpoint entity count does not match the dataset");
    }
    const json meta = json::parse(ckpt_meta, nullptr, false);
    if (!meta.is_discarded() && meta.is_object() && meta.contains("dataset_fingerprint") &&
        meta["dataset_fingerprint"] != hex64(ds.fingerprint()))
      throw CheckpointError("checkpoint was trained on a different dataset");

    RunManifest manifest;
    manifest.phase = "eval";
    manifest.config = meta.is_object() && meta.contains("config")
                          ? [&] {
                              TrainConfig cfg;
                              for (const auto& [k, v] : meta["config"].items()) cfg.set(k, v.get<std::string>());
                              return cfg;
                            }()
                          : TrainConfig{};
    manifest.dataset_fingerprint = hex64(ds.fingerprint());
    add_data_inputs(manifest, req.data);
    manifest.inputs["checkpoint"] = file_hash(req.checkpoint);
    manifest.extra["scorer"] = scorer_name;
    manifest.extra["split"] = req.split;
    manifest.extra["tie_policy"] = kTiePolicy;
    const std::string hash = manifest.hash();
    const fs::path dir = prepare_run_dir(req.output, "eval", hash);
    manifest.timings["load"] = clock.lap();

    std::optional<FrozenTeachers> frozen;
    Scorer scorer;
    if (student) {
      scorer = model_scorer(*student);
    } else {
      frozen.emplace(*ensemble);
      scorer = ensemble_scorer(*frozen, scorer_name);
    }
    const EvalResult res = evaluate(scorer, split, build_filter_index(ds), ds.num_relations());
    manifest.timings["eval"] = clock.lap();

    write_metrics_json(dir / "metrics.json", res.metrics, hash);
    write_rank_dump(dir / "ranks.csv", res.ranks, ds);
    write_text(dir / "manifest.json", manifest.to_json());
    return EvalOutput{dir, res.metrics, hash};
  });
}

// ---- report -----------------------------------------------------------------

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  return out;
}

std::optional<Csv> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  Csv csv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (csv.header.empty()) csv.header = split_commas(line);
    else csv.rows.push_back(split_commas(line));
  }
  return csv;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double num(const std::string& s) { return std::stod(s); }

}  // namespace

std::string cmd_report(const std::vector<fs::path>& run_dirs) {
  return with_phase("report", [&] {
    std::ostringstream md;
    md << "# Run report\n\n";
    std::ostringstream metrics_tbl, teacher_tbl, student_tbl, strategy_tbl;
    bool any_metrics = false, any_teacher = false, any_student = false, any_strategy = false;

    for (const fs::path& dir : run_dirs) {
      const json m = json::parse(slurp(dir / "manifest.json"));
      const std::string phase = m.at("phase");
      const std::string hash = m.at("hash");
      const std::string tag = dir.filename().string();
      const json cfg = m.value("config", json::object());

      if (phase == "eval") {
        const json mt = json::parse(slurp(dir / "metrics.json"));
        const json ex = m.value("extra", json::object());
        metrics_tbl << "| " << tag << " | " << ex.value("scorer", "") << " | " << ex.value("split", "") << " | "
                    << cfg.value("strategy", "") << " | " << cfg.value("kd_variant", "") << " | "
                    << pct(mt.at("mrr")) << " | " << fixed(mt.at("mr"), 1) << " | " << pct(mt.at("hits1")) << " | "
                    << pct(mt.at("hits3")) << " | " << pct(mt.at("hits10")) << " |\n";
        any_metrics = true;
      } else if (phase == "pretrain") {
        if (auto csv = read_csv(dir / "teacher_valid.csv")) {
          for (const auto& r : csv->rows)
            teacher_tbl << "| " << tag << " | " << r[0] << " | " << r[1] << " | " << pct(num(r[2])) << " | "
                        << pct(num(r[6])) << " |\n";
          any_teacher = true;
        }
      } else if (phase == "train-student") {
        if (auto csv = read_csv(dir / "loss_trace.csv"); csv && !csv->rows.empty()) {
          const auto& first = csv->rows.front();
          const auto& last = csv->rows.back();
          student_tbl << "| " << tag << " | " << cfg.value("strategy", "") << " | " << cfg.value("kd_variant", "")
                      << " | " << last[0] << " | " << fixed(num(first[1]), 4) << " | " << fixed(num(last[1]), 4)
                      << " | " << fixed(num(last[2]), 4) << " | " << fixed(num(last[3]), 4) << " | "
                      << fixed(num(last[4]), 4) << " | " << m.value("extra", json::object()).value("best_epoch", "")
                      << " |\n";
          any_student = true;
        }
        if (auto csv = read_csv(dir / "strategy_stats.csv");
            csv && !csv->rows.empty() && cfg.value("strategy", "") == "reinforced") {
          const auto& last = csv->rows.back();
          strategy_tbl << "| " << tag;
          for (std::size_t a = 1; a <= kNumActions; ++a) strategy_tbl << " | " << pct(num(last[a]));
          const std::size_t q = std::max<std::size_t>(1, csv->rows.size() / 4);
          double early = 0.0, late = 0.0;
          for (std::size_t i = 0; i < q; ++i) {
            early += num(csv->rows[i].back());
            late += num(csv->rows[csv->rows.size() - 1 - i].back());
          }
          strategy_tbl << " | " << fixed(early / static_cast<double>(q), 3) << " | "
                       << fixed(late / static_cast<double>(q), 3) << " |\n";
          any_strategy = true;
        }
      } else {
        throw std::invalid_argument(dir.string() + ": unknown phase '" + phase + "'");
      }
      md << "- `" << tag << "`: " << phase << ", manifest " << hash << "\n";
    }
    md << "\n";
    if (any_metrics)
      md << "## Link prediction (filtered)\n\n"
         << "| run | scorer | split | strategy | kd | MRR | MR | Hits@1 | Hits@3 | Hits@10 |\n"
         << "|---|---|---|---|---|---|---|---|---|---|\n"
         << metrics_tbl.str() << "\n";
    if (any_teacher)
      md << "## Teachers (validation)\n\n"
         << "| run | modality | best epoch | MRR | Hits@10 |\n|---|---|---|---|---|\n"
         << teacher_tbl.str() << "\n";
    if (any_student)
      md << "## Student training\n\n"
         << "| run | strategy | kd | epochs | CE first | CE last | RC last | NEKD last | NNKD last | best epoch |\n"
         << "|---|---|---|---|---|---|---|---|---|---|\n"
         << student_tbl.str() << "\n";
    if (any_strategy) {
      md << "## Teacher subsets chosen (last epoch, %)\n\n| run";
      for (std::size_t a = 0; a < kNumActions; ++a) md << " | " << Action{static_cast<int>(a)}.label();
      md << " | mean δ first quarter | mean δ last quarter |\n|---";
      for (std::size_t a = 0; a < kNumActions + 2; ++a) md << "|---";
      md << "|\n" << strategy_tbl.str() << "\n";
    }
    return md.str();
  });
}

}  // namespace dsom
