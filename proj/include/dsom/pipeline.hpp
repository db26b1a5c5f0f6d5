#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsom/config.hpp"
#include "dsom/eval.hpp"
#include "dsom/features.hpp"
#include "dsom/kg.hpp"
#include "dsom/reinforce.hpp"
#include "dsom/student.hpp"
#include "dsom/synth.hpp"
#include "dsom/teachers.hpp"

namespace dsom {

namespace fs = std::filesystem;

/// Version string baked in at configure time (git describe when available).
const char* version_string();

/// Wraps any module error with the phase it surfaced in.
class PhaseError : public std::runtime_error {
 public:
  PhaseError(const std::string& phase, const std::string& what)
      : std::runtime_error(phase + ": " + what), phase_(phase) {}
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

/// Provenance for one phase. The hash covers everything except timings, so
/// identical config + inputs give the same hash (and the same run directory).
struct RunManifest {
  std::string phase;
  std::string version = version_string();
  TrainConfig config;
  std::string dataset_fingerprint;
  std::map<std::string, std::string> inputs;  // role -> content hash
  std::map<std::string, std::string> extra;   // phase-specific facts (scorer, split, ...)
  std::map<std::string, double> timings;      // seconds

  std::string hash() const;
  /// Pretty JSON with the hash. Checkpoints embed it without timings so their
  /// bytes depend only on config and inputs.
  std::string to_json(bool with_timings = true) const;
};

/// Content hash of a file (hex).
std::string file_hash(const fs::path& path);

struct DataPaths {
  fs::path train;
  fs::path valid;
  fs::path test;

  /// train.tsv / valid.tsv / test.tsv inside `dir`.
  static DataPaths in_dir(const fs::path& dir);
};

struct OutputOptions {
  std::optional<fs::path> out;  // default: <runs_root>/<phase>-<hash prefix>
  fs::path runs_root = "runs";
  bool force = false;           // allow writing into a directory that already holds a run
};

// ---- in-memory phases -------------------------------------------------------

struct PretrainResult {
  TeacherEnsemble teachers;
  std::vector<std::array<double, kNumModalities>> losses;  // per epoch
  std::array<Metrics, kNumModalities> valid_metrics{};     // of the retained checkpoint
  std::array<std::size_t, kNumModalities> best_epoch{};    // 0 = initialization
};

/// Pre-trains the ensemble for config.teacher_epochs, keeping each modality's
/// best-validation-MRR state (or the last one when eval_every == 0).
PretrainResult pretrain_teachers(const Dataset& ds, const FeatureMatrix& visual, const FeatureMatrix& textual,
                                 const TrainConfig& config);

struct EpochLog {
  std::size_t epoch = 0;
  StudentLossBreakdown loss;  // triple-weighted epoch means
  double mean_delta = 0.0;    // 0 unless reinforced
  std::array<double, kNumActions> action_fraction{};
  std::size_t kd_skipped = 0;
  double valid_mrr = -1.0;  // -1 when not evaluated this epoch
};

struct StepDelta {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global minibatch counter
  double mean_delta = 0.0;
};

struct StudentResult {
  KgeModel student;
  std::optional<PolicyNet> policy;
  std::vector<EpochLog> epochs;
  std::vector<StepDelta> reward_curve;
  std::size_t best_epoch = 0;
  Metrics best_valid;
};

StudentResult train_student(const Dataset& ds, const TeacherLogitSource& teachers, const TrainConfig& config);

/// Scorer names: "student" (for a KgeModel), or "structural", "visual",
/// "textual", "avg" for an ensemble.
Scorer model_scorer(const KgeModel& model);
Scorer ensemble_scorer(const FrozenTeachers& teachers, const std::string& name);

const std::vector<Triple>& split_by_name(const Dataset& ds, const std::string& split);

// ---- commands: load inputs, run a phase, write artifacts --------------------

struct GenSynthResult {
  fs::path dir;
  std::string content_hash;  // over every written file
};

/// Writes train/valid/test.tsv, entities.tsv, relations.tsv, visual.feat and textual.feat.
GenSynthResult cmd_gen_synth(const SynthConfig& config, const fs::path& out_dir);

struct PretrainRequest {
  TrainConfig config;
  DataPaths data;
  fs::path visual;
  fs::path textual;
  OutputOptions output;
};

/// Artifacts: teachers.ckpt, pretrain_loss.csv, teacher_valid.csv, manifest.json.
fs::path cmd_pretrain(const PretrainRequest& request);

struct StudentRequest {
  TrainConfig config;
  DataPaths data;
  fs::path teachers;
  OutputOptions output;
};

/// Artifacts: student.ckpt, policy.ckpt (reinforced only), loss_trace.csv,
/// reward_curve.csv, strategy_stats.csv, manifest.json, and
/// teacher_cache.ckpt when teacher_cache = disk.
fs::path cmd_train_student(const StudentRequest& request);

struct EvalRequest {
  DataPaths data;
  fs::path checkpoint;        // student.ckpt or teachers.ckpt
  std::string scorer = "auto";  // auto = student for a student checkpoint, avg for teachers
  std::string split = "test";
  OutputOptions output;
};

struct EvalOutput {
  fs::path dir;
  Metrics metrics;
  std::string manifest_hash;
};

/// Artifacts: metrics.json, ranks.csv, manifest.json.
EvalOutput cmd_eval(const EvalRequest& request);

/// Markdown summary of the given run directories (any phase mix).
std::string cmd_report(const std::vector<fs::path>& run_dirs);

}  // namespace dsom
