// dsom: teacher pre-training, student distillation and evaluation from the shell.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dsom/pipeline.hpp"
#include "dsom/util.hpp"

namespace {

using dsom::fs::path;

/// Config flags shared by pretrain and train-student. Precedence: defaults,
/// then --config, then --set, then the dedicated flags.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> assignments;
  std::vector<std::pair<std::string, std::string>> explicit_values;
  bool temperature_sq_scale = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "Flat key = value config file")->check(CLI::ExistingFile);
    app.add_option("--set", assignments, "Override any config key (key=value); repeatable");
    for (const auto& [flag, key, help] : std::vector<std::tuple<std::string, std::string, std::string>>{
             {"--seed", "seed", "Random seed"},
             {"--missing-rate", "missing_rate", "Fraction of entities whose visual/textual features are dropped"},
             {"--strategy", "strategy", "reinforced|conf_teacher|best_teacher|best_strategy|teacher_avg"},
             {"--kd-variant", "kd_variant", "ndkd|dkd|vanilla|nekd_only|nnkd_only|none"},
             {"--gamma", "gamma", "Distillation weight"},
             {"--tau", "tau", "Temperature"},
             {"--alpha", "alpha", "Neighbor (binary) term weight"},
             {"--beta", "beta", "Non-neighbor term weight"},
             {"--dim", "dim", "Complex embedding dimension"},
             {"--epochs", "epochs", "Student epochs"},
             {"--teacher-epochs", "teacher_epochs", "Teacher pre-training epochs"},
             {"--lr", "learning_rate", "Adam learning rate"},
             {"--batch-size", "batch_size", "Minibatch size"},
             {"--policy-hidden", "policy_hidden", "Policy hidden width"},
             {"--teacher-cache", "teacher_cache", "off|memory|disk"},
         }) {
      app.add_option_function<std::string>(
          flag, [this, key = key](const std::string& v) { explicit_values.emplace_back(key, v); }, help);
    }
    app.add_flag("--temperature-sq-scale", temperature_sq_scale, "Multiply the distillation term by tau^2");
  }

  dsom::TrainConfig build() const {
    dsom::TrainConfig cfg = config_file.empty() ? dsom::TrainConfig{} : dsom::TrainConfig::load(config_file);
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw dsom::ConfigError("--set expects key=value, got '" + a + "'");
      cfg.set(a.substr(0, eq), a.substr(eq + 1));
    }
    for (const auto& [k, v] : explicit_values) cfg.set(k, v);
    if (temperature_sq_scale) cfg.temperature_sq_scale = true;
    cfg.validate();
    return cfg;
  }
};

struct DataFlags {
  std::string dir, train, valid, test;

  void attach(CLI::App& app) {
    app.add_option("--data", dir, "Directory holding train.tsv, valid.tsv, test.tsv");
    app.add_option("--train", train, "Training triples");
    app.add_option("--valid", valid, "Validation triples");
    app.add_option("--test", test, "Test triples");
  }

  dsom::DataPaths build() const {
    dsom::DataPaths p = dir.empty() ? dsom::DataPaths{} : dsom::DataPaths::in_dir(dir);
    if (!train.empty()) p.train = train;
    if (!valid.empty()) p.valid = valid;
    if (!test.empty()) p.test = test;
    if (p.train.empty() || p.valid.empty() || p.test.empty())
      throw CLI::ValidationError("data", "pass --data DIR or all of --train, --valid, --test");
    return p;
  }
};

struct OutputFlags {
  std::string out;
  std::string runs_root = "runs";
  bool force = false;

  void attach(CLI::App& app) {
    app.add_option("--out", out, "Run directory (default: <runs-root>/<phase>-<manifest hash>)");
    app.add_option("--runs-root", runs_root, "Parent of hash-named run directories");
    app.add_flag("--force", force, "Write into a directory that already holds a run");
  }

  dsom::OutputOptions build() const {
    dsom::OutputOptions o;
    if (!out.empty()) o.out = path(out);
    o.runs_root = runs_root;
    o.force = force;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal KG reasoning: per-modality teachers, reinforced teacher selection, "
               "neighbor-decoupled distillation. Threads: DSOM_THREADS."};
  app.require_subcommand(1);
  app.set_version_flag("--version", dsom::version_string());

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Write a clustered synthetic KG with visual/textual features");
  dsom::SynthConfig synth;
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--entities", synth.num_entities, "Entity count");
  gen->add_option("--relations", synth.num_relations, "Relation count");
  gen->add_option("--triples", synth.num_triples, "Triple count (split 80/10/10)");
  gen->add_option("--clusters", synth.num_clusters, "Entity clusters");
  gen->add_option("--spread", synth.spread, "Tails per (head, relation) pattern");
  gen->add_option("--feature-dim", synth.feature_dim, "Feature width");
  gen->add_option("--signal-modalities", synth.signal_modalities,
                  "How many of visual, textual carry signal (the rest are noise)")
      ->check(CLI::Range(0, 2));
  gen->add_option("--seed", synth.seed, "Random seed");

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Pre-train the structural, visual and textual teachers");
  ConfigFlags pre_cfg;
  DataFlags pre_data;
  OutputFlags pre_out;
  std::string visual, textual;
  pre_cfg.attach(*pre);
  pre_data.attach(*pre);
  pre_out.attach(*pre);
  pre->add_option("--visual", visual, "Visual feature file (default: <data>/visual.feat)");
  pre->add_option("--textual", textual, "Textual feature file (default: <data>/textual.feat)");

  // train-student
  auto* stu = app.add_subcommand("train-student", "Distill the frozen teachers into a structural student");
  ConfigFlags stu_cfg;
  DataFlags stu_data;
  OutputFlags stu_out;
  std::string teachers;
  stu_cfg.attach(*stu);
  stu_data.attach(*stu);
  stu_out.attach(*stu);
  stu->add_option("--teachers", teachers, "teachers.ckpt from pretrain")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Filtered link-prediction metrics for a checkpoint");
  DataFlags ev_data;
  OutputFlags ev_out;
  dsom::EvalRequest ev_req;
  std::string checkpoint;
  ev_data.attach(*ev);
  ev_out.attach(*ev);
  ev->add_option("--checkpoint", checkpoint, "student.ckpt or teachers.ckpt")->required();
  ev->add_option("--scorer", ev_req.scorer, "auto|student|avg|structural|visual|textual");
  ev->add_option("--split", ev_req.split, "train|valid|test");

  // report
  auto* rep = app.add_subcommand("report", "Merge run artifacts into a Markdown summary");
  std::vector<std::string> run_dirs;
  std::string report_out;
  rep->add_option("runs", run_dirs, "Run directories")->required();
  rep->add_option("--out", report_out, "Write the report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto res = dsom::cmd_gen_synth(synth, gen_out);
      std::cout << res.dir.string() << "\t" << res.content_hash << "\n";
    } else if (*pre) {
      dsom::PretrainRequest req;
      req.config = pre_cfg.build();
      req.data = pre_data.build();
      req.visual = !visual.empty() ? path(visual) : path(pre_data.dir) / "visual.feat";
      req.textual = !textual.empty() ? path(textual) : path(pre_data.dir) / "textual.feat";
      req.output = pre_out.build();
      std::cout << dsom::cmd_pretrain(req).string() << "\n";
    } else if (*stu) {
      dsom::StudentRequest req;
      req.config = stu_cfg.build();
      req.data = stu_data.build();
      req.teachers = teachers;
      req.output = stu_out.build();
      std::cout << dsom::cmd_train_student(req).string() << "\n";
    } else if (*ev) {
      ev_req.data = ev_data.build();
      ev_req.checkpoint = checkpoint;
      ev_req.output = ev_out.build();
      const auto res = dsom::cmd_eval(ev_req);
      std::cout << dsom::metrics_json(res.metrics, res.manifest_hash);
      std::cerr << "wrote " << res.dir.string() << "\n";
    } else if (*rep) {
      std::vector<path> dirs(run_dirs.begin(), run_dirs.end());
      const std::string md = dsom::cmd_report(dirs);
      if (report_out.empty()) {
        std::cout << md;
      } else {
        std::ofstream f(report_out);
        f << md;
        if (!f) throw dsom::IoError("cannot write " + report_out);
      }
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "dsom: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
