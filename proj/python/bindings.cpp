#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <complex>

#include "dsom/distill.hpp"
#include "dsom/eval.hpp"
#include "dsom/features.hpp"
#include "dsom/kge.hpp"
#include "dsom/pipeline.hpp"
#include "dsom/reinforce.hpp"

namespace py = pybind11;
using namespace dsom;

namespace {

TrainConfig config_from(const std::map<std::string, py::object>& overrides) {
  TrainConfig c;
  for (const auto& [k, v] : overrides) {
    if (py::isinstance<py::bool_>(v)) c.set(k, v.cast<bool>() ? "true" : "false");
    else c.set(k, py::str(v).cast<std::string>());
  }
  c.validate();
  return c;
}

OutputOptions output_from(const std::optional<fs::path>& out, bool force) {
  OutputOptions o;
  o.out = out;
  o.force = force;
  return o;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["mrr"] = m.mrr;
  d["mr"] = m.mr;
  d["hits1"] = m.hits1;
  d["hits3"] = m.hits3;
  d["hits10"] = m.hits10;
  d["count"] = m.count;
  return d;
}

Matrix rows_of(const std::vector<std::complex<double>>& v, bool imag) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = imag ? v[i].imag() : v[i].real();
  return m;
}

}  // namespace

PYBIND11_MODULE(_dsom, m) {
  m.doc() = "Multimodal KG teachers, reinforced teacher selection and neighbor-decoupled distillation";
  m.attr("__version__") = version_string();

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PhaseError>(m, "PhaseError", PyExc_RuntimeError);
  py::register_exception<FeatureFileError>(m, "FeatureFileError", PyExc_IOError);

  m.def("default_config", [] { return TrainConfig{}.to_map(); }, "Default training configuration as strings.");

  // ---- pipeline -------------------------------------------------------------
  m.def(
      "gen_synth",
      [](const fs::path& out, std::size_t entities, std::size_t relations, std::size_t triples, std::size_t clusters,
         std::size_t spread, std::size_t feature_dim, int signal_modalities, std::uint64_t seed) {
        SynthConfig c{entities, relations, triples, clusters, spread, feature_dim, signal_modalities, seed};
        const GenSynthResult r = cmd_gen_synth(c, out);
        return py::make_tuple(r.dir, r.content_hash);
      },
      py::arg("out"), py::arg("entities") = 200, py::arg("relations") = 10, py::arg("triples") = 2000,
      py::arg("clusters") = 4, py::arg("spread") = 1, py::arg("feature_dim") = 32, py::arg("signal_modalities") = 1,
      py::arg("seed") = 7, "Write a clustered synthetic KG; returns (dir, content_hash).");

  m.def(
      "pretrain",
      [](const fs::path& data, const std::map<std::string, py::object>& config, std::optional<fs::path> out,
         std::optional<fs::path> visual, std::optional<fs::path> textual, bool force) {
        PretrainRequest r{config_from(config), DataPaths::in_dir(data), visual.value_or(data / "visual.feat"),
                          textual.value_or(data / "textual.feat"), output_from(out, force)};
        py::gil_scoped_release release;
        return cmd_pretrain(r);
      },
      py::arg("data"), py::arg("config") = std::map<std::string, py::object>{}, py::arg("out") = py::none(),
      py::arg("visual") = py::none(), py::arg("textual") = py::none(), py::arg("force") = false,
      "Pre-train the three teachers; returns the run directory.");

  m.def(
      "train_student",
      [](const fs::path& data, const fs::path& teachers, const std::map<std::string, py::object>& config,
         std::optional<fs::path> out, bool force) {
        StudentRequest r{config_from(config), DataPaths::in_dir(data), teachers, output_from(out, force)};
        py::gil_scoped_release release;
        return cmd_train_student(r);
      },
      py::arg("data"), py::arg("teachers"), py::arg("config") = std::map<std::string, py::object>{},
      py::arg("out") = py::none(), py::arg("force") = false, "Distill the teachers into a student; returns the run directory.");

  m.def(
      "evaluate",
      [](const fs::path& data, const fs::path& checkpoint, const std::string& scorer, const std::string& split,
         std::optional<fs::path> out, bool force) {
        EvalRequest r;
        r.data = DataPaths::in_dir(data);
        r.checkpoint = checkpoint;
        r.scorer = scorer;
        r.split = split;
        r.output = output_from(out, force);
        EvalOutput res;
        {
          py::gil_scoped_release release;
          res = cmd_eval(r);
        }
        py::dict d = metrics_dict(res.metrics);
        d["dir"] = res.dir;
        d["manifest_hash"] = res.manifest_hash;
        return d;
      },
      py::arg("data"), py::arg("checkpoint"), py::arg("scorer") = "auto", py::arg("split") = "test",
      py::arg("out") = py::none(), py::arg("force") = false, "Filtered link-prediction metrics for a checkpoint.");

  m.def("report", &cmd_report, py::arg("run_dirs"), "Markdown summary of run directories.");

  // ---- low-level ops ----------------------------------------------------------
  m.def(
      "complex_score",
      [](const std::vector<std::complex<double>>& h, const std::vector<std::complex<double>>& r,
         const std::vector<std::complex<double>>& t) {
        if (h.size() != r.size() || h.size() != t.size()) throw std::invalid_argument("embedding lengths differ");
        return complex_score(rows_of(h, false), rows_of(h, true), rows_of(r, false), rows_of(r, true),
                             rows_of(t, false), rows_of(t, true));
      },
      py::arg("h"), py::arg("r"), py::arg("t"), "Re(<h, r, conj(t)>).");

  m.def(
      "filtered_rank",
      [](const Vector& scores, EntityId target, const std::set<EntityId>& known_true) {
        return filtered_rank(scores, target, known_true);
      },
      py::arg("scores"), py::arg("target"), py::arg("known_true") = std::set<EntityId>{});

  m.def(
      "metrics_from_ranks",
      [](const std::vector<std::size_t>& ranks) { return metrics_dict(metrics_from_ranks(ranks)); }, py::arg("ranks"));

  m.def(
      "softmax", [](const Vector& v, double tau) { return softmax(v, tau); }, py::arg("logits"), py::arg("tau") = 1.0);

  m.def(
      "ndkd_loss",
      [](const Vector& teacher, const Vector& student, const std::set<EntityId>& neighbors, double tau, double alpha,
         double beta) {
        const NdkdResult r = ndkd_loss(decouple(temp_scale(teacher, tau), neighbors),
                                       decouple(temp_scale(student, tau), neighbors), alpha, beta);
        py::dict d;
        d["loss"] = r.loss;
        d["nekd"] = r.nekd;
        d["nnkd"] = r.nnkd;
        d["grad"] = r.grad;
        return d;
      },
      py::arg("teacher_logits"), py::arg("student_logits"), py::arg("neighbors"), py::arg("tau") = 4.0,
      py::arg("alpha") = 1.0, py::arg("beta") = 1.0, "Neighbor-decoupled KD loss and its gradient in student logits.");

  m.def(
      "dkd_loss",
      [](const Vector& teacher, const Vector& student, EntityId target, double tau, double alpha, double beta) {
        const NdkdResult r = dkd_loss(temp_scale(teacher, tau), temp_scale(student, tau), target, alpha, beta);
        return py::make_tuple(r.loss, r.grad);
      },
      py::arg("teacher_logits"), py::arg("student_logits"), py::arg("target"), py::arg("tau") = 4.0,
      py::arg("alpha") = 1.0, py::arg("beta") = 1.0);

  m.def(
      "compute_reward",
      [](double teacher_ce, double student_ce) { return compute_reward(teacher_ce, student_ce, RewardConfig{}); },
      py::arg("teacher_ce"), py::arg("student_ce"));

  m.def("action_label", [](int index) { return Action{index}.label(); }, py::arg("index"));

  // ---- feature files --------------------------------------------------------------
  m.def(
      "read_features",
      [](const fs::path& path) {
        const FeatureMatrix f = read_feature_file(path);
        py::array_t<float> data({f.num_entities, f.dim});
        std::copy(f.data.begin(), f.data.end(), data.mutable_data());
        py::array_t<bool> mask(static_cast<py::ssize_t>(f.num_entities));
        for (std::size_t i = 0; i < f.num_entities; ++i) mask.mutable_data()[i] = f.mask[i];
        return py::make_tuple(std::string(to_string(f.modality)), data, mask);
      },
      py::arg("path"), "Returns (modality, float32 [n, d] array, bool [n] presence mask).");

  m.def(
      "write_features",
      [](const fs::path& path, const std::string& modality,
         py::array_t<float, py::array::c_style | py::array::forcecast> data, std::optional<std::vector<bool>> mask) {
        if (data.ndim() != 2) throw std::invalid_argument("features must be a 2-D array");
        if (modality != "visual" && modality != "textual")
          throw std::invalid_argument("modality must be 'visual' or 'textual'");
        const auto n = static_cast<std::size_t>(data.shape(0)), d = static_cast<std::size_t>(data.shape(1));
        FeatureMatrix f(modality == "visual" ? FeatureModality::visual : FeatureModality::textual, n, d);
        std::copy(data.data(), data.data() + n * d, f.data.begin());
        if (mask) {
          if (mask->size() != n) throw std::invalid_argument("mask length does not match the row count");
          for (std::size_t i = 0; i < n; ++i) f.mask[i] = (*mask)[i];
        }
        write_feature_file(f, path);
      },
      py::arg("path"), py::arg("modality"), py::arg("data"), py::arg("mask") = py::none(),
      "Write a feature file; missing rows must be zero.");
}
