#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpool/commands.hpp"
#include "gpool/error.hpp"

namespace py = pybind11;
using namespace gpool;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Tensor::Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

RunConfig config_from(const std::string& doc) { return run_config_from_json(json::parse(doc)); }

/// Generalized pooling for one sentence with explicit head parameters.
py::tuple attention_pool(const Array& states, const Array& mask, const std::vector<std::map<std::string, Array>>& heads) {
  const Tensor h = to_tensor(states);
  PoolingParams params;
  for (const auto& head : heads) {
    AttentionHeadParams p;
    p.w1 = to_tensor(head.at("w1"));
    p.b1 = to_tensor(head.at("b1"));
    p.w2 = to_tensor(head.at("w2"));
    p.b2 = to_tensor(head.at("b2"));
    params.heads.push_back(std::move(p));
  }
  ad::Graph g;
  const HiddenSequence hidden{g.constant_ref(h), to_tensor(mask)};
  const auto [pooled, maps] = generalized_pool(hidden, bind_heads(g, params));
  py::list attention;
  for (const auto& a : maps.heads) attention.append(to_array(a.value()));
  return py::make_tuple(to_array(pooled.v.value()), attention);
}

Array baseline(const Array& states, const Array& mask, const std::string& kind) {
  const Tensor h = to_tensor(states);
  ad::Graph g;
  const HiddenSequence hidden{g.constant_ref(h), to_tensor(mask)};
  return to_array(baseline_pool(hidden, parse_pooling_kind(kind)).value());
}

double hinge_penalty(const std::vector<Array>& items, double lambda, double mu) {
  std::vector<Tensor> values;
  for (const auto& a : items) values.push_back(to_tensor(a));
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (const auto& t : values) vars.push_back(g.constant_ref(t));
  return pairwise_hinge_penalty(g, vars, lambda, mu).value().item();
}

py::dict train(const std::string& config_json) {
  const auto config = config_from(config_json);
  std::ostringstream log;
  TrainArtifacts art;
  {
    py::gil_scoped_release nogil;
    art = command_train(config, log);
  }
  py::list epochs;
  for (const auto& m : art.result.epochs) {
    epochs.append(py::dict(py::arg("epoch") = m.epoch, py::arg("train_loss") = m.train_loss,
                           py::arg("train_ce") = m.train_ce, py::arg("train_penalty") = m.train_penalty,
                           py::arg("dev_acc") = m.dev_acc));
  }
  return py::dict(py::arg("best_epoch") = art.result.best_epoch, py::arg("best_dev_acc") = art.result.best_dev_acc,
                  py::arg("epochs") = epochs, py::arg("checkpoint") = art.checkpoint_path,
                  py::arg("metrics") = art.metrics_path, py::arg("config") = art.config_path,
                  py::arg("log") = log.str());
}

py::dict evaluate_checkpoint(const std::string& checkpoint, const std::string& split,
                             const std::optional<std::string>& config_json) {
  RunConfig config;
  if (config_json) {
    config = config_from(*config_json);
  } else {
    const auto info = load_checkpoint(checkpoint).info;
    if (!info.contains("config")) throw InputError("checkpoint stores no config; pass one explicitly");
    config = run_config_from_json(info.at("config"));
  }
  std::ostringstream log;
  const auto r = command_eval(config, checkpoint, split, log);
  return py::dict(py::arg("accuracy") = r.accuracy, py::arg("correct") = r.correct, py::arg("total") = r.total,
                  py::arg("class_correct") = r.class_correct, py::arg("class_total") = r.class_total);
}

py::dict export_sentence(const std::string& checkpoint, const std::string& sentence) {
  const auto ckpt = load_checkpoint(checkpoint);
  const auto maps = export_attention(ckpt, tokenize(sentence, ckpt.lowercase));
  py::list heads;
  for (const auto& a : maps.heads) heads.append(to_array(a));
  return py::dict(py::arg("tokens") = maps.tokens, py::arg("heads") = heads);
}

double frobenius_diversity(const std::vector<Array>& heads) {
  std::vector<Tensor> ts;
  for (const auto& a : heads) ts.push_back(to_tensor(a));
  return mean_pairwise_frobenius(ts);
}

py::list gradcheck(std::uint64_t seed, double tolerance) {
  py::list rows;
  for (const auto& r : gradcheck_suite(seed, tolerance)) {
    rows.append(py::dict(py::arg("module") = r.module, py::arg("tensors") = r.tensors,
                         py::arg("max_relative_error") = r.max_relative_error, py::arg("passed") = r.passed));
  }
  return rows;
}

py::tuple cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = run_cli(args, out, err);
  return py::make_tuple(status, out.str(), err.str());
}

py::dict synthetic(const std::string& task, std::size_t n, std::size_t min_length, std::size_t max_length,
                   std::size_t vocab_size, std::uint64_t seed) {
  const auto s = gen_synthetic({parse_synthetic_task(task), n, min_length, max_length, vocab_size, seed});
  auto split = [](const std::vector<TextExample>& xs) {
    py::list out;
    for (const auto& x : xs) out.append(py::make_tuple(x.sentence_a, x.label));
    return out;
  };
  return py::dict(py::arg("train") = split(s.train), py::arg("dev") = split(s.dev), py::arg("test") = split(s.test),
                  py::arg("labels") = s.labels);
}

}  // namespace

PYBIND11_MODULE(_gpool, m) {
  m.doc() = "Generalized multi-head attention pooling: native core";

  // Translators run in reverse registration order: base class first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DegenerateMaskError>(m, "DegenerateMaskError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("preset_names", &preset_names);
  m.def("preset_json", [](const std::string& name) { return to_json(preset(name)).dump(); }, py::arg("name"));
  m.def("validate_config", [](const std::string& doc) { return to_json(config_from(doc)).dump(); },
        py::arg("config_json"));
  m.def("tokenize", &tokenize, py::arg("text"), py::arg("lowercase") = false);
  m.def("gen_synthetic", &synthetic, py::arg("task") = "two_token_agreement", py::arg("n") = 2000,
        py::arg("min_length") = 8, py::arg("max_length") = 16, py::arg("vocab_size") = 50, py::arg("seed") = 7);
  m.def("attention_pool", &attention_pool, py::arg("states"), py::arg("mask"), py::arg("heads"));
  m.def("baseline_pool", &baseline, py::arg("states"), py::arg("mask"), py::arg("kind"));
  m.def("hinge_penalty", &hinge_penalty, py::arg("items"), py::arg("lam") = 1.0, py::arg("mu") = 1e-2);
  m.def("mean_pairwise_frobenius", &frobenius_diversity, py::arg("heads"));
  m.def("gradcheck", &gradcheck, py::arg("seed") = 1, py::arg("tolerance") = 1e-4);
  m.def("train", &train, py::arg("config_json"));
  m.def("evaluate", &evaluate_checkpoint, py::arg("checkpoint"), py::arg("split") = "dev",
        py::arg("config_json") = py::none());
  m.def("export_attention", &export_sentence, py::arg("checkpoint"), py::arg("sentence"));
  m.def("run_cli", &cli, py::arg("args"));
}
