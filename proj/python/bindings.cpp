#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gapcoref/config.hpp"
#include "gapcoref/error.hpp"
#include "gapcoref/gap_data.hpp"
#include "gapcoref/metrics.hpp"
#include "gapcoref/optim.hpp"
#include "gapcoref/qa.hpp"
#include "gapcoref/synthetic.hpp"
#include "gapcoref/tokenizer.hpp"

namespace py = pybind11;
using namespace gapcoref;

PYBIND11_MODULE(_gapcoref, m) {
  m.doc() = "Gendered pronoun resolution toolkit";

  static py::exception<Error> error(m, "GapcorefError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::enum_<Label>(m, "Label").value("A", Label::A).value("B", Label::B).value("N", Label::N);
  py::enum_<Gender>(m, "Gender").value("Male", Gender::Male).value("Female", Gender::Female);

  py::class_<GapRecord>(m, "GapRecord")
      .def(py::init<>())
      .def_readwrite("id", &GapRecord::id)
      .def_readwrite("text", &GapRecord::text)
      .def_readwrite("pronoun", &GapRecord::pronoun)
      .def_readwrite("pronoun_offset", &GapRecord::pronoun_offset)
      .def_readwrite("a_name", &GapRecord::a_name)
      .def_readwrite("a_offset", &GapRecord::a_offset)
      .def_readwrite("a_coref", &GapRecord::a_coref)
      .def_readwrite("b_name", &GapRecord::b_name)
      .def_readwrite("b_offset", &GapRecord::b_offset)
      .def_readwrite("b_coref", &GapRecord::b_coref)
      .def_readwrite("url", &GapRecord::url)
      .def("__repr__", [](const GapRecord& r) { return "<GapRecord " + r.id + ">"; });

  py::class_<DatasetStats>(m, "DatasetStats")
      .def_readonly("total", &DatasetStats::total)
      .def_readonly("a_count", &DatasetStats::a_count)
      .def_readonly("b_count", &DatasetStats::b_count)
      .def_readonly("n_count", &DatasetStats::n_count);

  m.def("parse_gap_tsv", [](const std::string& content) { return parse_gap_tsv(content); });
  m.def("read_gap_file", &read_gap_file);
  m.def("format_gap_tsv", &format_gap_tsv);
  m.def("gold_label", &gold_label);
  m.def("pronoun_gender", py::overload_cast<std::string_view>(&pronoun_gender));
  m.def("dataset_stats", &dataset_stats);
  m.def(
      "stratified_folds",
      [](const std::vector<GapRecord>& records, int k, std::uint64_t seed) {
        return stratified_folds(records, k, seed).assignments;
      },
      py::arg("records"), py::arg("k"), py::arg("seed"));
  m.def(
      "synthetic_gap",
      [](std::size_t count, std::uint64_t seed, double neither) { return synthetic_gap({count, seed, neither}); },
      py::arg("count") = 500, py::arg("seed") = 7, py::arg("neither_fraction") = 0.1);

  py::class_<QaQuery>(m, "QaQuery")
      .def(py::init([](std::string id, std::string text, std::string pronoun, std::int64_t offset) {
             return QaQuery{std::move(id), std::move(text), std::move(pronoun), offset};
           }),
           py::arg("id"), py::arg("text"), py::arg("pronoun"), py::arg("pronoun_offset"));
  m.def("to_query", &to_query);
  m.def("build_question", &build_question, py::arg("query"), py::arg("window") = kDefaultWindow);

  py::class_<Vocab>(m, "Vocab")
      .def_static("load", [](const std::string& content) { return Vocab::load(content); })
      .def_static("from_tokens", &Vocab::from_tokens)
      .def("__len__", &Vocab::size)
      .def("find", &Vocab::find);
  m.def("build_vocab", &build_vocab, py::arg("texts"), py::arg("max_words") = 30000);
  m.def(
      "wordpiece_tokenize",
      [](const std::string& text, const Vocab& vocab) {
        std::vector<std::tuple<std::string, std::int64_t, std::int64_t>> out;
        for (const auto& p : wordpiece_tokenize(text, vocab).pieces) out.emplace_back(p.text, p.span.start, p.span.end);
        return out;
      },
      "(piece, char_start, char_end) triples");

  m.def(
      "extract_best_span",
      [](const Vector& start, const Vector& end, int begin, int stop, int max_answer_len) {
        const TokenSpan s = extract_best_span(SpanLogits{start, end}, TokenRange{begin, stop}, max_answer_len);
        return std::make_pair(s.first, s.last);
      },
      py::arg("start"), py::arg("end"), py::arg("begin"), py::arg("stop"), py::arg("max_answer_len") = kDefaultMaxAnswerLen);

  m.def("warmup_linear_lr", &warmup_linear_lr);
  m.def("triangular_lr", &triangular_lr);

  using Triple = std::array<double, 3>;
  auto to_predictions = [](const std::map<std::string, Triple>& in) {
    Predictions out;
    for (const auto& [id, t] : in) out[id] = ProbTriple{t[0], t[1], t[2]};
    return out;
  };
  auto from_predictions = [](const Predictions& in) {
    std::map<std::string, Triple> out;
    for (const auto& [id, p] : in) out[id] = Triple{p.p_a, p.p_b, p.p_n};
    return out;
  };
  m.def("ensemble_average", [=](const std::vector<std::map<std::string, Triple>>& systems) {
    std::vector<Predictions> converted;
    for (const auto& s : systems) converted.push_back(to_predictions(s));
    return from_predictions(ensemble_average(converted));
  });
  m.def(
      "log_loss",
      [=](const std::map<std::string, Triple>& probs, const std::map<std::string, Label>& golds, double clip) {
        return log_loss(to_predictions(probs), golds, clip);
      },
      py::arg("probs"), py::arg("golds"), py::arg("clip") = 1e-15);
  m.def(
      "evaluate",
      [=](const std::map<std::string, Triple>& probs, const std::vector<GapRecord>& golds, bool macro) {
        const MetricsReport r = gender_metrics(to_predictions(probs), golds, macro);
        return py::dict(py::arg("male_f1") = r.male_f1, py::arg("female_f1") = r.female_f1,
                        py::arg("overall_f1") = r.overall_f1, py::arg("bias") = r.bias,
                        py::arg("log_loss") = r.log_loss, py::arg("male_support") = r.male_support,
                        py::arg("female_support") = r.female_support);
      },
      py::arg("probs"), py::arg("golds"), py::arg("macro") = false);
  m.def("format_ratio", &format_ratio);
}
