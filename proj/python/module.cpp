// Python bindings for the drill tutor core.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "drilltutor/corpus.hpp"
#include "drilltutor/counters.hpp"
#include "drilltutor/drill.hpp"
#include "drilltutor/error.hpp"
#include "drilltutor/language.hpp"
#include "drilltutor/pattern.hpp"
#include "drilltutor/store.hpp"

namespace py = pybind11;
using namespace dt;

namespace {

using Renderings = std::map<LanguageCode, std::string>;

ValueTuple to_tuple(const std::map<VariableName, Renderings>& values) {
  ValueTuple t;
  for (const auto& [name, r] : values) t[name] = LexicalValue{name, r};
  return t;
}

std::map<VariableName, std::vector<LexicalValue>> to_lists(const std::map<VariableName, std::vector<Renderings>>& values) {
  std::map<VariableName, std::vector<LexicalValue>> out;
  for (const auto& [name, list] : values)
    for (const auto& r : list) out[name].push_back(LexicalValue{name, r});
  return out;
}

py::dict item_dict(const DrillItem& item) {
  py::dict d;
  d["pattern"] = item.pattern_id;
  d["stimulus"] = item.stimulus;
  d["source"] = item.source_sentence;
  d["target"] = item.target_sentence;
  d["kana"] = item.kana_sentence;
  return d;
}

py::dict counters_dict(const Counters& c) {
  py::dict d;
  d["presentations"] = c.presentations;
  d["corrects"] = c.corrects;
  d["errors"] = c.errors;
  return d;
}

const char* phase_label(Phase p) {
  switch (p) {
    case Phase::Model: return "model";
    case Phase::AwaitReport: return "await_report";
    case Phase::Feedback: return "feedback";
    case Phase::Done: return "done";
  }
  return "";
}

Corpus corpus_of(const std::map<std::string, std::string>& documents) {
  Corpus corpus;
  for (const auto& [id, text] : documents) corpus.add_document(id, text);
  return corpus;
}

CategorizedLexicon lexicon_of(const std::map<std::string, std::string>& entries) {
  CategorizedLexicon lex;
  for (const auto& [surface, category] : entries) lex.add(surface, category);
  return lex;
}

}  // namespace

PYBIND11_MODULE(drilltutor, m) {
  m.doc() = "Pattern drills: templates, scheduling, corpus search, counters.";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple(e.name(), e.detail()).ptr());
    }
  });

  py::class_<PatternTemplate>(m, "Pattern")
      .def(py::init([](std::string id, const Renderings& renderings, std::vector<VariableName> variables) {
             return PatternTemplate::from_text(std::move(id), renderings, std::move(variables));
           }),
           py::arg("id"), py::arg("renderings"), py::arg("variables") = std::vector<VariableName>{})
      .def_property_readonly("id", &PatternTemplate::id)
      .def_property_readonly("variables", &PatternTemplate::variables)
      .def("rendering", &PatternTemplate::rendering_text, py::arg("language"))
      .def(
          "instantiate",
          [](const PatternTemplate& p, const LanguageCode& lang, const std::map<VariableName, Renderings>& values) {
            return instantiate(p, lang, to_tuple(values));
          },
          py::arg("language"), py::arg("values"))
      .def(
          "enumerate",
          [](const PatternTemplate& p, const LanguageCode& lang,
             const std::map<VariableName, std::vector<Renderings>>& values) {
            std::vector<std::string> out;
            for (const auto& e : enumerate(p, lang, to_lists(values))) out.push_back(e.sentence);
            return out;
          },
          py::arg("language"), py::arg("values"))
      .def(
          "match",
          [](const PatternTemplate& p, const LanguageCode& lang, const std::string& sentence) {
            std::vector<std::map<VariableName, std::string>> out;
            for (const auto& b : match(p, lang, sentence)) out.push_back(b.captures);
            return out;
          },
          py::arg("language"), py::arg("sentence"))
      .def("query", [](const PatternTemplate& p, const LanguageCode& lang) { return compile_query(p, lang).text(); },
           py::arg("language"));

  py::class_<DrillSession>(m, "Drill")
      .def(py::init([](const PatternTemplate& p, const std::map<VariableName, std::vector<Renderings>>& values,
                       std::size_t k, std::size_t w, bool shuffle, std::uint64_t seed,
                       std::optional<std::size_t> max_rounds) {
             SessionConfig c;
             c.removal_streak = k;
             c.reinsert_window = w;
             c.order = shuffle ? Order::shuffled : Order::fixed;
             c.seed = seed;
             c.max_rounds = max_rounds;
             return DrillSession::start(make_drill_items(p, to_lists(values)), c);
           }),
           py::arg("pattern"), py::arg("values"), py::arg("k") = 2, py::arg("w") = 3, py::arg("shuffle") = true,
           py::arg("seed") = 0, py::arg("max_rounds") = std::nullopt)
      .def_property_readonly("phase", [](const DrillSession& s) { return phase_label(s.phase()); })
      .def_property_readonly("model", [](const DrillSession& s) { return item_dict(s.model()); })
      .def_property_readonly("items", [](const DrillSession& s) {
        py::list out;
        for (const auto& i : s.items()) out.append(item_dict(i));
        return out;
      })
      .def("next", [](DrillSession& s) { return s.next_stimulus().text; })
      .def(
          "report",
          [](DrillSession& s, bool correct) {
            const auto fb = s.reveal_and_report(correct ? SelfReport::correct : SelfReport::incorrect);
            py::dict d;
            d["target"] = fb.target_sentence;
            d["kana"] = fb.kana_sentence;
            d["verification"] = fb.verification == SelfReport::correct ? "correct" : "incorrect";
            d["streak"] = fb.streak;
            d["removed"] = fb.removed;
            d["done"] = fb.done;
            return d;
          },
          py::arg("correct"))
      .def("stop", &DrillSession::stop)
      .def("log", [](const DrillSession& s) {
        std::vector<std::string> lines;
        for (const auto& e : s.events()) lines.push_back(format_event(e));
        return lines;
      })
      .def("totals", [](const DrillSession& s) { return counters_dict(s.stats().totals); });

  m.def("counter_form", &counter_form, py::arg("number"), py::arg("counter_class"));
  m.def("counter_classes", [] { return CounterTable::bundled().classes(); });

  m.def(
      "transliterate",
      [](const std::string& kana) { return Transliterator(default_language_pack().transliteration)(kana); },
      py::arg("kana"));

  m.def(
      "find",
      [](const PatternTemplate& p, const LanguageCode& lang, const std::map<std::string, std::string>& documents) {
        const auto corpus = corpus_of(documents);
        std::vector<std::map<VariableName, std::string>> out;
        for (const auto& c : find_instances(compile_query(p, lang), corpus)) out.push_back(c.captures);
        return out;
      },
      py::arg("pattern"), py::arg("language"), py::arg("documents"));

  m.def(
      "abstract",
      [](const std::string& sentence, const std::map<std::string, std::string>& lexicon,
         const std::optional<std::map<std::string, std::string>>& documents) {
        const auto lex = lexicon_of(lexicon);
        std::optional<Corpus> corpus;
        if (documents) corpus = corpus_of(*documents);
        std::vector<std::pair<std::string, std::size_t>> out;
        for (const auto& c : abstract_patterns(sentence, lex, corpus ? &*corpus : nullptr))
          out.emplace_back(c.template_text, c.support);
        return out;
      },
      py::arg("sentence"), py::arg("lexicon"), py::arg("documents") = std::nullopt);

  m.def(
      "canonical_bundle",
      [](const std::string& bundle) {
        auto db = make_empty_database();
        const auto report = import_bundle(db, bundle, Principal{"admin", true});
        if (!report.ok()) {
          const auto& e = report.errors.front();
          throw Error(e.kind, e.message);
        }
        return export_bundle(db);
      },
      py::arg("bundle"));
}
