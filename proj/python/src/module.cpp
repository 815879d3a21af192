#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "embprobe/api.hpp"
#include "embprobe/clustering.hpp"
#include "embprobe/corpus.hpp"
#include "embprobe/embedding_store.hpp"
#include "embprobe/error.hpp"
#include "embprobe/pipeline.hpp"

namespace py = pybind11;
using namespace embprobe;

namespace {

using FloatRows = py::array_t<float, py::array::c_style | py::array::forcecast>;

EmbeddingSet set_from_arrays(std::uint32_t layer, const std::vector<std::uint64_t>& sentence_ids,
                             const std::vector<std::uint32_t>& positions,
                             const std::vector<std::string>& words, const FloatRows& vectors) {
  if (vectors.ndim() != 2) throw ValidationError("vectors must be a 2-d array");
  const auto n = static_cast<std::size_t>(vectors.shape(0));
  const auto dim = static_cast<std::uint32_t>(vectors.shape(1));
  if (sentence_ids.size() != n || positions.size() != n || words.size() != n) {
    throw ValidationError("sentence_ids, positions, words and vectors must have the same length");
  }
  EmbeddingSet set(layer, dim);
  set.reserve(n);
  const float* data = vectors.data();
  for (std::size_t i = 0; i < n; ++i) {
    set.add({sentence_ids[i], positions[i]}, words[i], std::span<const float>(data + i * dim, dim));
  }
  return set;
}

FloatRows rows_of(std::span<const float> flat, std::size_t n, std::size_t dim) {
  FloatRows out({n, dim});
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

py::dict set_to_dict(const EmbeddingSet& set) {
  std::vector<std::uint64_t> ids;
  std::vector<std::uint32_t> positions;
  for (const auto& r : set.refs()) {
    ids.push_back(r.sentence_id);
    positions.push_back(r.position);
  }
  py::dict d;
  d["layer"] = set.layer();
  d["dim"] = set.dim();
  d["sentence_ids"] = py::array_t<std::uint64_t>(ids.size(), ids.data());
  d["positions"] = py::array_t<std::uint32_t>(positions.size(), positions.data());
  d["words"] = std::vector<std::string>(set.words().begin(), set.words().end());
  d["vectors"] = rows_of(set.data(), set.size(), set.dim());
  return d;
}

PipelineConfig config_of(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return config_from_json(doc);
}

}  // namespace

PYBIND11_MODULE(_embprobe, m) {
  m.doc() = "Clustering and statistics engine for contextual word embeddings";

  static py::exception<Error> base(m, "EmbprobeError", PyExc_RuntimeError);
  static py::exception<ValidationError> validation(m, "ValidationError", base.ptr());
  static py::exception<IoError> io(m, "IoError", base.ptr());
  static py::exception<FormatError> format(m, "FormatError", base.ptr());
  static py::exception<InvariantError> invariant(m, "InvariantError", base.ptr());
  static py::exception<QueryError> query(m, "QueryError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const FormatError& e) {
      py::set_error(format, e.what());
    } catch (const ValidationError& e) {
      py::set_error(validation, e.what());
    } catch (const IoError& e) {
      py::set_error(io, e.what());
    } catch (const InvariantError& e) {
      py::set_error(invariant, e.what());
    } catch (const QueryError& e) {
      py::set_error(query, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("tokenize", [](const std::string& line) { return tokenize(line); }, py::arg("line"));

  m.def(
      "write_embeddings",
      [](const std::filesystem::path& path, std::uint32_t layer,
         const std::vector<std::uint64_t>& sentence_ids, const std::vector<std::uint32_t>& positions,
         const std::vector<std::string>& words, const FloatRows& vectors) {
        write_embeddings(set_from_arrays(layer, sentence_ids, positions, words, vectors), path);
      },
      py::arg("path"), py::arg("layer"), py::arg("sentence_ids"), py::arg("positions"),
      py::arg("words"), py::arg("vectors"));

  m.def(
      "write_catalog",
      [](const std::filesystem::path& path, const std::string& model, std::uint32_t num_layers,
         std::uint32_t dim, const std::vector<std::tuple<std::uint32_t, std::string, std::uint64_t>>& layers) {
        LayerCatalog c{model, num_layers, dim, {}};
        for (const auto& [layer, file, records] : layers) c.layers.push_back({layer, file, records});
        write_catalog(c, path);
      },
      py::arg("path"), py::arg("model"), py::arg("num_layers"), py::arg("dim"), py::arg("layers"));
  m.def("embedding_file_name", &embedding_file_name, py::arg("layer"));
  m.attr("CATALOG_FILE_NAME") = std::string(kCatalogFileName);

  m.def("read_embeddings", [](const std::filesystem::path& path) { return set_to_dict(read_embeddings(path)); },
        py::arg("path"));

  m.def(
      "fit",
      [](const FloatRows& vectors, const std::vector<std::string>& words, std::uint32_t k,
         std::uint32_t restarts, std::uint64_t seed, unsigned threads) {
        const auto n = vectors.ndim() == 2 ? static_cast<std::size_t>(vectors.shape(0)) : 0;
        std::vector<std::uint64_t> ids(n);
        std::vector<std::uint32_t> positions(n, 0);
        for (std::size_t i = 0; i < n; ++i) ids[i] = i;
        const auto set = set_from_arrays(0, ids, positions, words, vectors);
        FitOptions opt;
        opt.k = k;
        opt.restarts = restarts;
        opt.rng_seed = seed;
        opt.lloyd.num_threads = threads;
        BestOfResult r;
        {
          py::gil_scoped_release release;
          r = fit_best_of(set, opt);
        }
        const auto& model = r.best.model;
        py::dict d;
        d["labels"] = py::array_t<Label>(r.best.labels.size(), r.best.labels.data());
        d["centroids"] = rows_of(model.centroids, model.k, model.dim);
        d["sse"] = model.sse;
        d["restart_sse"] = r.restart_sse;
        d["restart_index"] = model.restart_index;
        d["iterations"] = model.iterations;
        return d;
      },
      py::arg("vectors"), py::arg("words"), py::arg("k") = kDefaultK,
      py::arg("restarts") = kDefaultRestarts, py::arg("seed") = 0, py::arg("threads") = 1);

  m.def("normalize_config", [](const std::string& cfg) { return config_to_json(config_of(cfg)).dump(); },
        py::arg("config_json"));
  m.def("ingest", [](const std::string& cfg) { return cmd_ingest(config_of(cfg)).size(); },
        py::arg("config_json"));
  m.def("synth", [](const std::string& cfg) { cmd_synth(config_of(cfg)); }, py::arg("config_json"));
  m.def("layers", [](const std::string& cfg) { return resolve_layers(config_of(cfg)); },
        py::arg("config_json"));
  m.def(
      "cluster",
      [](const std::string& cfg, std::uint32_t layer) {
        const auto c = config_of(cfg);
        py::gil_scoped_release release;
        return cmd_cluster(c, layer).model.sse;
      },
      py::arg("config_json"), py::arg("layer"));
  m.def("stats", [](const std::string& cfg, std::uint32_t layer) { return cmd_stats(config_of(cfg), layer).dump(); },
        py::arg("config_json"), py::arg("layer"));

  py::class_<QueryEngine, std::shared_ptr<QueryEngine>>(m, "Engine")
      .def_static("from_config", [](const std::string& cfg) { return load_engine(config_of(cfg)); },
                  py::arg("config_json"))
      .def_property_readonly("model_name", &QueryEngine::model_name)
      .def(
          "request",
          [](const QueryEngine& e, const std::string& method, const std::string& path,
             const std::string& body, const std::string& top) {
            const auto r = handle_request(e, method, path, top, body);
            return py::make_tuple(r.status, r.body.dump());
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "", py::arg("top") = "");
}
