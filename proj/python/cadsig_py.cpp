// Python bindings. Structured values cross the boundary as JSON text; the
// Python package decodes them into dicts.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "cadsig/corpus.hpp"
#include "cadsig/metrics.hpp"
#include "cadsig/num/checkpoint.hpp"
#include "cadsig/pipeline.hpp"
#include "cadsig/program_io.hpp"

namespace py = pybind11;
using namespace cadsig;
using nlohmann::json;

namespace {

using TokenList = std::vector<std::array<int, 2>>;

std::vector<Token2D> to_tokens(const TokenList& t) {
  std::vector<Token2D> out;
  out.reserve(t.size());
  for (const auto& [a, b] : t) out.push_back({a, b});
  return out;
}

TokenList from_tokens(const std::vector<Token2D>& t) {
  TokenList out;
  out.reserve(t.size());
  for (const Token2D& k : t) out.push_back({k.a, k.b});
  return out;
}

CadProgram parse_program(const std::string& text) { return program_from_json(json::parse(text)); }

// A cloud given as N x 3 or N x 6 float array, prepared for the model.
Cloud model_cloud(const Model& m, const Cloud& raw) { return prepare_cloud(raw, m.config().extra_features); }

std::unique_ptr<Model> model_from_checkpoint(const std::filesystem::path& path) {
  num::CheckpointReader r(path);
  if (!r.meta().contains("model_config")) throw ValidationError(path.string() + ": checkpoint has no model config");
  auto m = std::make_unique<Model>(ModelConfig::from_json(r.meta().at("model_config")), 0);
  if (r.meta().value("model_config_hash", std::string()) != m->config().hash()) {
    throw ValidationError(path.string() + ": model config hash mismatch");
  }
  m->read_weights(r);
  return m;
}

}  // namespace

PYBIND11_MODULE(_cadsig, mod) {
  mod.doc() = "Point cloud to CAD design history: language, geometry, model and metrics";

  auto base = py::register_exception<Error>(mod, "CadsigError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(mod, "ValidationError", base.ptr());
  py::register_exception<IoError>(mod, "IoError", base.ptr());
  py::register_exception<SyntaxError>(mod, "ProgramSyntaxError", base.ptr());
  py::register_exception<DomainError>(mod, "DomainError", base.ptr());
  py::register_exception<CapacityError>(mod, "CapacityError", base.ptr());
  py::register_exception<ShapeError>(mod, "ShapeError", base.ptr());
  py::register_exception<GenerationError>(mod, "GenerationError", base.ptr());
  py::register_exception<NumericError>(mod, "NumericError", base.ptr());

  mod.attr("VOCAB_SIZE") = vocab::kSize;
  mod.attr("MAX_TOKENS") = vocab::kMaxTokens;

  // Language
  mod.def("quantize_scalar", &quantize_scalar, py::arg("p"));
  mod.def("dequantize_scalar", &dequantize_scalar, py::arg("q"));
  mod.def("program_to_tokens", [](const std::string& prog) {
    return from_tokens(program_to_stream(parse_program(prog)).unpadded());
  }, py::arg("program_json"));
  mod.def("tokens_to_program", [](const TokenList& t) { return program_to_json(tokens_to_program(to_tokens(t))).dump(); },
          py::arg("tokens"));

  // Data
  mod.def("generate_sample", [](std::uint64_t seed, int index, int n_points, int max_steps) {
    GeneratorConfig cfg;
    cfg.seed = seed;
    cfg.n_points = n_points;
    cfg.max_steps = max_steps;
    cfg.validate();
    const DatasetSample s = generate_sample(cfg, index);
    return py::make_tuple(program_to_json(s.program).dump(), s.cloud);
  }, py::arg("seed"), py::arg("index"), py::arg("n_points") = 1024, py::arg("max_steps") = 3);

  // Geometry
  mod.def("evaluate_program", [](const std::string& prog, int n_points, std::uint64_t seed) {
    const SolidSample s = evaluate_program(parse_program(prog), n_points, seed);
    return py::make_tuple(s.valid, s.diagnosis, s.points, s.normals);
  }, py::arg("program_json"), py::arg("n_points") = 8192, py::arg("seed") = 0);
  mod.def("estimate_normals", &estimate_normals, py::arg("points"), py::arg("k") = 16);
  mod.def("mesh_program", [](const std::string& prog, int resolution) {
    const Mesh m = mesh_solid(build_solid(parse_program(prog)), resolution);
    Points v(static_cast<long>(m.vertices.size()), 3);
    for (size_t i = 0; i < m.vertices.size(); ++i) v.row(static_cast<long>(i)) = m.vertices[i].transpose();
    return py::make_tuple(v, m.triangles);
  }, py::arg("program_json"), py::arg("resolution") = 48);

  // Metrics
  mod.def("chamfer", &chamfer, py::arg("x"), py::arg("y"));
  mod.def("hungarian", [](const Eigen::MatrixXd& cost) {
    if (cost.rows() != cost.cols()) throw ShapeError("cost matrix must be square");
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = cost;
    return hungarian(std::vector<double>(rm.data(), rm.data() + rm.size()), static_cast<int>(rm.rows()));
  }, py::arg("cost"));
  mod.def("evaluate_prediction", [](const std::string& gt, const TokenList& pred, int eval_points, std::uint64_t seed) {
    const EvalRecord r = evaluate_prediction("sample", parse_program(gt), to_tokens(pred), eval_points, seed);
    json j = aggregate({r}).to_json();
    j["valid"] = r.valid;
    j["cd"] = r.valid ? json(r.cd) : json(nullptr);
    return j.dump();
  }, py::arg("gt_program_json"), py::arg("pred_tokens"), py::arg("eval_points") = 8192, py::arg("seed") = 0);
  mod.def("run_fixture", [](const std::filesystem::path& root, const std::string& name) {
    const FixtureResult r = run_fixture(root, name);
    return py::make_tuple(r.passed, r.provenance, r.failures);
  }, py::arg("root"), py::arg("name"));

  // Model
  py::class_<Model>(mod, "Model")
      .def(py::init([](const std::string& preset, std::uint64_t seed) {
             return std::make_unique<Model>(ModelConfig::preset(preset), seed);
           }),
           py::arg("preset") = "tiny", py::arg("seed") = 0)
      .def_static("from_config_json", [](const std::string& cfg, std::uint64_t seed) {
        return std::make_unique<Model>(ModelConfig::from_json(json::parse(cfg)), seed);
      }, py::arg("config_json"), py::arg("seed") = 0)
      .def_static("from_checkpoint", &model_from_checkpoint, py::arg("path"))
      .def("config_json", [](const Model& m) { return m.config().to_json().dump(); })
      .def("parameter_count", &Model::parameter_count)
      .def("save", [](const Model& m, const std::filesystem::path& p) { m.save(p); }, py::arg("path"))
      .def("decode", [](Model& m, const Cloud& cloud, int hybrid_k, int eval_points, std::uint64_t seed) {
        py::gil_scoped_release release;
        return decode(m, model_cloud(m, cloud), {{vocab::kCls, vocab::kPad}}, {hybrid_k, eval_points, seed}).to_json().dump();
      }, py::arg("cloud"), py::arg("hybrid_k") = 1, py::arg("eval_points") = 8192, py::arg("seed") = 0)
      .def("autocomplete", [](Model& m, const Cloud& cloud, const TokenList& given, int hybrid_k, int eval_points,
                              std::uint64_t seed) {
        py::gil_scoped_release release;
        const Cloud c = model_cloud(m, cloud);
        const AutocompleteResult a = autocomplete(m, c, to_tokens(given), cloud_xyz(c), {hybrid_k, eval_points, seed});
        json j = a.decoded.to_json();
        j["cd_ratio"] = a.ratio ? json(*a.ratio) : json(nullptr);
        return j.dump();
      }, py::arg("cloud"), py::arg("given"), py::arg("hybrid_k") = 1, py::arg("eval_points") = 8192, py::arg("seed") = 0)
      .def("next_steps", [](Model& m, const Cloud& cloud, const TokenList& context, int k, int eval_points) {
        py::gil_scoped_release release;
        DecodeOptions o;
        o.eval_points = eval_points;
        json out = json::array();
        for (const StepCandidate& c : next_step_candidates(m, model_cloud(m, cloud), to_tokens(context), k, o)) {
          out.push_back({{"tokens", tokens_to_json(c.step_tokens)},
                         {"finishes", c.finishes},
                         {"summary", describe_step(c.step_tokens)},
                         {"preview_valid", c.preview.valid},
                         {"preview_cd", c.preview.valid ? json(c.preview.cd) : json(nullptr)}});
        }
        return out.dump();
      }, py::arg("cloud"), py::arg("context"), py::arg("k") = 3, py::arg("eval_points") = 8192)
      .def("train", [](Model& m, const std::filesystem::path& data_dir, const std::string& train_cfg,
                       const std::string& split, int limit, const std::filesystem::path& out_dir) {
        const Dataset ds = read_dataset(data_dir);
        std::vector<TrainSample> data;
        for (const DatasetSample* s : ds.split(split)) {
          if (limit > 0 && static_cast<int>(data.size()) >= limit) break;
          data.push_back(make_train_sample(*s));
        }
        if (data.empty()) throw ValidationError("split '" + split + "' is empty");
        TrainOptions opts;
        opts.out_dir = out_dir;
        py::gil_scoped_release release;
        const TrainSummary s = train(m, data, TrainConfig::from_json(json::parse(train_cfg)), opts);
        return json{{"steps", s.steps}, {"epochs", s.epochs_run}, {"loss", s.final_loss}, {"accuracy", s.final_accuracy}}
            .dump();
      }, py::arg("data_dir"), py::arg("train_config_json") = "{}", py::arg("split") = "train", py::arg("limit") = 0,
         py::arg("out_dir") = std::filesystem::path());
}
