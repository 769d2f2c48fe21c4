// cadsig: dataset generation, training, inference, auto-completion, evaluation
// and fixture checks. Exit codes: 0 success, 1 validation error, 2 IO error,
// 3 internal error.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cadsig/corpus.hpp"
#include "cadsig/metrics.hpp"
#include "cadsig/parallel.hpp"
#include "cadsig/pipeline.hpp"
#include "cadsig/program_io.hpp"

#ifndef CADSIG_VERSION
#define CADSIG_VERSION "unknown"
#endif

using namespace cadsig;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

// One manifest per run directory; the command line alone reproduces the run.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  std::string started = utc_now();
  json config = json::object();
  std::uint64_t seed = 0;
  json inputs = json::object();
  json outputs = json::object();

  void write(const fs::path& dir) const {
    write_json(dir / "run.json", {{"command", command},
                                  {"argv", argv},
                                  {"version", CADSIG_VERSION},
                                  {"seed", seed},
                                  {"config", config},
                                  {"inputs", inputs},
                                  {"outputs", outputs},
                                  {"started", started},
                                  {"finished", utc_now()}});
  }
};

struct Loaded {
  std::unique_ptr<Model> model;
  json meta;
};

Loaded load_model(const fs::path& ckpt) {
  num::CheckpointReader r(ckpt);
  if (!r.meta().contains("model_config")) throw ValidationError(ckpt.string() + ": checkpoint has no model config");
  Loaded l;
  l.meta = r.meta();
  l.model = std::make_unique<Model>(ModelConfig::from_json(r.meta().at("model_config")), 0);
  if (r.meta().value("model_config_hash", std::string()) != l.model->config().hash()) {
    throw ValidationError(ckpt.string() + ": model config hash mismatch");
  }
  l.model->read_weights(r);
  l.meta.erase("tensors");
  return l;
}

Cloud load_cloud(const fs::path& p, const Model& m) { return prepare_cloud(read_ply(p), m.config().extra_features); }

// Tokens from a prediction file: a decode result, a token list or a program.
std::vector<Token2D> prediction_tokens(const json& j) {
  if (j.contains("candidates")) {
    const int sel = j.at("selected").get<int>();
    return tokens_from_json(j.at("candidates").at(sel).at("tokens"));
  }
  if (j.contains("decoded")) return prediction_tokens(j.at("decoded"));
  if (j.contains("tokens")) return tokens_from_json(j.at("tokens"));
  if (j.contains("steps")) return program_to_stream(program_from_json(j)).unpadded();
  throw ValidationError("prediction holds neither candidates, tokens nor a program");
}

std::vector<Token2D> prefix_tokens(const fs::path& p) {
  const json j = read_json(p);
  std::vector<Token2D> t;
  if (j.contains("steps")) {
    CadProgram prog = program_from_json(j);
    if (prog.steps.empty()) throw ValidationError(p.string() + ": prefix program has no steps");
    prog.steps.resize(1);
    t = program_to_stream(prog).unpadded();
    t.pop_back();  // drop end
  } else {
    t = tokens_from_json(j.contains("tokens") ? j.at("tokens") : j);
  }
  return t;
}

void print_table(const EvalReport& r) {
  std::cout << std::fixed << std::setprecision(3);
  std::cout << "samples " << r.samples << "  IR " << r.ir_percent << "%  mean CD " << r.mean_cd << "  median CD "
            << r.median_cd << "  (x1e3)\n";
  const char* names[3] = {"line", "arc", "circle"};
  for (int t = 0; t < 3; ++t) {
    std::cout << std::setw(9) << names[t] << "  P " << r.curves[t].precision() << "  R " << r.curves[t].recall()
              << "  F1 " << r.curves[t].f1() << "\n";
  }
  std::cout << std::setw(9) << "extrusion"
            << "  P " << r.extrusions.precision() << "  R " << r.extrusions.recall() << "  F1 " << r.extrusions.f1()
            << "\n";
  if (r.cd_ratio) {
    std::cout << "CD ratio  Q1 " << r.cd_ratio->q1 << "  Q2 " << r.cd_ratio->q2 << "  Q3 " << r.cd_ratio->q3 << "\n";
  }
  std::cout.unsetf(std::ios::floatfield);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point cloud to CAD design history"};
  app.require_subcommand(1);
  Manifest man;
  for (int i = 0; i < argc; ++i) man.argv.emplace_back(argv[i]);
  std::uint64_t seed = 0;
  int threads = worker_threads();

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  std::string gen_config, gen_out;
  std::optional<int> gen_count, gen_val, gen_test, gen_points;
  gen->add_option("--config", gen_config, "Generator config JSON");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--count", gen_count, "Training samples");
  gen->add_option("--val-count", gen_val, "Validation samples");
  gen->add_option("--test-count", gen_test, "Test samples");
  gen->add_option("--points", gen_points, "Points per cloud");
  gen->add_option("--seed", seed, "Random seed");

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string tr_data, tr_out, tr_preset = "tiny", tr_model_cfg, tr_train_cfg, tr_split = "train";
  std::optional<int> tr_epochs, tr_curr, tr_batch, tr_limit, tr_every;
  std::optional<long> tr_max_steps;
  std::optional<double> tr_lr, tr_gamma;
  bool tr_resume = false;
  int tr_log_every = 10;
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--model-preset", tr_preset, "tiny, desk, full or gradcheck");
  tr->add_option("--model-config", tr_model_cfg, "Model config JSON (overrides the preset)");
  tr->add_option("--train-config", tr_train_cfg, "Training config JSON");
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--curriculum-epochs", tr_curr);
  tr->add_option("--batch-size", tr_batch);
  tr->add_option("--lr", tr_lr);
  tr->add_option("--gamma", tr_gamma);
  tr->add_option("--max-steps", tr_max_steps);
  tr->add_option("--checkpoint-every", tr_every);
  tr->add_option("--split", tr_split, "Dataset split to train on");
  tr->add_option("--limit", tr_limit, "Use only the first N samples of the split");
  tr->add_option("--log-every", tr_log_every, "Print every N steps");
  tr->add_option("--seed", seed);
  tr->add_flag("--resume", tr_resume, "Continue from <out>/checkpoints/last.ckpt");

  // infer
  auto* inf = app.add_subcommand("infer", "Reconstruct a design history from a point cloud");
  std::string inf_ckpt, inf_cloud, inf_out;
  int hybrid_k = 1, eval_points = 8192, mesh_res = 48;
  inf->add_option("--ckpt", inf_ckpt)->required();
  inf->add_option("--cloud", inf_cloud, "PLY point cloud")->required();
  inf->add_option("--out", inf_out)->required();
  inf->add_option("--hybrid-k", hybrid_k, "Branches on the first generated token");
  inf->add_option("--eval-points", eval_points);
  inf->add_option("--mesh-resolution", mesh_res);
  inf->add_option("--seed", seed);

  // predict
  auto* pred = app.add_subcommand("predict", "Decode every sample of a dataset split");
  std::string pr_ckpt, pr_data, pr_out, pr_split = "test";
  std::optional<int> pr_limit;
  bool pr_autocomplete = false;
  pred->add_option("--ckpt", pr_ckpt)->required();
  pred->add_option("--data", pr_data)->required();
  pred->add_option("--out", pr_out)->required();
  pred->add_option("--split", pr_split);
  pred->add_option("--limit", pr_limit);
  pred->add_option("--hybrid-k", hybrid_k);
  pred->add_option("--eval-points", eval_points);
  pred->add_flag("--autocomplete", pr_autocomplete, "Give the first ground-truth step and record the CD ratio");
  pred->add_option("--seed", seed);

  // autocomplete
  auto* ac = app.add_subcommand("autocomplete", "Complete a design from its first step, or design step by step");
  std::string ac_ckpt, ac_cloud, ac_prefix, ac_out;
  bool ac_interactive = false;
  int ac_k = 5;
  ac->add_option("--ckpt", ac_ckpt)->required();
  ac->add_option("--cloud", ac_cloud)->required();
  ac->add_option("--prefix", ac_prefix, "Program or token JSON holding the first step");
  ac->add_option("--out", ac_out)->required();
  ac->add_option("--k", ac_k, "Candidates per step in interactive mode");
  ac->add_option("--hybrid-k", hybrid_k);
  ac->add_option("--eval-points", eval_points);
  ac->add_flag("--interactive", ac_interactive);
  ac->add_option("--seed", seed);

  // eval
  auto* ev = app.add_subcommand("eval", "Score predictions against ground truth");
  std::string ev_pred, ev_gt, ev_out, ev_split;
  ev->add_option("--pred-dir", ev_pred)->required();
  ev->add_option("--gt-dir", ev_gt, "Dataset directory or directory of <id>.json programs")->required();
  ev->add_option("--out", ev_out, "Report JSON path")->required();
  ev->add_option("--split", ev_split, "Restrict a dataset ground truth to one split");
  ev->add_option("--eval-points", eval_points);
  ev->add_option("--seed", seed);

  // fixtures
  auto* fx = app.add_subcommand("fixtures", "Run the regression corpus");
  std::string fx_dir = "fixtures", fx_name;
  fx->add_option("--dir", fx_dir);
  fx->add_option("--name", fx_name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      man.command = "gen-data";
      GeneratorConfig cfg = gen_config.empty() ? GeneratorConfig{} : GeneratorConfig::from_json(read_json(gen_config));
      if (gen->count("--seed")) cfg.seed = seed;
      if (gen_count) cfg.n_train = *gen_count;
      if (gen_val) cfg.n_val = *gen_val;
      if (gen_test) cfg.n_test = *gen_test;
      if (gen_points) cfg.n_points = *gen_points;
      cfg.validate();
      if (cfg.n_train + cfg.n_val + cfg.n_test < 1) throw ValidationError("--count must be at least 1");
      if (gen_count && *gen_count < 1) throw ValidationError("--count must be at least 1");
      const auto samples = generate_dataset(cfg, threads);
      write_dataset(samples, cfg, gen_out);
      man.seed = cfg.seed;
      man.config = cfg.to_json();
      man.outputs = {{"dataset", gen_out}};
      man.write(gen_out);
      std::cout << "wrote " << samples.size() << " samples to " << gen_out << "\n";
    } else if (tr->parsed()) {
      man.command = "train";
      ModelConfig mc = tr_model_cfg.empty() ? ModelConfig::preset(tr_preset)
                                            : ModelConfig::from_json(read_json(tr_model_cfg));
      TrainConfig tc = tr_train_cfg.empty() ? TrainConfig{} : TrainConfig::from_json(read_json(tr_train_cfg));
      if (tr->count("--seed")) tc.seed = seed;
      if (tr_epochs) tc.epochs = *tr_epochs;
      if (tr_curr) tc.curriculum_epochs = *tr_curr;
      if (tr_batch) tc.batch_size = *tr_batch;
      if (tr_lr) tc.lr = *tr_lr;
      if (tr_gamma) tc.gamma = *tr_gamma;
      if (tr_max_steps) tc.max_steps = *tr_max_steps;
      if (tr_every) tc.checkpoint_every = *tr_every;
      tc.validate();
      const Dataset ds = read_dataset(tr_data);
      std::vector<TrainSample> data;
      for (const DatasetSample* s : ds.split(tr_split)) {
        if (tr_limit && static_cast<int>(data.size()) >= *tr_limit) break;
        data.push_back(make_train_sample(*s));
      }
      if (data.empty()) throw ValidationError("split '" + tr_split + "' of " + tr_data + " is empty");
      Model model(mc, tc.seed);
      fs::create_directories(tr_out);
      write_json(fs::path(tr_out) / "config.json", {{"model", mc.to_json()},
                                                    {"model_hash", mc.hash()},
                                                    {"train", tc.to_json()},
                                                    {"train_hash", tc.hash()},
                                                    {"data", tr_data},
                                                    {"data_config_hash", ds.config_hash},
                                                    {"split", tr_split},
                                                    {"samples", data.size()}});
      TrainOptions opts;
      opts.out_dir = tr_out;
      opts.resume = tr_resume;
      opts.on_step = [&](const TrainLogEntry& e) {
        if (tr_log_every > 0 && e.step % tr_log_every == 0) std::cout << e.to_json().dump() << std::endl;
      };
      const TrainSummary s = train(model, data, tc, opts);
      man.seed = tc.seed;
      man.config = {{"model", mc.to_json()}, {"train", tc.to_json()}};
      man.inputs = {{"data", tr_data}, {"split", tr_split}, {"resume", tr_resume}};
      man.outputs = {{"checkpoint", (fs::path(tr_out) / "checkpoints" / "last.ckpt").string()},
                     {"log", (fs::path(tr_out) / "logs" / "train.jsonl").string()},
                     {"steps", s.steps},
                     {"final_loss", s.final_loss},
                     {"final_accuracy", s.final_accuracy}};
      man.write(tr_out);
      std::cout << "trained " << s.steps << " steps, loss " << s.final_loss << ", accuracy " << s.final_accuracy
                << "\n";
    } else if (inf->parsed()) {
      man.command = "infer";
      Loaded l = load_model(inf_ckpt);
      const Cloud cloud = load_cloud(inf_cloud, *l.model);
      DecodeOptions o;
      o.hybrid_k = hybrid_k;
      o.eval_points = eval_points;
      o.seed = seed;
      const DecodeResult r = decode(*l.model, cloud, {{vocab::kCls, vocab::kPad}}, o);
      fs::create_directories(inf_out);
      write_json(fs::path(inf_out) / "decode.json", r.to_json());
      json outputs = {{"decode", "decode.json"}, {"candidates", json::array()}};
      for (size_t i = 0; i < r.candidates.size(); ++i) {
        if (!r.candidates[i].program) continue;
        const std::string name = "candidate_" + std::to_string(i) + ".json";
        save_program(*r.candidates[i].program, fs::path(inf_out) / name);
        outputs["candidates"].push_back(name);
      }
      const Candidate& best = r.candidates[r.selected];
      if (best.valid) {
        const Mesh mesh = mesh_solid(build_solid(*best.program), mesh_res);
        write_obj(mesh, fs::path(inf_out) / "selected.obj");
        outputs["mesh"] = "selected.obj";
      }
      man.seed = seed;
      man.config = {{"hybrid_k", hybrid_k}, {"eval_points", eval_points}, {"model", l.meta.at("model_config")}};
      man.inputs = {{"ckpt", inf_ckpt}, {"cloud", inf_cloud}};
      man.outputs = outputs;
      man.write(inf_out);
      std::cout << "selected candidate " << r.selected << (best.valid ? " (valid" : " (invalid");
      if (best.valid) std::cout << ", CD " << best.cd * 1e3 << "e-3";
      std::cout << ") of " << r.candidates.size() << "\n";
    } else if (pred->parsed()) {
      man.command = "predict";
      Loaded l = load_model(pr_ckpt);
      const Dataset ds = read_dataset(pr_data);
      std::vector<const DatasetSample*> items = ds.split(pr_split);
      if (pr_limit && static_cast<int>(items.size()) > *pr_limit) items.resize(*pr_limit);
      if (items.empty()) throw ValidationError("split '" + pr_split + "' of " + pr_data + " is empty");
      fs::create_directories(pr_out);
      DecodeOptions o;
      o.hybrid_k = hybrid_k;
      o.eval_points = eval_points;
      o.seed = seed;
      int valid = 0;
      std::vector<json> results(items.size());
      parallel_for(static_cast<int>(items.size()), threads, [&](int i) {
        const DatasetSample& s = *items[i];
        json j;
        if (pr_autocomplete) {
          CadProgram first = s.program;
          first.steps.resize(1);
          auto given = program_to_stream(first).unpadded();
          given.pop_back();
          const AutocompleteResult a = autocomplete(*l.model, s.cloud, given, cloud_xyz(s.cloud), o);
          j = a.decoded.to_json();
          j["cd_ratio"] = a.ratio ? json(*a.ratio) : json(nullptr);
        } else {
          j = decode(*l.model, s.cloud, {{vocab::kCls, vocab::kPad}}, o).to_json();
        }
        j["id"] = s.id;
        results[i] = std::move(j);
      });
      for (size_t i = 0; i < items.size(); ++i) {
        valid += results[i].at("all_invalid").get<bool>() ? 0 : 1;
        write_json(fs::path(pr_out) / (items[i]->id + ".json"), results[i]);
      }
      man.seed = seed;
      man.config = {{"hybrid_k", hybrid_k}, {"eval_points", eval_points}, {"autocomplete", pr_autocomplete}};
      man.inputs = {{"ckpt", pr_ckpt}, {"data", pr_data}, {"split", pr_split}};
      man.outputs = {{"predictions", items.size()}};
      man.write(pr_out);
      std::cout << "decoded " << items.size() << " samples, " << valid << " with a valid candidate\n";
    } else if (ac->parsed()) {
      man.command = "autocomplete";
      Loaded l = load_model(ac_ckpt);
      const Cloud cloud = load_cloud(ac_cloud, *l.model);
      DecodeOptions o;
      o.hybrid_k = hybrid_k;
      o.eval_points = eval_points;
      o.seed = seed;
      fs::create_directories(ac_out);
      json outputs;
      if (ac_interactive) {
        const SessionResult s = design_session(*l.model, cloud, ac_k, std::cin, std::cout, o);
        std::vector<Token2D> tokens = s.tokens;
        if (!s.finished) tokens.push_back({vocab::kEnd, vocab::kPad});
        const Candidate c = score_tokens(tokens, cloud_xyz(cloud), eval_points, seed);
        write_json(fs::path(ac_out) / "session.json", {{"tokens", tokens_to_json(s.tokens)},
                                                       {"finished", s.finished},
                                                       {"valid", c.valid},
                                                       {"cd", c.valid ? json(c.cd) : json(nullptr)}});
        outputs = {{"session", "session.json"}};
        if (c.program) {
          save_program(*c.program, fs::path(ac_out) / "program.json");
          outputs["program"] = "program.json";
        }
        std::cout << (s.finished ? "design finished" : "session stopped") << ", saved to " << ac_out << "\n";
      } else {
        if (ac_prefix.empty()) throw ValidationError("--prefix is required without --interactive");
        const auto given = prefix_tokens(ac_prefix);
        const AutocompleteResult a = autocomplete(*l.model, cloud, given, cloud_xyz(cloud), o);
        json j = a.decoded.to_json();
        j["cd_completed"] = std::isfinite(a.cd_completed) ? json(a.cd_completed) : json(nullptr);
        j["cd_prefix"] = std::isfinite(a.cd_prefix) ? json(a.cd_prefix) : json(nullptr);
        j["cd_ratio"] = a.ratio ? json(*a.ratio) : json(nullptr);
        write_json(fs::path(ac_out) / "autocomplete.json", j);
        outputs = {{"autocomplete", "autocomplete.json"}};
        const Candidate& best = a.decoded.candidates[a.decoded.selected];
        if (best.program) {
          save_program(*best.program, fs::path(ac_out) / "program.json");
          outputs["program"] = "program.json";
        }
        std::cout << "CD ratio " << (a.ratio ? std::to_string(*a.ratio) : std::string("undefined")) << "\n";
      }
      man.seed = seed;
      man.config = {{"interactive", ac_interactive}, {"k", ac_k}, {"hybrid_k", hybrid_k}};
      man.inputs = {{"ckpt", ac_ckpt}, {"cloud", ac_cloud}, {"prefix", ac_prefix}};
      man.outputs = outputs;
      man.write(ac_out);
    } else if (ev->parsed()) {
      man.command = "eval";
      std::map<std::string, CadProgram> gt;
      if (fs::exists(fs::path(ev_gt) / "manifest.json")) {
        const Dataset ds = read_dataset(ev_gt);
        for (const auto& s : ds.samples) {
          if (ev_split.empty() || s.split == ev_split) gt[s.id] = s.program;
        }
      } else {
        if (!fs::is_directory(ev_gt)) throw IoError(ev_gt + ": ground-truth directory not found");
        for (const auto& e : fs::directory_iterator(ev_gt)) {
          if (e.path().extension() == ".json" && e.path().filename() != "run.json") {
            gt[e.path().stem().string()] = load_program(e.path());
          }
        }
      }
      if (!fs::is_directory(ev_pred)) throw IoError(ev_pred + ": prediction directory not found");
      std::map<std::string, fs::path> preds;
      for (const auto& e : fs::directory_iterator(ev_pred)) {
        if (e.path().extension() == ".json" && e.path().filename() != "run.json") {
          preds[e.path().stem().string()] = e.path();
        }
      }
      std::vector<std::string> missing, extra;
      for (const auto& [id, _] : gt) {
        if (!preds.count(id)) missing.push_back(id);
      }
      for (const auto& [id, _] : preds) {
        if (!gt.count(id)) extra.push_back(id);
      }
      if (!missing.empty() || !extra.empty()) {
        std::string msg = "sample ids do not align;";
        if (!missing.empty()) msg += " missing predictions: " + json(missing).dump() + ";";
        if (!extra.empty()) msg += " predictions without ground truth: " + json(extra).dump();
        throw ValidationError(msg);
      }
      if (gt.empty()) throw ValidationError("no samples to evaluate");
      std::vector<std::string> ids;
      for (const auto& [id, _] : gt) ids.push_back(id);
      std::vector<EvalRecord> records(ids.size());
      parallel_for(static_cast<int>(ids.size()), threads, [&](int i) {
        const json j = read_json(preds.at(ids[i]));
        records[i] = evaluate_prediction(ids[i], gt.at(ids[i]), prediction_tokens(j), eval_points, seed);
        if (j.contains("cd_ratio") && j.at("cd_ratio").is_number()) records[i].cd_ratio = j.at("cd_ratio").get<double>();
      });
      const EvalReport report = aggregate(records);
      json out = report.to_json();
      json per = json::array();
      for (const EvalRecord& r : records) {
        per.push_back({{"id", r.id},
                       {"valid", r.valid},
                       {"cd_x1e3", r.valid ? json(r.cd * 1e3) : json(nullptr)},
                       {"extrusions_predicted", r.extrusions.tp + r.extrusions.fp},
                       {"cd_ratio", r.cd_ratio ? json(*r.cd_ratio) : json(nullptr)}});
      }
      out["records"] = per;
      const fs::path out_path(ev_out);
      if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
      write_json(out_path, out);
      print_table(report);
      man.seed = seed;
      man.config = {{"eval_points", eval_points}, {"split", ev_split}};
      man.inputs = {{"pred_dir", ev_pred}, {"gt_dir", ev_gt}};
      man.outputs = {{"report", ev_out}};
      man.write(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."));
    } else if (fx->parsed()) {
      const std::vector<std::string> names = fx_name.empty() ? list_fixtures(fx_dir) : std::vector{fx_name};
      int failed = 0;
      for (const auto& n : names) {
        const FixtureResult r = run_fixture(fx_dir, n);
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " [" << r.provenance << "]\n";
        for (const auto& f : r.failures) std::cout << "  " << f << "\n";
        failed += r.passed ? 0 : 1;
      }
      std::cout << names.size() - failed << "/" << names.size() << " fixtures passed\n";
      return failed ? 1 : 0;
    }
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const SyntaxError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const CapacityError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const GenerationError& e) {
    std::cerr << "generation error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
