#include "cadsig/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "cadsig/metrics.hpp"
#include "cadsig/num/optim.hpp"
#include "cadsig/program_io.hpp"

namespace cadsig {

using nlohmann::json;
namespace fs = std::filesystem;

json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"curriculum_epochs", curriculum_epochs},
          {"batch_size", batch_size},
          {"lr", lr},
          {"beta1", beta1},
          {"beta2", beta2},
          {"eps", eps},
          {"weight_decay", weight_decay},
          {"gamma", gamma},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"max_steps", max_steps}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.curriculum_epochs = j.value("curriculum_epochs", c.curriculum_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.gamma = j.value("gamma", c.gamma);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.max_steps = j.value("max_steps", c.max_steps);
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed training config: ") + ex.what());
  }
  c.validate();
  return c;
}

std::string TrainConfig::hash() const {
  json j = to_json();
  j.erase("epochs");
  j.erase("max_steps");
  return fnv1a_hex(j.dump());
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (curriculum_epochs < 0) throw ValidationError("curriculum_epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(lr > 0)) throw ValidationError("lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ValidationError("betas must be in [0, 1)");
  if (!(eps > 0)) throw ValidationError("eps must be > 0");
  if (!(weight_decay >= 0)) throw ValidationError("weight_decay must be >= 0");
  if (!(gamma > 0 && gamma <= 1)) throw ValidationError("gamma must be in (0, 1]");
  if (checkpoint_every < 1) throw ValidationError("checkpoint_every must be >= 1");
}

net::StepInstances program_instances(const CadProgram& prog, const Cloud& cloud) {
  const Points xyz = cloud_xyz(cloud);
  net::StepInstances out;
  for (const DesignStep& s : prog.steps) out.emplace_back(extract_sketch_instance(xyz, s.extrusion).indices);
  return out;
}

Cloud prepare_cloud(const Cloud& raw, int extra_features) {
  if (raw.cols() != 3 && raw.cols() != 6) throw ShapeError("cloud must have 3 or 6 columns");
  if (extra_features != 0 && extra_features != 3) throw ValidationError("only 0 or 3 extra features are supported");
  Points xyz = cloud_xyz(raw);
  bool moved = false;
  if (xyz.minCoeff() < 0.0 || xyz.maxCoeff() > 1.0) {
    constexpr double m = 1.0 / 255.0;
    xyz = (normalize_to_unit_box(xyz).array() * (1.0 - 2 * m) + m).matrix();
    moved = true;
  }
  if (extra_features == 0) return make_cloud(xyz, nullptr);
  if (raw.cols() == 6 && !moved) return raw;
  Points normals;
  if (raw.cols() == 6) {
    normals = raw.rightCols(3).cast<double>();
  } else {
    normals = estimate_normals(xyz);
  }
  return make_cloud(xyz, &normals);
}

TrainSample make_train_sample(const DatasetSample& s) {
  TrainSample t;
  t.id = s.id;
  t.cloud = s.cloud;
  t.tokens = program_to_stream(s.program).unpadded();
  t.instances = program_instances(s.program, s.cloud);
  t.curve_count = s.curve_count;
  return t;
}

json TrainLogEntry::to_json() const {
  return {{"epoch", epoch}, {"step", step}, {"loss", loss}, {"lr", lr}, {"accuracy", accuracy}};
}

namespace {

struct SampleResult {
  double loss = 0.0;  // weighted sum (already divided by the batch token count)
  long correct = 0;
  long positions = 0;
};

int argmax_row(const num::Mat<float>& m, long r) {
  long best = 0;
  m.row(r).maxCoeff(&best);
  return static_cast<int>(best);
}

// Forward (and optionally backward) of one teacher-forced sample. `weight` scales
// every position's loss.
SampleResult run_sample(Model& model, const TrainSample& s, float weight, bool backward, std::mt19937_64* rng) {
  const long n = static_cast<long>(s.tokens.size()) - 1;
  if (n < 1) throw ValidationError(s.id + ": token stream too short");
  num::Tape<float> tape(backward);
  const bool train = backward && rng != nullptr;
  const auto pf = model.encode_points(tape, s.cloud, train, rng);
  const std::vector<Token2D> in(s.tokens.begin(), s.tokens.begin() + n);
  const auto lg = model.decode_tokens(tape, pf, in, s.instances, -1, train, rng);
  std::vector<int> ta(n), tb(n);
  for (long i = 0; i < n; ++i) {
    ta[i] = s.tokens[i + 1].a;
    tb[i] = s.tokens[i + 1].b;
  }
  const std::vector<float> w(n, weight);
  const auto loss =
      num::add(num::cross_entropy_from_logits(lg.ox, ta, w), num::cross_entropy_from_logits(lg.oy, tb, w));
  SampleResult r;
  r.loss = loss.value()(0, 0);
  r.positions = n;
  for (long i = 0; i < n; ++i) {
    if (argmax_row(lg.ox.value(), i) == ta[i] && argmax_row(lg.oy.value(), i) == tb[i]) ++r.correct;
  }
  if (backward) tape.backward(loss);
  return r;
}

void write_checkpoint(const fs::path& path, Model& model, num::AdamW<float>& opt, const TrainConfig& cfg, int epoch,
                      int batch, long step) {
  num::CheckpointWriter w;
  model.write_weights(w);
  const auto params = model.parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    w.add("adam/m/" + params[i]->name, opt.first_moments()[i]);
    w.add("adam/v/" + params[i]->name, opt.second_moments()[i]);
  }
  json meta = {{"model_config", model.config().to_json()},
               {"model_config_hash", model.config().hash()},
               {"train_config", cfg.to_json()},
               {"train_config_hash", cfg.hash()},
               {"epoch", epoch},
               {"batch", batch},
               {"step", step},
               {"lr", opt.lr()}};
  fs::create_directories(path.parent_path());
  w.write(path, meta);
}

}  // namespace

std::pair<double, double> evaluate_teacher_forced(Model& model, const TrainSample& s) {
  const long n = static_cast<long>(s.tokens.size()) - 1;
  const SampleResult r = run_sample(model, s, 1.0f / static_cast<float>(n), false, nullptr);
  return {r.loss, static_cast<double>(r.correct) / static_cast<double>(r.positions)};
}

TrainSummary train(Model& model, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                   const TrainOptions& opts) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: empty dataset");
  num::AdamWConfig oc;
  oc.lr = cfg.lr;
  oc.beta1 = cfg.beta1;
  oc.beta2 = cfg.beta2;
  oc.eps = cfg.eps;
  oc.weight_decay = cfg.weight_decay;
  oc.gamma = cfg.gamma;
  num::AdamW<float> opt(model.parameters(), oc);

  const fs::path ckpt_dir = opts.out_dir.empty() ? fs::path() : opts.out_dir / "checkpoints";
  const fs::path last = ckpt_dir / "last.ckpt";
  int start_epoch = 0, start_batch = 0;
  long step = 0;
  if (opts.resume) {
    if (opts.out_dir.empty() || !fs::exists(last)) {
      throw IoError("resume: no checkpoint at " + last.string());
    }
    num::CheckpointReader r(last);
    const json& m = r.meta();
    if (m.value("model_config_hash", std::string()) != model.config().hash()) {
      throw ValidationError("resume: model config hash " + m.value("model_config_hash", std::string()) +
                            " does not match " + model.config().hash());
    }
    if (m.value("train_config_hash", std::string()) != cfg.hash()) {
      throw ValidationError("resume: training config hash " + m.value("train_config_hash", std::string()) +
                            " does not match " + cfg.hash());
    }
    model.read_weights(r);
    const auto params = model.parameters();
    for (size_t i = 0; i < params.size(); ++i) {
      r.load_into("adam/m/" + params[i]->name, opt.first_moments()[i]);
      r.load_into("adam/v/" + params[i]->name, opt.second_moments()[i]);
    }
    start_epoch = m.at("epoch").get<int>();
    start_batch = m.at("batch").get<int>();
    step = m.at("step").get<long>();
    opt.set_lr(m.at("lr").get<double>());
    opt.set_step_count(step);
  }

  std::ofstream log;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir / "logs");
    log.open(opts.out_dir / "logs" / "train.jsonl", opts.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open " + (opts.out_dir / "logs" / "train.jsonl").string());
  }

  std::vector<int> counts;
  for (const auto& s : data) counts.push_back(s.curve_count);
  const std::vector<int> curriculum = curriculum_order(counts);
  const int n_batches = static_cast<int>((data.size() + cfg.batch_size - 1) / cfg.batch_size);

  TrainSummary summary;
  summary.steps = step;
  bool stop = cfg.max_steps >= 0 && step >= cfg.max_steps;
  for (int epoch = start_epoch; epoch < cfg.epochs && !stop; ++epoch) {
    std::vector<int> order = curriculum;
    if (epoch >= cfg.curriculum_epochs) {
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 shuffle_rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1)));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
    }
    for (int b = epoch == start_epoch ? start_batch : 0; b < n_batches; ++b) {
      const int lo = b * cfg.batch_size;
      const int hi = std::min<int>(lo + cfg.batch_size, static_cast<int>(data.size()));
      long tokens = 0;
      for (int i = lo; i < hi; ++i) tokens += static_cast<long>(data[order[i]].tokens.size()) - 1;
      std::mt19937_64 rng(cfg.seed * 0x2545f4914f6cdd1dULL + static_cast<std::uint64_t>(step));
      double loss = 0.0;
      long correct = 0;
      for (int i = lo; i < hi; ++i) {
        const SampleResult r = run_sample(model, data[order[i]], 1.0f / static_cast<float>(tokens), true, &rng);
        if (!std::isfinite(r.loss)) {
          throw NumericError("non-finite loss " + std::to_string(r.loss) + " on sample " + data[order[i]].id +
                             " at step " + std::to_string(step));
        }
        loss += r.loss;
        correct += r.correct;
      }
      const std::string diag = opt.step();
      if (!diag.empty()) throw NumericError("step " + std::to_string(step) + ": " + diag);
      opt.zero_grad();
      ++step;
      TrainLogEntry e{epoch, step, loss, opt.lr(), static_cast<double>(correct) / static_cast<double>(tokens)};
      if (log) log << e.to_json().dump() << "\n" << std::flush;
      if (opts.on_step) opts.on_step(e);
      summary.final_loss = e.loss;
      summary.final_accuracy = e.accuracy;
      if (cfg.max_steps >= 0 && step >= cfg.max_steps) {
        stop = true;
        if (!ckpt_dir.empty()) {
          const bool epoch_done = b + 1 == n_batches;
          if (epoch_done) opt.epoch_end();
          write_checkpoint(last, model, opt, cfg, epoch_done ? epoch + 1 : epoch, epoch_done ? 0 : b + 1, step);
          if (epoch_done) summary.epochs_run = epoch + 1;
        }
        break;
      }
    }
    if (stop) break;
    opt.epoch_end();
    summary.epochs_run = epoch + 1;
    if (!ckpt_dir.empty() && ((epoch + 1) % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)) {
      write_checkpoint(last, model, opt, cfg, epoch + 1, 0, step);
      fs::copy_file(last, ckpt_dir / ("epoch_" + std::to_string(epoch + 1) + ".ckpt"),
                    fs::copy_options::overwrite_existing);
    }
  }
  summary.steps = step;
  return summary;
}

// ---------------------------------------------------------------------------
// Decoding

json DecodeResult::to_json() const {
  json cands = json::array();
  for (const Candidate& c : candidates) {
    json j = {{"tokens", tokens_to_json(c.tokens)}, {"valid", c.valid}, {"diagnosis", c.diagnosis}};
    j["cd"] = std::isfinite(c.cd) ? json(c.cd) : json(nullptr);
    j["program"] = c.program ? program_to_json(*c.program) : json(nullptr);
    cands.push_back(std::move(j));
  }
  return {{"candidates", cands}, {"selected", selected}, {"all_invalid", all_invalid}};
}

Candidate score_tokens(const std::vector<Token2D>& tokens, const Points& target, int eval_points,
                       std::uint64_t seed) {
  Candidate c;
  c.tokens = tokens;
  try {
    c.program = tokens_to_program(tokens);
  } catch (const SyntaxError& e) {
    c.diagnosis = e.what();
    return c;
  }
  const SolidSample s = evaluate_program(*c.program, eval_points, seed);
  if (!s.valid) {
    c.diagnosis = s.diagnosis;
    return c;
  }
  c.valid = true;
  c.cd = chamfer(normalize_to_unit_box(s.points), normalize_to_unit_box(target));
  return c;
}

int select_candidate(const std::vector<Candidate>& candidates) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    if (!candidates[i].valid) continue;
    if (best < 0 || candidates[i].cd < candidates[best].cd) best = i;
  }
  return best < 0 ? 0 : best;
}

namespace {

bool is_finished(const std::vector<Token2D>& t) { return t.size() > 1 && t.back().a == vocab::kEnd; }

// Sketch instances from the extrusion blocks completed so far, recomputed only
// when a new block closes.
class InstanceTracker {
 public:
  explicit InstanceTracker(const Cloud& cloud) : xyz_(cloud_xyz(cloud)) {}
  const net::StepInstances& update(const std::vector<Token2D>& tokens) {
    const auto done = completed_extrusions(tokens);
    if (done.size() != inst_.size()) {
      inst_.resize(done.size());
      for (size_t i = 0; i < done.size(); ++i) {
        if (done[i] && !inst_[i]) inst_[i] = extract_sketch_instance(xyz_, *done[i]).indices;
      }
    }
    return inst_;
  }

 private:
  Points xyz_;
  net::StepInstances inst_;
};

std::pair<num::Mat<float>, num::Mat<float>> extend(Model& model, net::DecodeState<float>& state,
                                                   InstanceTracker& tracker, const std::vector<Token2D>& tokens) {
  return model.extend(state, tokens, tracker.update(tokens));
}

Token2D greedy(const std::pair<num::Mat<float>, num::Mat<float>>& logits) {
  return {argmax_row(logits.first, 0), argmax_row(logits.second, 0)};
}

// Continues greedily until `stop` holds, the sequence ends or reaches 273 tokens.
template <class Stop>
void continue_greedy(Model& model, net::DecodeState<float>& state, InstanceTracker& tracker,
                     std::vector<Token2D>& tokens, Stop stop) {
  while (!is_finished(tokens) && !stop(tokens) && static_cast<int>(tokens.size()) < vocab::kMaxTokens) {
    tokens.push_back(greedy(extend(model, state, tracker, tokens)));
  }
}

// Indices of the k largest entries (ties by index).
std::vector<int> top_k(const num::Mat<float>& row, int k) {
  std::vector<int> idx(row.cols());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min<int>(k, static_cast<int>(idx.size()));
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    return row(0, a) > row(0, b) || (row(0, a) == row(0, b) && a < b);
  });
  idx.resize(k);
  return idx;
}

void check_prefix(const std::vector<Token2D>& prefix) {
  if (prefix.empty() || prefix.front().a != vocab::kCls || prefix.front().b != vocab::kPad) {
    throw ValidationError("prefix must start with the cls token (1, 0)");
  }
  if (static_cast<int>(prefix.size()) > vocab::kMaxTokens) {
    throw ValidationError("prefix longer than 273 tokens");
  }
}

struct Session {
  net::DecodeState<float> state;
  InstanceTracker tracker;
};

Session start(Model& model, const Cloud& cloud) {
  num::Tape<float> tape(false);
  const auto pf = model.encode_points(tape, cloud);
  return {model.begin_decode(model.detach(pf)), InstanceTracker(cloud)};
}

}  // namespace

DecodeResult decode(Model& model, const Cloud& cloud, const std::vector<Token2D>& prefix, const DecodeOptions& opts) {
  check_prefix(prefix);
  if (opts.hybrid_k < 1) throw ValidationError("hybrid_k must be >= 1");
  const Points target = cloud_xyz(cloud);
  DecodeResult result;
  std::vector<std::vector<Token2D>> branches;
  if (is_finished(prefix) || static_cast<int>(prefix.size()) == vocab::kMaxTokens) {
    branches.push_back(prefix);
  } else {
    Session root = start(model, cloud);
    const auto first = extend(model, root.state, root.tracker, prefix);
    const int b_first = argmax_row(first.second, 0);
    for (int a : top_k(first.first, opts.hybrid_k)) {
      Session s = root;
      std::vector<Token2D> tokens = prefix;
      tokens.push_back({a, b_first});
      continue_greedy(model, s.state, s.tracker, tokens, [](const auto&) { return false; });
      branches.push_back(std::move(tokens));
    }
  }
  for (const auto& t : branches) result.candidates.push_back(score_tokens(t, target, opts.eval_points, opts.seed));
  result.selected = select_candidate(result.candidates);
  result.all_invalid = std::none_of(result.candidates.begin(), result.candidates.end(),
                                    [](const Candidate& c) { return c.valid; });
  return result;
}

AutocompleteResult autocomplete(Model& model, const Cloud& cloud, const std::vector<Token2D>& given,
                                const Points& ground_truth, const DecodeOptions& opts) {
  check_prefix(given);
  if (completed_extrusions(given).size() != 1 || given.back().a != vocab::kEndSketch) {
    throw ValidationError("autocomplete: the prefix must hold exactly one complete extrusion and sketch");
  }
  AutocompleteResult r;
  r.decoded = decode(model, cloud, given, opts);
  std::vector<Token2D> prefix_only = given;
  prefix_only.push_back({vocab::kEnd, vocab::kPad});
  const Candidate p = score_tokens(prefix_only, ground_truth, opts.eval_points, opts.seed);
  const Candidate c =
      score_tokens(r.decoded.candidates[r.decoded.selected].tokens, ground_truth, opts.eval_points, opts.seed);
  r.cd_prefix = p.cd;
  r.cd_completed = c.cd;
  if (p.valid && c.valid && p.cd > 0) r.ratio = c.cd / p.cd;
  return r;
}

std::vector<StepCandidate> next_step_candidates(Model& model, const Cloud& cloud, const std::vector<Token2D>& context,
                                                int k, const DecodeOptions& opts) {
  check_prefix(context);
  if (k < 1) throw ValidationError("k must be >= 1");
  if (is_finished(context)) throw ValidationError("context already ends with the end token");
  if (context.size() > 1 && context.back().a != vocab::kEndSketch) {
    throw ValidationError("context must end at a step boundary (cls or e_s)");
  }
  if (static_cast<int>(context.size()) == vocab::kMaxTokens) throw ValidationError("context is full");
  const Points target = cloud_xyz(cloud);
  Session root = start(model, cloud);
  const auto first = extend(model, root.state, root.tracker, context);
  const int b_first = argmax_row(first.second, 0);
  std::vector<StepCandidate> out;
  for (int a : top_k(first.first, k)) {
    Session s = root;
    std::vector<Token2D> tokens = context;
    tokens.push_back({a, b_first});
    continue_greedy(model, s.state, s.tracker, tokens,
                    [](const std::vector<Token2D>& t) { return t.back().a == vocab::kEndSketch; });
    StepCandidate c;
    c.step_tokens.assign(tokens.begin() + static_cast<long>(context.size()), tokens.end());
    c.finishes = c.step_tokens.front().a == vocab::kEnd;
    std::vector<Token2D> full = tokens;
    if (!is_finished(full)) full.push_back({vocab::kEnd, vocab::kPad});
    c.preview = score_tokens(full, target, opts.eval_points, opts.seed);
    out.push_back(std::move(c));
  }
  return out;
}

std::string describe_step(const std::vector<Token2D>& step_tokens) {
  if (step_tokens.empty()) return "(empty)";
  if (step_tokens.front().a == vocab::kEnd) return "finish design";
  std::vector<Token2D> t = {{vocab::kCls, vocab::kPad}};
  t.insert(t.end(), step_tokens.begin(), step_tokens.end());
  const auto ext = completed_extrusions(t);
  if (ext.empty() || !ext[0]) return "malformed extrusion";
  const ExtrusionOp& e = *ext[0];
  int curves = 0;
  for (const Token2D& tok : step_tokens) curves += tok.a == vocab::kEndCurve;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s origin (%.3f, %.3f, %.3f) angles (%.2f, %.2f, %.2f) scale %.3f, %d curves",
                boolean_op_name(e.op), e.tau[0], e.tau[1], e.tau[2], e.euler[0], e.euler[1], e.euler[2], e.sigma,
                curves);
  return buf;
}

SessionResult design_session(Model& model, const Cloud& cloud, int k, std::istream& in, std::ostream& out,
                             const DecodeOptions& opts) {
  SessionResult r;
  r.tokens = {{vocab::kCls, vocab::kPad}};
  while (!r.finished && static_cast<int>(r.tokens.size()) < vocab::kMaxTokens) {
    const auto cands = next_step_candidates(model, cloud, r.tokens, k, opts);
    out << "step " << completed_extrusions(r.tokens).size() + 1 << ": " << cands.size() << " candidates\n";
    for (size_t i = 0; i < cands.size(); ++i) {
      out << "  [" << i + 1 << "] " << describe_step(cands[i].step_tokens) << ", preview ";
      if (cands[i].preview.valid) {
        out << "CD " << cands[i].preview.cd * 1e3 << "e-3";
      } else {
        out << "invalid (" << cands[i].preview.diagnosis << ")";
      }
      out << "\n";
    }
    int pick = -1;
    while (pick < 0) {
      out << "choose 1-" << cands.size() << " or q: " << std::flush;
      std::string line;
      if (!std::getline(in, line) || line == "q" || line == "quit") return r;
      try {
        size_t used = 0;
        const int v = std::stoi(line, &used);
        if (used == line.size() && v >= 1 && v <= static_cast<int>(cands.size())) pick = v - 1;
      } catch (const std::exception&) {
      }
      if (pick < 0) out << "invalid choice '" << line << "'\n";
    }
    const auto& chosen = cands[pick].step_tokens;
    r.tokens.insert(r.tokens.end(), chosen.begin(), chosen.end());
    r.finished = is_finished(r.tokens);
    if (!r.finished && r.tokens.back().a != vocab::kEndSketch) break;  // truncated at capacity
  }
  return r;
}

}  // namespace cadsig
