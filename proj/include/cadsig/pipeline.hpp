#pragma once

// Teacher-forced training, auto-regressive decoding with hybrid sampling and
// Chamfer-based candidate selection, conditional auto-completion and step-wise
// candidate generation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadsig/geom.hpp"
#include "cadsig/net.hpp"
#include "cadsig/synth.hpp"

namespace cadsig {

using Model = net::Model<float>;

struct TrainConfig {
  int epochs = 60;
  int curriculum_epochs = 6;
  int batch_size = 16;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double gamma = 0.999;  // lr multiplier applied after every epoch
  std::uint64_t seed = 0;
  int checkpoint_every = 1;  // epochs
  long max_steps = -1;       // optimizer steps; -1 = no cap

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  /// Hash of every field except epochs and max_steps, which may grow on resume.
  std::string hash() const;
  void validate() const;
};

/// One training example: cloud, ground-truth stream and per-step sketch instances.
struct TrainSample {
  std::string id;
  Cloud cloud;
  std::vector<Token2D> tokens;  // unpadded, cls ... end
  net::StepInstances instances;
  int curve_count = 0;
};

/// Readies a raw cloud for the model: a cloud leaving [0,1]^3 is normalized into
/// the training box [1/255, 254/255]^3, and normals are estimated when the model
/// expects them but the cloud has only coordinates.
Cloud prepare_cloud(const Cloud& raw, int extra_features);

TrainSample make_train_sample(const DatasetSample& s);
/// Sketch instances of every step of a program on a cloud.
net::StepInstances program_instances(const CadProgram& prog, const Cloud& cloud);

struct TrainLogEntry {
  int epoch = 0;
  long step = 0;
  double loss = 0.0;
  double lr = 0.0;
  double accuracy = 0.0;  // both token components predicted correctly
  nlohmann::json to_json() const;
};

struct TrainOptions {
  std::filesystem::path out_dir;  // empty = no checkpoints or logs on disk
  bool resume = false;
  std::function<void(const TrainLogEntry&)> on_step;
};

struct TrainSummary {
  int epochs_run = 0;
  long steps = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
};

/// Teacher-forced loss of one sample (mean over predicted positions of CE(a) + CE(b))
/// and its token accuracy, without touching gradients.
std::pair<double, double> evaluate_teacher_forced(Model& model, const TrainSample& s);

/// Runs training. Checkpoints go to out_dir/checkpoints/last.ckpt (plus epoch
/// snapshots), logs to out_dir/logs/train.jsonl. With resume, refuses a
/// checkpoint whose model or training config hash differs.
TrainSummary train(Model& model, const std::vector<TrainSample>& data, const TrainConfig& cfg,
                   const TrainOptions& opts = {});

// ---------------------------------------------------------------------------
// Decoding

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Candidate {
  std::vector<Token2D> tokens;  // cls ... (end if reached)
  bool valid = false;
  std::string diagnosis;
  double cd = kInfinity;  // squared Chamfer distance to the input cloud
  std::optional<CadProgram> program;
};

struct DecodeResult {
  std::vector<Candidate> candidates;
  int selected = 0;
  bool all_invalid = true;
  nlohmann::json to_json() const;
};

struct DecodeOptions {
  int hybrid_k = 1;
  int eval_points = 8192;
  std::uint64_t seed = 0;
};

/// Reconstruction of a token sequence: parse, evaluate and score against `target`
/// (both normalized to the unit box). Never throws on bad sequences.
Candidate score_tokens(const std::vector<Token2D>& tokens, const Points& target, int eval_points,
                       std::uint64_t seed);

/// Greedy continuation of `prefix` (which must start with cls) until end or 273 tokens.
/// hybrid(k) branches on the k most probable a-components of the first generated token.
DecodeResult decode(Model& model, const Cloud& cloud, const std::vector<Token2D>& prefix,
                    const DecodeOptions& opts = {});

struct AutocompleteResult {
  DecodeResult decoded;
  double cd_completed = kInfinity;  // completion vs. ground truth
  double cd_prefix = kInfinity;     // prefix-only reconstruction vs. ground truth
  std::optional<double> ratio;      // unset when either reconstruction is invalid
};

/// `given` holds cls and the first complete (extrusion, sketch) step.
AutocompleteResult autocomplete(Model& model, const Cloud& cloud, const std::vector<Token2D>& given,
                                const Points& ground_truth, const DecodeOptions& opts = {});

struct StepCandidate {
  std::vector<Token2D> step_tokens;  // tokens appended to the context
  bool finishes = false;             // the step is the end token
  Candidate preview;                 // reconstruction of context + step + end
};

/// Top-k alternatives for the next design step after a context that ends at a step
/// boundary. Each branch is continued greedily until its sketch closes (or end).
std::vector<StepCandidate> next_step_candidates(Model& model, const Cloud& cloud,
                                                const std::vector<Token2D>& context, int k,
                                                const DecodeOptions& opts = {});

/// Text REPL for step-wise design. Each round prints up to k next-step
/// candidates and reads a 1-based choice; "q" (or end of input) stops early.
/// Returns the chosen tokens, ending with end when the design was finished.
struct SessionResult {
  std::vector<Token2D> tokens;
  bool finished = false;
};
SessionResult design_session(Model& model, const Cloud& cloud, int k, std::istream& in, std::ostream& out,
                             const DecodeOptions& opts = {});

/// One-line summary of an extrusion block: boolean op, plane origin and angles.
std::string describe_step(const std::vector<Token2D>& step_tokens);

/// Minimum-CD valid candidate, or 0 when none is valid.
int select_candidate(const std::vector<Candidate>& candidates);

}  // namespace cadsig
