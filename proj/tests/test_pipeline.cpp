#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <random>
#include <sstream>

#include "cadsig/pipeline.hpp"
#include "cadsig/program_io.hpp"

using namespace cadsig;
namespace fs = std::filesystem;

namespace {

std::vector<TrainSample> train_samples(int n, int n_points = 256) {
  GeneratorConfig cfg;
  cfg.seed = 5;
  cfg.n_points = n_points;
  cfg.max_steps = 2;
  std::vector<TrainSample> out;
  for (int i = 0; i < n; ++i) out.push_back(make_train_sample(generate_sample(cfg, i)));
  return out;
}

std::vector<float> weights(Model& m) {
  std::vector<float> w;
  for (auto* p : m.parameters()) w.insert(w.end(), p->value.data(), p->value.data() + p->value.size());
  return w;
}

TrainConfig small_train(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.curriculum_epochs = 1;
  c.batch_size = 2;
  c.seed = 3;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cadsig_pipeline_" + name);
  fs::remove_all(dir);
  return dir;
}

num::Parameter<float>& param(Model& m, const std::string& name) {
  for (auto* p : m.parameters()) {
    if (p->name == name) return *p;
  }
  throw std::runtime_error("no parameter " + name);
}

const std::vector<Token2D> kCls = {{vocab::kCls, vocab::kPad}};

}  // namespace

TEST_CASE("an untrained model starts near the uniform loss") {
  const auto data = train_samples(4);
  Model m(ModelConfig::preset("tiny"), 1);
  const double uniform = 2 * std::log(static_cast<double>(vocab::kSize));
  for (const auto& s : data) {
    const auto [loss, acc] = evaluate_teacher_forced(m, s);
    CHECK(loss == doctest::Approx(uniform).epsilon(0.01));
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
}

TEST_CASE("training is deterministic for a fixed seed and writes parseable logs") {
  const auto data = train_samples(6);
  const fs::path dir = scratch("determinism");
  Model a(ModelConfig::preset("tiny"), 1), b(ModelConfig::preset("tiny"), 1);
  std::vector<double> losses;
  TrainOptions opts;
  opts.out_dir = dir;
  opts.on_step = [&](const TrainLogEntry& e) { losses.push_back(e.loss); };
  const TrainSummary sa = train(a, data, small_train(2), opts);
  const TrainSummary sb = train(b, data, small_train(2));
  CHECK(sa.steps == 6);
  CHECK(sa.epochs_run == 2);
  CHECK(sa.final_loss == sb.final_loss);
  CHECK(weights(a) == weights(b));
  CHECK(losses.size() == 6);
  for (double l : losses) CHECK(std::isfinite(l));

  std::ifstream log(dir / "logs" / "train.jsonl");
  std::string line;
  long lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("step").get<long>() == lines + 1);
    CHECK(j.at("loss").get<double>() == losses[lines]);
    CHECK(j.contains("lr"));
    CHECK(j.contains("accuracy"));
    ++lines;
  }
  CHECK(lines == 6);
  CHECK(fs::exists(dir / "checkpoints" / "last.ckpt"));
  CHECK(fs::exists(dir / "checkpoints" / "epoch_2.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("curriculum epochs visit samples by ascending curve count") {
  // With a pure curriculum schedule the visiting order depends only on curve
  // counts, so presenting the data permuted yields the same weights.
  std::vector<TrainSample> data;
  std::set<int> counts;
  for (const auto& s : train_samples(40)) {
    if (data.size() < 6 && counts.insert(s.curve_count).second) data.push_back(s);
  }
  REQUIRE(data.size() == 6);
  TrainConfig cfg = small_train(1);
  cfg.curriculum_epochs = 1;
  Model a(ModelConfig::preset("tiny"), 1), b(ModelConfig::preset("tiny"), 1);
  train(a, data, cfg);
  auto permuted = data;
  std::reverse(permuted.begin(), permuted.end());
  train(b, permuted, cfg);
  CHECK(weights(a) == weights(b));

  // Shuffled epochs do depend on the presentation order.
  cfg.curriculum_epochs = 0;
  Model c(ModelConfig::preset("tiny"), 1), d(ModelConfig::preset("tiny"), 1);
  train(c, data, cfg);
  train(d, permuted, cfg);
  CHECK(weights(c) != weights(d));
}

TEST_CASE("resuming continues exactly where training stopped") {
  const auto data = train_samples(6);
  Model full(ModelConfig::preset("tiny"), 1);
  train(full, data, small_train(2));

  SUBCASE("at an epoch boundary") {
    const fs::path dir = scratch("resume_epoch");
    TrainOptions opts;
    opts.out_dir = dir;
    Model part(ModelConfig::preset("tiny"), 1);
    train(part, data, small_train(1), opts);
    Model resumed(ModelConfig::preset("tiny"), 99);
    opts.resume = true;
    const TrainSummary s = train(resumed, data, small_train(2), opts);
    CHECK(s.steps == 6);
    CHECK(weights(resumed) == weights(full));
    fs::remove_all(dir);
  }
  SUBCASE("in the middle of an epoch") {
    const fs::path dir = scratch("resume_mid");
    TrainOptions opts;
    opts.out_dir = dir;
    TrainConfig capped = small_train(2);
    capped.max_steps = 4;
    Model part(ModelConfig::preset("tiny"), 1);
    CHECK(train(part, data, capped, opts).steps == 4);
    Model resumed(ModelConfig::preset("tiny"), 99);
    opts.resume = true;
    CHECK(train(resumed, data, small_train(2), opts).steps == 6);
    CHECK(weights(resumed) == weights(full));
    fs::remove_all(dir);
  }
}

TEST_CASE("resume refuses a checkpoint from a different configuration") {
  const auto data = train_samples(2);
  const fs::path dir = scratch("resume_refuse");
  TrainOptions opts;
  opts.out_dir = dir;
  Model m(ModelConfig::preset("tiny"), 1);
  train(m, data, small_train(1), opts);
  opts.resume = true;

  TrainConfig other = small_train(2);
  other.lr = 5e-4;
  Model again(ModelConfig::preset("tiny"), 1);
  CHECK_THROWS_AS(train(again, data, other, opts), ValidationError);

  ModelConfig wider = ModelConfig::preset("tiny");
  wider.ffn *= 2;
  Model different(wider, 1);
  CHECK_THROWS_AS(train(different, data, small_train(2), opts), ValidationError);

  TrainOptions missing;
  missing.out_dir = scratch("resume_missing");
  missing.resume = true;
  CHECK_THROWS_AS(train(again, data, small_train(2), missing), IoError);
  fs::remove_all(dir);
}

TEST_CASE("training configuration validation") {
  TrainConfig c;
  c.curriculum_epochs = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.curriculum_epochs = c.epochs + 5;  // the schedule simply outlasts training
  CHECK_NOTHROW(c.validate());
  c = TrainConfig{};
  c.gamma = 1.5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TrainConfig{};
  CHECK(TrainConfig::from_json(c.to_json()).hash() == c.hash());
  TrainConfig longer = c;
  longer.epochs += 10;
  longer.max_steps = 7;
  CHECK(longer.hash() == c.hash());
  CHECK_THROWS_AS(train(*std::make_unique<Model>(ModelConfig::preset("tiny"), 1), {}, c), ValidationError);
}

TEST_CASE("prepare_cloud normalizes into the training box and adds normals") {
  Points raw(200, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 7.0);
  for (long i = 0; i < raw.rows(); ++i) {
    raw(i, 0) = u(rng);
    raw(i, 1) = u(rng) * 0.5;
    raw(i, 2) = 0.0;  // a plane, so every normal is +-z
  }
  const Cloud c = prepare_cloud(make_cloud(raw, nullptr), 3);
  REQUIRE(c.cols() == 6);
  const Points xyz = cloud_xyz(c);
  CHECK(xyz.minCoeff() >= 1.0 / 255.0 - 1e-6);
  CHECK(xyz.maxCoeff() <= 254.0 / 255.0 + 1e-6);
  for (long i = 0; i < c.rows(); ++i) CHECK(std::abs(c(i, 5)) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(prepare_cloud(make_cloud(raw, nullptr), 0).cols() == 3);
  CHECK_THROWS_AS(prepare_cloud(Cloud(5, 4), 3), ShapeError);
}

TEST_CASE("score_tokens reports bad sequences without throwing") {
  const Candidate bad = score_tokens({{vocab::kCls, vocab::kPad}, {vocab::kEndLoop, vocab::kPad}}, Points::Random(10, 3), 256, 0);
  CHECK_FALSE(bad.valid);
  CHECK_FALSE(bad.diagnosis.empty());
  CHECK(bad.cd == kInfinity);

  GeneratorConfig g;
  g.seed = 9;
  const CadProgram prog = generate_program(g, 0);
  const SolidSample s = evaluate_program(prog, 2048, 1);
  const Candidate good = score_tokens(program_to_stream(prog).unpadded(), s.points, 2048, 1);
  CHECK(good.valid);
  CHECK(good.cd < 1e-12);
}

TEST_CASE("decoding") {
  const auto data = train_samples(1, 512);
  Model m(ModelConfig::preset("tiny"), 2);
  // Untrained heads are nearly flat; larger output weights give decisive,
  // varied greedy choices.
  for (const char* h : {"head.x.w", "head.y.w"}) param(m, h).value *= 100.0f;
  DecodeOptions opts;
  opts.eval_points = 512;
  const Cloud& cloud = data[0].cloud;

  const DecodeResult one = decode(m, cloud, kCls, opts);
  REQUIRE(one.candidates.size() == 1);
  CHECK(one.selected == 0);
  const auto& greedy = one.candidates[0].tokens;
  CHECK(greedy.front() == kCls[0]);
  CHECK((greedy.back().a == vocab::kEnd || static_cast<int>(greedy.size()) == vocab::kMaxTokens));
  CHECK(decode(m, cloud, kCls, opts).to_json() == one.to_json());

  opts.hybrid_k = 5;
  const DecodeResult five = decode(m, cloud, kCls, opts);
  REQUIRE(five.candidates.size() == 5);
  CHECK(five.candidates[0].tokens == greedy);
  std::set<int> firsts;
  for (const auto& c : five.candidates) firsts.insert(c.tokens[1].a);
  CHECK(firsts.size() == 5);
  CHECK(five.selected == select_candidate(five.candidates));
  if (!five.all_invalid) {
    for (const auto& c : five.candidates) {
      if (c.valid) CHECK(five.candidates[five.selected].cd <= c.cd);
    }
  }

  opts.hybrid_k = 0;
  CHECK_THROWS_AS(decode(m, cloud, kCls, opts), ValidationError);
  opts.hybrid_k = 1;
  CHECK_THROWS_AS(decode(m, cloud, {{vocab::kEndLoop, 0}}, opts), ValidationError);
}

TEST_CASE("candidate selection") {
  std::vector<Candidate> c(3);
  CHECK(select_candidate(c) == 0);
  c[1].valid = true;
  c[1].cd = 0.5;
  c[2].valid = true;
  c[2].cd = 0.2;
  c[0].cd = 0.0;  // invalid candidates never win
  CHECK(select_candidate(c) == 2);
}

TEST_CASE("auto-completion") {
  GeneratorConfig g;
  g.seed = 11;
  g.n_points = 512;
  g.max_steps = 3;
  DatasetSample s;
  for (int i = 0;; ++i) {
    s = generate_sample(g, i);
    if (s.program.steps.size() >= 2) break;
  }
  const auto tokens = program_to_stream(s.program).unpadded();
  const auto second = std::find_if(tokens.begin() + 1, tokens.end(), [](const Token2D& t) { return t.a == vocab::kEndSketch; });
  const std::vector<Token2D> given(tokens.begin(), second + 1);
  const Points truth = evaluate_program(s.program, 2048, 3).points;
  DecodeOptions opts;
  opts.eval_points = 1024;

  SUBCASE("a model that stops at once reproduces the prefix") {
    Model m(ModelConfig::preset("tiny"), 2);
    param(m, "head.x.b").value(0, vocab::kEnd) = 1e3f;
    const AutocompleteResult r = autocomplete(m, s.cloud, given, truth, opts);
    const auto& chosen = r.decoded.candidates[r.decoded.selected].tokens;
    CHECK(chosen.size() == given.size() + 1);
    CHECK(chosen.back().a == vocab::kEnd);
    REQUIRE(r.ratio.has_value());
    CHECK(*r.ratio == 1.0);
    CHECK(r.cd_prefix == r.cd_completed);
  }
  SUBCASE("the prefix must be exactly one step") {
    Model m(ModelConfig::preset("tiny"), 2);
    CHECK_THROWS_AS(autocomplete(m, s.cloud, tokens, truth, opts), ValidationError);
    CHECK_THROWS_AS(autocomplete(m, s.cloud, std::vector<Token2D>(given.begin(), given.end() - 1), truth, opts),
                    ValidationError);
  }
}

TEST_CASE("step-wise candidates and the design session") {
  const auto data = train_samples(1, 512);
  Model m(ModelConfig::preset("tiny"), 4);
  for (const char* h : {"head.x.w", "head.y.w"}) param(m, h).value *= 100.0f;
  // Favor closing sketches so steps stay short.
  param(m, "head.x.b").value(0, vocab::kEndSketch) = 8.0f;
  DecodeOptions opts;
  opts.eval_points = 512;
  const Cloud& cloud = data[0].cloud;
  const auto greedy = decode(m, cloud, kCls, opts).candidates[0].tokens;

  const auto one = next_step_candidates(m, cloud, kCls, 1, opts);
  REQUIRE(one.size() == 1);
  const auto& st = one[0].step_tokens;
  REQUIRE(st.size() + 1 <= greedy.size());
  CHECK(std::equal(st.begin(), st.end(), greedy.begin() + 1));

  const auto three = next_step_candidates(m, cloud, kCls, 3, opts);
  REQUIRE(three.size() == 3);
  std::set<int> firsts;
  for (const auto& c : three) {
    firsts.insert(c.step_tokens.front().a);
    CHECK(c.finishes == (c.step_tokens.front().a == vocab::kEnd));
    CHECK_FALSE(describe_step(c.step_tokens).empty());
  }
  CHECK(firsts.size() == 3);
  CHECK(three[0].step_tokens == st);

  CHECK_THROWS_AS(next_step_candidates(m, cloud, kCls, 0, opts), ValidationError);
  CHECK_THROWS_AS(next_step_candidates(m, cloud, {kCls[0], {vocab::kEndCurve, 0}}, 1, opts), ValidationError);

  SUBCASE("always taking the first candidate reproduces greedy decoding") {
    std::string script;
    for (int i = 0; i < 300; ++i) script += "1\n";
    std::istringstream answers(script);
    std::ostringstream out;
    const SessionResult r = design_session(m, cloud, 2, answers, out, opts);
    CHECK(r.tokens == greedy);
    CHECK(r.finished == (greedy.back().a == vocab::kEnd));
    CHECK(out.str().find("[2]") != std::string::npos);
  }
  SUBCASE("quitting keeps the steps chosen so far") {
    std::istringstream answers("x\n1\nq\n");
    std::ostringstream out;
    const SessionResult r = design_session(m, cloud, 2, answers, out, opts);
    CHECK(r.finished == one[0].finishes);
    CHECK(r.tokens.size() == 1 + st.size());
    CHECK(out.str().find("invalid choice 'x'") != std::string::npos);
  }
}
