#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "cadsig/geom.hpp"
#include "cadsig/net.hpp"
#include "cadsig/synth.hpp"
#include "model_checks.hpp"

using namespace cadsig;
using net::Model;
using num::Mat;
using num::Tape;
using num::Var;

namespace {

using testing::Example;
using testing::jitter;
using testing::logits_both;
using testing::make_example;

Mat<double> logits_a(Model<double>& m, const Example& e, const std::vector<Token2D>& tokens, int true_len = -1) {
  Tape<double> t(false);
  const auto pf = m.encode_points(t, e.cloud);
  return m.decode_tokens(t, pf, tokens, e.instances, true_len).ox.value();
}

ModelConfig test_config() {
  ModelConfig c = ModelConfig::preset("tiny");
  c.head_init_scale = 1.0;
  return c;
}

}  // namespace

TEST_CASE("model configuration") {
  const ModelConfig full = ModelConfig::preset("full");
  CHECK(full.blocks == 8);
  CHECK(full.heads == 8);
  CHECK(full.d_model == 128);
  CHECK(full.k_nn == 4);
  CHECK(full.ca_skip == 2);
  CHECK(full.dropout == doctest::Approx(0.1));
  CHECK(full.d_point0 == 16);
  ModelConfig bad = full;
  bad.heads = 7;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = full;
  bad.ca_skip = 8;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  CHECK_THROWS_AS(ModelConfig::preset("huge"), ValidationError);
  CHECK(ModelConfig::from_json(full.to_json()).hash() == full.hash());
  CHECK(ModelConfig::preset("tiny").hash() != full.hash());
}

TEST_CASE("full configuration has about 6.1M parameters") {
  const Model<float> m(ModelConfig::preset("full"), 1);
  const long count = m.parameter_count();
  CHECK(std::abs(count - 6.1e6) <= 0.1 * 6.1e6);
}

TEST_CASE("output shapes") {
  const Example e = make_example(256, 0);
  Model<double> m(test_config(), 2);
  std::vector<Token2D> padded = e.tokens;
  padded.resize(vocab::kMaxTokens, Token2D{});
  Tape<double> t(false);
  const auto pf = m.encode_points(t, e.cloud);
  CHECK(pf.n_points == 256);
  CHECK(pf.kv.size() == static_cast<size_t>(m.config().blocks - m.config().ca_skip));
  for (const auto& kv : pf.kv) {
    for (const auto& v : kv) {
      CHECK(v.rows() == 256);
      CHECK(v.cols() == m.config().d_model);
    }
  }
  const auto lg = m.decode_tokens(t, pf, padded, e.instances, static_cast<int>(e.tokens.size()));
  CHECK(lg.ox.rows() == 273);
  CHECK(lg.ox.cols() == 267);
  CHECK(lg.oy.rows() == 273);
  CHECK(lg.oy.cols() == 267);
  CHECK_THROWS_AS(m.encode_points(t, e.cloud.leftCols(3)), ShapeError);
  CHECK_THROWS_AS(m.encode_points(t, e.cloud.topRows(4)), ShapeError);
}

TEST_CASE("cross-attention layout follows ca_skip") {
  Model<float> full(ModelConfig::preset("full"), 1);
  std::vector<std::string> names;
  for (auto* p : full.parameters()) names.push_back(p->name);
  auto has_prefix = [&](const std::string& prefix) {
    return std::any_of(names.begin(), names.end(), [&](const std::string& n) { return n.rfind(prefix, 0) == 0; });
  };
  CHECK_FALSE(has_prefix("blocks.0.cross"));
  CHECK_FALSE(has_prefix("blocks.1.cross"));
  CHECK(has_prefix("blocks.2.cross"));
  CHECK(has_prefix("blocks.7.cross"));
}

TEST_CASE("decoder output depends on the point cloud") {
  const Example a = make_example(128, 0), b = make_example(128, 1);
  Model<double> m(test_config(), 3);
  jitter(m, 4, 0.05);
  Example swapped = a;
  swapped.cloud = b.cloud;
  const Mat<double> la = logits_a(m, a, a.tokens), lb = logits_a(m, swapped, a.tokens);
  CHECK((la - lb).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("coincident points with equal features aggregate identically") {
  Example e = make_example(64, 2);
  for (int r = 1; r < 4; ++r) e.cloud.row(r) = e.cloud.row(0);
  Model<double> m(test_config(), 5);
  jitter(m, 6, 0.05);
  Tape<double> t(false);
  const auto pf = m.encode_points(t, e.cloud);
  for (const auto& kv : pf.kv) {
    for (const auto& v : kv) {
      for (int r = 1; r < 4; ++r) CHECK((v.value().row(r) - v.value().row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("point features are permutation equivariant and logits invariant") {
  const Example e = make_example(200, 3);
  Model<double> m(test_config(), 7);
  jitter(m, 8, 0.05);
  std::vector<int> perm(e.cloud.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  Example p = e;
  std::vector<int> inverse(perm.size());
  for (size_t i = 0; i < perm.size(); ++i) {
    p.cloud.row(static_cast<long>(i)) = e.cloud.row(perm[i]);
    inverse[perm[i]] = static_cast<int>(i);
  }
  for (auto& inst : p.instances) {
    for (int& idx : *inst) idx = inverse[idx];
    std::sort(inst->begin(), inst->end());
  }
  Tape<double> t(false);
  const auto fe = m.encode_points(t, e.cloud);
  const auto fp = m.encode_points(t, p.cloud);
  for (size_t b = 0; b < fe.kv.size(); ++b) {
    for (int k = 0; k < 4; ++k) {
      for (size_t i = 0; i < perm.size(); ++i) {
        REQUIRE((fp.kv[b][k].value().row(static_cast<long>(i)) - fe.kv[b][k].value().row(perm[i])).cwiseAbs().maxCoeff() <
                1e-12);
      }
    }
  }
  CHECK((logits_both(m, e, e.tokens) - logits_both(m, p, p.tokens)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("causal masking: later tokens never affect earlier logits") {
  const Example e = make_example(128, 4);
  for (int blocks : {1, 2, 3}) {
    for (int heads : {1, 2, 4}) {
      ModelConfig c = test_config();
      c.blocks = blocks;
      c.heads = heads;
      c.ca_skip = blocks > 1 ? 1 : 0;
      Model<double> m(c, 10 + blocks * heads);
      jitter(m, 11, 0.05);
      const Mat<double> base = logits_both(m, e, e.tokens);
      for (size_t j : {size_t{5}, size_t{13}, e.tokens.size() - 2}) {
        auto changed = e.tokens;
        changed[j] = {changed[j].a == 200 ? 201 : 200, changed[j].b == 150 ? 151 : 150};
        const Mat<double> other = logits_both(m, e, changed);
        CHECK((other.topRows(static_cast<long>(j)) - base.topRows(static_cast<long>(j))).cwiseAbs().maxCoeff() < 1e-6);
        CHECK((other.row(static_cast<long>(j)) - base.row(static_cast<long>(j))).cwiseAbs().maxCoeff() > 1e-6);
      }
    }
  }
}

TEST_CASE("padded positions do not influence unpadded logits") {
  const Example e = make_example(128, 5);
  Model<double> m(test_config(), 12);
  jitter(m, 13, 0.05);
  const int n = static_cast<int>(e.tokens.size());
  std::vector<Token2D> a = e.tokens, b = e.tokens;
  a.resize(vocab::kMaxTokens, Token2D{});
  b.resize(vocab::kMaxTokens, Token2D{});
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> tok(0, vocab::kNumericMax);
  for (int i = n; i < vocab::kMaxTokens; ++i) b[i] = {tok(rng), tok(rng)};
  const Mat<double> la = logits_both(m, e, a, n), lb = logits_both(m, e, b, n), lc = logits_both(m, e, e.tokens);
  CHECK((la.topRows(n) - lb.topRows(n)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((la.topRows(n) - lc).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("positional encoding distinguishes repeated tokens") {
  const Example e = make_example(64, 6);
  Model<double> m(test_config(), 15);
  const std::vector<Token2D> same{{1, 0}, {5, 0}, {5, 0}, {5, 0}};
  const Mat<double> l = logits_a(m, e, same);
  CHECK((l.row(2) - l.row(3)).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("SGA mask construction") {
  const Example e = make_example(64, 7);
  SUBCASE("no sketch rows gives an all-zero mask") {
    const std::vector<Token2D> ext(e.tokens.begin(), e.tokens.begin() + 11);
    const auto rows = net::sketch_rows(ext);
    CHECK(std::none_of(rows.begin(), rows.end(), [](bool b) { return b; }));
    CHECK(net::build_sga_mask<double>(ext, rows, e.instances, 64).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("sketch rows are open exactly at their instance") {
    const auto rows = net::sketch_rows(e.tokens);
    const Mat<double> mask = net::build_sga_mask<double>(e.tokens, rows, e.instances, 64);
    const TokenAnnotation ann = annotate(e.tokens);
    for (size_t i = 0; i < e.tokens.size(); ++i) {
      const bool sketch_row = e.tokens[i].a == vocab::kEndExtrude || (ann.is_sketch[i] && e.tokens[i].a != vocab::kEndSketch);
      CHECK(rows[i] == sketch_row);
      if (!rows[i]) {
        CHECK(mask.row(static_cast<long>(i)).cwiseAbs().maxCoeff() == 0.0);
        continue;
      }
      const auto& inst = *e.instances[ann.steps[i] - 1];
      for (int p = 0; p < 64; ++p) {
        const bool in = std::binary_search(inst.begin(), inst.end(), p);
        if (inst.empty()) {
          CHECK(mask(static_cast<long>(i), p) == 0.0);
        } else {
          CHECK(mask(static_cast<long>(i), p) == (in ? 0.0 : num::kMaskValue));
        }
      }
    }
  }
  SUBCASE("an empty instance leaves its rows unmasked") {
    net::StepInstances empty(e.instances.size(), std::vector<int>{});
    const auto rows = net::sketch_rows(e.tokens);
    CHECK(net::build_sga_mask<double>(e.tokens, rows, empty, 64).cwiseAbs().maxCoeff() == 0.0);
    net::StepInstances missing;
    CHECK(net::build_sga_mask<double>(e.tokens, rows, missing, 64).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("sketch rows put no attention mass outside their instance") {
  int checked_rows = 0;
  for (int idx = 0; idx < 6; ++idx) {
    const Example e = make_example(256, idx, 31);
    Model<double> m(test_config(), 16);
    jitter(m, 17, 0.1);
    Tape<double> t(false);
    const auto pf = m.encode_points(t, e.cloud);
    net::AttentionTrace<double> trace;
    m.decode_tokens(t, pf, e.tokens, e.instances, -1, false, nullptr, &trace);
    REQUIRE_FALSE(trace.sga_probs.empty());
    const TokenAnnotation ann = annotate(e.tokens);
    for (const auto& probs : trace.sga_probs) {
      for (size_t i = 0; i < e.tokens.size(); ++i) {
        if (!trace.sga_rows[i]) continue;
        const auto& inst = *e.instances[ann.steps[i] - 1];
        if (inst.empty()) continue;
        double outside = 0.0;
        for (int p = 0; p < 256; ++p) {
          if (!std::binary_search(inst.begin(), inst.end(), p)) outside += probs(static_cast<long>(i), p);
        }
        CHECK(outside < 1e-9);
        ++checked_rows;
      }
    }
  }
  CHECK(checked_rows > 100);
}

TEST_CASE("incremental decoding matches the full forward pass") {
  const Example e = make_example(128, 8);
  Model<double> m(test_config(), 18);
  jitter(m, 19, 0.05);
  Tape<double> t(false);
  const auto pf = m.encode_points(t, e.cloud);
  const auto lg = m.decode_tokens(t, pf, e.tokens, e.instances);
  auto state = m.begin_decode(m.detach(pf));
  for (size_t i = 1; i <= e.tokens.size(); i += (i % 3) + 1) {
    const auto [a, b] = m.extend(state, std::vector<Token2D>(e.tokens.begin(), e.tokens.begin() + i), e.instances);
    CHECK((a - lg.ox.value().row(static_cast<long>(i) - 1)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((b - lg.oy.value().row(static_cast<long>(i) - 1)).cwiseAbs().maxCoeff() < 1e-9);
  }
  std::vector<Token2D> diverged(state.tokens);
  diverged.back() = {200, 0};
  CHECK_THROWS_AS(m.extend(state, diverged, e.instances), ValidationError);
}

TEST_CASE("full-model gradient check in double precision") {
  const ModelConfig cfg = ModelConfig::preset("gradcheck");
  CHECK(cfg.blocks == 2);
  CHECK(cfg.d_model == 16);
  CHECK(cfg.heads == 2);
  const auto r = testing::full_model_gradcheck();
  MESSAGE("checked " << r.checked << " elements, skipped " << r.kinks << " at kinks, max relative error " << r.worst);
  CHECK(r.checked > 3000);
  CHECK(r.kinks * 100 < r.checked);
  CHECK(r.worst < 1e-3);
}

TEST_CASE("weights round-trip and reject a different configuration") {
  const auto path = std::filesystem::temp_directory_path() / "cadsig_net_test.ckpt";
  Model<float> a(ModelConfig::preset("tiny"), 1);
  a.save(path);
  Model<float> b(ModelConfig::preset("tiny"), 2);
  b.load(path);
  auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  Model<float> c(ModelConfig::preset("desk"), 1);
  CHECK_THROWS_AS(c.load(path), ValidationError);
  std::filesystem::remove(path);
}
