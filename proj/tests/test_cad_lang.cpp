#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cadsig/cad_lang.hpp"
#include "cadsig/program_io.hpp"
#include "cadsig/synth.hpp"
#include "helpers.hpp"

using namespace cadsig;
using cadsig::testing::rect_loop;
using cadsig::testing::single_loop_sketch;

TEST_CASE("quantize_scalar maps the unit interval onto the numeric band") {
  CHECK(quantize_scalar(0.0) == 11);
  CHECK(quantize_scalar(1.0) == 266);
  CHECK(quantize_scalar(0.5) == 139);
  CHECK_THROWS_AS(quantize_scalar(-0.01), DomainError);
  CHECK_THROWS_AS(quantize_scalar(1.01), DomainError);
  CHECK_THROWS_AS(quantize_scalar(std::nan("")), DomainError);
}

TEST_CASE("dequantize_scalar inverts the level mapping") {
  CHECK(dequantize_scalar(11) == 0.0);
  CHECK(dequantize_scalar(266) == 1.0);
  CHECK(dequantize_scalar(139) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK_THROWS_AS(dequantize_scalar(10), DomainError);
  CHECK_THROWS_AS(dequantize_scalar(267), DomainError);
}

TEST_CASE("quantization error is at most half a level and monotone") {
  // Exhaustive over every level plus a dense sweep between levels.
  for (int q = 11; q <= 266; ++q) CHECK(quantize_scalar(dequantize_scalar(q)) == q);
  int prev = 11;
  for (int i = 0; i <= 100000; ++i) {
    const double p = i / 100000.0;
    const int q = quantize_scalar(p);
    REQUIRE(q >= prev);
    prev = q;
    REQUIRE(std::abs(dequantize_scalar(q) - p) <= 1.0 / 510.0 + 1e-15);
  }
}

TEST_CASE("angle quantization represents zero and right angles exactly") {
  const double pi = std::numbers::pi;
  CHECK(quantize_angle(0.0) == 139);
  for (double a : {0.0, pi / 2, -pi / 2, -pi}) CHECK(dequantize_angle(quantize_angle(a)) == doctest::Approx(a).epsilon(1e-15));
  CHECK(quantize_angle(pi) == quantize_angle(-pi));
  for (int q = 11; q <= 266; ++q) CHECK(quantize_angle(dequantize_angle(q)) == q);
}

TEST_CASE("every vocabulary index belongs to exactly one kind") {
  int counts[9] = {};
  for (int i = 0; i < vocab::kSize; ++i) ++counts[static_cast<int>(classify_token(i))];
  CHECK(counts[static_cast<int>(TokenKind::Pad)] == 1);
  CHECK(counts[static_cast<int>(TokenKind::ClsOrEnd)] == 1);
  CHECK(counts[static_cast<int>(TokenKind::Boolean)] == 4);
  CHECK(counts[static_cast<int>(TokenKind::Numeric)] == 256);
  int total = 0;
  for (int c : counts) total += c;
  CHECK(total == vocab::kSize);
  CHECK_THROWS_AS(classify_token(267), DomainError);
  CHECK_THROWS_AS(classify_token(-1), DomainError);
}

namespace {

CadProgram square_program() {
  DesignStep st;
  st.extrusion.d_plus = dequantize_scalar(quantize_scalar(0.4));
  st.sketch = single_loop_sketch(rect_loop(0, 0, 1, 1));
  return CadProgram{{st}};
}

}  // namespace

TEST_CASE("a one-square program serializes to 28 tokens") {
  const TokenStream s = program_to_stream(square_program());
  CHECK(s.true_len == 1 + 11 + (4 * (2 + 1) + 3) + 1);
  CHECK(s.tokens.size() == static_cast<size_t>(vocab::kMaxTokens));
  CHECK(s.tokens[0] == Token2D{vocab::kCls, 0});
  CHECK(s.tokens[s.true_len - 1] == Token2D{vocab::kEnd, 0});
  for (int i = s.true_len; i < vocab::kMaxTokens; ++i) {
    CHECK(s.tokens[i] == Token2D{0, 0});
    CHECK(s.flags[i] == vocab::kPadFlag);
    CHECK(s.steps[i] == 0);
  }
  // Extrusion block order: d+, d-, tau xyz, angles, sigma, boolean, e_e.
  CHECK(s.tokens[1].a == quantize_scalar(0.4));
  CHECK(s.tokens[10].a == vocab::kBooleanBase);
  CHECK(s.tokens[11] == Token2D{vocab::kEndExtrude, 0});
  // First line: start (0,0), end (1,0), then e_c.
  CHECK(s.tokens[12] == Token2D{11, 11});
  CHECK(s.tokens[13] == Token2D{266, 11});
  CHECK(s.tokens[14] == Token2D{vocab::kEndCurve, 0});
  CHECK(s.tokens[24] == Token2D{vocab::kEndLoop, 0});
  CHECK(s.tokens[25] == Token2D{vocab::kEndFace, 0});
  CHECK(s.tokens[26] == Token2D{vocab::kEndSketch, 0});
}

TEST_CASE("token flags and step indices follow the token kinds") {
  CadProgram p = square_program();
  p.steps.push_back(p.steps[0]);
  p.steps[1].extrusion.op = BooleanOp::Join;
  const TokenStream s = program_to_stream(p);
  const int expected_ext[11] = {1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(s.flags[0] == 0);
  CHECK(s.steps[0] == 0);
  for (int step = 0; step < 2; ++step) {
    const int base = 1 + step * 26;
    for (int j = 0; j < 11; ++j) {
      CHECK(s.flags[base + j] == expected_ext[j]);
      CHECK(s.steps[base + j] == step + 1);
    }
    for (int j = 11; j < 26; ++j) {
      CHECK(s.flags[base + j] == 0);
      CHECK(s.steps[base + j] == step + 1);
    }
  }
  CHECK(s.flags[s.true_len - 1] == 0);
  CHECK(s.steps[s.true_len - 1] == 0);
  // Coordinate tokens carry both components in the numeric band; the rest carry pad.
  for (int i = 0; i < s.true_len; ++i) {
    const Token2D t = s.tokens[i];
    if (t.b != 0) {
      CHECK(is_numeric(t.a));
      CHECK(is_numeric(t.b));
    }
  }
}

TEST_CASE("programs outside the language capacity are rejected") {
  CHECK_THROWS_AS(program_to_stream(CadProgram{}), ValidationError);
  CadProgram many = square_program();
  for (int i = 0; i < 10; ++i) many.steps.push_back(many.steps[0]);
  CHECK_THROWS_AS(program_to_stream(many), CapacityError);
  // Three steps of a 40-gon need 3 * 134 + 2 tokens.
  DesignStep big = square_program().steps[0];
  Loop poly;
  for (int i = 0; i < 40; ++i) {
    const double a0 = 2 * std::numbers::pi * i / 40, a1 = 2 * std::numbers::pi * (i + 1) / 40;
    poly.curves.push_back(Line{{0.5 + 0.5 * std::cos(a0), 0.5 + 0.5 * std::sin(a0)},
                               {0.5 + 0.5 * std::cos(a1), 0.5 + 0.5 * std::sin(a1)}});
  }
  big.sketch = single_loop_sketch(poly);
  CHECK_THROWS_AS(program_to_stream(quantized(CadProgram{{big, big, big}})), CapacityError);
}

TEST_CASE("1000 generated programs round-trip through the token stream") {
  GeneratorConfig cfg;
  cfg.seed = 2024;
  cfg.max_steps = 4;
  for (int i = 0; i < 1000; ++i) {
    const CadProgram p = generate_program(cfg, i);
    const TokenStream s = program_to_stream(p);
    REQUIRE(s.true_len <= vocab::kMaxTokens);
    REQUIRE(s.tokens[0] == Token2D{vocab::kCls, 0});
    REQUIRE(s.tokens[s.true_len - 1] == Token2D{vocab::kEnd, 0});
    REQUIRE(stream_to_program(s) == p);
    REQUIRE(TokenStream::from_tokens(s.unpadded()) == s);
    REQUIRE(quantized(p) == p);
  }
}

TEST_CASE("the parser reports the first offending token") {
  const auto full = program_to_stream(square_program()).unpadded();
  SUBCASE("truncated extrusion block") {
    std::vector<Token2D> t(full.begin(), full.begin() + 6);
    try {
      tokens_to_program(t);
      FAIL("expected a syntax error");
    } catch (const SyntaxError& e) {
      CHECK(e.position() == 6);
      CHECK(e.found() == "end of stream");
    }
  }
  SUBCASE("structural token where a numeric one is expected") {
    auto t = full;
    t[3] = {vocab::kEndCurve, 0};
    try {
      tokens_to_program(t);
      FAIL("expected a syntax error");
    } catch (const SyntaxError& e) {
      CHECK(e.position() == 3);
    }
  }
  SUBCASE("curve with a single point") {
    auto t = full;
    t.erase(t.begin() + 13);
    CHECK_THROWS_AS(tokens_to_program(t), SyntaxError);
  }
  SUBCASE("missing cls") {
    std::vector<Token2D> t(full.begin() + 1, full.end());
    CHECK_THROWS_AS(tokens_to_program(t), SyntaxError);
  }
  SUBCASE("missing end") {
    std::vector<Token2D> t(full.begin(), full.end() - 1);
    CHECK_THROWS_AS(tokens_to_program(t), SyntaxError);
  }
  SUBCASE("a zero-length line still parses") {
    auto t = full;
    t[13] = t[12];
    const CadProgram p = tokens_to_program(t);
    const auto& line = std::get<Line>(p.steps[0].sketch.faces[0].loops[0].curves[0]);
    CHECK(line.start == line.end);
  }
}

TEST_CASE("encode_matrices builds the two-block one-hot rows") {
  const TokenStream s = program_to_stream(square_program());
  const EncodedMatrices m = encode_matrices(s);
  CHECK(m.rows == 273);
  CHECK(m.cols == 2 * 267);
  CHECK(m.at(0, 1) == 1);
  CHECK(m.at(0, 267 + 0) == 1);
  int pads = 0;
  for (int r = 0; r < m.rows; ++r) {
    int sum = 0;
    for (int c = 0; c < m.cols; ++c) sum += m.at(r, c);
    CHECK(sum == 2);
    CHECK(m.at(r, s.tokens[r].a) == 1);
    CHECK(m.at(r, 267 + s.tokens[r].b) == 1);
    pads += m.pad_mask[r];
    CHECK(m.pad_mask[r] == (r >= s.true_len));
  }
  CHECK(pads == 273 - s.true_len);
  CHECK(m.flags == s.flags);
  CHECK(m.steps == s.steps);
}

TEST_CASE("reorder_and_orient") {
  SUBCASE("clockwise loop is reversed") {
    Loop cw = reversed(rect_loop(0, 0, 0.5, 0.5));
    CHECK(loop_signed_area(cw) == doctest::Approx(-0.25));
    const Sketch out = reorder_and_orient(single_loop_sketch(cw));
    CHECK(loop_signed_area(out.faces[0].loops[0]) == doctest::Approx(0.25));
  }
  SUBCASE("faces sorted by bottom-left corner, x first") {
    Sketch s;
    s.faces.push_back(Face{{rect_loop(0.2, 0.1, 0.3, 0.2)}});
    s.faces.push_back(Face{{rect_loop(0.1, 0.3, 0.15, 0.4)}});
    const Sketch out = reorder_and_orient(s);
    CHECK(face_bbox(out.faces[0]).first == Vec2{0.1, 0.3});
    CHECK(face_bbox(out.faces[1]).first == Vec2{0.2, 0.1});
  }
  SUBCASE("sorted counter-clockwise sketch is unchanged and the operation is idempotent") {
    Sketch s;
    s.faces.push_back(Face{{rect_loop(0.0, 0.0, 0.4, 0.4), reversed(rect_loop(0.1, 0.1, 0.2, 0.2))}});
    s.faces.push_back(Face{{rect_loop(0.5, 0.0, 0.9, 0.3)}});
    const Sketch once = reorder_and_orient(s);
    CHECK(reorder_and_orient(once) == once);
    const Sketch ccw = reorder_and_orient(single_loop_sketch(rect_loop(0, 0, 1, 1)));
    CHECK(ccw == single_loop_sketch(rect_loop(0, 0, 1, 1)));
  }
  SUBCASE("loop rotation starts at the bottom-left curve") {
    Loop l = rect_loop(0, 0, 1, 1);
    std::rotate(l.curves.begin(), l.curves.begin() + 2, l.curves.end());
    const Sketch out = reorder_and_orient(single_loop_sketch(l));
    CHECK(curve_start(out.faces[0].loops[0].curves[0]) == Vec2{0, 0});
  }
  SUBCASE("zero-area loop is rejected") {
    Loop flat;
    flat.curves = {Line{{0, 0}, {1, 0}}, Line{{1, 0}, {0, 0}}};
    CHECK_THROWS_AS(reorder_and_orient(single_loop_sketch(flat)), ValidationError);
  }
  SUBCASE("generated sketches are fixed points") {
    GeneratorConfig cfg;
    cfg.seed = 5;
    for (int i = 0; i < 100; ++i) {
      const CadProgram p = generate_program(cfg, i);
      for (const auto& st : p.steps) CHECK(reorder_and_orient(st.sketch) == st.sketch);
    }
  }
}

TEST_CASE("arc bounding boxes include the extreme point") {
  const Arc a{{1, 0.5}, {0.5, 1}, {0, 0.5}};  // upper half circle about (0.5, 0.5)
  const auto [lo, hi] = curve_bbox(a);
  CHECK(lo.y == doctest::Approx(0.5));
  CHECK(hi.y == doctest::Approx(1.0));
  CHECK(lo.x == doctest::Approx(0.0));
  CHECK(hi.x == doctest::Approx(1.0));
}

TEST_CASE("program JSON and binary token files round-trip") {
  GeneratorConfig cfg;
  cfg.seed = 9;
  for (int i = 0; i < 50; ++i) {
    const CadProgram p = generate_program(cfg, i);
    CHECK(program_from_json(nlohmann::json::parse(program_to_json(p).dump())) == p);
    const auto toks = program_to_stream(p).unpadded();
    CHECK(decode_token_binary(encode_token_binary(toks)) == toks);
    CHECK(tokens_from_json(tokens_to_json(toks)) == toks);
  }
  std::string bytes = encode_token_binary({{1, 0}});
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_token_binary(bytes), IoError);
  bytes = encode_token_binary({{1, 0}});
  bytes[4] = 7;
  CHECK_THROWS_AS(decode_token_binary(bytes), IoError);
}

TEST_CASE("lenient split counts extrusion blocks of broken streams") {
  auto t = program_to_stream(square_program()).unpadded();
  LenientSplit ok = split_lenient(t);
  CHECK(ok.extrusion_count == 1);
  REQUIRE(ok.sketches.size() == 1);
  CHECK(ok.sketches[0].has_value());
  t[13] = {vocab::kEndLoop, 0};
  LenientSplit broken = split_lenient(t);
  CHECK(broken.extrusion_count == 1);
}
