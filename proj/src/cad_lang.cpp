#include "cadsig/cad_lang.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "cadsig/arc.hpp"

namespace cadsig {

namespace {

constexpr std::array<int, vocab::kExtrusionTokens> kExtrusionFlags = {1, 1, 2, 3, 4, 5,
                                                                      6, 7, 8, 9, 10};

std::string describe(const Token2D& t) {
  std::string kind;
  switch (classify_token(t.a)) {
    case TokenKind::Pad: kind = "pad"; break;
    case TokenKind::ClsOrEnd: kind = "end"; break;
    case TokenKind::EndSketch: kind = "e_s"; break;
    case TokenKind::EndFace: kind = "e_f"; break;
    case TokenKind::EndLoop: kind = "e_l"; break;
    case TokenKind::EndCurve: kind = "e_c"; break;
    case TokenKind::EndExtrude: kind = "e_e"; break;
    case TokenKind::Boolean: kind = "boolean"; break;
    case TokenKind::Numeric: kind = "numeric"; break;
  }
  return kind + "(" + std::to_string(t.a) + "," + std::to_string(t.b) + ")";
}

class Parser {
 public:
  Parser(const std::vector<Token2D>& tokens, int begin, int end)
      : tokens_(tokens), pos_(begin), end_(end) {}

  int pos() const { return pos_; }

  CadProgram program() {
    CadProgram prog;
    expect_a(vocab::kCls, "cls");
    while (true) {
      if (at_end()) fail("extrusion value or end");
      if (peek().a == vocab::kEnd) {
        if (prog.steps.empty()) fail("extrusion value");
        ++pos_;
        break;
      }
      if (static_cast<int>(prog.steps.size()) == vocab::kMaxSteps) fail("end");
      DesignStep step;
      step.extrusion = extrusion();
      step.sketch = sketch();
      prog.steps.push_back(std::move(step));
    }
    if (pos_ != end_) fail("end of stream");
    return prog;
  }

  ExtrusionOp extrusion() {
    std::array<int, 9> q{};
    for (int i = 0; i < 9; ++i) q[i] = numeric("extrusion value");
    if (at_end()) fail("boolean");
    const int bool_tok = peek().a;
    if (bool_tok < vocab::kBooleanBase || bool_tok > vocab::kBooleanBase + 3) fail("boolean");
    ++pos_;
    expect_a(vocab::kEndExtrude, "e_e");
    ExtrusionOp e;
    e.d_plus = dequantize_scalar(q[0]);
    e.d_minus = dequantize_scalar(q[1]);
    e.tau = {dequantize_scalar(q[2]), dequantize_scalar(q[3]), dequantize_scalar(q[4])};
    e.euler = {dequantize_angle(q[5]), dequantize_angle(q[6]), dequantize_angle(q[7])};
    e.sigma = dequantize_scalar(q[8]);
    e.op = static_cast<BooleanOp>(bool_tok - vocab::kBooleanBase);
    return e;
  }

  Sketch sketch() {
    Sketch s;
    while (true) {
      if (!at_end() && peek().a == vocab::kEndSketch && !s.faces.empty()) {
        ++pos_;
        return s;
      }
      s.faces.push_back(face());
    }
  }

 private:
  Face face() {
    Face f;
    while (true) {
      if (!at_end() && peek().a == vocab::kEndFace && !f.loops.empty()) {
        ++pos_;
        return f;
      }
      f.loops.push_back(loop());
    }
  }

  Loop loop() {
    std::vector<std::vector<Vec2>> point_lists;
    while (true) {
      if (!at_end() && peek().a == vocab::kEndLoop && !point_lists.empty()) {
        ++pos_;
        break;
      }
      point_lists.push_back(curve_points());
    }
    Loop l;
    if (point_lists.size() == 1 && point_lists[0].size() == 2) {
      l.curves.push_back(Circle{point_lists[0][0], point_lists[0][1]});
      return l;
    }
    for (const auto& pts : point_lists) {
      if (pts.size() == 2) {
        l.curves.push_back(Line{pts[0], pts[1]});
      } else {
        l.curves.push_back(Arc{pts[0], pts[1], pts[2]});
      }
    }
    return l;
  }

  std::vector<Vec2> curve_points() {
    std::vector<Vec2> pts;
    while (!at_end() && is_numeric(peek().a)) {
      const Token2D t = peek();
      if (!is_numeric(t.b)) fail("coordinate pair");
      pts.push_back({dequantize_scalar(t.a), dequantize_scalar(t.b)});
      ++pos_;
    }
    if (pts.empty()) fail("coordinate pair");
    if (at_end() || peek().a != vocab::kEndCurve) fail("coordinate pair or e_c");
    if (pts.size() != 2 && pts.size() != 3) {
      throw SyntaxError(pos_, "2 or 3 curve points", std::to_string(pts.size()) + " points");
    }
    ++pos_;
    return pts;
  }

  bool at_end() const { return pos_ >= end_; }
  const Token2D& peek() const { return tokens_[pos_]; }

  [[noreturn]] void fail(const std::string& expected) const {
    throw SyntaxError(pos_, expected, at_end() ? "end of stream" : describe(peek()));
  }

  void expect_a(int a, const std::string& expected) {
    if (at_end() || peek().a != a) fail(expected);
    ++pos_;
  }

  int numeric(const std::string& expected) {
    if (at_end() || !is_numeric(peek().a)) fail(expected);
    return tokens_[pos_++].a;
  }

  const std::vector<Token2D>& tokens_;
  int pos_;
  int end_;
};

// Incremental state machine shared by annotate() and completed_extrusions().
struct Scanner {
  enum class State { Start, Extrusion, Sketch, Boundary, Done };
  State state = State::Start;
  int step = 0;
  int slot = 0;

  struct Label {
    int flag;
    int step;
    bool sketch;
  };

  Label feed(const Token2D& t) {
    switch (state) {
      case State::Start:
        state = State::Boundary;
        return {0, 0, false};
      case State::Done:
        return {vocab::kPadFlag, 0, false};
      case State::Boundary:
        if (t.a == vocab::kEnd) {
          state = State::Done;
          return {0, 0, false};
        }
        step = std::min(step + 1, vocab::kMaxSteps);
        state = State::Extrusion;
        slot = 0;
        [[fallthrough]];
      case State::Extrusion: {
        if (t.a == vocab::kEnd && slot > 0) {
          state = State::Done;
          return {0, 0, false};
        }
        const int flag = kExtrusionFlags[slot];
        if (++slot == vocab::kExtrusionTokens) state = State::Sketch;
        return {flag, step, false};
      }
      case State::Sketch:
        if (t.a == vocab::kEnd) {
          state = State::Done;
          return {0, 0, false};
        }
        if (t.a == vocab::kEndSketch) state = State::Boundary;
        return {0, step, true};
    }
    return {vocab::kPadFlag, 0, false};
  }
};

std::optional<ExtrusionOp> parse_extrusion_block(const std::vector<Token2D>& tokens, int begin) {
  try {
    Parser p(tokens, begin, begin + vocab::kExtrusionTokens);
    return p.extrusion();
  } catch (const SyntaxError&) {
    return std::nullopt;
  }
}

double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }

auto bl_key(const std::pair<Vec2, Vec2>& box) { return std::make_tuple(box.first.x, box.first.y); }

}  // namespace

TokenKind classify_token(int index) {
  if (index < 0 || index > vocab::kNumericMax) {
    throw DomainError("token index out of range: " + std::to_string(index));
  }
  switch (index) {
    case vocab::kPad: return TokenKind::Pad;
    case vocab::kCls: return TokenKind::ClsOrEnd;
    case vocab::kEndSketch: return TokenKind::EndSketch;
    case vocab::kEndFace: return TokenKind::EndFace;
    case vocab::kEndLoop: return TokenKind::EndLoop;
    case vocab::kEndCurve: return TokenKind::EndCurve;
    case vocab::kEndExtrude: return TokenKind::EndExtrude;
    default: break;
  }
  return index < vocab::kNumericMin ? TokenKind::Boolean : TokenKind::Numeric;
}

TokenStream::TokenStream()
    : tokens(vocab::kMaxTokens), flags(vocab::kMaxTokens, vocab::kPadFlag),
      steps(vocab::kMaxTokens, 0) {}

TokenStream TokenStream::from_tokens(const std::vector<Token2D>& toks) {
  if (toks.size() > static_cast<size_t>(vocab::kMaxTokens)) {
    throw CapacityError("token stream longer than " + std::to_string(vocab::kMaxTokens));
  }
  TokenStream s;
  const TokenAnnotation ann = annotate(toks);
  for (size_t i = 0; i < toks.size(); ++i) {
    s.tokens[i] = toks[i];
    s.flags[i] = ann.flags[i];
    s.steps[i] = ann.steps[i];
  }
  s.true_len = static_cast<int>(toks.size());
  return s;
}

CurveType curve_type(const Curve& c) { return static_cast<CurveType>(c.index()); }

const char* curve_type_name(CurveType t) {
  switch (t) {
    case CurveType::Line: return "line";
    case CurveType::Arc: return "arc";
    case CurveType::Circle: return "circle";
  }
  return "?";
}

const char* boolean_op_name(BooleanOp op) {
  switch (op) {
    case BooleanOp::New: return "new";
    case BooleanOp::Cut: return "cut";
    case BooleanOp::Join: return "join";
    case BooleanOp::Intersect: return "intersect";
  }
  return "?";
}

BooleanOp boolean_op_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    const auto op = static_cast<BooleanOp>(i);
    if (name == boolean_op_name(op)) return op;
  }
  throw ValidationError("unknown boolean op '" + name + "'");
}

int quantize_scalar(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("quantize_scalar: value " + std::to_string(p) + " outside [0,1]");
  }
  return vocab::kNumericMin + static_cast<int>(std::floor(p * 255.0 + 0.5));
}

double dequantize_scalar(int q) {
  if (!is_numeric(q)) {
    throw DomainError("dequantize_scalar: level " + std::to_string(q) + " outside [11,266]");
  }
  return static_cast<double>(q - vocab::kNumericMin) / 255.0;
}

int quantize_angle(double radians) {
  if (!std::isfinite(radians)) throw DomainError("quantize_angle: non-finite angle");
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  const double u = (radians + std::numbers::pi) / kTwoPi;
  const double wrapped = u - std::floor(u);
  int level = static_cast<int>(std::floor(wrapped * vocab::kNumericLevels + 0.5));
  level %= vocab::kNumericLevels;
  return vocab::kNumericMin + level;
}

double dequantize_angle(int q) {
  if (!is_numeric(q)) {
    throw DomainError("dequantize_angle: level " + std::to_string(q) + " outside [11,266]");
  }
  return -std::numbers::pi +
         2.0 * std::numbers::pi * (q - vocab::kNumericMin) / vocab::kNumericLevels;
}

CadProgram quantized(const CadProgram& prog) {
  auto s = [](double v) { return dequantize_scalar(quantize_scalar(v)); };
  auto p = [&](const Vec2& v) { return Vec2{s(v.x), s(v.y)}; };
  CadProgram out = prog;
  for (auto& step : out.steps) {
    auto& e = step.extrusion;
    e.d_plus = s(e.d_plus);
    e.d_minus = s(e.d_minus);
    for (auto& t : e.tau) t = s(t);
    for (auto& a : e.euler) a = dequantize_angle(quantize_angle(a));
    e.sigma = s(e.sigma);
    for (auto& face : step.sketch.faces) {
      for (auto& loop : face.loops) {
        for (auto& curve : loop.curves) {
          std::visit(
              [&](auto& c) {
                using C = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<C, Line>) {
                  c = Line{p(c.start), p(c.end)};
                } else if constexpr (std::is_same_v<C, Arc>) {
                  c = Arc{p(c.start), p(c.mid), p(c.end)};
                } else {
                  c = Circle{p(c.center), p(c.top)};
                }
              },
              curve);
        }
      }
    }
  }
  return out;
}

TokenStream program_to_stream(const CadProgram& prog) {
  if (prog.steps.empty()) throw ValidationError("program has no design steps");
  if (prog.steps.size() > static_cast<size_t>(vocab::kMaxSteps)) {
    throw CapacityError("program has " + std::to_string(prog.steps.size()) +
                        " steps; at most 10 are representable");
  }
  std::vector<Token2D> toks;
  std::vector<int> flags;
  std::vector<int> steps;
  auto emit = [&](Token2D t, int flag, int step) {
    toks.push_back(t);
    flags.push_back(flag);
    steps.push_back(step);
  };
  auto point = [&](const Vec2& v, int step) {
    emit({quantize_scalar(v.x), quantize_scalar(v.y)}, 0, step);
  };

  emit({vocab::kCls, vocab::kPad}, 0, 0);
  for (size_t si = 0; si < prog.steps.size(); ++si) {
    const int step = static_cast<int>(si) + 1;
    const ExtrusionOp& e = prog.steps[si].extrusion;
    const std::array<int, vocab::kExtrusionTokens> ext = {
        quantize_scalar(e.d_plus),
        quantize_scalar(e.d_minus),
        quantize_scalar(e.tau[0]),
        quantize_scalar(e.tau[1]),
        quantize_scalar(e.tau[2]),
        quantize_angle(e.euler[0]),
        quantize_angle(e.euler[1]),
        quantize_angle(e.euler[2]),
        quantize_scalar(e.sigma),
        vocab::kBooleanBase + static_cast<int>(e.op),
        vocab::kEndExtrude};
    for (int i = 0; i < vocab::kExtrusionTokens; ++i) {
      emit({ext[i], vocab::kPad}, kExtrusionFlags[i], step);
    }
    const Sketch& sk = prog.steps[si].sketch;
    if (sk.faces.empty()) throw ValidationError("sketch without faces in step " + std::to_string(step));
    for (const Face& face : sk.faces) {
      if (face.loops.empty()) throw ValidationError("face without loops in step " + std::to_string(step));
      for (const Loop& loop : face.loops) {
        if (loop.curves.empty()) {
          throw ValidationError("loop without curves in step " + std::to_string(step));
        }
        for (const Curve& c : loop.curves) {
          std::visit(
              [&](const auto& cv) {
                using C = std::decay_t<decltype(cv)>;
                if constexpr (std::is_same_v<C, Line>) {
                  point(cv.start, step);
                  point(cv.end, step);
                } else if constexpr (std::is_same_v<C, Arc>) {
                  point(cv.start, step);
                  point(cv.mid, step);
                  point(cv.end, step);
                } else {
                  point(cv.center, step);
                  point(cv.top, step);
                }
              },
              c);
          emit({vocab::kEndCurve, vocab::kPad}, 0, step);
        }
        emit({vocab::kEndLoop, vocab::kPad}, 0, step);
      }
      emit({vocab::kEndFace, vocab::kPad}, 0, step);
    }
    emit({vocab::kEndSketch, vocab::kPad}, 0, step);
  }
  emit({vocab::kEnd, vocab::kPad}, 0, 0);

  if (toks.size() > static_cast<size_t>(vocab::kMaxTokens)) {
    throw CapacityError("program needs " + std::to_string(toks.size()) + " tokens; capacity is " +
                        std::to_string(vocab::kMaxTokens));
  }
  TokenStream s;
  for (size_t i = 0; i < toks.size(); ++i) {
    s.tokens[i] = toks[i];
    s.flags[i] = flags[i];
    s.steps[i] = steps[i];
  }
  s.true_len = static_cast<int>(toks.size());
  return s;
}

CadProgram tokens_to_program(const std::vector<Token2D>& tokens) {
  Parser p(tokens, 0, static_cast<int>(tokens.size()));
  return p.program();
}

CadProgram stream_to_program(const TokenStream& stream) {
  const int n = std::clamp(stream.true_len, 0, static_cast<int>(stream.tokens.size()));
  Parser p(stream.tokens, 0, n);
  return p.program();
}

TokenAnnotation annotate(const std::vector<Token2D>& tokens) {
  TokenAnnotation ann;
  ann.flags.reserve(tokens.size());
  ann.steps.reserve(tokens.size());
  ann.is_sketch.reserve(tokens.size());
  Scanner sc;
  for (const Token2D& t : tokens) {
    const auto label = sc.feed(t);
    ann.flags.push_back(label.flag);
    ann.steps.push_back(label.step);
    ann.is_sketch.push_back(label.sketch);
  }
  return ann;
}

std::vector<std::optional<ExtrusionOp>> completed_extrusions(const std::vector<Token2D>& tokens) {
  std::vector<std::optional<ExtrusionOp>> out;
  Scanner sc;
  int block_start = -1;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const auto before = sc.state;
    sc.feed(tokens[i]);
    if (sc.state == Scanner::State::Extrusion && before != Scanner::State::Extrusion) {
      block_start = static_cast<int>(i);
    }
    if (before != Scanner::State::Sketch && sc.state == Scanner::State::Sketch) {
      out.resize(static_cast<size_t>(sc.step));
      out[sc.step - 1] = parse_extrusion_block(tokens, block_start);
    }
  }
  return out;
}

LenientSplit split_lenient(const std::vector<Token2D>& tokens) {
  LenientSplit out;
  const TokenAnnotation ann = annotate(tokens);
  std::vector<std::vector<Token2D>> segments;
  int last_step = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && ann.flags[i] == 0 && ann.steps[i] == 0) break;  // end
    if (ann.flags[i] == 10 && tokens[i].a == vocab::kEndExtrude) ++out.extrusion_count;
    if (ann.steps[i] > 0 && ann.steps[i] != last_step) {
      last_step = ann.steps[i];
      segments.emplace_back();
    }
    if (ann.is_sketch[i]) segments.back().push_back(tokens[i]);
  }
  for (const auto& seg : segments) {
    if (seg.empty()) {
      out.sketches.emplace_back(std::nullopt);
      continue;
    }
    try {
      Parser p(seg, 0, static_cast<int>(seg.size()));
      Sketch s = p.sketch();
      if (p.pos() != static_cast<int>(seg.size())) {
        out.sketches.emplace_back(std::nullopt);
      } else {
        out.sketches.emplace_back(std::move(s));
      }
    } catch (const SyntaxError&) {
      out.sketches.emplace_back(std::nullopt);
    }
  }
  return out;
}

EncodedMatrices encode_matrices(const TokenStream& stream) {
  EncodedMatrices m;
  m.one_hot.assign(static_cast<size_t>(m.rows) * m.cols, 0);
  m.flags = stream.flags;
  m.steps = stream.steps;
  m.pad_mask.assign(m.rows, false);
  for (int i = 0; i < m.rows; ++i) {
    const Token2D& t = stream.tokens[i];
    m.one_hot[static_cast<size_t>(i) * m.cols + t.a] = 1;
    m.one_hot[static_cast<size_t>(i) * m.cols + vocab::kSize + t.b] = 1;
    m.pad_mask[i] = i >= stream.true_len;
  }
  return m;
}

Vec2 curve_start(const Curve& c) {
  return std::visit(
      [](const auto& cv) -> Vec2 {
        using C = std::decay_t<decltype(cv)>;
        if constexpr (std::is_same_v<C, Circle>) {
          return cv.top;
        } else {
          return cv.start;
        }
      },
      c);
}

Vec2 curve_end(const Curve& c) {
  return std::visit(
      [](const auto& cv) -> Vec2 {
        using C = std::decay_t<decltype(cv)>;
        if constexpr (std::is_same_v<C, Circle>) {
          return cv.top;
        } else {
          return cv.end;
        }
      },
      c);
}

double loop_signed_area(const Loop& loop) {
  double twice = 0.0;
  for (const Curve& c : loop.curves) {
    if (const auto* circle = std::get_if<Circle>(&c)) {
      const double r = std::hypot(circle->top.x - circle->center.x, circle->top.y - circle->center.y);
      return std::numbers::pi * r * r;
    }
    const Vec2 s = curve_start(c);
    const Vec2 e = curve_end(c);
    twice += cross(s, e);
    if (const auto* arc = std::get_if<Arc>(&c)) {
      const ArcGeometry g = arc_geometry(*arc);
      if (!g.degenerate) {
        const double sweep = std::abs(g.sweep);
        const double segment = 0.5 * g.radius * g.radius * (sweep - std::sin(sweep));
        twice += 2.0 * (g.sweep > 0 ? segment : -segment);
      }
    }
  }
  return 0.5 * twice;
}

std::pair<Vec2, Vec2> curve_bbox(const Curve& c) {
  Vec2 lo{1e300, 1e300};
  Vec2 hi{-1e300, -1e300};
  auto add = [&](const Vec2& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  };
  std::visit(
      [&](const auto& cv) {
        using C = std::decay_t<decltype(cv)>;
        if constexpr (std::is_same_v<C, Line>) {
          add(cv.start);
          add(cv.end);
        } else if constexpr (std::is_same_v<C, Circle>) {
          const double r = std::hypot(cv.top.x - cv.center.x, cv.top.y - cv.center.y);
          add({cv.center.x - r, cv.center.y - r});
          add({cv.center.x + r, cv.center.y + r});
        } else {
          add(cv.start);
          add(cv.mid);
          add(cv.end);
          const ArcGeometry g = arc_geometry(cv);
          if (!g.degenerate) {
            for (int k = 0; k < 4; ++k) {
              const double ang = k * std::numbers::pi / 2.0;
              if (arc_contains_angle(g, ang)) {
                add({g.center.x + g.radius * std::cos(ang), g.center.y + g.radius * std::sin(ang)});
              }
            }
          }
        }
      },
      c);
  return {lo, hi};
}

std::pair<Vec2, Vec2> loop_bbox(const Loop& loop) {
  Vec2 lo{1e300, 1e300};
  Vec2 hi{-1e300, -1e300};
  for (const Curve& c : loop.curves) {
    const auto [a, b] = curve_bbox(c);
    lo = {std::min(lo.x, a.x), std::min(lo.y, a.y)};
    hi = {std::max(hi.x, b.x), std::max(hi.y, b.y)};
  }
  return {lo, hi};
}

std::pair<Vec2, Vec2> face_bbox(const Face& face) {
  Vec2 lo{1e300, 1e300};
  Vec2 hi{-1e300, -1e300};
  for (const Loop& l : face.loops) {
    const auto [a, b] = loop_bbox(l);
    lo = {std::min(lo.x, a.x), std::min(lo.y, a.y)};
    hi = {std::max(hi.x, b.x), std::max(hi.y, b.y)};
  }
  return {lo, hi};
}

Loop reversed(const Loop& loop) {
  Loop out;
  for (auto it = loop.curves.rbegin(); it != loop.curves.rend(); ++it) {
    std::visit(
        [&](const auto& cv) {
          using C = std::decay_t<decltype(cv)>;
          if constexpr (std::is_same_v<C, Line>) {
            out.curves.push_back(Line{cv.end, cv.start});
          } else if constexpr (std::is_same_v<C, Arc>) {
            out.curves.push_back(Arc{cv.end, cv.mid, cv.start});
          } else {
            out.curves.push_back(cv);
          }
        },
        *it);
  }
  return out;
}

Sketch reorder_and_orient(const Sketch& sketch) {
  Sketch out = sketch;
  for (Face& face : out.faces) {
    for (Loop& loop : face.loops) {
      const double area = loop_signed_area(loop);
      if (!(std::abs(area) > 1e-12)) throw ValidationError("degenerate loop: zero area");
      if (area < 0) loop = reversed(loop);
      // Start the loop at its bottom-left-most curve; ties resolved by start point.
      auto key = [](const Curve& c) {
        const auto box = curve_bbox(c);
        const Vec2 s = curve_start(c);
        return std::make_tuple(box.first.x, box.first.y, s.x, s.y);
      };
      size_t best = 0;
      for (size_t i = 1; i < loop.curves.size(); ++i) {
        if (key(loop.curves[i]) < key(loop.curves[best])) best = i;
      }
      std::rotate(loop.curves.begin(), loop.curves.begin() + static_cast<long>(best),
                  loop.curves.end());
    }
    std::stable_sort(face.loops.begin(), face.loops.end(), [](const Loop& a, const Loop& b) {
      return bl_key(loop_bbox(a)) < bl_key(loop_bbox(b));
    });
  }
  std::stable_sort(out.faces.begin(), out.faces.end(), [](const Face& a, const Face& b) {
    return bl_key(face_bbox(a)) < bl_key(face_bbox(b));
  });
  return out;
}

int curve_count(const CadProgram& prog) {
  int n = 0;
  for (const auto& step : prog.steps) {
    for (const auto& face : step.sketch.faces) {
      for (const auto& loop : face.loops) n += static_cast<int>(loop.curves.size());
    }
  }
  return n;
}

}  // namespace cadsig
