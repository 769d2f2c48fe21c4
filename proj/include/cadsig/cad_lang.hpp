#pragma once

// Tokenized sketch-and-extrusion CAD language: vocabulary, 8-bit quantization,
// structured program <-> flat token stream conversion and the one-hot matrix
// encoding consumed by the network.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cadsig/errors.hpp"

namespace cadsig {

// ---------------------------------------------------------------------------
// Vocabulary

namespace vocab {
inline constexpr int kPad = 0;
inline constexpr int kCls = 1;  // start of sequence
inline constexpr int kEnd = 1;  // end of sequence; shares the value of kCls
inline constexpr int kEndSketch = 2;
inline constexpr int kEndFace = 3;
inline constexpr int kEndLoop = 4;
inline constexpr int kEndCurve = 5;
inline constexpr int kEndExtrude = 6;
inline constexpr int kBooleanBase = 7;  // New, Cut, Join, Intersect -> 7..10
inline constexpr int kNumericMin = 11;
inline constexpr int kNumericMax = 266;
inline constexpr int kNumericLevels = 256;
inline constexpr int kSize = 267;       // token indices 0..266
inline constexpr int kMaxTokens = 273;  // n_ts
inline constexpr int kMaxSteps = 10;
inline constexpr int kPadFlag = 11;
inline constexpr int kNumFlags = 12;  // flag values 0..11
inline constexpr int kExtrusionTokens = 11;
}  // namespace vocab

enum class TokenKind {
  Pad,
  ClsOrEnd,
  EndSketch,
  EndFace,
  EndLoop,
  EndCurve,
  EndExtrude,
  Boolean,
  Numeric,
};

/// Every index in [0, 266] belongs to exactly one kind.
TokenKind classify_token(int index);
inline bool is_numeric(int index) {
  return index >= vocab::kNumericMin && index <= vocab::kNumericMax;
}

struct Token2D {
  int a = vocab::kPad;
  int b = vocab::kPad;
  friend bool operator==(const Token2D&, const Token2D&) = default;
};

/// Fixed-capacity (273) token sequence with per-token flags and step indices.
struct TokenStream {
  std::vector<Token2D> tokens;  // always kMaxTokens long, padded with (0,0)
  std::vector<int> flags;       // 0..11
  std::vector<int> steps;       // 0..10
  int true_len = 0;

  TokenStream();
  /// Builds a stream from an unpadded token list; flags/steps come from annotate().
  static TokenStream from_tokens(const std::vector<Token2D>& tokens);
  std::vector<Token2D> unpadded() const {
    return {tokens.begin(), tokens.begin() + true_len};
  }
  friend bool operator==(const TokenStream&, const TokenStream&) = default;
};

// ---------------------------------------------------------------------------
// Structured programs

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Line {
  Vec2 start, end;
  friend bool operator==(const Line&, const Line&) = default;
};
struct Arc {
  Vec2 start, mid, end;
  friend bool operator==(const Arc&, const Arc&) = default;
};
/// Circle given by its center and its top-most point (center + (0, r)).
struct Circle {
  Vec2 center, top;
  friend bool operator==(const Circle&, const Circle&) = default;
};

using Curve = std::variant<Line, Arc, Circle>;

enum class CurveType { Line = 0, Arc = 1, Circle = 2 };
CurveType curve_type(const Curve& c);
const char* curve_type_name(CurveType t);

struct Loop {
  std::vector<Curve> curves;
  friend bool operator==(const Loop&, const Loop&) = default;
};
struct Face {
  std::vector<Loop> loops;
  friend bool operator==(const Face&, const Face&) = default;
};
struct Sketch {
  std::vector<Face> faces;
  friend bool operator==(const Sketch&, const Sketch&) = default;
};

enum class BooleanOp { New = 0, Cut = 1, Join = 2, Intersect = 3 };
const char* boolean_op_name(BooleanOp op);
BooleanOp boolean_op_from_name(const std::string& name);

/// Extrusion parameters. Distances, origin and scale live in the unit model box;
/// Euler angles are radians in [-pi, pi).
struct ExtrusionOp {
  double d_plus = 0.0;
  double d_minus = 0.0;
  std::array<double, 3> tau{0.0, 0.0, 0.0};
  std::array<double, 3> euler{0.0, 0.0, 0.0};  // theta, phi, gamma
  double sigma = 1.0;
  BooleanOp op = BooleanOp::New;
  friend bool operator==(const ExtrusionOp&, const ExtrusionOp&) = default;
};

struct DesignStep {
  ExtrusionOp extrusion;
  Sketch sketch;
  friend bool operator==(const DesignStep&, const DesignStep&) = default;
};

struct CadProgram {
  std::vector<DesignStep> steps;
  friend bool operator==(const CadProgram&, const CadProgram&) = default;
};

// ---------------------------------------------------------------------------
// Quantization

/// Maps p in [0,1] to 11 + round(p * 255) (round half up).
int quantize_scalar(double p);
/// Inverse of quantize_scalar: (q - 11) / 255.
double dequantize_scalar(int q);

/// Angles are periodic: 256 levels of 2*pi/256 covering [-pi, pi), so that
/// 0 and multiples of pi/2 are represented exactly.
int quantize_angle(double radians);
double dequantize_angle(int q);

/// Snaps every continuous value of the program onto its quantization level.
CadProgram quantized(const CadProgram& prog);

inline constexpr double kQuantum = 1.0 / 255.0;

// ---------------------------------------------------------------------------
// Stream conversion

/// Serializes a program as (cls) [E1 S1] ... [Ek Sk] (end), padded to 273.
TokenStream program_to_stream(const CadProgram& prog);

/// Parses an arbitrary token sequence (reads up to true_len). Throws SyntaxError.
CadProgram stream_to_program(const TokenStream& stream);
CadProgram tokens_to_program(const std::vector<Token2D>& tokens);

/// Per-token structural annotation, total on arbitrary (possibly malformed) input.
struct TokenAnnotation {
  std::vector<int> flags;
  std::vector<int> steps;
  /// True for tokens that belong to a sketch block (coordinates and e_c/e_l/e_f/e_s).
  std::vector<bool> is_sketch;
};
TokenAnnotation annotate(const std::vector<Token2D>& tokens);

/// Extrusion blocks that can be read from a (partial) stream, indexed by step-1.
/// A step whose 11-token block is malformed yields std::nullopt.
std::vector<std::optional<ExtrusionOp>> completed_extrusions(
    const std::vector<Token2D>& tokens);

/// Result of splitting a possibly-invalid stream by its e_e / e_s markers.
struct LenientSplit {
  int extrusion_count = 0;                    // number of e_e tokens before end
  std::vector<std::optional<Sketch>> sketches;  // unparsable sketches are nullopt
};
LenientSplit split_lenient(const std::vector<Token2D>& tokens);

struct EncodedMatrices {
  int rows = vocab::kMaxTokens;
  int cols = 2 * vocab::kSize;
  std::vector<std::uint8_t> one_hot;  // rows x cols, row-major
  std::vector<int> flags;
  std::vector<int> steps;
  std::vector<bool> pad_mask;  // true for positions >= true_len
  std::uint8_t at(int r, int c) const { return one_hot[static_cast<size_t>(r) * cols + c]; }
};
EncodedMatrices encode_matrices(const TokenStream& stream);

// ---------------------------------------------------------------------------
// Sketch normalization

/// Signed area of a loop, arcs integrated exactly (positive = counter-clockwise).
double loop_signed_area(const Loop& loop);
/// Bounding box (min, max) of a curve; arcs account for their extreme points.
std::pair<Vec2, Vec2> curve_bbox(const Curve& c);
std::pair<Vec2, Vec2> loop_bbox(const Loop& loop);
std::pair<Vec2, Vec2> face_bbox(const Face& face);
Loop reversed(const Loop& loop);
Vec2 curve_start(const Curve& c);
Vec2 curve_end(const Curve& c);

/// Orients loops counter-clockwise, rotates each loop to start at its
/// bottom-left-most curve and sorts loops and faces by bounding-box bottom-left
/// (x, then y). Throws ValidationError on a zero-area loop.
Sketch reorder_and_orient(const Sketch& sketch);

int curve_count(const CadProgram& prog);

}  // namespace cadsig
