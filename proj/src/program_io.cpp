#include "cadsig/program_io.hpp"

#include <fstream>
#include <sstream>

namespace cadsig {

using nlohmann::json;

namespace {

json point(const Vec2& v) { return json::array({v.x, v.y}); }

Vec2 point_from(const json& j, const char* key) {
  const json& p = j.at(key);
  if (!p.is_array() || p.size() != 2) {
    throw ValidationError(std::string("curve field '") + key + "' must be [x, y]");
  }
  return {p[0].get<double>(), p[1].get<double>()};
}

void put_u16(std::string& out, int v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

int get_u16(const std::string& in, size_t at) {
  return static_cast<unsigned char>(in[at]) | (static_cast<unsigned char>(in[at + 1]) << 8);
}

}  // namespace

json program_to_json(const CadProgram& prog) {
  json steps = json::array();
  for (const DesignStep& step : prog.steps) {
    const ExtrusionOp& e = step.extrusion;
    json ext = {{"d_plus", e.d_plus},     {"d_minus", e.d_minus}, {"tau_x", e.tau[0]},
                {"tau_y", e.tau[1]},      {"tau_z", e.tau[2]},    {"theta", e.euler[0]},
                {"phi", e.euler[1]},      {"gamma", e.euler[2]},  {"sigma", e.sigma},
                {"boolean", boolean_op_name(e.op)}};
    json faces = json::array();
    for (const Face& face : step.sketch.faces) {
      json loops = json::array();
      for (const Loop& loop : face.loops) {
        json curves = json::array();
        for (const Curve& c : loop.curves) {
          std::visit(
              [&](const auto& cv) {
                using C = std::decay_t<decltype(cv)>;
                if constexpr (std::is_same_v<C, Line>) {
                  curves.push_back({{"type", "line"}, {"start", point(cv.start)}, {"end", point(cv.end)}});
                } else if constexpr (std::is_same_v<C, Arc>) {
                  curves.push_back({{"type", "arc"},
                                    {"start", point(cv.start)},
                                    {"mid", point(cv.mid)},
                                    {"end", point(cv.end)}});
                } else {
                  curves.push_back(
                      {{"type", "circle"}, {"center", point(cv.center)}, {"top", point(cv.top)}});
                }
              },
              c);
        }
        loops.push_back({{"curves", curves}});
      }
      faces.push_back({{"loops", loops}});
    }
    steps.push_back({{"extrusion", ext}, {"sketch", {{"faces", faces}}}});
  }
  return {{"version", 1}, {"steps", steps}};
}

CadProgram program_from_json(const json& j) {
  try {
    if (j.value("version", 1) != 1) {
      throw ValidationError("unsupported program JSON version " + j.at("version").dump());
    }
    CadProgram prog;
    for (const json& s : j.at("steps")) {
      DesignStep step;
      const json& e = s.at("extrusion");
      step.extrusion.d_plus = e.at("d_plus").get<double>();
      step.extrusion.d_minus = e.at("d_minus").get<double>();
      step.extrusion.tau = {e.at("tau_x").get<double>(), e.at("tau_y").get<double>(),
                            e.at("tau_z").get<double>()};
      step.extrusion.euler = {e.at("theta").get<double>(), e.at("phi").get<double>(),
                              e.at("gamma").get<double>()};
      step.extrusion.sigma = e.at("sigma").get<double>();
      step.extrusion.op = boolean_op_from_name(e.at("boolean").get<std::string>());
      for (const json& f : s.at("sketch").at("faces")) {
        Face face;
        for (const json& l : f.at("loops")) {
          Loop loop;
          for (const json& c : l.at("curves")) {
            const std::string type = c.at("type").get<std::string>();
            if (type == "line") {
              loop.curves.push_back(Line{point_from(c, "start"), point_from(c, "end")});
            } else if (type == "arc") {
              loop.curves.push_back(
                  Arc{point_from(c, "start"), point_from(c, "mid"), point_from(c, "end")});
            } else if (type == "circle") {
              loop.curves.push_back(Circle{point_from(c, "center"), point_from(c, "top")});
            } else {
              throw ValidationError("unknown curve type '" + type + "'");
            }
          }
          face.loops.push_back(std::move(loop));
        }
        step.sketch.faces.push_back(std::move(face));
      }
      prog.steps.push_back(std::move(step));
    }
    return prog;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed program JSON: ") + ex.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void save_program(const CadProgram& prog, const std::filesystem::path& path) {
  write_file(path, program_to_json(prog).dump(2) + "\n");
}

CadProgram load_program(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw IoError("cannot parse " + path.string() + ": " + ex.what());
  }
  return program_from_json(j);
}

json tokens_to_json(const std::vector<Token2D>& tokens) {
  json arr = json::array();
  for (const Token2D& t : tokens) arr.push_back(json::array({t.a, t.b}));
  return arr;
}

std::vector<Token2D> tokens_from_json(const json& j) {
  std::vector<Token2D> out;
  for (const json& p : j) {
    Token2D t{p.at(0).get<int>(), p.at(1).get<int>()};
    if (t.a < 0 || t.a > vocab::kNumericMax || t.b < 0 || t.b > vocab::kNumericMax) {
      throw ValidationError("token outside [0,266]: " + p.dump());
    }
    out.push_back(t);
  }
  return out;
}

std::string encode_token_binary(const std::vector<Token2D>& tokens) {
  if (tokens.size() > static_cast<size_t>(vocab::kMaxTokens)) {
    throw CapacityError("token stream longer than 273");
  }
  std::string out = "CSG1";
  out.push_back(static_cast<char>(1));
  put_u16(out, static_cast<int>(tokens.size()));
  for (const Token2D& t : tokens) {
    put_u16(out, t.a);
    put_u16(out, t.b);
  }
  return out;
}

std::vector<Token2D> decode_token_binary(const std::string& bytes) {
  if (bytes.size() < 7 || bytes.compare(0, 4, "CSG1") != 0) {
    throw IoError("not a CSG1 token stream");
  }
  if (static_cast<unsigned char>(bytes[4]) != 1) {
    throw IoError("unsupported CSG1 version " + std::to_string(static_cast<unsigned char>(bytes[4])));
  }
  const int n = get_u16(bytes, 5);
  if (n > vocab::kMaxTokens || bytes.size() != 7 + 4 * static_cast<size_t>(n)) {
    throw IoError("CSG1 stream length mismatch");
  }
  std::vector<Token2D> out(n);
  for (int i = 0; i < n; ++i) {
    out[i] = {get_u16(bytes, 7 + 4 * i), get_u16(bytes, 9 + 4 * i)};
    if (out[i].a > vocab::kNumericMax || out[i].b > vocab::kNumericMax) {
      throw IoError("CSG1 token outside vocabulary at index " + std::to_string(i));
    }
  }
  return out;
}

void save_tokens(const std::vector<Token2D>& tokens, const std::filesystem::path& path) {
  write_file(path, encode_token_binary(tokens));
}

std::vector<Token2D> load_tokens(const std::filesystem::path& path) {
  return decode_token_binary(read_file(path));
}

}  // namespace cadsig
