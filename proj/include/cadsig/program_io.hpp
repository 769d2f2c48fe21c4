#pragma once

// Interchange formats for the CAD language.
//
// Program JSON (schema version 1):
//   { "version": 1,
//     "steps": [ { "extrusion": { "d_plus", "d_minus", "tau_x", "tau_y", "tau_z",
//                                 "theta", "phi", "gamma", "sigma",
//                                 "boolean": "new|cut|join|intersect" },
//                  "sketch": { "faces": [ { "loops": [ { "curves": [
//                      { "type": "line",   "start": [x,y], "end": [x,y] },
//                      { "type": "arc",    "start": [x,y], "mid": [x,y], "end": [x,y] },
//                      { "type": "circle", "center": [x,y], "top": [x,y] } ] } ] } ] } } ] }
//
// Token stream binary (.csg): "CSG1" | u8 version (=1) | u16 true_len | true_len x (u16 a, u16 b),
// all little-endian.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadsig/cad_lang.hpp"

namespace cadsig {

nlohmann::json program_to_json(const CadProgram& prog);
CadProgram program_from_json(const nlohmann::json& j);

void save_program(const CadProgram& prog, const std::filesystem::path& path);
CadProgram load_program(const std::filesystem::path& path);

nlohmann::json tokens_to_json(const std::vector<Token2D>& tokens);
std::vector<Token2D> tokens_from_json(const nlohmann::json& j);

std::string encode_token_binary(const std::vector<Token2D>& tokens);
std::vector<Token2D> decode_token_binary(const std::string& bytes);
void save_tokens(const std::vector<Token2D>& tokens, const std::filesystem::path& path);
std::vector<Token2D> load_tokens(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace cadsig
