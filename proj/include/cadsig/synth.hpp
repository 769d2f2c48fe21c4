#pragma once

// Procedural sketch-and-extrusion programs with paired point clouds.
//
// Dataset directory layout (manifest version "v1"):
//   manifest.json        {"version": "v1", "config": {...}, "config_hash": "<fnv1a-64 hex>",
//                         "counts": {"train", "val", "test"},
//                         "samples": [{"id", "split", "curve_count", "n_points"}, ...]}
//   programs/<id>.json   program JSON (see program_io.hpp)
//   clouds/<id>.ply      binary PLY, x y z nx ny nz

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cadsig/cad_lang.hpp"
#include "cadsig/geom.hpp"

namespace cadsig {

struct GeneratorConfig {
  std::uint64_t seed = 0;
  int min_steps = 1;
  int max_steps = 3;
  int n_points = 1024;  // 8192 reproduces the original sampling density
  int max_faces = 2;
  double hole_probability = 0.3;
  // Shape library weights: rectangle, rotated rectangle, n-gon, circle, slot.
  std::vector<double> shape_weights{3.0, 1.0, 1.5, 2.0, 1.5};
  // Boolean weights for steps after the first: new, cut, join, intersect.
  std::vector<double> boolean_weights{0.5, 2.0, 3.0, 0.3};
  double min_scale = 0.15;
  double max_scale = 0.9;
  double min_distance = 0.06;
  double max_distance = 0.6;
  int n_train = 2000;
  int n_val = 200;
  int n_test = 200;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
  std::string hash() const;  // FNV-1a 64 of the canonical JSON, hex
  void validate() const;
};

struct DatasetSample {
  std::string id;
  CadProgram program;
  Cloud cloud;  // n_points x 6: xyz + estimated normals
  int curve_count = 0;
  std::string split;
  friend bool operator==(const DatasetSample&, const DatasetSample&) = default;
};

/// Deterministic in (cfg, index). Throws GenerationError after 100 rejected attempts.
DatasetSample generate_sample(const GeneratorConfig& cfg, int index);

/// Only the program part of generate_sample (no cloud), same determinism.
CadProgram generate_program(const GeneratorConfig& cfg, int index);

/// n_train + n_val + n_test samples; splits assigned in that index order.
std::vector<DatasetSample> generate_dataset(const GeneratorConfig& cfg, int threads = 1);

/// Stable ascending order by curve count.
std::vector<int> curriculum_order(const std::vector<int>& curve_counts);
std::vector<int> curriculum_order(const std::vector<DatasetSample>& samples);

struct Dataset {
  GeneratorConfig config;
  std::string config_hash;
  std::vector<DatasetSample> samples;
  std::vector<const DatasetSample*> split(const std::string& name) const;
};

void write_dataset(const std::vector<DatasetSample>& samples, const GeneratorConfig& cfg,
                   const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace cadsig
