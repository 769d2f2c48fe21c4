#pragma once

// Checkpoint file: "CSGCKPT1" | u64 header length | JSON header | raw tensor data.
// The header carries user metadata plus a "tensors" table of
// {name, dtype ("f32"|"f64"), shape [rows, cols], offset, nbytes}; offsets are
// relative to the start of the data section. All numbers are little-endian.

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "cadsig/num/tensor.hpp"

namespace cadsig::num {

class CheckpointWriter {
 public:
  template <class T>
  void add(const std::string& name, const Mat<T>& m);
  void write(const std::filesystem::path& path, const nlohmann::json& meta) const;

 private:
  nlohmann::json table_ = nlohmann::json::array();
  std::string data_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const std::filesystem::path& path);
  const nlohmann::json& meta() const { return meta_; }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  /// Converts to T when the stored dtype differs. Throws IoError/ShapeError.
  template <class T>
  Mat<T> get(const std::string& name) const;
  template <class T>
  void load_into(const std::string& name, Mat<T>& dst) const;

 private:
  std::filesystem::path path_;
  nlohmann::json meta_;
  std::map<std::string, nlohmann::json> index_;
  std::string data_;
};

}  // namespace cadsig::num
