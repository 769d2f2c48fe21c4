#include "cadsig/num/checkpoint.hpp"

#include <cstring>

#include "cadsig/program_io.hpp"

namespace cadsig::num {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "CSGCKPT1";
constexpr size_t kMagicLen = 8;

template <class T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace

template <class T>
void CheckpointWriter::add(const std::string& name, const Mat<T>& m) {
  const size_t nbytes = static_cast<size_t>(m.size()) * sizeof(T);
  table_.push_back({{"name", name},
                    {"dtype", dtype_name<T>()},
                    {"shape", {m.rows(), m.cols()}},
                    {"offset", data_.size()},
                    {"nbytes", nbytes}});
  const size_t at = data_.size();
  data_.resize(at + nbytes);
  if (nbytes) std::memcpy(data_.data() + at, m.data(), nbytes);
}

void CheckpointWriter::write(const std::filesystem::path& path, const json& meta) const {
  json header = meta;
  header["tensors"] = table_;
  const std::string text = header.dump();
  std::string out(kMagic, kMagicLen);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  out += data_;
  // Write to a temporary name first so an interrupted save never leaves a torn file.
  auto tmp = path;
  tmp += ".tmp";
  write_file(tmp, out);
  std::filesystem::rename(tmp, path);
}

CheckpointReader::CheckpointReader(const std::filesystem::path& path) : path_(path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic) != 0) {
    throw IoError(path.string() + ": not a checkpoint file");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + kMagicLen, sizeof len);
  const size_t start = kMagicLen + sizeof len;
  if (bytes.size() < start + len) throw IoError(path.string() + ": truncated checkpoint header");
  try {
    meta_ = json::parse(bytes.substr(start, len));
    for (const json& t : meta_.at("tensors")) index_[t.at("name").get<std::string>()] = t;
  } catch (const json::exception& ex) {
    throw IoError(path.string() + ": malformed checkpoint header: " + ex.what());
  }
  data_ = bytes.substr(start + len);
  for (const auto& [name, t] : index_) {
    if (t.at("offset").get<size_t>() + t.at("nbytes").get<size_t>() > data_.size()) {
      throw IoError(path.string() + ": tensor '" + name + "' extends past end of file");
    }
  }
}

template <class T>
Mat<T> CheckpointReader::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw IoError(path_.string() + ": missing tensor '" + name + "'");
  const json& t = it->second;
  const long rows = t.at("shape").at(0).get<long>();
  const long cols = t.at("shape").at(1).get<long>();
  const std::string dtype = t.at("dtype").get<std::string>();
  const char* src = data_.data() + t.at("offset").get<size_t>();
  Mat<T> out(rows, cols);
  if (dtype == "f32") {
    Mat<float> raw(rows, cols);
    std::memcpy(raw.data(), src, static_cast<size_t>(raw.size()) * sizeof(float));
    out = raw.template cast<T>();
  } else if (dtype == "f64") {
    Mat<double> raw(rows, cols);
    std::memcpy(raw.data(), src, static_cast<size_t>(raw.size()) * sizeof(double));
    out = raw.template cast<T>();
  } else {
    throw IoError(path_.string() + ": tensor '" + name + "' has unknown dtype " + dtype);
  }
  return out;
}

template <class T>
void CheckpointReader::load_into(const std::string& name, Mat<T>& dst) const {
  Mat<T> m = get<T>(name);
  if (m.rows() != dst.rows() || m.cols() != dst.cols()) {
    throw ShapeError(path_.string() + ": tensor '" + name + "' has shape (" + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + "), expected (" + std::to_string(dst.rows()) + "x" +
                     std::to_string(dst.cols()) + ")");
  }
  dst = std::move(m);
}

template void CheckpointWriter::add(const std::string&, const Mat<float>&);
template void CheckpointWriter::add(const std::string&, const Mat<double>&);
template Mat<float> CheckpointReader::get(const std::string&) const;
template Mat<double> CheckpointReader::get(const std::string&) const;
template void CheckpointReader::load_into(const std::string&, Mat<float>&) const;
template void CheckpointReader::load_into(const std::string&, Mat<double>&) const;

}  // namespace cadsig::num
