#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "advloss/error.hpp"
#include "advloss/model.hpp"

namespace advloss {

void Dataset::validate() const {
  if (labels.empty()) throw Error(ErrorCode::invalid_argument, "dataset is empty");
  if (features.rows() != labels.size())
    throw Error(ErrorCode::shape_mismatch, "dataset features and labels disagree on size");
  if (num_classes < 2) throw Error(ErrorCode::invalid_argument, "dataset needs >= 2 classes");
  for (double v : features.values())
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorCode::invalid_value, "dataset feature outside [0, 1]");
  for (auto y : labels)
    if (y >= num_classes) throw Error(ErrorCode::invalid_value, "dataset label out of range");
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw Error(ErrorCode::invalid_argument, "empty dataset subset");
  Dataset out;
  out.num_classes = num_classes;
  out.features = BatchMatrix(indices.size(), input_dim());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= size()) throw Error(ErrorCode::invalid_argument, "subset index out of range");
    auto src = features.row(indices[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(labels[indices[i]]);
  }
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  std::vector<std::size_t> idx(std::min(count, size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(idx);
}

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), sizeof(T)))
    throw Error(ErrorCode::malformed_file, "dataset file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out.write("ALDS", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.input_dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.num_classes));
  for (double v : data.features.values()) put_le<float>(out, static_cast<float>(v));
  for (auto y : data.labels) put_le<std::uint32_t>(out, y);
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ALDS", 4) != 0)
    throw Error(ErrorCode::malformed_file, path.string() + " is not a dataset file");
  const auto n = get_le<std::uint32_t>(in);
  const auto d = get_le<std::uint32_t>(in);
  const auto c = get_le<std::uint32_t>(in);
  if (n == 0 || d == 0) throw Error(ErrorCode::malformed_file, "dataset header has zero size");
  Dataset data;
  data.num_classes = c;
  std::vector<double> feats(static_cast<std::size_t>(n) * d);
  for (auto& v : feats) v = get_le<float>(in);
  data.features = BatchMatrix(n, d, std::move(feats));
  data.labels.resize(n);
  for (auto& y : data.labels) y = get_le<std::uint32_t>(in);
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::malformed_file, "trailing bytes after dataset payload");
  try {
    data.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::inconsistent_file, e.what());
  }
  return data;
}

}  // namespace advloss
