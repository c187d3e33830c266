#include "advloss/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "advloss/error.hpp"

namespace advloss {

namespace {

void check_counts(std::size_t n, std::size_t dims, std::size_t classes) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "sample count must be >= 1");
  if (dims < 2) throw Error(ErrorCode::invalid_argument, "synthetic data needs dims >= 2");
  if (classes < 2) throw Error(ErrorCode::invalid_argument, "class count must be >= 2");
}

double to_unit_float(double v) {
  return static_cast<double>(static_cast<float>(std::clamp(v, 0.0, 1.0)));
}

}  // namespace

Dataset make_blobs(std::size_t n, std::size_t dims, std::size_t classes, double spread,
                   std::uint64_t seed) {
  check_counts(n, dims, classes);
  Rng rng(derive_seed(seed, {stream::data}));
  std::normal_distribution<double> noise(0.0, spread);
  Dataset data;
  data.num_classes = classes;
  data.features = BatchMatrix(n, dims);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::uint32_t>(i % classes);
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(y) / classes;
    auto row = data.features.row(i);
    for (std::size_t k = 0; k < dims; ++k) {
      double center = 0.5;
      if (k == 0) center += 0.25 * std::cos(angle);
      if (k == 1) center += 0.25 * std::sin(angle);
      row[k] = to_unit_float(center + noise(rng));
    }
    data.labels[i] = y;
  }
  return data;
}

Dataset make_rings(std::size_t n, std::size_t dims, std::size_t classes, double spread,
                   std::uint64_t seed) {
  check_counts(n, dims, classes);
  Rng rng(derive_seed(seed, {stream::data}));
  std::normal_distribution<double> noise(0.0, spread);
  std::uniform_real_distribution<double> turn(0.0, 2.0 * std::numbers::pi);
  Dataset data;
  data.num_classes = classes;
  data.features = BatchMatrix(n, dims);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::uint32_t>(i % classes);
    const double radius = 0.45 * (static_cast<double>(y) + 0.5) / static_cast<double>(classes);
    const double angle = turn(rng);
    const double r = radius + noise(rng);
    auto row = data.features.row(i);
    for (std::size_t k = 0; k < dims; ++k) {
      double v = 0.5;
      if (k == 0) v += r * std::cos(angle);
      else if (k == 1) v += r * std::sin(angle);
      else v += noise(rng);
      row[k] = to_unit_float(v);
    }
    data.labels[i] = y;
  }
  return data;
}

namespace {

std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw Error(ErrorCode::malformed_file, "IDX file is truncated");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

}  // namespace

Dataset load_idx_subset(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t n, std::size_t classes) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "sample count must be >= 1");
  if (classes < 2) throw Error(ErrorCode::invalid_argument, "class count must be >= 2");
  std::ifstream img(images, std::ios::binary), lab(labels, std::ios::binary);
  if (!img) throw Error(ErrorCode::io, "cannot open " + images.string());
  if (!lab) throw Error(ErrorCode::io, "cannot open " + labels.string());
  if (read_be32(img) != 0x00000803u)
    throw Error(ErrorCode::malformed_file, images.string() + " is not an IDX image file");
  if (read_be32(lab) != 0x00000801u)
    throw Error(ErrorCode::malformed_file, labels.string() + " is not an IDX label file");
  const std::uint32_t count = read_be32(img);
  const std::size_t dim = std::size_t{read_be32(img)} * read_be32(img);
  if (read_be32(lab) != count)
    throw Error(ErrorCode::inconsistent_file, "IDX image and label counts differ");

  std::vector<double> feats;
  std::vector<std::uint32_t> ys;
  std::vector<unsigned char> pixels(dim);
  for (std::uint32_t i = 0; i < count && ys.size() < n; ++i) {
    if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(dim)))
      throw Error(ErrorCode::malformed_file, "IDX image file is truncated");
    char y;
    if (!lab.get(y)) throw Error(ErrorCode::malformed_file, "IDX label file is truncated");
    const auto label = static_cast<unsigned char>(y);
    if (label >= classes) continue;
    for (auto px : pixels) feats.push_back(to_unit_float(px / 255.0));
    ys.push_back(label);
  }
  if (ys.empty()) throw Error(ErrorCode::invalid_argument, "no IDX samples with label < classes");
  Dataset data;
  data.num_classes = classes;
  data.features = BatchMatrix(ys.size(), dim, std::move(feats));
  data.labels = std::move(ys);
  return data;
}

}  // namespace advloss
