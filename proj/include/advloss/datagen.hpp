#pragma once

#include <cstdint>
#include <filesystem>

#include "advloss/model.hpp"

namespace advloss {

// Gaussian clusters with centers spread evenly on a circle (first two
// dimensions) around the cube center; features clipped to [0, 1] and rounded
// to float precision so the binary format round-trips exactly.
Dataset make_blobs(std::size_t n, std::size_t dims, std::size_t classes, double spread,
                   std::uint64_t seed);

// Concentric rings, one class per ring, in the first two dimensions.
Dataset make_rings(std::size_t n, std::size_t dims, std::size_t classes, double spread,
                   std::uint64_t seed);

// First `n` samples with label < classes from MNIST-style IDX files
// (images: magic 0x00000803, labels: 0x00000801), pixels scaled by 1/255.
Dataset load_idx_subset(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t n, std::size_t classes);

}  // namespace advloss
