#pragma once

#include "advloss/datagen.hpp"
#include "advloss/model.hpp"

namespace advloss::testing {

// 2-D, 3-class blobs. Spread 0.11 puts clean accuracy near 0.95 and an
// L-inf budget of 0.09 puts the grid-oracle risk near 0.3.
inline constexpr double kSpread = 0.11;
inline constexpr double kEpsilon = 0.09;

Dataset train_split();                   // 2000 samples
Dataset eval_split();                    // 1000 samples, disjoint seed
Dataset heldout_split(std::uint64_t seed);  // 1000 fresh samples

// Trained once per process and cached.
const MlpModel& clean_model();
const MlpModel& fgsm_model();  // FGSM adversarial training at kEpsilon

}  // namespace advloss::testing
