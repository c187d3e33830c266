#include "fixtures.hpp"

namespace advloss::testing {

namespace {

TrainConfig base_config() {
  TrainConfig c;
  c.hidden = {16, 16};
  c.epochs = 60;
  c.seed = 3;
  return c;
}

}  // namespace

Dataset train_split() { return make_blobs(2000, 2, 3, kSpread, 1); }

Dataset eval_split() { return make_blobs(1000, 2, 3, kSpread, 2); }

Dataset heldout_split(std::uint64_t seed) { return make_blobs(1000, 2, 3, kSpread, 1000 + seed); }

const MlpModel& clean_model() {
  static const MlpModel m = train(train_split(), base_config()).model;
  return m;
}

const MlpModel& fgsm_model() {
  static const MlpModel m = [] {
    TrainConfig c = base_config();
    c.at_mode = AdvTrainingMode::Fgsm;
    c.at_epsilon = kEpsilon;
    return train(train_split(), c).model;
  }();
  return m;
}

}  // namespace advloss::testing
