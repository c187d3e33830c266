#include <algorithm>
#include <cmath>
#include <numeric>

#include "advloss/error.hpp"
#include "advloss/model.hpp"
#include "mlp_internal.hpp"

namespace advloss {

namespace {

void fgsm_perturb(const MlpModel& model, BatchMatrix& x, std::span<const std::uint32_t> y,
                  double epsilon) {
  static const SurrogateLoss cross_entropy("ce", BuiltinLoss::CE);
  const BatchMatrix g = input_grad(model, cross_entropy, x, y, Reduction::Mean);
  auto xv = x.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double s = gv[i] > 0.0 ? 1.0 : (gv[i] < 0.0 ? -1.0 : 0.0);
    xv[i] = std::clamp(xv[i] + epsilon * s, 0.0, 1.0);
  }
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& config) {
  data.validate();
  if (config.at_mode == AdvTrainingMode::Fgsm && !(config.at_epsilon >= 0.0))
    throw Error(ErrorCode::invalid_argument, "FGSM training needs epsilon >= 0");
  if (config.batch_size == 0 || !(config.learning_rate > 0.0))
    throw Error(ErrorCode::invalid_argument, "batch size and learning rate must be positive");

  Rng rng(derive_seed(config.seed, {stream::training}));
  std::vector<std::size_t> dims{data.input_dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(data.num_classes);
  MlpModel model = MlpModel::random(dims, rng);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainResult result;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      Dataset batch = data.subset(std::span(order).subspan(start, stop - start));
      if (config.at_mode == AdvTrainingMode::Fgsm)
        fgsm_perturb(model, batch.features, batch.labels, config.at_epsilon);

      auto trace = detail::trace_forward(model, batch.features);
      const auto ctx = make_context(trace.pre.back(), batch.labels);
      for (std::size_t r = 0; r < batch.size(); ++r)
        if (argmax_row(ctx.p.row(r)) == batch.labels[r]) ++correct;
      auto le = ce(ctx, Reduction::Mean);
      loss_sum += le.value * static_cast<double>(batch.size());

      auto& layers = model.mutable_layers();
      BatchMatrix g = std::move(le.grad_p);
      for (std::size_t l = layers.size(); l-- > 0;) {
        BatchMatrix g_in = detail::backward_input(layers[l], g);
        if (l > 0) detail::relu_mask(g_in, trace.pre[l - 1]);
        const BatchMatrix& in = trace.inputs[l];
        auto& layer = layers[l];
        for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
          auto w = layer.weight.row(o);
          double gb = 0.0;
          for (std::size_t r = 0; r < g.rows(); ++r) {
            const double u = g(r, o);
            if (u == 0.0) continue;
            gb += u;
            auto x = in.row(r);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= config.learning_rate * u * x[i];
          }
          layer.bias[o] -= config.learning_rate * gb;
        }
        g = std::move(g_in);
      }
    }
    if (!model.parameters_finite())
      throw Error(ErrorCode::divergence,
                  "training diverged (non-finite parameters) in epoch " + std::to_string(epoch));
    result.curve.push_back({epoch, loss_sum / static_cast<double>(data.size()),
                            static_cast<double>(correct) / static_cast<double>(data.size())});
  }
  result.model = std::move(model);
  return result;
}

}  // namespace advloss
