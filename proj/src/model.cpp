#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "advloss/error.hpp"
#include "advloss/model.hpp"
#include "mlp_internal.hpp"

namespace advloss {

MlpModel::MlpModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::dimension, "model needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows())
      throw Error(ErrorCode::dimension, "bias length does not match layer output width");
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())
      throw Error(ErrorCode::dimension, "layer dimensions do not chain");
  }
  if (num_classes() < 2) throw Error(ErrorCode::dimension, "model needs >= 2 output classes");
}

MlpModel MlpModel::random(std::span<const std::size_t> dims, Rng& rng) {
  if (dims.size() < 2) throw Error(ErrorCode::dimension, "architecture needs input and output");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    if (in == 0 || out == 0) throw Error(ErrorCode::dimension, "layer width must be >= 1");
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    DenseLayer layer{BatchMatrix(out, in), std::vector<double>(out, 0.0)};
    for (double& w : layer.weight.values()) w = init(rng);
    layers.push_back(std::move(layer));
  }
  return MlpModel(std::move(layers));
}

std::vector<std::size_t> MlpModel::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const auto& l : layers_) d.push_back(l.weight.rows());
  return d;
}

bool MlpModel::parameters_finite() const noexcept {
  for (const auto& l : layers_) {
    if (!l.weight.all_finite()) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

namespace {

// Row-by-row affine map; each output row depends only on its input row.
BatchMatrix affine(const DenseLayer& layer, const BatchMatrix& in) {
  const std::size_t n = in.rows(), out_w = layer.weight.rows(), in_w = layer.weight.cols();
  BatchMatrix out(n, out_w);
  for (std::size_t r = 0; r < n; ++r) {
    auto x = in.row(r);
    for (std::size_t o = 0; o < out_w; ++o) {
      auto w = layer.weight.row(o);
      double s = layer.bias[o];
      for (std::size_t i = 0; i < in_w; ++i) s += w[i] * x[i];
      out(r, o) = s;
    }
  }
  return out;
}

void relu_inplace(BatchMatrix& m) {
  for (double& v : m.values()) v = v > 0.0 ? v : 0.0;
}

}  // namespace

namespace detail {

ForwardTrace trace_forward(const MlpModel& model, const BatchMatrix& x) {
  if (x.cols() != model.input_dim())
    throw Error(ErrorCode::dimension, "input has " + std::to_string(x.cols()) +
                                          " columns, model expects " +
                                          std::to_string(model.input_dim()));
  ForwardTrace t;
  const auto& layers = model.layers();
  t.inputs.push_back(x);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    t.pre.push_back(affine(layers[l], t.inputs.back()));
    if (l + 1 < layers.size()) {
      BatchMatrix a = t.pre.back();
      relu_inplace(a);
      t.inputs.push_back(std::move(a));
    }
  }
  return t;
}

// Propagates dL/d(pre of layer l) down to dL/d(input of layer l).
BatchMatrix backward_input(const DenseLayer& layer, const BatchMatrix& grad_out) {
  const std::size_t n = grad_out.rows(), out_w = layer.weight.rows(), in_w = layer.weight.cols();
  BatchMatrix g(n, in_w, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto go = grad_out.row(r);
    auto gi = g.row(r);
    for (std::size_t o = 0; o < out_w; ++o) {
      const double u = go[o];
      auto w = layer.weight.row(o);
      for (std::size_t i = 0; i < in_w; ++i) gi[i] += u * w[i];
    }
  }
  return g;
}

void relu_mask(BatchMatrix& grad, const BatchMatrix& pre) {
  auto g = grad.values();
  auto z = pre.values();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(z[i] > 0.0)) g[i] = 0.0;
}

}  // namespace detail

using detail::backward_input;
using detail::relu_mask;
using detail::trace_forward;

BatchMatrix forward(const MlpModel& model, const BatchMatrix& x) {
  if (x.cols() != model.input_dim())
    throw Error(ErrorCode::dimension, "input has " + std::to_string(x.cols()) +
                                          " columns, model expects " +
                                          std::to_string(model.input_dim()));
  const auto& layers = model.layers();
  BatchMatrix h = affine(layers[0], x);
  for (std::size_t l = 1; l < layers.size(); ++l) {
    relu_inplace(h);
    h = affine(layers[l], h);
  }
  return h;
}

InputGradient loss_and_input_grad(const MlpModel& model, const SurrogateLoss& loss,
                                  const BatchMatrix& x, std::span<const std::uint32_t> labels,
                                  Reduction reduction) {
  if (!loss.has_gradient())
    throw Error(ErrorCode::gradient_unsupported, loss.name() + " provides no gradient");
  auto trace = trace_forward(model, x);
  const auto ctx = make_context(trace.pre.back(), labels);
  auto le = loss.value_and_grad(ctx, reduction);
  const auto& layers = model.layers();
  BatchMatrix g = std::move(le.grad_p);
  for (std::size_t l = layers.size(); l-- > 0;) {
    g = backward_input(layers[l], g);
    if (l > 0) relu_mask(g, trace.pre[l - 1]);
  }
  return {le.value, std::move(g)};
}

BatchMatrix input_grad(const MlpModel& model, const SurrogateLoss& loss, const BatchMatrix& x,
                       std::span<const std::uint32_t> labels, Reduction reduction) {
  return loss_and_input_grad(model, loss, x, labels, reduction).grad;
}

double clean_accuracy(const MlpModel& model, const Dataset& data) {
  const BatchMatrix logits = forward(model, data.features);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r)
    if (argmax_row(logits.row(r)) == data.labels[r]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

constexpr const char* kModelMagic = "advloss-mlp";
constexpr int kModelVersion = 1;

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw Error(ErrorCode::malformed_file, "model parameter block is truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

std::istringstream header_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::malformed_file, "model header is truncated");
  std::istringstream ss(line);
  std::string k;
  ss >> k;
  if (k != key) throw Error(ErrorCode::malformed_file, "expected '" + key + "' in model header");
  return ss;
}

}  // namespace

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  const auto dims = model.dims();
  std::size_t count = 0;
  for (const auto& l : model.layers()) count += l.weight.size() + l.bias.size();
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "dims";
  for (auto d : dims) out << ' ' << d;
  out << '\n';
  out << "classes " << model.num_classes() << '\n';
  out << "activation relu\n";
  out << "params " << count << '\n';
  for (const auto& l : model.layers()) {
    for (double w : l.weight.values()) write_f64(out, w);
    for (double b : l.bias) write_f64(out, b);
  }
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  int version = 0;
  if (!(header_line(in, kModelMagic) >> version) || version != kModelVersion)
    throw Error(ErrorCode::malformed_file, "unsupported model format version");
  std::vector<std::size_t> dims;
  {
    auto ss = header_line(in, "dims");
    std::size_t d;
    while (ss >> d) dims.push_back(d);
  }
  std::size_t classes = 0;
  if (!(header_line(in, "classes") >> classes))
    throw Error(ErrorCode::malformed_file, "bad classes line");
  std::string activation;
  if (!(header_line(in, "activation") >> activation) || activation != "relu")
    throw Error(ErrorCode::malformed_file, "unsupported activation tag");
  std::size_t count = 0;
  if (!(header_line(in, "params") >> count))
    throw Error(ErrorCode::malformed_file, "bad params line");

  if (dims.size() < 2 || std::find(dims.begin(), dims.end(), std::size_t{0}) != dims.end())
    throw Error(ErrorCode::inconsistent_file, "model dims must list >= 2 positive widths");
  if (classes != dims.back())
    throw Error(ErrorCode::inconsistent_file, "classes does not match the output layer width");
  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) expected += dims[l + 1] * (dims[l] + 1);
  if (expected != count)
    throw Error(ErrorCode::inconsistent_file, "parameter count does not match dims");

  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{BatchMatrix(dims[l + 1], dims[l]), std::vector<double>(dims[l + 1])};
    for (double& w : layer.weight.values()) w = read_f64(in);
    for (double& b : layer.bias) b = read_f64(in);
    layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorCode::malformed_file, "trailing bytes after model parameters");
  MlpModel model(std::move(layers));
  if (!model.parameters_finite())
    throw Error(ErrorCode::invalid_value, "model contains non-finite parameters");
  return model;
}

}  // namespace advloss
