#include "dvector/network.hpp"

#include "dvector/archive.hpp"
#include "dvector/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

namespace dvector::nnet {
namespace {

constexpr double kPosteriorSumTolerance = 1e-6;

void sigmoid_inplace(ColMatrix& m) {
  m = (1.0 + (-m.array()).exp()).inverse().matrix();
}

void softmax_columns_inplace(ColMatrix& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    auto col = z.col(c);
    const double mx = col.maxCoeff();
    col = (col.array() - mx).exp().matrix();
    col /= col.sum();
  }
}

void check_input_rows(const Network& net, Eigen::Index rows) {
  if (rows != net.spec.input_dim) {
    throw ShapeError("network expects input dim " + std::to_string(net.spec.input_dim) +
                     ", got " + std::to_string(rows));
  }
}

void check_posterior_row(const Eigen::Ref<const Vector>& p) {
  if ((p.array() < 0.0).any()) throw InputError("phone posterior row has a negative entry");
  const double sum = p.sum();
  if (std::abs(sum - 1.0) > kPosteriorSumTolerance) {
    throw InputError("phone posterior row sums to " + std::to_string(sum) + ", expected 1");
  }
}

}  // namespace

void NetworkSpec::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("network dims must be >= 1");
  if (hidden_dims.empty()) throw ConfigError("network.hidden_dims must not be empty");
  for (int h : hidden_dims)
    if (h < 1) throw ConfigError("network hidden dims must be >= 1");
  if (posterior_dim < 0 || posterior_dim >= input_dim) {
    throw ConfigError("posterior dim must be in [0, input_dim)");
  }
}

std::size_t Network::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Network init_network(const NetworkSpec& spec) {
  spec.validate();
  Network net{spec, {}};
  std::mt19937_64 rng(spec.seed);
  std::vector<int> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden_dims.begin(), spec.hidden_dims.end());
  dims.push_back(spec.output_dim);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double r = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-r, r);
    Layer layer{ColMatrix(fan_out, fan_in), Vector::Zero(fan_out)};
    // Fill row by row so the draw order matches the on-disk layout.
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j) layer.weight(i, j) = dist(rng);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Vector assemble_input(const NetworkSpec& spec, const Eigen::Ref<const Vector>& stacked,
                      const std::optional<Eigen::Ref<const Vector>>& posteriors) {
  const Eigen::Index p = posteriors ? posteriors->size() : 0;
  if (p != spec.posterior_dim || stacked.size() + p != spec.input_dim) {
    throw ShapeError("assembled input dim " + std::to_string(stacked.size() + p) +
                     " (posteriors " + std::to_string(p) + ") does not match network input dim " +
                     std::to_string(spec.input_dim) + " (posteriors " +
                     std::to_string(spec.posterior_dim) + ")");
  }
  Vector out(spec.input_dim);
  out.head(stacked.size()) = stacked;
  if (posteriors) {
    check_posterior_row(*posteriors);
    out.tail(p) = *posteriors;
  }
  return out;
}

Matrix assemble_inputs(const NetworkSpec& spec, const Matrix& stacked, const Matrix* posteriors) {
  const Eigen::Index p = posteriors ? posteriors->cols() : 0;
  if (p != spec.posterior_dim || stacked.cols() + p != spec.input_dim) {
    throw ShapeError("assembled input dim " + std::to_string(stacked.cols() + p) +
                     " does not match network input dim " + std::to_string(spec.input_dim));
  }
  if (posteriors && posteriors->rows() != stacked.rows()) {
    throw ShapeError("posterior frame count " + std::to_string(posteriors->rows()) +
                     " differs from feature frame count " + std::to_string(stacked.rows()));
  }
  Matrix out(stacked.rows(), spec.input_dim);
  out.leftCols(stacked.cols()) = stacked;
  if (posteriors) {
    for (Eigen::Index t = 0; t < posteriors->rows(); ++t) check_posterior_row(posteriors->row(t).transpose());
    out.rightCols(p) = *posteriors;
  }
  return out;
}

std::vector<ColMatrix> forward_batch(const Network& net, const Eigen::Ref<const ColMatrix>& inputs) {
  check_input_rows(net, inputs.rows());
  std::vector<ColMatrix> acts;
  acts.reserve(net.layers.size() + 1);
  acts.emplace_back(inputs);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    ColMatrix z = layer.weight * acts.back();
    z.colwise() += layer.bias;
    if (l + 1 < net.layers.size()) {
      sigmoid_inplace(z);
    } else {
      softmax_columns_inplace(z);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

std::vector<Vector> forward(const Network& net, const Eigen::Ref<const Vector>& input) {
  auto batch = forward_batch(net, ColMatrix(input));
  std::vector<Vector> out;
  out.reserve(batch.size());
  for (auto& m : batch) out.emplace_back(m.col(0));
  return out;
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (const auto& l : net.layers) {
    g.weight.push_back(ColMatrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

LossAndGradient loss_and_gradient(const Network& net, const Eigen::Ref<const ColMatrix>& inputs,
                                  std::span<const int> labels) {
  check_input_rows(net, inputs.rows());
  const Eigen::Index batch = inputs.cols();
  if (static_cast<std::size_t>(batch) != labels.size() || batch == 0) {
    throw InputError("batch needs one label per input column");
  }
  for (int y : labels) {
    if (y < 0 || y >= net.spec.output_dim) {
      throw LabelError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(net.spec.output_dim) + ")");
    }
  }

  // Hidden activations, then raw logits for a stable log-softmax.
  const std::size_t n_layers = net.layers.size();
  std::vector<ColMatrix> acts;
  acts.reserve(n_layers);
  acts.emplace_back(inputs);
  for (std::size_t l = 0; l + 1 < n_layers; ++l) {
    ColMatrix z = net.layers[l].weight * acts.back();
    z.colwise() += net.layers[l].bias;
    sigmoid_inplace(z);
    acts.push_back(std::move(z));
  }
  ColMatrix delta = net.layers.back().weight * acts.back();
  delta.colwise() += net.layers.back().bias;

  LossAndGradient out;
  double total = 0.0;
  for (Eigen::Index c = 0; c < batch; ++c) {
    auto col = delta.col(c);
    const double mx = col.maxCoeff();
    const double lse = mx + std::log((col.array() - mx).exp().sum());
    total += lse - col(labels[c]);
    col = (col.array() - lse).exp().matrix();
    col(labels[c]) -= 1.0;
  }
  out.loss = total / static_cast<double>(batch);
  delta /= static_cast<double>(batch);

  out.grads.weight.resize(n_layers);
  out.grads.bias.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    out.grads.weight[l] = delta * acts[l].transpose();
    out.grads.bias[l] = delta.rowwise().sum();
    if (l > 0) {
      ColMatrix back = net.layers[l].weight.transpose() * delta;
      delta = (back.array() * acts[l].array() * (1.0 - acts[l].array())).matrix();
    }
  }
  return out;
}

Evaluation evaluate(const Network& net, const Eigen::Ref<const ColMatrix>& inputs,
                    std::span<const int> labels, int batch_size) {
  Evaluation ev;
  ev.count = labels.size();
  double total = 0.0;
  for (Eigen::Index start = 0; start < inputs.cols(); start += batch_size) {
    const Eigen::Index n = std::min<Eigen::Index>(batch_size, inputs.cols() - start);
    const auto acts = forward_batch(net, inputs.middleCols(start, n));
    const ColMatrix& probs = acts.back();
    for (Eigen::Index c = 0; c < n; ++c) {
      const int y = labels[start + c];
      Eigen::Index arg = 0;
      probs.col(c).maxCoeff(&arg);
      if (arg == y) ++ev.correct;
      total -= std::log(std::max(probs(y, c), std::numeric_limits<double>::min()));
    }
  }
  ev.loss = ev.count ? total / static_cast<double>(ev.count) : 0.0;
  return ev;
}

void sgd_step(Network& net, const Gradients& grads, double lr, double momentum, SgdState& state) {
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (!state.initialized && momentum != 0.0) {
    state.velocity = Gradients::zeros_like(net);
    state.initialized = true;
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& vw = state.velocity.weight[l];
    auto& vb = state.velocity.bias[l];
    if (momentum == 0.0) {
      net.layers[l].weight -= lr * grads.weight[l];
      net.layers[l].bias -= lr * grads.bias[l];
    } else {
      vw = grads.weight[l] + momentum * vw;
      vb = grads.bias[l] + momentum * vb;
      net.layers[l].weight -= lr * vw;
      net.layers[l].bias -= lr * vb;
    }
  }
}

void TrainConfig::validate() const {
  if (!(init_lr > 0) || !(stop_lr > 0) || stop_lr >= init_lr) {
    throw ConfigError("train: need 0 < stop_lr < init_lr");
  }
  if (lr_halving_threshold < 0 || stop_improvement < 0) {
    throw ConfigError("train: thresholds must be >= 0");
  }
  if (max_epochs < 1 || minibatch < 1) throw ConfigError("train: max_epochs and minibatch must be >= 1");
  if (momentum < 0 || momentum >= 1) throw ConfigError("train: momentum must be in [0, 1)");
}

TrainResult train(Network net, const Dataset& train_set, const Dataset& cv_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0 || cv_set.size() == 0) {
    throw InputError("training and CV sets must be non-empty");
  }
  check_input_rows(net, train_set.inputs.rows());
  check_input_rows(net, cv_set.inputs.rows());

  std::mt19937_64 rng(cfg.shuffle_seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.initial_cv_loss = evaluate(net, cv_set.inputs, cv_set.labels).loss;
  double best_loss = result.initial_cv_loss;
  Network best = net;
  SgdState state;
  double lr = cfg.init_lr;
  bool halving = false;

  ColMatrix batch_inputs(train_set.inputs.rows(), cfg.minibatch);
  std::vector<int> batch_labels;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double train_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t n = std::min<std::size_t>(cfg.minibatch, order.size() - start);
      batch_inputs.resize(Eigen::NoChange, static_cast<Eigen::Index>(n));
      batch_labels.resize(n);
      for (std::size_t j = 0; j < n; ++j) {
        batch_inputs.col(static_cast<Eigen::Index>(j)) = train_set.inputs.col(order[start + j]);
        batch_labels[j] = train_set.labels[order[start + j]];
      }
      auto lg = loss_and_gradient(net, batch_inputs, batch_labels);
      train_total += lg.loss * static_cast<double>(n);
      const double step = cfg.lr_per_frame ? lr * static_cast<double>(n) : lr;
      sgd_step(net, lg.grads, step, cfg.momentum, state);
    }

    const Evaluation cv = evaluate(net, cv_set.inputs, cv_set.labels);
    result.log.push_back({epoch, lr, train_total / static_cast<double>(order.size()), cv.loss,
                          cv.accuracy()});
    double improvement = -std::numeric_limits<double>::infinity();
    if (std::isfinite(cv.loss)) improvement = (best_loss - cv.loss) / best_loss;
    if (std::isfinite(cv.loss) && cv.loss < best_loss) {
      best_loss = cv.loss;
      best = net;
    }
    if (halving && improvement < cfg.stop_improvement) break;
    if (improvement < cfg.lr_halving_threshold) {
      lr *= 0.5;
      net = best;
      state = SgdState{};
      halving = true;
    }
    if (lr < cfg.stop_lr) break;
  }
  result.best_cv_loss = best_loss;
  result.net = std::move(best);
  return result;
}

void write_train_log(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,lr,train_loss,cv_loss\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", e.epoch, e.lr, e.train_loss, e.cv_loss);
    os << buf;
  }
}

Matrix extract_frame_features(const Network& net, const Matrix& inputs) {
  if (inputs.cols() != net.spec.input_dim) {
    throw ShapeError("extract: input dim " + std::to_string(inputs.cols()) +
                     " does not match network input dim " + std::to_string(net.spec.input_dim));
  }
  ColMatrix h = inputs.transpose();
  for (std::size_t l = 0; l + 1 < net.layers.size(); ++l) {
    ColMatrix z = net.layers[l].weight * h;
    z.colwise() += net.layers[l].bias;
    sigmoid_inplace(z);
    h = std::move(z);
  }
  Matrix out = h.transpose();
  require_finite(out, "frame features");
  return out;
}

namespace {
constexpr std::array<char, 4> kModelMagic = {'D', 'V', 'M', '1'};
}

void save_model(std::ostream& os, const Network& net) {
  os.write(kModelMagic.data(), kModelMagic.size());
  io::write_u32(os, kModelVersion);
  const char flag = net.spec.phone_dependent() ? 1 : 0;
  os.write(&flag, 1);
  io::write_u32(os, static_cast<std::uint32_t>(net.spec.posterior_dim));
  io::write_u32(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    io::write_u32(os, static_cast<std::uint32_t>(l.weight.rows()));
    io::write_u32(os, static_cast<std::uint32_t>(l.weight.cols()));
  }
  for (const auto& l : net.layers) {
    require_finite(l.weight, "model weights");
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
        io::write_f32(os, static_cast<float>(l.weight(i, j)));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) io::write_f32(os, static_cast<float>(l.bias(i)));
  }
  if (!os) throw DataError("failed writing model");
}

void save_model(const std::filesystem::path& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PathError("cannot open for writing: " + path.string());
  save_model(os, net);
}

Network load_model(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kModelMagic) {
    throw FormatError("not a DVM1 model file (bad magic)");
  }
  if (io::read_u32(is) != kModelVersion) throw FormatError("unsupported model version");
  char flag = 0;
  if (!is.read(&flag, 1)) throw FormatError("model truncated");
  const auto posterior_dim = io::read_u32(is);
  if ((flag != 0) != (posterior_dim > 0)) throw FormatError("model flag and posterior dim disagree");
  const auto n_layers = io::read_u32(is);
  if (n_layers < 2) throw FormatError("model needs at least one hidden layer");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes(n_layers);
  for (auto& s : shapes) {
    s.first = io::read_u32(is);
    s.second = io::read_u32(is);
  }
  Network net;
  net.spec.input_dim = static_cast<int>(shapes.front().second);
  net.spec.output_dim = static_cast<int>(shapes.back().first);
  net.spec.posterior_dim = static_cast<int>(posterior_dim);
  net.spec.hidden_dims.clear();
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    if (l > 0 && shapes[l].second != shapes[l - 1].first) throw FormatError("model layer shapes do not chain");
    if (l + 1 < n_layers) net.spec.hidden_dims.push_back(static_cast<int>(shapes[l].first));
  }
  net.spec.validate();
  for (const auto& [rows, cols] : shapes) {
    Layer layer{ColMatrix(rows, cols), Vector(rows)};
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) layer.weight(i, j) = io::read_f32(is);
    for (std::uint32_t i = 0; i < rows; ++i) layer.bias(i) = io::read_f32(is);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Network load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PathError("cannot open model: " + path.string());
  return load_model(is);
}

}  // namespace dvector::nnet
