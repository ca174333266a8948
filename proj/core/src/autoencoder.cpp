#include "eids/autoencoder.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace eids {

namespace {

template <typename Derived>
void activate_inplace(Eigen::MatrixBase<Derived>& z, Activation act) {
  switch (act) {
    case Activation::kSigmoid:
      z = (1.0 + (-z.array()).exp()).inverse().matrix();
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kLinear:
      break;
  }
}

// Derivative with respect to the pre-activation, expressed through the
// activation output `a`.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& a, Activation act) {
  switch (act) {
    case Activation::kSigmoid:
      return (a.array() * (1.0 - a.array())).matrix();
    case Activation::kRelu:
      return (a.array() > 0.0).cast<double>().matrix();
    case Activation::kLinear:
      break;
  }
  return Eigen::MatrixXd::Ones(a.rows(), a.cols());
}

// Column-major activations per layer; acts[0] is the transposed input batch.
std::vector<Eigen::MatrixXd> forward_batch(const AeParams& p, const Matrix& X, std::size_t last_layer) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(last_layer + 1);
  acts.emplace_back(X.transpose());
  for (std::size_t l = 0; l < last_layer; ++l) {
    const auto& layer = p.layers[l];
    Eigen::MatrixXd z = layer.W * acts.back();
    z.colwise() += layer.b;
    activate_inplace(z, p.arch.activations[l]);
    acts.push_back(std::move(z));
  }
  return acts;
}

void check_width(const AeParams& p, Eigen::Index cols) {
  if (cols != p.arch.input_width()) {
    throw DataError(fmt::format("autoencoder: input has {} features, model expects {}", cols, p.arch.input_width()));
  }
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0xAEu};
  return std::mt19937_64(seq);
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kRelu:
      return "relu";
    case Activation::kLinear:
      return "linear";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "relu") return Activation::kRelu;
  if (s == "linear") return Activation::kLinear;
  throw UsageError(fmt::format("unknown activation '{}'", s));
}

AeArchitecture AeArchitecture::symmetric(int input, std::vector<int> hidden, int bottleneck, Activation act) {
  AeArchitecture a;
  a.widths = {input};
  a.widths.insert(a.widths.end(), hidden.begin(), hidden.end());
  a.widths.push_back(bottleneck);
  a.widths.insert(a.widths.end(), hidden.rbegin(), hidden.rend());
  a.widths.push_back(input);
  a.activations.assign(a.widths.size() - 1, act);
  return a;
}

std::size_t AeArchitecture::bottleneck_index() const {
  std::size_t best = 1;
  for (std::size_t i = 2; i + 1 < widths.size(); ++i) {
    if (widths[i] < widths[best]) best = i;
  }
  return best;
}

void AeArchitecture::validate() const {
  if (widths.size() < 3) throw UsageError("autoencoder: need at least 3 layers");
  if (activations.size() != widths.size() - 1) throw UsageError("autoencoder: one activation per non-input layer");
  for (int w : widths) {
    if (w <= 0) throw UsageError("autoencoder: layer widths must be positive");
  }
  if (!std::equal(widths.begin(), widths.end(), widths.rbegin())) {
    throw UsageError("autoencoder: layer widths must be symmetric around the bottleneck");
  }
  if (*std::min_element(widths.begin(), widths.end()) != bottleneck_width()) {
    throw UsageError("autoencoder: the bottleneck must be the narrowest layer");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw UsageError("train: learning_rate must be nonnegative");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) throw UsageError("train: Adam betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw UsageError("train: epsilon must be positive");
  if (batch_size == 0 || max_epochs == 0 || patience == 0) {
    throw UsageError("train: batch_size, max_epochs and patience must be positive");
  }
}

AdamState AdamState::zeros_like(const AeParams& p) {
  AdamState s;
  for (const auto& l : p.layers) {
    s.m.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()), Eigen::VectorXd::Zero(l.b.size())});
  }
  s.v = s.m;
  return s;
}

void AeTrainRecord::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out << fmt::format("{},{:.17g},{:.17g}\n", e + 1, train_loss[e], val_loss[e]);
  }
}

AeParams init_params(const AeArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  AeParams p;
  p.arch = arch;
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    const int fan_in = arch.widths[l];
    const int fan_out = arch.widths[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    LayerParams layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    // Row-major fill order so the draw sequence does not depend on Eigen's storage.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.W(r, c) = dist(rng);
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Forward forward(const AeParams& params, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(params.arch.input_width())) {
    throw DataError(fmt::format("forward: input has {} features, model expects {}", x.size(),
                                params.arch.input_width()));
  }
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  Forward out;
  const std::size_t bottleneck_layer = params.arch.bottleneck_index() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Eigen::VectorXd z = params.layers[l].W * a + params.layers[l].b;
    activate_inplace(z, params.arch.activations[l]);
    a = std::move(z);
    if (l == bottleneck_layer) out.latent = a;
  }
  out.reconstruction = std::move(a);
  return out;
}

double weighted_mse(const Matrix& x, const Matrix& x_hat, std::span<const double> w) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) throw DataError("weighted_mse: shape mismatch");
  if (static_cast<std::size_t>(x.rows()) != w.size()) throw DataError("weighted_mse: one weight per row required");
  if (x.rows() == 0) throw DataError("weighted_mse: empty batch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double wi = w[static_cast<std::size_t>(i)];
    if (!(wi > 0.0)) throw DataError(fmt::format("weighted_mse: nonpositive weight {} at row {}", wi, i));
    total += wi * (x.row(i) - x_hat.row(i)).squaredNorm() / static_cast<double>(x.cols());
  }
  return total / static_cast<double>(x.rows());
}

Matrix reconstruct(const AeParams& params, const Matrix& X) {
  check_width(params, X.cols());
  const auto acts = forward_batch(params, X, params.layers.size());
  return acts.back().transpose();
}

Gradients backward(const AeParams& params, const Matrix& X, std::span<const double> w, double* loss) {
  check_width(params, X.cols());
  if (X.rows() == 0) throw DataError("backward: empty batch");
  if (static_cast<std::size_t>(X.rows()) != w.size()) throw DataError("backward: one weight per row required");
  const auto acts = forward_batch(params, X, params.layers.size());
  const auto n = static_cast<double>(X.rows());
  const auto f = static_cast<double>(X.cols());

  const Eigen::Map<const Eigen::RowVectorXd> wrow(w.data(), static_cast<Eigen::Index>(w.size()));
  Eigen::MatrixXd diff = acts.back() - acts.front();  // features x batch
  if (loss != nullptr) *loss = (diff.colwise().squaredNorm().array() * wrow.array()).sum() / (n * f);

  // dL/dxhat
  Eigen::MatrixXd upstream = (diff.array().rowwise() * wrow.array()).matrix() * (2.0 / (n * f));
  Gradients grads(params.layers.size());
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    Eigen::MatrixXd delta = upstream.cwiseProduct(activation_grad(acts[l + 1], params.arch.activations[l]));
    grads[l].W = delta * acts[l].transpose();
    grads[l].b = delta.rowwise().sum();
    if (l > 0) upstream = params.layers[l].W.transpose() * delta;
  }
  return grads;
}

void adam_step(AeParams& params, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    update(params.layers[l].W, grads[l].W, state.m[l].W, state.v[l].W);
    update(params.layers[l].b, grads[l].b, state.m[l].b, state.v[l].b);
  }
}

TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const ClassWeights& weights,
                  const AeArchitecture& arch, const TrainConfig& cfg) {
  cfg.validate();
  arch.validate();
  if (train_ds.rows() == 0 || val_ds.rows() == 0) throw DataError("train: empty training or validation set");

  auto row_weights = [&](const Dataset& ds) {
    std::vector<double> w;
    w.reserve(ds.rows());
    for (int c : ds.y) {
      if (c < 0 || static_cast<std::size_t>(c) >= weights.size()) {
        throw DataError(fmt::format("train: no class weight for class code {}", c));
      }
      w.push_back(weights[c]);
    }
    return w;
  };
  const auto w_train = row_weights(train_ds);
  const auto w_val = row_weights(val_ds);

  AeParams params = init_params(arch, cfg.seed);
  check_width(params, train_ds.X.cols());
  check_width(params, val_ds.X.cols());
  AdamState adam = AdamState::zeros_like(params);

  TrainResult result{params, {}};
  double best_val = std::numeric_limits<double>::infinity();
  double best_for_patience = best_val;
  std::size_t wait = 0;

  const std::size_t n = train_ds.rows();
  std::vector<std::size_t> order(n);
  Matrix batch;
  std::vector<double> batch_w;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    auto rng = epoch_rng(cfg.seed, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      batch.resize(static_cast<Eigen::Index>(len), train_ds.X.cols());
      batch_w.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        batch.row(static_cast<Eigen::Index>(i)) = train_ds.X.row(static_cast<Eigen::Index>(order[start + i]));
        batch_w[i] = w_train[order[start + i]];
      }
      double loss = 0.0;
      const auto grads = backward(params, batch, batch_w, &loss);
      adam_step(params, grads, adam, cfg);
      epoch_loss += loss * static_cast<double>(len);
    }
    epoch_loss /= static_cast<double>(n);

    const double val_loss = weighted_mse(val_ds.X, reconstruct(params, val_ds.X), w_val);
    if (!std::isfinite(epoch_loss) || !std::isfinite(val_loss)) {
      throw NumericError(fmt::format("train: non-finite loss at epoch {}", epoch));
    }
    result.record.train_loss.push_back(epoch_loss);
    result.record.val_loss.push_back(val_loss);

    if (val_loss < best_val) {
      best_val = val_loss;
      result.best = params;
      result.record.best_epoch = epoch;
    }
    if (val_loss < best_for_patience - cfg.min_delta) {
      best_for_patience = val_loss;
      wait = 0;
    } else if (++wait >= cfg.patience) {
      break;
    }
  }
  return result;
}

Matrix encode(const AeParams& params, const Matrix& X) {
  check_width(params, X.cols());
  const auto acts = forward_batch(params, X, params.arch.bottleneck_index());
  return acts.back().transpose();
}

RowEncoder::RowEncoder(const AeParams& params) : params_(&params) {
  const std::size_t bottleneck = params.arch.bottleneck_index();
  for (std::size_t i = 1; i <= bottleneck; ++i) scratch_.emplace_back(params.arch.widths[i]);
}

void RowEncoder::encode(std::span<const double> x, std::span<double> latent) {
  const Eigen::Map<const Eigen::VectorXd> in(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < scratch_.size(); ++l) {
    auto& out = scratch_[l];
    if (l == 0) {
      out.noalias() = params_->layers[l].W * in;
    } else {
      out.noalias() = params_->layers[l].W * scratch_[l - 1];
    }
    out += params_->layers[l].b;
    activate_inplace(out, params_->arch.activations[l]);
  }
  std::copy(scratch_.back().begin(), scratch_.back().end(), latent.begin());
}

}  // namespace eids
