#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eids/common.hpp"
#include "eids/dataset.hpp"
#include "eids/preprocess.hpp"

namespace eids {

enum class Activation : std::uint8_t { kSigmoid = 0, kRelu = 1, kLinear = 2 };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

// Dense layer widths, input first. activations[l] applies to the output of
// layer l, so there is one fewer activation than widths.
struct AeArchitecture {
  std::vector<int> widths{24, 16, 6, 16, 24};
  std::vector<Activation> activations = std::vector<Activation>(4, Activation::kSigmoid);

  // Symmetric encoder/decoder around `bottleneck` with the given hidden
  // widths on each side, sigmoid everywhere.
  static AeArchitecture symmetric(int input, std::vector<int> hidden, int bottleneck,
                                  Activation act = Activation::kSigmoid);

  void validate() const;
  int input_width() const { return widths.front(); }
  // Index into `widths` of the bottleneck (the narrowest interior layer).
  std::size_t bottleneck_index() const;
  int bottleneck_width() const { return widths[bottleneck_index()]; }
  std::size_t num_layers() const { return widths.size() - 1; }

  bool operator==(const AeArchitecture&) const = default;
};

struct LayerParams {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out

  bool operator==(const LayerParams& o) const { return W == o.W && b == o.b; }
};

struct AeParams {
  AeArchitecture arch;
  std::vector<LayerParams> layers;

  bool operator==(const AeParams&) const = default;
};

using Gradients = std::vector<LayerParams>;

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double min_delta = 1e-5;
  std::uint64_t seed = 42;

  void validate() const;
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const AeParams& p);
};

struct AeTrainRecord {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;  // 1-based

  double best_val_loss() const { return val_loss.at(best_epoch - 1); }
  // Writes "epoch,train_loss,val_loss" rows.
  void save_csv(const std::filesystem::path& path) const;
};

struct Forward {
  Eigen::VectorXd latent;
  Eigen::VectorXd reconstruction;
};

// Glorot-uniform weights, zero biases.
AeParams init_params(const AeArchitecture& arch, std::uint64_t seed);

Forward forward(const AeParams& params, std::span<const double> x);

// (1/N) * sum_i w_i * mean_j (x_ij - xhat_ij)^2
double weighted_mse(const Matrix& x, const Matrix& x_hat, std::span<const double> w);

// Reconstruction of every row of X.
Matrix reconstruct(const AeParams& params, const Matrix& X);

// Loss of weighted_mse(X, reconstruct(X), w) and its exact gradient.
Gradients backward(const AeParams& params, const Matrix& X, std::span<const double> w, double* loss = nullptr);

void adam_step(AeParams& params, const Gradients& grads, AdamState& state, const TrainConfig& cfg);

struct TrainResult {
  AeParams best;
  AeTrainRecord record;
};

// Mini-batch Adam with early stopping on the validation weighted loss.
// Returns the parameters of the best validation epoch.
TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const ClassWeights& weights,
                  const AeArchitecture& arch, const TrainConfig& cfg);

// Bottleneck activations of every row.
Matrix encode(const AeParams& params, const Matrix& X);

// Allocation-free single-row encoder for latency-sensitive paths. Holds
// scratch buffers, so one instance must not be shared across threads.
class RowEncoder {
 public:
  explicit RowEncoder(const AeParams& params);
  void encode(std::span<const double> x, std::span<double> latent);
  std::size_t input_width() const { return static_cast<std::size_t>(params_->arch.input_width()); }
  std::size_t latent_width() const { return static_cast<std::size_t>(params_->arch.bottleneck_width()); }

 private:
  const AeParams* params_;
  std::vector<Eigen::VectorXd> scratch_;
};

}  // namespace eids
