#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graphfolio/netfilter.hpp"

namespace graphfolio {

enum class Mode { train, infer };

struct GatHyper {
  int K = 8;         // attention heads
  int Tprime = 24;   // per-head output width
  int d1 = 64;       // hidden width of the first dense block
  double dropout = 0.2;
  double l1 = 1e-4;  // L1 coefficient on the final dense weights
  double leaky_slope = 0.2;
};

struct GatParams {
  GatHyper hyper;
  int T = 0;                         // feature length the shapes are bound to
  std::vector<Eigen::MatrixXd> W;    // K matrices, T' x T
  std::vector<Eigen::VectorXd> a;    // K attention vectors, length 2T'
  Eigen::MatrixXd W1;                // d1 x K*T'
  Eigen::VectorXd b1;                // d1
  Eigen::MatrixXd W2;                // 1 x d1
  Eigen::VectorXd b2;                // 1
  Eigen::VectorXd norm_mean;         // K*T', running stats for inference
  Eigen::VectorXd norm_var;
};

struct GatGrads {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> a;
  Eigen::MatrixXd W1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;
  Eigen::VectorXd b2;
};

struct PortfolioWeights {
  Date as_of = 0;
  std::vector<std::string> firms;
  Eigen::VectorXd weights;
  bool fallback_equal = false;  // all-zero scores fell back to equal weights
  bool guarded = false;         // a strategy patched degenerate inputs
};

GatParams gat_init(const GatHyper& hyper, int T, uint64_t seed);

// Multi-head attention layer: per head, softmax attention over each node's
// neighbors plus itself, weighted sum of the projected features, ReLU, then
// heads concatenated into an n x K*T' matrix. Deterministic in both modes.
Eigen::MatrixXd gat_forward(const GatParams& params, const Eigen::MatrixXd& X,
                            const FilteredGraph& g, Mode mode);

// Normalized coefficients of one head; entry u lists the coefficients over
// the sorted neighborhood of u (self included), summing to 1.
std::vector<std::vector<double>> attention_coefficients(
    const GatParams& params, int head, const Eigen::MatrixXd& X,
    const FilteredGraph& g);

// Batch norm over nodes -> dense -> ReLU -> dropout (train only, seeded) ->
// dense -> ReLU. Output is the non-negative score vector.
Eigen::VectorXd dense_blocks_forward(const GatParams& params,
                                     const Eigen::MatrixXd& H, Mode mode,
                                     uint64_t dropout_seed = 0);

// Rescales non-negative scores onto the simplex; exact zeros survive. An
// all-zero score vector falls back to equal weights and sets the flag.
PortfolioWeights allocation_layer(const Eigen::VectorXd& s2);

// -ln(mean) + ln(std) of the daily portfolio return over the window, plus the
// caller's L1 penalty. A non-positive mean switches to the differentiable
// substitute -mean/std + 1 and reports it via *surrogate.
double sharpe_loss(const Eigen::VectorXd& w,
                   const Eigen::MatrixXd& window_returns,
                   double l1_penalty = 0.0, bool* surrogate = nullptr);

struct LossResult {
  double loss = 0.0;
  Eigen::VectorXd weights;
  bool fallback_equal = false;
  bool surrogate = false;
  Eigen::VectorXd batch_mean;  // train-mode batch stats, for running updates
  Eigen::VectorXd batch_var;
};

// Whole pipeline: features -> attention -> dense blocks -> allocation -> loss.
LossResult gat_loss(const GatParams& params, const Eigen::MatrixXd& X,
                    const FilteredGraph& g, const Eigen::MatrixXd& R,
                    Mode mode, uint64_t dropout_seed = 0, bool include_l1 = true);

// Reverse-mode gradients of the train-mode loss for every parameter tensor.
LossResult gat_backward(const GatParams& params, const Eigen::MatrixXd& X,
                        const FilteredGraph& g, const Eigen::MatrixXd& R,
                        uint64_t dropout_seed, GatGrads& grads);

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int max_epochs = 200;
  int patience = 15;
  uint64_t seed = 1;
};

struct TrainState {
  GatParams params;
  GatGrads m;  // Adam first moments
  GatGrads v;  // Adam second moments
  int epoch = 0;
  double best_val_loss = 0.0;
  int patience = 0;
};

struct TrainResult {
  GatParams params;  // best-validation checkpoint
  int best_epoch = 0;
  int epochs_run = 0;
  double best_val_loss = 0.0;
  std::vector<double> train_history;
  std::vector<double> val_history;
  bool early_stopped = false;
  int surrogate_epochs = 0;
};

// Full-batch adaptive-moment descent with early stopping: training stops once
// the validation loss (infer mode, no L1 term) has not improved for
// `patience` consecutive epochs, and the best-validation parameters win.
TrainResult train_gat(const GatParams& init, const Eigen::MatrixXd& X,
                      const FilteredGraph& g, const Eigen::MatrixXd& R_train,
                      const Eigen::MatrixXd& R_val, const TrainConfig& config);

// Binary checkpoint: "GATNET1" magic, shape header, little-endian f64 tensors.
void save_checkpoint(const GatParams& params, const std::string& path);
GatParams load_checkpoint(const std::string& path);

}  // namespace graphfolio
