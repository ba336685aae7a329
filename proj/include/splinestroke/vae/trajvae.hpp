#pragma once

#include "splinestroke/grad/checkpoint.hpp"
#include "splinestroke/trajectory/trajectory.hpp"

#include <filesystem>
#include <functional>
#include <random>
#include <vector>

namespace splinestroke::vae {

using grad::Tensor;
using trajectory::Trajectory;

inline constexpr std::size_t kLatentDim = 64;

/// Raised for malformed inputs and checkpoints.
class VaeError : public Error {
 public:
  using Error::Error;
};

struct Encoding {
  Tensor mu;      ///< [64], or [B,64] for batches
  Tensor logvar;  ///< same shape as mu
};

/// MLP variational autoencoder over the planar part of n-point
/// trajectories. Encoder 2n -> hidden... -> (mu, logvar); decoder mirrors
/// it. tanh on hidden layers, linear outputs.
class TrajVae {
 public:
  TrajVae(std::size_t n, std::vector<std::size_t> hidden_sizes = {256, 128}, std::uint64_t seed = 0);

  std::size_t n() const { return n_; }
  const std::vector<std::size_t>& hidden_sizes() const { return hidden_; }

  /// Rows of `flat` [B,2n] are trajectories as x0,y0,x1,y1,...
  Encoding encode_batch(const Tensor& flat) const;
  Encoding encode(const Trajectory& traj) const;
  /// [B,64] -> [B,2n]
  Tensor decode_batch(const Tensor& z) const;
  /// [64] -> [n,3] with zero heights; differentiable w.r.t. z and weights.
  Tensor decode(const Tensor& z) const;
  Trajectory decode_trajectory(const Eigen::VectorXd& z) const;

  std::vector<Tensor> parameters() const;
  grad::NamedTensors state() const;
  TrajVae clone() const;

  void save(const std::filesystem::path& path) const;
  static TrajVae load(const std::filesystem::path& path);

 private:
  struct Dense {
    Tensor weight;  // [in,out]
    Tensor bias;    // [out]
  };
  TrajVae() = default;
  static Tensor apply(const Dense& layer, const Tensor& x);

  std::size_t n_ = 0;
  std::vector<std::size_t> hidden_;
  std::vector<Dense> encoder_;
  Dense mu_head_, logvar_head_;
  std::vector<Dense> decoder_;
};

/// [B,2n] batch from the (x, y) columns; every trajectory must have n points.
Tensor flatten(const std::vector<Trajectory>& batch, std::size_t n);

/// z = mu + exp(logvar / 2) * eps, eps ~ N(0, I).
Tensor sample_latent(const Tensor& mu, const Tensor& logvar, std::mt19937_64& rng);

/// KL(N(mu, exp(logvar)) || N(0, I)) per latent dimension, averaged over
/// dimensions and rows (the same normalization as the per-element MSE).
Tensor kl_divergence(const Tensor& mu, const Tensor& logvar);

struct VaeTrainConfig {
  std::size_t epochs = 1000;
  double lr = 1e-3;
  double kl_weight = 1e-2;
  std::vector<std::size_t> hidden_sizes = {256, 128};
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

struct VaeTrainReport {
  std::vector<double> epoch_losses;  ///< mean objective per epoch
};

TrajVae train_vae(const std::vector<Trajectory>& dataset, const VaeTrainConfig& config, VaeTrainReport* report = nullptr);
/// Continues training a copy of `model`; hidden_sizes in `config` are ignored.
TrajVae finetune(const TrajVae& model, const std::vector<Trajectory>& dataset, const VaeTrainConfig& config,
                 VaeTrainReport* report = nullptr);

/// Mean over trajectories and points of the squared planar error between
/// each trajectory and decode(mu(trajectory)).
double reconstruction_mse(const TrajVae& model, const std::vector<Trajectory>& dataset);

}  // namespace splinestroke::vae
