#include "splinestroke/vae/trajvae.hpp"

#include "splinestroke/grad/ops.hpp"
#include "splinestroke/grad/optim.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace splinestroke::vae {

namespace g = grad;
using Index = Eigen::Index;
using nlohmann::json;

namespace {

g::Buffer xavier(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  g::Buffer b(static_cast<Index>(in * out));
  for (auto& v : b) v = u(rng);
  return b;
}

}  // namespace

TrajVae::TrajVae(std::size_t n, std::vector<std::size_t> hidden_sizes, std::uint64_t seed)
    : n_(n), hidden_(std::move(hidden_sizes)) {
  if (n < 2) throw VaeError("TrajVae: n must be at least 2");
  if (hidden_.empty()) throw VaeError("TrajVae: need at least one hidden layer");
  std::mt19937_64 rng(seed);
  auto dense = [&](std::size_t in, std::size_t out) {
    return Dense{Tensor({in, out}, xavier(in, out, rng), true), Tensor::zeros({out}, true)};
  };
  std::size_t width = 2 * n;
  for (std::size_t h : hidden_) {
    encoder_.push_back(dense(width, h));
    width = h;
  }
  mu_head_ = dense(width, kLatentDim);
  logvar_head_ = dense(width, kLatentDim);
  width = kLatentDim;
  for (auto it = hidden_.rbegin(); it != hidden_.rend(); ++it) {
    decoder_.push_back(dense(width, *it));
    width = *it;
  }
  decoder_.push_back(dense(width, 2 * n));
}

Tensor TrajVae::apply(const Dense& layer, const Tensor& x) { return g::matmul(x, layer.weight) + layer.bias; }

Encoding TrajVae::encode_batch(const Tensor& flat) const {
  if (flat.dim() != 2 || flat.extent(1) != 2 * n_) {
    throw VaeError("encode: expected [B," + std::to_string(2 * n_) + "] input, got " + g::to_string(flat.shape()));
  }
  Tensor h = flat;
  for (const auto& layer : encoder_) h = g::tanh(apply(layer, h));
  return {apply(mu_head_, h), apply(logvar_head_, h)};
}

Encoding TrajVae::encode(const Trajectory& traj) const {
  const Encoding e = encode_batch(flatten({traj}, n_));
  return {g::reshape(e.mu, {kLatentDim}), g::reshape(e.logvar, {kLatentDim})};
}

Tensor TrajVae::decode_batch(const Tensor& z) const {
  if (z.dim() != 2 || z.extent(1) != kLatentDim) throw VaeError("decode: expected [B,64] latents, got " + g::to_string(z.shape()));
  Tensor h = z;
  for (std::size_t i = 0; i + 1 < decoder_.size(); ++i) h = g::tanh(apply(decoder_[i], h));
  return apply(decoder_.back(), h);
}

Tensor TrajVae::decode(const Tensor& z) const {
  if (z.size() != kLatentDim) throw VaeError("decode: latent must have 64 entries, got " + g::to_string(z.shape()));
  const Tensor xy = g::reshape(decode_batch(g::reshape(z, {1, kLatentDim})), {n_, 2});
  return g::concat({xy, Tensor::zeros({n_, 1})}, 1);
}

Trajectory TrajVae::decode_trajectory(const Eigen::VectorXd& z) const {
  g::NoGradGuard ng;
  const Tensor t = decode(Tensor::vector(z));
  Trajectory out;
  out.points = Eigen::Map<const trajectory::Points>(t.value().data(), static_cast<Index>(n_), 3);
  return out;
}

std::vector<Tensor> TrajVae::parameters() const {
  std::vector<Tensor> out;
  auto add = [&](const Dense& d) {
    out.push_back(d.weight);
    out.push_back(d.bias);
  };
  for (const auto& d : encoder_) add(d);
  add(mu_head_);
  add(logvar_head_);
  for (const auto& d : decoder_) add(d);
  return out;
}

g::NamedTensors TrajVae::state() const {
  g::NamedTensors out;
  auto add = [&](const std::string& name, const Dense& d) {
    out[name + ".weight"] = d.weight;
    out[name + ".bias"] = d.bias;
  };
  for (std::size_t i = 0; i < encoder_.size(); ++i) add("encoder." + std::to_string(i), encoder_[i]);
  add("mu", mu_head_);
  add("logvar", logvar_head_);
  for (std::size_t i = 0; i < decoder_.size(); ++i) add("decoder." + std::to_string(i), decoder_[i]);
  return out;
}

TrajVae TrajVae::clone() const {
  TrajVae copy = *this;
  auto deep = [](Dense& d) {
    d.weight = d.weight.clone();
    d.bias = d.bias.clone();
    d.weight.set_requires_grad(true);
    d.bias.set_requires_grad(true);
  };
  for (auto& d : copy.encoder_) deep(d);
  deep(copy.mu_head_);
  deep(copy.logvar_head_);
  for (auto& d : copy.decoder_) deep(d);
  return copy;
}

void TrajVae::save(const std::filesystem::path& path) const {
  json doc = {{"header", {{"n", n_}, {"hidden_sizes", hidden_}, {"latent_dim", kLatentDim}}},
              {"tensors", g::to_json(state())}};
  std::ofstream os(path);
  if (!os) throw VaeError("cannot open " + path.string() + " for writing");
  os << doc.dump() << '\n';
}

TrajVae TrajVae::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw VaeError("cannot open VAE checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const std::exception& e) {
    throw VaeError("VAE checkpoint " + path.string() + ": " + e.what());
  }
  if (!doc.contains("header") || !doc.contains("tensors")) throw VaeError("VAE checkpoint lacks header or tensors");
  const auto& header = doc["header"];
  if (header.value("latent_dim", std::size_t{0}) != kLatentDim) throw VaeError("VAE checkpoint: latent_dim must be 64");
  TrajVae model(header.at("n").get<std::size_t>(), header.at("hidden_sizes").get<std::vector<std::size_t>>());
  const g::NamedTensors stored = g::from_json(doc["tensors"]);
  g::NamedTensors target = model.state();
  if (stored.size() != target.size()) throw VaeError("VAE checkpoint: tensor count mismatch");
  for (auto& [name, tensor] : target) {
    const auto it = stored.find(name);
    if (it == stored.end()) throw VaeError("VAE checkpoint: missing tensor '" + name + "'");
    if (it->second.shape() != tensor.shape()) throw VaeError("VAE checkpoint: shape mismatch for '" + name + "'");
    tensor.mutable_value() = it->second.value();
  }
  return model;
}

Tensor flatten(const std::vector<Trajectory>& batch, std::size_t n) {
  g::Buffer b(static_cast<Index>(batch.size() * 2 * n));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i].points;
    if (static_cast<std::size_t>(p.rows()) != n) {
      throw VaeError("trajectory " + std::to_string(i) + " has " + std::to_string(p.rows()) + " points, expected " +
                     std::to_string(n));
    }
    for (std::size_t k = 0; k < n; ++k) {
      b[static_cast<Index>((i * n + k) * 2)] = p(static_cast<Index>(k), 0);
      b[static_cast<Index>((i * n + k) * 2 + 1)] = p(static_cast<Index>(k), 1);
    }
  }
  return Tensor({batch.size(), 2 * n}, std::move(b));
}

Tensor sample_latent(const Tensor& mu, const Tensor& logvar, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  g::Buffer eps(static_cast<Index>(mu.size()));
  for (auto& v : eps) v = normal(rng);
  return mu + g::exp(0.5 * logvar) * Tensor(mu.shape(), std::move(eps));
}

Tensor kl_divergence(const Tensor& mu, const Tensor& logvar) {
  return -0.5 * g::mean(1.0 + logvar - g::square(mu) - g::exp(logvar));
}

namespace {

void check_dataset(const std::vector<Trajectory>& dataset, std::size_t n) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (static_cast<std::size_t>(dataset[i].points.rows()) != n) {
      throw VaeError("inconsistent point count: trajectory " + std::to_string(i) + " has " +
                     std::to_string(dataset[i].points.rows()) + ", expected " + std::to_string(n));
    }
  }
}

void run_training(TrajVae& model, const std::vector<Trajectory>& dataset, const VaeTrainConfig& config,
                  VaeTrainReport* report) {
  if (config.batch_size == 0) throw VaeError("batch_size must be positive");
  const std::size_t n = model.n();
  const Tensor all = flatten(dataset, n);
  g::Adam adam(g::AdamOptions{config.lr});
  adam.add(model.parameters());
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  auto& tape = g::Tape::current();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::size_t rows = stop - start;
      g::Buffer xb(static_cast<Index>(rows * 2 * n));
      for (std::size_t r = 0; r < rows; ++r) {
        xb.segment(static_cast<Index>(r * 2 * n), static_cast<Index>(2 * n)) =
            all.value().segment(static_cast<Index>(order[start + r] * 2 * n), static_cast<Index>(2 * n));
      }
      const Tensor x({rows, 2 * n}, std::move(xb));
      tape.clear();
      adam.zero_grad();
      const Encoding e = model.encode_batch(x);
      const Tensor z = sample_latent(e.mu, e.logvar, rng);
      const Tensor loss = g::mean(g::square(model.decode_batch(z) - x)) + config.kl_weight * kl_divergence(e.mu, e.logvar);
      total += loss.item() * static_cast<double>(rows);
      g::backward(loss);
      adam.step();
    }
    tape.clear();
    const double mean = total / static_cast<double>(dataset.size());
    if (!std::isfinite(mean)) throw VaeError("training diverged at epoch " + std::to_string(epoch));
    if (report) report->epoch_losses.push_back(mean);
    if (config.on_epoch) config.on_epoch(epoch, mean);
  }
}

}  // namespace

TrajVae train_vae(const std::vector<Trajectory>& dataset, const VaeTrainConfig& config, VaeTrainReport* report) {
  if (dataset.empty()) throw VaeError("train_vae: empty dataset");
  const std::size_t n = static_cast<std::size_t>(dataset.front().points.rows());
  check_dataset(dataset, n);
  TrajVae model(n, config.hidden_sizes, config.seed);
  run_training(model, dataset, config, report);
  return model;
}

TrajVae finetune(const TrajVae& model, const std::vector<Trajectory>& dataset, const VaeTrainConfig& config,
                 VaeTrainReport* report) {
  if (dataset.empty()) throw VaeError("finetune: empty dataset");
  check_dataset(dataset, model.n());
  TrajVae tuned = model.clone();
  run_training(tuned, dataset, config, report);
  return tuned;
}

double reconstruction_mse(const TrajVae& model, const std::vector<Trajectory>& dataset) {
  if (dataset.empty()) throw VaeError("reconstruction_mse: empty dataset");
  g::NoGradGuard ng;
  const Tensor x = flatten(dataset, model.n());
  const Tensor recon = model.decode_batch(model.encode_batch(x).mu);
  // squared error summed over (x, y), averaged over points
  return (recon.value() - x.value()).square().sum() / static_cast<double>(dataset.size() * model.n());
}

}  // namespace splinestroke::vae
