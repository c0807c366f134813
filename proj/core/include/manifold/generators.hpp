#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "manifold/diffmap.hpp"
#include "manifold/rng.hpp"

namespace manifold {

enum class LatentKind { gaussian, truncated_gaussian };

struct LatentDistribution {
  LatentKind kind = LatentKind::gaussian;
  double limit = 2.0;  // truncated_gaussian only
};

// Everything needed to rebuild a generator bit-identically: architecture,
// shapes, init seed, latent distribution. Weights are drawn layer by layer
// from seeds derived as mix_seed(init_seed, layer_index), scaled normal with
// 1/sqrt(fan_in) std; bias tensors start at zero.
struct GeneratorSpec {
  std::vector<LayerSpec> architecture;
  int latent_dim = 0;
  std::vector<int> output_shape;  // {M} or (C,H,W)
  std::uint64_t init_seed = 0;
  LatentDistribution latent;

  void validate() const;
};

DiffMap build_generator(const GeneratorSpec& spec);

// Per-tensor seeded permutation of every weight tensor's entries. Shapes and
// per-tensor value multisets are preserved.
WeightStore shuffle_weights(const WeightStore& store, std::uint64_t seed);

// Applies the inverse of the permutation shuffle_weights(seed) used,
// restoring the original store bit-exactly.
WeightStore unshuffle_weights(const WeightStore& store, std::uint64_t seed);

std::vector<Vec> sample_latent(const GeneratorSpec& spec, std::uint64_t rng_seed, int count);

// Parametric image family: a single isotropic Gaussian bump
// a * exp(-((px-x)^2 + (py-y)^2) / (2 sigma^2)) on an h x w canvas.
// Parameters embed linearly into the first four latent coordinates.
struct BlobFamily {
  int height = 16;
  int width = 16;
  double cx_mid = 8.0, cx_half = 3.0;
  double cy_mid = 8.0, cy_half = 3.0;
  double sigma_mid = 2.4, sigma_half = 0.8;
  double amp_mid = 0.8, amp_half = 0.2;

  struct Params {
    double cx, cy, sigma, amp;
  };

  int pixels() const { return height * width; }

  Params params_from_latent(const Vec& z) const;
  Vec latent_from_params(const Params& p, int latent_dim) const;

  Vec render(const Params& p) const;

  // Analytic derivative images with respect to cx, cy, sigma, amp.
  std::array<Vec, 4> param_derivatives(const Params& p) const;

  void validate() const;
};

struct TrainConfig {
  int dataset_size = 384;
  int holdout_size = 128;
  int batch_size = 32;
  int max_epochs = 900;
  double target_loss = 5e-4;  // mean per-pixel squared error on the train set
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double nuisance_std = 1.0;  // latent coords beyond the first four during training
  std::uint64_t seed = 2024;
};

struct TrainResult {
  DiffMap map;
  double final_train_mse = 0.0;
  double holdout_mse = 0.0;
  int epochs = 0;
};

class TrainError : public Error {
 public:
  TrainError(double final_loss, const std::string& msg)
      : Error(ErrorKind::training, msg), final_loss_(final_loss) {}
  double final_loss() const { return final_loss_; }

 private:
  double final_loss_;
};

// Trains `arch` by Adam to reconstruct family images from parameter
// embeddings (first four latent coordinates) with nuisance noise on the rest.
// Deterministic given cfg.seed; throws TrainError if the loss target is not
// reached within max_epochs. max_epochs == 0 returns the untrained decoder.
TrainResult train_blob_decoder(const BlobFamily& family, const GeneratorSpec& arch,
                               const TrainConfig& cfg);

// ---- .gmw weight files ------------------------------------------------
// 8-byte magic "GMWv0001", u64 little-endian JSON header length, UTF-8 JSON
// header (spec, seeds, tensor directory with offsets), raw little-endian
// IEEE-754 f64 payloads in directory order.

void save_gmw(const std::string& path, const GeneratorSpec& spec, const WeightStore& store);

struct GmwFile {
  GeneratorSpec spec;
  std::shared_ptr<WeightStore> store;
};

GmwFile load_gmw(const std::string& path);

// ---- built-in generators ----------------------------------------------
// linear32  seeded dense map, n=8 -> 32
// ortho8    orthogonal dense map, n=8 -> 8 (isotropic geometry control)
// mlp16     tanh MLP, n=16 -> 96
// deconv8   transposed-conv image generator, n=8 -> 16x16
// blob16    decoder trained on the blob family, n=16 -> 16x16 (cached)

std::vector<std::string> builtin_generator_names();
GeneratorSpec builtin_generator_spec(const std::string& name);
const DiffMap& builtin_generator(const std::string& name);
const BlobFamily& builtin_blob_family();
const TrainConfig& builtin_blob_train_config();

}  // namespace manifold
