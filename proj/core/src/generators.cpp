#include "manifold/generators.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>

#include <Eigen/Dense>

#include "manifold/spec_json.hpp"

namespace manifold {

void GeneratorSpec::validate() const {
  if (latent_dim < 2) throw Error(ErrorKind::spec, "latent_dim must be >= 2");
  if (output_shape.empty()) throw Error(ErrorKind::spec, "output shape missing");
  Tensor::numel(output_shape);
  if (latent.kind == LatentKind::truncated_gaussian && latent.limit <= 0.0)
    throw Error(ErrorKind::spec, "truncation limit must be positive");
  // Walk the shape chain; throws on incompatibility.
  std::vector<int> shape{latent_dim};
  for (const auto& l : architecture) shape = l.output_shape(shape);
  if (Tensor::numel(shape) != Tensor::numel(output_shape))
    throw Error(ErrorKind::spec, "architecture output " + shape_to_string(shape) +
                                     " does not match declared " +
                                     shape_to_string(output_shape));
}

namespace {

int fan_in(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::dense: return spec.in_dim;
    case LayerKind::transposed_conv2d: return spec.in_ch * spec.kernel * spec.kernel;
    default: return 1;
  }
}

Tensor init_weight(const LayerSpec& spec, std::uint64_t layer_seed) {
  const std::vector<int> shape = spec.weight_shape();
  const Eigen::Index n = Tensor::numel(shape);
  if (spec.kind == LayerKind::bias) return Tensor(shape, Vec::Zero(n));
  Rng rng(layer_seed);
  const double std = 1.0 / std::sqrt(static_cast<double>(fan_in(spec)));
  Vec data(n);
  for (Eigen::Index i = 0; i < n; ++i) data[i] = std * rng.normal();
  return Tensor(shape, std::move(data));
}

}  // namespace

DiffMap build_generator(const GeneratorSpec& spec) {
  spec.validate();
  auto store = std::make_shared<WeightStore>();
  for (std::size_t i = 0; i < spec.architecture.size(); ++i) {
    const auto& layer = spec.architecture[i];
    if (!layer.has_weights()) continue;
    WeightEntry e;
    e.layer = static_cast<int>(i);
    e.name = layer.kind_name();
    e.tensor = init_weight(layer, mix_seed(spec.init_seed, i));
    store->entries.push_back(std::move(e));
  }
  return DiffMap(spec.architecture, store, {spec.latent_dim});
}

WeightStore shuffle_weights(const WeightStore& store, std::uint64_t seed) {
  WeightStore out;
  out.entries.reserve(store.entries.size());
  for (std::size_t i = 0; i < store.entries.size(); ++i) {
    const auto& e = store.entries[i];
    Rng rng(mix_seed(seed, i));
    const auto perm = rng.permutation(static_cast<std::size_t>(e.tensor.size()));
    Vec data(e.tensor.size());
    for (Eigen::Index j = 0; j < e.tensor.size(); ++j)
      data[j] = e.tensor.data[static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)])];
    out.entries.push_back({e.layer, e.name, Tensor(e.tensor.shape, std::move(data))});
  }
  return out;
}

WeightStore unshuffle_weights(const WeightStore& store, std::uint64_t seed) {
  WeightStore out;
  out.entries.reserve(store.entries.size());
  for (std::size_t i = 0; i < store.entries.size(); ++i) {
    const auto& e = store.entries[i];
    Rng rng(mix_seed(seed, i));
    const auto perm = rng.permutation(static_cast<std::size_t>(e.tensor.size()));
    Vec data(e.tensor.size());
    for (Eigen::Index j = 0; j < e.tensor.size(); ++j)
      data[static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)])] = e.tensor.data[j];
    out.entries.push_back({e.layer, e.name, Tensor(e.tensor.shape, std::move(data))});
  }
  return out;
}

std::vector<Vec> sample_latent(const GeneratorSpec& spec, std::uint64_t rng_seed, int count) {
  if (count < 1) throw Error(ErrorKind::argument, "sample count must be >= 1");
  Rng rng(rng_seed);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    Vec z(spec.latent_dim);
    for (int i = 0; i < spec.latent_dim; ++i) {
      double x = rng.normal();
      if (spec.latent.kind == LatentKind::truncated_gaussian) {
        while (std::abs(x) > spec.latent.limit) x = rng.normal();
      }
      z[i] = x;
    }
    out.push_back(std::move(z));
  }
  return out;
}

// ---- blob family --------------------------------------------------------

void BlobFamily::validate() const {
  if (height <= 0 || width <= 0) throw Error(ErrorKind::spec, "blob canvas must be positive");
  if (sigma_mid - sigma_half <= 0.0) throw Error(ErrorKind::spec, "blob sigma range must stay positive");
  if (amp_mid - amp_half <= 0.0) throw Error(ErrorKind::spec, "blob amplitude range must stay positive");
  if (cx_mid - cx_half < 0.0 || cx_mid + cx_half > width || cy_mid - cy_half < 0.0 ||
      cy_mid + cy_half > height)
    throw Error(ErrorKind::spec, "blob centers must stay inside the image");
}

BlobFamily::Params BlobFamily::params_from_latent(const Vec& z) const {
  if (z.size() < 4) throw Error(ErrorKind::argument, "blob latent needs >= 4 coordinates");
  return {cx_mid + cx_half * z[0], cy_mid + cy_half * z[1], sigma_mid + sigma_half * z[2],
          amp_mid + amp_half * z[3]};
}

Vec BlobFamily::latent_from_params(const Params& p, int latent_dim) const {
  if (latent_dim < 4) throw Error(ErrorKind::argument, "blob latent needs >= 4 coordinates");
  Vec z = Vec::Zero(latent_dim);
  z[0] = (p.cx - cx_mid) / cx_half;
  z[1] = (p.cy - cy_mid) / cy_half;
  z[2] = (p.sigma - sigma_mid) / sigma_half;
  z[3] = (p.amp - amp_mid) / amp_half;
  return z;
}

Vec BlobFamily::render(const Params& p) const {
  Vec img(pixels());
  const double inv = 1.0 / (2.0 * p.sigma * p.sigma);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - p.cx;
      const double dy = y - p.cy;
      img[static_cast<Eigen::Index>(y) * width + x] = p.amp * std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  return img;
}

std::array<Vec, 4> BlobFamily::param_derivatives(const Params& p) const {
  std::array<Vec, 4> d;
  for (auto& v : d) v.resize(pixels());
  const double s2 = p.sigma * p.sigma;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - p.cx;
      const double dy = y - p.cy;
      const double r2 = dx * dx + dy * dy;
      const double e = std::exp(-r2 / (2.0 * s2));
      const Eigen::Index i = static_cast<Eigen::Index>(y) * width + x;
      d[0][i] = p.amp * e * dx / s2;                   // d/dcx
      d[1][i] = p.amp * e * dy / s2;                   // d/dcy
      d[2][i] = p.amp * e * r2 / (s2 * p.sigma);       // d/dsigma
      d[3][i] = e;                                     // d/damp
    }
  }
  return d;
}

// ---- blob decoder training ----------------------------------------------

namespace {

double eval_mse(const DiffMap& map, const std::vector<Vec>& latents,
                const std::vector<Vec>& targets) {
  double acc = 0.0;
  for (std::size_t s = 0; s < latents.size(); ++s)
    acc += (map.forward(latents[s]) - targets[s]).squaredNorm();
  return acc / (static_cast<double>(latents.size()) * static_cast<double>(targets[0].size()));
}

}  // namespace

TrainResult train_blob_decoder(const BlobFamily& family, const GeneratorSpec& arch,
                               const TrainConfig& cfg) {
  family.validate();
  arch.validate();
  if (arch.latent_dim < 4)
    throw Error(ErrorKind::argument, "blob decoder needs latent_dim >= 4");
  if (Tensor::numel(arch.output_shape) != family.pixels())
    throw Error(ErrorKind::spec, "decoder output does not match blob canvas size");
  if (cfg.dataset_size < 1 || cfg.batch_size < 1)
    throw Error(ErrorKind::argument, "dataset and batch sizes must be >= 1");

  const DiffMap initial = build_generator(arch);
  auto store = std::make_shared<WeightStore>(*initial.weights());
  DiffMap map = initial.with_weights(store);

  // dataset: uniform blob parameters in the first four coordinates, seeded
  // nuisance noise on the rest
  Rng data_rng(mix_seed(cfg.seed, 1));
  auto draw = [&](int count, std::vector<Vec>& lat, std::vector<Vec>& img) {
    for (int s = 0; s < count; ++s) {
      Vec z(arch.latent_dim);
      for (int i = 0; i < 4; ++i) z[i] = 2.0 * data_rng.uniform01() - 1.0;
      for (int i = 4; i < arch.latent_dim; ++i) z[i] = cfg.nuisance_std * data_rng.normal();
      lat.push_back(z);
      img.push_back(family.render(family.params_from_latent(z)));
    }
  };
  std::vector<Vec> train_lat, train_img, hold_lat, hold_img;
  draw(cfg.dataset_size, train_lat, train_img);
  draw(cfg.holdout_size, hold_lat, hold_img);

  // Adam state over every weight tensor
  std::vector<Vec> m_state, v_state;
  std::vector<Tensor> grads;
  for (const auto& e : store->entries) {
    m_state.push_back(Vec::Zero(e.tensor.size()));
    v_state.push_back(Vec::Zero(e.tensor.size()));
    grads.emplace_back(e.tensor.shape, Vec::Zero(e.tensor.size()));
  }
  std::vector<int> entry_of_layer(map.layers().size(), -1);
  for (std::size_t i = 0; i < store->entries.size(); ++i)
    entry_of_layer[static_cast<std::size_t>(store->entries[i].layer)] = static_cast<int>(i);

  const int pixels = family.pixels();
  double train_mse = eval_mse(map, train_lat, train_img);
  Rng order_rng(mix_seed(cfg.seed, 2));
  long step = 0;
  int epoch = 0;
  for (; epoch < cfg.max_epochs && train_mse >= cfg.target_loss; ++epoch) {
    const auto perm = order_rng.permutation(static_cast<std::size_t>(cfg.dataset_size));
    for (int start = 0; start < cfg.dataset_size; start += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, cfg.dataset_size - start);
      for (auto& g : grads) g.data.setZero();
      const double scale = 2.0 / (static_cast<double>(bsz) * pixels);
      for (int b = 0; b < bsz; ++b) {
        const std::size_t s = perm[static_cast<std::size_t>(start + b)];
        const auto acts = map.forward_activations(train_lat[s]);
        Vec cot = scale * (acts.back() - train_img[s]);
        for (int li = static_cast<int>(map.layers().size()) - 1; li >= 0; --li) {
          const auto& spec = map.layers()[static_cast<std::size_t>(li)];
          const int ei = entry_of_layer[static_cast<std::size_t>(li)];
          if (ei >= 0)
            layer_weight_grad(spec, acts[static_cast<std::size_t>(li)], cot,
                              grads[static_cast<std::size_t>(ei)]);
          if (li > 0)
            cot = layer_vjp(spec, store->find(li), acts[static_cast<std::size_t>(li)], cot);
        }
      }
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t ei = 0; ei < grads.size(); ++ei) {
        auto& w = store->entries[ei].tensor.data;
        const Vec& g = grads[ei].data;
        m_state[ei] = cfg.beta1 * m_state[ei] + (1.0 - cfg.beta1) * g;
        v_state[ei] = cfg.beta2 * v_state[ei] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        w -= (cfg.lr * (m_state[ei] / c1).array() / ((v_state[ei] / c2).array().sqrt() + cfg.adam_eps))
                 .matrix();
      }
    }
    train_mse = eval_mse(map, train_lat, train_img);
  }

  if (cfg.max_epochs > 0 && train_mse >= cfg.target_loss)
    throw TrainError(train_mse, "blob decoder missed target loss " +
                                    std::to_string(cfg.target_loss) + ", reached " +
                                    std::to_string(train_mse) + " after " +
                                    std::to_string(epoch) + " epochs");

  const double holdout = eval_mse(map, hold_lat, hold_img);
  return TrainResult{std::move(map), train_mse, holdout, epoch};
}

// ---- .gmw ---------------------------------------------------------------

namespace {
constexpr char kGmwMagic[8] = {'G', 'M', 'W', 'v', '0', '0', '0', '1'};
}

void save_gmw(const std::string& path, const GeneratorSpec& spec, const WeightStore& store) {
  nlohmann::json dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : store.entries) {
    dir.push_back({{"layer", e.layer},
                   {"name", e.name},
                   {"shape", e.tensor.shape},
                   {"offset", offset},
                   {"count", static_cast<std::uint64_t>(e.tensor.size())}});
    offset += static_cast<std::uint64_t>(e.tensor.size()) * sizeof(double);
  }
  nlohmann::json header = {{"spec", generator_spec_to_json(spec)},
                           {"seeds", {{"init", spec.init_seed}}},
                           {"tensors", dir}};
  const std::string header_str = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::io, "cannot open " + path + " for writing");
  f.write(kGmwMagic, 8);
  const std::uint64_t len = header_str.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
  f.write(lenbuf, 8);
  f.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& e : store.entries)
    f.write(reinterpret_cast<const char*>(e.tensor.data.data()),
            static_cast<std::streamsize>(e.tensor.size() * sizeof(double)));
  if (!f) throw Error(ErrorKind::io, "short write to " + path);
}

GmwFile load_gmw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kGmwMagic, 8) != 0)
    throw Error(ErrorKind::io, path + " is not a .gmw weight file");
  char lenbuf[8];
  f.read(lenbuf, 8);
  if (!f) throw Error(ErrorKind::io, "truncated .gmw header length");
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i)
    len |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
  std::string header_str(len, '\0');
  f.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!f) throw Error(ErrorKind::io, "truncated .gmw header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, std::string("bad .gmw header: ") + e.what());
  }

  GmwFile out;
  out.spec = generator_spec_from_json(header.at("spec"));
  out.store = std::make_shared<WeightStore>();
  for (const auto& t : header.at("tensors")) {
    WeightEntry e;
    e.layer = t.at("layer").get<int>();
    e.name = t.at("name").get<std::string>();
    const std::vector<int> shape = t.at("shape").get<std::vector<int>>();
    const Eigen::Index count = static_cast<Eigen::Index>(t.at("count").get<std::uint64_t>());
    if (count != Tensor::numel(shape))
      throw Error(ErrorKind::io, "tensor directory count/shape mismatch");
    Vec data(count);
    f.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
    if (!f) throw Error(ErrorKind::io, "truncated .gmw payload");
    e.tensor = Tensor(shape, std::move(data));
    out.store->entries.push_back(std::move(e));
  }
  return out;
}

// ---- built-ins ------------------------------------------------------------

std::vector<std::string> builtin_generator_names() {
  return {"linear32", "ortho8", "mlp16", "deconv8", "blob16"};
}

const BlobFamily& builtin_blob_family() {
  static const BlobFamily family;
  return family;
}

const TrainConfig& builtin_blob_train_config() {
  static const TrainConfig cfg;
  return cfg;
}

GeneratorSpec builtin_generator_spec(const std::string& name) {
  GeneratorSpec s;
  if (name == "linear32") {
    s.architecture = {LayerSpec::Dense(8, 32)};
    s.latent_dim = 8;
    s.output_shape = {32};
    s.init_seed = 11;
  } else if (name == "ortho8") {
    s.architecture = {LayerSpec::Dense(8, 8)};
    s.latent_dim = 8;
    s.output_shape = {8};
    s.init_seed = 13;
  } else if (name == "mlp16") {
    s.architecture = {LayerSpec::Dense(16, 48), LayerSpec::Bias(48),
                      LayerSpec::Elementwise(Activation::tanh),
                      LayerSpec::Dense(48, 96),  LayerSpec::Bias(96),
                      LayerSpec::Elementwise(Activation::tanh),
                      LayerSpec::Dense(96, 96),  LayerSpec::Bias(96)};
    s.latent_dim = 16;
    s.output_shape = {96};
    s.init_seed = 17;
  } else if (name == "deconv8") {
    s.architecture = {LayerSpec::Dense(8, 64),
                      LayerSpec::Bias(64),
                      LayerSpec::Elementwise(Activation::leaky_relu, 0.2),
                      LayerSpec::Reshape({4, 4, 4}),
                      LayerSpec::TransposedConv2d(4, 2, 4, 2, 1),
                      LayerSpec::Elementwise(Activation::leaky_relu, 0.2),
                      LayerSpec::TransposedConv2d(2, 1, 4, 2, 1)};
    s.latent_dim = 8;
    s.output_shape = {1, 16, 16};
    s.init_seed = 19;
  } else if (name == "blob16") {
    s.architecture = {LayerSpec::Dense(16, 64),  LayerSpec::Bias(64),
                      LayerSpec::Elementwise(Activation::tanh),
                      LayerSpec::Dense(64, 256), LayerSpec::Bias(256),
                      LayerSpec::Reshape({1, 16, 16})};
    s.latent_dim = 16;
    s.output_shape = {1, 16, 16};
    s.init_seed = 23;
  } else {
    throw Error(ErrorKind::config, "unknown built-in generator: " + name);
  }
  return s;
}

const DiffMap& builtin_generator(const std::string& name) {
  static std::mutex mu;
  static std::map<std::string, DiffMap> cache;
  std::scoped_lock lock(mu);
  auto it = cache.find(name);
  if (it != cache.end()) return it->second;

  const GeneratorSpec spec = builtin_generator_spec(name);
  DiffMap map;
  if (name == "blob16") {
    map = train_blob_decoder(builtin_blob_family(), spec, builtin_blob_train_config()).map;
  } else if (name == "ortho8") {
    map = build_generator(spec);
    // replace the dense weight by the Q factor of its QR decomposition,
    // sign-fixed so the result is unique
    auto store = std::make_shared<WeightStore>(*map.weights());
    Tensor& w = *store->find(0);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
        w.data.data(), 8, 8);
    Mat A = W;
    Eigen::HouseholderQR<Mat> qr(A);
    Mat Q = qr.householderQ();
    Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < 8; ++i)
      if (R(i, i) < 0) Q.col(i) = -Q.col(i);
    W = Q;
    map = map.with_weights(store);
  } else {
    map = build_generator(spec);
  }
  return cache.emplace(name, std::move(map)).first->second;
}

}  // namespace manifold
