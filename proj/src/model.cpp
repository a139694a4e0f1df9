#include "tif/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "tif/errors.hpp"
#include "tif/kernels.hpp"
#include "tif/log.hpp"
#include "tif/rng.hpp"

namespace tif {

namespace k = kernels;

ParamLayout::ParamLayout(const Architecture& arch) {
  if (arch.layer_widths.empty()) throw ConfigError("encoder needs at least one layer");
  std::size_t off = 0;
  auto take = [&](std::size_t n) {
    Block b{off, n};
    off += n;
    return b;
  };
  std::size_t in = arch.dim;
  for (std::size_t w : arch.layer_widths) {
    enc_w_.push_back(take(in * w));
    enc_b_.push_back(take(w));
    in = w;
  }
  const std::size_t h = arch.embedding_dim();
  head1_w_ = take(arch.head_hidden * h);
  head1_b_ = take(arch.head_hidden);
  head2_w_ = take(arch.head_hidden);
  head2_b_ = take(1);
  for (auto& p : proxies_) p = take(arch.proxies_per_class * h);
  total_ = off;
}

std::span<const double> ModelState::proxy(int cls, std::size_t k) const {
  const std::size_t h = arch.embedding_dim();
  return block(layout().proxies(cls)).subspan(k * h, h);
}

void project_proxies(ModelState& state) {
  const std::size_t h = state.arch.embedding_dim();
  auto all = state.block(state.layout().all_proxies());
  for (std::size_t off = 0; off < all.size(); off += h) {
    auto row = all.subspan(off, h);
    const double norm = std::sqrt(k::dot(row, row));
    if (norm > 0.0)
      for (double& x : row) x /= norm;
  }
}

ModelState init_model(const Architecture& arch, std::uint64_t seed) {
  if (arch.dim == 0) throw ConfigError("input dimension must be positive");
  if (arch.proxies_per_class < 1) throw ConfigError("K must be >= 1");
  if (arch.embedding_dim() < 2) throw ConfigError("embedding dimension must be >= 2");
  if (arch.head_hidden < 1) throw ConfigError("head_hidden must be >= 1");
  if (arch.proxies_per_class >= arch.embedding_dim())
    warn("K = " + std::to_string(arch.proxies_per_class) +
         " proxies per class is not below the embedding dimension " +
         std::to_string(arch.embedding_dim()));

  ModelState state;
  state.arch = arch;
  state.seed = seed;
  const ParamLayout layout(arch);
  state.params.assign(layout.size(), 0.0);
  Rng rng = make_rng(seed, 0x1417);

  auto fill_uniform = [&](ParamLayout::Block b, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& w : state.block(b)) w = bound * (2.0 * uniform01(rng) - 1.0);
  };
  std::size_t in = arch.dim;
  for (std::size_t l = 0; l < arch.layer_widths.size(); ++l) {
    fill_uniform(layout.encoder_weight(l), in);
    in = arch.layer_widths[l];
  }
  fill_uniform(layout.head_hidden_weight(), arch.embedding_dim());
  // Output layer has no ReLU after it: Glorot-style bound.
  {
    const double bound = std::sqrt(3.0 / static_cast<double>(arch.head_hidden));
    for (double& w : state.block(layout.head_out_weight())) w = bound * (2.0 * uniform01(rng) - 1.0);
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& p : state.block(layout.all_proxies())) p = normal(rng);
  project_proxies(state);
  return state;
}

void forward(const ModelState& state, const SparseBatch& batch, ForwardCache& cache) {
  const Architecture& arch = state.arch;
  if (batch.dim != arch.dim)
    throw SchemaError("batch dim " + std::to_string(batch.dim) + " != model dim " +
                      std::to_string(arch.dim));
  const ParamLayout layout(arch);
  const std::size_t n = batch.rows();
  const std::size_t layers = arch.layer_widths.size();
  cache.encoder.resize(layers);

  // Layer 0: sparse rows select weight rows.
  {
    const std::size_t w = arch.layer_widths[0];
    auto weights = state.block(layout.encoder_weight(0));
    auto bias = state.block(layout.encoder_bias(0));
    Matrix& out = cache.encoder[0];
    out.resize(n, w);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = out.row(r);
      std::copy(bias.begin(), bias.end(), row.begin());
      const auto idx = batch.row_indices(r);
      const auto val = batch.row_values(r);
      for (std::size_t t = 0; t < idx.size(); ++t)
        k::axpy(val[t], weights.subspan(static_cast<std::size_t>(idx[t]) * w, w), row);
      for (double& x : row) x = std::max(x, 0.0);
    }
  }
  for (std::size_t l = 1; l < layers; ++l) {
    const std::size_t in = arch.layer_widths[l - 1];
    const std::size_t w = arch.layer_widths[l];
    auto weights = state.block(layout.encoder_weight(l));
    auto bias = state.block(layout.encoder_bias(l));
    const Matrix& prev = cache.encoder[l - 1];
    Matrix& out = cache.encoder[l];
    out.resize(n, w);
    for (std::size_t r = 0; r < n; ++r) {
      auto a = prev.row(r);
      auto row = out.row(r);
      for (std::size_t o = 0; o < w; ++o)
        row[o] = std::max(bias[o] + k::dot(weights.subspan(o * in, in), a), 0.0);
    }
  }

  const std::size_t h = arch.embedding_dim();
  const Matrix& phi = cache.encoder.back();
  cache.norms.resize(n);
  cache.embedding.resize(n, h);
  for (std::size_t r = 0; r < n; ++r) {
    auto p = phi.row(r);
    const double norm = std::sqrt(k::dot(p, p));
    cache.norms[r] = norm;
    const double scale = 1.0 / (norm + kEmbeddingEps);
    auto u = cache.embedding.row(r);
    for (std::size_t j = 0; j < h; ++j) u[j] = p[j] * scale;
  }

  const std::size_t hh = arch.head_hidden;
  auto w1 = state.block(layout.head_hidden_weight());
  auto b1 = state.block(layout.head_hidden_bias());
  auto w2 = state.block(layout.head_out_weight());
  const double b2 = state.block(layout.head_out_bias())[0];
  cache.head_hidden.resize(n, hh);
  cache.logits.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto u = cache.embedding.row(r);
    auto hid = cache.head_hidden.row(r);
    for (std::size_t o = 0; o < hh; ++o)
      hid[o] = std::max(b1[o] + k::dot(w1.subspan(o * h, h), u), 0.0);
    cache.logits[r] = b2 + k::dot(w2, hid);
  }
}

void backward(const ModelState& state, const SparseBatch& batch, const ForwardCache& cache,
              std::span<const double> dlogits, const Matrix* dembedding,
              std::span<double> grad, std::vector<double>* input_grad) {
  const Architecture& arch = state.arch;
  const ParamLayout layout(arch);
  const std::size_t n = batch.rows();
  const std::size_t h = arch.embedding_dim();
  const std::size_t hh = arch.head_hidden;
  const std::size_t layers = arch.layer_widths.size();

  auto w1 = state.block(layout.head_hidden_weight());
  auto w2 = state.block(layout.head_out_weight());
  if (input_grad) input_grad->assign(batch.values.size(), 0.0);
  // An empty grad span means only input gradients are wanted.
  const bool want_params = !grad.empty();
  std::span<double> gw1, gb1, gw2, gb2;
  if (want_params) {
    gw1 = ParamLayout::view(grad, layout.head_hidden_weight());
    gb1 = ParamLayout::view(grad, layout.head_hidden_bias());
    gw2 = ParamLayout::view(grad, layout.head_out_weight());
    gb2 = ParamLayout::view(grad, layout.head_out_bias());
  }

  std::vector<double> dhid(hh), du(h), dphi(h);
  std::vector<std::vector<double>> dact(layers);
  for (std::size_t l = 0; l < layers; ++l) dact[l].resize(arch.layer_widths[l]);

  for (std::size_t r = 0; r < n; ++r) {
    std::fill(du.begin(), du.end(), 0.0);
    const double dl = dlogits.empty() ? 0.0 : dlogits[r];
    auto u = cache.embedding.row(r);
    if (dl != 0.0) {
      auto hid = cache.head_hidden.row(r);
      if (want_params) {
        k::axpy(dl, hid, gw2);
        gb2[0] += dl;
      }
      for (std::size_t o = 0; o < hh; ++o) dhid[o] = hid[o] > 0.0 ? dl * w2[o] : 0.0;
      for (std::size_t o = 0; o < hh; ++o) {
        if (dhid[o] == 0.0) continue;
        if (want_params) {
          k::axpy(dhid[o], u, gw1.subspan(o * h, h));
          gb1[o] += dhid[o];
        }
        k::axpy(dhid[o], w1.subspan(o * h, h), du);
      }
    }
    if (dembedding) {
      auto de = dembedding->row(r);
      for (std::size_t j = 0; j < h; ++j) du[j] += de[j];
    }

    // u = phi / (||phi|| + eps)
    auto phi = cache.encoder.back().row(r);
    const double norm = cache.norms[r];
    const double denom = norm + kEmbeddingEps;
    const double proj = norm > 0.0 ? k::dot(phi, du) / (norm * denom * denom) : 0.0;
    auto& top = dact[layers - 1];
    for (std::size_t j = 0; j < h; ++j) top[j] = du[j] / denom - phi[j] * proj;

    for (std::size_t l = layers; l-- > 0;) {
      auto act = cache.encoder[l].row(r);
      auto& dpre = dact[l];
      const std::size_t w = arch.layer_widths[l];
      for (std::size_t o = 0; o < w; ++o)
        if (act[o] <= 0.0) dpre[o] = 0.0;
      std::span<double> gw;
      if (want_params) {
        auto gb = ParamLayout::view(grad, layout.encoder_bias(l));
        for (std::size_t o = 0; o < w; ++o) gb[o] += dpre[o];
        gw = ParamLayout::view(grad, layout.encoder_weight(l));
      }
      if (l == 0) {
        auto weights = state.block(layout.encoder_weight(0));
        const auto idx = batch.row_indices(r);
        const auto val = batch.row_values(r);
        for (std::size_t t = 0; t < idx.size(); ++t) {
          const std::size_t off = static_cast<std::size_t>(idx[t]) * w;
          if (want_params) k::axpy(val[t], dpre, gw.subspan(off, w));
          if (input_grad)
            (*input_grad)[batch.offsets[r] + t] = k::dot(weights.subspan(off, w), dpre);
        }
      } else {
        const std::size_t in = arch.layer_widths[l - 1];
        auto weights = state.block(layout.encoder_weight(l));
        auto below = cache.encoder[l - 1].row(r);
        auto& dbelow = dact[l - 1];
        std::fill(dbelow.begin(), dbelow.end(), 0.0);
        for (std::size_t o = 0; o < w; ++o) {
          if (dpre[o] == 0.0) continue;
          if (want_params) k::axpy(dpre[o], below, gw.subspan(o * in, in));
          k::axpy(dpre[o], weights.subspan(o * in, in), dbelow);
        }
      }
    }
  }
}

SparseBatch make_batch(const TemporalDataset& ds, std::span<const std::size_t> positions) {
  SparseBatch batch(ds.dim());
  for (std::size_t p : positions) batch.add_row(ds[p].features);
  return batch;
}

std::vector<double> embed(const ModelState& state, std::span<const std::uint32_t> features) {
  SparseBatch batch(state.arch.dim);
  batch.add_row(features);
  ForwardCache cache;
  forward(state, batch, cache);
  const auto row = cache.embedding.row(0);
  return {row.begin(), row.end()};
}

double logit(const ModelState& state, std::span<const std::uint32_t> features) {
  SparseBatch batch(state.arch.dim);
  batch.add_row(features);
  ForwardCache cache;
  forward(state, batch, cache);
  return cache.logits[0];
}

namespace {

constexpr std::size_t kEvalChunk = 256;

template <class Fn>
void for_each_chunk(const ModelState& state, const TemporalDataset& ds, Fn&& fn) {
  if (ds.dim() != state.arch.dim)
    throw SchemaError("dataset dim " + std::to_string(ds.dim()) + " != model dim " +
                      std::to_string(state.arch.dim));
  ForwardCache cache;
  for (std::size_t start = 0; start < ds.size(); start += kEvalChunk) {
    const std::size_t end = std::min(ds.size(), start + kEvalChunk);
    SparseBatch batch(ds.dim());
    for (std::size_t i = start; i < end; ++i) batch.add_row(ds[i].features);
    forward(state, batch, cache);
    fn(start, cache);
  }
}

}  // namespace

std::vector<double> predict_logits(const ModelState& state, const TemporalDataset& ds) {
  std::vector<double> out(ds.size());
  for_each_chunk(state, ds, [&](std::size_t start, const ForwardCache& cache) {
    std::copy(cache.logits.begin(), cache.logits.end(), out.begin() + static_cast<std::ptrdiff_t>(start));
  });
  return out;
}

Matrix predict_embeddings(const ModelState& state, const TemporalDataset& ds) {
  Matrix out(ds.size(), state.arch.embedding_dim());
  for_each_chunk(state, ds, [&](std::size_t start, const ForwardCache& cache) {
    std::copy(cache.embedding.data.begin(), cache.embedding.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(start * out.cols));
  });
  return out;
}

namespace {
constexpr char kMagic[8] = {'T', 'I', 'F', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
  nlohmann::ordered_json manifest;
  manifest["dim"] = state.arch.dim;
  manifest["h"] = state.arch.embedding_dim();
  manifest["K"] = state.arch.proxies_per_class;
  manifest["layer_widths"] = state.arch.layer_widths;
  manifest["head_hidden"] = state.arch.head_hidden;
  manifest["seed"] = state.seed;
  manifest["n_params"] = state.params.size();
  const std::string text = manifest.dump();
  const std::uint64_t len = text.size();
  const std::uint64_t count = state.params.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(state.params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParseError(path.string() + " is not a checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 20)) throw ParseError("corrupt checkpoint manifest length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  ModelState state;
  try {
    const auto manifest = nlohmann::json::parse(text);
    state.arch.dim = manifest.at("dim").get<std::size_t>();
    state.arch.layer_widths = manifest.at("layer_widths").get<std::vector<std::size_t>>();
    state.arch.head_hidden = manifest.at("head_hidden").get<std::size_t>();
    state.arch.proxies_per_class = manifest.at("K").get<std::size_t>();
    state.seed = manifest.at("seed").get<std::uint64_t>();
    if (manifest.at("h").get<std::size_t>() != state.arch.embedding_dim())
      throw ParseError("manifest h disagrees with layer_widths");
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what());
  }
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || count != ParamLayout(state.arch).size())
    throw ParseError("checkpoint parameter count does not match its manifest");
  state.params.resize(count);
  in.read(reinterpret_cast<char*>(state.params.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ParseError("truncated checkpoint " + path.string());
  return state;
}

}  // namespace tif
