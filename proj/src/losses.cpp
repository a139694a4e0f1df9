#include "tif/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tif/errors.hpp"
#include "tif/kernels.hpp"

namespace tif {

namespace k = kernels;

void LossWeights::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(lambda_intra >= 0.0) || !(lambda_inter >= 0.0))
    throw ConfigError("loss weights must be non-negative");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(margin > 0.0)) throw ConfigError("margin must be positive");
}

ProxyView proxies_of(const ModelState& state) {
  const ParamLayout layout(state.arch);
  ProxyView view;
  view.K = state.arch.proxies_per_class;
  view.h = state.arch.embedding_dim();
  for (int c = 0; c < kNumClasses; ++c) view.rows[c] = state.block(layout.proxies(c));
  return view;
}

namespace {

inline double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

double cls_loss(std::span<const double> logits, std::span<const Label> labels,
                std::span<const std::size_t> rows, const LossGrad& grad) {
  if (rows.empty()) throw std::invalid_argument("cls_loss: empty batch");
  const double inv = 1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  for (std::size_t r : rows) {
    const double z = logits[r];
    const double y = to_int(labels[r]);
    total += softplus(z) - y * z;
    if (!grad.dlogits.empty()) grad.dlogits[r] += grad.scale * inv * (sigmoid(z) - y);
  }
  return total * inv;
}

double cls_loss(std::span<const double> logits, std::span<const Label> labels) {
  if (logits.size() != labels.size()) throw std::invalid_argument("cls_loss: length mismatch");
  const auto rows = all_rows(logits.size());
  return cls_loss(logits, labels, rows);
}

double proxy_alignment_loss(const Matrix& emb, std::span<const Label> labels,
                            std::span<const std::size_t> rows, const ProxyView& proxies,
                            double tau, const LossGrad& grad) {
  const std::size_t K = proxies.K;
  const std::size_t h = proxies.h;
  std::vector<std::size_t> by_class[kNumClasses];
  for (std::size_t r : rows) by_class[to_int(labels[r])].push_back(r);
  const int present = (by_class[0].empty() ? 0 : 1) + (by_class[1].empty() ? 0 : 1);
  if (present == 0) throw std::invalid_argument("proxy_alignment_loss: no samples");

  std::vector<double> s(K), p(K), ds(K);
  double total = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& members = by_class[c];
    if (members.empty()) continue;
    const double weight = 1.0 / (static_cast<double>(members.size()) * present);
    double class_sum = 0.0;
    for (std::size_t r : members) {
      auto u = emb.row(r);
      for (std::size_t j = 0; j < K; ++j) s[j] = k::dot(u, proxies.proxy(c, j)) / tau;
      const double mx = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (std::size_t j = 0; j < K; ++j) z += std::exp(s[j] - mx);
      const double log_z = std::log(z) + mx;
      double entropy = 0.0;
      for (std::size_t j = 0; j < K; ++j) {
        const double log_p = s[j] - log_z;
        p[j] = std::exp(log_p);
        entropy -= p[j] * log_p;
      }
      class_sum += entropy;

      const bool want_emb = grad.dembedding != nullptr;
      const bool want_proxy = !grad.dproxies.empty();
      if (!want_emb && !want_proxy) continue;
      // dH/ds_j = -p_j (log p_j + H)
      for (std::size_t j = 0; j < K; ++j)
        ds[j] = -p[j] * ((s[j] - log_z) + entropy) * weight * grad.scale / tau;
      for (std::size_t j = 0; j < K; ++j) {
        if (ds[j] == 0.0) continue;
        if (want_emb) k::axpy(ds[j], proxies.proxy(c, j), grad.dembedding->row(r));
        if (want_proxy)
          k::axpy(ds[j], u,
                  grad.dproxies.subspan((static_cast<std::size_t>(c) * K + j) * h, h));
      }
    }
    total += class_sum * weight;
  }
  return total;
}

double intra_diversity_loss(const ProxyView& proxies, const LossGrad& grad) {
  const std::size_t K = proxies.K;
  const std::size_t h = proxies.h;
  if (K < 2) return 0.0;
  const double pairs = static_cast<double>(K * (K - 1) / 2);
  const double weight = -1.0 / (kNumClasses * pairs);
  std::vector<double> diff(h);
  double total = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = i + 1; j < K; ++j) {
        auto a = proxies.proxy(c, i);
        auto b = proxies.proxy(c, j);
        for (std::size_t t = 0; t < h; ++t) diff[t] = a[t] - b[t];
        const double dist = std::sqrt(k::dot(diff, diff));
        total += dist;
        if (grad.dproxies.empty() || dist == 0.0) continue;
        const double g = grad.scale * weight / dist;
        const std::size_t base = static_cast<std::size_t>(c) * K;
        k::axpy(g, diff, grad.dproxies.subspan((base + i) * h, h));
        k::axpy(-g, diff, grad.dproxies.subspan((base + j) * h, h));
      }
    }
  }
  return weight * total;
}

double inter_separation_loss(const ProxyView& proxies, double margin, const LossGrad& grad) {
  const std::size_t K = proxies.K;
  const std::size_t h = proxies.h;
  std::vector<double> centre[kNumClasses];
  for (int c = 0; c < kNumClasses; ++c) {
    centre[c].assign(h, 0.0);
    for (std::size_t j = 0; j < K; ++j)
      k::axpy(1.0 / static_cast<double>(K), proxies.proxy(c, j), centre[c]);
  }
  // Two classes: the ordered pairs (0,1) and (1,0) contribute equally, and
  // the 1/(C(C-1)) prefactor is 1/2, so the loss is one hinge.
  std::vector<double> diff(h);
  for (std::size_t t = 0; t < h; ++t) diff[t] = centre[0][t] - centre[1][t];
  const double dist = std::sqrt(k::dot(diff, diff));
  const double loss = std::max(0.0, margin - dist);
  if (loss > 0.0 && !grad.dproxies.empty() && dist > 0.0) {
    // d/dcentre0 = -diff/dist; each proxy row receives 1/K of its centre's gradient.
    const double g = -grad.scale / (dist * static_cast<double>(K));
    for (std::size_t j = 0; j < K; ++j) {
      k::axpy(g, diff, grad.dproxies.subspan(j * h, h));
      k::axpy(-g, diff, grad.dproxies.subspan((K + j) * h, h));
    }
  }
  return loss;
}

MpcParts mpc_loss(const Matrix& emb, std::span<const Label> labels,
                  std::span<const std::size_t> rows, const ProxyView& proxies,
                  const LossWeights& w, const LossGrad& grad) {
  MpcParts parts;
  parts.alignment = proxy_alignment_loss(emb, labels, rows, proxies, w.tau, grad);
  LossGrad g_intra = grad;
  g_intra.scale = grad.scale * w.lambda_intra;
  parts.intra = intra_diversity_loss(proxies, g_intra);
  LossGrad g_inter = grad;
  g_inter.scale = grad.scale * w.lambda_inter;
  parts.inter = inter_separation_loss(proxies, w.margin, g_inter);
  parts.total = parts.alignment + w.lambda_intra * parts.intra + w.lambda_inter * parts.inter;
  return parts;
}

double iga_env_gradient(std::span<const double> logits, std::span<const Label> labels,
                        std::span<const std::size_t> rows) {
  if (rows.empty()) throw std::invalid_argument("iga: empty environment batch");
  double g = 0.0;
  for (std::size_t r : rows) g += (sigmoid(logits[r]) - to_int(labels[r])) * logits[r];
  return g / static_cast<double>(rows.size());
}

double iga_penalty(std::span<const double> logits, std::span<const Label> labels,
                   std::span<const std::vector<std::size_t>> envs, const LossGrad& grad) {
  if (envs.size() < 2) throw std::invalid_argument("iga: needs at least two environments");
  const double inv_envs = 1.0 / static_cast<double>(envs.size());
  double total = 0.0;
  for (const auto& rows : envs) {
    const double g = iga_env_gradient(logits, labels, rows);
    total += g * g;
    if (grad.dlogits.empty()) continue;
    // d(g^2)/dz_i = 2 g (sigma'(z) z + sigma(z) - y) / n_e
    const double coeff = grad.scale * inv_envs * 2.0 * g / static_cast<double>(rows.size());
    for (std::size_t r : rows) {
      const double z = logits[r];
      const double sg = sigmoid(z);
      grad.dlogits[r] += coeff * (sg * (1.0 - sg) * z + sg - to_int(labels[r]));
    }
  }
  return total * inv_envs;
}

double iga_penalty(const ModelState& state, const BatchByEnv& batch) {
  ForwardCache cache;
  forward(state, batch.inputs, cache);
  return iga_penalty(cache.logits, batch.labels, batch.env_rows);
}

}  // namespace tif
