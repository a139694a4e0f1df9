#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tif/dataset.hpp"
#include "tif/model.hpp"
#include "tif/tensor.hpp"

namespace tif {

/// Weights of the composite objective.
struct LossWeights {
  double alpha = 1.0;         // multi-proxy contrastive term
  double beta = 1.0;          // invariant gradient alignment term
  double lambda_intra = 0.1;  // proxy diversity regulariser
  double lambda_inter = 0.1;  // class-centre margin regulariser
  double tau = 0.1;           // similarity temperature
  double margin = 1.0;

  void validate() const;
};

/// Read-only view of both classes' proxy matrices (K x h, row-major).
struct ProxyView {
  std::span<const double> rows[kNumClasses];
  std::size_t K = 0;
  std::size_t h = 0;

  std::span<const double> proxy(int cls, std::size_t k) const {
    return rows[cls].subspan(k * h, h);
  }
};

ProxyView proxies_of(const ModelState& state);

/// Gradient sinks. Any member may be null/empty to skip that gradient.
/// Every loss adds `scale * dLoss` into them.
struct LossGrad {
  std::span<double> dlogits;      // one per batch row
  Matrix* dembedding = nullptr;   // batch rows x h
  std::span<double> dproxies;     // 2 * K * h, class 0 rows first
  double scale = 1.0;
};

/// Mean of softplus(z) - y z over the selected rows.
double cls_loss(std::span<const double> logits, std::span<const Label> labels,
                std::span<const std::size_t> rows, const LossGrad& grad = {});
double cls_loss(std::span<const double> logits, std::span<const Label> labels);

/// Mean soft-assignment entropy of each class's embeddings over its own
/// proxies, averaged over the classes present in `rows`.
double proxy_alignment_loss(const Matrix& embeddings, std::span<const Label> labels,
                            std::span<const std::size_t> rows, const ProxyView& proxies,
                            double tau, const LossGrad& grad = {});

/// Negative mean pairwise proxy distance within each class, averaged over
/// classes. Zero when K = 1.
double intra_diversity_loss(const ProxyView& proxies, const LossGrad& grad = {});

/// Mean over ordered class pairs of max(0, m - ||centre_a - centre_b||).
double inter_separation_loss(const ProxyView& proxies, double margin,
                             const LossGrad& grad = {});

struct MpcParts {
  double alignment = 0.0;
  double intra = 0.0;
  double inter = 0.0;
  double total = 0.0;
};

/// alignment + lambda_intra * intra + lambda_inter * inter.
MpcParts mpc_loss(const Matrix& embeddings, std::span<const Label> labels,
                  std::span<const std::size_t> rows, const ProxyView& proxies,
                  const LossWeights& weights, const LossGrad& grad = {});

/// Derivative of an environment's mean BCE with respect to a scalar applied
/// to every logit, evaluated at 1: mean (sigmoid(z) - y) z.
double iga_env_gradient(std::span<const double> logits, std::span<const Label> labels,
                        std::span<const std::size_t> rows);

/// Mean over environments of the squared dummy-scale gradient. Requires at
/// least two environments, each non-empty. Fills grad.dlogits with the exact
/// derivative of the penalty with respect to every logit.
double iga_penalty(std::span<const double> logits, std::span<const Label> labels,
                   std::span<const std::vector<std::size_t>> envs, const LossGrad& grad = {});

/// Per-environment inputs plus their union, for the state-level entry point.
struct BatchByEnv {
  SparseBatch inputs;
  std::vector<Label> labels;
  std::vector<std::vector<std::size_t>> env_rows;  // rows of `inputs` per environment
};

/// Runs the model forward on the batch and evaluates the penalty.
double iga_penalty(const ModelState& state, const BatchByEnv& batch);

}  // namespace tif
