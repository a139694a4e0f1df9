#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tif/dataset.hpp"
#include "tif/tensor.hpp"

namespace tif {

inline constexpr int kNumClasses = 2;

/// Normalisation guard: u = phi / (||phi|| + kEmbeddingEps).
inline constexpr double kEmbeddingEps = 1e-12;

/// Network shape. Encoder: sparse input -> layer_widths[0] -> ... ->
/// layer_widths.back() = h, ReLU after every layer, then L2 normalisation.
/// Head: h -> head_hidden (ReLU) -> 1 logit. K proxies per class in R^h.
struct Architecture {
  std::size_t dim = 0;
  std::vector<std::size_t> layer_widths{200, 200, 200};
  std::size_t head_hidden = 100;
  std::size_t proxies_per_class = 4;

  std::size_t embedding_dim() const { return layer_widths.back(); }
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Offsets of every parameter block inside one flat vector. Gradients and
/// optimizer moments share the same layout.
class ParamLayout {
 public:
  explicit ParamLayout(const Architecture& arch);

  std::size_t size() const { return total_; }
  std::size_t encoder_layers() const { return enc_w_.size(); }

  struct Block {
    std::size_t offset;
    std::size_t size;
  };
  /// Layer 0 weights are stored input-major (dim x width) so a sparse row is
  /// a sum of weight rows; deeper layers are output-major (out x in).
  Block encoder_weight(std::size_t layer) const { return enc_w_[layer]; }
  Block encoder_bias(std::size_t layer) const { return enc_b_[layer]; }
  Block head_hidden_weight() const { return head1_w_; }  // head_hidden x h
  Block head_hidden_bias() const { return head1_b_; }
  Block head_out_weight() const { return head2_w_; }  // head_hidden
  Block head_out_bias() const { return head2_b_; }    // 1
  Block proxies(int cls) const { return proxies_[static_cast<std::size_t>(cls)]; }  // K x h
  /// All proxy rows, both classes.
  Block all_proxies() const { return {proxies_[0].offset, proxies_[0].size * 2}; }

  template <class T>
  static std::span<T> view(std::span<T> flat, Block b) {
    return flat.subspan(b.offset, b.size);
  }

 private:
  std::vector<Block> enc_w_, enc_b_;
  Block head1_w_{}, head1_b_{}, head2_w_{}, head2_b_{};
  Block proxies_[kNumClasses]{};
  std::size_t total_ = 0;
};

/// Encoder, head and proxies: everything training updates.
struct ModelState {
  Architecture arch;
  std::uint64_t seed = 0;
  std::vector<double> params;

  ParamLayout layout() const { return ParamLayout(arch); }
  std::span<const double> block(ParamLayout::Block b) const {
    return std::span<const double>(params).subspan(b.offset, b.size);
  }
  std::span<double> block(ParamLayout::Block b) {
    return std::span<double>(params).subspan(b.offset, b.size);
  }
  /// Proxy row k of class cls.
  std::span<const double> proxy(int cls, std::size_t k) const;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// Fan-in scaled uniform weights, zero biases, proxies uniform on the unit
/// sphere. Deterministic in seed. Warns when K >= h.
ModelState init_model(const Architecture& arch, std::uint64_t seed);

/// Rescales every proxy row to unit L2 norm.
void project_proxies(ModelState& state);

/// Activations kept for the backward pass.
struct ForwardCache {
  std::vector<Matrix> encoder;  // post-ReLU output of every encoder layer
  std::vector<double> norms;    // ||phi|| per row
  Matrix embedding;             // normalised
  Matrix head_hidden;           // post-ReLU
  std::vector<double> logits;
};

void forward(const ModelState& state, const SparseBatch& batch, ForwardCache& cache);

/// Accumulates parameter gradients into `grad` (layout-sized) given
/// dL/dlogit per row and, optionally, dL/d(normalised embedding).
/// When `input_grad` is non-null it receives dL/d(value) for every stored
/// entry of `batch` (aligned with batch.values).
void backward(const ModelState& state, const SparseBatch& batch, const ForwardCache& cache,
              std::span<const double> dlogits, const Matrix* dembedding,
              std::span<double> grad, std::vector<double>* input_grad = nullptr);

SparseBatch make_batch(const TemporalDataset& ds, std::span<const std::size_t> positions);

/// Normalised embedding of one sparse binary input.
std::vector<double> embed(const ModelState& state, std::span<const std::uint32_t> features);

double logit(const ModelState& state, std::span<const std::uint32_t> features);

/// Logits for every sample, evaluated in fixed-size chunks.
std::vector<double> predict_logits(const ModelState& state, const TemporalDataset& ds);

/// Normalised embeddings for every sample.
Matrix predict_embeddings(const ModelState& state, const TemporalDataset& ds);

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline Label predicted_label(double logit) {
  return sigmoid(logit) >= 0.5 ? Label::malware : Label::benign;
}

/// Checkpoint: magic, JSON manifest {"dim","h","K","layer_widths","seed",
/// "head_hidden"}, then the raw parameter vector. Bit-exact round trip.
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace tif
