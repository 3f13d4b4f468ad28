#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lime/common.hpp"
#include "lime/corpus.hpp"
#include "lime/embed.hpp"
#include "lime/schema.hpp"

namespace lime {

struct MetadataHeadConfig {
    int domain = -1;
    double loss_weight = 1.0;

    bool enabled() const { return domain >= 0; }
};

struct ModelConfig {
    int hidden = 128;
    int num_layers = 4;
    int mlp_factor = 6;
    int num_heads = 4;
    int num_kv_heads = 1;
    double rms_norm_eps = 1e-6;
    double rotary_base = 10000.0;
    int seq_len = 256;
    int vocab_size = 4096;
    FusionMode mode = FusionMode::BASE;
    std::vector<DomainSchema> domains;
    MetadataHeadConfig metadata_head;

    int head_dim() const { return hidden / num_heads; }
    int mlp_hidden() const { return hidden * mlp_factor; }
    void validate() const;
};

template <class T>
struct LayerParams {
    RowX<T> attn_norm;
    MatX<T> wq, wk, wv, wo;
    RowX<T> mlp_norm;
    MatX<T> w_up, w_down;
};

template <class T>
struct ModelParams {
    EmbeddingTables<T> embed;
    std::vector<LayerParams<T>> layers;
    RowX<T> final_norm;
    MatX<T> w_meta;

    static ModelParams shaped(const ModelConfig& config);
    void set_zero();
    size_t parameter_count() const;
    size_t metadata_parameter_count() const;
};

// Flat view over one tensor of a ModelParams, used by the optimizer, the
// checkpoint writer, and the finite-difference harness. `decay` marks the
// matrices that receive weight decay (norm gains do not).
template <class T>
struct TensorRef {
    std::string name;
    T* data;
    Eigen::Index rows, cols;
    bool decay;

    Eigen::Index size() const { return rows * cols; }
};

template <class T>
std::vector<TensorRef<T>> tensor_refs(ModelParams<T>& params, const ModelConfig& config);

template <class T>
ModelParams<T> init_params(const ModelConfig& config, uint64_t seed);

// One forward batch. Class sequences are pre-shifted by the caller when the
// model runs in LIME_PLUS_ONE mode; the model itself never shifts.
struct ModelInput {
    int batch = 0;
    int seq = 0;
    std::vector<uint32_t> tokens;
    std::vector<std::vector<uint16_t>> classes;
    std::vector<uint32_t> targets;
    std::vector<uint16_t> meta_targets;

    int positions() const { return batch * seq; }
};

ModelInput to_model_input(const PackedBatch& packed);

template <class T>
struct LayerActs {
    MatX<T> x_in, attn_normed;
    MatX<T> attn_inv_rms;
    MatX<T> q, k, v;
    std::vector<MatX<T>> probs;
    MatX<T> attn_ctx, x_mid, mlp_normed;
    MatX<T> mlp_inv_rms;
    MatX<T> up, act;
};

template <class T>
struct Activations {
    int batch = 0, seq = 0;
    MatX<T> cos_tab, sin_tab;
    MatX<T> fused;
    std::vector<LayerActs<T>> layers;
    MatX<T> final_in, final_normed;
    MatX<T> final_inv_rms;
    MatX<T> logits;
    MatX<T> meta_logits;
};

template <class T>
void forward(const ModelConfig& config, const ModelParams<T>& params, const ModelInput& in,
             Activations<T>& acts);

struct LossValue {
    double lm = 0.0;
    double meta = 0.0;
    double total = 0.0;
};

template <class T>
double lm_loss(const MatX<T>& logits, const std::vector<uint32_t>& targets);

// Cross-entropy on both heads plus full backward pass. Gradients are
// accumulated into `grads` (caller zeroes it); forward must have filled
// `acts` for this exact input.
template <class T>
LossValue backward(const ModelConfig& config, const ModelParams<T>& params, const ModelInput& in,
                   const Activations<T>& acts, ModelParams<T>& grads,
                   bool embed_grad_scale_by_freq = false);

struct OptimConfig {
    double peak_lr = 3e-3;
    double min_lr = 3e-4;
    double warmup_frac = 0.05;
    int64_t total_steps = 0;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.033;
    bool embed_grad_scale_by_freq = false;
};

double schedule_lr(const OptimConfig& optim, int64_t step);

template <class T>
struct TrainState {
    ModelConfig config;
    OptimConfig optim;
    ModelParams<T> params, m, v;
    int64_t step = 0;
    Rng rng{0};
    uint64_t vocab_fingerprint = 0;
};

template <class T>
TrainState<T> init_train_state(const ModelConfig& config, const OptimConfig& optim, uint64_t seed,
                               uint64_t vocab_fingerprint);

template <class T>
void adamw_step(TrainState<T>& state, ModelParams<T>& grads);

template <class T>
LossValue train_step(TrainState<T>& state, const ModelInput& batch, Activations<T>& acts,
                     ModelParams<T>& grads);

template <class T>
LossValue train_step(TrainState<T>& state, const ModelInput& batch);

// Maps a full generated id sequence to per-domain class sequences (unshifted,
// one class per id). Supplied by the tokenization layer so the model stays
// agnostic of annotators.
using Relabeler = std::function<std::vector<Annotation>(const std::vector<uint32_t>&)>;

struct GenerateOptions {
    int max_steps = 64;
    bool stop_at_separator = true;
    std::vector<int> steer;
    bool use_metadata_head = false;
};

template <class T>
std::vector<uint32_t> generate_greedy(const ModelConfig& config, const ModelParams<T>& params,
                                      const std::vector<uint32_t>& prompt,
                                      const Relabeler& relabel, const GenerateOptions& options);

template <class T>
double metadata_head_topk(const MatX<T>& meta_logits, const std::vector<uint16_t>& gold, int k);

void save_checkpoint(const TrainState<float>& state, const std::string& path);
TrainState<float> load_checkpoint(const std::string& path);
TrainState<float> load_checkpoint(const std::string& path, uint64_t expected_vocab_fingerprint);

}  // namespace lime
