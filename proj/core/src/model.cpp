#include "lime/model.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace lime {

namespace {

// Token id 0 is the document separator everywhere in the pipeline.
constexpr uint32_t kSeparatorToken = 0;

// Row-block height for the causal attention products. Blocks above the
// diagonal never contribute, so restricting each row block to its reachable
// columns skips a bit under half of the score/context matrix work.
constexpr int kAttnBlock = 128;

template <class T>
void rmsnorm_forward(const MatX<T>& x, const RowX<T>& gain, T eps, MatX<T>& out,
                     MatX<T>& inv_rms) {
    const Eigen::Index n = x.rows();
    const Eigen::Index h = x.cols();
    out.resize(n, h);
    inv_rms.resize(n, 1);
    for (Eigen::Index r = 0; r < n; ++r) {
        const T ms = x.row(r).squaredNorm() / static_cast<T>(h);
        const T inv = T(1) / std::sqrt(ms + eps);
        inv_rms(r, 0) = inv;
        out.row(r) = x.row(r).cwiseProduct(gain) * inv;
    }
}

template <class T>
void rmsnorm_backward(const MatX<T>& x, const RowX<T>& gain, const MatX<T>& inv_rms,
                      const MatX<T>& dy, MatX<T>& dx, RowX<T>& dgain) {
    const Eigen::Index n = x.rows();
    const Eigen::Index h = x.cols();
    dx.resize(n, h);
    RowX<T> a(h);
    for (Eigen::Index r = 0; r < n; ++r) {
        const T inv = inv_rms(r, 0);
        dgain.noalias() += dy.row(r).cwiseProduct(x.row(r)) * inv;
        a.noalias() = dy.row(r).cwiseProduct(gain);
        const T dot = a.cwiseProduct(x.row(r)).sum();
        dx.row(r) = a * inv - x.row(r) * (inv * inv * inv * dot / static_cast<T>(h));
    }
}

template <class T>
T gelu_tanh(T u) {
    const T c0 = T(0.7978845608028654);
    const T c1 = T(0.044715);
    const T t = std::tanh(c0 * (u + c1 * u * u * u));
    return T(0.5) * u * (T(1) + t);
}

template <class T>
T gelu_tanh_grad(T u) {
    const T c0 = T(0.7978845608028654);
    const T c1 = T(0.044715);
    const T u2 = u * u;
    const T t = std::tanh(c0 * u * (T(1) + c1 * u2));
    return T(0.5) * (T(1) + t) + T(0.5) * u * (T(1) - t * t) * c0 * (T(1) + T(3) * c1 * u2);
}

template <class T>
void rope_tables(int seq, int head_dim, double base, MatX<T>& cos_tab, MatX<T>& sin_tab) {
    const int half = head_dim / 2;
    cos_tab.resize(seq, half);
    sin_tab.resize(seq, half);
    for (int j = 0; j < half; ++j) {
        const double freq = std::pow(base, -2.0 * j / head_dim);
        for (int p = 0; p < seq; ++p) {
            const double angle = p * freq;
            cos_tab(p, j) = static_cast<T>(std::cos(angle));
            sin_tab(p, j) = static_cast<T>(std::sin(angle));
        }
    }
}

// Rotates dimension pairs (2j, 2j+1) of every head by the position angle.
// The rotation is orthogonal, so the backward pass is the same map with the
// angle negated.
template <class T>
void apply_rope(MatX<T>& x, int batch, int seq, int heads, int head_dim, const MatX<T>& cos_tab,
                const MatX<T>& sin_tab, bool inverse) {
    const int half = head_dim / 2;
    for (int b = 0; b < batch; ++b) {
        for (int p = 0; p < seq; ++p) {
            const Eigen::Index row = static_cast<Eigen::Index>(b) * seq + p;
            for (int hh = 0; hh < heads; ++hh) {
                const int base_col = hh * head_dim;
                for (int j = 0; j < half; ++j) {
                    const T c = cos_tab(p, j);
                    const T s = inverse ? -sin_tab(p, j) : sin_tab(p, j);
                    const T a = x(row, base_col + 2 * j);
                    const T d = x(row, base_col + 2 * j + 1);
                    x(row, base_col + 2 * j) = a * c - d * s;
                    x(row, base_col + 2 * j + 1) = a * s + d * c;
                }
            }
        }
    }
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void ModelConfig::validate() const {
    require(hidden > 0, "model config: hidden must be positive");
    require(num_layers > 0, "model config: num_layers must be positive");
    require(mlp_factor > 0, "model config: mlp_factor must be positive");
    require(num_heads > 0 && hidden % num_heads == 0,
            "model config: hidden must be divisible by num_heads");
    require(num_kv_heads > 0 && num_heads % num_kv_heads == 0,
            "model config: num_kv_heads must divide num_heads");
    require(head_dim() % 2 == 0, "model config: head dimension must be even for rotary pairs");
    require(seq_len > 0, "model config: seq_len must be positive");
    require(vocab_size > 1, "model config: vocab_size must be at least 2");
    require(rms_norm_eps > 0, "model config: rms_norm_eps must be positive");
    require(rotary_base > 0, "model config: rotary_base must be positive");
    if (mode != FusionMode::BASE) {
        require(!domains.empty(), "model config: metadata fusion modes need at least one domain");
    }
    for (const auto& d : domains) {
        require(d.size() > 0, "model config: empty domain schema");
        require(d.x_class < d.size(), "model config: domain x_class outside schema");
        require(d.special_class < d.size(), "model config: domain special_class outside schema");
    }
    if (metadata_head.enabled()) {
        require(static_cast<size_t>(metadata_head.domain) < domains.size(),
                "model config: metadata head domain out of range");
    }
}

template <class T>
ModelParams<T> ModelParams<T>::shaped(const ModelConfig& config) {
    config.validate();
    ModelParams<T> p;
    p.embed.token = MatX<T>::Zero(config.vocab_size, config.hidden);
    p.embed.domain.reserve(config.domains.size());
    p.embed.weights.reserve(config.domains.size());
    for (const auto& d : config.domains) {
        p.embed.domain.push_back(MatX<T>::Zero(d.size(), config.hidden));
        p.embed.weights.push_back(static_cast<T>(d.weight));
    }
    p.layers.resize(config.num_layers);
    const int h = config.hidden;
    const int qd = config.num_heads * config.head_dim();
    const int kd = config.num_kv_heads * config.head_dim();
    const int m = config.mlp_hidden();
    for (auto& l : p.layers) {
        l.attn_norm = RowX<T>::Zero(h);
        l.wq = MatX<T>::Zero(h, qd);
        l.wk = MatX<T>::Zero(h, kd);
        l.wv = MatX<T>::Zero(h, kd);
        l.wo = MatX<T>::Zero(qd, h);
        l.mlp_norm = RowX<T>::Zero(h);
        l.w_up = MatX<T>::Zero(h, m);
        l.w_down = MatX<T>::Zero(m, h);
    }
    p.final_norm = RowX<T>::Zero(h);
    if (config.metadata_head.enabled()) {
        p.w_meta = MatX<T>::Zero(h, config.domains[config.metadata_head.domain].size());
    }
    return p;
}

template <class T>
void ModelParams<T>::set_zero() {
    embed.token.setZero();
    for (auto& d : embed.domain) {
        d.setZero();
    }
    for (auto& l : layers) {
        l.attn_norm.setZero();
        l.wq.setZero();
        l.wk.setZero();
        l.wv.setZero();
        l.wo.setZero();
        l.mlp_norm.setZero();
        l.w_up.setZero();
        l.w_down.setZero();
    }
    final_norm.setZero();
    w_meta.setZero();
}

template <class T>
size_t ModelParams<T>::parameter_count() const {
    size_t n = static_cast<size_t>(embed.token.size());
    n += metadata_parameter_count();
    for (const auto& l : layers) {
        n += static_cast<size_t>(l.attn_norm.size() + l.wq.size() + l.wk.size() + l.wv.size() +
                                 l.wo.size() + l.mlp_norm.size() + l.w_up.size() + l.w_down.size());
    }
    n += static_cast<size_t>(final_norm.size());
    n += static_cast<size_t>(w_meta.size());
    return n;
}

template <class T>
size_t ModelParams<T>::metadata_parameter_count() const {
    size_t n = 0;
    for (const auto& d : embed.domain) {
        n += static_cast<size_t>(d.size());
    }
    return n;
}

template <class T>
std::vector<TensorRef<T>> tensor_refs(ModelParams<T>& params, const ModelConfig& config) {
    std::vector<TensorRef<T>> refs;
    auto add = [&refs](std::string name, auto& tensor, bool decay) {
        refs.push_back({std::move(name), tensor.data(), tensor.rows(), tensor.cols(), decay});
    };
    add("embed.token", params.embed.token, true);
    for (size_t d = 0; d < params.embed.domain.size(); ++d) {
        add("embed.meta." + config.domains[d].name, params.embed.domain[d], true);
    }
    for (size_t i = 0; i < params.layers.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i) + ".";
        auto& l = params.layers[i];
        add(prefix + "attn_norm", l.attn_norm, false);
        add(prefix + "wq", l.wq, true);
        add(prefix + "wk", l.wk, true);
        add(prefix + "wv", l.wv, true);
        add(prefix + "wo", l.wo, true);
        add(prefix + "mlp_norm", l.mlp_norm, false);
        add(prefix + "w_up", l.w_up, true);
        add(prefix + "w_down", l.w_down, true);
    }
    add("final_norm", params.final_norm, false);
    if (params.w_meta.size() > 0) {
        add("meta_head", params.w_meta, true);
    }
    return refs;
}

template <class T>
ModelParams<T> init_params(const ModelConfig& config, uint64_t seed) {
    ModelParams<T> p = ModelParams<T>::shaped(config);
    Rng rng(seed);
    auto fill_normal = [&rng](auto& tensor) {
        for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
            for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
                tensor(r, c) = static_cast<T>(rng.next_normal() * 0.02);
            }
        }
    };
    fill_normal(p.embed.token);
    // Metadata tables stay zero so LIME starts exactly at BASE behavior.
    for (auto& l : p.layers) {
        l.attn_norm.setOnes();
        fill_normal(l.wq);
        fill_normal(l.wk);
        fill_normal(l.wv);
        fill_normal(l.wo);
        l.mlp_norm.setOnes();
        fill_normal(l.w_up);
        fill_normal(l.w_down);
    }
    p.final_norm.setOnes();
    if (p.w_meta.size() > 0) {
        fill_normal(p.w_meta);
    }
    return p;
}

ModelInput to_model_input(const PackedBatch& packed) {
    ModelInput in;
    in.batch = static_cast<int>(packed.batch);
    in.seq = static_cast<int>(packed.seq_len);
    in.tokens = packed.inputs;
    in.classes = packed.classes;
    in.targets = packed.targets;
    return in;
}

template <class T>
void forward(const ModelConfig& config, const ModelParams<T>& params, const ModelInput& in,
             Activations<T>& acts) {
    const int B = in.batch;
    const int S = in.seq;
    require(B > 0 && S > 0, "forward: empty batch");
    require(S <= config.seq_len, "forward: sequence longer than configured seq_len");
    const size_t n_pos = static_cast<size_t>(B) * static_cast<size_t>(S);
    require(in.tokens.size() == n_pos, "forward: token count does not match batch shape");
    const int H = config.num_heads;
    const int K = config.num_kv_heads;
    const int dh = config.head_dim();
    const int group = H / K;
    const T eps = static_cast<T>(config.rms_norm_eps);

    acts.batch = B;
    acts.seq = S;
    rope_tables(S, dh, config.rotary_base, acts.cos_tab, acts.sin_tab);
    acts.fused = fuse(in.tokens, in.classes, params.embed, config.mode);
    acts.layers.resize(config.num_layers);

    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    MatX<T> x = acts.fused;
    for (int li = 0; li < config.num_layers; ++li) {
        auto& la = acts.layers[li];
        const auto& lp = params.layers[li];
        la.x_in = x;
        rmsnorm_forward(la.x_in, lp.attn_norm, eps, la.attn_normed, la.attn_inv_rms);
        la.q.noalias() = la.attn_normed * lp.wq;
        la.k.noalias() = la.attn_normed * lp.wk;
        la.v.noalias() = la.attn_normed * lp.wv;
        apply_rope(la.q, B, S, H, dh, acts.cos_tab, acts.sin_tab, false);
        apply_rope(la.k, B, S, K, dh, acts.cos_tab, acts.sin_tab, false);
        la.attn_ctx.resize(la.q.rows(), la.q.cols());
        la.probs.resize(static_cast<size_t>(B) * H);
        for (int b = 0; b < B; ++b) {
            for (int hh = 0; hh < H; ++hh) {
                const int kv = hh / group;
                const Eigen::Index r0 = static_cast<Eigen::Index>(b) * S;
                const auto qb = la.q.block(r0, hh * dh, S, dh);
                const auto kb = la.k.block(r0, kv * dh, S, dh);
                const auto vb = la.v.block(r0, kv * dh, S, dh);
                MatX<T>& probs = la.probs[static_cast<size_t>(b) * H + hh];
                probs.resize(S, S);
                // Causal masking zeroes everything right of the diagonal, so
                // the score and context products run in row blocks that stop
                // at each block's last valid column instead of spanning S.
                for (int rb = 0; rb < S; rb += kAttnBlock) {
                    const int rows = std::min(kAttnBlock, S - rb);
                    const int cols = rb + rows;
                    probs.block(rb, 0, rows, cols).noalias() =
                        qb.middleRows(rb, rows) * kb.topRows(cols).transpose();
                    probs.block(rb, 0, rows, cols) *= scale;
                }
                for (int i = 0; i < S; ++i) {
                    auto row = probs.row(i);
                    const T mx = row.head(i + 1).maxCoeff();
                    row.head(i + 1) = (row.head(i + 1).array() - mx).exp().matrix();
                    row.head(i + 1) /= row.head(i + 1).sum();
                    if (i + 1 < S) {
                        row.tail(S - i - 1).setZero();
                    }
                }
                for (int rb = 0; rb < S; rb += kAttnBlock) {
                    const int rows = std::min(kAttnBlock, S - rb);
                    const int cols = rb + rows;
                    la.attn_ctx.block(r0 + rb, hh * dh, rows, dh).noalias() =
                        probs.block(rb, 0, rows, cols) * vb.topRows(cols);
                }
            }
        }
        la.x_mid = la.x_in;
        la.x_mid.noalias() += la.attn_ctx * lp.wo;
        rmsnorm_forward(la.x_mid, lp.mlp_norm, eps, la.mlp_normed, la.mlp_inv_rms);
        la.up.noalias() = la.mlp_normed * lp.w_up;
        // gelu_tanh applied through packet math; the scalar form costs tens of
        // millions of libm tanh calls per step at this batch size
        {
            const T c0 = T(0.7978845608028654);
            const T c1 = T(0.044715);
            const auto u = la.up.array();
            la.act.resize(la.up.rows(), la.up.cols());
            la.act.array() = (c0 * (u + c1 * u.cube())).tanh();
            la.act.array() = T(0.5) * u * (T(1) + la.act.array());
        }
        x = la.x_mid;
        x.noalias() += la.act * lp.w_down;
    }
    acts.final_in = x;
    rmsnorm_forward(acts.final_in, params.final_norm, eps, acts.final_normed, acts.final_inv_rms);
    acts.logits.noalias() = acts.final_normed * params.embed.token.transpose();
    if (config.metadata_head.enabled()) {
        acts.meta_logits.noalias() = acts.final_normed * params.w_meta;
    } else {
        acts.meta_logits.resize(0, 0);
    }
}

template <class T>
double lm_loss(const MatX<T>& logits, const std::vector<uint32_t>& targets) {
    require(static_cast<size_t>(logits.rows()) == targets.size(),
            "loss: target count does not match logit rows");
    double total = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        require(targets[r] < static_cast<uint32_t>(logits.cols()), "loss: target id out of range");
        const T mx = logits.row(r).maxCoeff();
        const T lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
        total += static_cast<double>(lse - logits(r, targets[r]));
    }
    return total / static_cast<double>(logits.rows());
}

namespace {

// Mean cross-entropy plus its gradient, scaled by `weight` / rows.
template <class T, class Id>
double softmax_ce_grad(const MatX<T>& logits, const std::vector<Id>& targets, double weight,
                       MatX<T>& dlogits) {
    const Eigen::Index n = logits.rows();
    dlogits.resize(n, logits.cols());
    double total = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) {
        require(static_cast<Eigen::Index>(targets[r]) < logits.cols(),
                "loss: target id out of range");
        const T mx = logits.row(r).maxCoeff();
        dlogits.row(r) = (logits.row(r).array() - mx).exp().matrix();
        const T sum = dlogits.row(r).sum();
        total += static_cast<double>(std::log(sum) + mx - logits(r, targets[r]));
        dlogits.row(r) /= sum;
        dlogits(r, targets[r]) -= T(1);
    }
    dlogits *= static_cast<T>(weight / static_cast<double>(n));
    return total / static_cast<double>(n);
}

}  // namespace

template <class T>
LossValue backward(const ModelConfig& config, const ModelParams<T>& params, const ModelInput& in,
                   const Activations<T>& acts, ModelParams<T>& grads,
                   bool embed_grad_scale_by_freq) {
    const int B = in.batch;
    const int S = in.seq;
    const size_t n_pos = static_cast<size_t>(B) * static_cast<size_t>(S);
    require(static_cast<size_t>(acts.logits.rows()) == n_pos,
            "backward: activations do not match the input batch");
    require(in.targets.size() == n_pos, "backward: batch lacks targets");
    const int H = config.num_heads;
    const int K = config.num_kv_heads;
    const int dh = config.head_dim();
    const int group = H / K;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));

    LossValue lv;
    // The LM-head gradient matrix is n x V, around 100 MB at the trained
    // shape, which is past the allocator's mmap ceiling and would fault in
    // fresh pages every step. Row chunks keep the scratch recyclable and
    // cache-resident across the softmax and the two products that consume it.
    const Eigen::Index n_rows = acts.logits.rows();
    const Eigen::Index chunk_rows = std::min<Eigen::Index>(n_rows, 1024);
    MatX<T> dl;
    MatX<T> dfinal(n_rows, acts.final_normed.cols());
    const T inv_n = static_cast<T>(1.0 / static_cast<double>(n_rows));
    double lm_total = 0.0;
    for (Eigen::Index c0 = 0; c0 < n_rows; c0 += chunk_rows) {
        const Eigen::Index m = std::min(chunk_rows, n_rows - c0);
        dl.resize(m, acts.logits.cols());
        for (Eigen::Index i = 0; i < m; ++i) {
            const Eigen::Index r = c0 + i;
            require(static_cast<Eigen::Index>(in.targets[r]) < acts.logits.cols(),
                    "loss: target id out of range");
            const T mx = acts.logits.row(r).maxCoeff();
            dl.row(i) = (acts.logits.row(r).array() - mx).exp().matrix();
            const T sum = dl.row(i).sum();
            lm_total += static_cast<double>(std::log(sum) + mx - acts.logits(r, in.targets[r]));
            dl.row(i) /= sum;
            dl(i, in.targets[r]) -= T(1);
            dl.row(i) *= inv_n;
        }
        grads.embed.token.noalias() += dl.transpose() * acts.final_normed.middleRows(c0, m);
        dfinal.middleRows(c0, m).noalias() = dl * params.embed.token;
    }
    lv.lm = lm_total / static_cast<double>(n_rows);
    lv.total = lv.lm;
    if (config.metadata_head.enabled() && !in.meta_targets.empty()) {
        require(in.meta_targets.size() == n_pos, "backward: metadata target count mismatch");
        MatX<T> dmeta;
        lv.meta = softmax_ce_grad(acts.meta_logits, in.meta_targets,
                                  config.metadata_head.loss_weight, dmeta);
        lv.total += config.metadata_head.loss_weight * lv.meta;
        grads.w_meta.noalias() += acts.final_normed.transpose() * dmeta;
        dfinal.noalias() += dmeta * params.w_meta.transpose();
    }

    MatX<T> dx;
    rmsnorm_backward(acts.final_in, params.final_norm, acts.final_inv_rms, dfinal, dx,
                     grads.final_norm);
    for (int li = config.num_layers - 1; li >= 0; --li) {
        const auto& la = acts.layers[li];
        const auto& lp = params.layers[li];
        auto& lg = grads.layers[li];

        lg.w_down.noalias() += la.act.transpose() * dx;
        MatX<T> dup = dx * lp.w_down.transpose();
        // gelu_tanh_grad in packet form, tanh evaluated once per element; the
        // scratch holds t first, then the full derivative, then the product
        {
            const T c0 = T(0.7978845608028654);
            const T c1 = T(0.044715);
            const auto u = la.up.array();
            MatX<T> gup(la.up.rows(), la.up.cols());
            gup.array() = (c0 * (u + c1 * u.cube())).tanh();
            gup.array() = T(0.5) * (T(1) + gup.array()) +
                          T(0.5) * u * (T(1) - gup.array().square()) *
                              (c0 * (T(1) + T(3) * c1 * u.square()));
            dup.array() *= gup.array();
        }
        lg.w_up.noalias() += la.mlp_normed.transpose() * dup;
        MatX<T> dmn = dup * lp.w_up.transpose();
        MatX<T> dxm;
        rmsnorm_backward(la.x_mid, lp.mlp_norm, la.mlp_inv_rms, dmn, dxm, lg.mlp_norm);
        dxm += dx;

        lg.wo.noalias() += la.attn_ctx.transpose() * dxm;
        MatX<T> dctx = dxm * lp.wo.transpose();
        MatX<T> dq(la.q.rows(), la.q.cols());
        MatX<T> dk = MatX<T>::Zero(la.k.rows(), la.k.cols());
        MatX<T> dv = MatX<T>::Zero(la.v.rows(), la.v.cols());
        MatX<T> dprobs(S, S);
        for (int b = 0; b < B; ++b) {
            for (int hh = 0; hh < H; ++hh) {
                const int kv = hh / group;
                const Eigen::Index r0 = static_cast<Eigen::Index>(b) * S;
                const auto& probs = la.probs[static_cast<size_t>(b) * H + hh];
                const auto dctx_b = dctx.block(r0, hh * dh, S, dh);
                const auto qb = la.q.block(r0, hh * dh, S, dh);
                const auto kb = la.k.block(r0, kv * dh, S, dh);
                const auto vb = la.v.block(r0, kv * dh, S, dh);
                // Same row blocking as the forward pass: entries right of the
                // diagonal are structurally zero, and everything below only
                // ever touches the head(i + 1) prefix of each row.
                for (int rb = 0; rb < S; rb += kAttnBlock) {
                    const int rows = std::min(kAttnBlock, S - rb);
                    const int cols = rb + rows;
                    dprobs.block(rb, 0, rows, cols).noalias() =
                        dctx_b.middleRows(rb, rows) * vb.topRows(cols).transpose();
                    dv.block(r0, kv * dh, cols, dh).noalias() +=
                        probs.block(rb, 0, rows, cols).transpose() * dctx_b.middleRows(rb, rows);
                }
                for (int i = 0; i < S; ++i) {
                    const auto pr = probs.row(i).head(i + 1);
                    auto dr = dprobs.row(i).head(i + 1);
                    const T dot = pr.cwiseProduct(dr).sum();
                    dr = (pr.array() * (dr.array() - dot)).matrix();
                    dr *= scale;
                    // The diagonal block's above-diagonal entries were filled
                    // by the dctx product above and feed the dq/dk products
                    // below, so they must be cleared explicitly.
                    const int be = std::min(S, (i / kAttnBlock + 1) * kAttnBlock);
                    if (be > i + 1) {
                        dprobs.row(i).segment(i + 1, be - i - 1).setZero();
                    }
                }
                for (int rb = 0; rb < S; rb += kAttnBlock) {
                    const int rows = std::min(kAttnBlock, S - rb);
                    const int cols = rb + rows;
                    dq.block(r0 + rb, hh * dh, rows, dh).noalias() =
                        dprobs.block(rb, 0, rows, cols) * kb.topRows(cols);
                    dk.block(r0, kv * dh, cols, dh).noalias() +=
                        dprobs.block(rb, 0, rows, cols).transpose() * qb.middleRows(rb, rows);
                }
            }
        }
        apply_rope(dq, B, S, H, dh, acts.cos_tab, acts.sin_tab, true);
        apply_rope(dk, B, S, K, dh, acts.cos_tab, acts.sin_tab, true);
        lg.wq.noalias() += la.attn_normed.transpose() * dq;
        lg.wk.noalias() += la.attn_normed.transpose() * dk;
        lg.wv.noalias() += la.attn_normed.transpose() * dv;
        MatX<T> dxn = dq * lp.wq.transpose();
        dxn.noalias() += dk * lp.wk.transpose();
        dxn.noalias() += dv * lp.wv.transpose();
        MatX<T> dxi;
        rmsnorm_backward(la.x_in, lp.attn_norm, la.attn_inv_rms, dxn, dxi, lg.attn_norm);
        dx = dxm + dxi;
    }
    fuse_backward(dx, in.tokens, in.classes, params.embed, config.mode, grads.embed,
                  embed_grad_scale_by_freq);
    return lv;
}

double schedule_lr(const OptimConfig& optim, int64_t step) {
    require(optim.total_steps > 0, "schedule: total_steps must be positive");
    const int64_t warmup =
        std::max<int64_t>(1, std::llround(optim.warmup_frac * static_cast<double>(optim.total_steps)));
    if (step < warmup) {
        return optim.peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    if (step >= optim.total_steps) {
        return optim.min_lr;
    }
    const double progress = static_cast<double>(step - warmup) /
                            static_cast<double>(std::max<int64_t>(1, optim.total_steps - warmup));
    return optim.min_lr +
           0.5 * (optim.peak_lr - optim.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <class T>
TrainState<T> init_train_state(const ModelConfig& config, const OptimConfig& optim, uint64_t seed,
                               uint64_t vocab_fingerprint) {
    config.validate();
    require(optim.total_steps > 0, "train state: total_steps must be positive");
    TrainState<T> state;
    state.config = config;
    state.optim = optim;
    state.params = init_params<T>(config, seed);
    state.m = ModelParams<T>::shaped(config);
    state.v = ModelParams<T>::shaped(config);
    state.step = 0;
    state.rng = Rng(seed ^ 0x747261696E657221ULL);
    state.vocab_fingerprint = vocab_fingerprint;
    return state;
}

template <class T>
void adamw_step(TrainState<T>& state, ModelParams<T>& grads) {
    const auto& o = state.optim;
    const double lr = schedule_lr(o, state.step);
    const auto t = static_cast<double>(state.step + 1);
    const T bc1 = static_cast<T>(1.0 - std::pow(o.beta1, t));
    const T bc2 = static_cast<T>(1.0 - std::pow(o.beta2, t));
    const T b1 = static_cast<T>(o.beta1);
    const T b2 = static_cast<T>(o.beta2);
    const T eps = static_cast<T>(o.eps);
    const T wd = static_cast<T>(o.weight_decay);
    const T step_size = static_cast<T>(lr);

    auto pr = tensor_refs(state.params, state.config);
    auto mr = tensor_refs(state.m, state.config);
    auto vr = tensor_refs(state.v, state.config);
    auto gr = tensor_refs(grads, state.config);
    require(pr.size() == gr.size(), "adamw: gradient tensor layout mismatch");
    using Arr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    for (size_t i = 0; i < pr.size(); ++i) {
        require(pr[i].size() == gr[i].size(), "adamw: gradient tensor shape mismatch");
        Arr p(pr[i].data, pr[i].size());
        Arr m(mr[i].data, mr[i].size());
        Arr v(vr[i].data, vr[i].size());
        Arr g(gr[i].data, gr[i].size());
        m = b1 * m + (T(1) - b1) * g;
        v = b2 * v + (T(1) - b2) * g.square();
        if (pr[i].decay) {
            p -= step_size * ((m / bc1) / ((v / bc2).sqrt() + eps) + wd * p);
        } else {
            p -= step_size * ((m / bc1) / ((v / bc2).sqrt() + eps));
        }
    }
}

template <class T>
LossValue train_step(TrainState<T>& state, const ModelInput& batch, Activations<T>& acts,
                     ModelParams<T>& grads) {
    forward(state.config, state.params, batch, acts);
    grads.set_zero();
    const LossValue lv = backward(state.config, state.params, batch, acts, grads,
                                  state.optim.embed_grad_scale_by_freq);
    if (!std::isfinite(lv.total)) {
        fail("train_step: non-finite loss at step ", std::to_string(state.step));
    }
    adamw_step(state, grads);
    ++state.step;
    return lv;
}

template <class T>
LossValue train_step(TrainState<T>& state, const ModelInput& batch) {
    Activations<T> acts;
    ModelParams<T> grads = ModelParams<T>::shaped(state.config);
    return train_step(state, batch, acts, grads);
}

template <class T>
std::vector<uint32_t> generate_greedy(const ModelConfig& config, const ModelParams<T>& params,
                                      const std::vector<uint32_t>& prompt,
                                      const Relabeler& relabel, const GenerateOptions& options) {
    require(!prompt.empty(), "generate: empty prompt");
    const size_t n_domains = config.domains.size();
    if (config.mode != FusionMode::BASE) {
        require(static_cast<bool>(relabel), "generate: metadata fusion modes need a relabeler");
    }
    if (!options.steer.empty()) {
        require(config.mode == FusionMode::LIME_PLUS_ONE,
                "generate: steering needs a look-ahead model");
        require(options.steer.size() == n_domains,
                "generate: steer entries must match domain count");
        for (size_t d = 0; d < n_domains; ++d) {
            require(options.steer[d] < static_cast<int>(config.domains[d].size()),
                    "generate: steer class outside domain schema");
        }
    }
    if (options.use_metadata_head) {
        require(config.mode == FusionMode::LIME_PLUS_ONE && config.metadata_head.enabled(),
                "generate: metadata feedback needs a look-ahead model with a metadata head");
    }

    std::vector<uint32_t> ids = prompt;
    std::vector<uint32_t> out;
    Activations<T> acts;
    for (int step = 0; step < options.max_steps; ++step) {
        std::vector<Annotation> ann;
        if (config.mode != FusionMode::BASE) {
            ann = relabel(ids);
            require(ann.size() == n_domains, "generate: relabeler domain count mismatch");
            for (const auto& a : ann) {
                require(a.size() == ids.size(), "generate: relabeler length mismatch");
            }
        }
        const size_t n = ids.size();
        const size_t w0 = n > static_cast<size_t>(config.seq_len) ? n - config.seq_len : 0;
        const size_t wlen = n - w0;
        ModelInput in;
        in.batch = 1;
        in.seq = static_cast<int>(wlen);
        in.tokens.assign(ids.begin() + static_cast<ptrdiff_t>(w0), ids.end());
        if (config.mode == FusionMode::LIME) {
            in.classes.resize(n_domains);
            for (size_t d = 0; d < n_domains; ++d) {
                in.classes[d].assign(ann[d].begin() + static_cast<ptrdiff_t>(w0), ann[d].end());
            }
        } else if (config.mode == FusionMode::LIME_PLUS_ONE) {
            in.classes.resize(n_domains);
            for (size_t d = 0; d < n_domains; ++d) {
                auto& cls = in.classes[d];
                cls.resize(wlen);
                for (size_t i = 0; i + 1 < wlen; ++i) {
                    cls[i] = ann[d][w0 + i + 1];
                }
                uint16_t upcoming = config.domains[d].x_class;
                if (step == 0 && !options.steer.empty() && options.steer[d] >= 0) {
                    upcoming = static_cast<uint16_t>(options.steer[d]);
                }
                cls[wlen - 1] = upcoming;
            }
        }
        forward(config, params, in, acts);
        if (options.use_metadata_head) {
            // The head predicts the upcoming class from the current context;
            // feeding it back needs a second pass with that class in place.
            const int md = config.metadata_head.domain;
            auto& cls = in.classes[md];
            if (cls[wlen - 1] == config.domains[md].x_class) {
                Eigen::Index best = 0;
                acts.meta_logits.row(static_cast<Eigen::Index>(wlen) - 1).maxCoeff(&best);
                cls[wlen - 1] = static_cast<uint16_t>(best);
                forward(config, params, in, acts);
            }
        }
        Eigen::Index next = 0;
        acts.logits.row(static_cast<Eigen::Index>(wlen) - 1).maxCoeff(&next);
        const auto next_id = static_cast<uint32_t>(next);
        if (next_id == kSeparatorToken && options.stop_at_separator) {
            break;
        }
        ids.push_back(next_id);
        out.push_back(next_id);
    }
    return out;
}

template <class T>
double metadata_head_topk(const MatX<T>& meta_logits, const std::vector<uint16_t>& gold, int k) {
    require(k >= 1, "metadata_head_topk: k must be at least 1");
    require(k <= meta_logits.cols(), "metadata_head_topk: k exceeds class count");
    require(static_cast<size_t>(meta_logits.rows()) == gold.size(),
            "metadata_head_topk: gold count mismatch");
    size_t hits = 0;
    for (Eigen::Index r = 0; r < meta_logits.rows(); ++r) {
        require(gold[r] < meta_logits.cols(), "metadata_head_topk: gold class out of range");
        const T ref = meta_logits(r, gold[r]);
        int above = 0;
        for (Eigen::Index c = 0; c < meta_logits.cols(); ++c) {
            if (meta_logits(r, c) > ref) {
                ++above;
            }
        }
        if (above < k) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(meta_logits.rows());
}

namespace {

constexpr uint32_t kCheckpointVersion = 1;

void write_prefixed(ByteWriter& w, std::string_view s) {
    w.u32(static_cast<uint32_t>(s.size()));
    w.str(s);
}

std::string read_prefixed(ByteReader& r) {
    const uint32_t n = r.u32();
    return r.str(n);
}

std::string config_to_text(const TrainState<float>& state) {
    const auto& c = state.config;
    const auto& o = state.optim;
    std::ostringstream out;
    out << "hidden=" << c.hidden << "\n";
    out << "num_layers=" << c.num_layers << "\n";
    out << "mlp_factor=" << c.mlp_factor << "\n";
    out << "num_heads=" << c.num_heads << "\n";
    out << "num_kv_heads=" << c.num_kv_heads << "\n";
    out << "rms_norm_eps=" << fmt_double(c.rms_norm_eps) << "\n";
    out << "rotary_base=" << fmt_double(c.rotary_base) << "\n";
    out << "seq_len=" << c.seq_len << "\n";
    out << "vocab_size=" << c.vocab_size << "\n";
    out << "mode=" << fusion_mode_name(c.mode) << "\n";
    out << "metadata_head_domain=" << c.metadata_head.domain << "\n";
    out << "metadata_loss_weight=" << fmt_double(c.metadata_head.loss_weight) << "\n";
    out << "peak_lr=" << fmt_double(o.peak_lr) << "\n";
    out << "min_lr=" << fmt_double(o.min_lr) << "\n";
    out << "warmup_frac=" << fmt_double(o.warmup_frac) << "\n";
    out << "total_steps=" << o.total_steps << "\n";
    out << "beta1=" << fmt_double(o.beta1) << "\n";
    out << "beta2=" << fmt_double(o.beta2) << "\n";
    out << "eps=" << fmt_double(o.eps) << "\n";
    out << "weight_decay=" << fmt_double(o.weight_decay) << "\n";
    out << "embed_grad_scale_by_freq=" << (o.embed_grad_scale_by_freq ? 1 : 0) << "\n";
    out << "step=" << state.step << "\n";
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016" PRIx64, state.vocab_fingerprint);
    out << "vocab_fingerprint=" << hex << "\n";
    const auto rng_state = state.rng.state();
    out << "rng=";
    for (int i = 0; i < 4; ++i) {
        std::snprintf(hex, sizeof hex, "%016" PRIx64, rng_state[i]);
        out << (i ? "," : "") << hex;
    }
    out << "\n";
    return out.str();
}

std::map<std::string, std::string> parse_kv_block(const std::string& text) {
    std::map<std::string, std::string> kv;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) {
            eol = text.size();
        }
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) {
            continue;
        }
        const size_t eq = line.find('=');
        require(eq != std::string::npos, "checkpoint: malformed config line");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

const std::string& kv_get(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        fail("checkpoint: missing config key '", key, "'");
    }
    return it->second;
}

int64_t kv_i64(const std::map<std::string, std::string>& kv, const std::string& key) {
    try {
        return std::stoll(kv_get(kv, key));
    } catch (const std::logic_error&) {
        fail("checkpoint: bad integer for key '", key, "'");
    }
}

double kv_f64(const std::map<std::string, std::string>& kv, const std::string& key) {
    try {
        return std::stod(kv_get(kv, key));
    } catch (const std::logic_error&) {
        fail("checkpoint: bad number for key '", key, "'");
    }
}

uint64_t parse_hex64(const std::string& s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

void save_checkpoint(const TrainState<float>& state, const std::string& path) {
    ByteWriter w;
    w.str("LMC1");
    w.u32(kCheckpointVersion);
    write_prefixed(w, config_to_text(state));
    w.u8(static_cast<uint8_t>(state.config.domains.size()));
    for (const auto& d : state.config.domains) {
        write_prefixed(w, d.name);
        w.u16(d.x_class);
        w.u16(d.special_class);
        w.f32(d.weight);
        w.u16(d.size());
        for (const auto& label : d.classes) {
            write_prefixed(w, label);
        }
    }
    auto& mut = const_cast<TrainState<float>&>(state);
    const std::array<std::pair<const char*, ModelParams<float>*>, 3> groups = {
        {{"p.", &mut.params}, {"m.", &mut.m}, {"v.", &mut.v}}};
    uint32_t count = 0;
    for (const auto& g : groups) {
        count += static_cast<uint32_t>(tensor_refs(*g.second, state.config).size());
    }
    w.u32(count);
    for (const auto& [prefix, p] : groups) {
        for (const auto& ref : tensor_refs(*p, state.config)) {
            write_prefixed(w, std::string(prefix) + ref.name);
            w.u64(static_cast<uint64_t>(ref.rows));
            w.u64(static_cast<uint64_t>(ref.cols));
            for (Eigen::Index i = 0; i < ref.size(); ++i) {
                w.f32(ref.data[i]);
            }
        }
    }
    write_file_bytes(path, w.bytes);
}

TrainState<float> load_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path);
    require(r.str(4) == "LMC1", "checkpoint: bad magic, not a model checkpoint");
    require(r.u32() == kCheckpointVersion, "checkpoint: unsupported version");
    const auto kv = parse_kv_block(read_prefixed(r));

    TrainState<float> state;
    auto& c = state.config;
    c.hidden = static_cast<int>(kv_i64(kv, "hidden"));
    c.num_layers = static_cast<int>(kv_i64(kv, "num_layers"));
    c.mlp_factor = static_cast<int>(kv_i64(kv, "mlp_factor"));
    c.num_heads = static_cast<int>(kv_i64(kv, "num_heads"));
    c.num_kv_heads = static_cast<int>(kv_i64(kv, "num_kv_heads"));
    c.rms_norm_eps = kv_f64(kv, "rms_norm_eps");
    c.rotary_base = kv_f64(kv, "rotary_base");
    c.seq_len = static_cast<int>(kv_i64(kv, "seq_len"));
    c.vocab_size = static_cast<int>(kv_i64(kv, "vocab_size"));
    c.mode = fusion_mode_from_name(kv_get(kv, "mode"));
    c.metadata_head.domain = static_cast<int>(kv_i64(kv, "metadata_head_domain"));
    c.metadata_head.loss_weight = kv_f64(kv, "metadata_loss_weight");
    auto& o = state.optim;
    o.peak_lr = kv_f64(kv, "peak_lr");
    o.min_lr = kv_f64(kv, "min_lr");
    o.warmup_frac = kv_f64(kv, "warmup_frac");
    o.total_steps = kv_i64(kv, "total_steps");
    o.beta1 = kv_f64(kv, "beta1");
    o.beta2 = kv_f64(kv, "beta2");
    o.eps = kv_f64(kv, "eps");
    o.weight_decay = kv_f64(kv, "weight_decay");
    o.embed_grad_scale_by_freq = kv_i64(kv, "embed_grad_scale_by_freq") != 0;
    state.step = kv_i64(kv, "step");
    state.vocab_fingerprint = parse_hex64(kv_get(kv, "vocab_fingerprint"));
    {
        const std::string& rng_text = kv_get(kv, "rng");
        std::array<uint64_t, 4> rng_state{};
        size_t pos = 0;
        for (int i = 0; i < 4; ++i) {
            size_t comma = rng_text.find(',', pos);
            if (comma == std::string::npos) {
                comma = rng_text.size();
            }
            rng_state[i] = parse_hex64(rng_text.substr(pos, comma - pos));
            pos = comma + 1;
        }
        state.rng.set_state(rng_state);
    }

    const uint8_t n_domains = r.u8();
    for (uint8_t d = 0; d < n_domains; ++d) {
        DomainSchema schema;
        schema.name = read_prefixed(r);
        schema.x_class = r.u16();
        schema.special_class = r.u16();
        schema.weight = r.f32();
        const uint16_t n_classes = r.u16();
        schema.classes.reserve(n_classes);
        for (uint16_t i = 0; i < n_classes; ++i) {
            schema.classes.push_back(read_prefixed(r));
        }
        c.domains.push_back(std::move(schema));
    }
    c.validate();

    state.params = ModelParams<float>::shaped(c);
    state.m = ModelParams<float>::shaped(c);
    state.v = ModelParams<float>::shaped(c);
    std::map<std::string, TensorRef<float>> by_name;
    const std::array<std::pair<const char*, ModelParams<float>*>, 3> groups = {
        {{"p.", &state.params}, {"m.", &state.m}, {"v.", &state.v}}};
    for (const auto& [prefix, p] : groups) {
        for (const auto& ref : tensor_refs(*p, c)) {
            by_name.emplace(std::string(prefix) + ref.name, ref);
        }
    }
    const uint32_t count = r.u32();
    require(count == by_name.size(), "checkpoint: tensor count does not match config");
    std::set<std::string> seen;
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = read_prefixed(r);
        const auto it = by_name.find(name);
        if (it == by_name.end()) {
            fail("checkpoint: unknown tensor '", name, "'");
        }
        require(seen.insert(name).second, "checkpoint: duplicate tensor");
        const auto rows = static_cast<Eigen::Index>(r.u64());
        const auto cols = static_cast<Eigen::Index>(r.u64());
        require(rows == it->second.rows && cols == it->second.cols,
                "checkpoint: tensor shape does not match config");
        for (Eigen::Index j = 0; j < it->second.size(); ++j) {
            it->second.data[j] = r.f32();
        }
    }
    return state;
}

TrainState<float> load_checkpoint(const std::string& path, uint64_t expected_vocab_fingerprint) {
    TrainState<float> state = load_checkpoint(path);
    if (state.vocab_fingerprint != expected_vocab_fingerprint) {
        fail("checkpoint: vocabulary fingerprint mismatch, refusing to load ", path);
    }
    return state;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template std::vector<TensorRef<float>> tensor_refs(ModelParams<float>&, const ModelConfig&);
template std::vector<TensorRef<double>> tensor_refs(ModelParams<double>&, const ModelConfig&);
template ModelParams<float> init_params<float>(const ModelConfig&, uint64_t);
template ModelParams<double> init_params<double>(const ModelConfig&, uint64_t);
template void forward(const ModelConfig&, const ModelParams<float>&, const ModelInput&,
                      Activations<float>&);
template void forward(const ModelConfig&, const ModelParams<double>&, const ModelInput&,
                      Activations<double>&);
template double lm_loss(const MatX<float>&, const std::vector<uint32_t>&);
template double lm_loss(const MatX<double>&, const std::vector<uint32_t>&);
template LossValue backward(const ModelConfig&, const ModelParams<float>&, const ModelInput&,
                            const Activations<float>&, ModelParams<float>&, bool);
template LossValue backward(const ModelConfig&, const ModelParams<double>&, const ModelInput&,
                            const Activations<double>&, ModelParams<double>&, bool);
template TrainState<float> init_train_state(const ModelConfig&, const OptimConfig&, uint64_t,
                                            uint64_t);
template TrainState<double> init_train_state(const ModelConfig&, const OptimConfig&, uint64_t,
                                             uint64_t);
template void adamw_step(TrainState<float>&, ModelParams<float>&);
template void adamw_step(TrainState<double>&, ModelParams<double>&);
template LossValue train_step(TrainState<float>&, const ModelInput&, Activations<float>&,
                              ModelParams<float>&);
template LossValue train_step(TrainState<double>&, const ModelInput&, Activations<double>&,
                              ModelParams<double>&);
template LossValue train_step(TrainState<float>&, const ModelInput&);
template LossValue train_step(TrainState<double>&, const ModelInput&);
template std::vector<uint32_t> generate_greedy(const ModelConfig&, const ModelParams<float>&,
                                               const std::vector<uint32_t>&, const Relabeler&,
                                               const GenerateOptions&);
template std::vector<uint32_t> generate_greedy(const ModelConfig&, const ModelParams<double>&,
                                               const std::vector<uint32_t>&, const Relabeler&,
                                               const GenerateOptions&);
template double metadata_head_topk(const MatX<float>&, const std::vector<uint16_t>&, int);
template double metadata_head_topk(const MatX<double>&, const std::vector<uint16_t>&, int);

}  // namespace lime
