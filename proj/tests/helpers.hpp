#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lime/model.hpp"
#include "lime/schema.hpp"

namespace limetest {

// Two tiny metadata domains used across the model tests. Small class counts
// keep finite-difference sweeps fast while still exercising multi-domain
// fusion.
inline lime::DomainSchema tiny_domain_a() {
    lime::DomainSchema d;
    d.name = "a";
    d.classes = {"A0", "A1", "A2", "A3", "XX"};
    d.x_class = 4;
    d.special_class = 0;
    return d;
}

inline lime::DomainSchema tiny_domain_b() {
    lime::DomainSchema d;
    d.name = "b";
    d.classes = {"B0", "B1", "B2"};
    d.x_class = 2;
    d.special_class = 0;
    d.weight = 0.5f;
    return d;
}

inline lime::ModelConfig tiny_config(lime::FusionMode mode, int vocab = 50, int hidden = 16,
                                     int layers = 2, int seq_len = 12) {
    lime::ModelConfig cfg;
    cfg.vocab_size = vocab;
    cfg.hidden = hidden;
    cfg.num_layers = layers;
    cfg.num_heads = 2;
    cfg.num_kv_heads = 1;
    cfg.mlp_factor = 3;
    cfg.seq_len = seq_len;
    cfg.mode = mode;
    cfg.domains = {tiny_domain_a(), tiny_domain_b()};
    cfg.validate();
    return cfg;
}

// Deterministic random batch for a config. Separate engine from the library
// Rng so test inputs do not depend on library internals.
inline lime::ModelInput random_input(const lime::ModelConfig& cfg, int batch, int seq,
                                     uint64_t seed) {
    std::mt19937_64 rng(seed);
    lime::ModelInput in;
    in.batch = batch;
    in.seq = seq;
    const size_t n = static_cast<size_t>(batch) * seq;
    for (size_t i = 0; i < n; ++i) {
        in.tokens.push_back(static_cast<uint32_t>(rng() % cfg.vocab_size));
        in.targets.push_back(static_cast<uint32_t>(rng() % cfg.vocab_size));
    }
    in.classes.resize(cfg.domains.size());
    for (size_t d = 0; d < cfg.domains.size(); ++d) {
        for (size_t i = 0; i < n; ++i) {
            in.classes[d].push_back(static_cast<uint16_t>(rng() % cfg.domains[d].size()));
        }
    }
    return in;
}

// Straight-line scalar re-implementation of the forward pass. No matrix
// library involved: every product is an explicit loop, so it can only agree
// with the production path if that path computes the documented math.
inline std::vector<double> reference_forward_logits(const lime::ModelConfig& cfg,
                                                    const lime::ModelParams<double>& p,
                                                    const lime::ModelInput& in) {
    const int B = in.batch, S = in.seq, h = cfg.hidden;
    const int H = cfg.num_heads, K = cfg.num_kv_heads, dh = cfg.head_dim();
    const int group = H / K, m = cfg.mlp_hidden(), V = cfg.vocab_size;
    const int n = B * S;
    const double eps = cfg.rms_norm_eps;

    auto rmsnorm = [&](const std::vector<double>& x, const lime::RowX<double>& gain,
                       std::vector<double>& out) {
        out.assign(x.size(), 0.0);
        for (int r = 0; r < n; ++r) {
            double ms = 0.0;
            for (int c = 0; c < h; ++c) {
                ms += x[r * h + c] * x[r * h + c];
            }
            ms /= h;
            const double inv = 1.0 / std::sqrt(ms + eps);
            for (int c = 0; c < h; ++c) {
                out[r * h + c] = x[r * h + c] * gain(0, c) * inv;
            }
        }
    };
    auto matmul = [](const std::vector<double>& x, int rows, int inner,
                     const lime::MatX<double>& w, std::vector<double>& out) {
        const int cols = static_cast<int>(w.cols());
        out.assign(static_cast<size_t>(rows) * cols, 0.0);
        for (int r = 0; r < rows; ++r) {
            for (int k = 0; k < inner; ++k) {
                const double xv = x[static_cast<size_t>(r) * inner + k];
                for (int c = 0; c < cols; ++c) {
                    out[static_cast<size_t>(r) * cols + c] += xv * w(k, c);
                }
            }
        }
    };
    auto rope = [&](std::vector<double>& x, int heads) {
        for (int b = 0; b < B; ++b) {
            for (int pos = 0; pos < S; ++pos) {
                const size_t row = (static_cast<size_t>(b) * S + pos) * heads * dh;
                for (int hh = 0; hh < heads; ++hh) {
                    for (int j = 0; j < dh / 2; ++j) {
                        const double freq = std::pow(cfg.rotary_base, -2.0 * j / dh);
                        const double c = std::cos(pos * freq), s = std::sin(pos * freq);
                        double& a = x[row + hh * dh + 2 * j];
                        double& d = x[row + hh * dh + 2 * j + 1];
                        const double a0 = a, d0 = d;
                        a = a0 * c - d0 * s;
                        d = a0 * s + d0 * c;
                    }
                }
            }
        }
    };

    std::vector<double> x(static_cast<size_t>(n) * h, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < h; ++c) {
            x[static_cast<size_t>(i) * h + c] = p.embed.token(in.tokens[i], c);
        }
        if (cfg.mode != lime::FusionMode::BASE) {
            for (size_t d = 0; d < cfg.domains.size(); ++d) {
                for (int c = 0; c < h; ++c) {
                    x[static_cast<size_t>(i) * h + c] +=
                        p.embed.weights[d] * p.embed.domain[d](in.classes[d][i], c);
                }
            }
        }
    }

    std::vector<double> normed, q, k, v, ctx, mid, up, act, down;
    for (int li = 0; li < cfg.num_layers; ++li) {
        const auto& lp = p.layers[li];
        rmsnorm(x, lp.attn_norm, normed);
        matmul(normed, n, h, lp.wq, q);
        matmul(normed, n, h, lp.wk, k);
        matmul(normed, n, h, lp.wv, v);
        rope(q, H);
        rope(k, K);
        ctx.assign(static_cast<size_t>(n) * H * dh, 0.0);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int b = 0; b < B; ++b) {
            for (int hh = 0; hh < H; ++hh) {
                const int kv = hh / group;
                for (int i = 0; i < S; ++i) {
                    std::vector<double> scores(i + 1, 0.0);
                    double mx = -1e300;
                    for (int j = 0; j <= i; ++j) {
                        double dot = 0.0;
                        for (int c = 0; c < dh; ++c) {
                            dot += q[(static_cast<size_t>(b) * S + i) * H * dh + hh * dh + c] *
                                   k[(static_cast<size_t>(b) * S + j) * K * dh + kv * dh + c];
                        }
                        scores[j] = dot * scale;
                        mx = std::max(mx, scores[j]);
                    }
                    double sum = 0.0;
                    for (int j = 0; j <= i; ++j) {
                        scores[j] = std::exp(scores[j] - mx);
                        sum += scores[j];
                    }
                    for (int j = 0; j <= i; ++j) {
                        const double w = scores[j] / sum;
                        for (int c = 0; c < dh; ++c) {
                            ctx[(static_cast<size_t>(b) * S + i) * H * dh + hh * dh + c] +=
                                w * v[(static_cast<size_t>(b) * S + j) * K * dh + kv * dh + c];
                        }
                    }
                }
            }
        }
        matmul(ctx, n, H * dh, lp.wo, down);
        mid = x;
        for (size_t i = 0; i < mid.size(); ++i) {
            mid[i] += down[i];
        }
        rmsnorm(mid, lp.mlp_norm, normed);
        matmul(normed, n, h, lp.w_up, up);
        act.assign(up.size(), 0.0);
        for (size_t i = 0; i < up.size(); ++i) {
            const double u = up[i];
            const double t = std::tanh(0.7978845608028654 * (u + 0.044715 * u * u * u));
            act[i] = 0.5 * u * (1.0 + t);
        }
        matmul(act, n, m, lp.w_down, down);
        x = mid;
        for (size_t i = 0; i < x.size(); ++i) {
            x[i] += down[i];
        }
    }
    rmsnorm(x, p.final_norm, normed);
    std::vector<double> logits(static_cast<size_t>(n) * V, 0.0);
    for (int r = 0; r < n; ++r) {
        for (int t = 0; t < V; ++t) {
            double dot = 0.0;
            for (int c = 0; c < h; ++c) {
                dot += normed[static_cast<size_t>(r) * h + c] * p.embed.token(t, c);
            }
            logits[static_cast<size_t>(r) * V + t] = dot;
        }
    }
    return logits;
}

// Unique temporary path under the system temp dir; removed pre-emptively so
// tests that assert on creation start clean.
inline std::filesystem::path temp_path(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("lime_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace limetest
