#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "lime/common.hpp"
#include "lime/schema.hpp"

namespace lime {

template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowX = Eigen::Matrix<T, 1, Eigen::Dynamic, Eigen::RowMajor>;

enum class FusionMode : uint8_t { BASE, LIME, LIME_PLUS_ONE };

const char* fusion_mode_name(FusionMode mode);
FusionMode fusion_mode_from_name(std::string_view name);

// Token table W_L [|V_sw| × h] plus one metadata table per domain
// [|C_d| × h], each with its fusion weight. Metadata tables start at zero so
// a freshly initialized LIME model computes exactly what BASE computes.
template <class T>
struct EmbeddingTables {
    MatX<T> token;
    std::vector<MatX<T>> domain;
    std::vector<T> weights;

    Eigen::Index hidden() const { return token.cols(); }
};

// out[i] = ann[i+1], padded with the domain's x_class at the end.
Annotation shift_lookahead(const Annotation& ann, const DomainSchema& domain);

// Eq. 1: row i = W_L[token_ids[i]] + Σ_d w_d · W_d[class_ids[d][i]].
// BASE ignores class ids entirely. LIME+1 callers pass already-shifted class
// ids; the kernel itself is mode-agnostic beyond that.
template <class T>
MatX<T> fuse(const std::vector<uint32_t>& token_ids,
             const std::vector<std::vector<uint16_t>>& class_ids, const EmbeddingTables<T>& tables,
             FusionMode mode) {
    const auto n = static_cast<Eigen::Index>(token_ids.size());
    MatX<T> out(n, tables.hidden());
    for (Eigen::Index i = 0; i < n; ++i) {
        require(token_ids[i] < tables.token.rows(), "fuse: token id out of range");
        out.row(i) = tables.token.row(token_ids[i]);
    }
    if (mode == FusionMode::BASE) {
        return out;
    }
    require(class_ids.size() == tables.domain.size(), "fuse: domain count mismatch");
    for (size_t d = 0; d < tables.domain.size(); ++d) {
        require(class_ids[d].size() == token_ids.size(), "fuse: class sequence length mismatch");
        const T w = tables.weights[d];
        for (Eigen::Index i = 0; i < n; ++i) {
            require(class_ids[d][i] < tables.domain[d].rows(), "fuse: class id out of range");
            out.row(i) += w * tables.domain[d].row(class_ids[d][i]);
        }
    }
    return out;
}

// Scatter-add transpose of fuse. grad W_L[t] collects the rows where
// token_ids = t; grad W_d[c] collects w_d times the rows where class = c.
// With scale_by_batch_freq each id's accumulated gradient is divided by its
// occurrence count within this call.
template <class T>
void fuse_backward(const MatX<T>& grad_out, const std::vector<uint32_t>& token_ids,
                   const std::vector<std::vector<uint16_t>>& class_ids,
                   const EmbeddingTables<T>& tables, FusionMode mode, EmbeddingTables<T>& grads,
                   bool scale_by_batch_freq = false) {
    const auto n = static_cast<Eigen::Index>(token_ids.size());
    require(grad_out.rows() == n, "fuse_backward: row count mismatch");
    require(grad_out.cols() == tables.hidden(), "fuse_backward: hidden size mismatch");
    std::vector<uint32_t> token_freq;
    if (scale_by_batch_freq) {
        token_freq.assign(static_cast<size_t>(tables.token.rows()), 0);
        for (const uint32_t t : token_ids) {
            ++token_freq[t];
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const T s = scale_by_batch_freq ? T(1) / static_cast<T>(token_freq[token_ids[i]]) : T(1);
        grads.token.row(token_ids[i]) += s * grad_out.row(i);
    }
    if (mode == FusionMode::BASE) {
        return;
    }
    require(class_ids.size() == tables.domain.size(), "fuse_backward: domain count mismatch");
    std::vector<uint32_t> class_freq;
    for (size_t d = 0; d < tables.domain.size(); ++d) {
        const T w = tables.weights[d];
        if (scale_by_batch_freq) {
            class_freq.assign(static_cast<size_t>(tables.domain[d].rows()), 0);
            for (const uint16_t c : class_ids[d]) {
                ++class_freq[c];
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const uint16_t c = class_ids[d][i];
            const T s = scale_by_batch_freq ? T(1) / static_cast<T>(class_freq[c]) : T(1);
            grads.domain[d].row(c) += (w * s) * grad_out.row(i);
        }
    }
}

}  // namespace lime
