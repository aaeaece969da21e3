#pragma once

#include <cstdint>
#include <vector>

#include "mixpro/rng.hpp"
#include "mixpro/tensor.hpp"

namespace mixpro {

// Switches for the three interpolation levels. The vanilla baseline mixes
// whole training samples instead and excludes the three-level path.
struct MixupConfig {
    double alpha = 0.5;
    bool enable_token = true;
    bool enable_sentence = true;
    bool enable_template = true;
    bool enable_vanilla_baseline = false;

    void validate() const;
};

struct LambdaDraw {
    double value = 1.0;
    std::int64_t step = 0;
};

// Beta(alpha, alpha) via two Gamma draws.
double sample_lambda(double alpha, Rng& rng);

struct TokenMixResult {
    Tensor embeddings;
    std::vector<double> attention;
};

// Interpolates two embedding matrices row by row after zero-padding the
// shorter one on the right to max(S1, S2). The attention mask is the union of
// the two padded masks, so every row that is real in either operand stays
// visible.
TokenMixResult token_mixup(const Tensor& e_p, const std::vector<double>& mask_p, const Tensor& e_q,
                           const std::vector<double>& mask_q, double lambda);

// Interpolates the two answer-position hidden vectors read from one forward
// pass over the mixed sequence.
Tensor sentence_mixup(const Tensor& h_p, const Tensor& h_q, double lambda);

// Interpolates two one-hot label rows with the same lambda as the features.
Tensor label_mixup(const Tensor& y_p, const Tensor& y_q, double lambda);

struct VanillaMixResult {
    Tensor embeddings;
    std::vector<double> attention;
    Tensor label;
};

VanillaMixResult vanilla_mixup(const Tensor& e_a, const std::vector<double>& mask_a,
                               const Tensor& y_a, const Tensor& e_b,
                               const std::vector<double>& mask_b, const Tensor& y_b, double lambda);

// Copies a rank-2 tensor into new_rows rows, zero-filling the added ones.
Tensor pad_rows(const Tensor& t, std::size_t new_rows);

}  // namespace mixpro
