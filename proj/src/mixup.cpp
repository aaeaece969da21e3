#include "mixpro/mixup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mixpro/kernels.hpp"

namespace mixpro {

namespace {

void check_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("mixup: lambda " + std::to_string(lambda) + " outside [0, 1]");
    }
}

void check_one_hot(const Tensor& y, const char* name) {
    if (y.rank() != 1 || y.size() == 0) {
        throw std::invalid_argument(std::string("label_mixup: ") + name + " must be rank-1");
    }
    std::size_t ones = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 1.0) {
            ++ones;
        } else if (y[i] != 0.0) {
            throw std::invalid_argument(std::string("label_mixup: ") + name + " is not one-hot");
        }
    }
    if (ones != 1) {
        throw std::invalid_argument(std::string("label_mixup: ") + name + " is not one-hot");
    }
}

}  // namespace

void MixupConfig::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("MixupConfig: alpha must be positive");
    if (enable_vanilla_baseline && (enable_token || enable_sentence || enable_template)) {
        throw std::invalid_argument(
            "MixupConfig: the vanilla baseline replaces the three-level path; disable "
            "token/sentence/template mixup with it");
    }
}

double sample_lambda(double alpha, Rng& rng) {
    if (!(alpha > 0.0)) throw std::invalid_argument("sample_lambda: alpha must be positive");
    if (alpha < 1.0) {
        // The U^(1/alpha) boost underflows to zero for small alpha, which
        // would make the ratio 0/0. Carrying the boost in log space keeps the
        // ratio exact; the draw sequence matches Rng::gamma's small-shape path.
        double h1 = rng.gamma(alpha + 1.0);
        double lg1 = std::log(h1) + std::log(rng.uniform_open()) / alpha;
        double h2 = rng.gamma(alpha + 1.0);
        double lg2 = std::log(h2) + std::log(rng.uniform_open()) / alpha;
        return 1.0 / (1.0 + std::exp(lg2 - lg1));
    }
    double g1 = rng.gamma(alpha);
    double g2 = rng.gamma(alpha);
    return g1 / (g1 + g2);
}

Tensor pad_rows(const Tensor& t, std::size_t new_rows) {
    if (t.rank() != 2) throw std::invalid_argument("pad_rows: need rank-2 input");
    std::size_t r = t.shape()[0], c = t.shape()[1];
    if (new_rows < r) throw std::invalid_argument("pad_rows: cannot shrink " + t.shape_str());
    Tensor out({new_rows, c});
    std::copy(t.data(), t.data() + r * c, out.data());
    return out;
}

TokenMixResult token_mixup(const Tensor& e_p, const std::vector<double>& mask_p, const Tensor& e_q,
                           const std::vector<double>& mask_q, double lambda) {
    check_lambda(lambda);
    if (e_p.rank() != 2 || e_q.rank() != 2) {
        throw std::invalid_argument("token_mixup: embeddings must be rank-2");
    }
    if (e_p.shape()[1] != e_q.shape()[1]) {
        throw std::invalid_argument("token_mixup: embedding width mismatch " + e_p.shape_str() +
                                    " vs " + e_q.shape_str());
    }
    if (mask_p.size() != e_p.shape()[0] || mask_q.size() != e_q.shape()[0]) {
        throw std::invalid_argument("token_mixup: attention mask length does not match embeddings");
    }
    std::size_t s = std::max(e_p.shape()[0], e_q.shape()[0]);
    Tensor p = pad_rows(e_p, s);
    Tensor q = pad_rows(e_q, s);
    TokenMixResult out;
    out.embeddings = Tensor({s, e_p.shape()[1]});
    kernels::axpby(lambda, p.data(), 1.0 - lambda, q.data(), out.embeddings.data(),
                   out.embeddings.size());
    out.attention.assign(s, 0.0);
    for (std::size_t i = 0; i < s; ++i) {
        double a = i < mask_p.size() ? mask_p[i] : 0.0;
        double b = i < mask_q.size() ? mask_q[i] : 0.0;
        out.attention[i] = (a != 0.0 || b != 0.0) ? 1.0 : 0.0;
    }
    return out;
}

Tensor sentence_mixup(const Tensor& h_p, const Tensor& h_q, double lambda) {
    check_lambda(lambda);
    if (!h_p.same_shape(h_q)) {
        throw std::invalid_argument("sentence_mixup: shape mismatch " + h_p.shape_str() + " vs " +
                                    h_q.shape_str());
    }
    Tensor out(h_p.shape());
    kernels::axpby(lambda, h_p.data(), 1.0 - lambda, h_q.data(), out.data(), out.size());
    return out;
}

Tensor label_mixup(const Tensor& y_p, const Tensor& y_q, double lambda) {
    check_lambda(lambda);
    check_one_hot(y_p, "y_p");
    check_one_hot(y_q, "y_q");
    if (!y_p.same_shape(y_q)) {
        throw std::invalid_argument("label_mixup: shape mismatch " + y_p.shape_str() + " vs " +
                                    y_q.shape_str());
    }
    Tensor out(y_p.shape());
    kernels::axpby(lambda, y_p.data(), 1.0 - lambda, y_q.data(), out.data(), out.size());
    return out;
}

VanillaMixResult vanilla_mixup(const Tensor& e_a, const std::vector<double>& mask_a,
                               const Tensor& y_a, const Tensor& e_b,
                               const std::vector<double>& mask_b, const Tensor& y_b, double lambda) {
    VanillaMixResult out;
    TokenMixResult tok = token_mixup(e_a, mask_a, e_b, mask_b, lambda);
    out.embeddings = std::move(tok.embeddings);
    out.attention = std::move(tok.attention);
    out.label = label_mixup(y_a, y_b, lambda);
    return out;
}

}  // namespace mixpro
