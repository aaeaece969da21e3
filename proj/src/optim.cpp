#include "mixpro/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mixpro {

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("Adam::step: " + std::to_string(params.size()) + " params vs " +
                                    std::to_string(grads.size()) + " grads");
    }
    if (m_.empty()) {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const Tensor* p : params) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    } else if (m_.size() != params.size()) {
        throw std::invalid_argument("Adam::step: parameter count changed between steps");
    }
    ++t_;
    double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (!p.same_shape(g)) {
            throw std::invalid_argument("Adam::step: grad shape " + g.shape_str() +
                                        " does not match param " + p.shape_str());
        }
        g.ensure_finite("Adam::step gradient");
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
            v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
            double mhat = m[j] / bc1;
            double vhat = v[j] / bc2;
            p[j] = p[j] * (1.0 - config_.lr * config_.weight_decay) -
                   config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
        p.ensure_finite("Adam::step parameter");
    }
}

double global_norm(const std::vector<Tensor>& grads) {
    double sq = 0.0;
    for (const Tensor& g : grads) {
        for (std::size_t j = 0; j < g.size(); ++j) sq += g[j] * g[j];
    }
    return std::sqrt(sq);
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
    if (max_norm <= 0.0) throw std::invalid_argument("clip_global_norm: max_norm must be positive");
    double norm = global_norm(grads);
    if (norm < 1e-12 || norm <= max_norm) return norm;
    double s = max_norm / norm;
    for (Tensor& g : grads) {
        for (std::size_t j = 0; j < g.size(); ++j) g[j] *= s;
    }
    return norm;
}

}  // namespace mixpro
