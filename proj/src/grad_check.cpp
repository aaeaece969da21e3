#include "mixpro/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace mixpro {

namespace {

double eval_loss(const TapeProgram& fn, const std::vector<Tensor>& params) {
    Tape tape;
    std::vector<NodeId> ids;
    ids.reserve(params.size());
    for (const Tensor& p : params) ids.push_back(tape.leaf(p));
    NodeId loss = fn(tape, ids);
    const Tensor& v = tape.value(loss);
    if (v.size() != 1) {
        throw std::invalid_argument("finite_difference_check: program must return a scalar loss");
    }
    double out = v[0];
    if (!std::isfinite(out)) {
        throw std::runtime_error("finite_difference_check: loss is not finite");
    }
    return out;
}

}  // namespace

double finite_difference_check(const TapeProgram& fn, const std::vector<Tensor>& params,
                               double step) {
    if (step <= 0.0) throw std::invalid_argument("finite_difference_check: step must be positive");
    if (params.empty()) throw std::invalid_argument("finite_difference_check: no parameters");

    Tape tape;
    std::vector<NodeId> ids;
    ids.reserve(params.size());
    for (const Tensor& p : params) ids.push_back(tape.leaf(p));
    NodeId loss = fn(tape, ids);
    if (tape.value(loss).size() != 1) {
        throw std::invalid_argument("finite_difference_check: program must return a scalar loss");
    }
    if (!std::isfinite(tape.value(loss)[0])) {
        throw std::runtime_error("finite_difference_check: loss is not finite");
    }
    tape.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(ids.size());
    for (NodeId id : ids) analytic.push_back(tape.grad(id));

    double worst = 0.0;
    std::vector<Tensor> probe = params;
    for (std::size_t p = 0; p < probe.size(); ++p) {
        for (std::size_t j = 0; j < probe[p].size(); ++j) {
            double orig = probe[p][j];
            probe[p][j] = orig + step;
            double up = eval_loss(fn, probe);
            probe[p][j] = orig - step;
            double down = eval_loss(fn, probe);
            probe[p][j] = orig;
            double numeric = (up - down) / (2.0 * step);
            double err = std::abs(analytic[p][j] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace mixpro
