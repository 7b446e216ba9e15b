#include "peasi/tensor.hpp"

#include <cmath>

namespace peasi::nd {

std::string shape_string(const Tensor& t) {
    return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

void adam_step(std::span<Parameter* const> params, const AdamOptions& opt) {
    for (Parameter* p : params) {
        p->step += 1;
        const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(p->step));
        const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(p->step));
        const std::size_t n = p->value.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double g = p->grad[i];
            p->m[i] = opt.beta1 * p->m[i] + (1.0 - opt.beta1) * g;
            p->v[i] = opt.beta2 * p->v[i] + (1.0 - opt.beta2) * g * g;
            const double m_hat = p->m[i] / bc1;
            const double v_hat = p->v[i] / bc2;
            p->value[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
        }
        p->zero_grad();
    }
}

}  // namespace peasi::nd
