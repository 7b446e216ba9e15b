#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace peasi::nd {

// Dense row-major matrix of 64-bit floats. Vectors are 1xN, scalars 1x1.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols) : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows) * cols, 0.0) {}

    static Tensor row_vector(std::vector<double> values) {
        Tensor t;
        t.rows_ = 1;
        t.cols_ = static_cast<int>(values.size());
        t.v_ = std::move(values);
        return t;
    }
    static Tensor scalar(double x) { return row_vector({x}); }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    std::vector<int> shape() const { return {rows_, cols_}; }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    const std::vector<double>& values() const { return v_; }

    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }
    void zero() { fill(0.0); }

    bool operator==(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && v_ == o.v_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> v_;
};

std::string shape_string(const Tensor& t);

// Trainable weight plus its accumulated gradient and Adam state. The moment
// buffers always match the value shape; `step` only ever increases.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;
    std::int64_t step = 0;

    Parameter() = default;
    Parameter(std::string name, Tensor t)
        : name(std::move(name)),
          value(std::move(t)),
          grad(value.rows(), value.cols()),
          m(value.rows(), value.cols()),
          v(value.rows(), value.cols()) {}

    void zero_grad() { grad.zero(); }
};

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam update over every parameter; gradients are
// zeroed afterwards.
void adam_step(std::span<Parameter* const> params, const AdamOptions& opt);

}  // namespace peasi::nd
