#include "peasi/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "peasi/errors.hpp"

namespace peasi::nd {

namespace {

constexpr double kLayerNormEps = 1e-9;

// Fixed four-way reassociation: deterministic for a given length and fast,
// since strict left-to-right summation cannot vectorize.
double dot(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeMismatch(std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
}

double gelu_value(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

}  // namespace

Tape::Id Tape::push(Tensor val, std::function<void(Tape&)> back) {
    Node node;
    if (track_) {
        node.grad = Tensor(val.rows(), val.cols());
        node.back = std::move(back);
    }
    node.val = std::move(val);
    nodes_.push_back(std::move(node));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::input(Tensor t) {
    return push(std::move(t), {});
}

Tape::Id Tape::param(Parameter& p) {
    if (!track_) return push(p.value, {});
    Parameter* pp = &p;
    Tensor copy = p.value;
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(copy), [out, pp](Tape& t) {
        const Tensor& g = t.grad(out);
        for (std::size_t i = 0; i < g.size(); ++i) pp->grad[i] += g[i];
    });
}

Tape::Id Tape::matmul(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.rows())
        throw ShapeMismatch("matmul: " + shape_string(A) + " vs " + shape_string(B));
    const int m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C(m, n);
    for (int i = 0; i < m; ++i) {
        const double* arow = A.data() + static_cast<std::size_t>(i) * k;
        double* crow = C.data() + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = B.data() + static_cast<std::size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a, b, m, k, n](Tape& t) {
        const Tensor& G = t.grad(out);
        const Tensor& A2 = t.value(a);
        const Tensor& B2 = t.value(b);
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        // dA += G * B^T
        for (int i = 0; i < m; ++i) {
            const double* grow = G.data() + static_cast<std::size_t>(i) * n;
            for (int l = 0; l < k; ++l) {
                const double* brow = B2.data() + static_cast<std::size_t>(l) * n;
                dA(i, l) += dot(grow, brow, n);
            }
        }
        // dB += A^T * G
        for (int i = 0; i < m; ++i) {
            const double* arow = A2.data() + static_cast<std::size_t>(i) * k;
            const double* grow = G.data() + static_cast<std::size_t>(i) * n;
            for (int l = 0; l < k; ++l) {
                const double av = arow[l];
                if (av == 0.0) continue;
                double* drow = dB.data() + static_cast<std::size_t>(l) * n;
                for (int j = 0; j < n; ++j) drow[j] += av * grow[j];
            }
        }
    });
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols() != B.cols())
        throw ShapeMismatch("matmul_nt: " + shape_string(A) + " vs " + shape_string(B));
    const int m = A.rows(), k = A.cols(), n = B.rows();
    Tensor C(m, n);
    for (int i = 0; i < m; ++i) {
        const double* arow = A.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = B.data() + static_cast<std::size_t>(j) * k;
            C(i, j) = dot(arow, brow, k);
        }
    }
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a, b, m, k, n](Tape& t) {
        const Tensor& G = t.grad(out);
        const Tensor& A2 = t.value(a);
        const Tensor& B2 = t.value(b);
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        // dA += G * B
        for (int i = 0; i < m; ++i) {
            const double* grow = G.data() + static_cast<std::size_t>(i) * n;
            double* darow = dA.data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < n; ++j) {
                const double gv = grow[j];
                if (gv == 0.0) continue;
                const double* brow = B2.data() + static_cast<std::size_t>(j) * k;
                for (int l = 0; l < k; ++l) darow[l] += gv * brow[l];
            }
        }
        // dB += G^T * A
        for (int i = 0; i < m; ++i) {
            const double* grow = G.data() + static_cast<std::size_t>(i) * n;
            const double* arow = A2.data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < n; ++j) {
                const double gv = grow[j];
                if (gv == 0.0) continue;
                double* dbrow = dB.data() + static_cast<std::size_t>(j) * k;
                for (int l = 0; l < k; ++l) dbrow[l] += gv * arow[l];
            }
        }
    });
}

Tape::Id Tape::add(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    require_same_shape(A, B, "add");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a, b](Tape& t) {
        const Tensor& G = t.grad(out);
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        for (std::size_t i = 0; i < G.size(); ++i) {
            dA[i] += G[i];
            dB[i] += G[i];
        }
    });
}

Tape::Id Tape::add_rowvec(Id a, Id row) {
    const Tensor& A = value(a);
    const Tensor& R = value(row);
    if (R.rows() != 1 || R.cols() != A.cols())
        throw ShapeMismatch("add_rowvec: " + shape_string(A) + " vs " + shape_string(R));
    Tensor C = A;
    for (int i = 0; i < C.rows(); ++i)
        for (int j = 0; j < C.cols(); ++j) C(i, j) += R[static_cast<std::size_t>(j)];
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a, row](Tape& t) {
        const Tensor& G = t.grad(out);
        Tensor& dA = t.grad_mut(a);
        Tensor& dR = t.grad_mut(row);
        for (int i = 0; i < G.rows(); ++i)
            for (int j = 0; j < G.cols(); ++j) {
                dA(i, j) += G(i, j);
                dR[static_cast<std::size_t>(j)] += G(i, j);
            }
    });
}

Tape::Id Tape::scale(Id a, double s) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= s;
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a, s](Tape& t) {
        const Tensor& G = t.grad(out);
        Tensor& dA = t.grad_mut(a);
        for (std::size_t i = 0; i < G.size(); ++i) dA[i] += s * G[i];
    });
}

Tape::Id Tape::tanh_of(Id a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = std::tanh(C[i]);
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a](Tape& t) {
        const Tensor& G = t.grad(out);
        const Tensor& Y = t.value(out);
        Tensor& dA = t.grad_mut(a);
        for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] * (1.0 - Y[i] * Y[i]);
    });
}

Tape::Id Tape::gelu(Id a) {
    Tensor C = value(a);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = gelu_value(C[i]);
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a](Tape& t) {
        const Tensor& G = t.grad(out);
        const Tensor& X = t.value(a);
        Tensor& dA = t.grad_mut(a);
        for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] * gelu_derivative(X[i]);
    });
}

Tape::Id Tape::layer_norm(Id x, Id gain, Id bias) {
    const Tensor& X = value(x);
    const Tensor& Gn = value(gain);
    const Tensor& Bs = value(bias);
    if (Gn.rows() != 1 || Gn.cols() != X.cols() || Bs.rows() != 1 || Bs.cols() != X.cols())
        throw ShapeMismatch("layer_norm: " + shape_string(X) + " vs gain " + shape_string(Gn) +
                            " / bias " + shape_string(Bs));
    const int m = X.rows(), n = X.cols();
    Tensor normalized(m, n);
    std::vector<double> inv_std(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += X(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = X(i, j) - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[static_cast<std::size_t>(i)] = inv;
        for (int j = 0; j < n; ++j) normalized(i, j) = (X(i, j) - mean) * inv;
    }
    Tensor Y(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            Y(i, j) = normalized(i, j) * Gn[static_cast<std::size_t>(j)] + Bs[static_cast<std::size_t>(j)];
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(Y), [out, x, gain, bias, m, n, normalized = std::move(normalized),
                               inv_std = std::move(inv_std)](Tape& t) {
        const Tensor& G = t.grad(out);
        const Tensor& Gn2 = t.value(gain);
        Tensor& dX = t.grad_mut(x);
        Tensor& dGain = t.grad_mut(gain);
        Tensor& dBias = t.grad_mut(bias);
        for (int i = 0; i < m; ++i) {
            double mean_h = 0.0, mean_hx = 0.0;
            for (int j = 0; j < n; ++j) {
                const double h = G(i, j) * Gn2[static_cast<std::size_t>(j)];
                mean_h += h;
                mean_hx += h * normalized(i, j);
                dGain[static_cast<std::size_t>(j)] += G(i, j) * normalized(i, j);
                dBias[static_cast<std::size_t>(j)] += G(i, j);
            }
            mean_h /= n;
            mean_hx /= n;
            const double inv = inv_std[static_cast<std::size_t>(i)];
            for (int j = 0; j < n; ++j) {
                const double h = G(i, j) * Gn2[static_cast<std::size_t>(j)];
                dX(i, j) += inv * (h - mean_h - normalized(i, j) * mean_hx);
            }
        }
    });
}

Tape::Id Tape::softmax_rows(Id a, const std::vector<std::uint8_t>* keep) {
    const Tensor& A = value(a);
    const int m = A.rows(), n = A.cols();
    if (keep != nullptr && static_cast<int>(keep->size()) != n)
        throw ShapeMismatch("softmax_rows: mask size " + std::to_string(keep->size()) + " vs " +
                            shape_string(A));
    std::vector<std::uint8_t> mask;
    if (keep != nullptr)
        mask = *keep;
    else
        mask.assign(static_cast<std::size_t>(n), 1);
    bool any = false;
    for (const auto k : mask) any = any || (k != 0);
    if (!any) throw Error("softmax_rows: mask keeps no column");

    Tensor Y(m, n);
    for (int i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j)
            if (mask[static_cast<std::size_t>(j)] && A(i, j) > mx) mx = A(i, j);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (!mask[static_cast<std::size_t>(j)]) continue;
            const double e = std::exp(A(i, j) - mx);
            Y(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < n; ++j)
            if (mask[static_cast<std::size_t>(j)]) Y(i, j) /= sum;
    }
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(Y), [out, a, m, n, mask = std::move(mask)](Tape& t) {
        const Tensor& G = t.grad(out);
        const Tensor& Y2 = t.value(out);
        Tensor& dA = t.grad_mut(a);
        for (int i = 0; i < m; ++i) {
            double dot = 0.0;
            for (int j = 0; j < n; ++j)
                if (mask[static_cast<std::size_t>(j)]) dot += Y2(i, j) * G(i, j);
            for (int j = 0; j < n; ++j)
                if (mask[static_cast<std::size_t>(j)]) dA(i, j) += Y2(i, j) * (G(i, j) - dot);
        }
    });
}

Tape::Id Tape::concat_cols(Id a, Id b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rows() != B.rows())
        throw ShapeMismatch("concat_cols: " + shape_string(A) + " vs " + shape_string(B));
    Tensor C(A.rows(), A.cols() + B.cols());
    for (int i = 0; i < A.rows(); ++i) {
        for (int j = 0; j < A.cols(); ++j) C(i, j) = A(i, j);
        for (int j = 0; j < B.cols(); ++j) C(i, A.cols() + j) = B(i, j);
    }
    const int ac = A.cols(), bc = B.cols();
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a, b, ac, bc](Tape& t) {
        const Tensor& G = t.grad(out);
        Tensor& dA = t.grad_mut(a);
        Tensor& dB = t.grad_mut(b);
        for (int i = 0; i < G.rows(); ++i) {
            for (int j = 0; j < ac; ++j) dA(i, j) += G(i, j);
            for (int j = 0; j < bc; ++j) dB(i, j) += G(i, ac + j);
        }
    });
}

Tape::Id Tape::embedding_rows(Id table, std::vector<int> ids) {
    const Tensor& T = value(table);
    const int d = T.cols();
    for (const int id : ids)
        if (id < 0 || id >= T.rows())
            throw IdOutOfRange("embedding id " + std::to_string(id) + " out of range [0, " +
                               std::to_string(T.rows()) + ")");
    Tensor C(static_cast<int>(ids.size()), d);
    for (std::size_t r = 0; r < ids.size(); ++r)
        for (int j = 0; j < d; ++j) C(static_cast<int>(r), j) = T(ids[r], j);
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, table, ids = std::move(ids), d](Tape& t) {
        const Tensor& G = t.grad(out);
        Tensor& dT = t.grad_mut(table);
        for (std::size_t r = 0; r < ids.size(); ++r)
            for (int j = 0; j < d; ++j) dT(ids[r], j) += G(static_cast<int>(r), j);
    });
}

Tape::Id Tape::slice_cols(Id a, int begin, int count) {
    const Tensor& A = value(a);
    if (begin < 0 || count <= 0 || begin + count > A.cols())
        throw ShapeMismatch("slice_cols: [" + std::to_string(begin) + ", " +
                            std::to_string(begin + count) + ") of " + shape_string(A));
    Tensor C(A.rows(), count);
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < count; ++j) C(i, j) = A(i, begin + j);
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a, begin, count](Tape& t) {
        const Tensor& G = t.grad(out);
        Tensor& dA = t.grad_mut(a);
        for (int i = 0; i < G.rows(); ++i)
            for (int j = 0; j < count; ++j) dA(i, begin + j) += G(i, j);
    });
}

Tape::Id Tape::row(Id a, int r) {
    const Tensor& A = value(a);
    if (r < 0 || r >= A.rows())
        throw ShapeMismatch("row: index " + std::to_string(r) + " of " + shape_string(A));
    Tensor C(1, A.cols());
    for (int j = 0; j < A.cols(); ++j) C[static_cast<std::size_t>(j)] = A(r, j);
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(C), [out, a, r](Tape& t) {
        const Tensor& G = t.grad(out);
        Tensor& dA = t.grad_mut(a);
        for (int j = 0; j < G.cols(); ++j) dA(r, j) += G[static_cast<std::size_t>(j)];
    });
}

Tape::Id Tape::cross_entropy(Id logits, int target, int support) {
    const Tensor& Z = value(logits);
    if (Z.rows() != 1) throw ShapeMismatch("cross_entropy: logits must be 1xN, got " + shape_string(Z));
    if (support < 1 || support > Z.cols())
        throw Error("cross_entropy: support " + std::to_string(support) + " out of range for " +
                    shape_string(Z));
    if (target < 0 || target >= support)
        throw Error("cross_entropy: target " + std::to_string(target) + " outside support " +
                    std::to_string(support));
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < support; ++j) mx = std::max(mx, Z[static_cast<std::size_t>(j)]);
    double sum = 0.0;
    for (int j = 0; j < support; ++j) sum += std::exp(Z[static_cast<std::size_t>(j)] - mx);
    const double lse = mx + std::log(sum);
    Tensor loss = Tensor::scalar(lse - Z[static_cast<std::size_t>(target)]);
    const Id out = static_cast<Id>(nodes_.size());
    return push(std::move(loss), [out, logits, target, support, mx, sum](Tape& t) {
        const double g = t.grad(out)[0];
        const Tensor& Z2 = t.value(logits);
        Tensor& dZ = t.grad_mut(logits);
        for (int j = 0; j < support; ++j) {
            const double p = std::exp(Z2[static_cast<std::size_t>(j)] - mx) / sum;
            dZ[static_cast<std::size_t>(j)] += g * (p - (j == target ? 1.0 : 0.0));
        }
    });
}

void Tape::backward(Id root, double seed) {
    if (!track_) throw Error("backward on a non-tracking tape");
    const Tensor& r = value(root);
    if (r.rows() != 1 || r.cols() != 1)
        throw ShapeMismatch("backward: root must be 1x1, got " + shape_string(r));
    grad_mut(root)[0] += seed;
    for (std::size_t i = static_cast<std::size_t>(root) + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

}  // namespace peasi::nd
