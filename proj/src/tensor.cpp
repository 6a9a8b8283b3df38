#include "gp3/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "gp3/kernels.hpp"

namespace gp3::ad {

size_t shape_size(const Shape& s) {
    size_t n = 1;
    for (int d : s) n *= static_cast<size_t>(d);
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool needs_grad = false;
    bool is_leaf = false;
    bool consumed = false;
    std::vector<double> grad;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void()> backfn;

    size_t size() const { return data.size(); }

    std::vector<double>& grad_buf() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

}  // namespace detail

using detail::TensorImpl;

Tensor wrap_impl(std::shared_ptr<TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

namespace {

std::shared_ptr<TensorImpl> new_impl(Shape shape, std::vector<double> data) {
    auto impl = std::make_shared<TensorImpl>();
    if (shape_size(shape) != data.size())
        throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(data.size()) + " elements");
    for (int d : shape)
        if (d <= 0) throw std::invalid_argument("tensor: non-positive extent in " + shape_str(shape));
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    return impl;
}

bool any_needs(const std::vector<Tensor>& ps) {
    for (const auto& p : ps)
        if (p.impl()->needs_grad) return true;
    return false;
}

// Builds an op node. The backward closure is only attached when some parent
// participates in differentiation.
Tensor make_op(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
               const std::function<std::function<void()>(TensorImpl*)>& make_backfn) {
    auto impl = new_impl(std::move(shape), std::move(data));
    if (any_needs(parents)) {
        impl->needs_grad = true;
        impl->parents.reserve(parents.size());
        for (auto& p : parents) impl->parents.push_back(p.handle());
        impl->backfn = make_backfn(impl.get());
    }
    return wrap_impl(impl);
}

void accum(TensorImpl* t, size_t i, double v) {
    if (t->needs_grad) t->grad_buf()[i] += v;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

void check_defined(const char* op, const Tensor& a) {
    if (!a.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
}

int last_dim(const Tensor& a) { return a.shape().back(); }

}  // namespace

// ---- Tensor members ----

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    auto impl = new_impl(std::move(shape), std::move(data));
    impl->needs_grad = requires_grad;
    impl->is_leaf = true;
    return wrap_impl(impl);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    size_t n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    size_t n = shape_size(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }
int Tensor::dim(int i) const { return impl_->shape.at(i); }
size_t Tensor::size() const { return impl_->data.size(); }
double* Tensor::raw() { return impl_->data.data(); }
const double* Tensor::raw() const { return impl_->data.data(); }
std::vector<double>& Tensor::data() { return impl_->data; }
const std::vector<double>& Tensor::data() const { return impl_->data; }
bool Tensor::requires_grad() const { return impl_->needs_grad; }
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (impl_->grad.empty()) {
        if (!impl_->is_leaf || !impl_->needs_grad)
            throw std::runtime_error("grad: no gradient recorded for this tensor");
        impl_->grad.assign(impl_->data.size(), 0.0);
    }
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (size() != 1)
        throw std::invalid_argument("item: tensor has shape " + shape_str(shape()));
    return impl_->data[0];
}

// ---- elementwise binary ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_defined("add", a);
    check_defined("add", b);
    check_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.raw()[i] + b.raw()[i];
    TensorImpl *pa = a.impl(), *pb = b.impl();
    return make_op(a.shape(), std::move(out), {a, b}, [pa, pb](TensorImpl* o) {
        return [pa, pb, o] {
            for (size_t i = 0; i < o->grad.size(); ++i) {
                accum(pa, i, o->grad[i]);
                accum(pb, i, o->grad[i]);
            }
        };
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_defined("sub", a);
    check_defined("sub", b);
    check_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.raw()[i] - b.raw()[i];
    TensorImpl *pa = a.impl(), *pb = b.impl();
    return make_op(a.shape(), std::move(out), {a, b}, [pa, pb](TensorImpl* o) {
        return [pa, pb, o] {
            for (size_t i = 0; i < o->grad.size(); ++i) {
                accum(pa, i, o->grad[i]);
                accum(pb, i, -o->grad[i]);
            }
        };
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_defined("mul", a);
    check_defined("mul", b);
    check_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.raw()[i] * b.raw()[i];
    TensorImpl *pa = a.impl(), *pb = b.impl();
    return make_op(a.shape(), std::move(out), {a, b}, [pa, pb](TensorImpl* o) {
        return [pa, pb, o] {
            for (size_t i = 0; i < o->grad.size(); ++i) {
                accum(pa, i, o->grad[i] * pb->data[i]);
                accum(pb, i, o->grad[i] * pa->data[i]);
            }
        };
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_defined("div", a);
    check_defined("div", b);
    check_same_shape("div", a, b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) {
        if (b.raw()[i] == 0.0)
            throw std::invalid_argument("div: zero divisor at index " + std::to_string(i));
        out[i] = a.raw()[i] / b.raw()[i];
    }
    TensorImpl *pa = a.impl(), *pb = b.impl();
    return make_op(a.shape(), std::move(out), {a, b}, [pa, pb](TensorImpl* o) {
        return [pa, pb, o] {
            for (size_t i = 0; i < o->grad.size(); ++i) {
                const double bi = pb->data[i];
                accum(pa, i, o->grad[i] / bi);
                accum(pb, i, -o->grad[i] * pa->data[i] / (bi * bi));
            }
        };
    });
}

// ---- scalar / unary ----

Tensor add_scalar(const Tensor& a, double s) {
    check_defined("add_scalar", a);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.raw()[i] + s;
    TensorImpl* pa = a.impl();
    return make_op(a.shape(), std::move(out), {a}, [pa](TensorImpl* o) {
        return [pa, o] {
            for (size_t i = 0; i < o->grad.size(); ++i) accum(pa, i, o->grad[i]);
        };
    });
}

Tensor mul_scalar(const Tensor& a, double s) {
    check_defined("mul_scalar", a);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.raw()[i] * s;
    TensorImpl* pa = a.impl();
    return make_op(a.shape(), std::move(out), {a}, [pa, s](TensorImpl* o) {
        return [pa, s, o] {
            for (size_t i = 0; i < o->grad.size(); ++i) accum(pa, i, o->grad[i] * s);
        };
    });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& a, Fwd fwd, Bwd dfdx_from_xy) {
    check_defined(name, a);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.raw()[i]);
    TensorImpl* pa = a.impl();
    return make_op(a.shape(), std::move(out), {a}, [pa, dfdx_from_xy](TensorImpl* o) {
        return [pa, dfdx_from_xy, o] {
            for (size_t i = 0; i < o->grad.size(); ++i)
                accum(pa, i, o->grad[i] * dfdx_from_xy(pa->data[i], o->data[i]));
        };
    });
}

}  // namespace

Tensor exp(const Tensor& a) {
    return unary_op("exp", a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    check_defined("log", a);
    for (size_t i = 0; i < a.size(); ++i)
        if (a.raw()[i] <= 0.0)
            throw std::invalid_argument("log: non-positive input " + std::to_string(a.raw()[i]) +
                                        " at index " + std::to_string(i));
    return unary_op("log", a, [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    check_defined("sqrt", a);
    for (size_t i = 0; i < a.size(); ++i)
        if (a.raw()[i] < 0.0)
            throw std::invalid_argument("sqrt: negative input " + std::to_string(a.raw()[i]) +
                                        " at index " + std::to_string(i));
    return unary_op("sqrt", a, [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& a) {
    return unary_op("abs", a, [](double x) { return std::abs(x); },
                    [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor tanh(const Tensor& a) {
    return unary_op("tanh", a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op("sigmoid", a,
                    [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return unary_op("gelu", a,
                    [=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
                    [=](double x, double) {
                        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                        const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                        return cdf + x * pdf;
                    });
}

Tensor softplus(const Tensor& a) {
    return unary_op("softplus", a,
                    [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
                    [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined("matmul", a);
    check_defined("matmul", b);
    if (a.ndim() != 2 || b.ndim() != 2)
        throw std::invalid_argument("matmul: expects 2-D operands, got " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    if (a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) +
                                    " x " + shape_str(b.shape()));
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    std::vector<double> out(static_cast<size_t>(n) * m);
    kernels::matmul(a.raw(), b.raw(), out.data(), n, k, m);
    TensorImpl *pa = a.impl(), *pb = b.impl();
    return make_op({n, m}, std::move(out), {a, b}, [pa, pb, n, k, m](TensorImpl* o) {
        return [pa, pb, n, k, m, o] {
            if (pa->needs_grad) {
                std::vector<double> da(static_cast<size_t>(n) * k);
                kernels::matmul_nt(o->grad.data(), pb->data.data(), da.data(), n, m, k);
                auto& g = pa->grad_buf();
                for (size_t i = 0; i < g.size(); ++i) g[i] += da[i];
            }
            if (pb->needs_grad) {
                std::vector<double> db(static_cast<size_t>(k) * m);
                kernels::matmul_tn(pa->data.data(), o->grad.data(), db.data(), k, n, m, false);
                auto& g = pb->grad_buf();
                for (size_t i = 0; i < g.size(); ++i) g[i] += db[i];
            }
        };
    });
}

Tensor transpose(const Tensor& a) {
    check_defined("transpose", a);
    if (a.ndim() != 2)
        throw std::invalid_argument("transpose: expects 2-D, got " + shape_str(a.shape()));
    const int n = a.dim(0), m = a.dim(1);
    std::vector<double> out(a.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[static_cast<size_t>(j) * n + i] = a.raw()[static_cast<size_t>(i) * m + j];
    TensorImpl* pa = a.impl();
    return make_op({m, n}, std::move(out), {a}, [pa, n, m](TensorImpl* o) {
        return [pa, n, m, o] {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j)
                    accum(pa, static_cast<size_t>(i) * m + j, o->grad[static_cast<size_t>(j) * n + i]);
        };
    });
}

// ---- structure ----

Tensor reshape(const Tensor& a, Shape shape) {
    check_defined("reshape", a);
    if (shape_size(shape) != a.size())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    TensorImpl* pa = a.impl();
    return make_op(std::move(shape), a.data(), {a}, [pa](TensorImpl* o) {
        return [pa, o] {
            for (size_t i = 0; i < o->grad.size(); ++i) accum(pa, i, o->grad[i]);
        };
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    const int m = parts[0].ndim() == 2 ? parts[0].dim(1) : -1;
    int rows = 0;
    for (const auto& p : parts) {
        check_defined("concat_rows", p);
        if (p.ndim() != 2 || p.dim(1) != m)
            throw std::invalid_argument("concat_rows: incompatible part " + shape_str(p.shape()));
        rows += p.dim(0);
    }
    std::vector<double> out;
    out.reserve(static_cast<size_t>(rows) * m);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    std::vector<TensorImpl*> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    return make_op({rows, m}, std::move(out), parts, [impls](TensorImpl* o) {
        return [impls, o] {
            size_t off = 0;
            for (TensorImpl* p : impls) {
                for (size_t i = 0; i < p->data.size(); ++i) accum(p, i, o->grad[off + i]);
                off += p->data.size();
            }
        };
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const int n = parts[0].ndim() == 2 ? parts[0].dim(0) : -1;
    int cols = 0;
    for (const auto& p : parts) {
        check_defined("concat_cols", p);
        if (p.ndim() != 2 || p.dim(0) != n)
            throw std::invalid_argument("concat_cols: incompatible part " + shape_str(p.shape()));
        cols += p.dim(1);
    }
    std::vector<double> out(static_cast<size_t>(n) * cols);
    size_t coff = 0;
    for (const auto& p : parts) {
        const int pm = p.dim(1);
        for (int i = 0; i < n; ++i)
            std::memcpy(out.data() + static_cast<size_t>(i) * cols + coff,
                        p.raw() + static_cast<size_t>(i) * pm, sizeof(double) * pm);
        coff += pm;
    }
    std::vector<TensorImpl*> impls;
    std::vector<int> widths;
    for (const auto& p : parts) {
        impls.push_back(p.impl());
        widths.push_back(p.dim(1));
    }
    return make_op({n, cols}, std::move(out), parts, [impls, widths, n, cols](TensorImpl* o) {
        return [impls, widths, n, cols, o] {
            size_t coff = 0;
            for (size_t pi = 0; pi < impls.size(); ++pi) {
                const int pm = widths[pi];
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < pm; ++j)
                        accum(impls[pi], static_cast<size_t>(i) * pm + j,
                              o->grad[static_cast<size_t>(i) * cols + coff + j]);
                coff += pm;
            }
        };
    });
}

Tensor slice_rows(const Tensor& a, int start, int len) {
    check_defined("slice_rows", a);
    if (a.ndim() != 2) throw std::invalid_argument("slice_rows: expects 2-D");
    if (start < 0 || len <= 0 || start + len > a.dim(0))
        throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of " +
                                    shape_str(a.shape()));
    const int m = a.dim(1);
    std::vector<double> out(a.raw() + static_cast<size_t>(start) * m,
                            a.raw() + static_cast<size_t>(start + len) * m);
    TensorImpl* pa = a.impl();
    return make_op({len, m}, std::move(out), {a}, [pa, start, m](TensorImpl* o) {
        return [pa, start, m, o] {
            const size_t base = static_cast<size_t>(start) * m;
            for (size_t i = 0; i < o->grad.size(); ++i) accum(pa, base + i, o->grad[i]);
        };
    });
}

Tensor slice_cols(const Tensor& a, int start, int len) {
    check_defined("slice_cols", a);
    if (a.ndim() != 2) throw std::invalid_argument("slice_cols: expects 2-D");
    if (start < 0 || len <= 0 || start + len > a.dim(1))
        throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of " +
                                    shape_str(a.shape()));
    const int n = a.dim(0), m = a.dim(1);
    std::vector<double> out(static_cast<size_t>(n) * len);
    for (int i = 0; i < n; ++i)
        std::memcpy(out.data() + static_cast<size_t>(i) * len,
                    a.raw() + static_cast<size_t>(i) * m + start, sizeof(double) * len);
    TensorImpl* pa = a.impl();
    return make_op({n, len}, std::move(out), {a}, [pa, start, n, m, len](TensorImpl* o) {
        return [pa, start, n, m, len, o] {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < len; ++j)
                    accum(pa, static_cast<size_t>(i) * m + start + j,
                          o->grad[static_cast<size_t>(i) * len + j]);
        };
    });
}

// ---- normalizations ----

Tensor softmax(const Tensor& a) {
    check_defined("softmax", a);
    const int d = last_dim(a);
    const size_t rows = a.size() / d;
    std::vector<double> out(a.size());
    for (size_t r = 0; r < rows; ++r) {
        const double* x = a.raw() + r * d;
        double* y = out.data() + r * d;
        double mx = x[0];
        for (int j = 1; j < d; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (int j = 0; j < d; ++j) {
            y[j] = std::exp(x[j] - mx);
            z += y[j];
        }
        for (int j = 0; j < d; ++j) y[j] /= z;
    }
    TensorImpl* pa = a.impl();
    return make_op(a.shape(), std::move(out), {a}, [pa, d, rows](TensorImpl* o) {
        return [pa, d, rows, o] {
            for (size_t r = 0; r < rows; ++r) {
                const double* y = o->data.data() + r * d;
                const double* go = o->grad.data() + r * d;
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += go[j] * y[j];
                for (int j = 0; j < d; ++j) accum(pa, r * d + j, y[j] * (go[j] - dot));
            }
        };
    });
}

Tensor layer_norm(const Tensor& a, double eps) {
    check_defined("layer_norm", a);
    const int d = last_dim(a);
    const size_t rows = a.size() / d;
    std::vector<double> out(a.size());
    std::vector<double> inv_std(rows);
    for (size_t r = 0; r < rows; ++r) {
        const double* x = a.raw() + r * d;
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += x[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int j = 0; j < d; ++j) out[r * d + j] = (x[j] - mu) * is;
    }
    TensorImpl* pa = a.impl();
    return make_op(a.shape(), std::move(out), {a},
                   [pa, d, rows, inv_std = std::move(inv_std)](TensorImpl* o) {
                       return [pa, d, rows, inv_std, o] {
                           for (size_t r = 0; r < rows; ++r) {
                               const double* xh = o->data.data() + r * d;
                               const double* go = o->grad.data() + r * d;
                               double mg = 0.0, mgx = 0.0;
                               for (int j = 0; j < d; ++j) {
                                   mg += go[j];
                                   mgx += go[j] * xh[j];
                               }
                               mg /= d;
                               mgx /= d;
                               for (int j = 0; j < d; ++j)
                                   accum(pa, r * d + j, inv_std[r] * (go[j] - mg - xh[j] * mgx));
                           }
                       };
                   });
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
    check_defined("sum", a);
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.raw()[i];
    TensorImpl* pa = a.impl();
    return make_op({1}, {s}, {a}, [pa](TensorImpl* o) {
        return [pa, o] {
            for (size_t i = 0; i < pa->data.size(); ++i) accum(pa, i, o->grad[0]);
        };
    });
}

Tensor mean(const Tensor& a) {
    check_defined("mean", a);
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.raw()[i];
    const double inv_n = 1.0 / static_cast<double>(a.size());
    TensorImpl* pa = a.impl();
    return make_op({1}, {s * inv_n}, {a}, [pa, inv_n](TensorImpl* o) {
        return [pa, inv_n, o] {
            for (size_t i = 0; i < pa->data.size(); ++i) accum(pa, i, o->grad[0] * inv_n);
        };
    });
}

// ---- broadcasts ----

namespace {
int rowvec_width(const char* op, const Tensor& v) {
    if (v.ndim() == 1) return v.dim(0);
    if (v.ndim() == 2 && v.dim(0) == 1) return v.dim(1);
    throw std::invalid_argument(std::string(op) + ": vector operand has shape " +
                                shape_str(v.shape()));
}
}  // namespace

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
    check_defined("mul_rowvec", x);
    check_defined("mul_rowvec", v);
    const int d = rowvec_width("mul_rowvec", v);
    if (last_dim(x) != d)
        throw std::invalid_argument("mul_rowvec: shape mismatch " + shape_str(x.shape()) +
                                    " vs " + shape_str(v.shape()));
    const size_t rows = x.size() / d;
    std::vector<double> out(x.size());
    for (size_t r = 0; r < rows; ++r)
        for (int j = 0; j < d; ++j) out[r * d + j] = x.raw()[r * d + j] * v.raw()[j];
    TensorImpl *px = x.impl(), *pv = v.impl();
    return make_op(x.shape(), std::move(out), {x, v}, [px, pv, d, rows](TensorImpl* o) {
        return [px, pv, d, rows, o] {
            for (size_t r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) {
                    accum(px, r * d + j, o->grad[r * d + j] * pv->data[j]);
                    accum(pv, j, o->grad[r * d + j] * px->data[r * d + j]);
                }
        };
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    check_defined("add_rowvec", x);
    check_defined("add_rowvec", v);
    const int d = rowvec_width("add_rowvec", v);
    if (last_dim(x) != d)
        throw std::invalid_argument("add_rowvec: shape mismatch " + shape_str(x.shape()) +
                                    " vs " + shape_str(v.shape()));
    const size_t rows = x.size() / d;
    std::vector<double> out(x.size());
    for (size_t r = 0; r < rows; ++r)
        for (int j = 0; j < d; ++j) out[r * d + j] = x.raw()[r * d + j] + v.raw()[j];
    TensorImpl *px = x.impl(), *pv = v.impl();
    return make_op(x.shape(), std::move(out), {x, v}, [px, pv, d, rows](TensorImpl* o) {
        return [px, pv, d, rows, o] {
            for (size_t r = 0; r < rows; ++r)
                for (int j = 0; j < d; ++j) {
                    accum(px, r * d + j, o->grad[r * d + j]);
                    accum(pv, j, o->grad[r * d + j]);
                }
        };
    });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
    check_defined("scale_by", x);
    check_defined("scale_by", s);
    if (s.size() != 1)
        throw std::invalid_argument("scale_by: scale must be scalar, got " + shape_str(s.shape()));
    const double sv = s.raw()[0];
    std::vector<double> out(x.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.raw()[i] * sv;
    TensorImpl *px = x.impl(), *ps = s.impl();
    return make_op(x.shape(), std::move(out), {x, s}, [px, ps](TensorImpl* o) {
        return [px, ps, o] {
            const double sv = ps->data[0];
            double ds = 0.0;
            for (size_t i = 0; i < o->grad.size(); ++i) {
                accum(px, i, o->grad[i] * sv);
                ds += o->grad[i] * px->data[i];
            }
            accum(ps, 0, ds);
        };
    });
}

// ---- image ops ----

Tensor extract_patches(const Tensor& img, int patch) {
    check_defined("extract_patches", img);
    if (img.ndim() != 2 && img.ndim() != 3)
        throw std::invalid_argument("extract_patches: expects {H,W} or {H,W,C}, got " +
                                    shape_str(img.shape()));
    const int h = img.dim(0), w = img.dim(1);
    const int c = img.ndim() == 3 ? img.dim(2) : 1;
    if (patch <= 0 || h % patch != 0 || w % patch != 0)
        throw std::invalid_argument("extract_patches: patch " + std::to_string(patch) +
                                    " does not divide " + shape_str(img.shape()));
    const int gh = h / patch, gw = w / patch;
    const int np = gh * gw, pd = patch * patch * c;
    std::vector<double> out(static_cast<size_t>(np) * pd);
    for (int py = 0; py < gh; ++py)
        for (int px = 0; px < gw; ++px) {
            double* dst = out.data() + static_cast<size_t>(py * gw + px) * pd;
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    for (int ch = 0; ch < c; ++ch)
                        dst[(y * patch + x) * c + ch] =
                            img.raw()[((static_cast<size_t>(py * patch + y)) * w + px * patch + x) * c + ch];
        }
    TensorImpl* pi = img.impl();
    return make_op({np, pd}, std::move(out), {img}, [pi, patch, w, c, gw](TensorImpl* o) {
        const int pd = patch * patch * c;
        return [pi, patch, w, c, gw, pd, o] {
            const int np = o->shape[0];
            for (int p = 0; p < np; ++p) {
                const int py = p / gw, px = p % gw;
                const double* src = o->grad.data() + static_cast<size_t>(p) * pd;
                for (int y = 0; y < patch; ++y)
                    for (int x = 0; x < patch; ++x)
                        for (int ch = 0; ch < c; ++ch)
                            accum(pi,
                                  ((static_cast<size_t>(py * patch + y)) * w + px * patch + x) * c + ch,
                                  src[(y * patch + x) * c + ch]);
            }
        };
    });
}

Tensor fold_patches(const Tensor& p, int h, int w, int patch) {
    check_defined("fold_patches", p);
    if (p.ndim() != 2) throw std::invalid_argument("fold_patches: expects 2-D patch matrix");
    const int gh = h / patch, gw = w / patch;
    if (patch <= 0 || h % patch != 0 || w % patch != 0 || p.dim(0) != gh * gw ||
        p.dim(1) != patch * patch)
        throw std::invalid_argument("fold_patches: " + shape_str(p.shape()) +
                                    " does not assemble to " + std::to_string(h) + "x" +
                                    std::to_string(w) + " with patch " + std::to_string(patch));
    std::vector<double> out(static_cast<size_t>(h) * w);
    for (int pi = 0; pi < gh * gw; ++pi) {
        const int py = pi / gw, px = pi % gw;
        const double* src = p.raw() + static_cast<size_t>(pi) * patch * patch;
        for (int y = 0; y < patch; ++y)
            for (int x = 0; x < patch; ++x)
                out[static_cast<size_t>(py * patch + y) * w + px * patch + x] = src[y * patch + x];
    }
    TensorImpl* pp = p.impl();
    return make_op({h, w}, std::move(out), {p}, [pp, patch, w, gw](TensorImpl* o) {
        return [pp, patch, w, gw, o] {
            const int np = pp->shape[0];
            for (int pi = 0; pi < np; ++pi) {
                const int py = pi / gw, px = pi % gw;
                for (int y = 0; y < patch; ++y)
                    for (int x = 0; x < patch; ++x)
                        accum(pp, static_cast<size_t>(pi) * patch * patch + y * patch + x,
                              o->grad[static_cast<size_t>(py * patch + y) * w + px * patch + x]);
            }
        };
    });
}

namespace {
inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
}  // namespace

Tensor smooth3x3(const Tensor& img) {
    check_defined("smooth3x3", img);
    if (img.ndim() != 2) throw std::invalid_argument("smooth3x3: expects {H,W}");
    const int h = img.dim(0), w = img.dim(1);
    static const double k1d[3] = {0.25, 0.5, 0.25};
    std::vector<double> out(img.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    acc += k1d[dy + 1] * k1d[dx + 1] *
                           img.raw()[static_cast<size_t>(clampi(y + dy, 0, h - 1)) * w +
                                     clampi(x + dx, 0, w - 1)];
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    TensorImpl* pi = img.impl();
    return make_op({h, w}, std::move(out), {img}, [pi, h, w](TensorImpl* o) {
        return [pi, h, w, o] {
            static const double k1d[3] = {0.25, 0.5, 0.25};
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double g = o->grad[static_cast<size_t>(y) * w + x];
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx)
                            accum(pi,
                                  static_cast<size_t>(clampi(y + dy, 0, h - 1)) * w +
                                      clampi(x + dx, 0, w - 1),
                                  g * k1d[dy + 1] * k1d[dx + 1]);
                }
        };
    });
}

Tensor bilinear_upsample(const Tensor& img, int factor) {
    check_defined("bilinear_upsample", img);
    if (img.ndim() != 2) throw std::invalid_argument("bilinear_upsample: expects {H,W}");
    if (factor < 1) throw std::invalid_argument("bilinear_upsample: factor must be >= 1");
    const int h = img.dim(0), w = img.dim(1);
    const int oh = h * factor, ow = w * factor;
    // half-pixel centers: output (i,j) samples input at ((i+.5)/f-.5, (j+.5)/f-.5)
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    auto sample_axis = [factor](int o, int extent, int& i0, int& i1, double& t) {
        const double src = (o + 0.5) / factor - 0.5;
        const double fl = std::floor(src);
        i0 = clampi(static_cast<int>(fl), 0, extent - 1);
        i1 = clampi(static_cast<int>(fl) + 1, 0, extent - 1);
        t = src - fl;
    };
    for (int oy = 0; oy < oh; ++oy) {
        int y0, y1;
        double ty;
        sample_axis(oy, h, y0, y1, ty);
        for (int ox = 0; ox < ow; ++ox) {
            int x0, x1;
            double tx;
            sample_axis(ox, w, x0, x1, tx);
            const double v00 = img.raw()[static_cast<size_t>(y0) * w + x0];
            const double v01 = img.raw()[static_cast<size_t>(y0) * w + x1];
            const double v10 = img.raw()[static_cast<size_t>(y1) * w + x0];
            const double v11 = img.raw()[static_cast<size_t>(y1) * w + x1];
            out[static_cast<size_t>(oy) * ow + ox] = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                                                     ty * ((1 - tx) * v10 + tx * v11);
        }
    }
    TensorImpl* pi = img.impl();
    return make_op({oh, ow}, std::move(out), {img}, [pi, h, w, factor](TensorImpl* o) {
        const int oh = h * factor, ow = w * factor;
        return [pi, h, w, factor, oh, ow, o] {
            auto sample_axis = [factor](int out_i, int extent, int& i0, int& i1, double& t) {
                const double src = (out_i + 0.5) / factor - 0.5;
                const double fl = std::floor(src);
                i0 = clampi(static_cast<int>(fl), 0, extent - 1);
                i1 = clampi(static_cast<int>(fl) + 1, 0, extent - 1);
                t = src - fl;
            };
            for (int oy = 0; oy < oh; ++oy) {
                int y0, y1;
                double ty;
                sample_axis(oy, h, y0, y1, ty);
                for (int ox = 0; ox < ow; ++ox) {
                    int x0, x1;
                    double tx;
                    sample_axis(ox, w, x0, x1, tx);
                    const double g = o->grad[static_cast<size_t>(oy) * ow + ox];
                    accum(pi, static_cast<size_t>(y0) * w + x0, g * (1 - ty) * (1 - tx));
                    accum(pi, static_cast<size_t>(y0) * w + x1, g * (1 - ty) * tx);
                    accum(pi, static_cast<size_t>(y1) * w + x0, g * ty * (1 - tx));
                    accum(pi, static_cast<size_t>(y1) * w + x1, g * ty * tx);
                }
            }
        };
    });
}

// ---- loss primitives ----

Tensor huber_sum(const Tensor& residual, double delta) {
    check_defined("huber_sum", residual);
    if (delta <= 0.0) throw std::invalid_argument("huber_sum: delta must be positive");
    double s = 0.0;
    for (size_t i = 0; i < residual.size(); ++i) {
        const double r = residual.raw()[i];
        const double ar = std::abs(r);
        s += ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
    }
    TensorImpl* pr = residual.impl();
    return make_op({1}, {s}, {residual}, [pr, delta](TensorImpl* o) {
        return [pr, delta, o] {
            const double g = o->grad[0];
            for (size_t i = 0; i < pr->data.size(); ++i) {
                const double r = pr->data[i];
                // |r| == delta falls in the quadratic branch
                const double d = std::abs(r) <= delta ? r : delta * (r > 0 ? 1.0 : -1.0);
                accum(pr, i, g * d);
            }
        };
    });
}

Tensor canonicalize_camera(const Tensor& g) {
    check_defined("canonicalize_camera", g);
    if (g.size() != 8)
        throw std::invalid_argument("canonicalize_camera: expects 8 components, got " +
                                    shape_str(g.shape()));
    const double sgn = g.raw()[0] >= 0.0 ? 1.0 : -1.0;
    std::vector<double> out(g.data());
    for (int i = 0; i < 4; ++i) out[i] *= sgn;
    TensorImpl* pg = g.impl();
    return make_op(g.shape(), std::move(out), {g}, [pg, sgn](TensorImpl* o) {
        return [pg, sgn, o] {
            for (size_t i = 0; i < 8; ++i) accum(pg, i, o->grad[i] * (i < 4 ? sgn : 1.0));
        };
    });
}

Tensor embed_mean(const Tensor& table, const std::vector<int>& ids) {
    check_defined("embed_mean", table);
    if (table.ndim() != 2) throw std::invalid_argument("embed_mean: table must be 2-D");
    const int vocab = table.dim(0), d = table.dim(1);
    for (int id : ids)
        if (id < 0 || id >= vocab)
            throw std::invalid_argument("embed_mean: token id " + std::to_string(id) +
                                        " outside vocabulary of " + std::to_string(vocab));
    std::vector<double> out(d, 0.0);
    if (!ids.empty()) {
        const double inv = 1.0 / static_cast<double>(ids.size());
        for (int id : ids)
            for (int j = 0; j < d; ++j) out[j] += table.raw()[static_cast<size_t>(id) * d + j] * inv;
    }
    TensorImpl* pt = table.impl();
    return make_op({1, d}, std::move(out), {table}, [pt, ids, d](TensorImpl* o) {
        return [pt, ids, d, o] {
            if (ids.empty()) return;
            const double inv = 1.0 / static_cast<double>(ids.size());
            for (int id : ids)
                for (int j = 0; j < d; ++j)
                    accum(pt, static_cast<size_t>(id) * d + j, o->grad[j] * inv);
        };
    });
}

// ---- backward ----

void backward(const Tensor& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    TensorImpl* root = loss.impl();
    if (root->consumed) throw std::runtime_error("backward: graph already consumed");
    if (!root->needs_grad) {
        root->consumed = true;
        return;  // constant loss: nothing reachable, all grads stay zero
    }

    // iterative post-order DFS over grad-requiring parents
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    std::vector<std::pair<TensorImpl*, size_t>> stack;
    visited.insert(root);
    stack.push_back({root, 0});
    while (!stack.empty()) {
        auto& top = stack.back();
        if (top.second < top.first->parents.size()) {
            TensorImpl* p = top.first->parents[top.second].get();
            ++top.second;
            if (p->needs_grad && !visited.count(p)) {
                if (p->consumed) throw std::runtime_error("backward: graph already consumed");
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(top.first);
            stack.pop_back();
        }
    }

    for (TensorImpl* n : order) {
        n->consumed = true;
        n->grad_buf();
    }
    root->grad[0] = 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backfn) (*it)->backfn();

    for (TensorImpl* n : order)
        for (double g : n->grad)
            if (!std::isfinite(g))
                throw std::runtime_error("backward: non-finite gradient in tensor of shape " +
                                         shape_str(n->shape));

    // release the tape
    for (TensorImpl* n : order) {
        n->backfn = nullptr;
        if (!n->is_leaf) n->parents.clear();
    }
}

}  // namespace gp3::ad
