#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gp3::ad {

// Dense row-major float64 tensor participating in reverse-mode
// differentiation. Ops record a tape node on the result; backward() walks
// the tape once and then releases it. A graph and its tensors belong to one
// thread; independent graphs may run concurrently.

using Shape = std::vector<int>;

size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {
struct TensorImpl;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int ndim() const;
    int dim(int i) const;
    size_t size() const;

    double* raw();
    const double* raw() const;
    std::vector<double>& data();
    const std::vector<double>& data() const;

    bool requires_grad() const;
    // Gradient after backward(); for leaves it materializes as zeros when the
    // leaf was unreachable from the loss.
    const std::vector<double>& grad() const;
    bool has_grad() const;
    void zero_grad();

    double item() const;  // scalar tensors only

    detail::TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<detail::TensorImpl>& handle() const { return impl_; }

private:
    std::shared_ptr<detail::TensorImpl> impl_;
    friend Tensor wrap_impl(std::shared_ptr<detail::TensorImpl> impl);
};

// ---- primitive catalog ----

// elementwise, equal shapes
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);   // rejects non-positive input
Tensor sqrt(const Tensor& a);  // rejects negative input
Tensor abs(const Tensor& a);   // subgradient at 0 is 0
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor softplus(const Tensor& a);

// 2-D linear algebra
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// structure
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int start, int len);
Tensor slice_cols(const Tensor& a, int start, int len);

// last-axis normalizations (leading axes flattened to rows)
Tensor softmax(const Tensor& a);
Tensor layer_norm(const Tensor& a, double eps = 1e-6);

// reductions
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// broadcasts over rows; v has shape {d} or {1,d}
Tensor mul_rowvec(const Tensor& x, const Tensor& v);
Tensor add_rowvec(const Tensor& x, const Tensor& v);
// multiply every element by a scalar tensor
Tensor scale_by(const Tensor& x, const Tensor& s);

// image ops; img shape {H,W,C} or {H,W}
Tensor extract_patches(const Tensor& img, int patch);             // -> {np, patch*patch*C}
Tensor fold_patches(const Tensor& p, int h, int w, int patch);    // -> {H,W}, C=1
Tensor smooth3x3(const Tensor& img);                              // tent filter, clamped edges
Tensor bilinear_upsample(const Tensor& img, int factor);          // {h,w} -> {h*f, w*f}

// sum of the pointwise Huber penalty of the residual
Tensor huber_sum(const Tensor& residual, double delta);

// flips the quaternion part (first 4 of 8) so the scalar component is >= 0
Tensor canonicalize_camera(const Tensor& g);

// embedding rows gathered by id, averaged; empty ids -> zero row {1,d}
Tensor embed_mean(const Tensor& table, const std::vector<int>& ids);

// Reverse-mode pass from a scalar loss. The reachable graph is consumed;
// running backward twice through any node is rejected. All produced
// gradients are checked finite.
void backward(const Tensor& loss);

}  // namespace gp3::ad
