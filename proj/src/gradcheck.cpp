#include "gp3/gradcheck.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gp3/rng.hpp"

namespace gp3::ad {

namespace {

double eval_scalar(const ScalarFn& f, const Tensor& x0, size_t coord, double delta) {
    std::vector<double> d = x0.data();
    d[coord] += delta;
    Tensor xp = Tensor::from(x0.shape(), std::move(d), false);
    const double v = f(xp).item();
    if (!std::isfinite(v))
        throw std::runtime_error("gradcheck: non-finite evaluation at coordinate " +
                                 std::to_string(coord));
    return v;
}

double check_coords(const ScalarFn& f, const Tensor& x, double eps,
                    const std::vector<size_t>& coords) {
    Tensor xa = Tensor::from(x.shape(), x.data(), true);
    Tensor loss = f(xa);
    backward(loss);
    const std::vector<double> analytic = xa.grad();

    double worst = 0.0;
    for (size_t i : coords) {
        const double fp = eval_scalar(f, x, i, eps);
        const double fm = eval_scalar(f, x, i, -eps);
        const double numeric = (fp - fm) / (2.0 * eps);
        const double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace

double finite_diff_gradcheck(const ScalarFn& f, const Tensor& x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("gradcheck: eps must be positive");
    std::vector<size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), 0);
    return check_coords(f, x, eps, coords);
}

double finite_diff_gradcheck_sampled(const ScalarFn& f, const Tensor& x, double eps,
                                     int max_coords, uint64_t seed) {
    if (eps <= 0.0) throw std::invalid_argument("gradcheck: eps must be positive");
    if (static_cast<size_t>(max_coords) >= x.size()) return finite_diff_gradcheck(f, x, eps);
    std::vector<size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), 0);
    rng::Stream rs(seed);
    rs.shuffle(coords);
    coords.resize(max_coords);
    return check_coords(f, x, eps, coords);
}

}  // namespace gp3::ad
