#include "branchlab/parallel.hpp"

#include "branchlab/error.hpp"

namespace branchlab {

unsigned default_workers() noexcept {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

Moments::Moments(std::size_t dim) : mean_(dim, 0.0), comoment_(dim * dim, 0.0) {
    if (dim == 0 || dim > kMaxDim) throw ParameterError("Moments: dimension must be in [1, 32]");
}

void Moments::add(const double* x) {
    ++n_;
    const std::size_t k = dim();
    const double inv = 1.0 / static_cast<double>(n_);
    double delta[kMaxDim];
    for (std::size_t i = 0; i < k; ++i) {
        delta[i] = x[i] - mean_[i];
        mean_[i] += delta[i] * inv;
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) comoment_[i * k + j] += delta[i] * (x[j] - mean_[j]);
}

void Moments::merge(const Moments& other) {
    if (other.n_ == 0) return;
    if (n_ == 0) {
        *this = other;
        return;
    }
    const std::size_t k = dim();
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double n = na + nb;
    std::vector<double> delta(k);
    for (std::size_t i = 0; i < k; ++i) delta[i] = other.mean_[i] - mean_[i];
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            comoment_[i * k + j] += other.comoment_[i * k + j] + delta[i] * delta[j] * na * nb / n;
    for (std::size_t i = 0; i < k; ++i) mean_[i] += delta[i] * nb / n;
    n_ += other.n_;
}

}  // namespace branchlab
