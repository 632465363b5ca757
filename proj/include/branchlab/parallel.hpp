#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace branchlab {

unsigned default_workers() noexcept;

// Running mean and co-moment matrix of a K-dimensional sample; merges with
// the pairwise update of Chan, Golub and LeVeque.
class Moments {
public:
    static constexpr std::size_t kMaxDim = 32;

    Moments() : Moments(1) {}
    explicit Moments(std::size_t dim);

    std::size_t dim() const noexcept { return mean_.size(); }
    std::uint64_t count() const noexcept { return n_; }
    double mean(std::size_t i = 0) const noexcept { return mean_[i]; }
    // Unbiased (co)variance.
    double covariance(std::size_t i, std::size_t j) const noexcept {
        return n_ > 1 ? comoment_[i * dim() + j] / static_cast<double>(n_ - 1) : 0.0;
    }
    double variance(std::size_t i = 0) const noexcept { return covariance(i, i); }

    void add(const double* x);
    void add(double x) { add(&x); }
    void merge(const Moments& other);

private:
    std::uint64_t n_ = 0;
    std::vector<double> mean_;
    std::vector<double> comoment_;
};

// Replica indices are split into fixed blocks; each block is reduced
// sequentially, and block results are combined by a pairwise tree in index
// order. The result is therefore independent of the number of workers.
template <class Acc, class BlockFn, class Merge>
Acc parallel_reduce_blocks(std::uint64_t count, std::uint64_t block, unsigned workers,
                           BlockFn&& block_fn, Merge&& merge) {
    const std::uint64_t blocks = count == 0 ? 0 : (count + block - 1) / block;
    std::vector<Acc> partial(blocks);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= blocks) return;
            try {
                partial[b] = block_fn(b * block, std::min(count, (b + 1) * block));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(blocks);
                return;
            }
        }
    };
    if (workers == 0) workers = default_workers();
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, std::max<std::uint64_t>(blocks, 1)));
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    if (blocks == 0) return Acc{};
    for (std::uint64_t width = 1; width < blocks; width *= 2)
        for (std::uint64_t i = 0; i + width < blocks; i += 2 * width)
            merge(partial[i], partial[i + width]);
    return std::move(partial[0]);
}

}  // namespace branchlab
