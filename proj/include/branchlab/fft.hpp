#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace branchlab {

// Thin wrapper over FFTW's real-to-complex transforms. Plans are created once
// per size and cached; execution is reentrant.
class RealFft {
public:
    explicit RealFft(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    // n real samples -> n/2 + 1 coefficients.
    std::vector<std::complex<double>> forward(const std::vector<double>& x) const;
    // n/2 + 1 coefficients -> n real samples, unnormalized (scaled by n).
    std::vector<double> inverse(const std::vector<std::complex<double>>& c) const;

private:
    std::size_t n_;
    void* forward_plan_;
    void* inverse_plan_;
};

}  // namespace branchlab
