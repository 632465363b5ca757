#include "branchlab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

#include "branchlab/error.hpp"

namespace branchlab {

namespace {

std::mutex plan_mutex;

std::pair<fftw_plan, fftw_plan> plans_for(std::size_t n) {
    static std::map<std::size_t, std::pair<fftw_plan, fftw_plan>> cache;
    std::lock_guard lock(plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> re(n);
    std::vector<std::complex<double>> co(n / 2 + 1);
    auto* cptr = reinterpret_cast<fftw_complex*>(co.data());
    const int size = static_cast<int>(n);
    fftw_plan fwd = fftw_plan_dft_r2c_1d(size, re.data(), cptr, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_plan inv = fftw_plan_dft_c2r_1d(size, cptr, re.data(),
                                         FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
    if (!fwd || !inv) throw SolverError("FFTW plan creation failed");
    return cache.emplace(n, std::make_pair(fwd, inv)).first->second;
}

}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
    if (n < 2 || n % 2 != 0) throw ParameterError("FFT size must be even and >= 2");
    auto [f, i] = plans_for(n);
    forward_plan_ = f;
    inverse_plan_ = i;
}

std::vector<std::complex<double>> RealFft::forward(const std::vector<double>& x) const {
    if (x.size() != n_) throw ParameterError("FFT input size mismatch");
    std::vector<double> in = x;
    std::vector<std::complex<double>> out(n_ / 2 + 1);
    fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), in.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> RealFft::inverse(const std::vector<std::complex<double>>& c) const {
    if (c.size() != n_ / 2 + 1) throw ParameterError("inverse FFT input size mismatch");
    std::vector<std::complex<double>> in = c;
    std::vector<double> out(n_);
    fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_),
                         reinterpret_cast<fftw_complex*>(in.data()), out.data());
    return out;
}

}  // namespace branchlab
