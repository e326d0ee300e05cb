#pragma once

#include <cstddef>
#include <vector>

namespace geonull {

/// Dense rank-R array with every extent equal to n, row-major.
template <int Rank>
class CubeTensor {
public:
    CubeTensor() = default;
    explicit CubeTensor(int n) : n_(n), data_(size_for(n), 0.0) {}

    int dim() const noexcept { return n_; }

    template <class... I>
    double& operator()(I... i) {
        static_assert(sizeof...(I) == Rank);
        return data_[offset(static_cast<int>(i)...)];
    }
    template <class... I>
    double operator()(I... i) const {
        static_assert(sizeof...(I) == Rank);
        return data_[offset(static_cast<int>(i)...)];
    }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

private:
    static std::size_t size_for(int n) {
        std::size_t s = 1;
        for (int k = 0; k < Rank; ++k) s *= static_cast<std::size_t>(n);
        return s;
    }
    template <class... I>
    std::size_t offset(I... i) const {
        std::size_t off = 0;
        ((off = off * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i)), ...);
        return off;
    }

    int n_ = 0;
    std::vector<double> data_;
};

using Tensor3 = CubeTensor<3>;
using Tensor4 = CubeTensor<4>;

} // namespace geonull
