#pragma once

#include <cstddef>
#include <vector>

namespace dpcomp {

// Dense square matrix of doubles, row-major. Used for distance matrices,
// delta matrices and observation tables; values may be +inf.
class DistMatrix {
public:
    DistMatrix() = default;
    explicit DistMatrix(std::size_t n, double fill = 0.0) : n_(n), v_(n * n, fill) {}

    std::size_t size() const { return n_; }

    double operator()(std::size_t i, std::size_t j) const { return v_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return v_[i * n_ + j]; }

    const std::vector<double>& flat() const { return v_; }

    bool operator==(const DistMatrix& other) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> v_;
};

}  // namespace dpcomp
