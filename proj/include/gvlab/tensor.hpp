#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvlab {

// Dense row-major tensor of 64-bit reals. Rank is arbitrary, but every op in
// the graph works on rank-1/rank-2 views; vectors are stored as [1,n] or [n,1].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (numel_of(shape) != static_cast<long long>(data.size())) {
            throw std::invalid_argument("tensor: shape/data size mismatch");
        }
    }

    static long long numel_of(const std::vector<int>& s) {
        long long n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(int r, int c) { return Tensor({r, c}, std::vector<double>(static_cast<size_t>(r) * c, 0.0)); }
    static Tensor full(int r, int c, double v) { return Tensor({r, c}, std::vector<double>(static_cast<size_t>(r) * c, v)); }
    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
    static Tensor row(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Tensor({1, n}, std::move(v));
    }
    static Tensor col(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Tensor({n, 1}, std::move(v));
    }

    long long numel() const { return static_cast<long long>(data.size()); }
    bool is_scalar() const { return data.size() == 1; }

    // Rank-2 accessors. Rank-1 tensors are treated as a single row.
    int rows() const {
        if (shape.size() == 2) return shape[0];
        if (shape.size() == 1) return 1;
        throw std::invalid_argument("tensor: rank " + std::to_string(shape.size()) + " where rank<=2 expected");
    }
    int cols() const {
        if (shape.size() == 2) return shape[1];
        if (shape.size() == 1) return shape[0];
        throw std::invalid_argument("tensor: rank " + std::to_string(shape.size()) + " where rank<=2 expected");
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

    bool same_shape(const Tensor& o) const { return rows() == o.rows() && cols() == o.cols(); }
};

}  // namespace gvlab
