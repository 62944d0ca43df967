#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "recap/common.hpp"

namespace recap {

// Dense row-major tensor. Rank is dynamic but nearly everything in the
// project is a matrix [rows x cols] or a vector [n].
struct Tensor {
    std::vector<size_t> shape;
    std::vector<Real> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), Real(0));
    }
    Tensor(std::vector<size_t> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    static size_t numel_of(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }

    size_t numel() const { return data.size(); }
    size_t rank() const { return shape.size(); }

    size_t rows() const {
        if (shape.empty()) throw std::invalid_argument("Tensor::rows on scalar");
        return shape[0];
    }
    size_t cols() const {
        if (shape.size() < 2) throw std::invalid_argument("Tensor::cols on rank < 2");
        return shape[1];
    }

    Real& at(size_t i, size_t j) { return data[i * shape[1] + j]; }
    Real at(size_t i, size_t j) const { return data[i * shape[1] + j]; }

    Real* row_ptr(size_t i) { return data.data() + i * shape[1]; }
    const Real* row_ptr(size_t i) const { return data.data() + i * shape[1]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (Real v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void fill(Real v) { std::fill(data.begin(), data.end(), v); }

    static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }

    static Tensor scalar(Real v) { return Tensor({1}, {v}); }

    static Tensor randn(std::vector<size_t> s, Rng& rng, Real std_dev) {
        Tensor t(std::move(s));
        for (Real& v : t.data) v = static_cast<Real>(rng.gaussian()) * std_dev;
        return t;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

inline Real dot(const Real* a, const Real* b, size_t n) {
    Real acc = 0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

inline Real l2_norm(const std::vector<Real>& v) {
    Real acc = 0;
    for (Real x : v) acc += x * x;
    return std::sqrt(acc);
}

// C += A(m,k) * B(k,n)
void matmul_acc(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n);
// C += A(m,k) * B(n,k)^T
void matmul_nt_acc(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n);
// C += A(k,m)^T * B(k,n)
void matmul_tn_acc(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n);

}  // namespace recap
