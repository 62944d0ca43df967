#include "recap/tensor.hpp"

namespace recap {

// ikj order keeps the inner loop contiguous in both B and C.
void matmul_acc(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const Real* arow = a + i * k;
        Real* crow = c + i * n;
        for (size_t p = 0; p < k; ++p) {
            const Real av = arow[p];
            if (av == Real(0)) continue;
            const Real* brow = b + p * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt_acc(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n) {
    for (size_t i = 0; i < m; ++i) {
        const Real* arow = a + i * k;
        Real* crow = c + i * n;
        for (size_t j = 0; j < n; ++j) crow[j] += dot(arow, b + j * k, k);
    }
}

void matmul_tn_acc(const Real* a, const Real* b, Real* c, size_t m, size_t k, size_t n) {
    for (size_t p = 0; p < k; ++p) {
        const Real* arow = a + p * m;
        const Real* brow = b + p * n;
        for (size_t i = 0; i < m; ++i) {
            const Real av = arow[i];
            if (av == Real(0)) continue;
            Real* crow = c + i * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace recap
