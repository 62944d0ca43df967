#include "recap/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace recap::ad {

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->needs_grad) n->needs_grad = true;
    if (n->needs_grad) n->backward_fn = std::move(fn);
    return n;
}

void check_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a->value.shape_str() + " vs " + b->value.shape_str());
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

NodePtr constant(Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    return n;
}

NodePtr param(std::string name, Tensor v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->needs_grad = true;
    n->name = std::move(name);
    return n;
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        for (int pi = 0; pi < 2; ++pi) {
            Node& p = *self.parents[pi];
            if (!p.needs_grad) continue;
            p.ensure_grad();
            for (size_t i = 0; i < p.grad.data.size(); ++i) p.grad.data[i] += self.grad.data[i];
        }
    });
}

NodePtr add_rowvec(const NodePtr& a, const NodePtr& v) {
    const size_t m = a->value.rows(), n = a->value.cols();
    if (v->value.numel() != n)
        throw std::invalid_argument("add_rowvec: width mismatch");
    Tensor out = a->value;
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.data[i * n + j] += v->value.data[j];
    return make_node(std::move(out), {a, v}, [m, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pv = *self.parents[1];
        if (pa.needs_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < m * n; ++i) pa.grad.data[i] += self.grad.data[i];
        }
        if (pv.needs_grad) {
            pv.ensure_grad();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) pv.grad.data[j] += self.grad.data[i * n + j];
        }
    });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b->value.data[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.needs_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < pa.grad.data.size(); ++i) pa.grad.data[i] += self.grad.data[i];
        }
        if (pb.needs_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < pb.grad.data.size(); ++i) pb.grad.data[i] -= self.grad.data[i];
        }
    });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    check_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.needs_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < pa.grad.data.size(); ++i)
                pa.grad.data[i] += self.grad.data[i] * pb.value.data[i];
        }
        if (pb.needs_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < pb.grad.data.size(); ++i)
                pb.grad.data[i] += self.grad.data[i] * pa.value.data[i];
        }
    });
}

NodePtr scale(const NodePtr& a, Real s) {
    Tensor out = a->value;
    for (Real& x : out.data) x *= s;
    return make_node(std::move(out), {a}, [s](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < p.grad.data.size(); ++i) p.grad.data[i] += s * self.grad.data[i];
    });
}

NodePtr gelu(const NodePtr& a) {
    Tensor out = a->value;
    for (Real& x : out.data) {
        const double xd = static_cast<double>(x);
        x = static_cast<Real>(0.5 * xd * (1.0 + std::erf(xd * kInvSqrt2)));
    }
    return make_node(std::move(out), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < p.grad.data.size(); ++i) {
            const double x = static_cast<double>(p.value.data[i]);
            const double d = 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
                             x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
            p.grad.data[i] += self.grad.data[i] * static_cast<Real>(d);
        }
    });
}

NodePtr relu(const NodePtr& a) {
    Tensor out = a->value;
    for (Real& x : out.data)
        if (x < Real(0)) x = Real(0);
    return make_node(std::move(out), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < p.grad.data.size(); ++i)
            if (p.value.data[i] > Real(0)) p.grad.data[i] += self.grad.data[i];
    });
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    const size_t m = a->value.rows(), k = a->value.cols();
    if (b->value.rows() != k)
        throw std::invalid_argument("matmul: inner dims disagree " + a->value.shape_str() +
                                    " vs " + b->value.shape_str());
    const size_t n = b->value.cols();
    Tensor out({m, n});
    matmul_acc(a->value.data.data(), b->value.data.data(), out.data.data(), m, k, n);
    return make_node(std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.needs_grad) {
            pa.ensure_grad();  // dA += dC @ B^T
            matmul_nt_acc(self.grad.data.data(), pb.value.data.data(), pa.grad.data.data(), m, n, k);
        }
        if (pb.needs_grad) {
            pb.ensure_grad();  // dB += A^T @ dC
            matmul_tn_acc(pa.value.data.data(), self.grad.data.data(), pb.grad.data.data(), k, m, n);
        }
    });
}

NodePtr matmul_nt(const NodePtr& a, const NodePtr& b) {
    const size_t m = a->value.rows(), k = a->value.cols();
    if (b->value.cols() != k)
        throw std::invalid_argument("matmul_nt: inner dims disagree " + a->value.shape_str() +
                                    " vs " + b->value.shape_str());
    const size_t n = b->value.rows();
    Tensor out({m, n});
    matmul_nt_acc(a->value.data.data(), b->value.data.data(), out.data.data(), m, k, n);
    return make_node(std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.needs_grad) {
            pa.ensure_grad();  // dA += dC @ B
            matmul_acc(self.grad.data.data(), pb.value.data.data(), pa.grad.data.data(), m, n, k);
        }
        if (pb.needs_grad) {
            pb.ensure_grad();  // dB += dC^T @ A
            matmul_tn_acc(self.grad.data.data(), pa.value.data.data(), pb.grad.data.data(), n, m, k);
        }
    });
}

NodePtr concat_rows(const std::vector<NodePtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty input");
    const size_t n = parts[0]->value.cols();
    size_t m = 0;
    for (const auto& p : parts) {
        if (p->value.cols() != n) throw std::invalid_argument("concat_rows: width mismatch");
        m += p->value.rows();
    }
    Tensor out({m, n});
    size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + off);
        off += p->value.data.size();
    }
    return make_node(std::move(out), parts, [n](Node& self) {
        size_t off = 0;
        for (auto& pp : self.parents) {
            Node& p = *pp;
            const size_t sz = p.value.data.size();
            if (p.needs_grad) {
                p.ensure_grad();
                for (size_t i = 0; i < sz; ++i) p.grad.data[i] += self.grad.data[off + i];
            }
            off += sz;
        }
        (void)n;
    });
}

NodePtr slice_rows(const NodePtr& a, size_t start, size_t len) {
    const size_t m = a->value.rows(), n = a->value.cols();
    if (start + len > m) throw std::invalid_argument("slice_rows: out of range");
    Tensor out({len, n});
    std::copy(a->value.data.begin() + start * n, a->value.data.begin() + (start + len) * n,
              out.data.begin());
    return make_node(std::move(out), {a}, [start, n, len](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < len * n; ++i) p.grad.data[start * n + i] += self.grad.data[i];
    });
}

NodePtr slice_cols(const NodePtr& a, size_t start, size_t len) {
    const size_t m = a->value.rows(), n = a->value.cols();
    if (start + len > n) throw std::invalid_argument("slice_cols: out of range");
    Tensor out({m, len});
    for (size_t i = 0; i < m; ++i)
        std::copy(a->value.row_ptr(i) + start, a->value.row_ptr(i) + start + len,
                  out.row_ptr(i));
    return make_node(std::move(out), {a}, [m, n, start, len](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < len; ++j)
                p.grad.data[i * n + start + j] += self.grad.data[i * len + j];
    });
}

NodePtr select_rows(const NodePtr& a, std::vector<size_t> indices) {
    const size_t m = a->value.rows(), n = a->value.cols();
    for (size_t idx : indices)
        if (idx >= m) throw std::invalid_argument("select_rows: index out of range");
    Tensor out({indices.size(), n});
    for (size_t i = 0; i < indices.size(); ++i)
        std::copy(a->value.row_ptr(indices[i]), a->value.row_ptr(indices[i]) + n, out.row_ptr(i));
    return make_node(std::move(out), {a}, [idx = std::move(indices), n](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < idx.size(); ++i)
            for (size_t j = 0; j < n; ++j) p.grad.data[idx[i] * n + j] += self.grad.data[i * n + j];
    });
}

NodePtr mean_rows(const NodePtr& a) {
    const size_t m = a->value.rows(), n = a->value.cols();
    if (m == 0) throw std::invalid_argument("mean_rows: empty input");
    Tensor out({1, n});
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.data[j] += a->value.data[i * n + j];
    for (size_t j = 0; j < n; ++j) out.data[j] /= static_cast<Real>(m);
    return make_node(std::move(out), {a}, [m, n](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        const Real inv = Real(1) / static_cast<Real>(m);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) p.grad.data[i * n + j] += self.grad.data[j] * inv;
    });
}

NodePtr sum_all(const NodePtr& a) {
    Real acc = 0;
    for (Real x : a->value.data) acc += x;
    return make_node(Tensor::scalar(acc), {a}, [](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (Real& g : p.grad.data) g += self.grad.data[0];
    });
}

NodePtr sum_scalars(const std::vector<NodePtr>& xs) {
    if (xs.empty()) throw std::invalid_argument("sum_scalars: empty input");
    Real acc = 0;
    for (const auto& x : xs) acc += x->scalar();
    return make_node(Tensor::scalar(acc), xs, [](Node& self) {
        for (auto& pp : self.parents) {
            if (!pp->needs_grad) continue;
            pp->ensure_grad();
            pp->grad.data[0] += self.grad.data[0];
        }
    });
}

NodePtr layer_norm(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta, Real eps) {
    const size_t m = x->value.rows(), n = x->value.cols();
    if (gamma->value.numel() != n || beta->value.numel() != n)
        throw std::invalid_argument("layer_norm: gamma/beta width mismatch");
    Tensor out({m, n});
    auto xhat = std::make_shared<Tensor>(Tensor({m, n}));
    auto inv_std = std::make_shared<std::vector<Real>>(m);
    for (size_t i = 0; i < m; ++i) {
        const Real* row = x->value.row_ptr(i);
        Real mu = 0;
        for (size_t j = 0; j < n; ++j) mu += row[j];
        mu /= static_cast<Real>(n);
        Real var = 0;
        for (size_t j = 0; j < n; ++j) {
            const Real d = row[j] - mu;
            var += d * d;
        }
        var /= static_cast<Real>(n);
        const Real is = Real(1) / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (size_t j = 0; j < n; ++j) {
            const Real xh = (row[j] - mu) * is;
            xhat->data[i * n + j] = xh;
            out.data[i * n + j] = xh * gamma->value.data[j] + beta->value.data[j];
        }
    }
    return make_node(std::move(out), {x, gamma, beta}, [m, n, xhat, inv_std](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        if (pg.needs_grad) {
            pg.ensure_grad();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j)
                    pg.grad.data[j] += self.grad.data[i * n + j] * xhat->data[i * n + j];
        }
        if (pb.needs_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < m; ++i)
                for (size_t j = 0; j < n; ++j) pb.grad.data[j] += self.grad.data[i * n + j];
        }
        if (px.needs_grad) {
            px.ensure_grad();
            for (size_t i = 0; i < m; ++i) {
                Real sum_dxh = 0, sum_dxh_xh = 0;
                std::vector<Real> dxh(n);
                for (size_t j = 0; j < n; ++j) {
                    dxh[j] = self.grad.data[i * n + j] * pg.value.data[j];
                    sum_dxh += dxh[j];
                    sum_dxh_xh += dxh[j] * xhat->data[i * n + j];
                }
                const Real is = (*inv_std)[i];
                const Real invn = Real(1) / static_cast<Real>(n);
                for (size_t j = 0; j < n; ++j) {
                    px.grad.data[i * n + j] +=
                        is * (dxh[j] - invn * sum_dxh - xhat->data[i * n + j] * invn * sum_dxh_xh);
                }
            }
        }
    });
}

NodePtr embedding(const NodePtr& table, const std::vector<int>& ids) {
    const size_t v = table->value.rows(), n = table->value.cols();
    for (int id : ids)
        if (id < 0 || static_cast<size_t>(id) >= v)
            throw std::invalid_argument("embedding: token id out of range: " + std::to_string(id));
    Tensor out({ids.size(), n});
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy(table->value.row_ptr(static_cast<size_t>(ids[i])),
                  table->value.row_ptr(static_cast<size_t>(ids[i])) + n, out.row_ptr(i));
    return make_node(std::move(out), {table}, [ids, n](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        for (size_t i = 0; i < ids.size(); ++i) {
            const size_t r = static_cast<size_t>(ids[i]);
            for (size_t j = 0; j < n; ++j) p.grad.data[r * n + j] += self.grad.data[i * n + j];
        }
    });
}

namespace {

// Shared attention kernel. allowed(i, j) is encoded either by an explicit
// mask or by (causal, n_prefix); probs are cached per head for backward.
NodePtr attention_impl(const NodePtr& q, const NodePtr& k, const NodePtr& v, size_t n_heads,
                       bool causal, size_t n_prefix, const std::vector<uint8_t>* mask) {
    const size_t n_q = q->value.rows(), d = q->value.cols();
    const size_t n_k = k->value.rows();
    if (k->value.cols() != d || v->value.cols() != d || v->value.rows() != n_k)
        throw std::invalid_argument("attention: shape mismatch q" + q->value.shape_str() + " k" +
                                    k->value.shape_str() + " v" + v->value.shape_str());
    if (d % n_heads != 0) throw std::invalid_argument("attention: d not divisible by n_heads");
    if (mask && mask->size() != n_q * n_k)
        throw std::invalid_argument("attention: mask shape mismatch");
    const size_t dh = d / n_heads;
    const Real inv_sqrt_dh = Real(1) / std::sqrt(static_cast<Real>(dh));

    auto allowed = [&](size_t i, size_t j) -> bool {
        if (mask) return (*mask)[i * n_k + j] != 0;
        if (!causal) return true;
        return j < n_prefix || (j - n_prefix) <= i;
    };
    for (size_t i = 0; i < n_q; ++i) {
        bool any = false;
        for (size_t j = 0; j < n_k && !any; ++j) any = allowed(i, j);
        if (!any)
            throw std::invalid_argument("attention: fully masked row " + std::to_string(i));
    }

    auto probs = std::make_shared<Tensor>(Tensor({n_heads, n_q, n_k}));
    Tensor out({n_q, d});
    std::vector<Real> scores(n_k);
    for (size_t h = 0; h < n_heads; ++h) {
        const size_t off = h * dh;
        for (size_t i = 0; i < n_q; ++i) {
            const Real* qi = q->value.row_ptr(i) + off;
            Real max_s = -std::numeric_limits<Real>::infinity();
            for (size_t j = 0; j < n_k; ++j) {
                if (!allowed(i, j)) continue;
                scores[j] = dot(qi, k->value.row_ptr(j) + off, dh) * inv_sqrt_dh;
                max_s = std::max(max_s, scores[j]);
            }
            Real z = 0;
            Real* prow = probs->data.data() + (h * n_q + i) * n_k;
            for (size_t j = 0; j < n_k; ++j) {
                if (!allowed(i, j)) {
                    prow[j] = 0;
                    continue;
                }
                prow[j] = std::exp(scores[j] - max_s);
                z += prow[j];
            }
            const Real invz = Real(1) / z;
            Real* orow = out.row_ptr(i) + off;
            for (size_t j = 0; j < n_k; ++j) {
                prow[j] *= invz;
                if (prow[j] == Real(0)) continue;
                const Real* vj = v->value.row_ptr(j) + off;
                for (size_t c = 0; c < dh; ++c) orow[c] += prow[j] * vj[c];
            }
        }
    }

    return make_node(std::move(out), {q, k, v},
                     [n_heads, n_q, n_k, dh, inv_sqrt_dh, probs](Node& self) {
        Node& pq = *self.parents[0];
        Node& pk = *self.parents[1];
        Node& pv = *self.parents[2];
        if (pq.needs_grad) pq.ensure_grad();
        if (pk.needs_grad) pk.ensure_grad();
        if (pv.needs_grad) pv.ensure_grad();
        std::vector<Real> dattn(n_k);
        for (size_t h = 0; h < n_heads; ++h) {
            const size_t off = h * dh;
            for (size_t i = 0; i < n_q; ++i) {
                const Real* go = self.grad.row_ptr(i) + off;
                const Real* prow = probs->data.data() + (h * n_q + i) * n_k;
                // dV and d(attn probs)
                Real dot_p_dattn = 0;
                for (size_t j = 0; j < n_k; ++j) {
                    if (prow[j] == Real(0)) {
                        dattn[j] = 0;
                        continue;
                    }
                    const Real* vj = pv.value.row_ptr(j) + off;
                    Real da = 0;
                    for (size_t c = 0; c < dh; ++c) da += go[c] * vj[c];
                    dattn[j] = da;
                    dot_p_dattn += prow[j] * da;
                    if (pv.needs_grad) {
                        Real* gv = pv.grad.row_ptr(j) + off;
                        for (size_t c = 0; c < dh; ++c) gv[c] += prow[j] * go[c];
                    }
                }
                if (!pq.needs_grad && !pk.needs_grad) continue;
                // softmax backward + scale
                const Real* qi = pq.value.row_ptr(i) + off;
                for (size_t j = 0; j < n_k; ++j) {
                    if (prow[j] == Real(0)) continue;
                    const Real ds = prow[j] * (dattn[j] - dot_p_dattn) * inv_sqrt_dh;
                    if (ds == Real(0)) continue;
                    const Real* kj = pk.value.row_ptr(j) + off;
                    if (pq.needs_grad) {
                        Real* gq = pq.grad.row_ptr(i) + off;
                        for (size_t c = 0; c < dh; ++c) gq[c] += ds * kj[c];
                    }
                    if (pk.needs_grad) {
                        Real* gk = pk.grad.row_ptr(j) + off;
                        for (size_t c = 0; c < dh; ++c) gk[c] += ds * qi[c];
                    }
                }
            }
        }
    });
}

}  // namespace

NodePtr attention(const NodePtr& q, const NodePtr& k, const NodePtr& v,
                  const std::vector<uint8_t>& mask) {
    return attention_impl(q, k, v, 1, false, 0, mask.empty() ? nullptr : &mask);
}

NodePtr multihead_attention(const NodePtr& q, const NodePtr& k, const NodePtr& v, size_t n_heads,
                            bool causal, size_t n_prefix) {
    return attention_impl(q, k, v, n_heads, causal, n_prefix, nullptr);
}

NodePtr cross_entropy(const NodePtr& logits, const std::vector<int>& targets,
                      const std::vector<uint8_t>& loss_mask) {
    const size_t n = logits->value.rows(), vocab = logits->value.cols();
    if (targets.size() != n || loss_mask.size() != n)
        throw std::invalid_argument("cross_entropy: targets/mask length mismatch");
    size_t count = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!loss_mask[i]) continue;
        ++count;
        if (targets[i] < 0 || static_cast<size_t>(targets[i]) >= vocab)
            throw std::invalid_argument("cross_entropy: target out of range");
    }
    if (count == 0) throw std::invalid_argument("cross_entropy: no positions contribute");

    auto probs = std::make_shared<Tensor>(Tensor({n, vocab}));
    Real total = 0;
    for (size_t i = 0; i < n; ++i) {
        if (!loss_mask[i]) continue;
        const Real* row = logits->value.row_ptr(i);
        Real mx = row[0];
        for (size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
        Real z = 0;
        Real* prow = probs->row_ptr(i);
        for (size_t j = 0; j < vocab; ++j) {
            prow[j] = std::exp(row[j] - mx);
            z += prow[j];
        }
        const Real invz = Real(1) / z;
        for (size_t j = 0; j < vocab; ++j) prow[j] *= invz;
        total += -std::log(prow[static_cast<size_t>(targets[i])]);
    }
    total /= static_cast<Real>(count);

    return make_node(Tensor::scalar(total), {logits},
                     [targets, loss_mask, count, n, vocab, probs](Node& self) {
        Node& p = *self.parents[0];
        p.ensure_grad();
        const Real g = self.grad.data[0] / static_cast<Real>(count);
        for (size_t i = 0; i < n; ++i) {
            if (!loss_mask[i]) continue;
            const Real* prow = probs->row_ptr(i);
            Real* grow = p.grad.row_ptr(i);
            for (size_t j = 0; j < vocab; ++j) grow[j] += g * prow[j];
            grow[static_cast<size_t>(targets[i])] -= g;
        }
    });
}

NodePtr cosine_loss(const NodePtr& a, const NodePtr& b) {
    if (a->value.numel() != b->value.numel())
        throw std::invalid_argument("cosine_loss: dimension mismatch");
    const size_t d = a->value.numel();
    const Real* av = a->value.data.data();
    const Real* bv = b->value.data.data();
    const Real na = l2_norm(a->value.data), nb = l2_norm(b->value.data);
    if (na == Real(0) || nb == Real(0))
        throw std::invalid_argument("cosine_loss: zero-norm vector");
    const Real ab = dot(av, bv, d);
    const Real cosv = ab / (na * nb);
    return make_node(Tensor::scalar(Real(1) - cosv), {a, b}, [d, na, nb, cosv](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const Real g = self.grad.data[0];
        const Real* av = pa.value.data.data();
        const Real* bv = pb.value.data.data();
        if (pa.needs_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < d; ++i)
                pa.grad.data[i] += -g * (bv[i] / (na * nb) - cosv * av[i] / (na * na));
        }
        if (pb.needs_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < d; ++i)
                pb.grad.data[i] += -g * (av[i] / (na * nb) - cosv * bv[i] / (nb * nb));
        }
    });
}

void backward(const NodePtr& loss) {
    if (!loss) throw std::invalid_argument("backward: null loss");
    if (loss->value.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!loss->backward_fn)
        throw std::invalid_argument(
            "backward: loss was not produced by a recorded forward computation");

    // iterative DFS, post-order = topological order
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx].get();
            ++idx;
            if (p->needs_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss->ensure_grad();
    loss->grad.data[0] += Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.data.empty()) n->backward_fn(*n);
    }
}

}  // namespace recap::ad
