#include "mixpt/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kernels.hpp"

namespace mixpt::nn {

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
    out << ')';
    return out.str();
}

namespace {

bool is_suffix(const Shape& full, const Shape& tail) {
    if (tail.size() > full.size()) return false;
    return std::equal(tail.rbegin(), tail.rend(), full.rbegin());
}

Shape leading(const Shape& s, std::size_t drop) { return Shape(s.begin(), s.end() - static_cast<long>(drop)); }

}  // namespace

template <typename T>
Var Graph<T>::push(Tensor<T> value, bool requires_grad, const char* op) {
    if (op && !value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
    if (nodes_.size() >= std::numeric_limits<std::uint32_t>::max() - 1) throw RuntimeFailure("graph too large");
    Node n;
    n.value = std::move(value);
    n.requires_grad = record_ && requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Tensor<T>& Graph<T>::grad_of(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Tensor<T>(n.value.shape);
    return n.grad;
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
    return push(std::move(value), false, nullptr);
}

template <typename T>
Var Graph<T>::input(Tensor<T> value) {
    return push(std::move(value), true, "input");
}

template <typename T>
Var Graph<T>::param(Parameter<T>& p) {
    Var v = push(p.value, true, nullptr);
    nodes_[v.id].param = &p;
    return v;
}

template <typename T>
Var Graph<T>::matmul(Var a, Var b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.size() < 2 || sb.size() < 2) throw ShapeError("matmul needs rank >= 2: " + shape_str(sa) + " x " + shape_str(sb));
    const std::size_t k = sa.back();
    const std::size_t m = sa[sa.size() - 2];
    const std::size_t n = sb.back();
    const bool shared_b = sb.size() == 2;
    if (sb[sb.size() - 2] != k || (!shared_b && leading(sa, 2) != leading(sb, 2)))
        throw ShapeError("matmul shape mismatch: " + shape_str(sa) + " x " + shape_str(sb));

    const std::size_t rows = numel(sa) / k;  // all leading rows of a
    const std::size_t batches = shared_b ? 1 : numel(leading(sa, 2));
    const std::size_t rows_per_batch = shared_b ? rows : m;

    Shape out_shape = sa;
    out_shape.back() = n;
    Tensor<T> out(out_shape);
    const auto& A = value(a);
    const auto& B = value(b);
    for (std::size_t bi = 0; bi < batches; ++bi)
        kernels::gemm_nn(A.ptr() + bi * rows_per_batch * k, B.ptr() + (shared_b ? 0 : bi * k * n),
                         out.ptr() + bi * rows_per_batch * n, rows_per_batch, k, n);

    Var y = push(std::move(out), needs(a) || needs(b), "matmul");
    if (node(y).requires_grad) {
        node(y).backward = [a, b, k, n, batches, rows_per_batch, shared_b](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            const auto& A = g.nodes_[a.id].value;
            const auto& B = g.nodes_[b.id].value;
            for (std::size_t bi = 0; bi < batches; ++bi) {
                const T* dyb = dy.ptr() + bi * rows_per_batch * n;
                const T* Ab = A.ptr() + bi * rows_per_batch * k;
                const T* Bb = B.ptr() + (shared_b ? 0 : bi * k * n);
                if (g.nodes_[a.id].requires_grad) {
                    auto bt = kernels::transpose(Bb, k, n);
                    kernels::gemm_nn(dyb, bt.data(), g.grad_of(a.id).ptr() + bi * rows_per_batch * k,
                                     rows_per_batch, n, k);
                }
                if (g.nodes_[b.id].requires_grad) {
                    kernels::gemm_tn(Ab, dyb, g.grad_of(b.id).ptr() + (shared_b ? 0 : bi * k * n), rows_per_batch,
                                     k, n);
                }
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::matmul_nt(Var a, Var b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.size() < 2 || sb.size() != 2 || sb[1] != sa.back())
        throw ShapeError("matmul_nt shape mismatch: " + shape_str(sa) + " x " + shape_str(sb) + "^T");
    const std::size_t k = sa.back();
    const std::size_t n = sb[0];
    const std::size_t rows = numel(sa) / k;
    Shape out_shape = sa;
    out_shape.back() = n;
    Tensor<T> out(out_shape);
    auto bt = kernels::transpose(value(b).ptr(), n, k);
    kernels::gemm_nn(value(a).ptr(), bt.data(), out.ptr(), rows, k, n);

    Var y = push(std::move(out), needs(a) || needs(b), "matmul_nt");
    if (node(y).requires_grad) {
        node(y).backward = [a, b, k, n, rows](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            if (g.nodes_[a.id].requires_grad)
                kernels::gemm_nn(dy.ptr(), g.nodes_[b.id].value.ptr(), g.grad_of(a.id).ptr(), rows, n, k);
            if (g.nodes_[b.id].requires_grad)
                kernels::gemm_tn(dy.ptr(), g.nodes_[a.id].value.ptr(), g.grad_of(b.id).ptr(), rows, n, k);
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::add(Var a, Var b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (!is_suffix(sa, sb)) throw ShapeError("add shape mismatch: " + shape_str(sa) + " + " + shape_str(sb));
    Tensor<T> out = value(a);
    const auto& B = value(b);
    const std::size_t nb = B.size();
    for (std::size_t i = 0; i < out.size(); i += nb)
        for (std::size_t j = 0; j < nb; ++j) out[i + j] += B[j];

    Var y = push(std::move(out), needs(a) || needs(b), "add");
    if (node(y).requires_grad) {
        node(y).backward = [a, b, nb](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            if (g.nodes_[a.id].requires_grad) {
                auto& da = g.grad_of(a.id);
                for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
            }
            if (g.nodes_[b.id].requires_grad) {
                auto& db = g.grad_of(b.id);
                for (std::size_t i = 0; i < dy.size(); i += nb)
                    for (std::size_t j = 0; j < nb; ++j) db[j] += dy[i + j];
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::mul(Var a, Var b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (!is_suffix(sa, sb)) throw ShapeError("mul shape mismatch: " + shape_str(sa) + " * " + shape_str(sb));
    Tensor<T> out = value(a);
    const auto& B = value(b);
    const std::size_t nb = B.size();
    for (std::size_t i = 0; i < out.size(); i += nb)
        for (std::size_t j = 0; j < nb; ++j) out[i + j] *= B[j];

    Var y = push(std::move(out), needs(a) || needs(b), "mul");
    if (node(y).requires_grad) {
        node(y).backward = [a, b, nb](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            const auto& A = g.nodes_[a.id].value;
            const auto& B = g.nodes_[b.id].value;
            if (g.nodes_[a.id].requires_grad) {
                auto& da = g.grad_of(a.id);
                for (std::size_t i = 0; i < dy.size(); i += nb)
                    for (std::size_t j = 0; j < nb; ++j) da[i + j] += dy[i + j] * B[j];
            }
            if (g.nodes_[b.id].requires_grad) {
                auto& db = g.grad_of(b.id);
                for (std::size_t i = 0; i < dy.size(); i += nb)
                    for (std::size_t j = 0; j < nb; ++j) db[j] += dy[i + j] * A[i + j];
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::scale(Var a, T s) {
    Tensor<T> out = value(a);
    for (auto& v : out.data) v *= s;
    Var y = push(std::move(out), needs(a), "scale");
    if (node(y).requires_grad) {
        node(y).backward = [a, s](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            auto& da = g.grad_of(a.id);
            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += s * dy[i];
        };
    }
    return y;
}

namespace {
template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2 / pi)
template <typename T>
constexpr T kGeluA = static_cast<T>(0.044715);
}  // namespace

template <typename T>
Var Graph<T>::gelu(Var a) {
    Tensor<T> out = value(a);
    for (auto& x : out.data) x = T(0.5) * x * (T(1) + std::tanh(kGeluC<T> * (x + kGeluA<T> * x * x * x)));
    Var y = push(std::move(out), needs(a), "gelu");
    if (node(y).requires_grad) {
        node(y).backward = [a](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            const auto& X = g.nodes_[a.id].value;
            auto& da = g.grad_of(a.id);
            for (std::size_t i = 0; i < dy.size(); ++i) {
                const T x = X[i];
                const T t = std::tanh(kGeluC<T> * (x + kGeluA<T> * x * x * x));
                const T dt = (T(1) - t * t) * kGeluC<T> * (T(1) + T(3) * kGeluA<T> * x * x);
                da[i] += dy[i] * (T(0.5) * (T(1) + t) + T(0.5) * x * dt);
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::softmax(Var a) {
    const auto& X = value(a);
    if (X.rank() == 0 || X.shape.back() == 0) throw ShapeError("softmax needs a non-empty last axis");
    const std::size_t d = X.shape.back();
    Tensor<T> out(X.shape);
    for (std::size_t r = 0; r < X.size(); r += d) {
        const T mx = *std::max_element(X.ptr() + r, X.ptr() + r + d);
        T total = 0;
        for (std::size_t j = 0; j < d; ++j) total += out[r + j] = std::exp(X[r + j] - mx);
        for (std::size_t j = 0; j < d; ++j) out[r + j] /= total;
    }
    Var y = push(std::move(out), needs(a), "softmax");
    if (node(y).requires_grad) {
        node(y).backward = [a, d](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            const auto& Y = g.nodes_[self].value;
            auto& da = g.grad_of(a.id);
            for (std::size_t r = 0; r < Y.size(); r += d) {
                T s = 0;
                for (std::size_t j = 0; j < d; ++j) s += dy[r + j] * Y[r + j];
                for (std::size_t j = 0; j < d; ++j) da[r + j] += Y[r + j] * (dy[r + j] - s);
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
    const auto& X = value(x);
    const std::size_t d = X.rank() ? X.shape.back() : 0;
    if (d == 0 || shape(gain) != Shape{d} || shape(bias) != Shape{d})
        throw ShapeError("layer_norm shape mismatch: " + shape_str(X.shape) + " with gain " +
                         shape_str(shape(gain)) + ", bias " + shape_str(shape(bias)));
    const std::size_t rows = X.size() / d;
    const auto& G = value(gain);
    const auto& Bv = value(bias);
    Tensor<T> out(X.shape);
    Tensor<T> saved(Shape{X.size() + rows});  // xhat then rstd per row
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = X.ptr() + r * d;
        T mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<T>(d);
        T var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<T>(d);
        const T rstd = T(1) / std::sqrt(var + eps);
        saved[X.size() + r] = rstd;
        for (std::size_t j = 0; j < d; ++j) {
            const T xh = (xr[j] - mean) * rstd;
            saved[r * d + j] = xh;
            out[r * d + j] = xh * G[j] + Bv[j];
        }
    }
    Var y = push(std::move(out), needs(x) || needs(gain) || needs(bias), "layer_norm");
    if (node(y).requires_grad) {
        node(y).saved = std::move(saved);
        node(y).backward = [x, gain, bias, d, rows](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            const auto& S = g.nodes_[self].saved;
            const auto& G = g.nodes_[gain.id].value;
            const std::size_t n = rows * d;
            if (g.nodes_[gain.id].requires_grad) {
                auto& dg = g.grad_of(gain.id);
                for (std::size_t i = 0; i < n; ++i) dg[i % d] += dy[i] * S[i];
            }
            if (g.nodes_[bias.id].requires_grad) {
                auto& db = g.grad_of(bias.id);
                for (std::size_t i = 0; i < n; ++i) db[i % d] += dy[i];
            }
            if (g.nodes_[x.id].requires_grad) {
                auto& dx = g.grad_of(x.id);
                for (std::size_t r = 0; r < rows; ++r) {
                    T mean_dxh = 0, mean_dxh_xh = 0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dxh = dy[r * d + j] * G[j];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * S[r * d + j];
                    }
                    mean_dxh /= static_cast<T>(d);
                    mean_dxh_xh /= static_cast<T>(d);
                    const T rstd = S[n + r];
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dxh = dy[r * d + j] * G[j];
                        dx[r * d + j] += rstd * (dxh - mean_dxh - S[r * d + j] * mean_dxh_xh);
                    }
                }
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::embedding(Var table, const std::vector<std::int32_t>& ids, Shape prefix) {
    const Shape& st = shape(table);
    if (st.size() != 2) throw ShapeError("embedding table must be rank 2, got " + shape_str(st));
    if (numel(prefix) != ids.size()) throw ShapeError("embedding ids do not match prefix " + shape_str(prefix));
    const std::size_t vocab = st[0];
    const std::size_t d = st[1];
    for (auto id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= vocab)
            throw ShapeError("embedding id " + std::to_string(id) + " outside table of " + std::to_string(vocab));
    Shape out_shape = prefix;
    out_shape.push_back(d);
    Tensor<T> out(out_shape);
    const auto& E = value(table);
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(E.ptr() + static_cast<std::size_t>(ids[i]) * d, d, out.ptr() + i * d);
    Var y = push(std::move(out), needs(table), "embedding");
    if (node(y).requires_grad) {
        node(y).backward = [table, ids, d](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            auto& dt = g.grad_of(table.id);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                T* row = dt.ptr() + static_cast<std::size_t>(ids[i]) * d;
                for (std::size_t j = 0; j < d; ++j) row[j] += dy[i * d + j];
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::reshape(Var a, Shape new_shape) {
    if (numel(new_shape) != value(a).size())
        throw ShapeError("cannot reshape " + shape_str(shape(a)) + " to " + shape_str(new_shape));
    Tensor<T> out(std::move(new_shape), value(a).data);
    Var y = push(std::move(out), needs(a), nullptr);
    if (node(y).requires_grad) {
        node(y).backward = [a](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            auto& da = g.grad_of(a.id);
            for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::concat_seq(Var a, Var b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0] || sa[2] != sb[2])
        throw ShapeError("concat_seq shape mismatch: " + shape_str(sa) + " ++ " + shape_str(sb));
    const std::size_t B = sa[0], s1 = sa[1], s2 = sb[1], d = sa[2];
    Tensor<T> out(Shape{B, s1 + s2, d});
    const auto& A = value(a);
    const auto& Bv = value(b);
    for (std::size_t bi = 0; bi < B; ++bi) {
        std::copy_n(A.ptr() + bi * s1 * d, s1 * d, out.ptr() + bi * (s1 + s2) * d);
        std::copy_n(Bv.ptr() + bi * s2 * d, s2 * d, out.ptr() + (bi * (s1 + s2) + s1) * d);
    }
    Var y = push(std::move(out), needs(a) || needs(b), nullptr);
    if (node(y).requires_grad) {
        node(y).backward = [a, b, B, s1, s2, d](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            for (std::size_t bi = 0; bi < B; ++bi) {
                const T* row = dy.ptr() + bi * (s1 + s2) * d;
                if (g.nodes_[a.id].requires_grad) {
                    T* da = g.grad_of(a.id).ptr() + bi * s1 * d;
                    for (std::size_t i = 0; i < s1 * d; ++i) da[i] += row[i];
                }
                if (g.nodes_[b.id].requires_grad) {
                    T* db = g.grad_of(b.id).ptr() + bi * s2 * d;
                    for (std::size_t i = 0; i < s2 * d; ++i) db[i] += row[s1 * d + i];
                }
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::split_heads(Var x, std::size_t heads) {
    const Shape& s = shape(x);
    if (s.size() != 3 || heads == 0 || s[2] % heads != 0)
        throw ShapeError("split_heads cannot split " + shape_str(s) + " into " + std::to_string(heads) + " heads");
    const std::size_t B = s[0], S = s[1], dh = s[2] / heads;
    Tensor<T> out(Shape{B, heads, S, dh});
    const auto& X = value(x);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < S; ++t)
            for (std::size_t h = 0; h < heads; ++h)
                std::copy_n(X.ptr() + (b * S + t) * heads * dh + h * dh, dh, out.ptr() + ((b * heads + h) * S + t) * dh);
    Var y = push(std::move(out), needs(x), nullptr);
    if (node(y).requires_grad) {
        node(y).backward = [x, B, S, heads, dh](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            auto& dx = g.grad_of(x.id);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t t = 0; t < S; ++t)
                    for (std::size_t h = 0; h < heads; ++h) {
                        T* dst = dx.ptr() + (b * S + t) * heads * dh + h * dh;
                        const T* src = dy.ptr() + ((b * heads + h) * S + t) * dh;
                        for (std::size_t e = 0; e < dh; ++e) dst[e] += src[e];
                    }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::merge_heads(Var x) {
    const Shape& s = shape(x);
    if (s.size() != 4) throw ShapeError("merge_heads expects rank 4, got " + shape_str(s));
    const std::size_t B = s[0], heads = s[1], S = s[2], dh = s[3];
    Tensor<T> out(Shape{B, S, heads * dh});
    const auto& X = value(x);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t t = 0; t < S; ++t)
                std::copy_n(X.ptr() + ((b * heads + h) * S + t) * dh, dh, out.ptr() + (b * S + t) * heads * dh + h * dh);
    Var y = push(std::move(out), needs(x), nullptr);
    if (node(y).requires_grad) {
        node(y).backward = [x, B, S, heads, dh](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            auto& dx = g.grad_of(x.id);
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t h = 0; h < heads; ++h)
                    for (std::size_t t = 0; t < S; ++t) {
                        T* dst = dx.ptr() + ((b * heads + h) * S + t) * dh;
                        const T* src = dy.ptr() + (b * S + t) * heads * dh + h * dh;
                        for (std::size_t e = 0; e < dh; ++e) dst[e] += src[e];
                    }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::attention(Var q, Var k, Var v, Var mask) {
    const Shape& sq = shape(q);
    const Shape& sk = shape(k);
    const Shape& sv = shape(v);
    if (sq.size() != 4 || sk.size() != 4 || sv != sk || sq[0] != sk[0] || sq[1] != sk[1] || sq[3] != sk[3])
        throw ShapeError("attention shape mismatch: q" + shape_str(sq) + " k" + shape_str(sk) + " v" + shape_str(sv));
    const std::size_t B = sq[0], H = sq[1], Sq = sq[2], Sk = sk[2], dh = sq[3];
    const T* M = nullptr;
    if (mask.valid()) {
        if (shape(mask) != Shape{B, Sq, Sk})
            throw ShapeError("attention mask must be " + shape_str({B, Sq, Sk}) + ", got " + shape_str(shape(mask)));
        M = value(mask).ptr();
    }
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    const auto& Q = value(q);
    const auto& K = value(k);
    const auto& V = value(v);
    Tensor<T> out(Shape{B, H, Sq, dh});
    Tensor<T> probs(Shape{B, H, Sq, Sk});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            const std::size_t bh = b * H + h;
            T* P = probs.ptr() + bh * Sq * Sk;
            auto kt = kernels::transpose(K.ptr() + bh * Sk * dh, Sk, dh);
            kernels::gemm_nn(Q.ptr() + bh * Sq * dh, kt.data(), P, Sq, dh, Sk);
            for (std::size_t i = 0; i < Sq; ++i) {
                T* row = P + i * Sk;
                T mx = -std::numeric_limits<T>::infinity();
                for (std::size_t j = 0; j < Sk; ++j) {
                    row[j] = row[j] * scale + (M ? M[(b * Sq + i) * Sk + j] : T(0));
                    mx = std::max(mx, row[j]);
                }
                if (mx == -std::numeric_limits<T>::infinity()) {
                    std::fill(row, row + Sk, T(0));  // fully masked row
                    continue;
                }
                T total = 0;
                for (std::size_t j = 0; j < Sk; ++j) total += row[j] = std::exp(row[j] - mx);
                for (std::size_t j = 0; j < Sk; ++j) row[j] /= total;
            }
            kernels::gemm_nn(P, V.ptr() + bh * Sk * dh, out.ptr() + bh * Sq * dh, Sq, Sk, dh);
        }
    }
    Var y = push(std::move(out), needs(q) || needs(k) || needs(v), "attention");
    if (node(y).requires_grad) {
        node(y).saved = std::move(probs);
        node(y).backward = [q, k, v, B, H, Sq, Sk, dh, scale](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            const auto& probs = g.nodes_[self].saved;
            const auto& Q = g.nodes_[q.id].value;
            const auto& K = g.nodes_[k.id].value;
            const auto& V = g.nodes_[v.id].value;
            const bool gq = g.nodes_[q.id].requires_grad;
            const bool gk = g.nodes_[k.id].requires_grad;
            const bool gv = g.nodes_[v.id].requires_grad;
            std::vector<T> dP(Sq * Sk);
            for (std::size_t bh = 0; bh < B * H; ++bh) {
                const T* P = probs.ptr() + bh * Sq * Sk;
                const T* dO = dy.ptr() + bh * Sq * dh;
                if (gv) kernels::gemm_tn(P, dO, g.grad_of(v.id).ptr() + bh * Sk * dh, Sq, Sk, dh);
                if (!gq && !gk) continue;
                std::fill(dP.begin(), dP.end(), T(0));
                auto vt = kernels::transpose(V.ptr() + bh * Sk * dh, Sk, dh);
                kernels::gemm_nn(dO, vt.data(), dP.data(), Sq, dh, Sk);
                for (std::size_t i = 0; i < Sq; ++i) {
                    T s = 0;
                    for (std::size_t j = 0; j < Sk; ++j) s += dP[i * Sk + j] * P[i * Sk + j];
                    for (std::size_t j = 0; j < Sk; ++j) dP[i * Sk + j] = P[i * Sk + j] * (dP[i * Sk + j] - s) * scale;
                }
                if (gq) kernels::gemm_nn(dP.data(), K.ptr() + bh * Sk * dh, g.grad_of(q.id).ptr() + bh * Sq * dh, Sq, Sk, dh);
                if (gk) kernels::gemm_tn(dP.data(), Q.ptr() + bh * Sq * dh, g.grad_of(k.id).ptr() + bh * Sk * dh, Sq, Sk, dh);
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::conv_patchify(Var images, Var weight, Var bias, std::size_t p) {
    const Shape& si = shape(images);
    const Shape& sw = shape(weight);
    if (si.size() != 4 || p == 0) throw ShapeError("conv_patchify expects images [B,H,W,C], got " + shape_str(si));
    const std::size_t B = si[0], H = si[1], W = si[2], C = si[3];
    if (H % p != 0 || W % p != 0)
        throw ShapeError("image " + std::to_string(H) + "x" + std::to_string(W) + " not divisible by patch " +
                         std::to_string(p));
    if (sw.size() != 2 || sw[0] != p * p * C || shape(bias) != Shape{sw[1]})
        throw ShapeError("conv_patchify weight " + shape_str(sw) + " / bias " + shape_str(shape(bias)) +
                         " do not match patch " + std::to_string(p) + " with " + std::to_string(C) + " channels");
    const std::size_t d = sw[1];
    const std::size_t gh = H / p, gw = W / p, N = gh * gw;
    const auto& X = value(images);
    const auto& Wt = value(weight);
    const auto& Bv = value(bias);
    Tensor<T> out(Shape{B, N, d});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t ty = 0; ty < gh; ++ty)
            for (std::size_t tx = 0; tx < gw; ++tx) {
                T* o = out.ptr() + (b * N + ty * gw + tx) * d;
                std::copy_n(Bv.ptr(), d, o);
                for (std::size_t py = 0; py < p; ++py)
                    for (std::size_t px = 0; px < p; ++px)
                        for (std::size_t c = 0; c < C; ++c) {
                            const T pix = X[((b * H + ty * p + py) * W + tx * p + px) * C + c];
                            const T* w = Wt.ptr() + ((py * p + px) * C + c) * d;
                            for (std::size_t j = 0; j < d; ++j) o[j] += pix * w[j];
                        }
            }
    Var y = push(std::move(out), needs(images) || needs(weight) || needs(bias), "conv_patchify");
    if (node(y).requires_grad) {
        node(y).backward = [images, weight, bias, B, H, W, C, p, d, gh, gw, N](Graph& g, std::uint32_t self) {
            const auto& dy = g.nodes_[self].grad;
            const auto& X = g.nodes_[images.id].value;
            const auto& Wt = g.nodes_[weight.id].value;
            const bool gi = g.nodes_[images.id].requires_grad;
            const bool gw_ = g.nodes_[weight.id].requires_grad;
            if (g.nodes_[bias.id].requires_grad) {
                auto& db = g.grad_of(bias.id);
                for (std::size_t i = 0; i < dy.size(); ++i) db[i % d] += dy[i];
            }
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t ty = 0; ty < gh; ++ty)
                    for (std::size_t tx = 0; tx < gw; ++tx) {
                        const T* o = dy.ptr() + (b * N + ty * gw + tx) * d;
                        for (std::size_t py = 0; py < p; ++py)
                            for (std::size_t px = 0; px < p; ++px)
                                for (std::size_t c = 0; c < C; ++c) {
                                    const std::size_t xi = ((b * H + ty * p + py) * W + tx * p + px) * C + c;
                                    const std::size_t r = (py * p + px) * C + c;
                                    if (gw_) {
                                        T* dw = g.grad_of(weight.id).ptr() + r * d;
                                        for (std::size_t j = 0; j < d; ++j) dw[j] += X[xi] * o[j];
                                    }
                                    if (gi) {
                                        const T* w = Wt.ptr() + r * d;
                                        T s = 0;
                                        for (std::size_t j = 0; j < d; ++j) s += w[j] * o[j];
                                        g.grad_of(images.id)[xi] += s;
                                    }
                                }
                    }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::cross_entropy_masked(Var logits, const std::vector<std::int32_t>& targets,
                                   const std::vector<std::uint8_t>& mask) {
    const auto& L = value(logits);
    if (L.rank() < 2) throw ShapeError("cross_entropy expects logits of rank >= 2, got " + shape_str(L.shape));
    const std::size_t V = L.shape.back();
    const std::size_t N = L.size() / V;
    if (targets.size() != N || mask.size() != N)
        throw ShapeError("cross_entropy targets/mask length must be " + std::to_string(N));
    std::size_t count = 0;
    for (std::size_t i = 0; i < N; ++i) {
        if (!mask[i]) continue;
        if (mask[i] != 1) throw InputError("loss mask entries must be 0 or 1");
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= V)
            throw ShapeError("target id " + std::to_string(targets[i]) + " outside vocabulary of " + std::to_string(V));
        ++count;
    }
    if (count == 0) throw InputError("cross_entropy with an all-zero loss mask");

    Tensor<T> probs(L.shape);
    T total = 0;
    for (std::size_t i = 0; i < N; ++i) {
        if (!mask[i]) continue;
        const T* row = L.ptr() + i * V;
        const T mx = *std::max_element(row, row + V);
        T z = 0;
        for (std::size_t j = 0; j < V; ++j) z += probs[i * V + j] = std::exp(row[j] - mx);
        for (std::size_t j = 0; j < V; ++j) probs[i * V + j] /= z;
        total += (mx + std::log(z)) - row[targets[i]];
    }
    const T inv = T(1) / static_cast<T>(count);
    Var y = push(Tensor<T>(Shape{}, std::vector<T>{total * inv}), needs(logits), "cross_entropy_masked");
    if (node(y).requires_grad) {
        node(y).saved = std::move(probs);
        node(y).backward = [logits, targets, mask, V, N, inv](Graph& g, std::uint32_t self) {
            const T gy = g.nodes_[self].grad[0] * inv;
            const auto& P = g.nodes_[self].saved;
            auto& dl = g.grad_of(logits.id);
            for (std::size_t i = 0; i < N; ++i) {
                if (!mask[i]) continue;
                for (std::size_t j = 0; j < V; ++j) dl[i * V + j] += gy * P[i * V + j];
                dl[i * V + static_cast<std::size_t>(targets[i])] -= gy;
            }
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::sum(Var a) {
    T s = 0;
    for (T v : value(a).data) s += v;
    Var y = push(Tensor<T>(Shape{}, std::vector<T>{s}), needs(a), "sum");
    if (node(y).requires_grad) {
        node(y).backward = [a](Graph& g, std::uint32_t self) {
            const T gy = g.nodes_[self].grad[0];
            for (auto& v : g.grad_of(a.id).data) v += gy;
        };
    }
    return y;
}

template <typename T>
Var Graph<T>::dot(Var a, const Tensor<T>& w) {
    const auto& A = value(a);
    if (A.shape != w.shape) throw ShapeError("dot shape mismatch: " + shape_str(A.shape) + " . " + shape_str(w.shape));
    T s = 0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i] * w[i];
    Var y = push(Tensor<T>(Shape{}, std::vector<T>{s}), needs(a), "dot");
    if (node(y).requires_grad) {
        node(y).backward = [a, w](Graph& g, std::uint32_t self) {
            const T gy = g.nodes_[self].grad[0];
            auto& da = g.grad_of(a.id);
            for (std::size_t i = 0; i < da.size(); ++i) da[i] += gy * w[i];
        };
    }
    return y;
}

template <typename T>
void Graph<T>::backward(Var loss) {
    if (value(loss).size() != 1) throw InputError("backward needs a scalar loss, got shape " + shape_str(shape(loss)));
    if (!record_) throw InputError("backward on a graph built without recording");
    for (auto& n : nodes_) n.grad = Tensor<T>();
    nodes_[loss.id].grad = Tensor<T>(shape(loss), T(1));
    for (std::int64_t id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || n.grad.data.empty()) continue;
        if (n.backward) n.backward(*this, static_cast<std::uint32_t>(id));
        if (n.param) {
            auto& pg = n.param->grad;
            for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
        }
    }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace mixpt::nn
