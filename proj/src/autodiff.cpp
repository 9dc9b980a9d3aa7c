#include "skillstart/autodiff.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "json.hpp"
#include "skillstart/rng.hpp"

extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace skillstart::ad {

namespace {

// Multi-threaded BLAS would make reductions nondeterministic; evaluation
// parallelism lives above the tape, one tape per worker.
void ensure_single_thread_blas() {
    static std::once_flag flag;
    std::call_once(flag, [] {
        if (openblas_set_num_threads) openblas_set_num_threads(1);
    });
}

void dgemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
           const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
           double* c, std::size_t ldc) {
    if (m == 0 || n == 0) return;
    if (k == 0) {
        if (beta == 0.0) std::fill(c, c + m * ldc, 0.0);
        return;
    }
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
                static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

}  // namespace

Tape::Tape() {
    ensure_single_thread_blas();
    nodes_.reserve(512);
}

Var Tape::push(std::uint32_t rows, std::uint32_t cols, std::vector<double> val, bool needs_grad,
               std::function<void(Tape&)> back) {
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::vector<double>& Tape::grad_buf(Var v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad.assign(n.val.size(), 0.0);
    return n.grad;
}

Var Tape::leaf(const Tensor& t) {
    std::uint32_t r, c;
    if (t.shape.size() == 2) {
        r = static_cast<std::uint32_t>(t.shape[0]);
        c = static_cast<std::uint32_t>(t.shape[1]);
    } else if (t.shape.size() == 1) {
        r = static_cast<std::uint32_t>(t.shape[0]);
        c = 1;
    } else {
        throw std::invalid_argument("leaf: tensors must be rank 1 or 2");
    }
    if (static_cast<std::size_t>(r) * c != t.values.size())
        throw std::invalid_argument("leaf: shape does not match value count");
    return push(r, c, t.values, t.requires_grad, nullptr);
}

Var Tape::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (rows * cols != values.size()) throw std::invalid_argument("constant: shape mismatch");
    return push(static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols),
                std::move(values), false, nullptr);
}

Var Tape::constant_scalar(double v) { return constant(1, 1, {v}); }

Var Tape::matmul(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.cols != nb.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    const std::size_t m = na.rows, k = na.cols, n = nb.cols;
    std::vector<double> out(m * n, 0.0);
    dgemm(false, false, m, n, k, 1.0, na.val.data(), k, nb.val.data(), n, 0.0, out.data(), n);
    const bool ng = na.needs_grad || nb.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(
        static_cast<std::uint32_t>(m), static_cast<std::uint32_t>(n), std::move(out), ng,
        !ng ? std::function<void(Tape&)>() : [a, b, o, m, k, n](Tape& t) {
            const auto& g = t.node(o).grad;
            if (t.node(a).needs_grad) {
                dgemm(false, true, m, k, n, 1.0, g.data(), n, t.node(b).val.data(), n, 1.0,
                      t.grad_buf(a).data(), k);
            }
            if (t.node(b).needs_grad) {
                dgemm(true, false, k, n, m, 1.0, t.node(a).val.data(), k, g.data(), n, 1.0,
                      t.grad_buf(b).data(), n);
            }
        });
}

Var Tape::add(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.rows != nb.rows || na.cols != nb.cols) throw std::invalid_argument("add: shape mismatch");
    std::vector<double> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.val[i] + nb.val[i];
    const bool ng = na.needs_grad || nb.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(na.rows, na.cols, std::move(out), ng,
                !ng ? std::function<void(Tape&)>() : [a, b, o](Tape& t) {
                    const auto& g = t.node(o).grad;
                    if (t.node(a).needs_grad) {
                        auto& ga = t.grad_buf(a);
                        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    }
                    if (t.node(b).needs_grad) {
                        auto& gb = t.grad_buf(b);
                        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                    }
                });
}

Var Tape::sub(Var a, Var b) { return add(a, neg(b)); }

Var Tape::mul(Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    if (na.rows != nb.rows || na.cols != nb.cols) throw std::invalid_argument("mul: shape mismatch");
    std::vector<double> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na.val[i] * nb.val[i];
    const bool ng = na.needs_grad || nb.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(na.rows, na.cols, std::move(out), ng,
                !ng ? std::function<void(Tape&)>() : [a, b, o](Tape& t) {
                    const auto& g = t.node(o).grad;
                    if (t.node(a).needs_grad) {
                        auto& ga = t.grad_buf(a);
                        const auto& vb = t.node(b).val;
                        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
                    }
                    if (t.node(b).needs_grad) {
                        auto& gb = t.grad_buf(b);
                        const auto& va = t.node(a).val;
                        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
                    }
                });
}

Var Tape::neg(Var a) { return scale(a, -1.0); }

Var Tape::scale(Var a, double s) {
    const Node& na = node(a);
    std::vector<double> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * na.val[i];
    const bool ng = na.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(na.rows, na.cols, std::move(out), ng,
                !ng ? std::function<void(Tape&)>() : [a, o, s](Tape& t) {
                    const auto& g = t.node(o).grad;
                    auto& ga = t.grad_buf(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                });
}

Var Tape::add_rowvec(Var a, Var v) {
    const Node& na = node(a);
    const Node& nv = node(v);
    if (nv.rows != 1 || nv.cols != na.cols) throw std::invalid_argument("add_rowvec: shape mismatch");
    std::vector<double> out(na.val.size());
    for (std::size_t i = 0; i < na.rows; ++i) {
        for (std::size_t j = 0; j < na.cols; ++j) out[i * na.cols + j] = na.val[i * na.cols + j] + nv.val[j];
    }
    const bool ng = na.needs_grad || nv.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(na.rows, na.cols, std::move(out), ng,
                !ng ? std::function<void(Tape&)>() : [a, v, o](Tape& t) {
                    const auto& g = t.node(o).grad;
                    const std::size_t rows = t.node(a).rows, cols = t.node(a).cols;
                    if (t.node(a).needs_grad) {
                        auto& ga = t.grad_buf(a);
                        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    }
                    if (t.node(v).needs_grad) {
                        auto& gv = t.grad_buf(v);
                        for (std::size_t i = 0; i < rows; ++i) {
                            for (std::size_t j = 0; j < cols; ++j) gv[j] += g[i * cols + j];
                        }
                    }
                });
}

Var Tape::col_broadcast(Var v, std::size_t cols) {
    const Node& nv = node(v);
    if (nv.cols != 1) throw std::invalid_argument("col_broadcast: input must be n x 1");
    std::vector<double> out(nv.rows * cols);
    for (std::size_t i = 0; i < nv.rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = nv.val[i];
    }
    const bool ng = nv.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(nv.rows, static_cast<std::uint32_t>(cols), std::move(out), ng,
                !ng ? std::function<void(Tape&)>() : [v, o, cols](Tape& t) {
                    const auto& g = t.node(o).grad;
                    auto& gv = t.grad_buf(v);
                    const std::size_t rows = t.node(v).rows;
                    for (std::size_t i = 0; i < rows; ++i) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < cols; ++j) s += g[i * cols + j];
                        gv[i] += s;
                    }
                });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    const std::size_t rows = node(parts[0]).rows;
    std::size_t cols = 0;
    bool ng = false;
    for (Var p : parts) {
        if (node(p).rows != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += node(p).cols;
        ng = ng || node(p).needs_grad;
    }
    std::vector<double> out(rows * cols);
    std::size_t off = 0;
    for (Var p : parts) {
        const Node& np = node(p);
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy_n(np.val.data() + i * np.cols, np.cols, out.data() + i * cols + off);
        }
        off += np.cols;
    }
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols), std::move(out),
                ng, !ng ? std::function<void(Tape&)>() : [parts, o, rows, cols](Tape& t) {
                    const auto& g = t.node(o).grad;
                    std::size_t off2 = 0;
                    for (Var p : parts) {
                        const std::size_t pc = t.node(p).cols;
                        if (t.node(p).needs_grad) {
                            auto& gp = t.grad_buf(p);
                            for (std::size_t i = 0; i < rows; ++i) {
                                for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += g[i * cols + off2 + j];
                            }
                        }
                        off2 += pc;
                    }
                });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
    const std::size_t cols = node(parts[0]).cols;
    std::size_t rows = 0;
    bool ng = false;
    for (Var p : parts) {
        if (node(p).cols != cols && node(p).rows != 0)
            throw std::invalid_argument("concat_rows: column mismatch");
        rows += node(p).rows;
        ng = ng || node(p).needs_grad;
    }
    std::vector<double> out;
    out.reserve(rows * cols);
    for (Var p : parts) out.insert(out.end(), node(p).val.begin(), node(p).val.end());
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols), std::move(out),
                ng, !ng ? std::function<void(Tape&)>() : [parts, o](Tape& t) {
                    const auto& g = t.node(o).grad;
                    std::size_t off = 0;
                    for (Var p : parts) {
                        const std::size_t n = t.node(p).val.size();
                        if (t.node(p).needs_grad) {
                            auto& gp = t.grad_buf(p);
                            for (std::size_t i = 0; i < n; ++i) gp[i] += g[off + i];
                        }
                        off += n;
                    }
                });
}

Var Tape::gather_rows(Var a, std::vector<std::uint32_t> indices) {
    const Node& na = node(a);
    for (auto i : indices) {
        if (i >= na.rows) throw std::invalid_argument("gather_rows: index out of range");
    }
    const std::size_t cols = na.cols;
    std::vector<double> out(indices.size() * cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::copy_n(na.val.data() + static_cast<std::size_t>(indices[i]) * cols, cols,
                    out.data() + i * cols);
    }
    const bool ng = na.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(static_cast<std::uint32_t>(indices.size()), static_cast<std::uint32_t>(cols),
                std::move(out), ng,
                !ng ? std::function<void(Tape&)>()
                    : [a, o, idx = std::move(indices), cols](Tape& t) {
                          const auto& g = t.node(o).grad;
                          auto& ga = t.grad_buf(a);
                          for (std::size_t i = 0; i < idx.size(); ++i) {
                              for (std::size_t j = 0; j < cols; ++j)
                                  ga[static_cast<std::size_t>(idx[i]) * cols + j] += g[i * cols + j];
                          }
                      });
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Node& na = node(a);
    if (c0 >= c1 || c1 > na.cols) throw std::invalid_argument("slice_cols: bad range");
    const std::size_t w = c1 - c0, cols = na.cols;
    std::vector<double> out(na.rows * w);
    for (std::size_t i = 0; i < na.rows; ++i)
        std::copy_n(na.val.data() + i * cols + c0, w, out.data() + i * w);
    const bool ng = na.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(na.rows, static_cast<std::uint32_t>(w), std::move(out), ng,
                !ng ? std::function<void(Tape&)>() : [a, o, c0, w, cols](Tape& t) {
                    const auto& g = t.node(o).grad;
                    auto& ga = t.grad_buf(a);
                    const std::size_t rows = t.node(a).rows;
                    for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t j = 0; j < w; ++j) ga[i * cols + c0 + j] += g[i * w + j];
                    }
                });
}

Var Tape::map_unary(Var a, const std::function<double(double)>& f,
                    const std::function<double(double, double)>& dfdx_from_x_y) {
    const Node& na = node(a);
    std::vector<double> out(na.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(na.val[i]);
    const bool ng = na.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(na.rows, na.cols, std::move(out), ng,
                !ng ? std::function<void(Tape&)>() : [a, o, dfdx_from_x_y](Tape& t) {
                    const auto& g = t.node(o).grad;
                    const auto& x = t.node(a).val;
                    const auto& y = t.node(o).val;
                    auto& ga = t.grad_buf(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx_from_x_y(x[i], y[i]);
                });
}

Var Tape::relu(Var a) {
    return map_unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                     [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Tape::leaky_relu(Var a, double alpha) {
    return map_unary(a, [alpha](double x) { return x > 0.0 ? x : alpha * x; },
                     [alpha](double x, double) { return x > 0.0 ? 1.0 : alpha; });
}

Var Tape::sigmoid(Var a) {
    return map_unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                     [](double, double y) { return y * (1.0 - y); });
}

Var Tape::tanh_(Var a) {
    return map_unary(a, [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
}

Var Tape::exp_(Var a) {
    return map_unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var Tape::log_(Var a) {
    return map_unary(a, [](double x) { return std::log(x); },
                     [](double x, double) { return 1.0 / x; });
}

Var Tape::abs_(Var a) {
    return map_unary(a, [](double x) { return std::abs(x); },
                     [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var Tape::sum(Var a) {
    const Node& na = node(a);
    double s = 0.0;
    for (double v : na.val) s += v;
    const bool ng = na.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(1, 1, {s}, ng, !ng ? std::function<void(Tape&)>() : [a, o](Tape& t) {
        const double g = t.node(o).grad[0];
        auto& ga = t.grad_buf(a);
        for (double& v : ga) v += g;
    });
}

Var Tape::mean(Var a) {
    const Node& na = node(a);
    if (na.val.empty()) throw std::invalid_argument("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(na.val.size()));
}

Var Tape::sum_rows(Var a) {
    const Node& na = node(a);
    std::vector<double> out(na.cols, 0.0);
    for (std::size_t i = 0; i < na.rows; ++i) {
        for (std::size_t j = 0; j < na.cols; ++j) out[j] += na.val[i * na.cols + j];
    }
    const bool ng = na.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(1, na.cols, std::move(out), ng,
                !ng ? std::function<void(Tape&)>() : [a, o](Tape& t) {
                    const auto& g = t.node(o).grad;
                    auto& ga = t.grad_buf(a);
                    const std::size_t rows = t.node(a).rows, cols = t.node(a).cols;
                    for (std::size_t i = 0; i < rows; ++i) {
                        for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += g[j];
                    }
                });
}

Var Tape::segment_sum(Var a, std::vector<std::uint32_t> seg, std::size_t n_seg) {
    const Node& na = node(a);
    if (seg.size() != na.rows) throw std::invalid_argument("segment_sum: segment id count mismatch");
    const std::size_t cols = na.cols;
    std::vector<double> out(n_seg * cols, 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) {
        if (seg[i] >= n_seg) throw std::invalid_argument("segment_sum: segment id out of range");
        for (std::size_t j = 0; j < cols; ++j)
            out[static_cast<std::size_t>(seg[i]) * cols + j] += na.val[i * cols + j];
    }
    const bool ng = na.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(static_cast<std::uint32_t>(n_seg), static_cast<std::uint32_t>(cols), std::move(out),
                ng,
                !ng ? std::function<void(Tape&)>()
                    : [a, o, s = std::move(seg), cols](Tape& t) {
                          const auto& g = t.node(o).grad;
                          auto& ga = t.grad_buf(a);
                          for (std::size_t i = 0; i < s.size(); ++i) {
                              for (std::size_t j = 0; j < cols; ++j)
                                  ga[i * cols + j] += g[static_cast<std::size_t>(s[i]) * cols + j];
                          }
                      });
}

Var Tape::segment_softmax(Var s, std::vector<std::uint32_t> seg, std::size_t n_seg) {
    const Node& ns = node(s);
    if (ns.cols != 1) throw std::invalid_argument("segment_softmax: input must be m x 1");
    if (seg.size() != ns.rows) throw std::invalid_argument("segment_softmax: segment id count mismatch");
    std::vector<double> mx(n_seg, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < seg.size(); ++i) mx[seg[i]] = std::max(mx[seg[i]], ns.val[i]);
    std::vector<double> out(ns.rows);
    std::vector<double> denom(n_seg, 0.0);
    for (std::size_t i = 0; i < seg.size(); ++i) {
        out[i] = std::exp(ns.val[i] - mx[seg[i]]);
        denom[seg[i]] += out[i];
    }
    for (std::size_t i = 0; i < seg.size(); ++i) out[i] /= denom[seg[i]];
    const bool ng = ns.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(ns.rows, 1, std::move(out), ng,
                !ng ? std::function<void(Tape&)>()
                    : [s, o, sg = std::move(seg), n_seg](Tape& t) {
                          const auto& g = t.node(o).grad;
                          const auto& alpha = t.node(o).val;
                          auto& gs = t.grad_buf(s);
                          std::vector<double> dot(n_seg, 0.0);
                          for (std::size_t i = 0; i < sg.size(); ++i) dot[sg[i]] += alpha[i] * g[i];
                          for (std::size_t i = 0; i < sg.size(); ++i)
                              gs[i] += alpha[i] * (g[i] - dot[sg[i]]);
                      });
}

Var Tape::segment_max(Var a, std::vector<std::uint32_t> seg, std::size_t n_seg) {
    const Node& na = node(a);
    if (seg.size() != na.rows) throw std::invalid_argument("segment_max: segment id count mismatch");
    const std::size_t cols = na.cols;
    std::vector<double> out(n_seg * cols, 0.0);
    auto argmax = std::make_shared<std::vector<std::int64_t>>(n_seg * cols, -1);
    for (std::size_t i = 0; i < seg.size(); ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t oi = static_cast<std::size_t>(seg[i]) * cols + j;
            const double v = na.val[i * cols + j];
            if ((*argmax)[oi] < 0 || v > out[oi]) {
                out[oi] = v;
                (*argmax)[oi] = static_cast<std::int64_t>(i);
            }
        }
    }
    for (std::size_t oi = 0; oi < out.size(); ++oi) {
        if ((*argmax)[oi] < 0) out[oi] = 0.0;  // empty segment
    }
    const bool ng = na.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(static_cast<std::uint32_t>(n_seg), static_cast<std::uint32_t>(cols), std::move(out),
                ng,
                !ng ? std::function<void(Tape&)>() : [a, o, argmax, cols](Tape& t) {
                    const auto& g = t.node(o).grad;
                    auto& ga = t.grad_buf(a);
                    for (std::size_t oi = 0; oi < g.size(); ++oi) {
                        const std::int64_t src = (*argmax)[oi];
                        if (src >= 0) ga[static_cast<std::size_t>(src) * cols + oi % cols] += g[oi];
                    }
                });
}

Var Tape::bce(Var p, std::vector<double> y, double pos_weight) {
    const Node& np = node(p);
    if (y.size() != np.val.size()) throw std::invalid_argument("bce: label count mismatch");
    constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
    std::vector<double> out(np.val.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double pc = std::clamp(np.val[i], lo, hi);
        out[i] = -(pos_weight * y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc));
    }
    const bool ng = np.needs_grad;
    const Var o{static_cast<std::uint32_t>(nodes_.size())};
    return push(np.rows, np.cols, std::move(out), ng,
                !ng ? std::function<void(Tape&)>()
                    : [p, o, yy = std::move(y), pos_weight](Tape& t) {
                          const auto& g = t.node(o).grad;
                          const auto& pv = t.node(p).val;
                          auto& gp = t.grad_buf(p);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                              if (pv[i] <= lo || pv[i] >= hi) continue;  // clamped: flat
                              gp[i] += g[i] * (-pos_weight * yy[i] / pv[i] +
                                               (1.0 - yy[i]) / (1.0 - pv[i]));
                          }
                      });
}

void Tape::backward(Var output) {
    Node& out = node(output);
    if (out.val.size() != 1) throw std::invalid_argument("backward: output must be scalar");
    if (!out.needs_grad) return;
    grad_buf(output)[0] = 1.0;
    for (std::uint32_t i = static_cast<std::uint32_t>(nodes_.size()); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.needs_grad && n.back && !n.grad.empty()) n.back(*this);
    }
}

std::span<const double> Tape::value(Var v) const { return node(v).val; }

double Tape::value_scalar(Var v) const {
    const Node& n = node(v);
    if (n.val.size() != 1) throw std::invalid_argument("value_scalar: not a scalar");
    return n.val[0];
}

std::span<const double> Tape::grad(Var v) const {
    static const std::vector<double> kEmpty;
    const Node& n = node(v);
    return n.grad.empty() ? std::span<const double>(kEmpty) : std::span<const double>(n.grad);
}

std::size_t Tape::rows(Var v) const { return node(v).rows; }
std::size_t Tape::cols(Var v) const { return node(v).cols; }

Var BoundParams::at(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

BoundParams bind_params(Tape& tape, const ParamStore& params, bool requires_grad) {
    BoundParams bound;
    for (const auto& [name, tensor] : params) {
        Tensor t = tensor;
        t.requires_grad = requires_grad;
        bound.vars.emplace(name, tape.leaf(t));
    }
    return bound;
}

void accumulate_param_grads(const Tape& tape, const BoundParams& bound, GradStore& grads) {
    for (const auto& [name, var] : bound.vars) {
        const auto g = tape.grad(var);
        if (g.empty()) continue;
        auto& acc = grads[name];
        if (acc.empty()) acc.assign(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
}

void adam_step(ParamStore& params, const GradStore& grads, AdamState& state, double lr) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto& [name, tensor] : params) {
        auto& [m, v] = state.moments[name];
        if (m.empty()) {
            m.assign(tensor.values.size(), 0.0);
            v.assign(tensor.values.size(), 0.0);
        }
        const auto it = grads.find(name);
        static const std::vector<double> kZero;
        const std::vector<double>* g = it != grads.end() ? &it->second : nullptr;
        for (std::size_t i = 0; i < tensor.values.size(); ++i) {
            const double gi = g ? (*g)[i] : 0.0;
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            tensor.values[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

double bce_loss(double p, double y, double pos_weight) {
    const double pc = std::clamp(p, 1e-7, 1.0 - 1e-7);
    return -(pos_weight * y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
}

void init_linear(ParamStore& params, const std::string& name, std::size_t in, std::size_t out,
                 std::uint64_t seed) {
    Rng rng(seed);
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w = Tensor::matrix(in, out);
    for (auto& v : w.values) v = rng.uniform(-s, s);
    params[name + ".W"] = std::move(w);
    params[name + ".b"] = Tensor::matrix(1, out);
}

std::string params_to_json(const ParamStore& params) {
    nlohmann::json j;
    j["format_version"] = 1;
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [name, t] : params) {
        p[name] = {{"shape", t.shape}, {"values", t.values}};
    }
    j["params"] = p;
    return j.dump();
}

ParamStore params_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != 1)
        throw std::invalid_argument("unsupported weight file version");
    ParamStore params;
    for (const auto& [name, item] : j.at("params").items()) {
        Tensor t;
        t.shape = item.at("shape").get<std::vector<std::size_t>>();
        t.values = item.at("values").get<std::vector<double>>();
        if (t.size() != t.values.size()) throw std::invalid_argument("weight shape mismatch");
        params[name] = std::move(t);
    }
    return params;
}

std::size_t param_count(const ParamStore& params) {
    std::size_t n = 0;
    for (const auto& [name, t] : params) n += t.values.size();
    return n;
}

}  // namespace skillstart::ad
