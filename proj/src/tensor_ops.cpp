// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
//
// Structured ops of the autodiff engine: convolution (im2col + GEMM),
// normalization, attention primitives and the resampling family.
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "tinyvsr/tensor.hpp"

namespace tinyvsr::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

bool any_requires_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

Tensor make_op(Shape shape, std::vector<Tensor> inputs, std::vector<double> value,
               std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (grad_enabled() && any_requires_grad(inputs)) {
        n->requires_grad = true;
        n->parents.reserve(inputs.size());
        for (auto& t : inputs) n->parents.push_back(t.node());
        n->backward_fn = std::move(backward);
    }
    return Tensor(std::move(n));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError(str_cat("matmul: ", shape_str(a.shape()), " x ", shape_str(b.shape())));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * n);
    {
        ConstMapMat A(a.data().data(), m, k), B(b.data().data(), k, n);
        MapMat O(out.data(), m, n);
        O.noalias() = A * B;
    }
    return make_op({m, n}, {a, b}, std::move(out), [m, k, n](Node& nd) {
        ConstMapMat G(nd.grad.data(), m, n);
        auto& pa = nd.parents[0];
        auto& pb = nd.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            ConstMapMat B(pb->value.data(), k, n);
            MapMat dA(pa->grad.data(), m, k);
            dA.noalias() += G * B.transpose();
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            ConstMapMat A(pa->value.data(), m, k);
            MapMat dB(pb->grad.data(), k, n);
            dB.noalias() += A.transpose() * G;
        }
    });
}

Tensor transpose2d(const Tensor& x) {
    if (x.shape().size() != 2) throw DimensionError("transpose2d: rank-2 tensor expected");
    const int m = x.dim(0), n = x.dim(1);
    std::vector<double> out(x.numel());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<size_t>(j) * m + i] = x.data()[static_cast<size_t>(i) * n + j];
    return make_op({n, m}, {x}, std::move(out), [m, n](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                p->grad[static_cast<size_t>(i) * n + j] += nd.grad[static_cast<size_t>(j) * m + i];
    });
}

Tensor softmax_rows(const Tensor& x) {
    if (x.shape().size() != 2) throw DimensionError("softmax_rows: rank-2 tensor expected");
    const int m = x.dim(0), n = x.dim(1);
    std::vector<double> out(x.numel());
    for (int i = 0; i < m; ++i) {
        const double* row = x.data().data() + static_cast<size_t>(i) * n;
        double* orow = out.data() + static_cast<size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < n; ++j) orow[j] /= z;
    }
    return make_op({m, n}, {x}, std::move(out), [m, n](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        for (int i = 0; i < m; ++i) {
            const double* y = nd.value.data() + static_cast<size_t>(i) * n;
            const double* g = nd.grad.data() + static_cast<size_t>(i) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += y[j] * g[j];
            double* dx = p->grad.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) dx[j] += y[j] * (g[j] - dot);
        }
    });
}

// ---- convolution ----

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
              PadMode pad_mode) {
    if (x.shape().size() != 3 || w.shape().size() != 4)
        throw DimensionError("conv2d: expected CHW input and OIHW weight");
    const int ic = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int oc = w.dim(0), kic = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (kic != ic)
        throw ConfigError(str_cat("conv2d: input channels ", ic, " but weight expects ", kic));
    if (b.shape().size() != 1 || b.dim(0) != oc) throw DimensionError("conv2d: bias must be [OC]");
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (wd + 2 * pad - kw) / stride + 1;
    if (oh <= 0 || ow <= 0) throw DimensionError("conv2d: empty output");

    const int K = ic * kh * kw;
    const size_t P = static_cast<size_t>(oh) * ow;

    // gather map: source flat index per (row of col matrix, output position);
    // -1 denotes a zero pad cell (replicate mode clamps instead)
    auto idx = std::make_shared<std::vector<std::int64_t>>(static_cast<size_t>(K) * P);
    {
        std::int64_t* ip = idx->data();
        for (int c = 0; c < ic; ++c)
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx)
                    for (int oy = 0; oy < oh; ++oy) {
                        int sy = oy * stride + ky - pad;
                        const bool y_out = sy < 0 || sy >= h;
                        if (pad_mode == PadMode::kReplicate)
                            sy = std::clamp(sy, 0, h - 1);
                        else if (pad_mode == PadMode::kCircular)
                            sy = ((sy % h) + h) % h;
                        for (int ox = 0; ox < ow; ++ox) {
                            int sx = ox * stride + kx - pad;
                            const bool x_out = sx < 0 || sx >= wd;
                            if (pad_mode == PadMode::kReplicate)
                                sx = std::clamp(sx, 0, wd - 1);
                            else if (pad_mode == PadMode::kCircular)
                                sx = ((sx % wd) + wd) % wd;
                            const bool zero = pad_mode == PadMode::kZero && (y_out || x_out);
                            *ip++ = zero ? -1
                                         : static_cast<std::int64_t>(c) * h * wd +
                                               static_cast<std::int64_t>(sy) * wd + sx;
                        }
                    }
    }

    std::vector<double> col(static_cast<size_t>(K) * P);
    for (size_t i = 0; i < col.size(); ++i) {
        const std::int64_t s = (*idx)[i];
        col[i] = s < 0 ? 0.0 : x.data()[static_cast<size_t>(s)];
    }

    std::vector<double> out(static_cast<size_t>(oc) * P);
    {
        ConstMapMat W(w.data().data(), oc, K);
        ConstMapMat C(col.data(), K, static_cast<int>(P));
        MapMat O(out.data(), oc, static_cast<int>(P));
        O.noalias() = W * C;
        for (int o = 0; o < oc; ++o) O.row(o).array() += b.data()[o];
    }

    return make_op({oc, oh, ow}, {x, w, b}, std::move(out), [=](Node& nd) {
        auto& px = nd.parents[0];
        auto& pw = nd.parents[1];
        auto& pb = nd.parents[2];
        ConstMapMat G(nd.grad.data(), oc, static_cast<int>(P));

        if (pw->requires_grad || px->requires_grad) {
            // rebuild the gathered col matrix from the saved index map
            std::vector<double> col2(static_cast<size_t>(K) * P);
            for (size_t i = 0; i < col2.size(); ++i) {
                const std::int64_t s = (*idx)[i];
                col2[i] = s < 0 ? 0.0 : px->value[static_cast<size_t>(s)];
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                ConstMapMat C(col2.data(), K, static_cast<int>(P));
                MapMat dW(pw->grad.data(), oc, K);
                dW.noalias() += G * C.transpose();
            }
            if (px->requires_grad) {
                px->ensure_grad();
                ConstMapMat W(pw->value.data(), oc, K);
                RowMat dcol = W.transpose() * G;  // K x P
                const double* dc = dcol.data();
                for (size_t i = 0; i < static_cast<size_t>(K) * P; ++i) {
                    const std::int64_t s = (*idx)[i];
                    if (s >= 0) px->grad[static_cast<size_t>(s)] += dc[i];
                }
            }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (int o = 0; o < oc; ++o) pb->grad[o] += G.row(o).sum();
        }
    });
}

// ---- group normalization ----

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups, double eps) {
    if (x.shape().size() != 3) throw DimensionError("group_norm: CHW input expected");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (groups < 1 || C % groups != 0)
        throw ConfigError(str_cat("group_norm: ", C, " channels not divisible into ", groups, " groups"));
    if (gamma.dim(0) != C || beta.dim(0) != C) throw DimensionError("group_norm: affine params must be [C]");

    const int gs = C / groups;
    const size_t plane = static_cast<size_t>(H) * W;
    const size_t gsize = gs * plane;

    auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(groups) * 2);
    std::vector<double> out(x.numel());
    for (int g = 0; g < groups; ++g) {
        const double* xs = x.data().data() + g * gsize;
        double mu = 0.0;
        for (size_t i = 0; i < gsize; ++i) mu += xs[i];
        mu /= static_cast<double>(gsize);
        double var = 0.0;
        for (size_t i = 0; i < gsize; ++i) {
            const double d = xs[i] - mu;
            var += d * d;
        }
        var /= static_cast<double>(gsize);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        (*stats)[2 * g] = mu;
        (*stats)[2 * g + 1] = inv_std;
        for (int cc = 0; cc < gs; ++cc) {
            const int c = g * gs + cc;
            const double ga = gamma.data()[c], be = beta.data()[c];
            double* os = out.data() + c * plane;
            const double* xc = x.data().data() + c * plane;
            for (size_t i = 0; i < plane; ++i) os[i] = ga * (xc[i] - mu) * inv_std + be;
        }
    }

    return make_op(x.shape(), {x, gamma, beta}, std::move(out), [=](Node& nd) {
        auto& px = nd.parents[0];
        auto& pg = nd.parents[1];
        auto& pbt = nd.parents[2];
        for (int g = 0; g < groups; ++g) {
            const double mu = (*stats)[2 * g], inv_std = (*stats)[2 * g + 1];
            if (pg->requires_grad || pbt->requires_grad) {
                if (pg->requires_grad) pg->ensure_grad();
                if (pbt->requires_grad) pbt->ensure_grad();
                for (int cc = 0; cc < gs; ++cc) {
                    const int c = g * gs + cc;
                    const double* go = nd.grad.data() + c * plane;
                    const double* xc = px->value.data() + c * plane;
                    double dg = 0.0, db = 0.0;
                    for (size_t i = 0; i < plane; ++i) {
                        dg += go[i] * (xc[i] - mu) * inv_std;
                        db += go[i];
                    }
                    if (pg->requires_grad) pg->grad[c] += dg;
                    if (pbt->requires_grad) pbt->grad[c] += db;
                }
            }
            if (px->requires_grad) {
                px->ensure_grad();
                // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (int cc = 0; cc < gs; ++cc) {
                    const int c = g * gs + cc;
                    const double ga = pg->value[c];
                    const double* go = nd.grad.data() + c * plane;
                    const double* xc = px->value.data() + c * plane;
                    for (size_t i = 0; i < plane; ++i) {
                        const double xh = (xc[i] - mu) * inv_std;
                        const double dxh = go[i] * ga;
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * xh;
                    }
                }
                const double inv_m = 1.0 / static_cast<double>(gsize);
                const double mean_dxh = sum_dxh * inv_m;
                const double mean_dxh_xh = sum_dxh_xh * inv_m;
                for (int cc = 0; cc < gs; ++cc) {
                    const int c = g * gs + cc;
                    const double ga = pg->value[c];
                    const double* go = nd.grad.data() + c * plane;
                    const double* xc = px->value.data() + c * plane;
                    double* dx = px->grad.data() + c * plane;
                    for (size_t i = 0; i < plane; ++i) {
                        const double xh = (xc[i] - mu) * inv_std;
                        const double dxh = go[i] * ga;
                        dx[i] += inv_std * (dxh - mean_dxh - xh * mean_dxh_xh);
                    }
                }
            }
        }
    });
}

// ---- spatial rearrangement ----

Tensor upsample_nearest2x(const Tensor& x) {
    if (x.shape().size() != 3) throw DimensionError("upsample_nearest2x: CHW input expected");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    std::vector<double> out(static_cast<size_t>(C) * 4 * H * W);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y)
            for (int xx = 0; xx < 2 * W; ++xx)
                out[(static_cast<size_t>(c) * 2 * H + y) * 2 * W + xx] =
                    x.data()[(static_cast<size_t>(c) * H + y / 2) * W + xx / 2];
    return make_op({C, 2 * H, 2 * W}, {x}, std::move(out), [C, H, W](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * H; ++y)
                for (int xx = 0; xx < 2 * W; ++xx)
                    p->grad[(static_cast<size_t>(c) * H + y / 2) * W + xx / 2] +=
                        nd.grad[(static_cast<size_t>(c) * 2 * H + y) * 2 * W + xx];
    });
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ContractError("concat_channels: empty input list");
    const int H = xs[0].dim(1), W = xs[0].dim(2);
    int C = 0;
    for (const auto& t : xs) {
        if (t.shape().size() != 3 || t.dim(1) != H || t.dim(2) != W)
            throw DimensionError("concat_channels: spatial shape mismatch");
        C += t.dim(0);
    }
    const size_t plane = static_cast<size_t>(H) * W;
    std::vector<double> out(static_cast<size_t>(C) * plane);
    size_t off = 0;
    for (const auto& t : xs) {
        std::copy(t.data().begin(), t.data().end(), out.begin() + off);
        off += t.numel();
    }
    return make_op({C, H, W}, xs, std::move(out), [](Node& nd) {
        size_t off = 0;
        for (auto& p : nd.parents) {
            if (p->requires_grad) {
                p->ensure_grad();
                for (size_t i = 0; i < p->value.size(); ++i) p->grad[i] += nd.grad[off + i];
            }
            off += p->value.size();
        }
    });
}

namespace {

// shared machinery for the two shuffle directions: out[i] = in[map[i]]
Tensor permutation_op(const Tensor& x, Shape out_shape, std::vector<size_t> map) {
    std::vector<double> out(map.size());
    for (size_t i = 0; i < map.size(); ++i) out[i] = x.data()[map[i]];
    auto shared = std::make_shared<std::vector<size_t>>(std::move(map));
    return make_op(std::move(out_shape), {x}, std::move(out), [shared](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < shared->size(); ++i) p->grad[(*shared)[i]] += nd.grad[i];
    });
}

}  // namespace

Tensor pixel_unshuffle(const Tensor& x, int u) {
    if (x.shape().size() != 3) throw DimensionError("pixel_unshuffle: CHW input expected");
    if (u < 1) throw ConfigError("pixel_unshuffle: u must be >= 1");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H % u != 0 || W % u != 0)
        throw DimensionError(str_cat("pixel_unshuffle: ", H, "x", W, " not divisible by ", u));
    if (u == 1) return reshape(x, x.shape());
    const int oh = H / u, ow = W / u;
    std::vector<size_t> map(x.numel());
    size_t i = 0;
    // out channel = c*u*u + dy*u + dx  (block elements in row-major order)
    for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < u; ++dy)
            for (int dx = 0; dx < u; ++dx)
                for (int y = 0; y < oh; ++y)
                    for (int xx = 0; xx < ow; ++xx)
                        map[i++] = (static_cast<size_t>(c) * H + (static_cast<size_t>(y) * u + dy)) * W +
                                   static_cast<size_t>(xx) * u + dx;
    return permutation_op(x, {C * u * u, oh, ow}, std::move(map));
}

Tensor pixel_shuffle(const Tensor& x, int u) {
    if (x.shape().size() != 3) throw DimensionError("pixel_shuffle: CHW input expected");
    if (u < 1) throw ConfigError("pixel_shuffle: u must be >= 1");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (C % (u * u) != 0)
        throw DimensionError(str_cat("pixel_shuffle: ", C, " channels not divisible by ", u * u));
    if (u == 1) return reshape(x, x.shape());
    const int oc = C / (u * u), oh = H * u, ow = W * u;
    std::vector<size_t> map(x.numel());
    size_t i = 0;
    for (int c = 0; c < oc; ++c)
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx)
                map[i++] = (static_cast<size_t>(c * u * u + (y % u) * u + (xx % u)) * H + y / u) * W + xx / u;
    return permutation_op(x, {oc, oh, ow}, std::move(map));
}

// ---- resampling ----

Tensor bicubic_warp(const Tensor& x, const FlowField& flow) {
    if (x.shape().size() != 3 || x.dim(1) != flow.height || x.dim(2) != flow.width)
        throw DimensionError("bicubic_warp: tensor/flow shape mismatch");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const size_t plane = static_cast<size_t>(H) * W;
    auto fcopy = std::make_shared<FlowField>(flow);

    std::vector<double> out(x.numel());
    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
            const double sx = xx + flow.u(y, xx);
            const double sy = y + flow.v(y, xx);
            const int ix = static_cast<int>(std::floor(sx));
            const int iy = static_cast<int>(std::floor(sy));
            double wx[4], wy[4];
            bicubic_weights(sx - ix, wx);
            bicubic_weights(sy - iy, wy);
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 4; ++j) {
                    const int yy = clampi(iy - 1 + j, H);
                    double row = 0.0;
                    for (int i = 0; i < 4; ++i)
                        row += wx[i] * x.data()[c * plane + static_cast<size_t>(yy) * W + clampi(ix - 1 + i, W)];
                    acc += wy[j] * row;
                }
                out[c * plane + static_cast<size_t>(y) * W + xx] = acc;
            }
        }

    return make_op(x.shape(), {x}, std::move(out), [C, H, W, plane, fcopy](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                const double sx = xx + fcopy->u(y, xx);
                const double sy = y + fcopy->v(y, xx);
                const int ix = static_cast<int>(std::floor(sx));
                const int iy = static_cast<int>(std::floor(sy));
                double wx[4], wy[4];
                bicubic_weights(sx - ix, wx);
                bicubic_weights(sy - iy, wy);
                for (int c = 0; c < C; ++c) {
                    const double g = nd.grad[c * plane + static_cast<size_t>(y) * W + xx];
                    if (g == 0.0) continue;
                    for (int j = 0; j < 4; ++j) {
                        const int yy = clampi(iy - 1 + j, H);
                        for (int i = 0; i < 4; ++i)
                            p->grad[c * plane + static_cast<size_t>(yy) * W + clampi(ix - 1 + i, W)] +=
                                g * wy[j] * wx[i];
                    }
                }
            }
    });
}

Tensor bicubic_upsample(const Tensor& x, int factor) {
    if (x.shape().size() != 3) throw DimensionError("bicubic_upsample: CHW input expected");
    if (factor < 1) throw ConfigError("bicubic_upsample: factor must be >= 1");
    if (factor == 1) return reshape(x, x.shape());
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int OH = H * factor, OW = W * factor;
    const size_t iplane = static_cast<size_t>(H) * W, oplane = static_cast<size_t>(OH) * OW;
    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };

    std::vector<double> out(static_cast<size_t>(C) * oplane);
    for (int y = 0; y < OH; ++y) {
        const double sy = (y + 0.5) / factor - 0.5;
        const int iy = static_cast<int>(std::floor(sy));
        double wy[4];
        bicubic_weights(sy - iy, wy);
        for (int xx = 0; xx < OW; ++xx) {
            const double sx = (xx + 0.5) / factor - 0.5;
            const int ix = static_cast<int>(std::floor(sx));
            double wx[4];
            bicubic_weights(sx - ix, wx);
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 4; ++j) {
                    const int yy = clampi(iy - 1 + j, H);
                    double row = 0.0;
                    for (int i = 0; i < 4; ++i)
                        row += wx[i] * x.data()[c * iplane + static_cast<size_t>(yy) * W + clampi(ix - 1 + i, W)];
                    acc += wy[j] * row;
                }
                out[c * oplane + static_cast<size_t>(y) * OW + xx] = acc;
            }
        }
    }

    return make_op({C, OH, OW}, {x}, std::move(out), [C, H, W, OH, OW, iplane, oplane, factor](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
        for (int y = 0; y < OH; ++y) {
            const double sy = (y + 0.5) / factor - 0.5;
            const int iy = static_cast<int>(std::floor(sy));
            double wy[4];
            bicubic_weights(sy - iy, wy);
            for (int xx = 0; xx < OW; ++xx) {
                const double sx = (xx + 0.5) / factor - 0.5;
                const int ix = static_cast<int>(std::floor(sx));
                double wx[4];
                bicubic_weights(sx - ix, wx);
                for (int c = 0; c < C; ++c) {
                    const double g = nd.grad[c * oplane + static_cast<size_t>(y) * OW + xx];
                    if (g == 0.0) continue;
                    for (int j = 0; j < 4; ++j) {
                        const int yy = clampi(iy - 1 + j, H);
                        for (int i = 0; i < 4; ++i)
                            p->grad[c * iplane + static_cast<size_t>(yy) * W + clampi(ix - 1 + i, W)] +=
                                g * wy[j] * wx[i];
                    }
                }
            }
        }
    });
}

Tensor area_downsample(const Tensor& x, int factor) {
    if (x.shape().size() != 3) throw DimensionError("area_downsample: CHW input expected");
    if (factor < 1) throw ConfigError("area_downsample: factor must be >= 1");
    if (factor == 1) return reshape(x, x.shape());
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H % factor != 0 || W % factor != 0)
        throw DimensionError("area_downsample: dims must divide by factor");
    const int OH = H / factor, OW = W / factor;
    const size_t iplane = static_cast<size_t>(H) * W, oplane = static_cast<size_t>(OH) * OW;
    const double inv = 1.0 / (factor * factor);

    std::vector<double> out(static_cast<size_t>(C) * oplane);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < OH; ++y)
            for (int xx = 0; xx < OW; ++xx) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += x.data()[c * iplane + static_cast<size_t>(y * factor + dy) * W + xx * factor + dx];
                out[c * oplane + static_cast<size_t>(y) * OW + xx] = acc * inv;
            }

    return make_op({C, OH, OW}, {x}, std::move(out), [C, H, W, OH, OW, iplane, oplane, factor, inv](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < OH; ++y)
                for (int xx = 0; xx < OW; ++xx) {
                    const double g = nd.grad[c * oplane + static_cast<size_t>(y) * OW + xx] * inv;
                    for (int dy = 0; dy < factor; ++dy)
                        for (int dx = 0; dx < factor; ++dx)
                            p->grad[c * iplane + static_cast<size_t>(y * factor + dy) * W + xx * factor + dx] += g;
                }
    });
}

Tensor forward_diff_x(const Tensor& x) {
    if (x.shape().size() != 3) throw DimensionError("forward_diff_x: CHW input expected");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const size_t plane = static_cast<size_t>(H) * W;
    std::vector<double> out(x.numel(), 0.0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx + 1 < W; ++xx) {
                const size_t i = c * plane + static_cast<size_t>(y) * W + xx;
                out[i] = x.data()[i + 1] - x.data()[i];
            }
    return make_op(x.shape(), {x}, std::move(out), [C, H, W, plane](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int xx = 0; xx + 1 < W; ++xx) {
                    const size_t i = c * plane + static_cast<size_t>(y) * W + xx;
                    p->grad[i + 1] += nd.grad[i];
                    p->grad[i] -= nd.grad[i];
                }
    });
}

Tensor forward_diff_y(const Tensor& x) {
    if (x.shape().size() != 3) throw DimensionError("forward_diff_y: CHW input expected");
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const size_t plane = static_cast<size_t>(H) * W;
    std::vector<double> out(x.numel(), 0.0);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y + 1 < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                const size_t i = c * plane + static_cast<size_t>(y) * W + xx;
                out[i] = x.data()[i + W] - x.data()[i];
            }
    return make_op(x.shape(), {x}, std::move(out), [C, H, W, plane](Node& nd) {
        auto& p = nd.parents[0];
        p->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y + 1 < H; ++y)
                for (int xx = 0; xx < W; ++xx) {
                    const size_t i = c * plane + static_cast<size_t>(y) * W + xx;
                    p->grad[i + W] += nd.grad[i];
                    p->grad[i] -= nd.grad[i];
                }
    });
}

}  // namespace tinyvsr::nn
