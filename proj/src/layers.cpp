// Copyright (c) 2026 tinyvsr contributors
// SPDX-License-Identifier: Apache-2.0
#include "tinyvsr/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

namespace tinyvsr::nn {

Tensor ParamStore::add(const std::string& name, Shape shape, bool trainable) {
    if (index_.count(name)) throw ConfigError(str_cat("duplicate parameter name: ", name));
    Tensor t = Tensor::leaf(std::move(shape), trainable, name);
    index_[name] = items_.size();
    items_.emplace_back(name, t);
    return t;
}

Tensor ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError(str_cat("unknown parameter: ", name));
    return items_[it->second].second;
}

bool ParamStore::contains(const std::string& name) const { return index_.count(name) != 0; }

std::vector<Tensor> ParamStore::trainable() const {
    std::vector<Tensor> out;
    for (const auto& [name, t] : items_)
        if (t.requires_grad()) out.push_back(t);
    return out;
}

size_t ParamStore::param_count() const {
    size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [name, t] : items_)
        if (t.requires_grad()) const_cast<Tensor&>(t).zero_grad();
}

namespace {
constexpr char kArchiveMagic[8] = {'T', 'V', 'S', 'R', 'W', 'T', '0', '1'};
}

void save_tensor_archive(const std::filesystem::path& path,
                         const std::vector<std::pair<std::string, std::vector<double>>>& tensors) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(str_cat("cannot open for write: ", path.string()));
    out.write(kArchiveMagic, 8);
    const std::uint32_t count = static_cast<std::uint32_t>(tensors.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (const auto& [name, data] : tensors) {
        const std::uint32_t nlen = static_cast<std::uint32_t>(name.size());
        const std::uint64_t dlen = data.size();
        out.write(reinterpret_cast<const char*>(&nlen), 4);
        out.write(name.data(), nlen);
        out.write(reinterpret_cast<const char*>(&dlen), 8);
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(dlen * 8));
    }
    if (!out) throw IoError(str_cat("short write: ", path.string()));
}

std::vector<std::pair<std::string, std::vector<double>>> load_tensor_archive(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(str_cat("cannot open: ", path.string()));
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kArchiveMagic, 8) != 0)
        throw IoError(str_cat("bad weight archive magic in ", path.string()));
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    std::vector<std::pair<std::string, std::vector<double>>> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t nlen = 0;
        in.read(reinterpret_cast<char*>(&nlen), 4);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        std::uint64_t dlen = 0;
        in.read(reinterpret_cast<char*>(&dlen), 8);
        std::vector<double> data(dlen);
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(dlen * 8));
        if (!in) throw IoError(str_cat("truncated archive at entry ", i, " in ", path.string()));
        out.emplace_back(std::move(name), std::move(data));
    }
    return out;
}

void ParamStore::save(const std::filesystem::path& path) const {
    std::vector<std::pair<std::string, std::vector<double>>> tensors;
    tensors.reserve(items_.size());
    for (const auto& [name, t] : items_) tensors.emplace_back(name, t.data());
    save_tensor_archive(path, tensors);
}

void ParamStore::load(const std::filesystem::path& path) {
    for (auto& [name, data] : load_tensor_archive(path)) {
        auto it = index_.find(name);
        if (it == index_.end()) throw IoError(str_cat("archive parameter not in model: ", name));
        Tensor& t = items_[it->second].second;
        if (t.numel() != data.size())
            throw IoError(str_cat("parameter ", name, " size mismatch: model ", t.numel(), " vs archive ",
                                  data.size()));
        t.data() = std::move(data);
    }
}

void init_he_normal(Tensor& t, int fan_in, Rng& rng, double gain) {
    const double std = gain * std::sqrt(2.0 / std::max(1, fan_in));
    for (double& v : t.data()) v = rng.normal(0.0, std);
}

void init_uniform(Tensor& t, double lo, double hi, Rng& rng) {
    for (double& v : t.data()) v = rng.uniform(lo, hi);
}

void fill(Tensor& t, double v) { std::fill(t.data().begin(), t.data().end(), v); }

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int kernel,
               int stride_, Rng& rng, bool trainable, PadMode pm) {
    w = ps.add(name + ".w", {out_ch, in_ch, kernel, kernel}, trainable);
    b = ps.add(name + ".b", {out_ch}, trainable);
    init_he_normal(w, in_ch * kernel * kernel, rng);
    stride = stride_;
    pad = kernel / 2;
    pad_mode = pm;
}

Linear::Linear(ParamStore& ps, const std::string& name, int in_dim, int out_dim, Rng& rng,
               bool trainable) {
    w = ps.add(name + ".w", {out_dim, in_dim}, trainable);
    b = ps.add(name + ".b", {out_dim}, trainable);
    init_he_normal(w, in_dim, rng);
}

namespace {

// [n] -> [rows, n] by repetition; gradient sums over rows.
Tensor tile_rows(const Tensor& b, int rows) {
    const int n = b.dim(0);
    std::vector<double> v(static_cast<size_t>(rows) * n);
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < n; ++j) v[static_cast<size_t>(r) * n + j] = b.data()[j];
    auto node = std::make_shared<Node>();
    node->shape = {rows, n};
    node->value = std::move(v);
    if (grad_enabled() && b.requires_grad()) {
        node->requires_grad = true;
        node->parents = {b.node()};
        node->backward_fn = [rows, n](Node& nd) {
            auto& p = nd.parents[0];
            p->ensure_grad();
            for (int r = 0; r < rows; ++r)
                for (int j = 0; j < n; ++j) p->grad[j] += nd.grad[static_cast<size_t>(r) * n + j];
        };
    }
    return Tensor(std::move(node));
}

}  // namespace

Tensor Linear::forward(const Tensor& x) const {
    Tensor out = matmul(x, transpose2d(w));  // [m, out]
    return add(out, tile_rows(b, out.dim(0)));
}

GroupNormLayer::GroupNormLayer(ParamStore& ps, const std::string& name, int channels, Rng& rng,
                               bool trainable) {
    (void)rng;
    gamma = ps.add(name + ".gamma", {channels}, trainable);
    beta = ps.add(name + ".beta", {channels}, trainable);
    fill(gamma, 1.0);
    groups = std::gcd(channels, 8);
}

LoraConv2d::LoraConv2d(ParamStore& ps, const std::string& name, int in_ch, int out_ch, int kernel,
                       int stride, int rank_, double scale_, Rng& rng) {
    base = Conv2d(ps, name, in_ch, out_ch, kernel, stride, rng, /*trainable=*/false);
    const int fan_in = in_ch * kernel * kernel;
    if (rank_ < 1 || rank_ >= std::min(fan_in, out_ch))
        throw ConfigError(str_cat("lora rank ", rank_, " out of range for ", out_ch, "x", fan_in));
    rank = rank_;
    scale = scale_;
    lora_a = ps.add(name + ".lora_a", {rank, fan_in}, true);
    lora_b = ps.add(name + ".lora_b", {out_ch, rank}, true);
    init_he_normal(lora_a, fan_in, rng, 0.1);
    // lora_b stays zero: fresh adapters are exact no-ops
}

LoraConv2d::LoraConv2d(ParamStore& ps, const std::string& name, const Conv2d& frozen, int rank_,
                       double scale_, Rng& rng) {
    base = frozen;
    const int out_ch = frozen.w.dim(0);
    const int fan_in = frozen.w.dim(1) * frozen.w.dim(2) * frozen.w.dim(3);
    if (rank_ < 1 || rank_ >= std::min(fan_in, out_ch))
        throw ConfigError(str_cat("lora rank ", rank_, " out of range for ", out_ch, "x", fan_in));
    rank = rank_;
    scale = scale_;
    lora_a = ps.add(name + ".lora_a", {rank, fan_in}, true);
    lora_b = ps.add(name + ".lora_b", {out_ch, rank}, true);
    init_he_normal(lora_a, fan_in, rng, 0.1);
}

Tensor LoraConv2d::effective_weight() const {
    Tensor delta = matmul(lora_b, lora_a);  // [out, fan_in]
    return add(base.w, reshape(affine(delta, scale, 0.0), base.w.shape()));
}

Tensor LoraConv2d::forward(const Tensor& x) const {
    return conv2d(x, effective_weight(), base.b, base.stride, base.pad, base.pad_mode);
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].numel(), 0.0);
        v_[i].assign(params_[i].numel(), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        if (p.grad().size() != p.numel()) continue;  // never touched by backward
        auto& data = p.data();
        auto& grad = p.grad();
        for (size_t j = 0; j < data.size(); ++j) {
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * grad[j];
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * grad[j] * grad[j];
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            data[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void Adam::save(const std::filesystem::path& path) const {
    std::vector<std::pair<std::string, std::vector<double>>> tensors;
    tensors.emplace_back("adam.t", std::vector<double>{static_cast<double>(t_)});
    for (size_t i = 0; i < params_.size(); ++i) {
        tensors.emplace_back("adam.m." + params_[i].name(), m_[i]);
        tensors.emplace_back("adam.v." + params_[i].name(), v_[i]);
    }
    save_tensor_archive(path, tensors);
}

void Adam::load(const std::filesystem::path& path) {
    auto tensors = load_tensor_archive(path);
    std::map<std::string, std::vector<double>*> lookup;
    for (auto& [name, data] : tensors) lookup[name] = &data;
    auto take = [&](const std::string& name) -> std::vector<double> {
        auto it = lookup.find(name);
        if (it == lookup.end()) throw IoError(str_cat("optimizer archive missing ", name));
        return std::move(*it->second);
    };
    t_ = static_cast<long>(take("adam.t")[0]);
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i] = take("adam.m." + params_[i].name());
        v_[i] = take("adam.v." + params_[i].name());
        if (m_[i].size() != params_[i].numel() || v_[i].size() != params_[i].numel())
            throw IoError(str_cat("optimizer moment size mismatch for ", params_[i].name()));
    }
}

double grad_rel_err(double analytic, double fd) {
    const double denom = std::max(std::abs(analytic), std::abs(fd));
    if (denom < 1e-7) return std::abs(analytic - fd) < 1e-8 ? 0.0 : 1.0;
    return std::abs(analytic - fd) / denom;
}

}  // namespace tinyvsr::nn
