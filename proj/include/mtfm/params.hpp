// params.hpp — named parameter registry, gradients, and the Adam optimizer.
#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtfm/errors.hpp"
#include "mtfm/tensor.hpp"

namespace mtfm {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 1.0;  // global-norm gradient clip; 0 disables
};

template <typename Real>
class ParamStore {
  public:
    struct Entry {
        std::string name;
        Tensor<Real> value;
        Tensor<Real> grad;
        Tensor<Real> m;  // first moment
        Tensor<Real> v;  // second moment
    };

    size_t add(const std::string& name, Tensor<Real> init) {
        if (by_name_.count(name)) throw config_error("duplicate parameter name: " + name);
        Entry e;
        e.name = name;
        e.grad = Tensor<Real>(init.rows(), init.cols());
        e.m = Tensor<Real>(init.rows(), init.cols());
        e.v = Tensor<Real>(init.rows(), init.cols());
        e.value = std::move(init);
        entries_.push_back(std::move(e));
        by_name_[name] = entries_.size() - 1;
        return entries_.size() - 1;
    }

    bool has(const std::string& name) const { return by_name_.count(name) > 0; }

    size_t index_of(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw config_error("unknown parameter: " + name);
        return it->second;
    }

    Entry& at(const std::string& name) { return entries_[index_of(name)]; }
    const Entry& at(const std::string& name) const { return entries_[index_of(name)]; }
    Entry& at(size_t i) { return entries_[i]; }
    const Entry& at(size_t i) const { return entries_[i]; }

    size_t size() const { return entries_.size(); }

    size_t scalar_count() const {
        size_t n = 0;
        for (const auto& e : entries_) n += e.value.size();
        return n;
    }

    void zero_grads() {
        for (auto& e : entries_) e.grad.fill(Real(0));
    }

    // Fresh zero buffers shaped like the parameters, one per worker thread.
    std::vector<Tensor<Real>> make_grad_buffers() const {
        std::vector<Tensor<Real>> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.emplace_back(e.value.rows(), e.value.cols());
        return out;
    }

    void accumulate_grads(const std::vector<Tensor<Real>>& buffers) {
        if (buffers.size() != entries_.size())
            throw dimension_error("accumulate_grads: buffer count mismatch");
        for (size_t i = 0; i < entries_.size(); ++i) entries_[i].grad.add_inplace(buffers[i]);
    }

    // Standard Adam with bias correction. Aborts (naming the parameter) on a
    // non-finite gradient; applies global-norm clipping first when enabled.
    void adam_step(const AdamConfig& cfg) {
        for (const auto& e : entries_) {
            if (!e.grad.all_finite())
                throw contract_error("adam_step: non-finite gradient in parameter '" + e.name + "'");
        }
        double scale = 1.0;
        if (cfg.clip_norm > 0.0) {
            double sq = 0.0;
            for (const auto& e : entries_)
                for (size_t i = 0; i < e.grad.size(); ++i) {
                    double g = static_cast<double>(e.grad[i]);
                    sq += g * g;
                }
            double norm = std::sqrt(sq);
            if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
        for (auto& e : entries_) {
            for (size_t i = 0; i < e.value.size(); ++i) {
                const double g = static_cast<double>(e.grad[i]) * scale;
                const double m = cfg.beta1 * static_cast<double>(e.m[i]) + (1.0 - cfg.beta1) * g;
                const double v = cfg.beta2 * static_cast<double>(e.v[i]) + (1.0 - cfg.beta2) * g * g;
                e.m[i] = static_cast<Real>(m);
                e.v[i] = static_cast<Real>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                e.value[i] = static_cast<Real>(static_cast<double>(e.value[i]) -
                                               cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
            }
        }
    }

    int64_t step_count() const { return t_; }

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

  private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, size_t> by_name_;
    int64_t t_ = 0;
};

}  // namespace mtfm
