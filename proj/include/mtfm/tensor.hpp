// tensor.hpp — dense row-major real tensor, templated on element precision.
//
// Only rank-1 and rank-2 tensors appear in practice. Allocation volume is
// tracked through MemStats so benchmarks can report peak live bytes.
#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mtfm/errors.hpp"

namespace mtfm {

// Process-wide live/peak byte counters for tensor payloads.
struct MemStats {
    static std::atomic<long long>& live() {
        static std::atomic<long long> v{0};
        return v;
    }
    static std::atomic<long long>& peak() {
        static std::atomic<long long> v{0};
        return v;
    }
    static void on_alloc(long long bytes) {
        long long now = live().fetch_add(bytes, std::memory_order_relaxed) + bytes;
        long long prev = peak().load(std::memory_order_relaxed);
        while (now > prev && !peak().compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
        }
    }
    static void on_free(long long bytes) { live().fetch_sub(bytes, std::memory_order_relaxed); }
    static void reset_peak() { peak().store(live().load()); }
};

template <typename Real>
class Tensor {
  public:
    Tensor() = default;

    Tensor(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, Real(0)) {
        MemStats::on_alloc(bytes());
    }

    explicit Tensor(size_t n) : Tensor(1, n) {}

    ~Tensor() { MemStats::on_free(bytes()); }

    Tensor(const Tensor& other) : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
        MemStats::on_alloc(bytes());
    }

    Tensor(Tensor&& other) noexcept
        : rows_(other.rows_), cols_(other.cols_), data_(std::move(other.data_)) {
        other.rows_ = other.cols_ = 0;
        other.data_.clear();
    }

    Tensor& operator=(const Tensor& other) {
        if (this == &other) return *this;
        MemStats::on_free(bytes());
        rows_ = other.rows_;
        cols_ = other.cols_;
        data_ = other.data_;
        MemStats::on_alloc(bytes());
        return *this;
    }

    Tensor& operator=(Tensor&& other) noexcept {
        if (this == &other) return *this;
        MemStats::on_free(bytes());
        rows_ = other.rows_;
        cols_ = other.cols_;
        data_ = std::move(other.data_);
        other.rows_ = other.cols_ = 0;
        other.data_.clear();
        return *this;
    }

    static Tensor zeros(size_t rows, size_t cols) { return Tensor(rows, cols); }

    static Tensor full(size_t rows, size_t cols, Real v) {
        Tensor t(rows, cols);
        for (auto& x : t.data_) x = v;
        return t;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    long long bytes() const { return static_cast<long long>(data_.capacity() * sizeof(Real)); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }

    Real& at(size_t r, size_t c) { return data_[r * cols_ + c]; }
    Real at(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    Real& operator[](size_t i) { return data_[i]; }
    Real operator[](size_t i) const { return data_[i]; }

    const Real* row(size_t r) const { return data_.data() + r * cols_; }
    Real* row(size_t r) { return data_.data() + r * cols_; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(Real v) {
        for (auto& x : data_) x = v;
    }

    void add_inplace(const Tensor& o) {
        require_same_shape(o, "add_inplace");
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    }

    void scale_inplace(Real c) {
        for (auto& x : data_) x *= c;
    }

    bool all_finite() const {
        for (Real x : data_)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    double max_abs_diff(const Tensor& o) const {
        require_same_shape(o, "max_abs_diff");
        double m = 0.0;
        for (size_t i = 0; i < data_.size(); ++i) {
            double d = std::fabs(static_cast<double>(data_[i]) - static_cast<double>(o.data_[i]));
            if (d > m) m = d;
        }
        return m;
    }

    bool operator==(const Tensor& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

    void require_same_shape(const Tensor& o, const char* where) const {
        if (!same_shape(o))
            throw dimension_error(std::string(where) + ": shape (" + std::to_string(rows_) + "," +
                                  std::to_string(cols_) + ") vs (" + std::to_string(o.rows_) + "," +
                                  std::to_string(o.cols_) + ")");
    }

  private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<Real> data_;
};

using Tensor32 = Tensor<float>;
using Tensor64 = Tensor<double>;

}  // namespace mtfm
