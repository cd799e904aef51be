#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "covidcare/error.hpp"

namespace covidcare {

// Dense row-major tensor. The model only ever needs rank 1 or 2; rank-1
// tensors behave as column vectors (n x 1).
template <class T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> v;

    TensorT() = default;

    TensorT(std::size_t r, std::size_t c, T fill = T{})
        : shape{r, c}, v(r * c, fill) {
        if (r == 0 || c == 0) throw Error("tensor: zero dimension");
    }

    static TensorT from_shape(std::vector<std::size_t> s, T fill = T{}) {
        TensorT t;
        if (s.empty()) throw Error("tensor: empty shape");
        std::size_t n = 1;
        for (std::size_t d : s) {
            if (d == 0) throw Error("tensor: zero dimension");
            n *= d;
        }
        t.shape = std::move(s);
        t.v.assign(n, fill);
        return t;
    }

    static TensorT scalar(T x) {
        TensorT t(1, 1);
        t.v[0] = x;
        return t;
    }

    std::size_t size() const { return v.size(); }

    std::size_t rows() const {
        if (shape.size() == 1) return shape[0];
        if (shape.size() == 2) return shape[0];
        throw Error("tensor: rank > 2 has no rows/cols view");
    }

    std::size_t cols() const {
        if (shape.size() == 1) return 1;
        if (shape.size() == 2) return shape[1];
        throw Error("tensor: rank > 2 has no rows/cols view");
    }

    T& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    T at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

    bool same_shape(const TensorT& o) const {
        return rows() == o.rows() && cols() == o.cols();
    }

    bool all_finite() const {
        for (T x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

using Tensor = TensorT<double>;

template <class U, class T>
TensorT<U> tensor_cast(const TensorT<T>& t) {
    TensorT<U> out;
    out.shape = t.shape;
    out.v.reserve(t.v.size());
    for (T x : t.v) out.v.push_back(static_cast<U>(x));
    return out;
}

}  // namespace covidcare
