#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace holo {

/// Dense row-major tensor of doubles. Shapes are small (<= 6 dims), data is
/// owned. This is the substrate for feature maps, images, kernels and model
/// parameters; wave fields use ComplexField instead.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), 0.0) {}
    Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(count(shape), fill) {}
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != static_cast<size_t>(count(shape)))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static long count(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
            n *= d;
        }
        return n;
    }

    long size() const { return static_cast<long>(data.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    double& operator[](long i) { return data[static_cast<size_t>(i)]; }
    double operator[](long i) const { return data[static_cast<size_t>(i)]; }

    // (c, x, y) with x = row, y = column
    double& at(int c, int x, int y) {
        return data[(static_cast<size_t>(c) * shape[1] + x) * shape[2] + y];
    }
    double at(int c, int x, int y) const {
        return data[(static_cast<size_t>(c) * shape[1] + x) * shape[2] + y];
    }
    double& at(int a, int b, int c, int d) {
        return data[((static_cast<size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    double at(int a, int b, int c, int d) const {
        return data[((static_cast<size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i)
            s += (i ? "," : "") + std::to_string(shape[i]);
        return s + ")";
    }
};

/// 3-channel image or feature stack; alias kept for readability at call sites.
using Image = Tensor;

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

}  // namespace holo
