#include "ctfa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ctfa/errors.hpp"

namespace ctfa {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

ComplexTensor::ComplexTensor(Shape shape)
    : shape_(std::move(shape)), re_(numel(shape_), 0.0), im_(numel(shape_), 0.0) {}

ComplexTensor::ComplexTensor(Shape shape, std::vector<double> re, std::vector<double> im)
    : shape_(std::move(shape)), re_(std::move(re)), im_(std::move(im)) {
    if (re_.size() != numel(shape_) || im_.size() != numel(shape_)) {
        throw ShapeError("ComplexTensor: data size does not match shape " + to_string(shape_));
    }
}

ComplexTensor ComplexTensor::filled(Shape shape, std::complex<double> value) {
    ComplexTensor t(std::move(shape));
    std::fill(t.re_.begin(), t.re_.end(), value.real());
    std::fill(t.im_.begin(), t.im_.end(), value.imag());
    return t;
}

ComplexTensor ComplexTensor::random_uniform(Shape shape, std::uint64_t seed, double scale) {
    ComplexTensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t.re_[i] = dist(rng);
        t.im_[i] = dist(rng);
    }
    return t;
}

ComplexTensor ComplexTensor::random_normal(Shape shape, std::uint64_t seed, double stddev) {
    ComplexTensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t.re_[i] = dist(rng);
        t.im_[i] = dist(rng);
    }
    return t;
}

ComplexTensor ComplexTensor::from_values(Shape shape, std::initializer_list<std::complex<double>> values) {
    ComplexTensor t(std::move(shape));
    if (values.size() != t.size()) throw ShapeError("from_values: value count does not match shape");
    std::size_t i = 0;
    for (const auto& v : values) t.set(i++, v);
    return t;
}

std::size_t ComplexTensor::offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) throw ShapeError("index rank mismatch for shape " + to_string(shape_));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= shape_[axis]) throw ShapeError("index out of range for shape " + to_string(shape_));
        flat = flat * shape_[axis] + i;
        ++axis;
    }
    return flat;
}

std::complex<double> ComplexTensor::at(std::initializer_list<std::size_t> index) const {
    return at(offset(index));
}

void ComplexTensor::set(std::initializer_list<std::size_t> index, std::complex<double> v) {
    set(offset(index), v);
}

ComplexTensor ComplexTensor::reshaped(Shape shape) const {
    if (numel(shape) != size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return ComplexTensor(std::move(shape), re_, im_);
}

bool ComplexTensor::all_finite() const {
    auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(re_.begin(), re_.end(), finite) && std::all_of(im_.begin(), im_.end(), finite);
}

void ComplexTensor::fill_zero() {
    std::fill(re_.begin(), re_.end(), 0.0);
    std::fill(im_.begin(), im_.end(), 0.0);
}

void ComplexTensor::axpy(double alpha, const ComplexTensor& other) {
    if (other.shape_ != shape_) {
        throw ShapeError("axpy: shape " + to_string(other.shape_) + " vs " + to_string(shape_));
    }
    for (std::size_t i = 0; i < re_.size(); ++i) {
        re_[i] += alpha * other.re_[i];
        im_[i] += alpha * other.im_[i];
    }
}

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("max_abs_diff: shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a.re()[i] - b.re()[i]));
        m = std::max(m, std::abs(a.im()[i] - b.im()[i]));
    }
    return m;
}

}  // namespace ctfa
