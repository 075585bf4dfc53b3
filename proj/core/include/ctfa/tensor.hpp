#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace ctfa {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major complex array stored as two real planes of identical shape.
class ComplexTensor {
public:
    ComplexTensor() = default;
    explicit ComplexTensor(Shape shape);
    ComplexTensor(Shape shape, std::vector<double> re, std::vector<double> im);

    static ComplexTensor zeros(Shape shape) { return ComplexTensor(std::move(shape)); }
    static ComplexTensor filled(Shape shape, std::complex<double> value);
    // Uniform in [-scale, scale) for both parts, deterministic per seed.
    static ComplexTensor random_uniform(Shape shape, std::uint64_t seed, double scale = 1.0);
    static ComplexTensor random_normal(Shape shape, std::uint64_t seed, double stddev = 1.0);
    static ComplexTensor from_values(Shape shape, std::initializer_list<std::complex<double>> values);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return re_.size(); }

    std::vector<double>& re() { return re_; }
    std::vector<double>& im() { return im_; }
    const std::vector<double>& re() const { return re_; }
    const std::vector<double>& im() const { return im_; }

    std::complex<double> at(std::size_t flat) const { return {re_[flat], im_[flat]}; }
    void set(std::size_t flat, std::complex<double> v) {
        re_[flat] = v.real();
        im_[flat] = v.imag();
    }
    std::complex<double> at(std::initializer_list<std::size_t> index) const;
    void set(std::initializer_list<std::size_t> index, std::complex<double> v);
    std::size_t offset(std::initializer_list<std::size_t> index) const;

    // Same data, new shape with equal element count.
    ComplexTensor reshaped(Shape shape) const;

    bool all_finite() const;
    void fill_zero();
    // this += alpha * other
    void axpy(double alpha, const ComplexTensor& other);

    bool operator==(const ComplexTensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> re_;
    std::vector<double> im_;
};

// Largest absolute difference over both parts; shapes must match.
double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b);

}  // namespace ctfa
