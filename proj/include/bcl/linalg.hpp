#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace bcl {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b);
double norm(const Vec& a);
bool all_finite(const Vec& a);

// Dense square matrix, row-major. Sized for the small systems treated here
// (n <= ~8); no sparse path.
class Mat {
public:
    Mat() = default;
    explicit Mat(std::size_t n) : n_(n), a_(n * n, 0.0) {}
    Mat(std::size_t n, std::initializer_list<double> entries);

    static Mat identity(std::size_t n);
    static Mat diagonal(const Vec& d);

    std::size_t dim() const { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

    Mat transpose() const;
    Mat operator+(const Mat& other) const;
    Mat operator-(const Mat& other) const;
    Mat operator*(const Mat& other) const;
    Mat scaled(double c) const;
    Vec apply(const Vec& v) const;

    double max_abs() const;
    double max_asymmetry() const;
    bool finite() const;
    double trace() const;

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

struct SymmetricEigen {
    Vec values;  // ascending
    Mat vectors; // column j is the eigenvector for values[j]
};

// Cyclic Jacobi for symmetric matrices. Converges when the off-diagonal
// Frobenius norm falls below 1e-12 (at most 100 sweeps).
SymmetricEigen symmetric_eigen(const Mat& m);
Vec symmetric_eigenvalues(const Mat& m);

bool is_negative_semidefinite(const Mat& m, double tol = 1e-9);

double quadratic_form(const Mat& m, const Vec& v);

// Inverse of a symmetric positive definite matrix via its eigensystem.
Mat invert_spd(const Mat& m);

// diag(-k_1, ..., -k_n), all k_i > 0.
Mat build_a0(const Vec& gains);

// Skew-symmetric chain coupling: +g_i on the superdiagonal, -g_i below.
// g_values has n-1 entries for an n x n result (empty for n = 1).
Mat build_ag(const Vec& g_values);

// diag(mu^alpha, 1, ..., 1).
Mat build_dmu(std::size_t n, double mu, double alpha);

} // namespace bcl
