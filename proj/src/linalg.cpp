#include "bcl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bcl/errors.hpp"

namespace bcl {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kOffDiagTol = 1e-12;
constexpr int kMaxSweeps = 100;

void require_same_dim(const Mat& a, const Mat& b)
{
    if (a.dim() != b.dim()) {
        throw DimensionError("matrix dimensions differ");
    }
}

void require_symmetric_finite(const Mat& m)
{
    if (!m.finite()) {
        throw NonFiniteError("matrix has non-finite entries");
    }
    if (m.max_asymmetry() > kSymmetryTol) {
        throw NonSymmetricError("matrix is not symmetric within 1e-10");
    }
}

} // namespace

double dot(const Vec& a, const Vec& b)
{
    if (a.size() != b.size()) {
        throw DimensionError("vector sizes differ");
    }
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(const Vec& a)
{
    return std::sqrt(dot(a, a));
}

bool all_finite(const Vec& a)
{
    return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

Mat::Mat(std::size_t n, std::initializer_list<double> entries) : n_(n), a_(entries)
{
    if (a_.size() != n * n) {
        throw DimensionError("entry count does not match dimension");
    }
}

Mat Mat::identity(std::size_t n)
{
    Mat m(n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Mat Mat::diagonal(const Vec& d)
{
    Mat m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        m(i, i) = d[i];
    }
    return m;
}

Mat Mat::transpose() const
{
    Mat m(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            m(j, i) = (*this)(i, j);
        }
    }
    return m;
}

Mat Mat::operator+(const Mat& other) const
{
    require_same_dim(*this, other);
    Mat m(n_);
    for (std::size_t i = 0; i < a_.size(); ++i) {
        m.a_[i] = a_[i] + other.a_[i];
    }
    return m;
}

Mat Mat::operator-(const Mat& other) const
{
    require_same_dim(*this, other);
    Mat m(n_);
    for (std::size_t i = 0; i < a_.size(); ++i) {
        m.a_[i] = a_[i] - other.a_[i];
    }
    return m;
}

Mat Mat::operator*(const Mat& other) const
{
    require_same_dim(*this, other);
    Mat m(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t k = 0; k < n_; ++k) {
            const double aik = (*this)(i, k);
            if (aik == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < n_; ++j) {
                m(i, j) += aik * other(k, j);
            }
        }
    }
    return m;
}

Mat Mat::scaled(double c) const
{
    Mat m(n_);
    for (std::size_t i = 0; i < a_.size(); ++i) {
        m.a_[i] = c * a_[i];
    }
    return m;
}

Vec Mat::apply(const Vec& v) const
{
    if (v.size() != n_) {
        throw DimensionError("vector size does not match matrix dimension");
    }
    Vec out(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            acc += (*this)(i, j) * v[j];
        }
        out[i] = acc;
    }
    return out;
}

double Mat::max_abs() const
{
    double m = 0.0;
    for (double x : a_) {
        m = std::max(m, std::fabs(x));
    }
    return m;
}

double Mat::max_asymmetry() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) {
            m = std::max(m, std::fabs((*this)(i, j) - (*this)(j, i)));
        }
    }
    return m;
}

bool Mat::finite() const
{
    return std::all_of(a_.begin(), a_.end(), [](double x) { return std::isfinite(x); });
}

double Mat::trace() const
{
    double t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        t += (*this)(i, i);
    }
    return t;
}

SymmetricEigen symmetric_eigen(const Mat& m)
{
    require_symmetric_finite(m);
    const std::size_t n = m.dim();

    Mat a = m;
    // Work on the symmetrized copy so rotations stay exact.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = avg;
            a(j, i) = avg;
        }
    }
    Mat q = Mat::identity(n);

    auto off_norm = [&a, n]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) {
                    s += a(i, j) * a(i, j);
                }
            }
        }
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < kMaxSweeps && off_norm() >= kOffDiagTol; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                const double apr = a(p, r);
                if (std::fabs(apr) < 1e-300) {
                    continue;
                }
                const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
                const double t = (theta >= 0.0 ? 1.0 : -1.0)
                    / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akr = a(k, r);
                    a(k, p) = c * akp - s * akr;
                    a(k, r) = s * akp + c * akr;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double ark = a(r, k);
                    a(p, k) = c * apk - s * ark;
                    a(r, k) = s * apk + c * ark;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double qkp = q(k, p);
                    const double qkr = q(k, r);
                    q(k, p) = c * qkp - s * qkr;
                    q(k, r) = s * qkp + c * qkr;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&a](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Mat(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) {
            out.vectors(i, j) = q(i, order[j]);
        }
    }
    return out;
}

Vec symmetric_eigenvalues(const Mat& m)
{
    return symmetric_eigen(m).values;
}

bool is_negative_semidefinite(const Mat& m, double tol)
{
    const Vec ev = symmetric_eigenvalues(m);
    return ev.back() <= tol;
}

double quadratic_form(const Mat& m, const Vec& v)
{
    if (v.size() != m.dim()) {
        throw DimensionError("vector size does not match matrix dimension");
    }
    return dot(v, m.apply(v));
}

Mat invert_spd(const Mat& m)
{
    const SymmetricEigen eig = symmetric_eigen(m);
    const std::size_t n = m.dim();
    if (eig.values.front() <= 0.0) {
        throw NotPositiveDefiniteError("matrix is not positive definite");
    }
    Mat inv(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                acc += eig.vectors(i, k) * eig.vectors(j, k) / eig.values[k];
            }
            inv(i, j) = acc;
        }
    }
    return inv;
}

Mat build_a0(const Vec& gains)
{
    if (gains.empty()) {
        throw DimensionError("at least one gain required");
    }
    for (double k : gains) {
        if (!(k > 0.0) || !std::isfinite(k)) {
            throw DomainError("gains must be positive");
        }
    }
    Mat m(gains.size());
    for (std::size_t i = 0; i < gains.size(); ++i) {
        m(i, i) = -gains[i];
    }
    return m;
}

Mat build_ag(const Vec& g_values)
{
    if (!all_finite(g_values)) {
        throw NonFiniteError("coupling values must be finite");
    }
    const std::size_t n = g_values.size() + 1;
    Mat m(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        m(i, i + 1) = g_values[i];
        m(i + 1, i) = -g_values[i];
    }
    return m;
}

Mat build_dmu(std::size_t n, double mu, double alpha)
{
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw DomainError("mu must be positive");
    }
    Mat m = Mat::identity(n);
    m(0, 0) = std::pow(mu, alpha);
    return m;
}

} // namespace bcl
