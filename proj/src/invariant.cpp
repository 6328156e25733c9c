#include "bcl/invariant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "bcl/errors.hpp"
#include "bcl/perf.hpp"

namespace bcl {

namespace {

constexpr double kWitnessAlpha = 0.5;
constexpr double kWitnessEps = 0.1;

void require_spd(const Mat& m, const char* what)
{
    if (m.max_asymmetry() > 1e-10) {
        throw NonSymmetricError(std::string(what) + " must be symmetric");
    }
    if (symmetric_eigenvalues(m).front() <= 0.0) {
        throw NotPositiveDefiniteError(std::string(what) + " must be positive definite");
    }
}

double max_eig(const Mat& m)
{
    return symmetric_eigenvalues(m).back();
}

// Damping inequality in the direct form.
double slack_a_direct(const Mat& a0, const Mat& X, const Mat& W, double alpha,
                      double eps_lmi, double kappa)
{
    const Mat m = a0 * X + X * a0.transpose() + X.scaled(eps_lmi + alpha + 2.0 * kappa)
        + W.scaled(alpha);
    return max_eig(m);
}

// Damping inequality via the stacked Schur-complement matrix.
double slack_a_hform(const Mat& a0, const Mat& P, const Mat& W, double alpha,
                     double eps_lmi, double kappa)
{
    const std::size_t n = P.dim();
    const Mat top = P * a0 + a0.transpose() * P + P.scaled(eps_lmi + alpha + 2.0 * kappa);
    Mat h(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            h(i, j) = top(i, j);
            h(i, n + j) = P(i, j);
            h(n + i, j) = P(i, j);
            h(n + i, n + j) = -alpha * W(i, j);
        }
    }
    return max_eig(h);
}

double slack_b_worst(const std::vector<Mat>& ag_samples, const Mat& X, double eps_lmi)
{
    double worst = -1e300;
    for (const Mat& ag : ag_samples) {
        const Mat m = ag * X + X * ag.transpose() - X.scaled(eps_lmi);
        worst = std::max(worst, max_eig(m));
    }
    return ag_samples.empty() ? max_eig(X.scaled(-eps_lmi)) : worst;
}

std::vector<Mat> corner_ag_samples(const std::vector<std::pair<double, double>>& g_bounds,
                                   std::size_t n)
{
    if (n == 1) {
        return {build_ag({})};
    }
    const std::size_t m = n - 1;
    if (g_bounds.size() < m) {
        throw DimensionError("need coupling bounds for every off-diagonal stage");
    }
    std::vector<Mat> out;
    out.reserve(std::size_t{1} << m);
    for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
        Vec g(m);
        for (std::size_t i = 0; i < m; ++i) {
            g[i] = (mask >> i & 1) ? g_bounds[i].second : g_bounds[i].first;
        }
        out.push_back(build_ag(g));
    }
    return out;
}

struct GridPoint {
    double v_h = 0.0;
    double alpha = 0.0;
    double eps = 0.0;
};

struct PointSlacks {
    double eq5 = 0.0;
    double h = 0.0;
    double b = 0.0;
    double worst() const { return std::max({eq5, h, b}); }
};

PointSlacks eval_point(const Mat& a0, const std::vector<Mat>& ag_samples, const Mat& W,
                       const GridPoint& p, double kappa)
{
    const std::size_t n = a0.dim();
    const Mat X = Mat::identity(n).scaled(p.v_h);
    const Mat P = Mat::identity(n).scaled(1.0 / p.v_h);
    PointSlacks s;
    s.eq5 = slack_a_direct(a0, X, W, p.alpha, p.eps, kappa);
    s.h = slack_a_hform(a0, P, W, p.alpha, p.eps, kappa);
    s.b = slack_b_worst(ag_samples, X, p.eps);
    return s;
}

} // namespace

const char* to_string(LmiForm form)
{
    return form == LmiForm::eq5 ? "eq5" : "h-matrix";
}

LmiForm lmi_form_from_string(const std::string& s)
{
    if (s == "eq5") {
        return LmiForm::eq5;
    }
    if (s == "h-matrix") {
        return LmiForm::h_matrix;
    }
    throw ConfigError("unknown inequality form: " + s);
}

LmiCheck check_lmi_prop1(const Mat& a0, const std::vector<Mat>& ag_samples, const Mat& X,
                         const Mat& W, double alpha, double eps_lmi, double kappa,
                         double tol, LmiForm form)
{
    require_spd(X, "X");
    require_spd(W, "W");
    if (!(alpha > 0.0) || !(eps_lmi > 0.0)) {
        throw DomainError("alpha and eps must be positive");
    }
    LmiCheck out;
    if (form == LmiForm::eq5) {
        out.slack_a = slack_a_direct(a0, X, W, alpha, eps_lmi, kappa);
    } else {
        out.slack_a = slack_a_hform(a0, invert_spd(X), W, alpha, eps_lmi, kappa);
    }
    out.slack_b = slack_b_worst(ag_samples, X, eps_lmi);
    out.feasible = out.slack_a <= tol && out.slack_b <= tol;
    return out;
}

Lmi2Check check_lmi_prop2(const Mat& a0, const std::vector<Mat>& ag_samples, double x1,
                          const Mat& x2n, const Mat& W, double alpha, double eps_lmi,
                          double kappa, std::pair<double, double> mu_range, double nu,
                          double tol, LmiForm form)
{
    const std::size_t n = a0.dim();
    if (x2n.dim() != n - 1) {
        throw DimensionError("lower block must have dimension n-1");
    }
    if (!(x1 > 0.0)) {
        throw NotPositiveDefiniteError("X1 must be positive");
    }
    if (!(mu_range.first > 0.0) || !(mu_range.second >= mu_range.first)) {
        throw DomainError("mu range must be positive and ordered");
    }
    if (!(nu > -1.0)) {
        throw DomainError("nu must exceed -1");
    }

    Mat X(n);
    X(0, 0) = x1;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = 0; j + 1 < n; ++j) {
            X(i + 1, j + 1) = x2n(i, j);
        }
    }

    // The first coupling is scaled by mu in the closed loop; the inequality is
    // affine in the coupling matrix, so the range endpoints suffice.
    std::vector<Mat> scaled;
    scaled.reserve(2 * ag_samples.size());
    for (const Mat& ag : ag_samples) {
        for (double mu : {mu_range.first, mu_range.second}) {
            Mat m = ag;
            if (n >= 2) {
                m(0, 1) *= mu;
                m(1, 0) *= mu;
            }
            scaled.push_back(m);
        }
    }

    const LmiCheck base = check_lmi_prop1(a0, scaled, X, W, alpha, eps_lmi, kappa, tol, form);
    Lmi2Check out;
    out.feasible = base.feasible;
    out.slack_a = base.slack_a;
    out.slack_b = base.slack_b;
    for (int side = 0; side < 2; ++side) {
        const double mu = side == 0 ? mu_range.first : mu_range.second;
        const Mat d = build_dmu(n, mu, 1.0 - 0.5 * nu);
        const double lam_min = symmetric_eigenvalues(d * W * d).front();
        const double radius = lam_min > 0.0 ? 1.0 / std::sqrt(lam_min) : 0.0;
        (side == 0 ? out.omega_radius_lo : out.omega_radius_hi) = radius;
    }
    return out;
}

double InvariantCertificate::gamma_at(double rho_t) const
{
    return rho_t * rho_t / x11();
}

double InvariantCertificate::admissible_level() const
{
    return std::min(1.0, gamma_inf);
}

InvariantCertificate search_trivial_solution(
    const Vec& gains, double kappa, const Mat& W,
    const std::vector<std::pair<double, double>>& g_bounds, double rho0, double rho_inf,
    LmiForm form)
{
    const std::size_t n = gains.size();
    const Mat a0 = build_a0(gains);
    require_spd(W, "W");
    if (W.dim() != n) {
        throw DimensionError("W dimension mismatch");
    }
    const double k_min = *std::min_element(gains.begin(), gains.end());
    if (!(kappa > 0.0) || kappa > k_min) {
        throw DomainError("rate must satisfy 0 < kappa <= min gain");
    }
    if (!(rho0 > rho_inf) || !(rho_inf > 0.0)) {
        throw DomainError("levels must satisfy rho0 > rho_inf > 0");
    }

    const std::vector<Mat> ag_samples = corner_ag_samples(g_bounds, n);

    // Fixed, deterministic grid.
    std::vector<double> vh_grid;
    for (int i = 0; i <= 60; ++i) {
        vh_grid.push_back(std::pow(10.0, -3.0 + 0.1 * i));
    }
    std::vector<double> alpha_grid;
    for (int i = 1; i <= 20; ++i) {
        alpha_grid.push_back(0.1 * i);
    }
    const std::vector<double> eps_grid = {0.01, 0.1, 0.5};

    bool any_feasible = false;
    GridPoint best;           // smallest feasible v_h
    PointSlacks best_slacks;
    GridPoint least_bad;      // fallback report when nothing is feasible
    double least_bad_worst = 1e300;

    for (double eps : eps_grid) {
        for (double alpha : alpha_grid) {
            for (double v_h : vh_grid) {
                const GridPoint p{v_h, alpha, eps};
                const PointSlacks s = eval_point(a0, ag_samples, W, p, kappa);
                if (s.worst() <= 0.0) {
                    if (!any_feasible || v_h < best.v_h) {
                        any_feasible = true;
                        best = p;
                        best_slacks = s;
                    }
                } else if (s.worst() < least_bad_worst) {
                    least_bad_worst = s.worst();
                    least_bad = p;
                }
            }
        }
    }

    GridPoint chosen = any_feasible ? best : least_bad;
    PointSlacks chosen_slacks =
        any_feasible ? best_slacks : eval_point(a0, ag_samples, W, chosen, kappa);

    if (any_feasible) {
        // Bisect down to the feasibility floor in v_h, then back off 10% so the
        // certificate is not razor-edge.
        double lo = best.v_h / 10.0;
        double hi = best.v_h;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            GridPoint p{mid, best.alpha, best.eps};
            if (eval_point(a0, ag_samples, W, p, kappa).worst() <= 0.0) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        GridPoint refined{1.1 * hi, best.alpha, best.eps};
        const PointSlacks s = eval_point(a0, ag_samples, W, refined, kappa);
        if (s.worst() <= 0.0 && refined.v_h <= best.v_h) {
            chosen = refined;
            chosen_slacks = s;
        }
    }

    InvariantCertificate cert;
    cert.n = n;
    cert.gains = gains;
    cert.kappa = kappa;
    cert.rho0 = rho0;
    cert.rho_inf = rho_inf;
    cert.W = W;
    cert.alpha = chosen.alpha;
    cert.eps_lmi = chosen.eps;
    cert.v_h = chosen.v_h;
    cert.X = Mat::identity(n).scaled(chosen.v_h);
    cert.P = Mat::identity(n).scaled(1.0 / chosen.v_h);
    cert.feasible = any_feasible;
    cert.gamma_inf = rho_inf * rho_inf / chosen.v_h;
    cert.w_condition_ok = cert.gamma_inf >= 1.0;
    cert.slack_eq5 = std::max(chosen_slacks.eq5, chosen_slacks.b);
    cert.slack_h = std::max(chosen_slacks.h, chosen_slacks.b);
    cert.form = form;
    cert.g_bounds = g_bounds;
    cert.witness_slack =
        slack_a_direct(a0, Mat::identity(n), W, kWitnessAlpha, kWitnessEps, kappa);
    return cert;
}

void InvariantCertificate::save(const std::string& path) const
{
    std::ostringstream os;
    os.precision(17);
    os << "bcl-certificate v1\n";
    os << "n " << n << "\n";
    os << "gains";
    for (double k : gains) {
        os << " " << k;
    }
    os << "\nkappa " << kappa << "\nrho0 " << rho0 << "\nrho_inf " << rho_inf
       << "\nalpha " << alpha << "\neps_lmi " << eps_lmi << "\nv_h " << v_h
       << "\nfeasible " << (feasible ? 1 : 0) << "\nw_condition "
       << (w_condition_ok ? 1 : 0) << "\ngamma_inf " << gamma_inf << "\nslack_eq5 "
       << slack_eq5 << "\nslack_h " << slack_h << "\nwitness_slack " << witness_slack
       << "\nform " << to_string(form) << "\n";
    os << "g_bounds " << g_bounds.size();
    for (const auto& [lo, hi] : g_bounds) {
        os << " " << lo << " " << hi;
    }
    os << "\n";
    for (const char* name : {"X", "P", "W"}) {
        const Mat& m = name[0] == 'X' ? X : (name[0] == 'P' ? P : W);
        os << name << "\n";
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                os << m(i, j) << (j + 1 < n ? " " : "\n");
            }
        }
    }
    const std::string tmp = path + ".tmp";
    std::ofstream f(tmp);
    if (!f) {
        throw ConfigError("cannot write certificate file: " + path);
    }
    f << os.str();
    f.close();
    std::remove(path.c_str());
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw ConfigError("cannot move certificate into place: " + path);
    }
}

InvariantCertificate InvariantCertificate::load(const std::string& path)
{
    std::ifstream f(path);
    if (!f) {
        throw ConfigError("cannot read certificate file: " + path);
    }
    std::string header;
    std::getline(f, header);
    if (header != "bcl-certificate v1") {
        throw ConfigError("unrecognized certificate header in " + path);
    }
    InvariantCertificate cert;
    std::string key;
    auto read_matrix = [&f](Mat& m, std::size_t n) {
        m = Mat(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (!(f >> m(i, j))) {
                    throw ConfigError("truncated certificate matrix");
                }
            }
        }
    };
    while (f >> key) {
        if (key == "n") {
            f >> cert.n;
        } else if (key == "gains") {
            cert.gains.resize(cert.n);
            for (double& k : cert.gains) {
                f >> k;
            }
        } else if (key == "kappa") {
            f >> cert.kappa;
        } else if (key == "rho0") {
            f >> cert.rho0;
        } else if (key == "rho_inf") {
            f >> cert.rho_inf;
        } else if (key == "alpha") {
            f >> cert.alpha;
        } else if (key == "eps_lmi") {
            f >> cert.eps_lmi;
        } else if (key == "v_h") {
            f >> cert.v_h;
        } else if (key == "feasible") {
            int v = 0;
            f >> v;
            cert.feasible = v != 0;
        } else if (key == "w_condition") {
            int v = 0;
            f >> v;
            cert.w_condition_ok = v != 0;
        } else if (key == "gamma_inf") {
            f >> cert.gamma_inf;
        } else if (key == "slack_eq5") {
            f >> cert.slack_eq5;
        } else if (key == "slack_h") {
            f >> cert.slack_h;
        } else if (key == "witness_slack") {
            f >> cert.witness_slack;
        } else if (key == "form") {
            std::string s;
            f >> s;
            cert.form = lmi_form_from_string(s);
        } else if (key == "g_bounds") {
            std::size_t count = 0;
            if (!(f >> count) || count > 64) {
                throw ConfigError("bad g_bounds count in certificate");
            }
            cert.g_bounds.clear();
            for (std::size_t i = 0; i < count; ++i) {
                double lo = 0.0, hi = 0.0;
                if (!(f >> lo >> hi)) {
                    throw ConfigError("truncated g_bounds in certificate");
                }
                cert.g_bounds.emplace_back(lo, hi);
            }
        } else if (key == "X") {
            read_matrix(cert.X, cert.n);
        } else if (key == "P") {
            read_matrix(cert.P, cert.n);
        } else if (key == "W") {
            read_matrix(cert.W, cert.n);
        } else {
            throw ConfigError("unknown certificate key: " + key);
        }
    }
    if (cert.n == 0 || cert.X.dim() != cert.n || cert.P.dim() != cert.n
        || cert.W.dim() != cert.n) {
        throw ConfigError("incomplete certificate file: " + path);
    }
    return cert;
}

unsigned worker_count()
{
    if (const char* env = std::getenv("BCL_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v <= 256) {
            return static_cast<unsigned>(v);
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

namespace {

struct TrialResult {
    double max_ratio_v = 0.0;
    double max_ratio_z1 = 0.0;
};

TrialResult run_trial(const InvariantCertificate& cert, std::uint64_t seed, double horizon,
                      double level)
{
    const std::size_t n = cert.n;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const SymmetricEigen w_eig = symmetric_eigen(cert.W);

    auto unit_dir = [&](std::size_t dim) {
        Vec d(dim);
        double s = 0.0;
        do {
            for (double& x : d) {
                x = gauss(rng);
            }
            s = norm(d);
        } while (s < 1e-12);
        for (double& x : d) {
            x /= s;
        }
        return d;
    };

    // Boundary start: V(0) = Gamma(0).
    Vec z = unit_dir(n);
    {
        const double v_dir = quadratic_form(cert.P, z);
        const double scale = cert.rho0 / std::sqrt(cert.x11() * v_dir);
        for (double& x : z) {
            x *= scale;
        }
    }

    Vec omega(n, 0.0);
    Mat a = build_a0(cert.gains);
    const double h = 1e-3;
    const int seg_steps = 100; // 0.1 s segments
    const int steps = static_cast<int>(std::llround(horizon / h));

    TrialResult res{1.0, std::fabs(z[0]) / cert.rho0};
    PerformanceSpec env;
    env.rho0 = cert.rho0;
    env.rho_inf = cert.rho_inf;
    env.kappa = cert.kappa;

    for (int i = 0; i < steps; ++i) {
        if (i % seg_steps == 0) {
            // New adversarial segment: disturbance on the admissible ellipsoid,
            // couplings anywhere inside their bounds.
            const Vec d = unit_dir(n);
            for (std::size_t r = 0; r < n; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < n; ++c) {
                    acc += w_eig.vectors(r, c) * d[c] / std::sqrt(w_eig.values[c]);
                }
                omega[r] = acc * std::sqrt(level);
            }
            Vec g(n >= 1 ? n - 1 : 0);
            for (std::size_t j = 0; j < g.size(); ++j) {
                const auto& [lo, hi] = cert.g_bounds[j];
                g[j] = lo + (hi - lo) * unif(rng);
            }
            a = build_a0(cert.gains) + build_ag(g);
        }
        auto deriv = [&](const Vec& zz) {
            Vec dz = a.apply(zz);
            for (std::size_t r = 0; r < n; ++r) {
                dz[r] += omega[r];
            }
            return dz;
        };
        const Vec k1 = deriv(z);
        Vec tmp(n);
        for (std::size_t r = 0; r < n; ++r) tmp[r] = z[r] + 0.5 * h * k1[r];
        const Vec k2 = deriv(tmp);
        for (std::size_t r = 0; r < n; ++r) tmp[r] = z[r] + 0.5 * h * k2[r];
        const Vec k3 = deriv(tmp);
        for (std::size_t r = 0; r < n; ++r) tmp[r] = z[r] + h * k3[r];
        const Vec k4 = deriv(tmp);
        for (std::size_t r = 0; r < n; ++r) {
            z[r] += h / 6.0 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r]);
        }
        const double t = (i + 1) * h;
        const double rho_t = ppf(env, t);
        res.max_ratio_v =
            std::max(res.max_ratio_v, quadratic_form(cert.P, z) / cert.gamma_at(rho_t));
        res.max_ratio_z1 = std::max(res.max_ratio_z1, std::fabs(z[0]) / rho_t);
    }
    return res;
}

} // namespace

InvarianceReport monte_carlo_invariance(const InvariantCertificate& cert, int n_trials,
                                        double horizon, std::uint64_t rng_seed,
                                        double omega_scale)
{
    if (!cert.feasible) {
        throw PreconditionError("certificate is infeasible; nothing to verify");
    }
    InvarianceReport report;
    report.trials = n_trials;
    report.omega_level = cert.admissible_level() * omega_scale * omega_scale;
    if (n_trials <= 0) {
        report.pass = true;
        report.vacuous = true;
        return report;
    }

    // Fail in the caller's thread on malformed certificates, not in a worker.
    build_a0(cert.gains);
    if (cert.g_bounds.size() + 1 < cert.n) {
        throw DimensionError("certificate lacks coupling bounds");
    }

    std::vector<TrialResult> results(static_cast<std::size_t>(n_trials));
    const unsigned workers =
        std::min<unsigned>(worker_count(), static_cast<unsigned>(n_trials));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (int i = static_cast<int>(w); i < n_trials;
                     i += static_cast<int>(workers)) {
                    results[static_cast<std::size_t>(i)] = run_trial(
                        cert, rng_seed + static_cast<std::uint64_t>(i), horizon,
                        report.omega_level);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    for (int i = 0; i < n_trials; ++i) {
        const TrialResult& r = results[static_cast<std::size_t>(i)];
        if (r.max_ratio_v > report.max_ratio_v) {
            report.max_ratio_v = r.max_ratio_v;
            report.worst_seed = rng_seed + static_cast<std::uint64_t>(i);
        }
        report.max_ratio_z1 = std::max(report.max_ratio_z1, r.max_ratio_z1);
    }
    report.pass = report.max_ratio_v <= 1.0 + 1e-3 && report.max_ratio_z1 <= 1.0 + 1e-3;
    return report;
}

} // namespace bcl
