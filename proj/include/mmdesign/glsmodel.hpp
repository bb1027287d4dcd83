#pragma once

// Linearized information matrix of the amplitude vector under AR(1) noise and
// polynomial drift.
//
// Two routes are provided. The dense route (e_matrix, l_matrix,
// dense_info_matrix) assembles the T x Q and T x 2 matrices literally. The
// Evaluator works from the Gram matrix G = Z'Z of the residualized whitened
// design matrix Z = [I - w{VS}] V X_d, which is computed once per design;
// every (theta, p) point then only needs the 3Q x 3Q moment matrix
// F(p)' G F(p) with F(p) = [I (x) h, I (x) dh/dp1, I (x) dh/dp6].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "design.hpp"
#include "errors.hpp"
#include "hrf.hpp"

namespace mmdesign {

struct NoiseSpec {
    double rho = 0.3;  // AR(1) coefficient
    int runs = 1;
};

struct DriftSpec {
    int order = 2;
    bool per_run = true;
};

// Everything about the experiment except the design and (theta, p).
struct Experiment {
    int q_types = 1;
    std::size_t length = 255;
    double isi = 4.0;
    double tr = 2.0;
    NoiseSpec noise;
    DriftSpec drift;
    double run_shift = 1.25;  // HRF sampling offset of the second run, seconds

    void validate() const {
        if (q_types < 1) throw ConfigError("Q must be at least 1");
        if (length < 1) throw ConfigError("design length must be at least 1");
        if (!(std::abs(noise.rho) < 1.0)) throw ConfigError("AR(1) coefficient must satisfy |rho| < 1");
        if (noise.runs != 1 && noise.runs != 2) throw ConfigError("run count must be 1 or 2");
        if (noise.runs == 2 && !drift.per_run) throw ConfigError("two-run model requires per-run drift");
        if (drift.order < 0) throw ConfigError("drift order must be nonnegative");
        const ScanLayout s = scan_layout(length, isi, tr);
        if (s.scans <= static_cast<std::size_t>(drift.order))
            throw ConfigError("too few scans for the drift order");
    }

    double sampling_step() const { return delta_t(isi, tr); }
    std::size_t hrf_length() const { return hrf::default_length(sampling_step()); }
    std::size_t scans() const { return scan_layout(length, isi, tr).scans; }

    std::vector<double> run_offsets() const {
        if (noise.runs == 2) return {0.0, run_shift};
        return {0.0};
    }
};

// V with V[0,0] = sqrt(1 - rho^2), V[t,t] = 1, V[t,t-1] = -rho.
inline Eigen::MatrixXd whitening_matrix(std::size_t scans, double rho) {
    if (!(std::abs(rho) < 1.0)) throw ConfigError("AR(1) coefficient must satisfy |rho| < 1");
    if (scans < 1) throw ConfigError("whitening matrix needs T >= 1");
    const auto n = static_cast<Eigen::Index>(scans);
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    v(0, 0) = std::sqrt(1.0 - rho * rho);
    for (Eigen::Index t = 1; t < n; ++t) v(t, t - 1) = -rho;
    return v;
}

// Applies V to the rows of x without forming V.
inline Eigen::MatrixXd whiten_rows(const Eigen::MatrixXd& x, double rho) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    if (x.rows() == 0) return out;
    out.row(0) = std::sqrt(1.0 - rho * rho) * x.row(0);
    out.bottomRows(x.rows() - 1) = x.bottomRows(x.rows() - 1) - rho * x.topRows(x.rows() - 1);
    return out;
}

// Orthonormal polynomial basis of degree <= order over t = 1..T
// (modified Gram-Schmidt on centered, scaled monomials).
inline Eigen::MatrixXd drift_matrix(std::size_t scans, int order) {
    if (order < 0) throw ConfigError("drift order must be nonnegative");
    if (scans <= static_cast<std::size_t>(order)) throw ConfigError("drift order needs T > order");
    const auto n = static_cast<Eigen::Index>(scans);
    const auto cols = static_cast<Eigen::Index>(order + 1);
    Eigen::VectorXd u(n);
    const double centre = 0.5 * (static_cast<double>(scans) + 1.0);
    const double half = std::max(0.5 * (static_cast<double>(scans) - 1.0), 1.0);
    for (Eigen::Index t = 0; t < n; ++t) u[t] = (static_cast<double>(t + 1) - centre) / half;
    Eigen::MatrixXd s(n, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::VectorXd col = u.array().pow(static_cast<double>(c));
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index j = 0; j < c; ++j) col -= s.col(j).dot(col) * s.col(j);
        s.col(c) = col / col.norm();
    }
    return s;
}

// Raw monomials 1, t, ..., t^order over t = 1..T.
inline Eigen::MatrixXd monomial_drift_matrix(std::size_t scans, int order) {
    const auto n = static_cast<Eigen::Index>(scans);
    Eigen::MatrixXd s(n, order + 1);
    for (Eigen::Index t = 0; t < n; ++t)
        for (int c = 0; c <= order; ++c) s(t, c) = std::pow(static_cast<double>(t + 1), c);
    return s;
}

// Orthonormal basis of the column space of a: left singular vectors whose
// singular values exceed max(rows, cols) * eps * sigma_max.
inline Eigen::MatrixXd column_space_basis(const Eigen::MatrixXd& a) {
    if (a.size() == 0) return Eigen::MatrixXd(a.rows(), 0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    const double tol = static_cast<double>(std::max(a.rows(), a.cols())) *
                       std::numeric_limits<double>::epsilon() * smax;
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > tol && sv[rank] > 0.0) ++rank;
    return svd.matrixU().leftCols(rank);
}

// w{A} = A (A'A)^- A', the orthogonal projector onto col(A).
inline Eigen::MatrixXd projection(const Eigen::MatrixXd& a) {
    const Eigen::MatrixXd u = column_space_basis(a);
    return u * u.transpose();
}

namespace detail {

// Block-diagonal over runs: I_runs (x) m.
inline Eigen::MatrixXd repeat_diagonal(const Eigen::MatrixXd& m, int runs) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows() * runs, m.cols() * runs);
    for (int r = 0; r < runs; ++r) out.block(r * m.rows(), r * m.cols(), m.rows(), m.cols()) = m;
    return out;
}

inline void check_design(const Design& d, const Experiment& ex) {
    ex.validate();
    if (d.q_types != ex.q_types) throw ConfigError("design Q differs from the experiment's Q");
    if (d.length() != ex.length) throw ConfigError("design length differs from the experiment's L");
    if (std::abs(d.isi - ex.isi) > 1e-12 * ex.isi) throw ConfigError("design ISI differs from the experiment's ISI");
}

// [I - w{VS}] V for all runs, as a dense (runs*T) x (runs*T) matrix.
inline Eigen::MatrixXd residualizing_operator(const Experiment& ex) {
    const std::size_t scans = ex.scans();
    const Eigen::MatrixXd v = repeat_diagonal(whitening_matrix(scans, ex.noise.rho), ex.noise.runs);
    const Eigen::MatrixXd s = repeat_diagonal(drift_matrix(scans, ex.drift.order), ex.noise.runs);
    const Eigen::MatrixXd vs = v * s;
    return (Eigen::MatrixXd::Identity(v.rows(), v.cols()) - projection(vs)) * v;
}

// Column q: the stacked per-run responses X_{d,q} f_r for sampled shapes f_r.
inline Eigen::MatrixXd response_columns(const Design& d, const Experiment& ex,
                                        const std::vector<Eigen::VectorXd>& per_run_shape) {
    const DesignMatrix x = design_matrix(d, ex.tr, ex.hrf_length());
    const auto t = static_cast<Eigen::Index>(x.scans);
    Eigen::MatrixXd out(t * ex.noise.runs, ex.q_types);
    for (int q = 0; q < ex.q_types; ++q)
        for (int r = 0; r < ex.noise.runs; ++r)
            out.block(r * t, q, t, 1) = x.blocks[static_cast<std::size_t>(q)] * per_run_shape[static_cast<std::size_t>(r)];
    return out;
}

inline std::vector<hrf::HrfSamples> run_samples(const Experiment& ex, const hrf::HrfParams& p) {
    std::vector<hrf::HrfSamples> out;
    for (double offset : ex.run_offsets())
        out.push_back(hrf::sample_with_partials(p, ex.sampling_step(), offset, ex.hrf_length()));
    return out;
}

}  // namespace detail

// E_d(p) = [I - w{VS}] V X_d [I_Q (x) h(p)]; (runs*T) x Q.
inline Eigen::MatrixXd e_matrix(const Design& d, const hrf::HrfParams& p, const Experiment& ex) {
    detail::check_design(d, ex);
    std::vector<Eigen::VectorXd> shapes;
    for (const auto& s : detail::run_samples(ex, p)) shapes.push_back(s.h);
    return detail::residualizing_operator(ex) * detail::response_columns(d, ex, shapes);
}

// L_d(theta, p) = [L_1, L_6]; (runs*T) x 2.
inline Eigen::MatrixXd l_matrix(const Design& d, const Eigen::VectorXd& theta, const hrf::HrfParams& p,
                                const Experiment& ex) {
    detail::check_design(d, ex);
    if (theta.size() != ex.q_types) throw ConfigError("theta must have Q entries");
    std::vector<Eigen::VectorXd> d1, d6;
    for (const auto& s : detail::run_samples(ex, p)) {
        d1.push_back(s.dh_p1);
        d6.push_back(s.dh_p6);
    }
    const Eigen::MatrixXd op = detail::residualizing_operator(ex);
    Eigen::MatrixXd l(op.rows(), 2);
    l.col(0) = op * detail::response_columns(d, ex, d1) * theta;
    l.col(1) = op * detail::response_columns(d, ex, d6) * theta;
    return l;
}

// E'[I - w{L}]E assembled densely.
inline Eigen::MatrixXd dense_info_matrix(const Design& d, const Eigen::VectorXd& theta, const hrf::HrfParams& p,
                                         const Experiment& ex) {
    const Eigen::MatrixXd e = e_matrix(d, p, ex);
    const Eigen::MatrixXd l = l_matrix(d, theta, p, ex);
    const Eigen::MatrixXd r = Eigen::MatrixXd::Identity(e.rows(), e.rows()) - projection(l);
    const Eigen::MatrixXd m = e.transpose() * r * e;
    return 0.5 * (m + m.transpose());
}

// Reciprocal condition number below which M counts as singular.
inline constexpr double kSingularRcond = 1e-12;

// 1 / trace(M^-1), or 0 when M is singular or numerically so. `reference`
// is the scale of E'E; an M that is tiny relative to it is treated as zero.
inline double phi_a_of(const Eigen::MatrixXd& m, double reference = 0.0) {
    if (m.rows() == 0) return 0.0;
    if (m.rows() == 1) {
        const double v = m(0, 0);
        return (v > 0.0 && v > kSingularRcond * reference) ? v : 0.0;
    }
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double lmax = ev[ev.size() - 1];
    if (!(lmax > 0.0) || lmax <= kSingularRcond * reference) return 0.0;
    if (ev[0] <= kSingularRcond * lmax) return 0.0;
    return 1.0 / ev.cwiseInverse().sum();
}

struct InfoMatrix {
    Eigen::MatrixXd m;
    Eigen::VectorXd theta;
    hrf::HrfParams p;
    double reference = 0.0;  // largest diagonal entry of E'E

    double phi_a() const { return phi_a_of(m, reference); }
};

// Design-level cached state for the Evaluator.
struct PreparedDesign {
    Eigen::MatrixXd z;     // whitened, drift-removed design matrix, T x (K*Q)
    Eigen::MatrixXd gram;  // Z'Z, (K*Q) x (K*Q)
};

// M below this fraction of the E'E scale is recomputed from Z: the Schur
// complement of the moments cancels roughly log10(E'E / M) digits.
inline constexpr double kRefineRatio = 1e-3;

// Fast evaluation of M(d; theta, p) and Phi_A over a fixed list of HRF
// parameter points. Construction samples the HRF bank once; afterwards all
// members are const and safe to call concurrently.
class Evaluator {
public:
    Evaluator(Experiment ex, std::vector<hrf::HrfParams> points) : ex_(std::move(ex)), points_(std::move(points)) {
        ex_.validate();
        scans_ = ex_.scans();
        k_ = ex_.hrf_length();
        total_rows_ = scans_ * static_cast<std::size_t>(ex_.noise.runs);
        const Eigen::MatrixXd vs = whiten_rows(drift_matrix(scans_, ex_.drift.order), ex_.noise.rho);
        drift_basis_ = column_space_basis(vs);
        const auto kk = static_cast<Eigen::Index>(k_);
        const auto np = static_cast<Eigen::Index>(points_.size());
        for (double offset : ex_.run_offsets()) {
            Eigen::MatrixXd bank(kk, 3 * np);
            for (Eigen::Index i = 0; i < np; ++i) {
                const auto s = hrf::sample_with_partials(points_[static_cast<std::size_t>(i)], ex_.sampling_step(),
                                                         offset, k_);
                bank.col(3 * i) = s.h;
                bank.col(3 * i + 1) = s.dh_p1;
                bank.col(3 * i + 2) = s.dh_p6;
            }
            banks_.push_back(std::move(bank));
        }
    }

    const Experiment& experiment() const noexcept { return ex_; }
    const std::vector<hrf::HrfParams>& points() const noexcept { return points_; }
    std::size_t point_count() const noexcept { return points_.size(); }
    std::size_t hrf_length() const noexcept { return k_; }
    std::size_t scans() const noexcept { return scans_; }

    PreparedDesign prepare(const Design& d) const {
        detail::check_design(d, ex_);
        const Eigen::MatrixXd vx = whiten_rows(stacked_design_matrix(d, ex_.tr, k_), ex_.noise.rho);
        Eigen::MatrixXd z = vx - drift_basis_ * (drift_basis_.transpose() * vx);
        PreparedDesign out;
        out.gram.noalias() = z.transpose() * z;
        out.z = std::move(z);
        return out;
    }

    // U(p) = sum over runs of F_r(p)' G F_r(p), rows/cols ordered
    // [E_1..E_Q, D1_1..D1_Q, D6_1..D6_Q].
    Eigen::MatrixXd moments(const PreparedDesign& pd, std::size_t point) const {
        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(3 * ex_.q_types, 3 * ex_.q_types);
        for (const auto& bank : banks_) {
            const Eigen::MatrixXd h = bank.middleCols(3 * static_cast<Eigen::Index>(point), 3);
            accumulate(pd.gram, h, u);
        }
        return u;
    }

    // Moments at every point of the bank, batched as one product per type.
    std::vector<Eigen::MatrixXd> all_moments(const PreparedDesign& pd) const {
        const int q = ex_.q_types;
        const auto kk = static_cast<Eigen::Index>(k_);
        std::vector<Eigen::MatrixXd> out(points_.size(), Eigen::MatrixXd::Zero(3 * q, 3 * q));
        for (const auto& bank : banks_) {
            for (int b = 0; b < q; ++b) {
                // y = G[:, block b] * bank : (K*Q) x 3P
                const Eigen::MatrixXd y = pd.gram.middleCols(b * kk, kk) * bank;
                for (std::size_t i = 0; i < points_.size(); ++i) {
                    const auto c = 3 * static_cast<Eigen::Index>(i);
                    for (int a = 0; a < q; ++a) {
                        const Eigen::Matrix3d blk =
                            bank.middleCols(c, 3).transpose() * y.block(a * kk, c, kk, 3);
                        for (int s = 0; s < 3; ++s)
                            for (int t = 0; t < 3; ++t) out[i](s * q + a, t * q + b) += blk(s, t);
                    }
                }
            }
        }
        for (auto& u : out) u = 0.5 * (u + u.transpose());
        return out;
    }

    // Schur complement E'E - E'L (L'L)^- L'E from the moments; when it is
    // small against E'E, M is recomputed as R'R with R the residual of E
    // against an orthonormal basis of L.
    InfoMatrix info(const PreparedDesign& pd, const Eigen::MatrixXd& u, const Eigen::VectorXd& theta,
                    std::size_t point) const {
        InfoMatrix out = info_from_moments(u, theta, points_[point], total_rows_);
        if (out.reference > 0.0 && smallest_eigenvalue(out.m) < kRefineRatio * out.reference)
            out.m = residual_info(pd, theta, point);
        return out;
    }

    static InfoMatrix info_from_moments(const Eigen::MatrixXd& u, const Eigen::VectorXd& theta,
                                        const hrf::HrfParams& p, std::size_t rows) {
        const auto q = static_cast<Eigen::Index>(u.rows() / 3);
        if (theta.size() != q) throw ConfigError("theta must have Q entries");
        InfoMatrix out;
        out.theta = theta;
        out.p = p;
        out.m = u.topLeftCorner(q, q);
        out.reference = out.m.diagonal().maxCoeff();

        Eigen::Matrix<double, Eigen::Dynamic, 2> el(q, 2);
        el.col(0) = u.block(0, q, q, q) * theta;
        el.col(1) = u.block(0, 2 * q, q, q) * theta;
        Eigen::Matrix2d ll;
        ll(0, 0) = theta.dot(u.block(q, q, q, q) * theta);
        ll(1, 1) = theta.dot(u.block(2 * q, 2 * q, q, q) * theta);
        ll(0, 1) = ll(1, 0) = 0.5 * (theta.dot(u.block(q, 2 * q, q, q) * theta) +
                                     theta.dot(u.block(2 * q, q, q, q) * theta));
        const Eigen::Matrix2d pinv = gram_pseudo_inverse(ll, rows);
        out.m -= el * pinv * el.transpose();
        out.m = 0.5 * (out.m + out.m.transpose());
        return out;
    }

    double phi_a(const PreparedDesign& pd, const Eigen::MatrixXd& u, const Eigen::VectorXd& theta,
                 std::size_t point) const {
        return info(pd, u, theta, point).phi_a();
    }

private:
    static double smallest_eigenvalue(const Eigen::MatrixXd& m) {
        if (m.rows() == 1) return m(0, 0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
        return es.eigenvalues()[0];
    }

    Eigen::MatrixXd residual_info(const PreparedDesign& pd, const Eigen::VectorXd& theta, std::size_t point) const {
        const int q = ex_.q_types;
        const auto kk = static_cast<Eigen::Index>(k_);
        const Eigen::Index t = pd.z.rows();
        const auto rows = t * static_cast<Eigen::Index>(banks_.size());
        Eigen::MatrixXd e(rows, q);
        Eigen::MatrixXd l = Eigen::MatrixXd::Zero(rows, 2);
        for (std::size_t r = 0; r < banks_.size(); ++r) {
            const Eigen::MatrixXd h = banks_[r].middleCols(3 * static_cast<Eigen::Index>(point), 3);
            const auto top = static_cast<Eigen::Index>(r) * t;
            for (int a = 0; a < q; ++a) {
                const Eigen::MatrixXd zf = pd.z.middleCols(a * kk, kk) * h;  // T x 3
                e.block(top, a, t, 1) = zf.col(0);
                l.block(top, 0, t, 1) += theta[a] * zf.col(1);
                l.block(top, 1, t, 1) += theta[a] * zf.col(2);
            }
        }
        const Eigen::MatrixXd b = column_space_basis(l);
        const Eigen::MatrixXd res = e - b * (b.transpose() * e);
        const Eigen::MatrixXd m = res.transpose() * res;
        return 0.5 * (m + m.transpose());
    }

    void accumulate(const Eigen::MatrixXd& g, const Eigen::MatrixXd& h, Eigen::MatrixXd& u) const {
        const int q = ex_.q_types;
        const auto kk = static_cast<Eigen::Index>(k_);
        for (int a = 0; a < q; ++a)
            for (int b = 0; b < q; ++b) {
                const Eigen::Matrix3d blk = h.transpose() * g.block(a * kk, b * kk, kk, kk) * h;
                for (int s = 0; s < 3; ++s)
                    for (int t = 0; t < 3; ++t) u(s * q + a, t * q + b) += blk(s, t);
            }
    }

    // Generalized inverse of the 2 x 2 Gram matrix L'L. Eigenvalues at or
    // below rows * eps * lambda_max are dropped.
    static Eigen::Matrix2d gram_pseudo_inverse(const Eigen::Matrix2d& ll, std::size_t rows) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(ll);
        const Eigen::Vector2d ev = es.eigenvalues();
        const double lmax = ev[1];
        Eigen::Matrix2d out = Eigen::Matrix2d::Zero();
        if (!(lmax > 0.0)) return out;
        const double tol = static_cast<double>(std::max<std::size_t>(rows, 2)) *
                           std::numeric_limits<double>::epsilon() * lmax;
        for (int i = 0; i < 2; ++i)
            if (ev[i] > tol) out += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / ev[i];
        return out;
    }

    Experiment ex_;
    std::vector<hrf::HrfParams> points_;
    std::size_t scans_ = 0, k_ = 0, total_rows_ = 0;
    Eigen::MatrixXd drift_basis_;           // orthonormal basis of col(VS), one run
    std::vector<Eigen::MatrixXd> banks_;    // per run: K x 3P [h, dh1, dh6] per point
};

// M(d; theta, p) through the Gram route.
inline InfoMatrix info_matrix(const Design& d, const Eigen::VectorXd& theta, const hrf::HrfParams& p,
                              const Experiment& ex) {
    const Evaluator ev(ex, {p});
    const PreparedDesign pd = ev.prepare(d);
    return ev.info(pd, ev.moments(pd, 0), theta, 0);
}

inline double phi_a(const Design& d, const Eigen::VectorXd& theta, const hrf::HrfParams& p, const Experiment& ex) {
    return info_matrix(d, theta, p, ex).phi_a();
}

// Phi_A under the two-run model: the same sequence presented twice, the
// second run's HRF sampled `shift` seconds later, independent AR(1) noise and
// drift per run.
inline double two_run_phi_a(const Design& d, const Eigen::VectorXd& theta, const hrf::HrfParams& p,
                            Experiment ex, double shift = 1.25) {
    ex.noise.runs = 2;
    ex.drift.per_run = true;
    ex.run_shift = shift;
    return phi_a(d, theta, p, ex);
}

}  // namespace mmdesign
