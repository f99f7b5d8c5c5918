// mps.hpp - open-boundary matrix-product state with a movable orthogonality center
//
// Site tensors are stored as one (left x right) matrix per physical index. Two-site gates
// are applied to the pair holding the orthogonality center, followed by a truncated SVD
// that moves the center one site to the left or right.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <lapacke.h>

#include "chainmapper/error.hpp"

namespace chainmapper::mps {

using cplx = std::complex<double>;

struct Svd {
    Eigen::MatrixXcd u;
    Eigen::VectorXd s;
    Eigen::MatrixXcd vh;
};

// Thin SVD through LAPACK zgesvd, Jacobi SVD if it fails to converge. zgesdd is avoided:
// the OpenBLAS build returned inaccurate factors for some ill-conditioned two-site blocks.
inline Svd svd(Eigen::MatrixXcd a)
{
    const auto m = static_cast<lapack_int>(a.rows());
    const auto n = static_cast<lapack_int>(a.cols());
    const lapack_int k = std::min(m, n);
    Svd out{Eigen::MatrixXcd(m, k), Eigen::VectorXd(k), Eigen::MatrixXcd(k, n)};
    auto zptr = [](Eigen::MatrixXcd& x) { return reinterpret_cast<lapack_complex_double*>(x.data()); };
    const Eigen::MatrixXcd backup = a;
    std::vector<double> superb(static_cast<std::size_t>(std::max<lapack_int>(1, k - 1)));
    const lapack_int info = LAPACKE_zgesvd(LAPACK_COL_MAJOR, 'S', 'S', m, n, zptr(a), m, out.s.data(), zptr(out.u),
                                           m, zptr(out.vh), k, superb.data());
    if (info != 0) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> jac(backup, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (jac.info() != Eigen::Success) {
            throw NumericalError("SVD failed to converge (LAPACK info=" + std::to_string(info) + ")");
        }
        out.u = jac.matrixU();
        out.s = jac.singularValues();
        out.vh = jac.matrixV().adjoint();
    }
    return out;
}

struct Truncation {
    std::size_t kept = 0;
    double discarded_weight = 0.0; // relative squared Schmidt weight dropped
    double norm_before = 1.0;      // norm of the state before renormalization
    bool saturated = false;        // bond hit chi_max with discarded weight above 100 x cutoff
};

struct TruncationPolicy {
    std::size_t chi_max = 64;
    double svd_cutoff = 1e-10;
};

// Two-site gate stored as its nonzero entries; row/column index is s1 * d2 + s2.
struct Gate {
    std::size_t d1 = 0;
    std::size_t d2 = 0;
    struct Entry {
        std::size_t out1, out2, in1, in2;
        cplx value;
    };
    std::vector<Entry> entries;

    static Gate from_matrix(const Eigen::MatrixXcd& g, std::size_t d1, std::size_t d2)
    {
        Gate out{d1, d2, {}};
        const double scale = g.cwiseAbs().maxCoeff();
        for (std::size_t r = 0; r < d1 * d2; ++r) {
            for (std::size_t c = 0; c < d1 * d2; ++c) {
                const cplx v = g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                if (std::abs(v) > 1e-15 * scale) {
                    out.entries.push_back({r / d2, r % d2, c / d2, c % d2, v});
                }
            }
        }
        return out;
    }
};

enum class Direction { right, left };

class Mps {
public:
    // Product state from one normalized local vector per site.
    explicit Mps(const std::vector<Eigen::VectorXcd>& local_states)
    {
        if (local_states.empty()) {
            throw ParameterError("Mps: need at least one site");
        }
        for (const auto& v : local_states) {
            if (v.size() < 1 || std::abs(v.norm() - 1.0) > 1e-12) {
                throw ParameterError("Mps: local states must be normalized");
            }
            std::vector<Eigen::MatrixXcd> site;
            for (Eigen::Index s = 0; s < v.size(); ++s) {
                site.push_back(Eigen::MatrixXcd::Constant(1, 1, v(s)));
            }
            tensors_.push_back(std::move(site));
        }
        center_ = 0;
    }

    std::size_t size() const { return tensors_.size(); }
    std::size_t local_dim(std::size_t i) const { return tensors_[i].size(); }
    std::size_t center() const { return center_; }
    const std::vector<Eigen::MatrixXcd>& site(std::size_t i) const { return tensors_[i]; }

    std::size_t bond_dim(std::size_t i) const // bond between sites i and i+1
    {
        return static_cast<std::size_t>(tensors_[i].front().cols());
    }

    std::size_t max_bond_dim() const
    {
        std::size_t out = 1;
        for (std::size_t i = 0; i + 1 < size(); ++i) {
            out = std::max(out, bond_dim(i));
        }
        return out;
    }

    // Squared norm from the orthogonality center.
    double norm_squared() const
    {
        double out = 0.0;
        for (const auto& m : tensors_[center_]) {
            out += m.squaredNorm();
        }
        return out;
    }

    // Apply a gate on sites (i, i+1); the center must sit on one of them. The center ends
    // on i+1 for Direction::right and on i for Direction::left.
    Truncation apply(std::size_t i, const Gate& gate, Direction dir, const TruncationPolicy& policy)
    {
        if (i + 1 >= size() || (center_ != i && center_ != i + 1)) {
            throw ParameterError("Mps::apply: gate must act on the bond holding the orthogonality center");
        }
        auto& left = tensors_[i];
        auto& right = tensors_[i + 1];
        const std::size_t d1 = left.size();
        const std::size_t d2 = right.size();
        if (gate.d1 != d1 || gate.d2 != d2) {
            throw ParameterError("Mps::apply: gate dimensions do not match the sites");
        }
        const Eigen::Index dl = left.front().rows();
        const Eigen::Index dr = right.front().cols();

        // theta[(s1, a), (s2, b)] with row s1 * dl + a and column s2 * dr + b
        Eigen::MatrixXcd stacked_left(static_cast<Eigen::Index>(d1) * dl, left.front().cols());
        for (std::size_t s = 0; s < d1; ++s) {
            stacked_left.middleRows(static_cast<Eigen::Index>(s) * dl, dl) = left[s];
        }
        Eigen::MatrixXcd stacked_right(right.front().rows(), static_cast<Eigen::Index>(d2) * dr);
        for (std::size_t s = 0; s < d2; ++s) {
            stacked_right.middleCols(static_cast<Eigen::Index>(s) * dr, dr) = right[s];
        }
        const Eigen::MatrixXcd theta = stacked_left * stacked_right;
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(theta.rows(), theta.cols());
        for (const auto& e : gate.entries) {
            out.block(static_cast<Eigen::Index>(e.out1) * dl, static_cast<Eigen::Index>(e.out2) * dr, dl, dr) +=
                e.value *
                theta.block(static_cast<Eigen::Index>(e.in1) * dl, static_cast<Eigen::Index>(e.in2) * dr, dl, dr);
        }

        Svd dec = svd(std::move(out));
        const Eigen::VectorXd& sv = dec.s;
        Truncation info = truncate(sv, policy);
        const auto k = static_cast<Eigen::Index>(info.kept);

        Eigen::VectorXd kept = sv.head(k);
        const double kept_norm = kept.norm();
        if (!(kept_norm > 0.0)) {
            throw NumericalError("Mps::apply: state collapsed to zero norm");
        }
        kept /= kept_norm;

        Eigen::MatrixXcd u = dec.u.leftCols(k);
        Eigen::MatrixXcd vh = dec.vh.topRows(k);
        if (dir == Direction::right) {
            vh = kept.asDiagonal() * vh;
            center_ = i + 1;
        } else {
            u = u * kept.asDiagonal();
            center_ = i;
        }
        for (std::size_t s = 0; s < d1; ++s) {
            left[s] = u.middleRows(static_cast<Eigen::Index>(s) * dl, dl);
        }
        for (std::size_t s = 0; s < d2; ++s) {
            right[s] = vh.middleCols(static_cast<Eigen::Index>(s) * dr, dr);
        }
        return info;
    }

    // Left environments E_i = contraction of sites < i with their conjugates; E_0 = [1].
    // Valid as expectation-value building blocks when every site right of the one being
    // measured is right-canonical, i.e. for center() == 0.
    std::vector<Eigen::MatrixXcd> left_environments() const
    {
        std::vector<Eigen::MatrixXcd> env;
        env.reserve(size() + 1);
        env.push_back(Eigen::MatrixXcd::Identity(1, 1));
        for (std::size_t i = 0; i < size(); ++i) {
            const auto& e = env.back();
            Eigen::MatrixXcd next = Eigen::MatrixXcd::Zero(tensors_[i].front().cols(), tensors_[i].front().cols());
            for (const auto& a : tensors_[i]) {
                next.noalias() += a.adjoint() * (e * a);
            }
            env.push_back(std::move(next));
        }
        return env;
    }

    // <O_i> for a local operator, given the left environment of site i and center() <= i.
    cplx local_expectation(std::size_t i, const Eigen::MatrixXd& op, const Eigen::MatrixXcd& env) const
    {
        const auto& site_t = tensors_[i];
        cplx out = 0.0;
        for (std::size_t s = 0; s < site_t.size(); ++s) {
            for (std::size_t t = 0; t < site_t.size(); ++t) {
                const double o = op(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
                if (o != 0.0) {
                    out += o * (site_t[s].adjoint() * env * site_t[t]).trace();
                }
            }
        }
        return out;
    }

    // <X_i Y_{i+1}> given the left environment of site i and center() <= i.
    cplx pair_expectation(std::size_t i, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                          const Eigen::MatrixXcd& env) const
    {
        const auto& a = tensors_[i];
        const auto& b = tensors_[i + 1];
        const Eigen::Index chi = a.front().cols();
        Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(chi, chi);
        for (std::size_t s = 0; s < a.size(); ++s) {
            for (std::size_t t = 0; t < a.size(); ++t) {
                const double o = x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
                if (o != 0.0) {
                    f.noalias() += o * (a[s].adjoint() * env * a[t]);
                }
            }
        }
        cplx out = 0.0;
        for (std::size_t s = 0; s < b.size(); ++s) {
            for (std::size_t t = 0; t < b.size(); ++t) {
                const double o = y(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
                if (o != 0.0) {
                    out += o * (b[s].adjoint() * f * b[t]).trace();
                }
            }
        }
        return out;
    }

private:
    static Truncation truncate(const Eigen::VectorXd& sv, const TruncationPolicy& policy)
    {
        Truncation info;
        const auto n = static_cast<std::size_t>(sv.size());
        const double total = sv.squaredNorm();
        info.norm_before = std::sqrt(total);
        // tail[k] = weight of singular values with index >= k
        std::vector<double> tail(n + 1, 0.0);
        for (std::size_t j = n; j-- > 0;) {
            tail[j] = tail[j + 1] + sv(static_cast<Eigen::Index>(j)) * sv(static_cast<Eigen::Index>(j));
        }
        std::size_t k = 1;
        while (k < n && tail[k] > policy.svd_cutoff * total) {
            ++k;
        }
        const bool capped = k > policy.chi_max;
        k = std::min(k, policy.chi_max);
        info.kept = k;
        info.discarded_weight = total > 0.0 ? tail[k] / total : 0.0;
        info.saturated = capped && info.discarded_weight > 100.0 * policy.svd_cutoff;
        return info;
    }

    std::vector<std::vector<Eigen::MatrixXcd>> tensors_;
    std::size_t center_ = 0;
};

} // namespace chainmapper::mps
