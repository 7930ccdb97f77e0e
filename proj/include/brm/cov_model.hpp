#pragma once

#include <Eigen/Dense>
#include <optional>
#include <sstream>
#include <vector>

#include "brm/common.hpp"

namespace brm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Dependence structure of the driving Gaussian vector: Sigma = Gamma Gamma^T
// with its lower Cholesky factor. Construction rejects anything that is not
// symmetric positive definite, so downstream code can assume a valid factor.
class CovModel {
public:
    static constexpr double kPivotTol = 1e-10;

    static CovModel from_sigma(const Matrix& sigma) { return CovModel(sigma, std::nullopt); }

    static CovModel from_gamma(const Matrix& gamma) {
        require(gamma.rows() == gamma.cols() && gamma.rows() > 0, "gamma must be square");
        Matrix sigma = gamma * gamma.transpose();
        return CovModel(sigma, gamma);
    }

    static CovModel from_gamma_and_sigma(const Matrix& gamma, const Matrix& sigma) {
        CovModel m(sigma, gamma);
        double mismatch = (gamma * gamma.transpose() - sigma).cwiseAbs().maxCoeff();
        if (mismatch > 1e-10) {
            std::ostringstream os;
            os << "gamma*gamma^T differs from sigma by " << mismatch << " (tolerance 1e-10)";
            throw SingularModelError(os.str());
        }
        return m;
    }

    // Equi-correlated correlation matrix, rho in (-1/(d-1), 1).
    static CovModel equicorrelated(int d, double rho) {
        require(d >= 1, "dimension must be positive");
        if (d > 1) require(rho > -1.0 / (d - 1) && rho < 1.0,
                           "rho outside the positive definite range (-1/(d-1), 1)");
        Matrix sigma = Matrix::Constant(d, d, rho);
        sigma.diagonal().setOnes();
        return from_sigma(sigma);
    }

    int dim() const { return static_cast<int>(sigma_.rows()); }
    const Matrix& sigma() const { return sigma_; }
    const Matrix& chol() const { return chol_; }
    const std::optional<Matrix>& gamma() const { return gamma_; }

    // log det Sigma via the factor diagonal
    double log_det() const {
        double s = 0.0;
        for (int i = 0; i < dim(); ++i) s += std::log(chol_(i, i));
        return 2.0 * s;
    }

    // Solve Sigma y = b.
    Vector solve(const Vector& b) const {
        Vector y = chol_.triangularView<Eigen::Lower>().solve(b);
        return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
    }

    double quad_form_inv(const Vector& x) const {
        Vector y = chol_.triangularView<Eigen::Lower>().solve(x);
        return y.squaredNorm();
    }

    CovModel restricted(const std::vector<int>& idx) const {
        Matrix sub(idx.size(), idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < idx.size(); ++j) sub(i, j) = sigma_(idx[i], idx[j]);
        return from_sigma(sub);
    }

    CovModel scaled(double t) const {
        require(t > 0.0, "time scale must be positive");
        return from_sigma(sigma_ * t);
    }

private:
    CovModel(Matrix sigma, std::optional<Matrix> gamma)
        : sigma_(std::move(sigma)), gamma_(std::move(gamma)) {
        require(sigma_.rows() == sigma_.cols() && sigma_.rows() > 0, "sigma must be square");
        double scale = sigma_.cwiseAbs().maxCoeff();
        double asym = (sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12 * std::max(1.0, scale)) {
            std::ostringstream os;
            os << "sigma is not symmetric: max asymmetry " << asym;
            throw SingularModelError(os.str());
        }
        sigma_ = ((sigma_ + sigma_.transpose()) * 0.5).eval();
        chol_ = cholesky(sigma_);
    }

    static Matrix cholesky(const Matrix& s) {
        Eigen::LLT<Matrix> llt(s);
        Matrix L = llt.matrixL();
        bool ok = llt.info() == Eigen::Success;
        for (int i = 0; ok && i < s.rows(); ++i)
            if (!(L(i, i) > kPivotTol)) ok = false;
        if (!ok)
            throw SingularModelError(
                "sigma is not positive definite: Cholesky pivot at or below 1e-10");
        return L;
    }

    Matrix sigma_;
    std::optional<Matrix> gamma_;
    Matrix chol_;
};

}  // namespace brm
