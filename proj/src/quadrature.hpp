#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace tractforge::detail {

struct Rule {
    std::vector<double> x, w;
};

// Golub-Welsch for the Jacobi weight (1-x)^a (1+x)^b on [-1, 1]
inline Rule gauss_jacobi(int n, double a, double b) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    const double ab = a + b;
    for (int k = 0; k < n; ++k) {
        double den = (2 * k + ab) * (2 * k + ab + 2);
        J(k, k) = (k == 0 && std::fabs(ab) < 1e-14) ? (b - a) / (ab + 2) : (b * b - a * a) / den;
        if (k + 1 < n) {
            double m = k + 1;
            double num, d;
            if (m == 1) {
                num = 4 * (1 + a) * (1 + b);
                d = (2 + ab) * (2 + ab) * (3 + ab);
            } else {
                num = 4 * m * (m + a) * (m + b) * (m + ab);
                d = (2 * m + ab) * (2 * m + ab) * (2 * m + ab + 1) * (2 * m + ab - 1);
            }
            J(k, k + 1) = J(k + 1, k) = std::sqrt(num / d);
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    double mu0 = std::exp((ab + 1) * std::log(2.0) + std::lgamma(a + 1) + std::lgamma(b + 1) - std::lgamma(ab + 2));
    Rule r;
    for (int k = 0; k < n; ++k) {
        r.x.push_back(es.eigenvalues()(k));
        double v = es.eigenvectors()(0, k);
        r.w.push_back(mu0 * v * v);
    }
    return r;
}

}  // namespace tractforge::detail
