#include "mwclass/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mwclass {

namespace {

void check_inputs(const Matrix& x, const std::vector<int>& y) {
    if (x.rows() < 1) throw std::invalid_argument("fit: need at least one feature");
    if (x.cols() < 2) throw std::invalid_argument("fit: need at least two samples");
    if (y.size() != static_cast<std::size_t>(x.cols())) {
        throw std::invalid_argument("fit: label count must equal sample count");
    }
    if (!x.allFinite()) throw std::invalid_argument("fit: data must be finite");
    bool pos = false, neg = false;
    for (int yi : y) {
        if (yi == 1) pos = true;
        else if (yi == -1) neg = true;
        else throw std::invalid_argument("fit: labels must be -1 or +1");
    }
    if (!pos || !neg) throw std::invalid_argument("fit: both classes must be present");
}

// DWD loss after eliminating the slack: V(u) = 1/u for u >= 1/sqrt(C),
// 2 sqrt(C) - C u below.  Convex, decreasing, continuously differentiable.
struct DwdLoss {
    double c;
    double threshold;  // 1/sqrt(c)
    double sqrt_c;

    explicit DwdLoss(double c_) : c(c_), threshold(1.0 / std::sqrt(c_)), sqrt_c(std::sqrt(c_)) {}

    double value(double u) const {
        return u >= threshold ? 1.0 / u : 2.0 * sqrt_c - c * u;
    }
    double derivative(double u) const {
        return u >= threshold ? -1.0 / (u * u) : -c;
    }
};

struct DwdProblem {
    const Matrix& x;  // d x n
    Vector y;         // labels as doubles
    DwdLoss loss;

    DwdProblem(const Matrix& x_, const std::vector<int>& labels, double c)
        : x(x_), y(labels.size()), loss(c) {
        for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i];
    }

    Vector margins(const Vector& b, double beta) const {
        Vector scores = x.transpose() * b;
        scores.array() += beta;
        return y.cwiseProduct(scores);
    }

    double objective(const Vector& margins_vec) const {
        double f = 0.0;
        for (Eigen::Index i = 0; i < margins_vec.size(); ++i) f += loss.value(margins_vec[i]);
        return f;
    }

    // gradient w.r.t. (b, beta); beta component returned separately
    void gradient(const Vector& margins_vec, Vector& gb, double& gbeta) const {
        Vector s(margins_vec.size());
        for (Eigen::Index i = 0; i < margins_vec.size(); ++i) {
            s[i] = loss.derivative(margins_vec[i]) * y[i];
        }
        gb.noalias() = x * s;
        gbeta = s.sum();
    }
};

void project_ball(Vector& b) {
    double norm = b.norm();
    if (norm > 1.0) b /= norm;
}

}  // namespace

double LinearModel::score(const Vector& x) const {
    if (x.size() != b.size()) throw std::invalid_argument("score: dimension mismatch");
    double base = b.dot(x);
    return solver == Solver::dwd ? base + beta : base - beta;
}

int LinearModel::predict(const Vector& x) const {
    return score(x) >= 0.0 ? 1 : -1;
}

double dwd_penalty_from_distance(double d_w, double big_d) {
    if (!(d_w > 0.0) || !(big_d > 0.0)) {
        throw std::invalid_argument("dwd_penalty_from_distance: distances must be positive");
    }
    return 100.0 * (d_w * d_w) / (big_d * big_d);
}

double median_pairwise_distance(const Matrix& x, const std::vector<int>& y) {
    check_inputs(x, y);
    std::vector<int> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) {
        (y[i] == 1 ? pos : neg).push_back(static_cast<int>(i));
    }
    std::vector<double> dists;
    dists.reserve(pos.size() * neg.size());
    for (int i : pos) {
        for (int j : neg) {
            dists.push_back((x.col(i) - x.col(j)).norm());
        }
    }
    std::sort(dists.begin(), dists.end());
    std::size_t n = dists.size();
    if (n % 2 == 1) return dists[n / 2];
    return 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
}

double dwd_objective(const Matrix& x, const std::vector<int>& y, double c,
                     const Vector& b, double beta) {
    double s_star = 1.0 / std::sqrt(c);
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        double margin = y[static_cast<std::size_t>(i)] * (x.col(i).dot(b) + beta);
        double xi = std::max(0.0, s_star - margin);
        double r = margin + xi;
        total += 1.0 / r + c * xi;
    }
    return total;
}

double svm_objective(const Matrix& x, const std::vector<int>& y, double lambda,
                     const Vector& b, double beta) {
    double hinge_sum = 0.0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        double margin = y[static_cast<std::size_t>(i)] * (x.col(i).dot(b) - beta);
        hinge_sum += std::max(0.0, 1.0 - margin);
    }
    return hinge_sum / static_cast<double>(x.cols()) + lambda * b.squaredNorm();
}

LinearModel dwd_fit(const Matrix& x, const std::vector<int>& y, const DwdConfig& config) {
    check_inputs(x, y);
    if (!(config.c > 0.0)) throw std::invalid_argument("dwd_fit: C must be positive");
    if (!(config.tolerance > 0.0)) throw std::invalid_argument("dwd_fit: tolerance must be positive");

    const Eigen::Index d = x.rows();
    const Eigen::Index n = x.cols();
    DwdProblem prob(x, y, config.c);

    // warm start along the class mean difference
    Vector mean_pos = Vector::Zero(d), mean_neg = Vector::Zero(d);
    int n_pos = 0, n_neg = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[static_cast<std::size_t>(i)] == 1) {
            mean_pos += x.col(i);
            ++n_pos;
        } else {
            mean_neg += x.col(i);
            ++n_neg;
        }
    }
    mean_pos /= n_pos;
    mean_neg /= n_neg;
    Vector b = mean_pos - mean_neg;
    double beta = 0.0;
    double b_norm = b.norm();
    if (b_norm > 0.0) {
        b /= b_norm;
        beta = -b.dot(0.5 * (mean_pos + mean_neg));
    } else {
        b.setZero();
    }

    Vector cur_margins = prob.margins(b, beta);
    double f_cur = prob.objective(cur_margins);

    // FISTA with backtracking line search and gradient-based restart
    Vector yb = b;
    double ybeta = beta;
    double t_momentum = 1.0;
    double step_l = 1.0;
    double residual = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iter = 0;

    Vector gb(d), trial_b(d), new_b(d);
    for (; iter < config.max_iterations; ++iter) {
        Vector y_margins = prob.margins(yb, ybeta);
        double f_y = prob.objective(y_margins);
        double gbeta;
        prob.gradient(y_margins, gb, gbeta);

        double new_beta = ybeta;
        double f_new = 0.0;
        for (int bt = 0; bt < 80; ++bt) {
            trial_b = yb - gb / step_l;
            project_ball(trial_b);
            double trial_beta = ybeta - gbeta / step_l;
            Vector trial_margins = prob.margins(trial_b, trial_beta);
            double f_trial = prob.objective(trial_margins);
            double db = (trial_b - yb).squaredNorm() + (trial_beta - ybeta) * (trial_beta - ybeta);
            double quad = f_y + gb.dot(trial_b - yb) + gbeta * (trial_beta - ybeta) + 0.5 * step_l * db;
            if (f_trial <= quad + 1e-12 * std::abs(quad)) {
                new_b = trial_b;
                new_beta = trial_beta;
                f_new = f_trial;
                break;
            }
            step_l *= 2.0;
            if (bt == 79) {
                new_b = yb;
                new_beta = ybeta;
                f_new = f_y;
            }
        }

        // restart momentum when it points against descent
        double momentum_dot = gb.dot(new_b - b) + gbeta * (new_beta - beta);
        double t_next;
        if (momentum_dot > 0.0) {
            t_next = 1.0;
            yb = new_b;
            ybeta = new_beta;
        } else {
            t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
            double gamma = (t_momentum - 1.0) / t_next;
            yb = new_b + gamma * (new_b - b);
            ybeta = new_beta + gamma * (new_beta - beta);
        }

        // gradient mapping residual at the new point
        Vector new_margins = prob.margins(new_b, new_beta);
        double gbeta_new;
        prob.gradient(new_margins, gb, gbeta_new);
        trial_b = new_b - gb / step_l;
        project_ball(trial_b);
        double mapped_beta = new_beta - gbeta_new / step_l;
        double gm = std::sqrt((new_b - trial_b).squaredNorm() +
                              (new_beta - mapped_beta) * (new_beta - mapped_beta)) * step_l;

        b = new_b;
        beta = new_beta;
        f_cur = f_new;
        t_momentum = t_next;
        residual = gm;

        if (gm <= config.tolerance * std::max(1.0, f_cur)) {
            converged = true;
            ++iter;
            break;
        }
        step_l *= 0.9;
    }

    LinearModel model;
    model.b = b;
    model.beta = beta;
    model.objective_value = f_cur;
    model.solver = Solver::dwd;
    model.diagnostics.iterations = iter;
    model.diagnostics.residual = residual;
    model.diagnostics.converged = converged;
    return model;
}

LinearModel svm_fit(const Matrix& x, const std::vector<int>& y, const SvmConfig& config) {
    check_inputs(x, y);
    if (!(config.lambda > 0.0)) throw std::invalid_argument("svm_fit: lambda must be positive");
    if (!(config.tolerance > 0.0)) throw std::invalid_argument("svm_fit: tolerance must be positive");

    const Eigen::Index n = x.cols();
    const double box_c = 1.0 / (2.0 * static_cast<double>(n) * config.lambda);

    Matrix gram = x.transpose() * x;
    Vector yv(n);
    for (Eigen::Index i = 0; i < n; ++i) yv[i] = y[static_cast<std::size_t>(i)];

    Vector alpha = Vector::Zero(n);
    Vector grad = Vector::Constant(n, -1.0);  // f_i = y_i w'x_i - 1 at alpha = 0

    double gap = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iter = 0;
    for (; iter < config.max_iterations; ++iter) {
        // maximal violating pair
        int i_up = -1, i_low = -1;
        double m_up = -std::numeric_limits<double>::infinity();
        double m_low = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < n; ++k) {
            double v = -yv[k] * grad[k];
            bool in_up = (yv[k] > 0 && alpha[k] < box_c) || (yv[k] < 0 && alpha[k] > 0);
            bool in_low = (yv[k] > 0 && alpha[k] > 0) || (yv[k] < 0 && alpha[k] < box_c);
            if (in_up && v > m_up) {
                m_up = v;
                i_up = static_cast<int>(k);
            }
            if (in_low && v < m_low) {
                m_low = v;
                i_low = static_cast<int>(k);
            }
        }
        gap = m_up - m_low;
        if (i_up < 0 || i_low < 0 || gap <= config.tolerance) {
            converged = true;
            break;
        }

        const int i = i_up, j = i_low;
        double quad = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
        if (quad <= 1e-12) quad = 1e-12;
        double t = (-yv[i] * grad[i] + yv[j] * grad[j]) / quad;

        // box limits on the step (alpha_i moves by y_i t, alpha_j by -y_j t)
        double t_hi = std::numeric_limits<double>::infinity();
        double t_lo = -std::numeric_limits<double>::infinity();
        if (yv[i] > 0) {
            t_lo = std::max(t_lo, -alpha[i]);
            t_hi = std::min(t_hi, box_c - alpha[i]);
        } else {
            t_lo = std::max(t_lo, alpha[i] - box_c);
            t_hi = std::min(t_hi, alpha[i]);
        }
        if (yv[j] > 0) {
            t_lo = std::max(t_lo, alpha[j] - box_c);
            t_hi = std::min(t_hi, alpha[j]);
        } else {
            t_lo = std::max(t_lo, -alpha[j]);
            t_hi = std::min(t_hi, box_c - alpha[j]);
        }
        t = std::clamp(t, t_lo, t_hi);
        if (t == 0.0) break;  // numerically boxed in

        double delta_i = yv[i] * t;
        double delta_j = -yv[j] * t;
        alpha[i] += delta_i;
        alpha[j] += delta_j;
        grad += yv.cwiseProduct(delta_i * yv[i] * gram.col(i) + delta_j * yv[j] * gram.col(j));
    }

    Vector b = x * alpha.cwiseProduct(yv);

    // exact intercept: the hinge average is piecewise linear in beta with
    // breakpoints x_i'b - y_i, all slope jumps +1/n; the minimum sits after
    // the first n_neg breakpoints.
    std::vector<double> breakpoints(static_cast<std::size_t>(n));
    int n_neg = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        breakpoints[static_cast<std::size_t>(i)] = x.col(i).dot(b) - yv[i];
        if (yv[i] < 0) ++n_neg;
    }
    std::sort(breakpoints.begin(), breakpoints.end());
    // both classes guaranteed, so 1 <= n_neg <= n-1
    double beta = 0.5 * (breakpoints[static_cast<std::size_t>(n_neg - 1)] +
                         breakpoints[static_cast<std::size_t>(n_neg)]);

    LinearModel model;
    model.b = b;
    model.beta = beta;
    model.objective_value = svm_objective(x, y, config.lambda, b, beta);
    model.solver = Solver::svm;
    model.diagnostics.iterations = iter;
    model.diagnostics.residual = gap;
    model.diagnostics.converged = converged;
    return model;
}

}  // namespace mwclass
