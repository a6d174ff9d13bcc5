#include "urs/gem.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "urs/eval.hpp"

namespace urs {

namespace {

double logistic_second_derivative(double x) {
    const double s = logistic(x);
    return s * (1.0 - s) * (1.0 - 2.0 * s);
}

double log_det_spd(const Mat& m, const char* who) {
    Eigen::LLT<Mat> llt(symmetrized(m));
    if (llt.info() != Eigen::Success) throw DomainError(std::string(who) + ": matrix not positive definite");
    double out = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        out += 2.0 * std::log(llt.matrixL()(i, i));
    return out;
}

Mat spd_inverse(const Mat& m) {
    return solve_spd(m, Mat::Identity(m.rows(), m.cols()));
}

/// Gradient wrt W of tr(W^{-1} A) + a^T W^{-1} b, full-matrix convention.
Mat winv_pattern_grad(const Mat& Winv, const Mat& A, const Vec& a, const Vec& b) {
    return -Winv * (A.transpose() + a * b.transpose()) * Winv;
}

/// Reverse-mode step through L = chol(S): given dF/dL, return dF/dS
/// (S symmetric, full-matrix convention).
Mat chol_rev(const Mat& L, const Mat& Lbar) {
    const Eigen::Index n = L.rows();
    Mat P = L.transpose() * Lbar;
    Mat Phi = Mat(P.triangularView<Eigen::StrictlyLower>());
    Phi += (0.5 * P.diagonal()).asDiagonal();
    // S_raw = L^{-T} Phi L^{-1}
    Mat X = L.transpose().triangularView<Eigen::Upper>().solve(Phi);
    Mat Y = L.transpose()
                .triangularView<Eigen::Upper>()
                .solve(X.transpose())
                .transpose();
    (void)n;
    return 0.5 * (Y + Y.transpose());
}

struct ScaledSigma {
    Mat points;  // (2n+1) x n
    Vec wm, wc;
    Mat root;  // lower factor of (n + lambda) * cov
    double scale = 0.0;
    bool root_pd = false;
};

ScaledSigma make_sigma(const Vec& mean, const Mat& cov, const UtConfig& ut) {
    const Eigen::Index n = mean.size();
    ScaledSigma s;
    s.scale = static_cast<double>(n) + ut.lambda(n);
    s.root = psd_sqrt(s.scale * cov);
    s.root_pd = s.root.diagonal().minCoeff() > 0.0;
    s.points.resize(2 * n + 1, n);
    s.points.row(0) = mean.transpose();
    for (Eigen::Index j = 0; j < n; ++j) {
        s.points.row(1 + j) = (mean + s.root.col(j)).transpose();
        s.points.row(1 + n + j) = (mean - s.root.col(j)).transpose();
    }
    s.wm.setConstant(2 * n + 1, 1.0 / (2.0 * s.scale));
    s.wc = s.wm;
    s.wm(0) = ut.lambda(n) / s.scale;
    s.wc(0) = s.wm(0) + (1.0 - ut.alpha * ut.alpha + ut.beta);
    return s;
}

struct ParamGradAccum {
    Mat dG, dG_in, dW;
    Vec db;
    double dlogv = 0.0;

    explicit ParamGradAccum(Eigen::Index p, Eigen::Index m)
        : dG(Mat::Zero(p, p)),
          dG_in(Mat::Zero(p, m)),
          dW(Mat::Zero(p, p)),
          db(Vec::Zero(p)) {}
};

/// Forward + optional reverse pass of the two-stage joint-UT term ii.
/// coeff multiplies the contribution accumulated into grad.
double term_ii_joint_ut_impl(const Gaussian& prev, const Gaussian& cur,
                             const Mat& cross, const ReservoirParams& params,
                             const Vec& u_squared, const Mat& Winv,
                             const UtConfig& ut, ParamGradAccum* grad,
                             double coeff) {
    const Eigen::Index p = params.state_dim();
    const Vec cvec = params.input_gain * (params.G_in * u_squared) + params.b;

    // Exact affine stage.
    const Vec mu1 = params.G * prev.mean() + cvec;
    const Mat S11 = params.G * prev.cov() * params.G.transpose();
    const Mat S12 = params.G * cross;

    Vec mu(2 * p);
    mu << mu1, cur.mean();
    Mat S(2 * p, 2 * p);
    S.topLeftCorner(p, p) = S11;
    S.topRightCorner(p, p) = S12;
    S.bottomLeftCorner(p, p) = S12.transpose();
    S.bottomRightCorner(p, p) = cur.cov();

    const ScaledSigma sig = make_sigma(mu, symmetrized(S), ut);
    const Eigen::Index n_pts = sig.points.rows();

    Mat T1(n_pts, p), T2(n_pts, p);
    for (Eigen::Index k = 0; k < n_pts; ++k) {
        T1.row(k) = logistic(Vec(sig.points.row(k).head(p).transpose())).transpose();
        T2.row(k) = sig.points.row(k).tail(p);
    }
    const Vec xi_mu = T1.transpose() * sig.wm;
    const Vec m2 = T2.transpose() * sig.wm;
    Mat cross_out = Mat::Zero(p, p);  // Cov(Xi(theta_{t-1}), theta_t)
    for (Eigen::Index k = 0; k < n_pts; ++k) {
        const Vec a = T1.row(k).transpose() - xi_mu;
        const Vec b = T2.row(k).transpose() - m2;
        cross_out.noalias() += sig.wc(k) * a * b.transpose();
    }

    const double value = (Winv * cross_out.transpose()).trace() +
                         cur.mean().dot(Winv * xi_mu);
    if (!grad) return value;

    // Reverse pass.
    Vec d_xi_mu = Winv * cur.mean();
    const Mat d_cross = Winv;  // d tr(Winv X^T) / dX

    Mat dT1 = Mat::Zero(n_pts, p), dT2 = Mat::Zero(n_pts, p);
    Vec d_m2 = Vec::Zero(p);
    for (Eigen::Index k = 0; k < n_pts; ++k) {
        const Vec a = T1.row(k).transpose() - xi_mu;
        const Vec b = T2.row(k).transpose() - m2;
        const Vec da = sig.wc(k) * (d_cross * b);
        const Vec db = sig.wc(k) * (d_cross.transpose() * a);
        dT1.row(k) += da.transpose();
        dT2.row(k) += db.transpose();
        d_xi_mu -= da;
        d_m2 -= db;
    }
    for (Eigen::Index k = 0; k < n_pts; ++k) {
        dT1.row(k) += sig.wm(k) * d_xi_mu.transpose();
        dT2.row(k) += sig.wm(k) * d_m2.transpose();
    }

    Mat dPoints(n_pts, 2 * p);
    for (Eigen::Index k = 0; k < n_pts; ++k) {
        const Vec z = sig.points.row(k).head(p).transpose();
        dPoints.row(k).head(p) =
            (logistic_derivative(z).cwiseProduct(dT1.row(k).transpose()))
                .transpose();
        dPoints.row(k).tail(p) = dT2.row(k);
    }

    Vec d_mu = dPoints.colwise().sum().transpose();
    Mat dS;
    if (sig.root_pd) {
        Mat dRoot = Mat::Zero(2 * p, 2 * p);
        for (Eigen::Index j = 0; j < 2 * p; ++j)
            dRoot.col(j) = (dPoints.row(1 + j) - dPoints.row(1 + 2 * p + j))
                               .transpose();
        dS = sig.scale * chol_rev(sig.root, dRoot);
    } else {
        // Degenerate covariance factor: treat the sigma spread as locally
        // constant. Line search still validates true objective values.
        dS = Mat::Zero(2 * p, 2 * p);
    }

    const Mat dS11 = dS.topLeftCorner(p, p);
    const Mat dS12 = dS.topRightCorner(p, p) + dS.bottomLeftCorner(p, p).transpose();
    const Vec d_mu1 = d_mu.head(p);

    Mat dA = d_mu1 * prev.mean().transpose();
    dA += (dS11 + dS11.transpose()) * params.G * prev.cov();
    dA += dS12 * cross.transpose();

    grad->dG += coeff * dA;
    grad->dG_in += coeff * params.input_gain * d_mu1 * u_squared.transpose();
    grad->db += coeff * d_mu1;
    grad->dW +=
        coeff * winv_pattern_grad(Winv, cross_out.transpose(), cur.mean(), xi_mu);
    return value;
}

/// Forward + optional reverse pass of the Taylor-linearized term ii.
double term_ii_taylor_impl(const Gaussian& prev, const Gaussian& cur,
                           const Mat& cross, const ReservoirParams& params,
                           const Vec& u_squared, const Mat& Winv,
                           ParamGradAccum* grad, double coeff) {
    const Vec cvec = params.input_gain * (params.G_in * u_squared) + params.b;
    const Vec z = params.G * prev.mean() + cvec;
    const Vec tz = logistic(z);
    const Vec N = logistic_derivative(z);
    const Mat B = Winv * cross.transpose();  // Winv * Sigma*_{t,t-1}
    const Mat D = B * params.G.transpose();

    const double value = cur.mean().dot(Winv * tz) + N.dot(D.diagonal());
    if (!grad) return value;

    Vec dz = logistic_derivative(z).cwiseProduct(Winv * cur.mean());
    Vec eta_prime(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i)
        eta_prime(i) = logistic_second_derivative(z(i));
    dz += eta_prime.cwiseProduct(D.diagonal());

    grad->dG += coeff * (dz * prev.mean().transpose() + N.asDiagonal() * B);
    grad->dG_in += coeff * params.input_gain * dz * u_squared.transpose();
    grad->db += coeff * dz;
    const Mat A_pat = cross.transpose() * params.G.transpose() * Mat(N.asDiagonal());
    grad->dW += coeff * winv_pattern_grad(Winv, A_pat, cur.mean(), tz);
    return value;
}

}  // namespace

// ----------------------------------------------------------------------
// Spec-facing operations.

double log_likelihood(const std::vector<Vec>& traj_states,
                      const ReservoirParams& params, const SeriesData& data) {
    data.validate();
    const auto T = data.size();
    require_shape(static_cast<Eigen::Index>(traj_states.size()) == T + 1,
                  "log_likelihood: need T+1 states for T observations");
    const Mat Winv = spd_inverse(params.W);
    const double logdet_w = log_det_spd(params.W, "log_likelihood");
    if (!(params.v > 0.0)) throw DomainError("log_likelihood: v must be positive");

    double quad_state = 0.0, quad_obs = 0.0;
    Eigen::Index obs_total = 0;
    for (Eigen::Index t = 1; t <= T; ++t) {
        const Vec pred = evolve(params, traj_states[t - 1], data.inputs[t - 1]);
        const Vec resid = traj_states[t] - pred;
        quad_state += resid.dot(Winv * resid);

        const auto& batch = data.observations[t - 1];
        const Vec yhat = pricing_measurement(batch.specs)(traj_states[t]);
        quad_obs += (batch.prices - yhat).squaredNorm();
        obs_total += batch.size();
    }
    return -0.5 * static_cast<double>(T) * logdet_w -
           0.5 * static_cast<double>(obs_total) * std::log(params.v) -
           0.5 * quad_state - quad_obs / (2.0 * params.v);
}

double term_ii_joint_ut(const JointGaussian& pair, const ReservoirParams& params,
                        const Vec& u, const Mat& Winv, const UtConfig& cfg) {
    const Vec c = params.input_gain * (params.G_in * u.cwiseProduct(u)) + params.b;
    const JointGaussian out = joint_gaussian_from_two_stage(
        pair, params.G, c, [](const Vec& x) { return logistic(x); }, cfg);
    return (Winv * out.cross.transpose()).trace() +
           pair.second.mean().dot(Winv * out.first.mean());
}

double term_ii_taylor(const JointGaussian& pair, const ReservoirParams& params,
                      const Vec& u, const Mat& Winv) {
    return term_ii_taylor_impl(pair.first, pair.second, pair.cross, params,
                               u.cwiseProduct(u), Winv, nullptr, 1.0);
}

// ----------------------------------------------------------------------
// E-step context.

EStepContext::EStepContext(const SmoothedTrajectory& traj, const SeriesData& data,
                           const UtConfig& ut)
    : ut_(ut) {
    data.validate();
    const auto T = data.size();
    if (static_cast<Eigen::Index>(traj.marginals.size()) != T + 1)
        throw ContractError("EStepContext: trajectory length does not match data");
    if (static_cast<Eigen::Index>(traj.cross.size()) != T)
        throw ContractError("EStepContext: smoothed cross-covariances missing");

    steps_.reserve(T);
    for (Eigen::Index t = 1; t <= T; ++t) {
        Step step;
        step.prev = traj.marginals[t - 1];
        step.cur = traj.marginals[t];
        step.cross = traj.cross[t - 1];
        step.prev_sigma = sigma_points(step.prev, ut);
        const Vec& u = data.inputs[t - 1];
        step.u_squared = u.cwiseProduct(u);
        const auto& batch = data.observations[t - 1];
        step.prices = batch.prices;

        // Measurement UT at the smoothed scalar readout; independent of
        // the learnable parameters, so computed once.
        const Gaussian sigma_belief = readout_gaussian(step.cur);
        const JointGaussian psi = augmented_transform(
            sigma_belief, pricing_measurement(batch.specs), ut);
        step.psi_mu = psi.second.mean();
        step.psi_var = psi.second.cov().diagonal();

        step.meas_sum = 0.0;
        for (Eigen::Index i = 0; i < batch.size(); ++i) {
            const double y = step.prices(i);
            step.meas_sum += y * y - 2.0 * y * step.psi_mu(i) +
                             (step.psi_mu(i) * step.psi_mu(i) + step.psi_var(i));
        }
        obs_total_ += batch.size();
        steps_.push_back(std::move(step));
    }
}

namespace {

struct EvalOutput {
    double smooth_loss = 0.0;
    EStepCache cache;
};

}  // namespace

struct EStepEval {
    static EvalOutput run(const EStepContext& ctx, const ReservoirParams& params,
                          TermIiMethod method, ParamGradAccum* grad,
                          bool want_cache) {
        const auto T = static_cast<Eigen::Index>(ctx.steps_.size());
        const Mat Winv = spd_inverse(params.W);
        const double logdet_w = log_det_spd(params.W, "expected_loglik");
        if (!(params.v > 0.0))
            throw DomainError("expected_loglik: v must be positive");

        EvalOutput out;
        if (want_cache) {
            out.cache.per_step.reserve(T);
            out.cache.xi_mu.reserve(T);
            out.cache.xi_sigma.reserve(T);
            out.cache.psi_mu.reserve(T);
            out.cache.psi_var.reserve(T);
        }

        double state_quad = 0.0, meas_total = 0.0;
        for (const auto& step : ctx.steps_) {
            const Eigen::Index p = params.state_dim();
            const Vec cvec =
                params.input_gain * (params.G_in * step.u_squared) + params.b;

            // term i
            const double term_i = (Winv * step.cur.cov()).trace() +
                                  step.cur.mean().dot(Winv * step.cur.mean());
            if (grad)
                grad->dW += 0.5 * winv_pattern_grad(Winv, step.cur.cov(),
                                                    step.cur.mean(), step.cur.mean());

            // term iii over the fixed sigma points of theta_{t-1}|D_T
            const auto& sp = step.prev_sigma;
            const Eigen::Index n_pts = sp.count();
            Mat Q(n_pts, p);
            Mat Z(n_pts, p);
            for (Eigen::Index k = 0; k < n_pts; ++k) {
                const Vec z = params.G * sp.points.row(k).transpose() + cvec;
                Z.row(k) = z.transpose();
                Q.row(k) = logistic(z).transpose();
            }
            const Vec xi_mu = Q.transpose() * sp.mean_weights;
            Mat xi_sigma = Mat::Zero(p, p);
            for (Eigen::Index k = 0; k < n_pts; ++k) {
                const Vec d = Q.row(k).transpose() - xi_mu;
                xi_sigma.noalias() += sp.cov_weights(k) * d * d.transpose();
            }
            const double term_iii =
                (Winv * xi_sigma).trace() + xi_mu.dot(Winv * xi_mu);

            if (grad) {
                Vec d_xi_mu = Winv * xi_mu;  // coefficient 1/2 * 2
                Mat dQ = Mat::Zero(n_pts, p);
                for (Eigen::Index k = 0; k < n_pts; ++k) {
                    const Vec d = Q.row(k).transpose() - xi_mu;
                    const Vec dd = sp.cov_weights(k) * (Winv * d);
                    dQ.row(k) += dd.transpose();
                    d_xi_mu -= dd;
                }
                for (Eigen::Index k = 0; k < n_pts; ++k)
                    dQ.row(k) += sp.mean_weights(k) * d_xi_mu.transpose();
                Vec dz_sum = Vec::Zero(p);
                for (Eigen::Index k = 0; k < n_pts; ++k) {
                    const Vec dz = logistic_derivative(Vec(Z.row(k).transpose()))
                                       .cwiseProduct(dQ.row(k).transpose());
                    grad->dG += 0.5 * dz * sp.points.row(k);
                    dz_sum += dz;
                }
                grad->dG_in +=
                    0.5 * params.input_gain * dz_sum * step.u_squared.transpose();
                grad->db += 0.5 * dz_sum;
                grad->dW +=
                    0.5 * winv_pattern_grad(Winv, xi_sigma, xi_mu, xi_mu);
            }

            // term ii
            double term_ii;
            if (method == TermIiMethod::joint_ut) {
                term_ii = term_ii_joint_ut_impl(step.prev, step.cur, step.cross,
                                                params, step.u_squared, Winv,
                                                ctx.ut_, grad, -1.0);
            } else {
                term_ii = term_ii_taylor_impl(step.prev, step.cur, step.cross,
                                              params, step.u_squared, Winv, grad,
                                              -1.0);
            }

            state_quad += term_i - 2.0 * term_ii + term_iii;
            meas_total += step.meas_sum;

            if (want_cache) {
                EStepTerms terms;
                terms.term_i = term_i;
                terms.term_ii = term_ii;
                terms.term_iii = term_iii;
                terms.term_iv = step.psi_mu;
                terms.term_v = Vec(step.psi_mu.array().square() +
                                   step.psi_var.array());
                out.cache.per_step.push_back(std::move(terms));
                out.cache.xi_mu.push_back(xi_mu);
                out.cache.xi_sigma.push_back(xi_sigma);
                out.cache.psi_mu.push_back(step.psi_mu);
                out.cache.psi_var.push_back(step.psi_var);
            }
        }

        out.smooth_loss = 0.5 * static_cast<double>(T) * logdet_w +
                          0.5 * static_cast<double>(ctx.obs_total_) *
                              std::log(params.v) +
                          0.5 * state_quad + meas_total / (2.0 * params.v);
        if (grad) {
            grad->dW += 0.5 * static_cast<double>(T) * Winv;
            grad->dlogv = 0.5 * static_cast<double>(ctx.obs_total_) -
                          meas_total / (2.0 * params.v);
        }
        return out;
    }
};

double EStepContext::smooth_loss(const ReservoirParams& params,
                                 TermIiMethod method) const {
    return EStepEval::run(*this, params, method, nullptr, false).smooth_loss;
}

std::pair<double, EStepCache> EStepContext::expected_loglik(
    const ReservoirParams& params, TermIiMethod method) const {
    EvalOutput out = EStepEval::run(*this, params, method, nullptr, true);
    return {-out.smooth_loss, std::move(out.cache)};
}

std::pair<double, Vec> EStepContext::smooth_loss_grad(
    const ReservoirParams& params, TermIiMethod method) const {
    ParamGradAccum accum(params.state_dim(), params.input_dim());
    const EvalOutput out = EStepEval::run(*this, params, method, &accum, false);

    // Convert dW to the Cholesky-factor parameterization and dv to log.
    Eigen::LLT<Mat> llt(symmetrized(params.W));
    if (llt.info() != Eigen::Success)
        throw NumericalError("smooth_loss_grad: W has no Cholesky factor");
    const Mat L = llt.matrixL();
    const Mat dL_full = (accum.dW + accum.dW.transpose()) * L;

    const Eigen::Index p = params.state_dim();
    const Eigen::Index m = params.input_dim();
    Vec packed(p * p + p * m + p + p * (p + 1) / 2 + 1);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) packed(at++) = accum.dG(i, j);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < m; ++j) packed(at++) = accum.dG_in(i, j);
    for (Eigen::Index i = 0; i < p; ++i) packed(at++) = accum.db(i);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) packed(at++) = dL_full(i, j);
    packed(at++) = accum.dlogv;
    return {out.smooth_loss, packed};
}

std::pair<double, EStepCache> expected_loglik(const SmoothedTrajectory& traj,
                                              const ReservoirParams& params,
                                              const SeriesData& data,
                                              const GemConfig& cfg) {
    const EStepContext ctx(traj, data, cfg.ut);
    return ctx.expected_loglik(params, cfg.term_ii_method);
}

double loss(const SmoothedTrajectory& traj, const ReservoirParams& params,
            const SeriesData& data, const GemConfig& cfg) {
    const EStepContext ctx(traj, data, cfg.ut);
    const double smooth = ctx.smooth_loss(params, cfg.term_ii_method);
    return smooth + cfg.lasso_alpha * (params.G.cwiseAbs().sum() +
                                       params.G_in.cwiseAbs().sum());
}

// ----------------------------------------------------------------------
// Parameter packing.

Vec pack_params(const ReservoirParams& params) {
    const Eigen::Index p = params.state_dim();
    const Eigen::Index m = params.input_dim();
    Eigen::LLT<Mat> llt(symmetrized(params.W));
    if (llt.info() != Eigen::Success)
        throw NumericalError("pack_params: W has no Cholesky factor");
    const Mat L = llt.matrixL();

    Vec packed(p * p + p * m + p + p * (p + 1) / 2 + 1);
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) packed(at++) = params.G(i, j);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < m; ++j) packed(at++) = params.G_in(i, j);
    for (Eigen::Index i = 0; i < p; ++i) packed(at++) = params.b(i);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) packed(at++) = L(i, j);
    packed(at++) = std::log(params.v);
    return packed;
}

ReservoirParams unpack_params(const Vec& packed, Eigen::Index p, Eigen::Index m,
                              const ReservoirParams& like) {
    ReservoirParams params = like;
    Eigen::Index at = 0;
    params.G.resize(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) params.G(i, j) = packed(at++);
    params.G_in.resize(p, m);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < m; ++j) params.G_in(i, j) = packed(at++);
    params.b.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) params.b(i) = packed(at++);
    Mat L = Mat::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) L(i, j) = packed(at++);
    // Column sign flips leave L L^T unchanged; keep the factor canonical.
    for (Eigen::Index j = 0; j < p; ++j)
        if (L(j, j) < 0.0) L.col(j) = -L.col(j);
    params.W = L * L.transpose();
    params.v = std::exp(packed(at++));
    return params;
}

// ----------------------------------------------------------------------
// Validation error and the outer GEM loop.

double validation_error(const ReservoirParams& params,
                        const Gaussian& trained_belief,
                        const SeriesData& validation, const UtConfig& ut) {
    validation.validate();
    if (validation.size() == 0) return 0.0;
    Gaussian belief = trained_belief;
    double total = 0.0;
    for (Eigen::Index t = 0; t < validation.size(); ++t) {
        const auto& batch = validation.observations[t];
        auto [prior, cross] = predict(params, belief, validation.inputs[t], ut);
        (void)cross;
        const Gaussian pred =
            unscented_transform(prior, pricing_measurement(batch.specs), ut);
        total += relative_error_step(pred.mean(), batch.prices);
        belief = update(prior, batch, params.v, ut).posterior;
    }
    return total / static_cast<double>(validation.size());
}

namespace {

struct ProxPoint {
    Vec packed;
    ReservoirParams params;
};

ProxPoint prox_step(const Vec& packed, const Vec& grad, double step, double alpha,
                    Eigen::Index p, Eigen::Index m, const ReservoirParams& like) {
    Vec cand = packed - step * grad;
    // Soft-threshold only the G and G_in blocks.
    const Eigen::Index penalized = p * p + p * m;
    const double threshold = step * alpha;
    for (Eigen::Index i = 0; i < penalized; ++i) {
        const double x = cand(i);
        cand(i) = (x > threshold) ? x - threshold
                                  : ((x < -threshold) ? x + threshold : 0.0);
    }
    ProxPoint out;
    out.params = unpack_params(cand, p, m, like);
    out.packed = std::move(cand);
    return out;
}

double l1_penalty(const ReservoirParams& params, double alpha) {
    return alpha * (params.G.cwiseAbs().sum() + params.G_in.cwiseAbs().sum());
}

}  // namespace

std::pair<ReservoirParams, GemReport> gem_fit(const SeriesData& data,
                                              const SplitSpec& split,
                                              const ReservoirParams& init_params,
                                              const GemConfig& cfg) {
    data.validate();
    split.validate(data.size());
    const SeriesData train = data.slice(0, split.train);
    const SeriesData valid = data.slice(split.train, split.train + split.validation);

    const Eigen::Index p = init_params.state_dim();
    const Eigen::Index m = init_params.input_dim();
    const Gaussian initial_belief(
        Vec::Constant(p, cfg.initial_state_mean),
        cfg.initial_state_var * Mat::Identity(p, p));

    ReservoirParams params = init_params;
    ReservoirParams best = params;
    GemReport report;
    report.method = cfg.term_ii_method;
    double best_val = std::numeric_limits<double>::infinity();
    int stall = 0;
    double step = cfg.initial_step;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const FilterRun run =
            forward_filter(params, initial_belief, train.inputs,
                           train.observations, cfg.ut);
        const SmoothedTrajectory traj = rts_smooth(run, cfg.ut);
        const EStepContext ctx(traj, train, cfg.ut);

        const auto [f0, grad] = ctx.smooth_loss_grad(params, cfg.term_ii_method);
        const double r0 = f0 + l1_penalty(params, cfg.lasso_alpha);
        if (!std::isfinite(r0)) {
            report.aborted_non_finite = true;
            break;
        }
        const Vec packed = pack_params(params);

        GemIterationRecord rec;
        rec.regularized_loss = r0;
        rec.smooth_loss = f0;

        bool accepted = false;
        ProxPoint cand;
        double f1 = 0.0;
        for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
            cand = prox_step(packed, grad, step, cfg.lasso_alpha, p, m, params);
            const Vec delta = cand.packed - packed;
            if (delta.cwiseAbs().maxCoeff() == 0.0) break;  // fixed point
            f1 = ctx.smooth_loss(cand.params, cfg.term_ii_method);
            const double model =
                f0 + grad.dot(delta) + delta.squaredNorm() / (2.0 * step);
            if (std::isfinite(f1) && f1 <= model + 1e-10 * (1.0 + std::abs(f0))) {
                accepted = true;
                break;
            }
            step *= cfg.backtrack_factor;
        }

        if (accepted) {
            params = cand.params;
            rec.accepted = true;
            rec.step_size = step;
            rec.regularized_loss = f1 + l1_penalty(params, cfg.lasso_alpha);
            rec.smooth_loss = f1;
            step = std::min(step * cfg.step_grow, 1e3);
        }
        rec.g_l1 = params.G.cwiseAbs().sum();
        rec.g_in_l1 = params.G_in.cwiseAbs().sum();

        // Validation with the updated parameters.
        const FilterRun val_run =
            forward_filter(params, initial_belief, train.inputs,
                           train.observations, cfg.ut);
        const Gaussian& trained_belief = val_run.states.empty()
                                             ? val_run.initial
                                             : val_run.states.back().posterior;
        rec.validation_error =
            validation_error(params, trained_belief, valid, cfg.ut);
        report.iterations.push_back(rec);

        if (rec.validation_error <
            best_val * (1.0 - cfg.min_validation_improvement)) {
            best_val = rec.validation_error;
            best = params;
            report.best_iteration = iter;
            stall = 0;
        } else {
            ++stall;
        }
        if (!accepted || stall >= cfg.validation_patience) break;
    }

    if (!std::isfinite(best_val)) best = params;
    report.best_validation_error = best_val;
    return {best, report};
}

}  // namespace urs
