#pragma once

#include "covshift/numerics.hpp"
#include "covshift/representer.hpp"
#include "covshift/types.hpp"
#include "covshift/weighted_fit.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covshift {

/// Candidate approximants over a lambda grid, filtered by the norm threshold
/// gamma_l: candidates whose RKHS norm exceeds it are discarded up front.
struct CandidateSet {
    std::vector<FitResult> candidates;   // retained, in grid order
    std::vector<double> lambdas;         // matching lambda_k
    double gamma_l = 0.0;
    std::vector<Index> discarded;        // indices into the original grid
    std::vector<double> all_norms;       // norms in original grid order
    std::vector<double> all_lambdas;     // original grid
};

enum class SolverNote { direct, jittered, pseudo_inverse };

inline std::string solver_note_name(SolverNote n) {
    switch (n) {
        case SolverNote::direct:
            return "direct";
        case SolverNote::jittered:
            return "jittered";
        case SolverNote::pseudo_inverse:
            return "pseudo_inverse";
    }
    return "?";
}

struct AggregateResult {
    Vector coefficients;           // one per retained candidate
    RepresenterFunction function;  // the linear combination
    Matrix gram_tilde;
    Vector g_tilde;
    SolverNote solver_note = SolverNote::direct;
};

/// Default threshold: ten times the largest norm among the three largest-lambda
/// fits, which never discards well-regularized candidates.
inline double default_gamma_l(const std::vector<double>& norms_by_descending_lambda) {
    double m = 0.0;
    for (std::size_t i = 0; i < norms_by_descending_lambda.size() && i < 3; ++i) {
        m = std::max(m, norms_by_descending_lambda[i]);
    }
    return 10.0 * m;
}

/// Fit one candidate per grid lambda (reusing a single decomposition) and drop
/// the ones whose norm exceeds gamma_l. gamma_l <= 0 with all candidates
/// discarded is reported as a configuration error listing the norms.
inline CandidateSet build_candidates(const FitContext& ctx, const FilterSpec& filter,
                                     const std::vector<double>& lambda_grid, double gamma_l) {
    if (lambda_grid.empty()) throw config_error("build_candidates: empty lambda grid");
    CandidateSet set;
    set.gamma_l = gamma_l;
    set.all_lambdas = lambda_grid;
    std::vector<FitResult> fits;
    fits.reserve(lambda_grid.size());
    for (double lambda : lambda_grid) {
        fits.push_back(ctx.fit(filter, lambda));
        set.all_norms.push_back(fits.back().rkhs_norm);
    }
    for (std::size_t k = 0; k < fits.size(); ++k) {
        if (fits[k].rkhs_norm <= gamma_l) {
            set.candidates.push_back(std::move(fits[k]));
            set.lambdas.push_back(lambda_grid[k]);
        } else {
            set.discarded.push_back(static_cast<Index>(k));
        }
    }
    if (set.candidates.empty()) {
        std::ostringstream os;
        os << "build_candidates: every candidate exceeds gamma_l = " << gamma_l << "; norms:";
        for (double n : set.all_norms) os << ' ' << n;
        throw config_error(os.str());
    }
    return set;
}

inline CandidateSet build_candidates(const SampleSet& train, const WeightVector& weights,
                                     const KernelSpec& kernel, const FilterSpec& filter,
                                     const std::vector<double>& lambda_grid, double gamma_l) {
    return build_candidates(FitContext(train, weights, kernel), filter, lambda_grid, gamma_l);
}

/// Candidate values at a point set, one column per candidate.
inline Matrix candidate_values(const CandidateSet& cands, const SampleSet& pts) {
    Matrix f(pts.size(), static_cast<Index>(cands.candidates.size()));
    for (std::size_t k = 0; k < cands.candidates.size(); ++k) {
        f.col(static_cast<Index>(k)) = evaluate(cands.candidates[k].function, pts.points);
    }
    return f;
}

/// Empirical target Gram of the candidates:
/// G(k,u) = (1/m) sum_j f_k(x'_j) f_u(x'_j).
inline Matrix gram_tilde(const CandidateSet& cands, const SampleSet& target_unlabeled) {
    if (target_unlabeled.size() < 1) {
        throw std::invalid_argument("gram_tilde: empty target sample");
    }
    const Matrix f = candidate_values(cands, target_unlabeled);
    return f.transpose() * f / static_cast<double>(target_unlabeled.size());
}

/// Weighted empirical cross moments:
/// g(k) = (1/n) sum_i beta_i y_i f_k(x_i), beta_i >= 0 (clipped upstream).
inline Vector g_tilde(const CandidateSet& cands, const SampleSet& train_labeled,
                      const Vector& beta_values) {
    if (!train_labeled.labels) throw std::invalid_argument("g_tilde: training set has no labels");
    if (beta_values.size() != train_labeled.size()) {
        throw std::invalid_argument("g_tilde: weight count does not match training size");
    }
    const Matrix f = candidate_values(cands, train_labeled);
    const Vector w = beta_values.cwiseProduct(*train_labeled.labels);
    return f.transpose() * w / static_cast<double>(train_labeled.size());
}

/// Solve G c = g for the combination weights. Well-conditioned systems go
/// through a direct symmetric solve; a condition number above 1e12 (or a
/// failed solve) adds jitter eps I with eps = 1e-10 trace(G)/l and retries
/// once; if that still leaves the system effectively singular, the minimum
/// norm least-squares solution is used. The combined function keeps every
/// candidate anchor block, so its evaluation is exact.
inline AggregateResult aggregate(const CandidateSet& cands, const Matrix& gram, const Vector& g) {
    const Index l = static_cast<Index>(cands.candidates.size());
    if (gram.rows() != l || gram.cols() != l || g.size() != l) {
        throw std::invalid_argument("aggregate: dimension mismatch");
    }
    AggregateResult out;
    out.gram_tilde = gram;
    out.g_tilde = g;

    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Vector evals = es.eigenvalues().cwiseMax(0.0);
    const double emax = evals.maxCoeff();
    const double emin = evals.minCoeff();

    const double cond_limit = 1e12;
    auto solve_spd = [&](const Matrix& m) { return Vector(m.ldlt().solve(g)); };

    if (emax > 0 && emin > emax / cond_limit) {
        out.coefficients = solve_spd(gram);
        out.solver_note = SolverNote::direct;
    } else {
        const double eps = 1e-10 * gram.trace() / static_cast<double>(l);
        if (eps > 0 && (emax + eps) / (emin + eps) < cond_limit) {
            Matrix jittered = gram;
            jittered.diagonal().array() += eps;
            out.coefficients = solve_spd(jittered);
            out.solver_note = SolverNote::jittered;
        } else {
            // Minimum-norm least squares through the eigendecomposition.
            const double cutoff = emax > 0 ? emax * 1e-13 : 0.0;
            Vector inv = Vector::Zero(l);
            for (Index i = 0; i < l; ++i) {
                if (evals(i) > cutoff) inv(i) = 1.0 / evals(i);
            }
            out.coefficients =
                es.eigenvectors() * inv.cwiseProduct(es.eigenvectors().transpose() * g);
            out.solver_note = SolverNote::pseudo_inverse;
        }
    }

    // Concatenate the candidate anchor blocks with rescaled coefficients.
    Index total = 0;
    Index d = 0;
    for (const auto& c : cands.candidates) {
        total += c.function.source_anchors.rows();
        d = c.function.source_anchors.cols();
    }
    RepresenterFunction combined;
    combined.kernel = cands.candidates.front().function.kernel;
    combined.source_anchors.resize(total, d);
    combined.source_coeffs.resize(total);
    Index at = 0;
    for (Index k = 0; k < l; ++k) {
        const auto& fk = cands.candidates[static_cast<std::size_t>(k)].function;
        const Index nk = fk.source_anchors.rows();
        combined.source_anchors.middleRows(at, nk) = fk.source_anchors;
        // Stored convention divides by the total anchor count; undo the per-candidate
        // normalization so that combined = sum_k c_k * candidate_k pointwise.
        combined.source_coeffs.segment(at, nk) =
            out.coefficients(k) * fk.source_coeffs * (static_cast<double>(total) / static_cast<double>(nk));
        at += nk;
    }
    out.function = std::move(combined);
    return out;
}

inline AggregateResult aggregate(const CandidateSet& cands, const SampleSet& target_unlabeled,
                                 const SampleSet& train_labeled, const Vector& beta_values) {
    return aggregate(cands, gram_tilde(cands, target_unlabeled),
                     g_tilde(cands, train_labeled, beta_values));
}

}  // namespace covshift
