#include "bvctl/model.hpp"

#include "bvctl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bvctl {

ModelParams::ModelParams(double mu0, double mu1, double eta, double rho, double kplus,
                         double kminus)
    : mu0_(mu0), mu1_(mu1), eta_(eta), rho_(rho), kplus_(kplus), kminus_(kminus) {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(mu0)) throw ValidationError("mu0", "must be finite");
    if (!finite(mu1) || !(mu1 > mu0)) throw ValidationError("mu1", "must be finite and exceed mu0");
    if (!finite(eta) || !(eta > 0)) throw ValidationError("eta", "must be positive");
    if (!finite(rho) || !(rho > 0)) throw ValidationError("rho", "must be positive");
    if (!finite(kplus) || !(kplus > 0)) throw ValidationError("kplus", "must be positive");
    if (!finite(kminus) || !(kminus > 0)) throw ValidationError("kminus", "must be positive");
}

double gamma(const ModelParams& params) noexcept { return params.gamma(); }

// ---------------------------------------------------------------------------

CostSpec::CostSpec(CostKind kind, double holding, double shortage, double target)
    : kind_(kind), holding_(holding), shortage_(shortage), target_(target) {}

CostSpec CostSpec::quadratic(double target) {
    if (!std::isfinite(target)) throw ValidationError("cost.target", "must be finite");
    return CostSpec(CostKind::quadratic, 1.0, 1.0, target);
}

CostSpec CostSpec::asymmetric(double holding, double shortage, double target) {
    if (!std::isfinite(target)) throw ValidationError("cost.target", "must be finite");
    if (!(holding > 0) || !std::isfinite(holding))
        throw ValidationError("cost.holding", "must be positive");
    if (!(shortage > 0) || !std::isfinite(shortage))
        throw ValidationError("cost.shortage", "must be positive");
    return CostSpec(CostKind::asymmetric, holding, shortage, target);
}

std::string CostSpec::kind_name() const {
    return kind_ == CostKind::quadratic ? "quadratic" : "asymmetric";
}

double CostSpec::c(double x) const noexcept {
    const double d = x - target_;
    return (d >= 0 ? holding_ : shortage_) * d * d;
}

double CostSpec::cprime(double x) const noexcept {
    const double d = x - target_;
    return 2.0 * (d >= 0 ? holding_ : shortage_) * d;
}

double CostSpec::csecond(double x) const noexcept {
    return 2.0 * (x - target_ >= 0 ? holding_ : shortage_);
}

double CostSpec::cprime_inv(double v) const noexcept {
    return target_ + v / (2.0 * (v >= 0 ? holding_ : shortage_));
}

void CostSpec::validate() const {
    const double alpha0 = 2.0 * std::max(holding_, shortage_) * (1.0 + target_ * target_);
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = -400; i <= 400; ++i) {
        const double x = target_ + 0.05 * i;
        const double cx = c(x);
        if (!(cx >= 0)) throw ValidationError("cost", "C must be nonnegative");
        if (cx > 2.0 * alpha0 * (1.0 + std::pow(std::abs(x), growth_p())))
            throw ValidationError("cost", "C violates the polynomial growth bound");
        const double d = cprime(x);
        if (d < prev) throw ValidationError("cost", "C' must be nondecreasing");
        prev = d;
        if (std::abs(cprime_inv(d) - x) > 1e-9 * (1.0 + std::abs(x)))
            throw ValidationError("cost", "cprime_inv is not the inverse of cprime");
    }
    if (!(cprime(target_ + 1e6) > 1e5) || !(cprime(target_ - 1e6) < -1e5))
        throw ValidationError("cost", "C' must diverge to +-infinity");
}

// ---------------------------------------------------------------------------

double belief_to_likelihood(double pi) {
    if (!(pi > 0.0 && pi < 1.0))
        throw ValidationError("pi", "belief must lie in the open interval (0, 1)");
    return pi / (1.0 - pi);
}

double likelihood_to_belief(double phi) {
    if (!(phi > 0.0) || !std::isfinite(phi))
        throw ValidationError("phi", "likelihood ratio must be positive and finite");
    return phi / (1.0 + phi);
}

ParabolicPoint to_parabolic(double x, double phi, const ModelParams& params) {
    if (!(phi > 0.0)) throw ValidationError("phi", "likelihood ratio must be positive");
    return {x, x - std::log(phi) / params.tilt()};
}

double parabolic_log_likelihood(double x, double y, const ModelParams& params) noexcept {
    return params.tilt() * (x - y);
}

double parabolic_to_likelihood(double x, double y, const ModelParams& params) noexcept {
    return std::exp(parabolic_log_likelihood(x, y, params));
}

double log_weight_q(double x, double y, const ModelParams& params) noexcept {
    const double e = params.tilt() * (x - y);
    // log(1 + e^e) without overflow
    return e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
}

double weight_q(double x, double y, const ModelParams& params) noexcept {
    return 1.0 + std::exp(params.tilt() * (x - y));
}

// ---------------------------------------------------------------------------

std::vector<double> filter_explicit(std::span<const double> s_path, double dt, double pi0,
                                    const ModelParams& params) {
    const double log_phi0 = std::log(belief_to_likelihood(pi0));
    std::vector<double> out;
    out.reserve(s_path.size());
    if (s_path.empty()) return out;
    const double s0 = s_path.front();
    for (std::size_t k = 0; k < s_path.size(); ++k) {
        const double t = dt * static_cast<double>(k);
        const double lphi = log_phi0 + params.tilt() * (s_path[k] - s0 - params.ydrift() * t);
        // pi = 1 / (1 + exp(-log phi)), written to stay in (0, 1)
        const double pi = lphi >= 0 ? 1.0 / (1.0 + std::exp(-lphi))
                                    : std::exp(lphi) / (1.0 + std::exp(lphi));
        out.push_back(std::clamp(pi, kBeliefClamp, 1.0 - kBeliefClamp));
    }
    return out;
}

double filter_sde_step(double pi, double ds, double dt, const ModelParams& params) {
    const double k = params.gamma() / params.eta();
    const double drift = params.mu0() + (params.mu1() - params.mu0()) * pi;
    const double g = k * pi * (1.0 - pi);
    const double dg = k * (1.0 - 2.0 * pi);
    const double eta2 = params.eta() * params.eta();
    double next = pi + g * (ds - drift * dt) + 0.5 * g * dg * (ds * ds - eta2 * dt);
    return std::clamp(next, kBeliefClamp, 1.0 - kBeliefClamp);
}

}  // namespace bvctl
