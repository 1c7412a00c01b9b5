#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bvctl {

/// Parameters of the inventory model with unobservable two-point drift
/// mu in {mu0, mu1}. Validated on construction; immutable afterwards.
class ModelParams {
public:
    ModelParams(double mu0, double mu1, double eta, double rho, double kplus, double kminus);

    double mu0() const noexcept { return mu0_; }
    double mu1() const noexcept { return mu1_; }
    double eta() const noexcept { return eta_; }
    double rho() const noexcept { return rho_; }
    double kplus() const noexcept { return kplus_; }
    double kminus() const noexcept { return kminus_; }

    /// Signal-to-noise ratio (mu1 - mu0) / eta.
    double gamma() const noexcept { return (mu1_ - mu0_) / eta_; }
    /// Exponent scale gamma / eta appearing in every likelihood transform.
    double tilt() const noexcept { return gamma() / eta_; }
    /// Speed of the deterministic parabolic coordinate, (mu0 + mu1) / 2.
    double ydrift() const noexcept { return 0.5 * (mu0_ + mu1_); }

private:
    double mu0_, mu1_, eta_, rho_, kplus_, kminus_;
};

double gamma(const ModelParams& params) noexcept;

enum class CostKind { quadratic, asymmetric };

/// Convex running cost C together with C', C'' and the generalised inverse of
/// C'. The quadratic kind (x - target)^2 has a closed-form resolvent; the
/// asymmetric kind gets it by quadrature.
class CostSpec {
public:
    static CostSpec quadratic(double target = 0.0);
    /// holding * (x - target)^2 above the target, shortage * (x - target)^2 below.
    static CostSpec asymmetric(double holding, double shortage, double target = 0.0);

    CostKind kind() const noexcept { return kind_; }
    std::string kind_name() const;
    bool is_quadratic() const noexcept { return kind_ == CostKind::quadratic; }
    double target() const noexcept { return target_; }
    double holding() const noexcept { return holding_; }
    double shortage() const noexcept { return shortage_; }
    double growth_p() const noexcept { return 2.0; }

    double c(double x) const noexcept;
    double cprime(double x) const noexcept;
    double csecond(double x) const noexcept;
    /// Generalised inverse inf{x : C'(x) >= v}.
    double cprime_inv(double v) const noexcept;

    /// Sampling checks of nonnegativity, polynomial growth, monotone C' and
    /// C' -> +-inf. Throws ValidationError on the first violation.
    void validate() const;

private:
    CostSpec(CostKind kind, double holding, double shortage, double target);

    CostKind kind_;
    double holding_;
    double shortage_;
    double target_;
};

// Belief / likelihood / parabolic coordinate transforms.

/// phi = pi / (1 - pi); throws ValidationError unless 0 < pi < 1.
double belief_to_likelihood(double pi);
/// pi = phi / (1 + phi); throws ValidationError unless phi > 0.
double likelihood_to_belief(double phi);

struct ParabolicPoint {
    double x;
    double y;
};

/// (x, phi) -> (x, x - (eta/gamma) log phi).
ParabolicPoint to_parabolic(double x, double phi, const ModelParams& params);
/// Inverse: phi = exp((gamma/eta)(x - y)).
double parabolic_to_likelihood(double x, double y, const ModelParams& params) noexcept;
/// log phi for a parabolic point; use this rather than log of the above when
/// |x - y| is large.
double parabolic_log_likelihood(double x, double y, const ModelParams& params) noexcept;

/// q(x, y) = 1 + exp((gamma/eta)(x - y)).
double weight_q(double x, double y, const ModelParams& params) noexcept;
/// log q(x, y), stable for large positive or negative exponents.
double log_weight_q(double x, double y, const ModelParams& params) noexcept;

// Filtering.

/// Smallest distance of the discretised belief from {0, 1}.
inline constexpr double kBeliefClamp = 1e-12;

/// Belief path from observations S sampled on a uniform grid with spacing dt,
/// via Phi_t = phi0 exp((gamma/eta)(S_t - S_0 - (mu0 + mu1) t / 2)), clamped like the SDE step.
std::vector<double> filter_explicit(std::span<const double> s_path, double dt, double pi0,
                                    const ModelParams& params);

/// One Milstein step of d Pi = gamma Pi (1 - Pi) dW with innovation
/// dW = (dS - (mu1 Pi + mu0 (1 - Pi)) dt) / eta. Result clamped to
/// [kBeliefClamp, 1 - kBeliefClamp].
double filter_sde_step(double pi, double ds, double dt, const ModelParams& params);

}  // namespace bvctl
