#include "exhaz/likelihood.hpp"

#include <cmath>

#include <fmt/format.h>

#include "exhaz/error.hpp"

namespace exhaz {

std::string_view to_string(Model m) {
  switch (m) {
    case Model::M1: return "M1";
    case Model::M2: return "M2";
    case Model::M3: return "M3";
  }
  return "?";
}

Model parse_model(std::string_view name) {
  if (name == "M1" || name == "m1") return Model::M1;
  if (name == "M2" || name == "m2") return Model::M2;
  if (name == "M3" || name == "m3") return Model::M3;
  throw Error(ErrorCode::Config, fmt::format("unknown model '{}' (expected M1, M2 or M3)", name));
}

Model ModelParams::model() const {
  switch (correction.index()) {
    case 0: return Model::M1;
    case 1: return Model::M2;
    default: return Model::M3;
  }
}

void ModelParams::validate() const {
  gh.validate();
  if (const auto* c = std::get_if<SingleCorrection>(&correction)) {
    if (!(c->gamma > 0.0) || !std::isfinite(c->gamma))
      throw Error(ErrorCode::NonPositive, fmt::format("gamma must be > 0 (got {})", c->gamma));
  }
  if (const auto* g = std::get_if<GammaFrailtyParams>(&correction)) g->validate();
}

double omega1(double dhp, const GammaFrailtyParams& g) { return g.mu / (1.0 + g.b * dhp); }

namespace {

double background_multiplier(const ModelParams& params, double dhp) {
  switch (params.correction.index()) {
    case 0: return 1.0;
    case 1: return std::get<SingleCorrection>(params.correction).gamma;
    default: return omega1(dhp, std::get<GammaFrailtyParams>(params.correction));
  }
}

// Parameters in the form the per-patient kernel consumes.
struct Kernel {
  Model model;
  double kappa, theta, alpha;
  double log_kappa, log_theta, log_alpha;
  const double* beta1;
  const double* beta2;
  std::size_t dim;
  double gamma = 1.0, mu = 1.0, b = 1.0;
};

constexpr double kTailZ = 700.0;

// log1p(y) - y / (1 + y), accurate for small y.
double log1p_minus_ratio(double y) {
  if (std::abs(y) < 1e-4) return y * y * (0.5 - y * (2.0 / 3.0 - 0.75 * y));
  return std::log1p(y) - y / (1.0 + y);
}

// Sums the per-patient log-likelihood terms; fills grad (same layout as
// ParamLayout) when non-null.
double evaluate_kernel(const Kernel& k, const PreparedCohort& cohort, double* grad) {
  const std::size_t n = cohort.size();
  const std::size_t p = k.dim;
  const std::size_t b1 = 3, b2 = 3 + p, corr = 3 + 2 * p;
  KahanSum total;

  for (std::size_t i = 0; i < n; ++i) {
    const auto x = cohort.x(i);
    double eta1 = 0.0, eta2 = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      eta1 += x[j] * k.beta1[j];
      eta2 += x[j] * k.beta2[j];
    }
    const double t = cohort.time(i);
    const int delta = cohort.status(i);
    const double hp = cohort.hp(i);
    const double dhp = cohort.dhp(i);

    const double log_u = std::log(t) + eta1;
    const double lz = k.kappa * (log_u - k.log_theta);
    const double z = std::exp(lz);

    // Baseline pieces at u = t e^{eta1}: H0(u), log G where h0(u) = G kappa z / u,
    // and the derivatives needed below.
    double h0_cum, log_g, a_lz, b_lz, h0_dloga, logg_dloga;
    if (z > kTailZ) {
      h0_cum = z - k.log_alpha;
      log_g = 0.0;
      a_lz = 0.0;
      b_lz = z;
      h0_dloga = -1.0;
      logg_dloga = 0.0;
    } else {
      const double log_w = log1mexp(-z);
      const double aw = k.alpha * log_w;
      const double log_s0 = log1mexp(aw);
      const double s0 = std::exp(log_s0);
      const double big_f = std::exp(aw);
      h0_cum = -log_s0;
      log_g = k.log_alpha + (k.alpha - 1.0) * log_w - z - log_s0;
      const double g = std::exp(log_g);
      const double q = log_w / s0;
      const double z_over_expm1 = z < 1e-300 ? 1.0 : z / std::expm1(z);
      a_lz = (k.alpha - 1.0) * z_over_expm1 - z + g * z;
      b_lz = g * z;
      h0_dloga = k.alpha * big_f * q;
      logg_dloga = 1.0 + k.alpha * q;
    }
    const double scale_e = std::exp(eta2 - eta1);
    const double h_cum_e = h0_cum * scale_e;
    const double log_h_e = log_g + k.log_kappa + lz - std::log(t) - eta1 + eta2;

    double c = 1.0, pop = 0.0;
    double log1p_bd = 0.0;
    switch (k.model) {
      case Model::M1: break;
      case Model::M2:
        c = k.gamma;
        pop = -k.gamma * dhp;
        break;
      case Model::M3:
        log1p_bd = std::log1p(k.b * dhp);
        c = k.mu / (1.0 + k.b * dhp);
        pop = -(k.mu / k.b) * log1p_bd;
        break;
    }

    double term = -h_cum_e + pop;
    double h_e = 0.0, overall = 0.0;
    if (delta == 1) {
      h_e = std::exp(log_h_e);
      overall = c * hp + h_e;
      term += std::log(overall);
    }
    if (!std::isfinite(term)) {
      throw NonFiniteLikelihood(
          i, fmt::format("non-finite log-likelihood contribution at patient {} "
                         "(time {}, status {})", i, t, delta));
    }
    total.add(term);

    if (grad == nullptr) continue;

    // d(log h_E) and d(H_E) with respect to the unconstrained coordinates.
    const double w_e = delta == 1 ? h_e / overall : 0.0;
    const double dlh_kappa = a_lz * lz + 1.0 + lz;
    const double dlh_theta = -k.kappa * (a_lz + 1.0);
    const double dlh_alpha = logg_dloga;
    const double dlh_beta1 = a_lz * k.kappa + k.kappa - 1.0;  // times x_j

    const double dH_kappa = scale_e * b_lz * lz;
    const double dH_theta = -scale_e * b_lz * k.kappa;
    const double dH_alpha = scale_e * h0_dloga;
    const double dH_beta1 = scale_e * b_lz * k.kappa - h_cum_e;  // times x_j

    grad[0] += w_e * dlh_kappa - dH_kappa;
    grad[1] += w_e * dlh_theta - dH_theta;
    grad[2] += w_e * dlh_alpha - dH_alpha;
    const double g_beta1 = w_e * dlh_beta1 - dH_beta1;
    const double g_beta2 = w_e - h_cum_e;
    for (std::size_t j = 0; j < p; ++j) {
      grad[b1 + j] += g_beta1 * x[j];
      grad[b2 + j] += g_beta2 * x[j];
    }
    const double w_p = delta == 1 ? hp / overall : 0.0;
    switch (k.model) {
      case Model::M1: break;
      case Model::M2:
        grad[corr] += w_p * k.gamma - k.gamma * dhp;
        break;
      case Model::M3: {
        const double y = k.b * dhp;
        grad[corr] += w_p * c - (k.mu / k.b) * log1p_bd;
        grad[corr + 1] += -w_p * c * y / (1.0 + y) + (k.mu / k.b) * log1p_minus_ratio(y);
        break;
      }
    }
  }
  return total.value();
}

Kernel kernel_from(const ModelParams& params) {
  Kernel k{};
  k.model = params.model();
  k.kappa = params.gh.baseline.kappa;
  k.theta = params.gh.baseline.theta;
  k.alpha = params.gh.baseline.alpha;
  k.log_kappa = std::log(k.kappa);
  k.log_theta = std::log(k.theta);
  k.log_alpha = std::log(k.alpha);
  k.beta1 = params.gh.beta1.data();
  k.beta2 = params.gh.beta2.data();
  k.dim = params.gh.dim();
  if (const auto* c = std::get_if<SingleCorrection>(&params.correction)) k.gamma = c->gamma;
  if (const auto* g = std::get_if<GammaFrailtyParams>(&params.correction)) {
    k.mu = g->mu;
    k.b = g->b;
  }
  return k;
}

}  // namespace

double overall_hazard(double t, std::span<const double> x, const ModelParams& params,
                      double hp, double dhp) {
  return background_multiplier(params, dhp) * hp + excess_hazard(t, x, params.gh);
}

double marginal_survival_m3(double t, std::span<const double> x, const ModelParams& params,
                            double dhp) {
  const auto* g = std::get_if<GammaFrailtyParams>(&params.correction);
  if (g == nullptr) throw Error(ErrorCode::Config, "marginal_survival_m3 needs M3 parameters");
  return std::exp(-excess_cum_hazard(t, x, params.gh) + gamma_log_laplace(dhp, *g));
}

double marginal_survival_m3(double t, const PatientRecord& rec, const ModelParams& params,
                            const LifeTable& table, bool advance_year) {
  const auto s = table.stratum(rec.z);
  const double dhp =
      table.cum_hazard_increment(s, {rec.age_diag, rec.year_diag}, t, advance_year);
  return marginal_survival_m3(t, rec.x, params, dhp);
}

double loglik(const ModelParams& params, const PreparedCohort& cohort) {
  params.validate();
  if (params.gh.dim() != cohort.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("model has {} covariates, cohort has {}", params.gh.dim(),
                            cohort.dim()));
  }
  return evaluate_kernel(kernel_from(params), cohort, nullptr);
}

std::size_t ParamLayout::size() const {
  switch (model_) {
    case Model::M1: return 3 + 2 * dim_;
    case Model::M2: return 4 + 2 * dim_;
    case Model::M3: return 5 + 2 * dim_;
  }
  return 0;
}

bool ParamLayout::is_log(std::size_t k) const { return k < 3 || k >= correction_offset(); }

Eigen::VectorXd ParamLayout::to_unconstrained(const ModelParams& params) const {
  if (params.model() != model_) {
    throw Error(ErrorCode::Config, fmt::format("parameters are {}, layout expects {}",
                                               to_string(params.model()), to_string(model_)));
  }
  if (params.gh.beta1.size() != dim_ || params.gh.beta2.size() != dim_)
    throw Error(ErrorCode::DimensionMismatch, "coefficient vectors do not match the layout");
  auto checked_log = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::NonPositive,
                  fmt::format("{} must be positive and finite (got {})", name, v));
    }
    return std::log(v);
  };
  Eigen::VectorXd phi(static_cast<Eigen::Index>(size()));
  phi[0] = checked_log(params.gh.baseline.kappa, "kappa");
  phi[1] = checked_log(params.gh.baseline.theta, "theta");
  phi[2] = checked_log(params.gh.baseline.alpha, "alpha");
  for (std::size_t j = 0; j < dim_; ++j) {
    phi[static_cast<Eigen::Index>(beta1_offset() + j)] = params.gh.beta1[j];
    phi[static_cast<Eigen::Index>(beta2_offset() + j)] = params.gh.beta2[j];
  }
  const auto c = static_cast<Eigen::Index>(correction_offset());
  if (const auto* s = std::get_if<SingleCorrection>(&params.correction))
    phi[c] = checked_log(s->gamma, "gamma");
  if (const auto* g = std::get_if<GammaFrailtyParams>(&params.correction)) {
    phi[c] = checked_log(g->mu, "mu");
    phi[c + 1] = checked_log(g->b, "b");
  }
  return phi;
}

ModelParams ParamLayout::to_natural(const Eigen::VectorXd& phi) const {
  if (static_cast<std::size_t>(phi.size()) != size())
    throw Error(ErrorCode::DimensionMismatch, "parameter vector has the wrong length");
  ModelParams params;
  params.gh.baseline = {std::exp(phi[0]), std::exp(phi[1]), std::exp(phi[2])};
  params.gh.beta1.resize(dim_);
  params.gh.beta2.resize(dim_);
  for (std::size_t j = 0; j < dim_; ++j) {
    params.gh.beta1[j] = phi[static_cast<Eigen::Index>(beta1_offset() + j)];
    params.gh.beta2[j] = phi[static_cast<Eigen::Index>(beta2_offset() + j)];
  }
  const auto c = static_cast<Eigen::Index>(correction_offset());
  switch (model_) {
    case Model::M1: break;
    case Model::M2: params.correction = SingleCorrection{std::exp(phi[c])}; break;
    case Model::M3: params.correction = GammaFrailtyParams{std::exp(phi[c]), std::exp(phi[c + 1])};
  }
  return params;
}

Eigen::VectorXd ParamLayout::natural_values(const Eigen::VectorXd& phi) const {
  Eigen::VectorXd out = phi;
  for (std::size_t k = 0; k < size(); ++k)
    if (is_log(k)) out[static_cast<Eigen::Index>(k)] = std::exp(phi[static_cast<Eigen::Index>(k)]);
  return out;
}

std::vector<std::string> ParamLayout::names(const std::vector<std::string>& x_names) const {
  std::vector<std::string> out{"kappa", "theta", "alpha"};
  for (std::size_t j = 0; j < dim_; ++j)
    out.push_back("beta1_" + (j < x_names.size() ? x_names[j] : std::to_string(j + 1)));
  for (std::size_t j = 0; j < dim_; ++j)
    out.push_back("beta2_" + (j < x_names.size() ? x_names[j] : std::to_string(j + 1)));
  if (model_ == Model::M2) out.emplace_back("gamma");
  if (model_ == Model::M3) {
    out.emplace_back("mu");
    out.emplace_back("b");
  }
  return out;
}

double LogLikObjective::evaluate(const Eigen::VectorXd& phi, Eigen::VectorXd* grad) const {
  if (static_cast<std::size_t>(phi.size()) != layout_.size())
    throw Error(ErrorCode::DimensionMismatch, "parameter vector has the wrong length");
  const std::size_t p = layout_.dim();
  Kernel k{};
  k.model = layout_.model();
  k.log_kappa = phi[0];
  k.log_theta = phi[1];
  k.log_alpha = phi[2];
  k.kappa = std::exp(phi[0]);
  k.theta = std::exp(phi[1]);
  k.alpha = std::exp(phi[2]);
  k.beta1 = phi.data() + 3;
  k.beta2 = phi.data() + 3 + p;
  k.dim = p;
  const auto c = static_cast<Eigen::Index>(layout_.correction_offset());
  if (k.model == Model::M2) k.gamma = std::exp(phi[c]);
  if (k.model == Model::M3) {
    k.mu = std::exp(phi[c]);
    k.b = std::exp(phi[c + 1]);
  }
  for (Eigen::Index j = 0; j < phi.size(); ++j) {
    if (!std::isfinite(phi[j]) ||
        (layout_.is_log(static_cast<std::size_t>(j)) && !std::isfinite(std::exp(phi[j])))) {
      throw NonFiniteLikelihood(0, "parameter vector is not finite on the natural scale");
    }
  }
  if (grad != nullptr) {
    grad->setZero(phi.size());
    const double v = evaluate_kernel(k, *cohort_, grad->data());
    if (!grad->allFinite()) throw NonFiniteLikelihood(0, "non-finite log-likelihood gradient");
    return v;
  }
  return evaluate_kernel(k, *cohort_, nullptr);
}

}  // namespace exhaz
