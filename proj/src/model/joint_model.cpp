#include "varjm/correlation.hpp"
#include "varjm/densities.hpp"
#include "varjm/model.hpp"

#include <cmath>

namespace varjm {

namespace {

constexpr int kMaxQ = 8;

// Fixed-size storage when the marker count is known at compile time.
template <int QT>
struct QTypes {
  static constexpr int kMax = QT == Eigen::Dynamic ? kMaxQ : QT;
  using Mat = Eigen::Matrix<double, QT, QT, 0, kMax, kMax>;
  using Coef = Eigen::Matrix<double, QT, 2, QT == 1 ? Eigen::RowMajor : Eigen::ColMajor, kMax, 2>;
  using Vec = Eigen::Matrix<double, QT, 1, 0, kMax, 1>;
};

struct PairConst {
  double a, b, log_a, log_b, lbeta, dig_a, dig_b, dig_ab;
};

// Per-angle trigonometric values for theta = pi * sigmoid(x).
struct AngleTrig {
  double sg, sgc;            // sigmoid(x), sigmoid(-x)
  double sin_h, cos_h;       // sin(theta/2), cos(theta/2)
  double log_sin_h, log_cos_h;
  double sin_t, cos_t;
};

AngleTrig angle_trig(double x) {
  AngleTrig t{};
  t.sg = math::sigmoid(x);
  t.sgc = math::sigmoid(-x);
  t.sin_h = std::sin(0.5 * kPi * t.sg);
  t.cos_h = std::sin(0.5 * kPi * t.sgc);
  t.log_sin_h = std::log(t.sin_h);
  t.log_cos_h = std::log(t.cos_h);
  t.sin_t = 2.0 * t.sin_h * t.cos_h;
  t.cos_t = (t.cos_h - t.sin_h) * (t.cos_h + t.sin_h);
  return t;
}

// Functions of r = tanh(x) needed for the Q = 2 correlation, from a single
// exponential: (r + 1) / 2 = sigmoid(2x).
struct TanhParts {
  double r, sech, one_m_r2, log1m_r2, log_x, log_1mx, xs, xs_c;
};

TanhParts tanh_parts(double x) {
  const double ax = std::abs(x);
  const double e = std::exp(-2.0 * ax);
  const double l = std::log1p(e);
  const double inv = 1.0 / (1.0 + e);
  TanhParts t{};
  t.r = std::copysign((1.0 - e) * inv, x);
  t.sech = 2.0 * std::sqrt(e) * inv;
  t.one_m_r2 = t.sech * t.sech;
  const double lo_big = -l, lo_small = -2.0 * ax - l;
  t.log_x = x >= 0 ? lo_big : lo_small;
  t.log_1mx = x >= 0 ? lo_small : lo_big;
  t.log1m_r2 = 2.0 * std::numbers::ln2 + lo_big + lo_small;
  t.xs = x >= 0 ? inv : e * inv;
  t.xs_c = x >= 0 ? e * inv : inv;
  return t;
}

}  // namespace

JointModel::JointModel(const Dataset& data, ModelSpec spec)
    : data_(data), spec_(std::move(spec)), layout_(spec_, data.size()) {
  spec_.validate();
  if (spec_.num_markers != data_.num_markers()) {
    throw ModelError("model has " + std::to_string(spec_.num_markers) + " markers but the data has " +
                     std::to_string(data_.num_markers()));
  }
  if (spec_.include_outcome && spec_.num_covariates != data_.num_covariates()) {
    throw ModelError("model has " + std::to_string(spec_.num_covariates) + " covariates but the data has " +
                     std::to_string(data_.num_covariates()));
  }
  stats_.reserve(data_.size());
  for (const auto& rec : data_.subjects()) {
    SubjectStats s;
    s.n = static_cast<double>(rec.num_obs());
    const Eigen::Map<const Vector> t(rec.times.data(), rec.num_obs());
    s.st = t.sum();
    s.stt = t.squaredNorm();
    s.sxx = rec.markers.transpose() * rec.markers;
    s.sx = rec.markers.colwise().sum().transpose();
    s.stx = rec.markers.transpose() * t;
    stats_.push_back(std::move(s));
  }
  names_ = constrained_names(spec_, data_);
}

double JointModel::log_density(const Vector& u) const { return static_cast<double>(evaluate(u, nullptr)); }

long double JointModel::log_density_extended(const Vector& u) const { return evaluate(u, nullptr); }

double JointModel::log_density_gradient(const Vector& u, Vector& grad) const {
  grad.setZero(layout_.dim());
  return static_cast<double>(evaluate(u, &grad));
}

std::vector<std::string> JointModel::parameter_names() const { return names_; }

Vector JointModel::constrain(const Vector& u) const { return constrained_flat(state(u), spec_); }

ParameterState JointModel::state(const Vector& u, double* log_jacobian) const {
  return transform_to_constrained(u, spec_, layout_, log_jacobian);
}

Vector JointModel::unconstrain(const ParameterState& st) const {
  return transform_to_unconstrained(st, spec_, layout_);
}

long double JointModel::evaluate(const Vector& u, Vector* grad) const {
  if (u.size() != layout_.dim()) throw ModelError("unconstrained vector has the wrong length");
  switch (spec_.num_markers) {
    case 1: return evaluate_fixed<1>(u, grad);
    case 2: return evaluate_fixed<2>(u, grad);
    case 3: return evaluate_fixed<3>(u, grad);
    default: return evaluate_fixed<Eigen::Dynamic>(u, grad);
  }
}

template <int QT>
long double JointModel::evaluate_fixed(const Vector& u, Vector* grad) const {
  using SmallMat = typename QTypes<QT>::Mat;
  using SmallCoef = typename QTypes<QT>::Coef;
  using SmallVec = typename QTypes<QT>::Vec;
  const int q = spec_.num_markers;
  const int pairs = layout_.num_pairs();
  const auto& h = spec_.hyper;
  const auto& L = layout_;
  const bool want_grad = grad != nullptr;
  const bool noncentered = spec_.parameterization == Parameterization::NonCentered;
  auto g = [&](int idx) -> double& { return (*grad)[idx]; };

  // Population block.
  SmallCoef beta(q, 2), kk(q, 2), log_k(q, 2);
  SmallVec w(q), rho(q), sech_w(q), nu(q), log_psi(q), psi(q);
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) {
      beta(m, p) = u[L.pop_index(m, kBeta0 + p)];
      log_k(m, p) = u[L.pop_index(m, kLogK0 + p)];
      kk(m, p) = std::exp(log_k(m, p));
    }
    w[m] = u[L.pop_index(m, kAtanhRho)];
    rho[m] = std::tanh(w[m]);
    sech_w[m] = math::sech(w[m]);
    nu[m] = u[L.pop_index(m, kNu)];
    log_psi[m] = u[L.pop_index(m, kLogPsi)];
    psi[m] = std::exp(log_psi[m]);
  }
  std::vector<PairConst> pc(static_cast<std::size_t>(pairs));
  for (int k = 0; k < pairs; ++k) {
    auto& c = pc[static_cast<std::size_t>(k)];
    c.log_a = u[L.a_prime_index(k)];
    c.log_b = u[L.b_prime_index(k)];
    c.a = std::exp(c.log_a);
    c.b = std::exp(c.log_b);
    c.lbeta = math::log_beta_fn(c.a, c.b);
    if (want_grad) {
      c.dig_a = math::digamma(c.a);
      c.dig_b = math::digamma(c.b);
      c.dig_ab = math::digamma(c.a + c.b);
    }
  }

  // Outcome block.
  const bool outcome = spec_.include_outcome;
  const bool mixture = outcome && spec_.family == OutcomeFamily::ScaleMixture2;
  Vector coef;
  double sigma = 1.0, log_sigma = 0.0, sigma1 = 1.0, sigma2 = 1.0, log_pi = 0.0, log_1mpi = 0.0;
  double gsig_lik = 0.0, gsig1_lik = 0.0, gsig2_lik = 0.0, gpi_lik = 0.0;
  if (outcome) {
    coef = u.segment(L.outcome_offset(), L.num_coefficients());
    if (mixture) {
      sigma1 = std::exp(u[L.scale_index(0)]);
      sigma2 = sigma1 + std::exp(u[L.scale_index(1)]);
      log_pi = math::log_sigmoid(u[L.scale_index(2)]);
      log_1mpi = math::log_sigmoid(-u[L.scale_index(2)]);
    } else {
      log_sigma = u[L.scale_index(0)];
      sigma = std::exp(log_sigma);
    }
  }

  long double lp = 0.0;
  SmallMat chol(q, q), rinv(q, q), a_mat(q, q), gr(q, q), rmat(q, q), sxx(q, q);
  SmallVec lam(q), sd(q), dinv(q), glam(q), se(q), ste(q), sx(q), stx(q);
  SmallCoef bm(q, 2), gb(q, 2);
  std::vector<double> fvals(spec_.features.size());
  TanhParts th{};
  std::vector<AngleTrig> trig(static_cast<std::size_t>(pairs));
  std::vector<double> angles(static_cast<std::size_t>(pairs)), gangles(static_cast<std::size_t>(pairs));

  for (std::size_t i = 0; i < data_.size(); ++i) {
    const auto& st = stats_[i];
    sxx = st.sxx;
    sx = st.sx;
    stx = st.stx;

    // Subject coefficients.
    for (int m = 0; m < q; ++m) {
      const double c0 = u[L.coef_index(i, m, 0)];
      const double c1 = u[L.coef_index(i, m, 1)];
      if (noncentered) {
        bm(m, 0) = beta(m, 0) + kk(m, 0) * c0;
        bm(m, 1) = beta(m, 1) + kk(m, 1) * (rho[m] * c0 + sech_w[m] * c1);
        lp += -0.5 * (c0 * c0 + c1 * c1) - kLog2Pi;
      } else {
        bm(m, 0) = c0;
        bm(m, 1) = c1;
      }
      lam[m] = u[L.log_sd_index(i, m)];
      sd[m] = std::exp(lam[m]);
      dinv[m] = 1.0 / sd[m];
    }

    // Correlation factor, its inverse and log-determinant.
    double logdet_r = 0.0;
    chol.setZero(q, q);
    if (q == 1) {
      chol(0, 0) = 1.0;
      rinv.setOnes(1, 1);
    } else if (q == 2) {
      if constexpr (QT != 1) {
        th = tanh_parts(u[L.corr_index(i, 0)]);
        chol(0, 0) = 1.0;
        chol(1, 0) = th.r;
        chol(1, 1) = th.sech;
        logdet_r = th.log1m_r2;
        rinv(0, 0) = rinv(1, 1) = 1.0 / th.one_m_r2;
        rinv(0, 1) = rinv(1, 0) = -th.r / th.one_m_r2;
      }
    } else {
      for (int k = 0; k < pairs; ++k) {
        trig[static_cast<std::size_t>(k)] = angle_trig(u[L.corr_index(i, k)]);
        angles[static_cast<std::size_t>(k)] = kPi * trig[static_cast<std::size_t>(k)].sg;
        const auto& t = trig[static_cast<std::size_t>(k)];
        logdet_r += 2.0 * (std::numbers::ln2 + t.log_sin_h + t.log_cos_h);
      }
      chol(0, 0) = 1.0;
      for (int l = 1; l < q; ++l) {
        double prefix = 1.0;
        for (int k = 0; k < l; ++k) {
          const auto& t = trig[static_cast<std::size_t>(angle_index(k, l, q))];
          chol(l, k) = t.cos_t * prefix;
          prefix *= t.sin_t;
        }
        chol(l, l) = prefix;
      }
      const SmallMat linv = chol.template triangularView<Eigen::Lower>().solve(SmallMat::Identity(q, q));
      rinv = linv.transpose() * linv;
    }

    // Marker likelihood from sufficient statistics.
    const auto b0 = bm.col(0);
    const auto b1 = bm.col(1);
    se = sx - st.n * b0 - st.st * b1;
    ste = stx - st.st * b0 - st.stt * b1;
    // sum of e e^T with e = x - b0 - t b1
    const SmallMat cross = sx * b0.transpose() + stx * b1.transpose();
    const SmallMat mm = sxx - cross - cross.transpose() + st.n * b0 * b0.transpose() +
                        st.st * (b0 * b1.transpose() + b1 * b0.transpose()) + st.stt * b1 * b1.transpose();
    a_mat = dinv.asDiagonal() * mm * dinv.asDiagonal();
    const SmallMat ra = rinv.cwiseProduct(a_mat);
    lp += -0.5 * st.n * q * kLog2Pi - st.n * lam.sum() - 0.5 * st.n * logdet_r - 0.5 * ra.sum();

    if (want_grad) {
      const SmallMat pm = dinv.asDiagonal() * rinv * dinv.asDiagonal();
      gb.col(0) = pm * se;
      gb.col(1) = pm * ste;
      glam = ra.rowwise().sum();
      glam.array() -= st.n;
      gr = -0.5 * st.n * rinv + 0.5 * rinv * a_mat * rinv;
    }

    // Outcome.
    if (outcome) {
      rmat = chol * chol.transpose();
      const auto& rec = data_[i];
      const auto nf = static_cast<int>(spec_.features.size());
      double eta = 0.0;
      for (int j = 0; j < nf; ++j) {
        const auto& f = spec_.features[static_cast<std::size_t>(j)];
        double v = 0.0;
        switch (f.kind) {
          case FeatureKind::Coefficient: v = bm(f.a, f.b); break;
          case FeatureKind::Variance: v = sd[f.a] * sd[f.a]; break;
          case FeatureKind::Covariance: v = sd[f.a] * sd[f.b] * rmat(f.a, f.b); break;
          case FeatureKind::Correlation: v = rmat(f.a, f.b); break;
          case FeatureKind::Covariate: v = rec.covariates[f.a]; break;
          case FeatureKind::Interaction: v = sd[f.a] * sd[f.a] * sd[f.b] * sd[f.b]; break;
        }
        fvals[static_cast<std::size_t>(j)] = v;
        eta += v * coef[j];
      }
      const double resid = rec.outcome - eta;
      double geta = 0.0;
      if (mixture) {
        const double z1 = resid / sigma1, z2 = resid / sigma2;
        const double l1 = log_pi - 0.5 * kLog2Pi - std::log(sigma1) - 0.5 * z1 * z1;
        const double l2 = log_1mpi - 0.5 * kLog2Pi - std::log(sigma2) - 0.5 * z2 * z2;
        const double tot = math::log_sum_exp(l1, l2);
        lp += tot;
        if (want_grad) {
          const double w1 = std::exp(l1 - tot), w2 = std::exp(l2 - tot);
          geta = w1 * resid / (sigma1 * sigma1) + w2 * resid / (sigma2 * sigma2);
          gsig1_lik += w1 * (z1 * z1 - 1.0) / sigma1;
          gsig2_lik += w2 * (z2 * z2 - 1.0) / sigma2;
          gpi_lik += w1 * std::exp(-log_pi) - w2 * std::exp(-log_1mpi);
        }
      } else {
        const double z = resid / sigma;
        lp += -0.5 * kLog2Pi - log_sigma - 0.5 * z * z;
        if (want_grad) {
          geta = resid / (sigma * sigma);
          gsig_lik += z * z - 1.0;
        }
      }
      if (want_grad) {
        for (int j = 0; j < nf; ++j) {
          const auto& f = spec_.features[static_cast<std::size_t>(j)];
          const double v = fvals[static_cast<std::size_t>(j)];
          g(L.coef_param_index(j)) += geta * v;
          const double gf = geta * coef[j];
          switch (f.kind) {
            case FeatureKind::Coefficient: gb(f.a, f.b) += gf; break;
            case FeatureKind::Variance: glam[f.a] += 2.0 * gf * v; break;
            case FeatureKind::Covariance:
              glam[f.a] += gf * v;
              glam[f.b] += gf * v;
              gr(f.a, f.b) += 0.5 * gf * sd[f.a] * sd[f.b];
              gr(f.b, f.a) += 0.5 * gf * sd[f.a] * sd[f.b];
              break;
            case FeatureKind::Correlation:
              gr(f.a, f.b) += 0.5 * gf;
              gr(f.b, f.a) += 0.5 * gf;
              break;
            case FeatureKind::Covariate: break;
            case FeatureKind::Interaction:
              glam[f.a] += 2.0 * gf * v;
              glam[f.b] += 2.0 * gf * v;
              break;
          }
        }
      }
    }

    // Correlation prior (with the coordinate Jacobian) and gradient.
    if (q == 2) {
      const auto& c = pc[0];
      lp += (c.a - 1.0) * th.log_x + (c.b - 1.0) * th.log_1mx - c.lbeta - std::numbers::ln2;
      lp += 2.0 * std::numbers::ln2 + th.log_x + th.log_1mx;
      if (want_grad) {
        g(L.corr_index(i, 0)) += 2.0 * gr(0, 1) * th.one_m_r2 + 2.0 * c.a * th.xs_c - 2.0 * c.b * th.xs;
        g(L.a_prime_index(0)) += c.a * (th.log_x - c.dig_a + c.dig_ab);
        g(L.b_prime_index(0)) += c.b * (th.log_1mx - c.dig_b + c.dig_ab);
      }
    } else if (q > 2) {
      if (want_grad) {
        const SmallMat gl = 2.0 * gr * chol;
        std::fill(gangles.begin(), gangles.end(), 0.0);
        cholesky_angles_backprop(angles, q, gl, gangles);
      }
      for (int k = 0; k < pairs; ++k) {
        const auto& c = pc[static_cast<std::size_t>(k)];
        const auto& t = trig[static_cast<std::size_t>(k)];
        lp += (2.0 * c.a - 1.0) * t.log_cos_h + (2.0 * c.b - 1.0) * t.log_sin_h - c.lbeta;
        lp += std::log(kPi) + std::log(t.sg) + std::log(t.sgc);
        if (want_grad) {
          const double dtheta = kPi * t.sg * t.sgc;
          const double prior = 0.5 * dtheta *
                               (-(2.0 * c.a - 1.0) * t.sin_h / t.cos_h + (2.0 * c.b - 1.0) * t.cos_h / t.sin_h);
          g(L.corr_index(i, k)) += gangles[static_cast<std::size_t>(k)] * dtheta + prior + (t.sgc - t.sg);
          g(L.a_prime_index(k)) += c.a * (2.0 * t.log_cos_h - c.dig_a + c.dig_ab);
          g(L.b_prime_index(k)) += c.b * (2.0 * t.log_sin_h - c.dig_b + c.dig_ab);
        }
      }
    }

    // Log-sd prior.
    for (int m = 0; m < q; ++m) {
      const double zz = (lam[m] - nu[m]) / psi[m];
      lp += -0.5 * kLog2Pi - log_psi[m] - 0.5 * zz * zz;
      if (want_grad) {
        g(L.log_sd_index(i, m)) += glam[m] - zz / psi[m];
        g(L.pop_index(m, kNu)) += zz / psi[m];
        g(L.pop_index(m, kLogPsi)) += zz * zz - 1.0;
      }
    }

    // Random-effect prior and chain rule into the coefficient coordinates.
    for (int m = 0; m < q; ++m) {
      const double rr = rho[m], sq = sech_w[m];
      if (noncentered) {
        if (!want_grad) continue;
        const double z0 = u[L.coef_index(i, m, 0)];
        const double z1 = u[L.coef_index(i, m, 1)];
        const double g0 = gb(m, 0), g1 = gb(m, 1);
        g(L.coef_index(i, m, 0)) += g0 * kk(m, 0) + g1 * kk(m, 1) * rr - z0;
        g(L.coef_index(i, m, 1)) += g1 * kk(m, 1) * sq - z1;
        g(L.pop_index(m, kBeta0)) += g0;
        g(L.pop_index(m, kBeta1)) += g1;
        g(L.pop_index(m, kLogK0)) += g0 * kk(m, 0) * z0;
        g(L.pop_index(m, kLogK1)) += g1 * kk(m, 1) * (rr * z0 + sq * z1);
        g(L.pop_index(m, kAtanhRho)) += g1 * kk(m, 1) * (z0 * sq * sq - z1 * rr * sq);
      } else {
        const double y0 = (bm(m, 0) - beta(m, 0)) / kk(m, 0);
        const double d1 = (bm(m, 1) - beta(m, 1)) / kk(m, 1);
        const double y1 = (d1 - rr * y0) / sq;
        lp += -kLog2Pi - log_k(m, 0) - log_k(m, 1) - 0.5 * math::log1m_tanh_sq(w[m]) - 0.5 * (y0 * y0 + y1 * y1);
        if (!want_grad) continue;
        const double dy0 = -y0 + y1 * rr / sq;
        g(L.coef_index(i, m, 0)) += gb(m, 0) + dy0 / kk(m, 0);
        g(L.coef_index(i, m, 1)) += gb(m, 1) - y1 / (sq * kk(m, 1));
        g(L.pop_index(m, kBeta0)) -= dy0 / kk(m, 0);
        g(L.pop_index(m, kBeta1)) += y1 / (sq * kk(m, 1));
        g(L.pop_index(m, kLogK0)) += -1.0 - dy0 * y0;
        g(L.pop_index(m, kLogK1)) += -1.0 + y1 * d1 / sq;
        g(L.pop_index(m, kAtanhRho)) += rr + y1 * y0 * sq - y1 * y1 * rr;
      }
    }
  }

  // Population priors with their log-scale Jacobians.
  for (int m = 0; m < q; ++m) {
    for (int p = 0; p < 2; ++p) {
      lp += math::normal_lpdf(beta(m, p), h.m, h.xi);
      lp += math::half_cauchy_lpdf(kk(m, p), h.tau0) + log_k(m, p);
      if (want_grad) {
        g(L.pop_index(m, kBeta0 + p)) -= (beta(m, p) - h.m) / (h.xi * h.xi);
        g(L.pop_index(m, kLogK0 + p)) += kk(m, p) * math::half_cauchy_dlpdf(kk(m, p), h.tau0) + 1.0;
      }
    }
    lp += h.zeta * math::log1m_tanh_sq(w[m]);
    lp += math::normal_lpdf(nu[m], h.m, h.xi);
    lp += math::half_cauchy_lpdf(psi[m], h.tau) + log_psi[m];
    if (want_grad) {
      g(L.pop_index(m, kAtanhRho)) -= 2.0 * h.zeta * rho[m];
      g(L.pop_index(m, kNu)) -= (nu[m] - h.m) / (h.xi * h.xi);
      g(L.pop_index(m, kLogPsi)) += psi[m] * math::half_cauchy_dlpdf(psi[m], h.tau) + 1.0;
    }
  }
  for (int k = 0; k < pairs; ++k) {
    const auto& c = pc[static_cast<std::size_t>(k)];
    lp += std::log(h.kappa) - h.kappa * c.a + c.log_a;
    lp += std::log(h.kappa_prime) - h.kappa_prime * c.b + c.log_b;
    if (want_grad) {
      g(L.a_prime_index(k)) += 1.0 - h.kappa * c.a;
      g(L.b_prime_index(k)) += 1.0 - h.kappa_prime * c.b;
    }
  }
  if (outcome) {
    for (int j = 0; j < L.num_coefficients(); ++j) {
      lp += math::normal_lpdf(coef[j], 0.0, h.coef_sd);
      if (want_grad) g(L.coef_param_index(j)) -= coef[j] / (h.coef_sd * h.coef_sd);
    }
    if (mixture) {
      const double lg = u[L.scale_index(1)];
      lp += math::half_cauchy_lpdf(sigma1, h.tau1) + math::half_cauchy_lpdf(sigma2, h.tau2);
      lp += 0.5 * log_pi + 0.5 * log_1mpi - std::log(kPi);
      lp += u[L.scale_index(0)] + lg;
      if (want_grad) {
        const double gs1 = gsig1_lik + math::half_cauchy_dlpdf(sigma1, h.tau1);
        const double gs2 = gsig2_lik + math::half_cauchy_dlpdf(sigma2, h.tau2);
        const double pi = std::exp(log_pi);
        g(L.scale_index(0)) += sigma1 * (gs1 + gs2) + 1.0;
        g(L.scale_index(1)) += std::exp(lg) * gs2 + 1.0;
        g(L.scale_index(2)) += gpi_lik * pi * std::exp(log_1mpi) + 0.5 - pi;
      }
    } else {
      lp += math::half_cauchy_lpdf(sigma, h.tau1) + log_sigma;
      if (want_grad) g(L.scale_index(0)) += gsig_lik + sigma * math::half_cauchy_dlpdf(sigma, h.tau1) + 1.0;
    }
  }
  if (!std::isfinite(lp)) return math::kNegInf;
  return lp;
}

template long double JointModel::evaluate_fixed<1>(const Vector&, Vector*) const;
template long double JointModel::evaluate_fixed<2>(const Vector&, Vector*) const;
template long double JointModel::evaluate_fixed<3>(const Vector&, Vector*) const;
template long double JointModel::evaluate_fixed<Eigen::Dynamic>(const Vector&, Vector*) const;

}  // namespace varjm
