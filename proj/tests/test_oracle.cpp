#include <doctest.h>

#include <cmath>
#include <vector>

#include "ggap/numkit.hpp"
#include "ggap/oracle.hpp"

using namespace ggap;
using oracle::TwoPointParams;

namespace {

// Independent check machinery: simulate the two-point gradient flow with a
// very small Euler step directly from the loss definitions, no library
// trajectory code involved. Weight state is (a, b): coefficients along the
// two support axes.
struct TinySim {
  double a = 0.0, b = 0.0;
};

// d/dt (a, b) for the mean squared loss over n1 copies of (e1, y1) and n2
// copies of (e2, y2): loss = (n1/n) (a-y1)^2/2 + (n2/n) (b-y2)^2/2.
// Heun step so the discretization error stays below the check tolerance.
void flow_step(TinySim& s, double n1, double n2, double n, double y1, double y2, double h) {
  const double ra = n1 / n, rb = n2 / n;
  const double k1a = -ra * (s.a - y1), k1b = -rb * (s.b - y2);
  const double k2a = -ra * (s.a + h * k1a - y1), k2b = -rb * (s.b + h * k1b - y2);
  s.a += 0.5 * h * (k1a + k2a);
  s.b += 0.5 * h * (k1b + k2b);
}

}  // namespace

TEST_SUITE("oracle") {
  TEST_CASE("closed-form trajectories match a brute-force flow") {
    TwoPointParams p;
    p.n = 8;
    p.y1 = 1.0;
    p.y2 = -0.5;
    const double t_end = 2.0, h = 1e-5;
    TinySim full, omit1, omit2;
    const double half = static_cast<double>(p.n) / 2.0;
    for (double t = 0.0; t < t_end - h / 2; t += h) {
      flow_step(full, half, half, p.n, p.y1, p.y2, h);
      // omitting one first-axis sample: n-1 samples, n/2 - 1 on axis 1
      flow_step(omit1, half - 1, half, p.n - 1, p.y1, p.y2, h);
      flow_step(omit2, half, half - 1, p.n - 1, p.y1, p.y2, h);
    }
    oracle::TwoPointState st = oracle::closed_form_trajectories(p, t_end);
    CHECK(st.full_a == doctest::Approx(full.a).epsilon(1e-8));
    CHECK(st.full_b == doctest::Approx(full.b).epsilon(1e-8));
    CHECK(st.omit1_a == doctest::Approx(omit1.a).epsilon(1e-8));
    CHECK(st.omit1_b == doctest::Approx(omit1.b).epsilon(1e-8));
    CHECK(st.omit2_a == doctest::Approx(omit2.a).epsilon(1e-8));
    CHECK(st.omit2_b == doctest::Approx(omit2.b).epsilon(1e-8));
  }

  TEST_CASE("closed-form delta matches its definition on simulated states") {
    TwoPointParams p;
    p.n = 6;
    p.y1 = 2.0;
    p.y2 = 1.0;
    for (double t : {0.25, 1.0, 4.0}) {
      oracle::TwoPointState st = oracle::closed_form_trajectories(p, t);
      // Delta: mean over the n leave-one-out batches of the omitted sample's
      // loss at the leave-out weights minus at the full weights. By symmetry
      // the n/2 batches omitting an axis-1 sample share one value.
      double l1_lo = 0.5 * (st.omit1_a - p.y1) * (st.omit1_a - p.y1);
      double l1_full = 0.5 * (st.full_a - p.y1) * (st.full_a - p.y1);
      double l2_lo = 0.5 * (st.omit2_b - p.y2) * (st.omit2_b - p.y2);
      double l2_full = 0.5 * (st.full_b - p.y2) * (st.full_b - p.y2);
      double expect = 0.5 * (l1_lo - l1_full) + 0.5 * (l2_lo - l2_full);
      CHECK(oracle::closed_form_delta(p, t) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("closed-form eps matches the covariance trace definition") {
    TwoPointParams p;
    p.n = 8;
    p.y1 = 1.5;
    p.y2 = -1.0;
    for (double t : {0.0, 0.5, 3.0}) {
      oracle::TwoPointState st = oracle::closed_form_trajectories(p, t);
      // Per-sample gradients live on the two axes: axis-1 samples give
      // (a - y1) e1, axis-2 samples (b - y2) e2. Trace of the covariance
      // divided by n-1, straight from the definition.
      double g1 = st.full_a - p.y1, g2 = st.full_b - p.y2;
      double mean_sq = 0.5 * (g1 * g1 + g2 * g2);
      double mean_a = 0.5 * g1, mean_b = 0.5 * g2;
      double tr = mean_sq - (mean_a * mean_a + mean_b * mean_b);
      double expect = tr / (static_cast<double>(p.n) - 1.0);
      CHECK(oracle::closed_form_eps(p, t) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("delta satisfies its ODE with the closed-form factors") {
    // d delta / dt = -c delta + eps, checked by central differences.
    TwoPointParams p;
    p.n = 10;
    p.y1 = 1.0;
    p.y2 = 0.5;
    const double h = 1e-6;
    for (double t : {0.3, 1.7, 5.0}) {
      double lhs = (oracle::closed_form_delta(p, t + h) - oracle::closed_form_delta(p, t - h)) / (2 * h);
      double rhs = -p.contraction() * oracle::closed_form_delta(p, t) + oracle::closed_form_eps(p, t);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
    }
  }

  TEST_CASE("contraction constant and rates") {
    TwoPointParams p;
    p.n = 8;
    CHECK(p.contraction() == doctest::Approx(6.0 / 7.0).epsilon(1e-15));
    CHECK(p.rate_full() == 0.5);
    CHECK(p.rate_omitted() == doctest::Approx(6.0 / 14.0).epsilon(1e-15));
    CHECK(p.rate_kept() == doctest::Approx(8.0 / 14.0).epsilon(1e-15));
    // Consistency: contraction = rate_omitted * 2 by the structure of the
    // loss-space pullback on this task.
    CHECK(p.contraction() == doctest::Approx(2 * p.rate_omitted()).epsilon(1e-15));
    p.n = 2;
    CHECK(p.contraction() == 0.0);
    p.n = 1;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }

  TEST_CASE("span eigenvalue matches scalar quadrature of the kernel integrand") {
    TwoPointParams p;
    p.n = 8;
    p.eps0 = 1e-3;
    // On the residual span the propagator acts as exp(-t/2) (P eigenvalue
    // n/2, divided by n), A = M - H/n contributes 1 - 1/2, and the damping
    // is the constant contraction. Integrate the scalar integrand finely.
    for (double t_end : {1.0, 3.0}) {
      const std::size_t pts = 20001;
      std::vector<double> grid(pts), vals(pts);
      const double c = p.contraction();
      for (std::size_t k = 0; k < pts; ++k) {
        double s = t_end * static_cast<double>(k) / static_cast<double>(pts - 1);
        grid[k] = s;
        vals[k] = std::exp(-s) * 0.5 * std::exp(-c * (t_end - s));
      }
      double lam = numkit::trapezoid(vals, grid) / (static_cast<double>(p.n) - 1.0);
      oracle::GramEigen ge = oracle::closed_form_gram_eigen(p, t_end);
      CHECK(ge.span == doctest::Approx(lam).epsilon(1e-7));
    }
  }

  TEST_CASE("complement bracket contains the directly integrated eigenvalue") {
    TwoPointParams p;
    p.n = 8;
    p.eps0 = 1e-3;
    for (double t_end : {0.5, 2.0, 10.0}) {
      const std::size_t pts = 40001;
      std::vector<double> grid(pts), vals(pts);
      const double c = p.contraction();
      const double n = static_cast<double>(p.n);
      double cum_eps = 0.0, prev_eps = oracle::perturbation_eps(p, 0.0);
      for (std::size_t k = 0; k < pts; ++k) {
        double s = t_end * static_cast<double>(k) / static_cast<double>(pts - 1);
        grid[k] = s;
        double eps = oracle::perturbation_eps(p, s);
        if (k > 0) cum_eps += 0.5 * (eps + prev_eps) * (grid[k] - grid[k - 1]);
        prev_eps = eps;
        // Complement direction: P eigenvalue eps(s) (so the propagator is
        // exp(-int eps / n), barely below 1), A eigenvalue 1 - eps(s)/n.
        vals[k] = std::exp(-2.0 * cum_eps / n) * (1.0 - eps / n) * std::exp(-c * (t_end - s));
      }
      double direct = numkit::trapezoid(vals, grid) / (n - 1.0);
      oracle::GramEigen ge = oracle::closed_form_gram_eigen(p, t_end);
      CHECK(ge.complement_lo <= direct * (1 + 1e-9));
      CHECK(direct <= ge.complement_hi * (1 + 1e-9));
      CHECK(ge.complement_lo <= ge.complement_hi);
      CHECK(ge.complement_lo >= 0.0);
    }
  }

  TEST_CASE("comparison bounds frozen values") {
    TwoPointParams p;
    p.n = 8;
    p.y1 = 1.0;
    p.y2 = 1.0;
    oracle::ComparisonBounds cb = oracle::comparison_bounds(p);
    CHECK(cb.weight_norm == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(cb.accumulated_perturbation == doctest::Approx(2.0 / 28.0).epsilon(1e-15));
    // Scaling behavior: quadruple the targets, weight norm doubles,
    // accumulation quadruples.
    p.y1 = 2.0;
    p.y2 = 2.0;
    oracle::ComparisonBounds cb2 = oracle::comparison_bounds(p);
    CHECK(cb2.weight_norm == doctest::Approx(2 * cb.weight_norm).epsilon(1e-12));
    CHECK(cb2.accumulated_perturbation ==
          doctest::Approx(4 * cb.accumulated_perturbation).epsilon(1e-12));
  }

  TEST_CASE("perturbed blocks have the advertised structure") {
    TwoPointParams p;
    p.n = 6;
    p.eps0 = 1e-2;
    std::vector<double> grid = {0.0, 0.5, 2.0};
    oracle::PerturbedBlocks pb = oracle::two_point_perturbed_blocks(p, grid);
    REQUIRE(pb.P.size() == 3);
    REQUIRE(pb.A.size() == 3);
    std::vector<std::vector<double>> span = oracle::two_point_span(p.n);
    REQUIRE(span.size() == 2);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      // Span vectors are eigenvectors with eigenvalue n/2.
      for (const auto& v : span) {
        std::vector<double> pv = numkit::matvec(pb.P[k], v);
        for (std::size_t i = 0; i < v.size(); ++i)
          CHECK(pv[i] == doctest::Approx(3.0 * v[i]).epsilon(1e-12));
      }
      // A complement vector (difference of two same-axis supports) gets
      // eps(t).
      std::vector<double> comp(p.n, 0.0);
      comp[0] = 1.0 / std::sqrt(2.0);
      comp[1] = -1.0 / std::sqrt(2.0);
      std::vector<double> pc = numkit::matvec(pb.P[k], comp);
      const double eps = oracle::perturbation_eps(p, grid[k]);
      for (std::size_t i = 0; i < comp.size(); ++i)
        CHECK(pc[i] == doctest::Approx(eps * comp[i]).epsilon(1e-12));
      // A = I - P/n on this task (M = I, H = P).
      for (std::size_t i = 0; i < p.n; ++i)
        for (std::size_t j = 0; j < p.n; ++j) {
          double expect = (i == j ? 1.0 : 0.0) - pb.P[k](i, j) / static_cast<double>(p.n);
          CHECK(pb.A[k](i, j) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    // eps(t): flat on [0,1], then 1/t^2 decay.
    CHECK(oracle::perturbation_eps(p, 0.0) == p.eps0);
    CHECK(oracle::perturbation_eps(p, 1.0) == p.eps0);
    CHECK(oracle::perturbation_eps(p, 2.0) == doctest::Approx(p.eps0 / 4.0).epsilon(1e-15));
  }

  TEST_CASE("span basis is orthonormal") {
    for (std::size_t n : {2, 4, 8}) {
      std::vector<std::vector<double>> span = oracle::two_point_span(n);
      REQUIRE(span.size() == 2);
      CHECK(numkit::dot(span[0], span[0]) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(numkit::dot(span[1], span[1]) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(std::abs(numkit::dot(span[0], span[1])) <= 1e-14);
    }
  }

  TEST_CASE("n = 2 degenerates gracefully") {
    TwoPointParams p;
    p.n = 2;
    p.eps0 = 1e-3;
    CHECK(p.contraction() == 0.0);
    // With zero contraction the span eigenvalue is a plain integral of
    // exp(-s)/2 over [0, t], divided by n-1 = 1.
    double t_end = 2.0;
    oracle::GramEigen ge = oracle::closed_form_gram_eigen(p, t_end);
    CHECK(ge.span == doctest::Approx(0.5 * (1.0 - std::exp(-t_end))).epsilon(1e-9));
    // Delta stays finite and positive.
    CHECK(oracle::closed_form_delta(p, 1.0) > 0.0);
  }
}
