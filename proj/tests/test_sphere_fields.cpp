#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "hfss/initial_data.hpp"
#include "hfss/sphere_fields.hpp"

using namespace hfss;

namespace {

VectorField random_unit_field(const BallMesh& mesh, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  VectorField v(mesh.node_count(), 3);
  for (Index i = 0; i < v.rows(); ++i) {
    Eigen::Vector3d x(g(rng), g(rng), g(rng));
    v.row(i) = x.normalized().transpose();
  }
  return v;
}

// Sum over unordered grid links with at least one interior end.
double link_energy_oracle(const BallMesh& mesh, const VectorField& u) {
  const int n = mesh.resolution();
  double sum = 0.0;
  for (Index p = 0; p < mesh.node_count(); ++p) {
    const auto g = mesh.grid_index(p);
    for (int axis = 0; axis < 3; ++axis) {
      auto q = g;
      ++q[axis];
      if (q[axis] >= n) continue;
      const Index nb = mesh.node_at(q[0], q[1], q[2]);
      if (nb < 0) continue;
      if (!mesh.is_interior(p) && !mesh.is_interior(nb)) continue;
      sum += (u.row(p) - u.row(nb)).squaredNorm();
    }
  }
  return 0.5 * mesh.spacing() * sum;
}

}  // namespace

TEST_CASE("director fields enforce the unit norm") {
  const auto mesh = BallMesh::build(8);
  VectorField v = constant_map(mesh).values();
  v(mesh->interior()[0], 2) = 1.0 + 1e-6;
  CHECK_THROWS_AS(DirectorField(mesh, v), Error);
  v(mesh->interior()[0], 2) = std::nan("");
  CHECK_THROWS_AS(DirectorField(mesh, v), Error);
  CHECK_THROWS_AS(DirectorField(mesh, VectorField::Zero(3, 3)), Error);
  try {
    DirectorField(mesh, v);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConstraintViolation);
  }
}

TEST_CASE("energy density of analytic maps") {
  for (int n : {16, 24}) {
    const auto mesh = BallMesh::build(n);
    const ScalarField ec = energy_density(constant_map(mesh));
    CHECK(ec.cwiseAbs().maxCoeff() == 0.0);
    const ScalarField eg = energy_density(great_circle_map(mesh));
    const double h = mesh->spacing();
    for (const Index node : mesh->interior()) CHECK(std::abs(eg(node) - 0.5) <= h * h / 20.0);
  }
  double previous = 1e9;
  for (int n : {32, 64}) {
    const auto mesh = BallMesh::build(n);
    const ScalarField e = energy_density(equator_map(mesh));
    double err = 0.0;
    for (const Index node : mesh->interior()) {
      const double r = mesh->position(node).norm();
      if (r >= 0.5 && mesh->depth(node) >= 2) err = std::max(err, std::abs(e(node) - 1.0 / (r * r)));
    }
    CHECK(previous / err >= 3.0);
    previous = err;
  }
}

TEST_CASE("energy agrees with an independent link sum") {
  std::mt19937_64 rng(11);
  for (int n : {6, 10}) {
    const auto mesh = BallMesh::build(n);
    const VectorField v = random_unit_field(*mesh, rng);
    CHECK(dirichlet_energy(*mesh, v) == doctest::Approx(link_energy_oracle(*mesh, v)).epsilon(1e-13));
    const DirectorField s = random_smooth_map(mesh, 4);
    CHECK(energy(s) == doctest::Approx(link_energy_oracle(*mesh, s.values())).epsilon(1e-13));
    CHECK(h1_norm(s) == doctest::Approx(std::sqrt(2.0 * energy(s))));
  }
}

TEST_CASE("energy is non-negative and vanishes on constants") {
  std::mt19937_64 rng(2);
  const auto mesh = BallMesh::build(10);
  CHECK(energy(constant_map(mesh, Eigen::Vector3d(1, 2, 3))) == 0.0);
  for (int i = 0; i < 10; ++i) CHECK(dirichlet_energy(*mesh, random_unit_field(*mesh, rng)) > 0.0);
}

TEST_CASE("energy gradient is minus h^3 times the Laplacian") {
  const auto mesh = BallMesh::build(10);
  const VectorField u = random_smooth_map(mesh, 9).values();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  VectorField dir = VectorField::Zero(mesh->node_count(), 3);
  for (const Index n : mesh->interior()) dir.row(n) << g(rng), g(rng), g(rng);
  const double eps = 1e-4;
  // The energy is quadratic, so the central difference is exact up to rounding.
  const double fd = (dirichlet_energy(*mesh, VectorField(u + eps * dir)) -
                     dirichlet_energy(*mesh, VectorField(u - eps * dir))) / (2 * eps);
  const VectorField lap = laplacian(*mesh, u);
  double pairing = 0.0;
  for (const Index n : mesh->interior()) pairing += lap.row(n).dot(dir.row(n));
  CHECK(fd == doctest::Approx(-mesh->cell_volume() * pairing).epsilon(1e-8));
}

TEST_CASE("analytic energies") {
  const auto m64 = BallMesh::build(64);
  CHECK(std::abs(energy(great_circle_map(m64)) - 2.0 * M_PI / 3.0) / (2.0 * M_PI / 3.0) < 0.02);
  double previous = 1.0;
  for (int n : {24, 36, 48}) {
    const double err = std::abs(energy(equator_map(BallMesh::build(n))) - 4.0 * M_PI) / (4.0 * M_PI);
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 0.10);
}

TEST_CASE("tension") {
  const auto mesh = BallMesh::build(16);
  CHECK(tension(constant_map(mesh)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(tension(great_circle_map(mesh)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(tension(great_circle_map(mesh, 2.0)).cwiseAbs().maxCoeff() < 1e-12);
  // Always tangent for unit fields.
  const DirectorField s = random_smooth_map(mesh, 1);
  const VectorField tau = tension(s);
  for (const Index n : mesh->interior()) CHECK(std::abs(tau.row(n).dot(s.values().row(n))) < 1e-12);
  // Equator map: harmonic away from the origin, O(h^2) there.
  double previous = 0.0;
  for (int n : {16, 32, 64}) {
    const auto m = BallMesh::build(n);
    const VectorField t = tension(equator_map(m));
    double worst = 0.0;
    for (const Index node : m->interior())
      if (m->position(node).norm() >= 0.5 && m->depth(node) >= 2) worst = std::max(worst, t.row(node).norm());
    if (previous > 0.0) CHECK(previous / worst >= 3.0);
    previous = worst;
  }
}

TEST_CASE("weak harmonic residual") {
  const auto mesh = BallMesh::build(16);
  const auto tests = weak_test_fields(*mesh, 2, 0.0, 0.85);
  CHECK(tests.size() == 30);
  for (const double r : weak_harmonic_residual(constant_map(mesh), tests)) CHECK(r == 0.0);
  for (const double r : weak_harmonic_residual(great_circle_map(BallMesh::build(24)),
                                               weak_test_fields(*BallMesh::build(24), 2, 0.0, 0.85)))
    CHECK(std::abs(r) < 1e-10);
  const auto annulus = weak_test_fields(*mesh, 2, 0.25, 0.75);
  for (const double r : weak_harmonic_residual(equator_map(mesh), annulus)) CHECK(std::abs(r) < 1e-10);
  // A smooth non-harmonic field has clearly nonzero residuals.
  double worst = 0.0;
  for (const double r : weak_harmonic_residual(random_smooth_map(mesh, 7), tests)) worst = std::max(worst, std::abs(r));
  CHECK(worst > 1e-3);

  VectorField bad = VectorField::Zero(mesh->node_count(), 3);
  bad(mesh->band()[0], 0) = 1.0;
  try {
    weak_harmonic_residual(constant_map(mesh), {bad});
    FAIL("band support accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidTest);
  }
}

TEST_CASE("weak-harmonicity gate") {
  const auto mesh = BallMesh::build(24);
  const DirectorField gc = great_circle_map(mesh);
  CHECK(weak_harmonicity_gate(gc, default_gate_threshold(gc)).passed);
  const DirectorField eq = equator_map(mesh);
  CHECK(weak_harmonicity_gate(eq, default_gate_threshold(eq)).passed);
  const DirectorField rs = random_smooth_map(mesh, 7);
  const GateReport r = weak_harmonicity_gate(rs, default_gate_threshold(rs));
  CHECK_FALSE(r.passed);
  CHECK(r.max_normalized_residual > r.threshold);
  const DirectorField c = constant_map(mesh);
  CHECK(weak_harmonicity_gate(c, default_gate_threshold(c)).max_normalized_residual == 0.0);
}

TEST_CASE("stationarity residual") {
  const auto mesh = BallMesh::build(16);
  const StationarityResidual c = stationarity_residual(constant_map(mesh));
  CHECK(c.residual.cwiseAbs().maxCoeff() == 0.0);
  double previous = 0.0;
  for (int n : {16, 32}) {
    const auto m = BallMesh::build(n);
    const StationarityResidual r = stationarity_residual(great_circle_map(m));
    double worst = 0.0;
    for (const Index node : m->interior())
      if (m->depth(node) >= 2) worst = std::max(worst, r.residual.row(node).cwiseAbs().maxCoeff());
    if (previous > 0.0 && worst > 1e-12) CHECK(previous / worst >= 3.0);
    CHECK(worst < 0.05);
    previous = worst;
  }
}

TEST_CASE("probe functionals") {
  const auto mesh = BallMesh::build(16);
  const DirectorField e3 = constant_map(mesh);
  const ProbeFunctional zero(mesh, VectorField::Zero(mesh->node_count(), 3), "zero");
  CHECK(evaluate_probe(zero, e3) == 0.0);
  CHECK(evaluate_probe(zero, random_smooth_map(mesh, 2)) == 0.0);

  const ProbeFunctional up(mesh, e3.values(), "up");
  const double volume = mesh->interior_count() * mesh->cell_volume();
  CHECK(evaluate_probe(up, e3) == doctest::Approx(ProbeFunctional::transform(volume)).epsilon(1e-14));
  CHECK(std::abs(volume - 4.0 * M_PI / 3.0) < 4.0 * mesh->spacing());
  const ProbeFunctional down(mesh, -e3.values(), "down");
  const DirectorField s = random_smooth_map(mesh, 5);
  CHECK(evaluate_probe(down, s) == doctest::Approx(-evaluate_probe(up, s)).epsilon(1e-14));

  // Bounded and Lipschitz with constant |g| / s0 <= |g|.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    VectorField p(mesh->node_count(), 3), u(mesh->node_count(), 3), v(mesh->node_count(), 3);
    for (Index k = 0; k < p.rows(); ++k) {
      p.row(k) << 3 * g(rng), 3 * g(rng), 3 * g(rng);
      u.row(k) << g(rng), g(rng), g(rng);
      v.row(k) << g(rng), g(rng), g(rng);
    }
    const ProbeFunctional phi(mesh, p, "random");
    CHECK(std::abs(evaluate_probe(phi, u)) <= 1.0);
    CHECK(std::abs(evaluate_probe(phi, u) - evaluate_probe(phi, v)) <=
          phi.l2_norm() * l2_norm(*mesh, VectorField(u - v)) + 1e-12);
  }
  const auto other = BallMesh::build(18);
  CHECK_THROWS_AS(evaluate_probe(up, constant_map(other)), Error);
}

TEST_CASE("the aligned probe is maximised at its datum") {
  const auto mesh = BallMesh::build(12);
  const DirectorField a = random_smooth_map(mesh, 12);
  const ProbePtr phi = make_aligned_probe(a);
  const double top = evaluate_probe(*phi, a);
  for (const Index n : mesh->band()) CHECK(phi->probe().row(n).isZero(0.0));
  CHECK(evaluate_probe(*phi, VectorField(-a.values())) < top);
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    VectorField v(mesh->node_count(), 3);
    std::normal_distribution<double> g;
    for (Index k = 0; k < v.rows(); ++k) v.row(k) = Eigen::RowVector3d(g(rng), g(rng), g(rng)).normalized();
    // Inner-product oracle: <v, a> < <a, a> forces a smaller value.
    CHECK(inner(*mesh, v, phi->probe()) < inner(*mesh, a.values(), phi->probe()));
    CHECK(evaluate_probe(*phi, v) < top);
  }
  // Small perturbations off a still lose.
  VectorField near = a.values();
  near.row(mesh->interior()[3]) = Eigen::RowVector3d(near.row(mesh->interior()[3]) + Eigen::RowVector3d(0.1, 0, 0)).normalized();
  CHECK(evaluate_probe(*phi, near) < top);
}

TEST_CASE("probe family") {
  const auto mesh = BallMesh::build(8);
  const auto family = build_probe_family(mesh);
  REQUIRE(family.size() == 60);
  std::set<std::string> labels;
  for (const auto& p : family) labels.insert(p.label());
  CHECK(labels.size() == 60);
  CHECK(family[0].label() == "+1*e1");
  CHECK(family[1].label() == "-1*e1");
  const DirectorField s = random_smooth_map(mesh, 3);
  for (std::size_t i = 0; i + 1 < family.size(); i += 2) CHECK(family[i](s.values()) == -family[i + 1](s.values()));
  CHECK(build_probe_family(mesh, 1).size() == 24);
}
