#include "hfss/sphere_fields.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <string>

namespace hfss {

namespace {

void require_unit(const DirectorField& u, const char* what) {
  const double defect = u.max_norm_defect();
  if (!(defect <= kUnitTolerance)) {
    throw Error(ErrorKind::ConstraintViolation,
                std::string(what) + ": unit-norm defect " + std::to_string(defect));
  }
}

std::vector<std::array<int, 3>> monomial_exponents(int degree) {
  std::vector<std::array<int, 3>> out;
  for (int d = 0; d <= degree; ++d)
    for (int a = d; a >= 0; --a)
      for (int b = d - a; b >= 0; --b) out.push_back({a, b, d - a - b});
  return out;
}

std::string monomial_label(const std::array<int, 3>& p, int component) {
  std::string s;
  const char* axes = "xyz";
  for (int axis = 0; axis < 3; ++axis) {
    if (p[axis] == 0) continue;
    s += axes[axis];
    if (p[axis] > 1) s += "^" + std::to_string(p[axis]);
  }
  if (s.empty()) s = "1";
  return s + "*e" + std::to_string(component + 1);
}

double monomial(const Eigen::Vector3d& x, const std::array<int, 3>& p) {
  double v = 1.0;
  for (int axis = 0; axis < 3; ++axis)
    for (int q = 0; q < p[axis]; ++q) v *= x(axis);
  return v;
}

}  // namespace

double max_norm_defect(const VectorField& values) {
  double worst = 0.0;
  for (Index node = 0; node < values.rows(); ++node) {
    const double n = values.row(node).norm();
    if (!std::isfinite(n)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::abs(n - 1.0));
  }
  return worst;
}

DirectorField::DirectorField(MeshPtr mesh, VectorField values, double tolerance)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  detail::require_rows(*mesh_, values_.rows(), "DirectorField");
  const double defect = hfss::max_norm_defect(values_);
  if (!(defect <= tolerance)) {
    throw Error(ErrorKind::ConstraintViolation,
                "director field off the sphere by " + std::to_string(defect));
  }
}

ScalarField energy_density(const DirectorField& u) {
  require_unit(u, "energy_density");
  return energy_density(u.mesh(), u.values());
}

double energy(const DirectorField& u) {
  require_unit(u, "energy");
  return dirichlet_energy(u.mesh(), u.values());
}

VectorField tension(const DirectorField& u) {
  require_unit(u, "tension");
  return tension(u.mesh(), u.values());
}

double h1_norm(const DirectorField& u) { return std::sqrt(2.0 * energy(u)); }

std::vector<double> weak_harmonic_residual(const DirectorField& u,
                                           const std::vector<VectorField>& tests) {
  require_unit(u, "weak_harmonic_residual");
  const BallMesh& mesh = u.mesh();
  const VectorField& values = u.values();
  const GradientField grad_u = gradient(mesh, values);
  const ScalarField e = energy_density(mesh, values);

  std::vector<double> residuals;
  residuals.reserve(tests.size());
  for (const VectorField& eta : tests) {
    detail::require_rows(mesh, eta.rows(), "weak_harmonic_residual");
    for (const Index b : mesh.band()) {
      if (eta.row(b).squaredNorm() != 0.0) {
        throw Error(ErrorKind::InvalidTest,
                    "test field does not vanish on band node " + std::to_string(b));
      }
    }
    VectorField projected = eta;
    for (const Index node : mesh.interior())
      projected.row(node) -= projected.row(node).dot(values.row(node)) * values.row(node);
    const GradientField grad_eta = gradient(mesh, projected);
    double sum = 0.0;
    for (const Index node : mesh.interior()) {
      sum += grad_u[node].cwiseProduct(grad_eta[node]).sum() -
             2.0 * e(node) * values.row(node).dot(projected.row(node));
    }
    residuals.push_back(sum * mesh.cell_volume());
  }
  return residuals;
}

StationarityResidual stationarity_residual(const DirectorField& u) {
  require_unit(u, "stationarity_residual");
  const BallMesh& mesh = u.mesh();
  const GradientField grad = gradient(mesh, u.values());
  const Index count = mesh.node_count();

  // Per-node stress quantities: |d_j u|^2 and <d_j u, d_k u>.
  std::vector<Eigen::Matrix3d> gram(static_cast<std::size_t>(count), Eigen::Matrix3d::Zero());
  for (const Index node : mesh.interior()) gram[node] = grad[node].transpose() * grad[node];

  StationarityResidual out;
  out.residual = VectorField::Zero(count, 3);
  const double inv_2h = 1.0 / (2.0 * mesh.spacing());
  const auto interior = mesh.interior();
  for (Index slot = 0; slot < static_cast<Index>(interior.size()); ++slot) {
    const Index node = interior[slot];
    if (mesh.depth(node) < 2) continue;
    for (int k = 0; k < 3; ++k) {
      const Index kp = mesh.neighbor(slot, 2 * k), km = mesh.neighbor(slot, 2 * k + 1);
      double r = (gram[kp].trace() - gram[km].trace()) * inv_2h;
      for (int j = 0; j < 3; ++j) {
        const Index jp = mesh.neighbor(slot, 2 * j), jm = mesh.neighbor(slot, 2 * j + 1);
        r -= 2.0 * (gram[jp](j, k) - gram[jm](j, k)) * inv_2h;
      }
      out.residual(node, k) = r;
      out.integrated_abs(k) += std::abs(r);
    }
  }
  out.integrated_abs *= mesh.cell_volume();
  return out;
}

std::vector<VectorField> weak_test_fields(const BallMesh& mesh, int degree, double inner_radius,
                                          double outer_radius) {
  const double centre = inner_radius > 0.0 ? 0.5 * (inner_radius + outer_radius) : 0.0;
  const double width = inner_radius > 0.0 ? 0.5 * (outer_radius - inner_radius) : outer_radius;
  ScalarField cutoff = ScalarField::Zero(mesh.node_count());
  for (const Index node : mesh.interior()) {
    const double s = (mesh.position(node).norm() - centre) / width;
    if (std::abs(s) < 1.0) cutoff(node) = std::pow(1.0 - s * s, 3);
  }
  std::vector<VectorField> tests;
  for (const auto& p : monomial_exponents(degree)) {
    for (int component = 0; component < 3; ++component) {
      VectorField eta = VectorField::Zero(mesh.node_count(), 3);
      for (const Index node : mesh.interior())
        eta(node, component) = cutoff(node) * monomial(mesh.position(node), p);
      tests.push_back(std::move(eta));
    }
  }
  return tests;
}

double default_gate_threshold(const DirectorField& a) {
  const double h = a.mesh().spacing();
  return 10.0 * h * h * h1_norm(a);
}

GateReport weak_harmonicity_gate(const DirectorField& a, double threshold) {
  const BallMesh& mesh = a.mesh();
  const auto tests = weak_test_fields(mesh, 2, 0.0, 0.85);
  const auto residuals = weak_harmonic_residual(a, tests);
  GateReport report;
  report.threshold = threshold;
  for (std::size_t t = 0; t < tests.size(); ++t) {
    VectorField projected = tests[t];
    for (const Index node : mesh.interior())
      projected.row(node) -= projected.row(node).dot(a.values().row(node)) * a.values().row(node);
    const GradientField g = gradient(mesh, projected);
    double norm2 = 0.0;
    for (const Index node : mesh.interior()) norm2 += g[node].squaredNorm();
    norm2 *= mesh.cell_volume();
    if (norm2 <= 0.0) continue;
    report.max_normalized_residual =
        std::max(report.max_normalized_residual, std::abs(residuals[t]) / std::sqrt(norm2));
  }
  report.passed = report.max_normalized_residual <= threshold;
  return report;
}

ProbeFunctional::ProbeFunctional(MeshPtr mesh, VectorField probe, std::string label)
    : mesh_(std::move(mesh)), probe_(std::move(probe)), label_(std::move(label)) {
  detail::require_rows(*mesh_, probe_.rows(), "ProbeFunctional");
  if (!probe_.allFinite()) throw Error(ErrorKind::Config, "probe field is not finite");
}

double ProbeFunctional::l2_norm() const { return hfss::l2_norm(*mesh_, probe_); }

double evaluate_probe(const ProbeFunctional& phi, const VectorField& u) {
  detail::require_rows(phi.mesh(), u.rows(), "evaluate_probe");
  return ProbeFunctional::transform(inner(phi.mesh(), u, phi.probe()));
}

double evaluate_probe(const ProbeFunctional& phi, const DirectorField& u) {
  if (!phi.mesh().same_as(u.mesh()))
    throw Error(ErrorKind::MeshMismatch, "probe and field live on different meshes");
  return evaluate_probe(phi, u.values());
}

ProbePtr make_aligned_probe(const DirectorField& a) {
  require_unit(a, "make_aligned_probe");
  VectorField g = a.values();
  for (const Index b : a.mesh().band()) g.row(b).setZero();
  return std::make_shared<const ProbeFunctional>(a.mesh_ptr(), std::move(g), "aligned");
}

std::vector<SignedProbe> build_probe_family(const MeshPtr& mesh, int degree) {
  std::vector<SignedProbe> family;
  for (const auto& p : monomial_exponents(degree)) {
    for (int component = 0; component < 3; ++component) {
      VectorField g = VectorField::Zero(mesh->node_count(), 3);
      for (const Index node : mesh->interior())
        g(node, component) = monomial(mesh->position(node), p);
      auto probe =
          std::make_shared<const ProbeFunctional>(mesh, std::move(g), monomial_label(p, component));
      family.push_back({probe, +1});
      family.push_back({probe, -1});
    }
  }
  return family;
}

}  // namespace hfss
