// Computes the barycenter of three 2x2 Gaussians with gradient descent and
// checks it against the fixed-point equation.

#include <iostream>

#include "bures/bures.hpp"

int main() {
  using namespace bures;

  Matrix a(2, 2), b(2, 2), c(2, 2);
  a << 0.8, -0.4, -0.4, 0.3;
  b << 0.3, -0.5, -0.5, 1.0;
  c << 0.5, 0.5, 0.5, 0.6;
  const BuresDistribution q = BuresDistribution::uniform(
      {GaussianMeasure::centered(a), GaussianMeasure::centered(b), GaussianMeasure::centered(c)});

  const SolverResult result = gd(q, default_init(q));
  std::cout << "converged: " << std::boolalpha << result.converged << " after "
            << result.iterations << " iterations\n";
  std::cout << "barycenter covariance:\n" << result.final.cov().matrix() << "\n";
  std::cout << "objective: " << objective(q, result.final) << "\n";
  std::cout << "fixed-point residual: " << fixed_point_residual(q, result.final) << "\n";

  std::cout << "\nSGD on the same atoms, exp:c=0.7 schedule:\n";
  const std::vector<GaussianMeasure> stream(q.atoms().begin() + 1, q.atoms().end());
  const SolverResult sgd_result = sgd(stream, q.atom(0), StepSchedule::experiment(0.7));
  std::cout << "W2^2 to the GD barycenter: " << w2_distance_sq(sgd_result.final, result.final)
            << "\n";
  return 0;
}
