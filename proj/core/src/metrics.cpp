#include "geco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "geco/errors.hpp"

namespace geco {

namespace {

constexpr double kPowerFloor = 1e-8;  // 10 log10(1e8) = 80 dB
constexpr double kDbPerNeper = 10.0 / 2.302585092994045684;

void check_pair(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size()) {
    throw ShapeError("si_snr: length mismatch (" + std::to_string(est.size()) + " vs " +
                     std::to_string(ref.size()) + ")");
  }
  if (est.size() < 2) throw ShapeError("si_snr: need at least 2 samples");
}

double mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Shared by the plain and gradient paths so both return identical values.
double si_snr_impl(std::span<const double> est, std::span<const double> ref, std::span<double> grad) {
  check_pair(est, ref);
  const std::size_t n = est.size();
  const double me = mean(est), mr = mean(ref);

  double ref_power = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ref[i] - mr;
    ref_power += r * r;
    dot += (est[i] - me) * r;
  }
  if (ref_power == 0.0) throw DegenerateInputError("si_snr: reference has zero power after zero-meaning");

  const double alpha = dot / ref_power;
  const double proj_power = alpha * alpha * ref_power;
  double err_power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = (est[i] - me) - alpha * (ref[i] - mr);
    err_power += e * e;
  }

  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  if (proj_power == 0.0 && err_power == 0.0) return -kSiSnrCapDb;
  if (err_power <= kPowerFloor * proj_power) return kSiSnrCapDb;
  if (proj_power <= kPowerFloor * err_power) return -kSiSnrCapDb;

  if (!grad.empty()) {
    // d/d est_c of 10 log10(P/E): (10/ln10) (2 proj / P - 2 e / E); both terms are zero-mean,
    // so the centering Jacobian leaves them unchanged.
    for (std::size_t i = 0; i < n; ++i) {
      const double proj = alpha * (ref[i] - mr);
      const double e = (est[i] - me) - proj;
      grad[i] = kDbPerNeper * (2.0 * proj / proj_power - 2.0 * e / err_power);
    }
  }
  return 10.0 * std::log10(proj_power / err_power);
}

void check_lists(const std::vector<std::vector<double>>& est, const std::vector<std::vector<double>>& ref) {
  if (est.empty() || est.size() != ref.size()) {
    throw ShapeError("pit_assign: need K >= 1 estimates and K references (got " +
                     std::to_string(est.size()) + " and " + std::to_string(ref.size()) + ")");
  }
  const std::size_t n = ref.front().size();
  for (const auto& v : est) {
    if (v.size() != n) throw ShapeError("pit_assign: all signals must share one length");
  }
  for (const auto& v : ref) {
    if (v.size() != n) throw ShapeError("pit_assign: all signals must share one length");
  }
}

}  // namespace

double si_snr(std::span<const double> estimate, std::span<const double> reference) {
  return si_snr_impl(estimate, reference, {});
}

double si_snr_with_grad(std::span<const double> estimate, std::span<const double> reference,
                        std::span<double> grad) {
  if (grad.size() != estimate.size()) throw ShapeError("si_snr_with_grad: gradient buffer size");
  return si_snr_impl(estimate, reference, grad);
}

double si_snr_improvement(std::span<const double> estimate, std::span<const double> reference,
                          std::span<const double> mixture) {
  return si_snr(estimate, reference) - si_snr(mixture, reference);
}

PitResult pit_assign(const std::vector<std::vector<double>>& estimates,
                     const std::vector<std::vector<double>>& references) {
  check_lists(estimates, references);
  const std::size_t k = references.size();

  // Pairwise table: score[e][r] = si_snr(estimates[e], references[r]).
  std::vector<std::vector<double>> score(k, std::vector<double>(k));
  for (std::size_t e = 0; e < k; ++e) {
    for (std::size_t r = 0; r < k; ++r) score[e][r] = si_snr(estimates[e], references[r]);
  }

  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best;
  bool first = true;
  do {  // next_permutation visits permutations in lexicographic order
    double total = 0.0;
    for (std::size_t r = 0; r < k; ++r) total += score[static_cast<std::size_t>(perm[r])][r];
    if (first || total > best.total) {
      best.total = total;
      best.permutation = perm;
      first = false;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  best.per_source_sisnr.resize(k);
  best.total = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    best.per_source_sisnr[r] = score[static_cast<std::size_t>(best.permutation[r])][r];
    best.total += best.per_source_sisnr[r];
  }
  return best;
}

double pit_loss(const std::vector<std::vector<double>>& estimates,
                const std::vector<std::vector<double>>& references) {
  return -pit_assign(estimates, references).total;
}

double pit_loss_with_grad(const std::vector<std::vector<double>>& estimates,
                          const std::vector<std::vector<double>>& references,
                          std::vector<std::vector<double>>& grads) {
  const PitResult pit = pit_assign(estimates, references);
  grads.assign(estimates.size(), std::vector<double>(references.front().size(), 0.0));
  for (std::size_t r = 0; r < references.size(); ++r) {
    const auto e = static_cast<std::size_t>(pit.permutation[r]);
    si_snr_with_grad(estimates[e], references[r], grads[e]);
    for (double& g : grads[e]) g = -g;
  }
  return -pit.total;
}

}  // namespace geco
