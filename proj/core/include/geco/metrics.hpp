#pragma once

#include <span>
#include <vector>

namespace geco {

/// SI-SNR values are confined to [-80, 80] dB: the error power is floored at 1e-8 of the
/// projection power (and vice versa), so perfect reconstruction reports +80 dB.
inline constexpr double kSiSnrCapDb = 80.0;

/// Scale-invariant SNR in dB. Both signals are zero-meaned first.
/// ShapeError on length mismatch or fewer than 2 samples; DegenerateInputError when the
/// zero-meaned reference has no power.
double si_snr(std::span<const double> estimate, std::span<const double> reference);

/// si_snr and its gradient with respect to `estimate` (written to `grad`, same length).
/// The gradient is zero where the cap is active.
double si_snr_with_grad(std::span<const double> estimate, std::span<const double> reference,
                        std::span<double> grad);

/// si_snr(estimate, reference) - si_snr(mixture, reference).
double si_snr_improvement(std::span<const double> estimate, std::span<const double> reference,
                          std::span<const double> mixture);

struct PitResult {
  std::vector<int> permutation;          ///< estimate index assigned to reference k
  std::vector<double> per_source_sisnr;  ///< si_snr(estimates[permutation[k]], references[k])
  double total = 0.0;
};

/// Utterance-level permutation-invariant assignment by exhaustive search over all K!
/// permutations, maximizing the summed SI-SNR. Ties go to the lexicographically smallest
/// permutation.
PitResult pit_assign(const std::vector<std::vector<double>>& estimates,
                     const std::vector<std::vector<double>>& references);

/// -pit_assign(estimates, references).total
double pit_loss(const std::vector<std::vector<double>>& estimates,
                const std::vector<std::vector<double>>& references);

/// pit_loss and its gradient with respect to each estimate under the winning permutation.
double pit_loss_with_grad(const std::vector<std::vector<double>>& estimates,
                          const std::vector<std::vector<double>>& references,
                          std::vector<std::vector<double>>& grads);

}  // namespace geco
