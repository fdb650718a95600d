#pragma once

#include "corrtrack/spectral.hpp"

namespace corrtrack {

struct CfConfig {
  double lambda = 1e-4;

  void validate() const;
};

/// Spectra cached by cf_forward for the two backward passes.
struct CfForwardContext {
  FeatureSpectrum x_spec;
  FeatureSpectrum z_spec;
  ComplexPlane label_spec_conj;
  RealPlane denom;  // sum_k |x_hat^k|^2 + lambda
  ComplexPlane resp_spec;
  FeatureSpectrum filter_spec;
};

struct CfForwardResult {
  RealPlane response;
  CfForwardContext ctx;
};

struct CfLoss {
  double loss = 0.0;
  RealPlane dloss_dresponse;
};

/// Per-bin ridge solution w_hat^l = conj(y_hat) x_hat^l / (sum_k |x_hat^k|^2 + lambda).
/// The denominator sums over every channel.
FeatureSpectrum solve_filter(const FeatureSpectrum& x_spec, const ComplexPlane& label_spec,
                             const CfConfig& cfg);

/// sum_k |x_hat^k|^2, the filter energy at every bin.
RealPlane spectral_energy(const FeatureSpectrum& spec);

/// Correlation response ifft2(sum_l conj(w_hat^l) z_hat^l), real part after
/// the residue check.
RealPlane detect(const FeatureSpectrum& filter_spec, const FeatureSpectrum& z_spec);
ComplexPlane response_spectrum(const FeatureSpectrum& filter_spec, const FeatureSpectrum& z_spec);

CfForwardResult cf_forward(const FeatureMap& x, const FeatureMap& z, const RealPlane& label,
                           const CfConfig& cfg);

/// Squared-error data term and its gradient 2(g - target).
CfLoss cf_loss(const RealPlane& response, const RealPlane& target);

FeatureMap cf_backward_z(const RealPlane& dloss_dresponse, const CfForwardContext& ctx);
FeatureMap cf_backward_x(const RealPlane& dloss_dresponse, const CfForwardContext& ctx);

inline constexpr double kImagResidueTol = 1e-8;

}  // namespace corrtrack
