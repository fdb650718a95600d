#include "corrtrack/cf_layer.hpp"

#include <cmath>
#include <string>

namespace corrtrack {

void CfConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("CfConfig: lambda must be finite and > 0");
  }
}

RealPlane spectral_energy(const FeatureSpectrum& spec) {
  RealPlane energy(spec.rows(), spec.cols(), 0.0);
  const std::size_t n = spec.plane_size();
  for (std::size_t ch = 0; ch < spec.channels(); ++ch) {
    auto c = spec.channel(ch);
    for (std::size_t i = 0; i < n; ++i) energy[i] += std::norm(c[i]);
  }
  return energy;
}

FeatureSpectrum solve_filter(const FeatureSpectrum& x_spec, const ComplexPlane& label_spec,
                             const CfConfig& cfg) {
  cfg.validate();
  if (x_spec.rows() != label_spec.rows() || x_spec.cols() != label_spec.cols()) {
    throw std::invalid_argument("solve_filter: feature and label shapes differ");
  }
  const RealPlane energy = spectral_energy(x_spec);
  FeatureSpectrum w(x_spec.rows(), x_spec.cols(), x_spec.channels());
  const std::size_t n = x_spec.plane_size();
  for (std::size_t ch = 0; ch < x_spec.channels(); ++ch) {
    auto xc = x_spec.channel(ch);
    auto wc = w.channel(ch);
    for (std::size_t i = 0; i < n; ++i) {
      wc[i] = std::conj(label_spec[i]) * xc[i] / (energy[i] + cfg.lambda);
    }
  }
  return w;
}

ComplexPlane response_spectrum(const FeatureSpectrum& filter_spec,
                               const FeatureSpectrum& z_spec) {
  if (!filter_spec.same_shape(z_spec)) {
    throw std::invalid_argument("detect: filter and search features differ in shape");
  }
  ComplexPlane g(z_spec.rows(), z_spec.cols(), Complex{});
  const std::size_t n = z_spec.plane_size();
  for (std::size_t ch = 0; ch < z_spec.channels(); ++ch) {
    auto wc = filter_spec.channel(ch);
    auto zc = z_spec.channel(ch);
    for (std::size_t i = 0; i < n; ++i) g[i] += std::conj(wc[i]) * zc[i];
  }
  return g;
}

RealPlane detect(const FeatureSpectrum& filter_spec, const FeatureSpectrum& z_spec) {
  return ifft2_real(response_spectrum(filter_spec, z_spec), kImagResidueTol, "detect");
}

CfForwardResult cf_forward(const FeatureMap& x, const FeatureMap& z, const RealPlane& label,
                           const CfConfig& cfg) {
  cfg.validate();
  if (x.channels() != z.channels()) {
    throw std::invalid_argument("cf_forward: template has " + std::to_string(x.channels()) +
                                " channels, search has " + std::to_string(z.channels()));
  }
  if (x.rows() != z.rows() || x.cols() != z.cols() || x.rows() != label.rows() ||
      x.cols() != label.cols()) {
    throw std::invalid_argument("cf_forward: spatial shapes differ");
  }
  CfForwardResult out;
  auto& ctx = out.ctx;
  ctx.x_spec = fft2(x);
  ctx.z_spec = fft2(z);
  const ComplexPlane label_spec = fft2(label);
  ctx.label_spec_conj = ComplexPlane(label.rows(), label.cols());
  for (std::size_t i = 0; i < label_spec.size(); ++i) {
    ctx.label_spec_conj[i] = std::conj(label_spec[i]);
  }
  ctx.denom = spectral_energy(ctx.x_spec);
  for (double& d : ctx.denom.values()) d += cfg.lambda;
  ctx.filter_spec = solve_filter(ctx.x_spec, label_spec, cfg);
  ctx.resp_spec = response_spectrum(ctx.filter_spec, ctx.z_spec);
  out.response = ifft2_real(ctx.resp_spec, kImagResidueTol, "cf_forward");
  return out;
}

CfLoss cf_loss(const RealPlane& response, const RealPlane& target) {
  if (!response.same_shape(target)) throw std::invalid_argument("cf_loss: shape mismatch");
  CfLoss out{0.0, RealPlane(response.rows(), response.cols())};
  for (std::size_t i = 0; i < response.size(); ++i) {
    const double d = response[i] - target[i];
    out.loss += d * d;
    out.dloss_dresponse[i] = 2.0 * d;
  }
  return out;
}

namespace {

void check_context(const RealPlane& dldg, const CfForwardContext& ctx, const char* what) {
  if (ctx.x_spec.empty() || ctx.z_spec.empty() || !ctx.x_spec.same_shape(ctx.z_spec) ||
      !ctx.x_spec.same_shape(ctx.filter_spec) || ctx.denom.rows() != ctx.resp_spec.rows() || ctx.denom.cols() != ctx.resp_spec.cols() ||
      ctx.denom.rows() != ctx.x_spec.rows() || ctx.denom.cols() != ctx.x_spec.cols()) {
    throw std::invalid_argument(std::string(what) + ": malformed forward context");
  }
  if (dldg.rows() != ctx.x_spec.rows() || dldg.cols() != ctx.x_spec.cols()) {
    throw std::invalid_argument(std::string(what) + ": gradient shape does not match context");
  }
}

}  // namespace

FeatureMap cf_backward_z(const RealPlane& dloss_dresponse, const CfForwardContext& ctx) {
  check_context(dloss_dresponse, ctx, "cf_backward_z");
  const ComplexPlane grad_resp = fft2(dloss_dresponse);
  FeatureSpectrum dz(ctx.z_spec.rows(), ctx.z_spec.cols(), ctx.z_spec.channels());
  const std::size_t n = dz.plane_size();
  for (std::size_t ch = 0; ch < dz.channels(); ++ch) {
    auto wc = ctx.filter_spec.channel(ch);
    auto out = dz.channel(ch);
    for (std::size_t i = 0; i < n; ++i) out[i] = grad_resp[i] * wc[i];
  }
  return ifft2_real(dz, kImagResidueTol, "cf_backward_z");
}

FeatureMap cf_backward_x(const RealPlane& dloss_dresponse, const CfForwardContext& ctx) {
  check_context(dloss_dresponse, ctx, "cf_backward_x");
  const ComplexPlane grad_resp = fft2(dloss_dresponse);
  FeatureSpectrum dx(ctx.x_spec.rows(), ctx.x_spec.cols(), ctx.x_spec.channels());
  const std::size_t n = dx.plane_size();
  for (std::size_t ch = 0; ch < dx.channels(); ++ch) {
    auto xc = ctx.x_spec.channel(ch);
    auto zc = ctx.z_spec.channel(ch);
    auto out = dx.channel(ch);
    for (std::size_t i = 0; i < n; ++i) {
      const Complex g_conj = std::conj(ctx.resp_spec[i]);
      const double d = ctx.denom[i];
      // d L / d x_hat and d L / d conj(x_hat), treated as independent variables.
      const Complex d_x = grad_resp[i] * (std::conj(zc[i]) * ctx.label_spec_conj[i] -
                                          g_conj * std::conj(xc[i])) / d;
      const Complex d_xconj = grad_resp[i] * (-g_conj * xc[i]) / d;
      out[i] = d_xconj + std::conj(d_x);
    }
  }
  return ifft2_real(dx, kImagResidueTol, "cf_backward_x");
}

}  // namespace corrtrack
