#include "gavatar/metrics.hpp"

#include <cmath>
#include <vector>

namespace gavatar {

void LossConfig::validate() const {
  require(lambda >= 0.0 && lambda <= 1.0, ErrorKind::Config, "loss lambda must be in [0, 1]");
  require(window >= 1 && window % 2 == 1, ErrorKind::Config, "SSIM window must be odd");
  require(window_sigma > 0.0, ErrorKind::Config, "SSIM sigma must be > 0");
  require(dynamic_range > 0.0, ErrorKind::Config, "dynamic range must be > 0");
}

namespace {

template <typename S> void check_pair(const Image<S>& a, const Image<S>& b) {
  require(a.same_shape(b), ErrorKind::Shape,
          "image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
              " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  require(a.pixels() > 0, ErrorKind::Shape, "empty image");
}

std::vector<double> gaussian_window(const LossConfig& cfg) {
  std::vector<double> g(cfg.window);
  const int r = cfg.window / 2;
  double sum = 0.0;
  for (int k = 0; k < cfg.window; ++k) {
    g[k] = std::exp(-double((k - r) * (k - r)) / (2.0 * cfg.window_sigma * cfg.window_sigma));
    sum += g[k];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Valid separable filtering of a w x h plane to (w-k+1) x (h-k+1).
std::vector<double> filter_valid(const std::vector<double>& in, int w, int h,
                                 const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(static_cast<size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[t] * in[static_cast<size_t>(y) * w + x + t];
      tmp[static_cast<size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += g[t] * tmp[static_cast<size_t>(y + t) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = acc;
    }
  return out;
}

// Adjoint of filter_valid: scatters an (w-k+1) x (h-k+1) map back to w x h.
std::vector<double> filter_adjoint(const std::vector<double>& in, int w, int h,
                                   const std::vector<double>& g) {
  const int k = static_cast<int>(g.size());
  const int ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(static_cast<size_t>(ow) * h, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int t = 0; t < k; ++t)
        tmp[static_cast<size_t>(y + t) * ow + x] += g[t] * in[static_cast<size_t>(y) * ow + x];
  std::vector<double> out(static_cast<size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x)
      for (int t = 0; t < k; ++t)
        out[static_cast<size_t>(y) * w + x + t] += g[t] * tmp[static_cast<size_t>(y) * ow + x];
  return out;
}

template <typename S>
std::vector<double> plane(const Image<S>& img, int ch) {
  std::vector<double> p(img.pixels());
  for (size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(img.data[i * 3 + ch]);
  return p;
}

// Mean SSIM and, when d_a is non-null, its gradient w.r.t. a times scale.
template <typename S>
double ssim_impl(const Image<S>& a, const Image<S>& b, const LossConfig& cfg, double scale,
                 Image<S>* d_a) {
  check_pair(a, b);
  cfg.validate();
  require(a.width >= cfg.window && a.height >= cfg.window, ErrorKind::Shape,
          "SSIM needs images at least as large as the window");
  const auto g = gaussian_window(cfg);
  const int w = a.width, h = a.height;
  const double c1 = std::pow(0.01 * cfg.dynamic_range, 2);
  const double c2 = std::pow(0.03 * cfg.dynamic_range, 2);
  const size_t nv = static_cast<size_t>(w - cfg.window + 1) * (h - cfg.window + 1);
  const double norm = 1.0 / (3.0 * double(nv));
  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    const auto pa = plane(a, ch), pb = plane(b, ch);
    std::vector<double> aa(pa.size()), bb(pa.size()), ab(pa.size());
    for (size_t i = 0; i < pa.size(); ++i) {
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, w, h, g), mu_b = filter_valid(pb, w, h, g);
    const auto e_aa = filter_valid(aa, w, h, g), e_bb = filter_valid(bb, w, h, g);
    const auto e_ab = filter_valid(ab, w, h, g);
    std::vector<double> d_mu, d_eaa, d_eab;
    if (d_a) {
      d_mu.resize(nv);
      d_eaa.resize(nv);
      d_eab.resize(nv);
    }
    for (size_t p = 0; p < nv; ++p) {
      const double ma = mu_a[p], mb = mu_b[p];
      const double va = e_aa[p] - ma * ma, vb = e_bb[p] - mb * mb, cab = e_ab[p] - ma * mb;
      const double a1 = 2.0 * ma * mb + c1, a2 = 2.0 * cab + c2;
      const double b1 = ma * ma + mb * mb + c1, b2 = va + vb + c2;
      const double s = a1 * a2 / (b1 * b2);
      total += s;
      if (d_a) {
        d_eab[p] = 2.0 * a1 / (b1 * b2);
        d_eaa[p] = -s / b2;
        d_mu[p] = (2.0 * mb * a2 - 2.0 * mb * a1) / (b1 * b2) - s * 2.0 * ma / b1 +
                  s * 2.0 * ma / b2;
      }
    }
    if (d_a) {
      const auto g_mu = filter_adjoint(d_mu, w, h, g);
      const auto g_aa = filter_adjoint(d_eaa, w, h, g);
      const auto g_ab = filter_adjoint(d_eab, w, h, g);
      for (size_t i = 0; i < pa.size(); ++i)
        d_a->data[i * 3 + ch] +=
            S(scale * norm * (g_mu[i] + 2.0 * pa[i] * g_aa[i] + pb[i] * g_ab[i]));
    }
  }
  return total * norm;
}

}  // namespace

template <typename S> double l1_loss(const Image<S>& a, const Image<S>& b) {
  check_pair(a, b);
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    acc += std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]));
  return acc / double(a.data.size());
}

template <typename S> double ssim(const Image<S>& a, const Image<S>& b, const LossConfig& cfg) {
  return ssim_impl<S>(a, b, cfg, 0.0, nullptr);
}

template <typename S>
double ssim_grad(const Image<S>& a, const Image<S>& b, const LossConfig& cfg, double scale,
                 Image<S>& d_a) {
  require(d_a.same_shape(a), ErrorKind::Shape, "gradient image size mismatch");
  return ssim_impl<S>(a, b, cfg, scale, &d_a);
}

template <typename S>
double total_loss(const Image<S>& a, const Image<S>& b, const LossConfig& cfg) {
  return (1.0 - cfg.lambda) * l1_loss(a, b) + cfg.lambda * dssim_loss(a, b, cfg);
}

template <typename S> double mse(const Image<S>& a, const Image<S>& b) {
  check_pair(a, b);
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    acc += d * d;
  }
  return acc / double(a.data.size());
}

template <typename S> double psnr(const Image<S>& a, const Image<S>& b, double cap) {
  const double m = mse(a, b);
  if (m <= 0.0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / m));
}

template <typename S>
double total_loss_grad(const Image<S>& rendered, const Image<S>& target, const LossConfig& cfg,
                       Image<S>& d_rendered) {
  check_pair(rendered, target);
  d_rendered = Image<S>(rendered.width, rendered.height);
  const double n = double(rendered.data.size());
  double l1 = 0.0;
  const double wl1 = (1.0 - cfg.lambda) / n;
  for (size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = static_cast<double>(rendered.data[i]) - static_cast<double>(target.data[i]);
    l1 += std::abs(d);
    d_rendered.data[i] = S(d > 0.0 ? wl1 : (d < 0.0 ? -wl1 : 0.0));
  }
  l1 /= n;
  const double s = ssim_impl<S>(rendered, target, cfg, -0.5 * cfg.lambda, &d_rendered);
  return (1.0 - cfg.lambda) * l1 + cfg.lambda * 0.5 * (1.0 - s);
}

#define GAVATAR_INSTANTIATE_METRICS(S)                                                      \
  template double l1_loss<S>(const Image<S>&, const Image<S>&);                             \
  template double ssim<S>(const Image<S>&, const Image<S>&, const LossConfig&);             \
  template double ssim_grad<S>(const Image<S>&, const Image<S>&, const LossConfig&, double, \
                               Image<S>&);                                                  \
  template double total_loss<S>(const Image<S>&, const Image<S>&, const LossConfig&);       \
  template double mse<S>(const Image<S>&, const Image<S>&);                                 \
  template double psnr<S>(const Image<S>&, const Image<S>&, double);                        \
  template double total_loss_grad<S>(const Image<S>&, const Image<S>&, const LossConfig&,   \
                                     Image<S>&);

GAVATAR_INSTANTIATE_METRICS(float)
GAVATAR_INSTANTIATE_METRICS(double)

}  // namespace gavatar
