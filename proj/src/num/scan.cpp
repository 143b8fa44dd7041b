// Copyright 2026 The RTGMFF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rtgmff/num/scan.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "rtgmff/num/tape.hpp"

namespace rtgmff::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

inline double stable_sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

// Everything the backward pass needs from the forward sweep.
struct ScanSaved {
  std::int64_t L, D, n;
  std::vector<double> delta;   // [L,D]
  std::vector<double> raw_dt;  // [L,D] pre-softplus
  std::vector<double> bmat;    // [L,n]
  std::vector<double> cmat;    // [L,n]
  std::vector<double> gate;    // [L,D]
  std::vector<double> ycore;   // [L,D]
  std::vector<double> states;  // [L,D,n] post-update state at each step
  std::vector<double> abar;    // [L,D,n]
};

}  // namespace

Tensor selective_scan(const Tensor& x, const Tensor& a_log, const Tensor& w_dt, const Tensor& b_dt,
                      const Tensor& w_b, const Tensor& b_b, const Tensor& w_c, const Tensor& b_c,
                      const Tensor& d_skip, const Tensor& w_g, const Tensor& b_g) {
  if (x.rank() != 2) throw std::invalid_argument("selective_scan: expected [L,D] tokens");
  const std::int64_t L = x.dim(0), D = x.dim(1);
  if (a_log.rank() != 2 || a_log.dim(0) != D) throw std::invalid_argument("selective_scan: A_log must be [D,n]");
  const std::int64_t n = a_log.dim(1);
  if (w_dt.rank() != 2 || w_dt.dim(0) != D || w_dt.dim(1) != D || b_dt.numel() != D ||
      w_b.dim(0) != D || w_b.dim(1) != n || b_b.numel() != n || w_c.dim(0) != D || w_c.dim(1) != n ||
      b_c.numel() != n || d_skip.numel() != D || w_g.dim(0) != D || w_g.dim(1) != D || b_g.numel() != D) {
    throw std::invalid_argument("selective_scan: parameter shape mismatch");
  }

  auto saved = std::make_shared<ScanSaved>();
  saved->L = L;
  saved->D = D;
  saved->n = n;
  saved->delta.resize(static_cast<std::size_t>(L * D));
  saved->raw_dt.resize(static_cast<std::size_t>(L * D));
  saved->bmat.resize(static_cast<std::size_t>(L * n));
  saved->cmat.resize(static_cast<std::size_t>(L * n));
  saved->gate.resize(static_cast<std::size_t>(L * D));
  saved->ycore.resize(static_cast<std::size_t>(L * D));
  saved->states.assign(static_cast<std::size_t>(L * D * n), 0.0);
  saved->abar.resize(static_cast<std::size_t>(L * D * n));

  ConstMap X(x.data(), L, D);
  {
    MutMap R(saved->raw_dt.data(), L, D);
    R.noalias() = X * ConstMap(w_dt.data(), D, D);
    R.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b_dt.data(), D);
    MutMap Bm(saved->bmat.data(), L, n);
    Bm.noalias() = X * ConstMap(w_b.data(), D, n);
    Bm.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b_b.data(), n);
    MutMap Cm(saved->cmat.data(), L, n);
    Cm.noalias() = X * ConstMap(w_c.data(), D, n);
    Cm.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b_c.data(), n);
    MutMap G(saved->gate.data(), L, D);
    G.noalias() = X * ConstMap(w_g.data(), D, D);
    G.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b_g.data(), D);
  }
  for (std::size_t i = 0; i < saved->delta.size(); ++i) {
    const double r = saved->raw_dt[i];
    saved->delta[i] = r > 30.0 ? r : std::log1p(std::exp(r));
    saved->gate[i] = stable_sigmoid(saved->gate[i]);
  }

  std::vector<double> a_neg(static_cast<std::size_t>(D * n));
  for (std::size_t i = 0; i < a_neg.size(); ++i) a_neg[i] = -std::exp(a_log.data()[i]);

  Tensor out = Tensor::zeros({L, D});
  std::vector<double> state(static_cast<std::size_t>(D * n), 0.0);
  for (std::int64_t t = 0; t < L; ++t) {
    for (std::int64_t d = 0; d < D; ++d) {
      const double xv = X(t, d);
      const double dt = saved->delta[static_cast<std::size_t>(t * D + d)];
      double* s = state.data() + d * n;
      double* ab = saved->abar.data() + (t * D + d) * n;
      const double* bm = saved->bmat.data() + t * n;
      const double* cm = saved->cmat.data() + t * n;
      const double* an = a_neg.data() + d * n;
      double y = 0.0;
      for (std::int64_t j = 0; j < n; ++j) {
        const double a = std::exp(dt * an[j]);
        ab[j] = a;
        s[j] = a * s[j] + dt * bm[j] * xv;
        y += cm[j] * s[j];
      }
      std::copy(s, s + n, saved->states.data() + (t * D + d) * n);
      y += d_skip.data()[d] * xv;
      saved->ycore[static_cast<std::size_t>(t * D + d)] = y;
      out.data()[t * D + d] = saved->gate[static_cast<std::size_t>(t * D + d)] * y;
    }
  }
  for (double v : state) {
    if (!std::isfinite(v)) throw std::runtime_error("selective_scan: state became non-finite (delta blow-up)");
  }
  check_finite(out, "selective_scan");

  if (should_record({&x, &a_log, &w_dt, &b_dt, &w_b, &b_b, &w_c, &b_c, &d_skip, &w_g, &b_g})) {
    auto xi = x.impl();
    auto ai = a_log.impl();
    auto wdti = w_dt.impl();
    auto bdti = b_dt.impl();
    auto wbi = w_b.impl();
    auto bbi = b_b.impl();
    auto wci = w_c.impl();
    auto bci = b_c.impl();
    auto dski = d_skip.impl();
    auto wgi = w_g.impl();
    auto bgi = b_g.impl();
    auto oi = out.impl();
    Tape::active().record(
        {xi, ai, wdti, bdti, wbi, bbi, wci, bci, dski, wgi, bgi}, oi,
        [=]() {
          const std::int64_t Lb = saved->L, Db = saved->D, nb = saved->n;
          const auto& g = oi->grad;
          std::vector<double> a_neg_b(static_cast<std::size_t>(Db * nb));
          for (std::size_t i = 0; i < a_neg_b.size(); ++i) a_neg_b[i] = -std::exp(ai->data[i]);

          std::vector<double> d_gate(static_cast<std::size_t>(Lb * Db));
          std::vector<double> d_y(static_cast<std::size_t>(Lb * Db));
          for (std::size_t i = 0; i < d_gate.size(); ++i) {
            const double gt = saved->gate[i];
            d_gate[i] = g[i] * saved->ycore[i] * gt * (1.0 - gt);
            d_y[i] = g[i] * gt;
          }

          std::vector<double> d_delta(static_cast<std::size_t>(Lb * Db), 0.0);
          std::vector<double> d_bmat(static_cast<std::size_t>(Lb * nb), 0.0);
          std::vector<double> d_cmat(static_cast<std::size_t>(Lb * nb), 0.0);
          std::vector<double> d_a(static_cast<std::size_t>(Db * nb), 0.0);
          std::vector<double> d_x_local(static_cast<std::size_t>(Lb * Db), 0.0);
          auto& g_dskip = grad_buffer(dski);

          std::vector<double> carry(static_cast<std::size_t>(Db * nb), 0.0);
          std::vector<double> ds(static_cast<std::size_t>(nb));
          for (std::int64_t t = Lb - 1; t >= 0; --t) {
            const double* cm = saved->cmat.data() + t * nb;
            const double* bm = saved->bmat.data() + t * nb;
            for (std::int64_t d = 0; d < Db; ++d) {
              const auto td = static_cast<std::size_t>(t * Db + d);
              const double xv = xi->data[td];
              const double dyv = d_y[td];
              const double dt = saved->delta[td];
              const double* st = saved->states.data() + (t * Db + d) * nb;
              const double* sp = t > 0 ? saved->states.data() + ((t - 1) * Db + d) * nb : nullptr;
              const double* ab = saved->abar.data() + (t * Db + d) * nb;
              const double* an = a_neg_b.data() + d * nb;
              double* cr = carry.data() + d * nb;
              double* dcm = d_cmat.data() + t * nb;
              double* dbm = d_bmat.data() + t * nb;
              double* da = d_a.data() + d * nb;

              g_dskip[static_cast<std::size_t>(d)] += dyv * xv;
              double dxv = dyv * dski->data[d];
              double ddt = 0.0;
              for (std::int64_t j = 0; j < nb; ++j) {
                dcm[j] += dyv * st[j];
                const double ds_j = dyv * cm[j] + cr[j];
                ds[static_cast<std::size_t>(j)] = ds_j;
                const double s_prev = sp ? sp[j] : 0.0;
                const double dab = ds_j * s_prev;
                ddt += dab * ab[j] * an[j] + ds_j * bm[j] * xv;
                da[j] += dab * ab[j] * dt;
                dbm[j] += dt * xv * ds_j;
                dxv += dt * bm[j] * ds_j;
                cr[j] = ab[j] * ds_j;
              }
              d_delta[td] += ddt;
              d_x_local[td] += dxv;
            }
          }

          // softplus'(r) = sigmoid(r)
          std::vector<double> d_raw(static_cast<std::size_t>(Lb * Db));
          for (std::size_t i = 0; i < d_raw.size(); ++i) d_raw[i] = d_delta[i] * stable_sigmoid(saved->raw_dt[i]);

          ConstMap Xm(xi->data.data(), Lb, Db);
          auto apply_proj = [&](const std::vector<double>& dproj, std::int64_t cols,
                                const std::shared_ptr<TensorImpl>& w, const std::shared_ptr<TensorImpl>& b) {
            ConstMap DP(dproj.data(), Lb, cols);
            MutMap GW(grad_buffer(w).data(), Db, cols);
            GW.noalias() += Xm.transpose() * DP;
            auto& gb = grad_buffer(b);
            for (std::int64_t t = 0; t < Lb; ++t)
              for (std::int64_t j = 0; j < cols; ++j) gb[static_cast<std::size_t>(j)] += DP(t, j);
            MutMap GX(d_x_local.data(), Lb, Db);
            GX.noalias() += DP * ConstMap(w->data.data(), Db, cols).transpose();
          };
          apply_proj(d_raw, Db, wdti, bdti);
          apply_proj(d_bmat, nb, wbi, bbi);
          apply_proj(d_cmat, nb, wci, bci);
          apply_proj(d_gate, Db, wgi, bgi);

          auto& g_alog = grad_buffer(ai);
          for (std::size_t i = 0; i < g_alog.size(); ++i) g_alog[i] += d_a[i] * a_neg_b[i];

          auto& gx = grad_buffer(xi);
          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += d_x_local[i];
        });
  }
  return out;
}

}  // namespace rtgmff::num
