#pragma once

// Independent transcription of the level/sample-count prescription, kept as a
// literal formula-by-formula port so schedule construction can be checked
// against it by exact integer comparison.

#include <cmath>
#include <vector>

namespace oracle {

struct ScheduleOracle {
  int L = 0;
  int Lp = 0;
  std::vector<int> N_obs, N_qoi;
  std::vector<std::vector<long>> M;
};

inline ScheduleOracle schedule_verbatim(int L, double h0, double r, double t,
                                        double eta_obs, double eta_qoi,
                                        const std::vector<double>& w_obs,
                                        const std::vector<double>& w_qoi) {
  ScheduleOracle out;
  out.L = L;
  out.Lp = static_cast<int>(std::ceil(L * eta_obs / eta_qoi));

  const auto h_at = [&](int l) { return h0 * std::pow(2.0, -l); };
  for (int l = 0; l <= L; ++l) {
    out.N_obs.push_back(static_cast<int>(std::ceil(-std::log2(h_at(l)) * eta_obs * r / t)));
  }
  for (int lp = 0; lp <= out.Lp; ++lp) {
    out.N_qoi.push_back(static_cast<int>(std::ceil(-std::log2(h_at(lp)) * eta_qoi * r / t)));
  }

  const double hL = h_at(L);
  out.M.assign(L + 1, std::vector<long>(out.Lp + 1, 0));
  for (int l = 0; l <= L; ++l) {
    for (int lp = 0; lp <= out.Lp; ++lp) {
      const double w = w_obs[l] * w_qoi[lp];
      double value = 0.0;
      if (l == 0 && lp == 0) {
        value = std::ceil(std::pow(hL, -2.0 * r * eta_obs) * w);
      } else if (l >= 1 && lp == 0) {
        value = std::ceil(std::pow(hL, -2.0 * r * eta_obs) *
                          std::pow(h_at(l), 2.0 * r * eta_obs) * w);
      } else if (l == 0 && lp >= 1) {
        value = std::ceil(std::pow(hL, -2.0 * r * eta_obs) *
                          std::pow(h_at(lp), 2.0 * r * eta_qoi) * w);
      } else {
        value = std::ceil(std::pow(hL, -2.0 * r * eta_obs) *
                          std::pow(h_at(l), 2.0 * r * eta_obs) *
                          std::pow(h_at(lp), 2.0 * r * eta_qoi) * w);
      }
      out.M[l][lp] = static_cast<long>(value);
    }
  }
  return out;
}

// L from a target accuracy:  L = ceil(-log2(eps)/(eta_obs r) + log2(h0))
inline int levels_from_eps(double eps, double h0, double r, double eta_obs) {
  return static_cast<int>(std::ceil(-std::log2(eps) / (eta_obs * r) + std::log2(h0)));
}

}  // namespace oracle
