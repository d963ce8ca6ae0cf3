// Copyright 2026 The irlm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "irlm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace irlm::diagnostics {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kHolds: return "holds";
    case Verdict::kFails: return "fails";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "inconclusive";
}

namespace {

/// (c, d, weight) of an n-fold composite R_n = Y_n ... Y_1.
struct CompositeSample {
  double lip = 0.0;
  double disp = 0.0;
  double weight = 1.0;
};

struct CompositeSet {
  std::vector<CompositeSample> samples;
  bool exact = false;
};

std::uint64_t ipow(std::uint64_t base, std::size_t exp, std::uint64_t cap) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    if (r > cap / std::max<std::uint64_t>(base, 1)) return cap + 1;
    r *= base;
  }
  return r;
}

CompositeSet composites(const SystemModel& model, std::size_t n, const Options& o,
                        std::uint64_t tag) {
  CompositeSet set;
  if (n < 1) throw Error(ErrorKind::kParameter, "composite length must be >= 1");
  if (model.finite_support()) {
    const auto& atoms = model.atom_samples();
    const std::size_t k = atoms.size();
    if (n == 1) {
      set.exact = true;
      for (std::size_t i = 0; i < k; ++i)
        set.samples.push_back({atoms[i].lip, atoms[i].disp, model.pi().atoms()[i].weight});
      return set;
    }
    const std::uint64_t total = ipow(k, n, o.enumeration_cap);
    if (total <= o.enumeration_cap) {
      set.exact = true;
      set.samples.resize(total);
      parallel_for(total, [&](std::size_t begin, std::size_t end) {
        std::vector<Map> maps(n);
        for (std::size_t idx = begin; idx < end; ++idx) {
          std::size_t code = idx;
          double w = 1.0;
          for (std::size_t j = 0; j < n; ++j) {
            const std::size_t a = code % k;
            code /= k;
            maps[j] = model.pi().atoms()[a].map;
            w *= model.pi().atoms()[a].weight;
          }
          set.samples[idx] = {model.composite_lip(maps), model.composite_disp(maps), w};
        }
      });
      return set;
    }
  }
  const std::size_t ns = o.nsamples;
  if (ns < 1) throw Error(ErrorKind::kParameter, "nsamples must be >= 1");
  set.samples.resize(ns);
  const double w = 1.0 / static_cast<double>(ns);
  parallel_for(ns, [&](std::size_t begin, std::size_t end) {
    std::vector<Map> maps(n);
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = make_rng(stream_seed(o.seed, tag), i);
      for (std::size_t j = 0; j < n; ++j) maps[j] = model.draw(rng);
      if (n == 1) {
        const MapSample s = model.sample(maps[0]);
        set.samples[i] = {s.lip, s.disp, w};
      } else {
        set.samples[i] = {model.composite_lip(maps), model.composite_disp(maps), w};
      }
    }
  });
  return set;
}

Estimate integrate(const CompositeSet& set,
                   const std::function<double(const CompositeSample&)>& f,
                   std::vector<double>* values = nullptr) {
  if (set.exact) {
    Estimate e;
    e.exact = true;
    e.count = set.samples.size();
    double total = 0.0;
    for (const auto& s : set.samples) {
      const double v = f(s);
      if (std::isfinite(v)) total += s.weight * v;
      else ++e.excluded;
    }
    e.value = total;
    return e;
  }
  std::vector<double> v;
  v.reserve(set.samples.size());
  for (const auto& s : set.samples) v.push_back(f(s));
  Estimate e = mean_estimate(v);
  if (values) *values = std::move(v);
  return e;
}

IntegralEstimate judge_finite(const SystemModel& model, Estimate e,
                              const std::vector<double>& values, const Options& o) {
  IntegralEstimate out;
  out.estimate = e;
  if (e.exact) {
    out.finite = out.empirical = e.excluded == 0 ? Verdict::kHolds : Verdict::kInconclusive;
    out.basis = "exact";
    return out;
  }
  out.basis = "empirical";
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  if (v.size() < 10 || e.excluded > 0) {
    out.finite = out.empirical = Verdict::kInconclusive;
    return out;
  }
  // Running means at ten logarithmically spaced checkpoints.
  const double lo = std::log(std::max<double>(10.0, static_cast<double>(v.size()) / 1000.0));
  const double hi = std::log(static_cast<double>(v.size()));
  std::vector<double> prefix(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + v[i];
  double mn = INFINITY, mx = -INFINITY;
  for (int c = 0; c < 10; ++c) {
    const std::size_t n = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(std::exp(lo + (hi - lo) * c / 9.0))), 1, v.size());
    const double m = prefix[n] / static_cast<double>(n);
    mn = std::min(mn, m);
    mx = std::max(mx, m);
  }
  const double final_mean = prefix.back() / static_cast<double>(v.size());
  out.running_mean_spread = final_mean != 0.0 ? (mx - mn) / std::abs(final_mean) : 0.0;
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t top = std::max<std::size_t>(1, (v.size() + 999) / 1000);
  const double top_sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(top), 0.0);
  const double all_sum = prefix.back();
  out.tail_share = all_sum != 0.0 ? top_sum / all_sum : 0.0;
  out.empirical = (out.running_mean_spread < o.stability_tolerance &&
                   out.tail_share <= o.tail_share_cap)
                      ? Verdict::kHolds
                      : Verdict::kInconclusive;
  out.finite = out.empirical;
  // Atoms perturbed by Gaussian translations or log-normal entries: every
  // polynomial moment of lip and disp is finite.
  if (!model.pi().finite_support()) {
    out.finite = Verdict::kHolds;
    out.basis = "gaussian-tails";
  }
  return out;
}

void check_eta(double eta) {
  if (!(eta >= 1.0) || !std::isfinite(eta))
    throw Error(ErrorKind::kParameter, "eta must be >= 1");
}

}  // namespace

IntegralEstimate moment_M(const SystemModel& model, double eta, const Options& o) {
  check_eta(eta);
  const CompositeSet set = composites(model, 1, o, 0x4d);
  std::vector<double> values;
  const Estimate e = integrate(
      set, [eta](const CompositeSample& s) { return std::pow(1.0 + s.lip + s.disp, eta); },
      &values);
  return judge_finite(model, e, values, o);
}

IntegralEstimate moment_Mprime(const SystemModel& model, double eta, const Options& o) {
  check_eta(eta);
  const CompositeSet set = composites(model, 1, o, 0x4d);
  std::vector<double> values;
  const Estimate e = integrate(
      set,
      [eta](const CompositeSample& s) {
        return s.lip * std::pow(1.0 + s.lip + s.disp, eta - 1.0);
      },
      &values);
  return judge_finite(model, e, values, o);
}

namespace {
double contraction_integrand(const CompositeSample& s, double eta) {
  return s.lip * std::pow(std::max(s.lip, 1.0), eta - 1.0);
}
}  // namespace

Estimate contraction_C(const SystemModel& model, double eta, std::size_t n, const Options& o) {
  check_eta(eta);
  if (n < 1) throw Error(ErrorKind::kParameter, "contraction_C needs n >= 1");
  const CompositeSet set = composites(model, n, o, 0x43 + n);
  return integrate(set, [eta](const CompositeSample& s) { return contraction_integrand(s, eta); });
}

std::vector<ThresholdCheck> moment_thresholds(double gamma0, double r, double s) {
  const double base = std::max(r, s + 1.0);
  std::vector<ThresholdCheck> out = {
      {"A", r + base, false},
      {"B", 3.0 * r + base, false},
      {"C", r + base, false},
      {"S", 2.0 * r + s + 1.0, false},
  };
  for (auto& t : out) t.cleared = gamma0 > t.threshold;
  return out;
}

MomentReport check_H(const SystemModel& model, double gamma0, std::size_t n0max,
                     const Options& o) {
  if (!(gamma0 > 0.0)) throw Error(ErrorKind::kParameter, "gamma0 must be > 0");
  if (n0max < 1) throw Error(ErrorKind::kParameter, "n0max must be >= 1");
  MomentReport rep;
  rep.gamma0 = gamma0;
  rep.n0max = n0max;
  rep.eta_M = gamma0 + 1.0;
  rep.eta_Mprime = 2.0 * gamma0 + 1.0;
  rep.exact_lipschitz = model.exact_lipschitz();
  rep.M = moment_M(model, rep.eta_M, o);
  rep.Mprime = moment_Mprime(model, rep.eta_Mprime, o);
  rep.M_verdict = rep.M.finite;
  rep.Mprime_verdict = rep.Mprime.finite;

  bool all_fail = true;
  for (std::size_t n = 1; n <= n0max; ++n) {
    const Estimate c = contraction_C(model, rep.eta_Mprime, n, o);
    rep.C[n] = c;
    if (!rep.n0 && c.value + o.confidence * c.se < 1.0) rep.n0 = n;
    if (c.value - o.confidence * c.se < 1.0) all_fail = false;
    if (rep.n0) break;
  }
  if (rep.n0) rep.C1_at_n0 = contraction_C(model, 1.0, *rep.n0, o);
  rep.C_verdict = rep.n0 ? Verdict::kHolds : (all_fail ? Verdict::kFails : Verdict::kInconclusive);

  if (rep.C_verdict == Verdict::kFails) {
    rep.H_verdict = Verdict::kFails;
  } else if (rep.C_verdict == Verdict::kHolds && rep.M_verdict == Verdict::kHolds &&
             rep.Mprime_verdict == Verdict::kHolds) {
    rep.H_verdict = Verdict::kHolds;
  } else {
    rep.H_verdict = Verdict::kInconclusive;
  }
  const auto env = model.envelope();
  rep.thresholds = moment_thresholds(gamma0, env.r, env.s);
  return rep;
}

double kappa0(const MomentReport& report) {
  if (!report.n0)
    throw Error(ErrorKind::kHypothesis, "no contraction index n0 was found");
  const double c =
      report.C1_at_n0 ? report.C1_at_n0->value : report.C.at(*report.n0).value;
  return std::pow(c, 1.0 / static_cast<double>(*report.n0));
}

Lambda0Result find_lambda0(const SystemModel& model, double gamma0, std::size_t n0,
                           const Options& o) {
  if (!(gamma0 > 0.0)) throw Error(ErrorKind::kParameter, "gamma0 must be > 0");
  const CompositeSet set = composites(model, n0, o, 0x43 + n0);
  Lambda0Result res;
  std::optional<std::size_t> best;
  for (int k = 0; k <= 20; ++k) {
    const double lambda = std::ldexp(1.0, -k);
    const Estimate theta = integrate(set, [&](const CompositeSample& s) {
      return s.lip * std::pow(std::max(s.lip, 1.0) + lambda * s.disp, 2.0 * gamma0);
    });
    res.grid.push_back({lambda, theta});
    if (!best && theta.value + o.confidence * theta.se < 1.0) best = res.grid.size() - 1;
  }
  if (!best) {
    std::ostringstream os;
    os << "no admissible lambda0 on the dyadic grid; theta0 values:";
    for (const auto& g : res.grid) os << ' ' << g.lambda << ':' << g.theta.value;
    throw Error(ErrorKind::kHypothesis, os.str());
  }
  res.lambda0 = res.grid[*best].lambda;
  res.theta0 = res.grid[*best].theta;
  return res;
}

}  // namespace irlm::diagnostics
