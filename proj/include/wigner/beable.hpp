#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wigner/scenario.hpp"

namespace wigner {

// Pointer-configuration ("beable") dynamics: every record factor always
// indicates a definite label, and the configuration performs a Markov walk
// whose single-time marginals match the Born weights of the uncollapsed
// state. Two transport kernels are provided; both preserve marginals, and
// both exhibit the record flip when a coherent measurement recombines
// branches.

enum class KernelKind { kIndependentResample, kMinimalTransport };

inline const char* kernel_name(KernelKind k) {
  return k == KernelKind::kIndependentResample ? "independent" : "minimal";
}

// A point in the discrete configuration space: one basis label per factor.
struct BeableConfig {
  SpacePtr space;
  std::size_t index = 0;

  std::vector<std::string> labels() const {
    return space->labels_of_index(index);
  }
  std::string label(const std::string& factor) const {
    return labels()[space->factor_position(factor)];
  }
  nlohmann::json to_json() const {
    nlohmann::json j;
    auto ls = labels();
    for (std::size_t i = 0; i < ls.size(); ++i)
      j[space->factors()[i].label] = ls[i];
    return j;
  }
};

// Conditional transition table from a pre-step to a post-step configuration
// distribution. Rows exist for every config with nonzero pre weight and are
// probability distributions; the pushforward of `pre` equals `post`.
struct TransportKernel {
  KernelKind kind = KernelKind::kIndependentResample;
  std::vector<double> pre, post;
  std::map<std::size_t, std::vector<std::pair<std::size_t, double>>> rows;

  double marginal_deviation() const {
    std::vector<double> pushed(post.size(), 0.0);
    for (const auto& [i, row] : rows)
      for (const auto& [j, k] : row) pushed[j] += pre[i] * k;
    double dev = 0.0;
    for (std::size_t j = 0; j < post.size(); ++j)
      dev = std::max(dev, std::abs(pushed[j] - post[j]));
    return dev;
  }

  // Probability that one application changes the given factor's label.
  double flip_probability(const ProductSpace& space,
                          const std::string& factor) const {
    std::size_t pos = space.factor_position(factor);
    double p = 0.0;
    for (const auto& [i, row] : rows)
      for (const auto& [j, k] : row)
        if (space.digit(i, pos) != space.digit(j, pos)) p += pre[i] * k;
    return p;
  }
};

namespace beable_detail {

inline void check_normalized(const std::vector<double>& d, const char* which) {
  double s = 0.0;
  for (double x : d) {
    if (x < -1e-12) throw error("negative weight in distribution");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw error(std::string(which) + " distribution sums to " +
                format_double(s));
}

inline double factor_tv(const ProductSpace& space,
                        const std::vector<double>& p,
                        const std::vector<double>& q,
                        const std::string& factor) {
  std::size_t pos = space.factor_position(factor);
  std::size_t d = space.factor(factor).dim();
  std::vector<double> pm(d, 0.0), qm(d, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    pm[space.digit(i, pos)] += p[i];
    qm[space.digit(i, pos)] += q[i];
  }
  double tv = 0.0;
  for (std::size_t k = 0; k < d; ++k) tv += std::abs(pm[k] - qm[k]);
  return tv / 2.0;
}

}  // namespace beable_detail

inline TransportKernel build_kernel(const std::vector<double>& pre,
                                    const std::vector<double>& post,
                                    KernelKind kind) {
  if (pre.size() != post.size())
    throw error("pre/post distributions have different sizes");
  beable_detail::check_normalized(pre, "pre");
  beable_detail::check_normalized(post, "post");

  TransportKernel k;
  k.kind = kind;
  k.pre = pre;
  k.post = post;

  std::vector<std::size_t> post_support;
  for (std::size_t j = 0; j < post.size(); ++j)
    if (post[j] > 0.0) post_support.push_back(j);

  if (kind == KernelKind::kIndependentResample) {
    std::vector<std::pair<std::size_t, double>> row;
    for (std::size_t j : post_support) row.push_back({j, post[j]});
    for (std::size_t i = 0; i < pre.size(); ++i)
      if (pre[i] > 0.0) k.rows[i] = row;
  } else {
    // stay with mass min(p,q); the excess moves to the deficits in
    // proportion, which maximizes the total stay probability
    double total_deficit = 0.0;
    std::vector<double> deficit(post.size(), 0.0);
    for (std::size_t j = 0; j < post.size(); ++j) {
      deficit[j] = std::max(0.0, post[j] - pre[j]);
      total_deficit += deficit[j];
    }
    for (std::size_t i = 0; i < pre.size(); ++i) {
      if (pre[i] <= 0.0) continue;
      auto& row = k.rows[i];
      double stay = std::min(pre[i], post[i]);
      if (stay > 0.0) row.push_back({i, stay / pre[i]});
      double excess = pre[i] - stay;
      if (excess > 0.0 && total_deficit > 0.0)
        for (std::size_t j = 0; j < post.size(); ++j)
          if (deficit[j] > 0.0)
            row.push_back({j, (excess / pre[i]) * (deficit[j] / total_deficit)});
    }
  }

  for (const auto& [i, row] : k.rows) {
    double s = 0.0;
    for (const auto& [j, w] : row) s += w;
    if (std::abs(s - 1.0) > kNumericTol)
      throw error("kernel row sums to " + format_double(s));
  }
  if (k.marginal_deviation() > kNumericTol)
    throw error("kernel does not preserve marginals (deviation " +
                format_double(k.marginal_deviation()) + ")");
  return k;
}

// Everyone collapses at their own measurement: the textbook/objective-
// reduction reading of the protocol. Idempotent.
inline Scenario grw_scenario(Scenario base) {
  for (auto& s : base.steps)
    if (s.kind == MeasurementStep::Kind::kMeasure) s.collapse = true;
  return base;
}

// Born weights over configurations before any step and after each step of a
// collapse-free scenario.
inline std::vector<std::vector<double>> pointer_distributions(
    const Scenario& sc) {
  for (const auto& s : sc.steps)
    if (s.kind == MeasurementStep::Kind::kMeasure && s.collapse)
      throw error(
          "pointer sampling needs a collapse-free scenario (beables ride on "
          "the uncollapsed state)");
  RunResult rr = run(sc);
  std::vector<std::vector<double>> out;
  auto weights = [](const StateVector& st) {
    std::vector<double> w(st.amps.size());
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = clamp_probability(std::norm(st.amps[i]));
    return w;
  };
  out.push_back(weights(superpose(sc.space, sc.preparation)));
  for (const auto& st : rr.branches[0].history) out.push_back(weights(st));
  return out;
}

// One sampled history of the pointer configuration: entry t is the config
// in force after step t (entry 0 is the prepared configuration).
struct Trajectory {
  std::uint64_t id = 0;
  std::vector<std::size_t> configs;

  nlohmann::json to_json(const ProductSpace& space) const {
    nlohmann::json path = nlohmann::json::array();
    for (std::size_t t = 0; t < configs.size(); ++t) {
      nlohmann::json cfg;
      auto ls = space.labels_of_index(configs[t]);
      for (std::size_t i = 0; i < ls.size(); ++i)
        cfg[space.factors()[i].label] = ls[i];
      path.push_back(nlohmann::json::array({t, cfg}));
    }
    return {{"id", id}, {"path", path}};
  }
};

struct SampleReport {
  SpacePtr space;
  KernelKind kind = KernelKind::kIndependentResample;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;
  std::vector<std::vector<double>> born;  // per time slice
  // fraction of trajectories whose first and last label differ, per factor
  std::map<std::string, double> flip_frequency;
  double max_marginal_deviation = 0.0;  // empirical vs Born, all slices
  double tolerance = 0.0;               // 4/sqrt(n)

  std::string trajectories_jsonl() const {
    std::string out;
    for (const auto& t : trajectories)
      out += t.to_json(*space).dump() + "\n";
    return out;
  }

  nlohmann::json summary_json() const {
    nlohmann::json j;
    j["n"] = trajectories.size();
    j["kernel"] = kernel_name(kind);
    j["seed"] = seed;
    j["flip_frequency"] = flip_frequency;
    j["max_marginal_deviation"] = max_marginal_deviation;
    j["tolerance"] = tolerance;
    j["marginals_within_tolerance"] = max_marginal_deviation <= tolerance;
    return j;
  }
};

namespace beable_detail {

// Counter-based per-trajectory stream: any worker layout reproduces the same
// trajectories for a fixed root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct Stream {
  std::uint64_t state;
  explicit Stream(std::uint64_t root, std::uint64_t id)
      : state(splitmix64(root ^ splitmix64(id + 1))) {}
  double uniform() {
    state = splitmix64(state);
    return (state >> 11) * 0x1.0p-53;
  }
};

inline std::size_t pick(const std::vector<std::pair<std::size_t, double>>& row,
                        double u) {
  double acc = 0.0;
  for (const auto& [j, w] : row) {
    acc += w;
    if (u < acc) return j;
  }
  return row.back().first;
}

}  // namespace beable_detail

inline SampleReport sample_trajectories(const Scenario& sc, KernelKind kind,
                                        std::size_t n, std::uint64_t seed) {
  if (n == 0) throw error("need at least one trajectory");
  SampleReport rep;
  rep.space = sc.space;
  rep.kind = kind;
  rep.seed = seed;
  rep.born = pointer_distributions(sc);
  rep.tolerance = 4.0 / std::sqrt(static_cast<double>(n));

  std::vector<TransportKernel> kernels;
  for (std::size_t t = 0; t + 1 < rep.born.size(); ++t)
    kernels.push_back(build_kernel(rep.born[t], rep.born[t + 1], kind));

  std::vector<std::pair<std::size_t, double>> init;
  for (std::size_t i = 0; i < rep.born[0].size(); ++i)
    if (rep.born[0][i] > 0.0) init.push_back({i, rep.born[0][i]});

  std::vector<std::vector<double>> counts(
      rep.born.size(), std::vector<double>(sc.space->dim(), 0.0));
  rep.trajectories.reserve(n);
  for (std::uint64_t id = 0; id < n; ++id) {
    beable_detail::Stream rng(seed, id);
    Trajectory tr;
    tr.id = id;
    std::size_t cur = beable_detail::pick(init, rng.uniform());
    tr.configs.push_back(cur);
    for (const auto& k : kernels) {
      cur = beable_detail::pick(k.rows.at(cur), rng.uniform());
      tr.configs.push_back(cur);
    }
    for (std::size_t t = 0; t < tr.configs.size(); ++t) {
      if (rep.born[t][tr.configs[t]] <= 1e-12)
        throw error("trajectory visits a zero-weight configuration");
      counts[t][tr.configs[t]] += 1.0;
    }
    rep.trajectories.push_back(std::move(tr));
  }

  for (std::size_t t = 0; t < counts.size(); ++t)
    for (std::size_t i = 0; i < counts[t].size(); ++i)
      rep.max_marginal_deviation =
          std::max(rep.max_marginal_deviation,
                   std::abs(counts[t][i] / static_cast<double>(n) -
                            rep.born[t][i]));

  for (const auto& f : sc.space->factors()) {
    std::size_t pos = sc.space->factor_position(f.label);
    double flips = 0.0;
    for (const auto& tr : rep.trajectories)
      if (sc.space->digit(tr.configs.front(), pos) !=
          sc.space->digit(tr.configs.back(), pos))
        flips += 1.0;
    rep.flip_frequency[f.label] = flips / static_cast<double>(n);
  }
  return rep;
}

}  // namespace wigner
