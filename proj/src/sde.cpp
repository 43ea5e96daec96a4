#include "qfb/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "qfb/random.hpp"
#include "qfb/sbe.hpp"

namespace qfb {

namespace {

constexpr std::size_t kChunk = 256;

std::vector<std::size_t> sample_steps(std::size_t n_steps, std::size_t every) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k <= n_steps; k += every) out.push_back(k);
  if (out.back() != n_steps) out.push_back(n_steps);
  return out;
}

/// Calls visit(step, b, dI) for step 0..n; dI is the current integrated over the step.
template <class Visit>
double integrate(const SimConfig& cfg, const SbeCoefficients<double>& sbe, std::uint64_t path,
                 std::size_t n_steps, Visit&& visit) {
  WienerSource noise(substream_seed(cfg.seed, path), cfg.dt);
  const double ceiling = containment_ceiling(cfg.dt);
  Bloch3d b = cfg.initial_state;
  double defect = std::abs(b.squaredNorm() - 1);
  visit(std::size_t{0}, b, 0.0);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const double dW = noise.next();
    const double dI = sbe.photocurrent(b, cfg.dt, dW);
    b = sbe.step(b, cfg.dt, dW);
    const double r2 = b.squaredNorm();
    defect = std::max(defect, std::abs(r2 - 1));
    if (cfg.check_containment && !(r2 <= ceiling)) {
      std::ostringstream msg;
      msg << "trajectory " << path << " left the Bloch ball at t = " << static_cast<double>(k) * cfg.dt
          << " (r^2 = " << r2 << ")";
      throw ContainmentError(msg.str());
    }
    visit(k, b, dI);
  }
  return defect;
}

/// Runs fn(begin, end) over fixed-size chunks of [0, n) on a small thread pool and
/// returns the per-chunk results in chunk order.
template <class Acc, class Fn>
std::vector<Acc> run_chunks(std::size_t n, Fn&& fn) {
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<Acc> results(n_chunks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      try {
        results[c] = fn(c * kChunk, std::min(n, (c + 1) * kChunk));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_chunks;
      }
    }
  };
  const std::size_t n_threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(n_chunks, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

/// Moment sums per sampled time, taken about the initial state to limit cancellation.
struct Moments {
  std::vector<Eigen::Vector3d> sum, sum_sq;
  std::vector<double> r2;

  explicit Moments(std::size_t n = 0) : sum(n, Eigen::Vector3d::Zero()), sum_sq(n, Eigen::Vector3d::Zero()), r2(n, 0) {}

  void merge(const Moments& o) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sum_sq[i] += o.sum_sq[i];
      r2[i] += o.r2[i];
    }
  }
};

double sample_stderr(double sum, double sum_sq, double n) {
  const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
  return std::sqrt(var / n);
}

}  // namespace

double max_recommended_dt(double gamma) { return 1e-2 / gamma; }

double containment_ceiling(double dt) { return 1 + 10 * kPurityDriftConstant * std::sqrt(dt); }

std::vector<std::string> check_config(const SimConfig& cfg) {
  validate(cfg.params);
  if (!(cfg.params.eta > 0)) throw std::invalid_argument("conditioned dynamics require eta > 0");
  if (!(cfg.dt > 0) || !std::isfinite(cfg.dt)) throw std::invalid_argument("dt must be positive");
  if (!(cfg.t_final >= 0) || !std::isfinite(cfg.t_final)) throw std::invalid_argument("t_final must be non-negative");
  if (cfg.n_trajectories < 1) throw std::invalid_argument("need at least one trajectory");
  if (cfg.record_every < 1) throw std::invalid_argument("record_every must be at least 1");
  check_bloch(cfg.initial_state);
  std::vector<std::string> warnings;
  if (cfg.dt > max_recommended_dt(cfg.params.gamma)) {
    std::ostringstream msg;
    msg << "dt = " << cfg.dt << " exceeds the recommended 1e-2/gamma = " << max_recommended_dt(cfg.params.gamma);
    if (!cfg.allow_large_dt) throw std::invalid_argument(msg.str() + " (set allow_large_dt to override)");
    warnings.push_back(msg.str());
  }
  return warnings;
}

std::size_t step_count(const SimConfig& cfg) {
  return static_cast<std::size_t>(std::llround(cfg.t_final / cfg.dt));
}

Trajectory simulate_path(const SimConfig& cfg, std::uint64_t path) {
  Trajectory traj;
  traj.warnings = check_config(cfg);
  const SbeCoefficients<double> sbe(cfg.params);
  const std::size_t n = step_count(cfg);
  const std::size_t expected = n / cfg.record_every + 2;
  traj.times.reserve(expected);
  traj.states.reserve(expected);
  traj.photocurrent_increments.reserve(expected);
  double pending_current = 0;
  traj.max_purity_defect = integrate(cfg, sbe, path, n, [&](std::size_t k, const Bloch3d& b, double dI) {
    pending_current += dI;
    if (k % cfg.record_every == 0 || k == n) {
      traj.times.push_back(static_cast<double>(k) * cfg.dt);
      traj.states.push_back(b);
      traj.photocurrent_increments.push_back(pending_current);
      pending_current = 0;
    }
  });
  return traj;
}

Trajectory simulate(const SimConfig& cfg) { return simulate_path(cfg, 0); }

EnsembleStats ensemble(const SimConfig& cfg) {
  check_config(cfg);
  const SbeCoefficients<double> sbe(cfg.params);
  const std::size_t n = step_count(cfg);
  const auto samples = sample_steps(n, cfg.record_every);
  const std::size_t m = samples.size();
  const Bloch3d origin = cfg.initial_state;

  auto chunks = run_chunks<Moments>(cfg.n_trajectories, [&](std::size_t begin, std::size_t end) {
    Moments acc(m);
    for (std::size_t path = begin; path < end; ++path) {
      std::size_t slot = 0;
      integrate(cfg, sbe, path, n, [&](std::size_t k, const Bloch3d& b, double) {
        if (slot < m && samples[slot] == k) {
          const Eigen::Vector3d d = b - origin;
          acc.sum[slot] += d;
          acc.sum_sq[slot] += d.cwiseProduct(d);
          acc.r2[slot] += b.squaredNorm();
          ++slot;
        }
      });
    }
    return acc;
  });
  Moments total(m);
  for (const auto& c : chunks) total.merge(c);

  EnsembleStats stats;
  stats.n_trajectories = cfg.n_trajectories;
  stats.stderr_defined = cfg.n_trajectories > 1;
  const double count = static_cast<double>(cfg.n_trajectories);
  for (std::size_t i = 0; i < m; ++i) {
    stats.times.push_back(static_cast<double>(samples[i]) * cfg.dt);
    stats.mean_bloch.push_back(origin + total.sum[i] / count);
    Eigen::Vector3d se;
    for (int c = 0; c < 3; ++c) {
      se(c) = stats.stderr_defined ? sample_stderr(total.sum[i](c), total.sum_sq[i](c), count)
                                   : std::numeric_limits<double>::quiet_NaN();
    }
    stats.stderr_bloch.push_back(se);
    stats.mean_r_squared.push_back(total.r2[i] / count);
  }
  return stats;
}

EquivalenceReport compare_with_deterministic(const EnsembleStats& stats, const SimConfig& cfg, double n_sigma) {
  const auto drift = drift_model(cfg.params);
  EquivalenceReport rep;
  for (std::size_t i = 0; i < stats.times.size(); ++i) {
    const double t = stats.times[i];
    if (t == 0) continue;
    const Bloch3d exact = deterministic_solution(drift, cfg.initial_state, t);
    double worst = 0;
    for (int c = 0; c < 3; ++c) {
      const double diff = std::abs(stats.mean_bloch[i](c) - exact(c));
      const double se = stats.stderr_bloch[i](c);
      if (!stats.stderr_defined) {
        worst = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (se > 0) {
        worst = std::max(worst, diff / se);
      } else if (diff > 1e-12) {
        worst = std::numeric_limits<double>::infinity();
      }
    }
    rep.times.push_back(t);
    rep.deterministic.push_back(exact);
    rep.max_z.push_back(worst);
    if (!(worst <= n_sigma)) rep.pass = false;
    if (!(worst <= rep.worst_z)) rep.worst_z = worst;
  }
  return rep;
}

Params equator_params(double gamma) { return {gamma, 1.0, 0.0, -std::sqrt(gamma) / 2}; }

EquatorReport equator_diagnostic(const SimConfig& cfg, double band, double settle_time) {
  const Params& p = cfg.params;
  const double sg = std::sqrt(p.gamma);
  if (p.eta != 1 || std::abs(p.alpha) > 1e-12 * p.gamma || std::abs(p.lambda + sg / 2) > 1e-12 * sg) {
    throw std::invalid_argument("equator diagnostic needs the unit-efficiency equatorial design");
  }
  check_config(cfg);
  if (settle_time < 0) settle_time = 1 / p.gamma;
  const SbeCoefficients<double> sbe(p);
  const std::size_t n = step_count(cfg);
  const auto samples = sample_steps(n, cfg.record_every);
  const std::size_t m = samples.size();
  const auto settle_steps = static_cast<std::size_t>(std::ceil(settle_time / cfg.dt - 1e-9));

  struct Acc {
    std::vector<double> x, xx, x2, x2x2, inc, incinc;
    std::size_t plus = 0, minus = 0;
  };
  auto chunks = run_chunks<Acc>(cfg.n_trajectories, [&](std::size_t begin, std::size_t end) {
    Acc acc{std::vector<double>(m), std::vector<double>(m), std::vector<double>(m),
            std::vector<double>(m), std::vector<double>(m), std::vector<double>(m)};
    for (std::size_t path = begin; path < end; ++path) {
      std::size_t slot = 0;
      int side = 0;
      std::size_t entered = 0;
      double prev_x2 = 0;
      integrate(cfg, sbe, path, n, [&](std::size_t k, const Bloch3d& b, double) {
        const double x = b(0);
        const int now = std::abs(x - 1) < band ? 1 : (std::abs(x + 1) < band ? -1 : 0);
        if (now != side) {
          side = now;
          entered = k;
        }
        if (slot < m && samples[slot] == k) {
          const double x2 = x * x;
          acc.x[slot] += x;
          acc.xx[slot] += x * x;
          acc.x2[slot] += x2;
          acc.x2x2[slot] += x2 * x2;
          if (slot > 0) {
            const double d = x2 - prev_x2;
            acc.inc[slot] += d;
            acc.incinc[slot] += d * d;
          }
          prev_x2 = x2;
          ++slot;
        }
      });
      if (side != 0 && n - entered >= settle_steps) (side > 0 ? acc.plus : acc.minus)++;
    }
    return acc;
  });

  std::vector<double> x(m), xx(m), x2(m), x2x2(m), inc(m), incinc(m);
  std::size_t plus = 0, minus = 0;
  for (const auto& c : chunks) {
    for (std::size_t i = 0; i < m; ++i) {
      x[i] += c.x[i];
      xx[i] += c.xx[i];
      x2[i] += c.x2[i];
      x2x2[i] += c.x2x2[i];
      inc[i] += c.inc[i];
      incinc[i] += c.incinc[i];
    }
    plus += c.plus;
    minus += c.minus;
  }

  EquatorReport rep;
  rep.n_trajectories = cfg.n_trajectories;
  const double count = static_cast<double>(cfg.n_trajectories);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < m; ++i) {
    rep.times.push_back(static_cast<double>(samples[i]) * cfg.dt);
    rep.mean_x.push_back(x[i] / count);
    rep.mean_x2.push_back(x2[i] / count);
    rep.stderr_x.push_back(count > 1 ? sample_stderr(x[i], xx[i], count) : nan);
    rep.stderr_x2.push_back(count > 1 ? sample_stderr(x2[i], x2x2[i], count) : nan);
    if (i > 0) {
      rep.x2_increment.push_back(inc[i] / count);
      rep.x2_increment_stderr.push_back(count > 1 ? sample_stderr(inc[i], incinc[i], count) : nan);
    }
  }
  rep.fraction_plus = static_cast<double>(plus) / count;
  rep.fraction_minus = static_cast<double>(minus) / count;
  rep.fraction_undecided = 1 - rep.fraction_plus - rep.fraction_minus;
  return rep;
}

TimeAverage time_average(const Trajectory& traj, double t_begin, double t_end, std::size_t n_batches) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    if (traj.times[i] >= t_begin && traj.times[i] <= t_end) idx.push_back(i);
  }
  if (n_batches < 2 || idx.size() < 2 * n_batches) {
    throw std::invalid_argument("not enough samples in the averaging window");
  }
  TimeAverage out;
  out.samples = idx.size();
  out.batches = n_batches;
  double r2_sum = 0, r2_sq = 0;
  for (const auto i : idx) {
    out.mean += traj.states[i];
    const double r2 = traj.states[i].squaredNorm();
    r2_sum += r2;
    r2_sq += r2 * r2;
  }
  const double count = static_cast<double>(idx.size());
  out.mean /= count;
  out.mean_r_squared = r2_sum / count;
  out.r_squared_variance = std::max(0.0, (r2_sq - r2_sum * r2_sum / count) / (count - 1));

  const std::size_t per = idx.size() / n_batches;
  std::vector<Bloch3d> means(n_batches, Bloch3d::Zero());
  Bloch3d grand = Bloch3d::Zero();
  for (std::size_t b = 0; b < n_batches; ++b) {
    for (std::size_t j = 0; j < per; ++j) means[b] += traj.states[idx[b * per + j]];
    means[b] /= static_cast<double>(per);
    grand += means[b];
  }
  grand /= static_cast<double>(n_batches);
  Eigen::Vector3d var = Eigen::Vector3d::Zero();
  for (const auto& mb : means) var += (mb - grand).cwiseAbs2();
  var /= static_cast<double>(n_batches - 1);
  out.stderr_mean = (var / static_cast<double>(n_batches)).cwiseSqrt();
  return out;
}

}  // namespace qfb
