#include "multiscout/association.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <string>

#include "multiscout/parallel.hpp"
#include "multiscout/rng.hpp"

namespace multiscout {
namespace {

double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

std::uint64_t tuple_seed(std::uint64_t base, const std::vector<double>& ranges) {
  std::uint64_t h = derive_seed(base, SeedStream::Association, ranges.size());
  for (double r : ranges) h = splitmix64(h ^ std::bit_cast<std::uint64_t>(r));
  return h;
}

void check_lists(const std::vector<std::vector<double>>& range_lists, const AssociationContext& ctx) {
  if (range_lists.size() != ctx.receivers.size())
    throw std::invalid_argument("association: one range list per receiver is required");
  if (range_lists.empty() || range_lists.front().empty())
    throw std::invalid_argument("association: empty range lists");
  for (const auto& l : range_lists)
    if (l.size() != range_lists.front().size())
      throw std::invalid_argument("association: every receiver must report the same number of detections");
}

}  // namespace

std::vector<PermutationTuple> enumerate_assignments(int k, int m, double max_hypotheses) {
  if (k < 1) throw std::invalid_argument("enumerate_assignments: K must be >= 1");
  if (m < 3) throw std::invalid_argument("enumerate_assignments: at least 3 receivers are required");
  const double count = std::pow(factorial(k), m);
  if (count > max_hypotheses)
    throw std::invalid_argument("enumerate_assignments: " + std::to_string(static_cast<long long>(count)) +
                                " hypotheses exceed the cap; pruning is not implemented");
  std::vector<std::vector<int>> perms;
  std::vector<int> p(static_cast<std::size_t>(k));
  std::iota(p.begin(), p.end(), 0);
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));

  std::vector<PermutationTuple> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> idx(static_cast<std::size_t>(m), 0);
  for (;;) {
    PermutationTuple t;
    t.reserve(idx.size());
    for (auto i : idx) t.push_back(perms[i]);
    out.push_back(std::move(t));
    int pos = m - 1;
    while (pos >= 0 && ++idx[static_cast<std::size_t>(pos)] == perms.size()) idx[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
  }
  return out;
}

AssignmentHypothesis score_assignment(const PermutationTuple& perms,
                                      const std::vector<std::vector<double>>& range_lists,
                                      const AssociationContext& ctx, const SolverSettings& solver) {
  check_lists(range_lists, ctx);
  const int k = static_cast<int>(range_lists.front().size());
  if (perms.size() != range_lists.size())
    throw std::invalid_argument("score_assignment: one permutation per receiver is required");
  for (const auto& p : perms) {
    std::vector<int> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < k; ++i)
      if (static_cast<int>(sorted.size()) != k || sorted[static_cast<std::size_t>(i)] != i)
        throw std::invalid_argument("score_assignment: permutation is not a bijection");
  }

  AssignmentHypothesis h;
  h.permutations = perms;
  h.total_cost = 0.0;
  for (int target = 0; target < k; ++target) {
    BistaticMeasurementSet meas;
    meas.transmitter_pos = ctx.transmitter_pos;
    meas.receiver_positions = ctx.receivers;
    for (std::size_t m = 0; m < perms.size(); ++m)
      meas.ranges_m.push_back(range_lists[m][static_cast<std::size_t>(perms[m][static_cast<std::size_t>(target)])]);
    SolverSettings s = solver;
    s.seed = tuple_seed(solver.seed, meas.ranges_m);
    PositionFix fix;
    double cost = std::numeric_limits<double>::infinity();
    try {
      fix = trilaterate(meas, s, ctx.estimate_bias);
      cost = fix.residual_cost;
    } catch (const std::exception&) {
      fix.pos = Vector::Constant(ctx.transmitter_pos.size(), std::numeric_limits<double>::quiet_NaN());
    }
    h.per_target_costs.push_back(cost);
    h.fixes.push_back(fix);
    h.total_cost += cost;
  }
  return h;
}

AssociationResult associate_targets(const std::vector<std::vector<double>>& range_lists,
                                    const AssociationContext& ctx, const AssociationSettings& settings) {
  check_lists(range_lists, ctx);
  const int k = static_cast<int>(range_lists.front().size());
  const auto tuples = enumerate_assignments(k, static_cast<int>(range_lists.size()), settings.max_hypotheses);

  SolverSettings scoring = settings.solver;
  scoring.restarts = settings.scoring_restarts;
  AssociationResult result;
  result.table.resize(tuples.size());
  parallel_for(tuples.size(), settings.threads, [&](std::size_t i) {
    result.table[i] = score_assignment(tuples[i], range_lists, ctx, scoring);
  });

  double min_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.table.size(); ++i)
    if (result.table[i].total_cost < min_cost) min_cost = result.table[i].total_cost;
  if (!std::isfinite(min_cost)) throw DetectionError("associate_targets: every hypothesis failed to solve");

  const double tol = settings.tie_rel_tol * std::max(std::abs(min_cost), 1e-300) + 1e-12;
  bool found = false;
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    if (result.table[i].total_cost <= min_cost + tol) {
      ++result.num_tied;
      if (!found) {
        result.best_index = i;
        found = true;
      }
    }
  }
  result.ambiguous = result.num_tied > static_cast<int>(factorial(k));
  result.best = score_assignment(tuples[result.best_index], range_lists, ctx, settings.solver);
  return result;
}

bool same_pairing(const PermutationTuple& a, const PermutationTuple& b) {
  if (a.size() != b.size() || a.empty()) return false;
  // a[m][k] = b[m][sigma(k)] for a single sigma shared by all receivers.
  const std::size_t k = a.front().size();
  std::vector<int> sigma(k, -1);
  for (std::size_t t = 0; t < k; ++t) {
    const auto it = std::find(b.front().begin(), b.front().end(), a.front()[t]);
    if (it == b.front().end()) return false;
    sigma[t] = static_cast<int>(it - b.front().begin());
  }
  for (std::size_t m = 0; m < a.size(); ++m)
    for (std::size_t t = 0; t < k; ++t)
      if (a[m][t] != b[m][static_cast<std::size_t>(sigma[t])]) return false;
  return true;
}

void write_hypothesis_csv(const AssociationResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_hypothesis_csv: cannot open " + path.string());
  out << "index,assignment";
  const std::size_t k = result.table.empty() ? 0 : result.table.front().per_target_costs.size();
  for (std::size_t t = 0; t < k; ++t) out << ",cost_target" << t;
  out << ",total_cost,selected\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const auto& h = result.table[i];
    out << i << ',';
    for (std::size_t m = 0; m < h.permutations.size(); ++m) {
      out << (m ? " " : "") << '(';
      for (std::size_t t = 0; t < h.permutations[m].size(); ++t) out << (t ? ";" : "") << h.permutations[m][t];
      out << ')';
    }
    for (double c : h.per_target_costs) out << ',' << c;
    out << ',' << h.total_cost << ',' << (i == result.best_index ? 1 : 0) << '\n';
  }
}

}  // namespace multiscout
