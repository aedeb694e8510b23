#pragma once

#include <filesystem>
#include <vector>

#include "multiscout/common.hpp"
#include "multiscout/solver.hpp"

namespace multiscout {

// perms[m][k]: index into receiver m's detection list used for target k.
using PermutationTuple = std::vector<std::vector<int>>;

struct AssignmentHypothesis {
  PermutationTuple permutations;
  std::vector<double> per_target_costs;
  double total_cost = 0.0;
  std::vector<PositionFix> fixes;
};

// All (K!)^M tuples in lexicographic order (receiver 0 most significant).
// Throws when the count exceeds max_hypotheses; no pruning is implemented.
std::vector<PermutationTuple> enumerate_assignments(int k, int m, double max_hypotheses = 1e4);

struct AssociationContext {
  Vector transmitter_pos;
  std::vector<Vector> receivers;
  bool estimate_bias = false;
};

struct AssociationSettings {
  SolverSettings solver{};       // used to re-solve the winner
  int scoring_restarts = 8;      // per target while ranking hypotheses
  double max_hypotheses = 1e4;
  double tie_rel_tol = 1e-9;
  int threads = 1;
};

// Scores one tuple. range_lists[m] holds receiver m's K detected bistatic
// ranges in metres. Solver starts are seeded from the range tuple itself, so
// the same tuple always yields the same cost regardless of its target label.
// A solver failure gives an infinite cost.
AssignmentHypothesis score_assignment(const PermutationTuple& perms,
                                      const std::vector<std::vector<double>>& range_lists,
                                      const AssociationContext& ctx, const SolverSettings& solver);

struct AssociationResult {
  AssignmentHypothesis best;
  std::vector<AssignmentHypothesis> table;  // every tuple, enumeration order, scoring costs
  std::size_t best_index = 0;
  int num_tied = 0;        // hypotheses within tolerance of the minimum
  bool ambiguous = false;  // more ties than the K! global relabels explain
};

// Minimum total cost wins; ties go to the lexicographically smallest tuple.
// The winner is then re-solved with settings.solver.
AssociationResult associate_targets(const std::vector<std::vector<double>>& range_lists,
                                    const AssociationContext& ctx, const AssociationSettings& settings);

// True when two tuples differ only by a global relabelling of targets.
bool same_pairing(const PermutationTuple& a, const PermutationTuple& b);

void write_hypothesis_csv(const AssociationResult& result, const std::filesystem::path& path);

}  // namespace multiscout
