#pragma once

// Ground-level oracle: grounding of parfactors (counting formulas included),
// brute-force partition functions, and propositional variable elimination.
// Every lifted operator is checked against this module.

#include <cstdint>
#include <map>
#include <optional>

#include "lve/model.hpp"

namespace lve {

struct GroundFactor {
    std::vector<GroundAtom> args;  // distinct randvars
    Potential potential;

    std::string str() const;
};

struct GroundModel {
    std::vector<GroundFactor> factors;
    std::map<GroundAtom, std::size_t> ranges;  // randvar -> range size

    std::vector<GroundAtom> randvar_list() const;  // sorted
    void add_factor(GroundFactor f);
};

// Default cap on joint-assignment counts for brute-force enumeration;
// overridable per call and via LIFTEDVE_CAP in the CLI.
inline constexpr std::uint64_t kDefaultAssignmentCap = std::uint64_t(1) << 24;

// One factor per consistent grounding substitution; the parfactor's exponent
// is applied elementwise. Duplicate ground args collapse by diagonalization.
// Counting-formula arguments are rejected (see expand_crv).
std::vector<GroundFactor> ground_parfactor(const Model& m, const Parfactor& g);

// Grounds a parfactor whose arguments include counting formulas by expanding
// each grounded formula into a factor over its member randvars: the value at
// a joint member assignment is the potential at the induced histogram.
std::vector<GroundFactor> expand_crv(const Model& m, const Parfactor& g, std::uint64_t cap);

// Grounds a whole model; dispatches between the two functions above.
GroundModel ground_model(const Model& m, std::uint64_t cap = kDefaultAssignmentCap);

// Z by full enumeration of joint assignments. log_space switches the
// accumulation to log-sum-exp to dodge underflow.
double brute_force_partition(const GroundModel& gm, std::uint64_t cap = kDefaultAssignmentCap,
                             bool log_space = false);
double log_brute_force_partition(const GroundModel& gm, std::uint64_t cap = kDefaultAssignmentCap);

// Unnormalized marginal over `keep` by variable elimination (min-degree,
// lexicographic tie-break). keep must be a subset of the model's randvars;
// the result's args are sorted.
GroundFactor ground_ve(const GroundModel& gm, const std::vector<GroundAtom>& keep);

// Brute-force unnormalized marginal, for cross-checking ground_ve.
GroundFactor brute_force_marginal(const GroundModel& gm, const std::vector<GroundAtom>& keep,
                                  std::uint64_t cap = kDefaultAssignmentCap);

GroundFactor factor_multiply(const GroundFactor& f1, const GroundFactor& f2);
GroundFactor factor_sum_out(const GroundFactor& f, const GroundAtom& randvar);

}  // namespace lve
