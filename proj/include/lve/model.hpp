#pragma once

// Core vocabulary for parfactor models: domains, predicates, atoms, counting
// formulas, constraints, substitutions, permutations, potentials, parfactors.
// Everything is an immutable value; operators build new objects.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace lve {

// ---------------------------------------------------------------------------
// Errors

struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct OperatorError : std::runtime_error {  // operator applied while not applicable
    using std::runtime_error::runtime_error;
};
struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Rational exponent carried by a parfactor (pending fractional scaling).

struct Rational {
    long long num = 1;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d);

    static Rational one() { return Rational(); }
    bool is_one() const { return num == 1 && den == 1; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    Rational times(const Rational& o) const { return Rational(num * o.num, den * o.den); }
    Rational times_int(long long k) const { return Rational(num * k, den); }
    Rational reciprocal() const { return Rational(den, num); }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
};

// ---------------------------------------------------------------------------
// Terms, atoms, counting formulas

struct Term {
    bool is_var = false;
    std::string name;

    static Term var(std::string n) { return Term{true, std::move(n)}; }
    static Term cst(std::string n) { return Term{false, std::move(n)}; }
    auto operator<=>(const Term&) const = default;
};

struct Predicate {
    std::string name;
    std::size_t arity = 0;
    std::vector<std::string> range;  // ordered, >= 2 distinct elements

    std::size_t range_index(const std::string& value) const;
};

struct Atom {
    std::string pred;
    std::vector<Term> args;

    std::vector<std::string> logvars() const;  // distinct, in order of first occurrence
    bool is_ground() const;
    bool operator==(const Atom&) const = default;
};

// A ground atom is a randvar. Compact key type used by the grounding oracle.
struct GroundAtom {
    std::string pred;
    std::vector<std::string> args;

    auto operator<=>(const GroundAtom&) const = default;
    std::string str() const;
};

GroundAtom to_ground(const Atom& a);  // throws if any arg is a logvar

// #_{X:C'}[P(...,X,...)] -- the counted logvar is bound by the formula and
// carries its own domain binding; the inner constraint may exclude constants
// only.
struct CountingFormula {
    std::string counted;
    std::string domain;                  // domain name of the counted logvar
    std::vector<std::string> excluded;   // sorted constant exclusions on counted
    Atom atom;                           // contains `counted` among its args

    std::vector<std::string> free_logvars() const;  // atom logvars minus counted
};

using Arg = std::variant<Atom, CountingFormula>;

inline bool is_atom(const Arg& a) { return std::holds_alternative<Atom>(a); }
inline const Atom& as_atom(const Arg& a) { return std::get<Atom>(a); }
inline const CountingFormula& as_formula(const Arg& a) { return std::get<CountingFormula>(a); }

// Structural equality; counting formulas compare up to renaming of the
// counted logvar (same member pattern, domain, exclusions).
bool args_equal(const Arg& a, const Arg& b);
std::vector<std::string> arg_free_logvars(const Arg& a);
std::string arg_str(const Arg& a);

// ---------------------------------------------------------------------------
// Constraints: conjunction of inequalities X != t (t a constant or a logvar).

class Constraint {
public:
    Constraint() = default;

    // Throws ModelError on X != X.
    void add_neq_const(const std::string& var, const std::string& constant);
    void add_neq_var(const std::string& a, const std::string& b);
    void add_neq(const std::string& var, const Term& t);

    bool neq_vars(const std::string& a, const std::string& b) const;
    bool neq_const(const std::string& var, const std::string& c) const;
    const std::set<std::string>& excluded(const std::string& var) const;
    std::vector<std::string> neighbors(const std::string& var) const;
    const std::set<std::pair<std::string, std::string>>& var_pairs() const { return pairs_; }
    std::set<std::string> vars() const;
    bool empty() const { return pairs_.empty() && excl_.empty(); }

    // Rewrites under substitution of a single logvar.
    Constraint substituted_const(const std::string& var, const std::string& c) const;
    Constraint substituted_var(const std::string& var, const std::string& replacement) const;
    Constraint renamed(const std::map<std::string, std::string>& renaming) const;
    Constraint restricted_to(const std::set<std::string>& keep) const;

    bool operator==(const Constraint&) const = default;

private:
    std::map<std::string, std::set<std::string>> excl_;       // var -> excluded constants
    std::set<std::pair<std::string, std::string>> pairs_;     // normalized (min,max) var pairs
};

// ---------------------------------------------------------------------------
// Substitutions and permutations

struct Substitution {
    std::map<std::string, Term> map;

    const Term* find(const std::string& var) const;
    bool is_grounding() const;  // all images are constants
    bool operator==(const Substitution&) const = default;
};

Atom apply_substitution(const Atom& a, const Substitution& theta);

// Bijection on a fixed logvar set.
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::map<std::string, std::string> mapping);  // checks bijectivity

    static Permutation identity(const std::vector<std::string>& vars);

    const std::string& apply(const std::string& var) const;
    Atom apply(const Atom& a) const;
    Arg apply(const Arg& a) const;
    Substitution apply(const Substitution& theta) const;  // lambda(theta): X -> theta(inv(X))?  see .cpp
    bool is_identity() const;
    Permutation inverse() const;
    std::set<std::string> domain() const;
    const std::map<std::string, std::string>& mapping() const { return map_; }

    // Canonical key: images listed in sorted-source order; gives the
    // deterministic multiplication order used by group inversion.
    std::vector<std::string> key() const;
    bool operator==(const Permutation&) const = default;
    bool operator<(const Permutation& o) const { return key() < o.key(); }

private:
    std::map<std::string, std::string> map_;
};

// (l1.l2)(X) = l1(l2(X)); throws on mismatched logvar sets.
Permutation compose(const Permutation& l1, const Permutation& l2);

// ---------------------------------------------------------------------------
// Dense potential table. Row-major, last axis fastest.

class Potential {
public:
    Potential() : shape_(), values_(1, 1.0) {}  // zero-ary table holding 1
    explicit Potential(std::vector<std::size_t> shape, double fill = 0.0);
    static Potential scalar(double v);

    std::size_t rank() const { return shape_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }

    double& operator[](std::size_t flat) { return values_[flat]; }
    double operator[](std::size_t flat) const { return values_[flat]; }
    double at(std::span<const std::size_t> idx) const { return values_[flat_index(idx)]; }
    double& at(std::span<const std::size_t> idx) { return values_[flat_index(idx)]; }
    std::size_t flat_index(std::span<const std::size_t> idx) const;

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    Potential sum_axis(std::size_t axis) const;
    Potential weighted_sum_axis(std::size_t axis, std::span<const double> weights) const;
    Potential slice(std::size_t axis, std::size_t index) const;
    Potential diagonal(std::size_t keep_axis, std::size_t drop_axis) const;
    Potential pow_elem(double e) const;  // 0^e = 0 for e > 0
    Potential scaled(double f) const;
    double max_value() const;
    double sum() const;

    bool operator==(const Potential&) const = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> values_;
};

// Pointwise product over a joined axis set. axis_map_*[result_axis] gives the
// operand axis or -1 when the operand does not own that axis.
Potential join_tables(const Potential& a, const Potential& b,
                      const std::vector<std::size_t>& result_shape,
                      const std::vector<int>& axis_map_a,
                      const std::vector<int>& axis_map_b);

// Iterates a multi-index over a shape.
class Odometer {
public:
    explicit Odometer(const std::vector<std::size_t>& shape);
    bool done() const { return done_; }
    void next();
    const std::vector<std::size_t>& index() const { return idx_; }

private:
    const std::vector<std::size_t>& shape_;
    std::vector<std::size_t> idx_;
    bool done_;
};

// ---------------------------------------------------------------------------
// Histograms: values of counting randvars. `counts[i]` counts members whose
// state is range element i; counts sum to the member-group size.

struct Histogram {
    std::vector<std::size_t> counts;

    std::size_t total() const;
    std::string str() const;  // "[2 1]"
    bool operator==(const Histogram&) const = default;
};

// Number of histograms over `r` range elements with total `n`: C(n+r-1, r-1).
// Throws CapacityError when the count exceeds `cap` (0 = unlimited).
std::size_t histogram_count(std::size_t n, std::size_t r, std::size_t cap = 0);
Histogram histogram_at(std::size_t n, std::size_t r, std::size_t index);
std::size_t histogram_index(const Histogram& h, std::size_t r);
// Multinomial coefficient n!/prod(counts!): the number of member assignments
// realizing h. Exact through n = 170, lgamma beyond.
double num_assignments(const Histogram& h);
double log_num_assignments(const Histogram& h);

// ---------------------------------------------------------------------------
// Parfactors and models

struct LogvarBind {
    std::string var;
    std::string domain;
    bool operator==(const LogvarBind&) const = default;
};

struct Parfactor {
    std::vector<LogvarBind> binds;  // free logvars with their domain names
    Constraint constraint;
    std::vector<Arg> args;
    Potential potential;            // axes aligned with args
    Rational exponent;              // pending fractional scaling (default 1)

    bool has_logvar(const std::string& v) const;
    const LogvarBind* find_bind(const std::string& v) const;
    std::vector<std::string> logvar_names() const;
    std::string str() const;
};

struct Model {
    std::vector<std::pair<std::string, std::vector<std::string>>> domains;  // ordered decls
    std::vector<Predicate> predicates;                                      // ordered decls
    std::vector<Parfactor> parfactors;

    const std::vector<std::string>& domain(const std::string& name) const;
    const std::vector<std::string>* find_domain(const std::string& name) const;
    const Predicate& predicate(const std::string& name) const;
    const Predicate* find_predicate(const std::string& name) const;
    void add_domain(const std::string& name, std::vector<std::string> constants);
    void add_predicate(Predicate p);

    // Validates every invariant (declarations, arities, table sizes,
    // constraint well-formedness, positionwise domain consistency).
    void validate() const;

    // All randvars covered by the model's parfactors (members of counting
    // formulas included). Deterministic sorted order.
    std::vector<GroundAtom> randvars() const;
};

// Size of the value range of an argument: |range(P)| for an atom,
// histogram_count for a counting formula.
std::size_t arg_range_size(const Model& m, const Arg& a);
std::size_t formula_group_size(const Model& m, const CountingFormula& cf);

// ---------------------------------------------------------------------------
// Core operations on the symbolic layer

// All grounding substitutions of `binds` consistent with `c`. Deterministic
// order (odometer over binds, domain declaration order).
std::vector<Substitution> gr_substitutions(const Model& m, const std::vector<LogvarBind>& binds,
                                           const Constraint& c);

// |gr_substitutions| without enumeration when the constraint shape allows it
// (no var-var inequalities, or an all-pairs clique with equal exclusion
// sets); falls back to enumeration below `cap` total tuples.
std::size_t count_substitutions(const Model& m, const std::vector<LogvarBind>& binds,
                                const Constraint& c, std::size_t cap = 1u << 24);

// Satisfiability of a constraint over the given binds.
bool constraint_satisfiable(const Model& m, const std::vector<LogvarBind>& binds,
                            const Constraint& c);

// The set of randvars represented by a constrained atom. Sorted, duplicates
// collapsed. The constraint is the whole parfactor's constraint; projection
// semantics (an inequality on a logvar absent from the atom still filters).
std::vector<GroundAtom> rv_set(const Model& m, const Atom& prv,
                               const std::vector<LogvarBind>& binds, const Constraint& c);

// Member randvars of a grounded counting formula under a grounding of its
// free logvars.
std::vector<GroundAtom> formula_members(const Model& m, const CountingFormula& cf,
                                        const Substitution& theta);

double relative_gap(double a, double b);
bool nearly_equal(double a, double b, double rel_tol);

}  // namespace lve
