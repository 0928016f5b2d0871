#include "lve/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "lve/cost.hpp"

namespace lve {

// ---------------------------------------------------------------------------
// Rational

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (den == 0) throw ModelError("rational with zero denominator");
    if (num <= 0 || den < 0) throw ModelError("exponent scale must be positive");
    long long g = std::gcd(num, den);
    num /= g;
    den /= g;
}

// ---------------------------------------------------------------------------
// Predicate / Atom

std::size_t Predicate::range_index(const std::string& value) const {
    for (std::size_t i = 0; i < range.size(); ++i)
        if (range[i] == value) return i;
    throw ModelError("value '" + value + "' not in range of predicate " + name);
}

std::vector<std::string> Atom::logvars() const {
    std::vector<std::string> out;
    for (const Term& t : args)
        if (t.is_var && std::find(out.begin(), out.end(), t.name) == out.end())
            out.push_back(t.name);
    return out;
}

bool Atom::is_ground() const {
    return std::all_of(args.begin(), args.end(), [](const Term& t) { return !t.is_var; });
}

std::string GroundAtom::str() const {
    std::string s = pred;
    if (!args.empty()) {
        s += "(";
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (i) s += ",";
            s += args[i];
        }
        s += ")";
    }
    return s;
}

GroundAtom to_ground(const Atom& a) {
    GroundAtom g;
    g.pred = a.pred;
    for (const Term& t : a.args) {
        if (t.is_var) throw ModelError("atom " + a.pred + " is not ground");
        g.args.push_back(t.name);
    }
    return g;
}

std::vector<std::string> CountingFormula::free_logvars() const {
    std::vector<std::string> out;
    for (const std::string& v : atom.logvars())
        if (v != counted) out.push_back(v);
    return out;
}

bool args_equal(const Arg& a, const Arg& b) {
    if (is_atom(a) != is_atom(b)) return false;
    if (is_atom(a)) return as_atom(a) == as_atom(b);
    const CountingFormula& x = as_formula(a);
    const CountingFormula& y = as_formula(b);
    if (x.domain != y.domain || x.excluded != y.excluded) return false;
    if (x.atom.pred != y.atom.pred || x.atom.args.size() != y.atom.args.size()) return false;
    // Compare patterns with the counted logvar anonymized.
    for (std::size_t i = 0; i < x.atom.args.size(); ++i) {
        const Term& s = x.atom.args[i];
        const Term& t = y.atom.args[i];
        bool s_counted = s.is_var && s.name == x.counted;
        bool t_counted = t.is_var && t.name == y.counted;
        if (s_counted != t_counted) return false;
        if (!s_counted && s != t) return false;
    }
    return true;
}

std::vector<std::string> arg_free_logvars(const Arg& a) {
    if (is_atom(a)) return as_atom(a).logvars();
    return as_formula(a).free_logvars();
}

static std::string atom_str(const Atom& a) {
    std::string s = a.pred;
    if (!a.args.empty()) {
        s += "(";
        for (std::size_t i = 0; i < a.args.size(); ++i) {
            if (i) s += ",";
            s += a.args[i].name;
        }
        s += ")";
    }
    return s;
}

std::string arg_str(const Arg& a) {
    if (is_atom(a)) return atom_str(as_atom(a));
    const CountingFormula& cf = as_formula(a);
    std::string s = "#" + cf.counted;
    if (!cf.excluded.empty()) {
        s += ":";
        for (std::size_t i = 0; i < cf.excluded.size(); ++i) {
            if (i) s += ",";
            s += cf.counted + "!=" + cf.excluded[i];
        }
    }
    s += "[" + atom_str(cf.atom) + "]";
    return s;
}

// ---------------------------------------------------------------------------
// Constraint

void Constraint::add_neq_const(const std::string& var, const std::string& constant) {
    excl_[var].insert(constant);
}

void Constraint::add_neq_var(const std::string& a, const std::string& b) {
    if (a == b) throw ModelError("unsatisfiable inequality " + a + " != " + a);
    pairs_.insert(a < b ? std::make_pair(a, b) : std::make_pair(b, a));
}

void Constraint::add_neq(const std::string& var, const Term& t) {
    if (t.is_var)
        add_neq_var(var, t.name);
    else
        add_neq_const(var, t.name);
}

bool Constraint::neq_vars(const std::string& a, const std::string& b) const {
    return pairs_.count(a < b ? std::make_pair(a, b) : std::make_pair(b, a)) > 0;
}

bool Constraint::neq_const(const std::string& var, const std::string& c) const {
    auto it = excl_.find(var);
    return it != excl_.end() && it->second.count(c) > 0;
}

const std::set<std::string>& Constraint::excluded(const std::string& var) const {
    static const std::set<std::string> kEmpty;
    auto it = excl_.find(var);
    return it == excl_.end() ? kEmpty : it->second;
}

std::vector<std::string> Constraint::neighbors(const std::string& var) const {
    std::vector<std::string> out;
    for (const auto& [a, b] : pairs_) {
        if (a == var) out.push_back(b);
        if (b == var) out.push_back(a);
    }
    return out;
}

std::set<std::string> Constraint::vars() const {
    std::set<std::string> out;
    for (const auto& [v, _] : excl_) out.insert(v);
    for (const auto& [a, b] : pairs_) {
        out.insert(a);
        out.insert(b);
    }
    return out;
}

Constraint Constraint::substituted_const(const std::string& var, const std::string& c) const {
    Constraint out;
    for (const auto& [v, cs] : excl_) {
        if (v == var) continue;  // var's own exclusions were checked by the caller
        for (const std::string& x : cs) out.add_neq_const(v, x);
    }
    for (const auto& [a, b] : pairs_) {
        if (a == var)
            out.add_neq_const(b, c);
        else if (b == var)
            out.add_neq_const(a, c);
        else
            out.add_neq_var(a, b);
    }
    return out;
}

Constraint Constraint::substituted_var(const std::string& var, const std::string& repl) const {
    Constraint out;
    for (const auto& [v, cs] : excl_)
        for (const std::string& x : cs) out.add_neq_const(v == var ? repl : v, x);
    for (const auto& [a, b] : pairs_)
        out.add_neq_var(a == var ? repl : a, b == var ? repl : b);  // may throw on repl==other
    return out;
}

Constraint Constraint::renamed(const std::map<std::string, std::string>& renaming) const {
    auto map = [&](const std::string& v) {
        auto it = renaming.find(v);
        return it == renaming.end() ? v : it->second;
    };
    Constraint out;
    for (const auto& [v, cs] : excl_)
        for (const std::string& x : cs) out.add_neq_const(map(v), x);
    for (const auto& [a, b] : pairs_) out.add_neq_var(map(a), map(b));
    return out;
}

Constraint Constraint::restricted_to(const std::set<std::string>& keep) const {
    Constraint out;
    for (const auto& [v, cs] : excl_)
        if (keep.count(v))
            for (const std::string& x : cs) out.add_neq_const(v, x);
    for (const auto& [a, b] : pairs_)
        if (keep.count(a) && keep.count(b)) out.add_neq_var(a, b);
    return out;
}

// ---------------------------------------------------------------------------
// Substitution

const Term* Substitution::find(const std::string& var) const {
    auto it = map.find(var);
    return it == map.end() ? nullptr : &it->second;
}

bool Substitution::is_grounding() const {
    return std::all_of(map.begin(), map.end(),
                       [](const auto& kv) { return !kv.second.is_var; });
}

Atom apply_substitution(const Atom& a, const Substitution& theta) {
    Atom out = a;
    for (Term& t : out.args) {
        if (!t.is_var) continue;
        if (const Term* img = theta.find(t.name)) t = *img;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Permutation

Permutation::Permutation(std::map<std::string, std::string> mapping) : map_(std::move(mapping)) {
    std::set<std::string> dom, img;
    for (const auto& [s, d] : map_) {
        dom.insert(s);
        img.insert(d);
    }
    if (dom != img) throw ModelError("permutation is not a bijection on its logvar set");
}

Permutation Permutation::identity(const std::vector<std::string>& vars) {
    std::map<std::string, std::string> m;
    for (const std::string& v : vars) m[v] = v;
    return Permutation(std::move(m));
}

const std::string& Permutation::apply(const std::string& var) const {
    auto it = map_.find(var);
    if (it == map_.end()) throw ModelError("permutation does not cover logvar " + var);
    return it->second;
}

Atom Permutation::apply(const Atom& a) const {
    Atom out = a;
    for (Term& t : out.args)
        if (t.is_var && map_.count(t.name)) t = Term::var(map_.at(t.name));
    return out;
}

Arg Permutation::apply(const Arg& a) const {
    if (is_atom(a)) return apply(as_atom(a));
    CountingFormula cf = as_formula(a);
    // Free positions only; the counted logvar is bound.
    for (Term& t : cf.atom.args)
        if (t.is_var && t.name != cf.counted && map_.count(t.name)) t = Term::var(map_.at(t.name));
    return cf;
}

Substitution Permutation::apply(const Substitution& theta) const {
    // lambda(theta) assigns to lambda(X) the value theta assigned to X, so
    // that A.lambda(theta) = lambda(A).theta holds positionally.
    Substitution out;
    for (const auto& [v, t] : theta.map) {
        auto it = map_.find(v);
        out.map[it == map_.end() ? v : it->second] = t;
    }
    return out;
}

bool Permutation::is_identity() const {
    return std::all_of(map_.begin(), map_.end(),
                       [](const auto& kv) { return kv.first == kv.second; });
}

Permutation Permutation::inverse() const {
    std::map<std::string, std::string> m;
    for (const auto& [s, d] : map_) m[d] = s;
    return Permutation(std::move(m));
}

std::set<std::string> Permutation::domain() const {
    std::set<std::string> out;
    for (const auto& [s, _] : map_) out.insert(s);
    return out;
}

std::vector<std::string> Permutation::key() const {
    std::vector<std::string> out;
    for (const auto& [_, d] : map_) out.push_back(d);  // map_ is sorted by source
    return out;
}

Permutation compose(const Permutation& l1, const Permutation& l2) {
    if (l1.domain() != l2.domain())
        throw ModelError("composing permutations over different logvar sets");
    std::map<std::string, std::string> m;
    for (const auto& [s, _] : l2.mapping()) m[s] = l1.apply(l2.apply(s));
    return Permutation(std::move(m));
}

// ---------------------------------------------------------------------------
// Potential

Potential::Potential(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t s : shape_) {
        if (s == 0) throw ModelError("potential axis of size zero");
        if (n > (std::size_t(1) << 48) / s) throw CapacityError("potential table too large");
        n *= s;
    }
    values_.assign(n, fill);
    cost::note_table(n);
}

Potential Potential::scalar(double v) {
    Potential p;
    p.values_[0] = v;
    return p;
}

std::size_t Potential::flat_index(std::span<const std::size_t> idx) const {
    if (idx.size() != shape_.size()) throw InternalError("potential index rank mismatch");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) flat = flat * shape_[k] + idx[k];
    return flat;
}

Potential Potential::sum_axis(std::size_t axis) const {
    std::vector<std::size_t> shape = shape_;
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Potential out(shape, 0.0);
    std::size_t inner = 1;
    for (std::size_t k = axis + 1; k < shape_.size(); ++k) inner *= shape_[k];
    std::size_t n = shape_[axis];
    std::size_t outer = values_.size() / (inner * n);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t v = 0; v < n; ++v)
            for (std::size_t i = 0; i < inner; ++i)
                out.values_[o * inner + i] += values_[(o * n + v) * inner + i];
    cost::add_muladds(values_.size());
    return out;
}

Potential Potential::weighted_sum_axis(std::size_t axis, std::span<const double> weights) const {
    if (weights.size() != shape_[axis]) throw InternalError("weight vector size mismatch");
    std::vector<std::size_t> shape = shape_;
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Potential out(shape, 0.0);
    std::size_t inner = 1;
    for (std::size_t k = axis + 1; k < shape_.size(); ++k) inner *= shape_[k];
    std::size_t n = shape_[axis];
    std::size_t outer = values_.size() / (inner * n);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t v = 0; v < n; ++v)
            for (std::size_t i = 0; i < inner; ++i)
                out.values_[o * inner + i] += weights[v] * values_[(o * n + v) * inner + i];
    cost::add_muladds(2 * values_.size());
    return out;
}

Potential Potential::slice(std::size_t axis, std::size_t index) const {
    std::vector<std::size_t> shape = shape_;
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
    Potential out(shape, 0.0);
    std::size_t inner = 1;
    for (std::size_t k = axis + 1; k < shape_.size(); ++k) inner *= shape_[k];
    std::size_t n = shape_[axis];
    std::size_t outer = values_.size() / (inner * n);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
            out.values_[o * inner + i] = values_[(o * n + index) * inner + i];
    return out;
}

Potential Potential::diagonal(std::size_t keep_axis, std::size_t drop_axis) const {
    if (keep_axis == drop_axis || shape_[keep_axis] != shape_[drop_axis])
        throw InternalError("diagonal requires two distinct axes of equal size");
    std::vector<std::size_t> shape = shape_;
    shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(drop_axis));
    Potential out(shape, 0.0);
    for (Odometer od(shape); !od.done(); od.next()) {
        std::vector<std::size_t> idx(od.index().begin(), od.index().end());
        std::size_t ka = keep_axis > drop_axis ? keep_axis - 1 : keep_axis;
        idx.insert(idx.begin() + static_cast<std::ptrdiff_t>(drop_axis), idx[ka]);
        out.at(od.index()) = at(idx);
    }
    return out;
}

Potential Potential::pow_elem(double e) const {
    Potential out = *this;
    if (e == 1.0) return out;
    for (double& v : out.values_) v = v == 0.0 ? 0.0 : std::exp(e * std::log(v));
    cost::add_muladds(values_.size());
    return out;
}

Potential Potential::scaled(double f) const {
    Potential out = *this;
    for (double& v : out.values_) v *= f;
    cost::add_muladds(values_.size());
    return out;
}

double Potential::max_value() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, v);
    return m;
}

double Potential::sum() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
}

Potential join_tables(const Potential& a, const Potential& b,
                      const std::vector<std::size_t>& result_shape,
                      const std::vector<int>& axis_map_a, const std::vector<int>& axis_map_b) {
    Potential out(result_shape, 0.0);
    std::size_t rank = result_shape.size();
    // Strides of each operand along result axes (0 when the operand lacks the axis).
    auto strides_for = [&](const Potential& p, const std::vector<int>& amap) {
        std::vector<std::size_t> pstr(p.rank(), 1);
        for (std::size_t k = p.rank(); k-- > 1;) pstr[k - 1] = pstr[k] * p.shape()[k];
        std::vector<std::size_t> out_str(rank, 0);
        for (std::size_t k = 0; k < rank; ++k)
            if (amap[k] >= 0) out_str[k] = pstr[static_cast<std::size_t>(amap[k])];
        return out_str;
    };
    std::vector<std::size_t> sa = strides_for(a, axis_map_a);
    std::vector<std::size_t> sb = strides_for(b, axis_map_b);
    std::size_t flat = 0;
    for (Odometer od(result_shape); !od.done(); od.next(), ++flat) {
        std::size_t fa = 0, fb = 0;
        for (std::size_t k = 0; k < rank; ++k) {
            fa += od.index()[k] * sa[k];
            fb += od.index()[k] * sb[k];
        }
        out[flat] = a[fa] * b[fb];
    }
    cost::add_muladds(out.size());
    return out;
}

Odometer::Odometer(const std::vector<std::size_t>& shape)
    : shape_(shape), idx_(shape.size(), 0), done_(false) {
    for (std::size_t s : shape_)
        if (s == 0) done_ = true;
}

void Odometer::next() {
    for (std::size_t k = shape_.size(); k-- > 0;) {
        if (++idx_[k] < shape_[k]) return;
        idx_[k] = 0;
    }
    done_ = true;
}

// ---------------------------------------------------------------------------
// Histograms

std::size_t Histogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t(0));
}

std::string Histogram::str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (i) s += " ";
        s += std::to_string(counts[i]);
    }
    return s + "]";
}

static double binom(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (std::size_t i = 0; i < k; ++i) r = r * static_cast<double>(n - i) / static_cast<double>(i + 1);
    return r;
}

std::size_t histogram_count(std::size_t n, std::size_t r, std::size_t cap) {
    double c = binom(n + r - 1, r - 1);
    if (cap && c > static_cast<double>(cap))
        throw CapacityError("histogram space of size " + std::to_string(c) + " exceeds cap");
    if (c > 9e15) throw CapacityError("histogram space too large to index");
    return static_cast<std::size_t>(std::llround(c));
}

// Histograms are ordered lexicographically by their count vectors.
Histogram histogram_at(std::size_t n, std::size_t r, std::size_t index) {
    Histogram h;
    h.counts.assign(r, 0);
    std::size_t rem = n;
    for (std::size_t i = 0; i + 1 < r; ++i) {
        for (std::size_t c = 0;; ++c) {
            std::size_t block = histogram_count(rem - c, r - i - 1);
            if (index < block) {
                h.counts[i] = c;
                rem -= c;
                break;
            }
            index -= block;
        }
    }
    h.counts[r - 1] = rem;
    return h;
}

std::size_t histogram_index(const Histogram& h, std::size_t r) {
    if (h.counts.size() != r) throw InternalError("histogram arity mismatch");
    std::size_t rem = h.total();
    std::size_t idx = 0;
    for (std::size_t i = 0; i + 1 < r; ++i) {
        for (std::size_t c = 0; c < h.counts[i]; ++c) idx += histogram_count(rem - c, r - i - 1);
        rem -= h.counts[i];
    }
    return idx;
}

double log_num_assignments(const Histogram& h) {
    double lg = std::lgamma(static_cast<double>(h.total()) + 1.0);
    for (std::size_t c : h.counts) lg -= std::lgamma(static_cast<double>(c) + 1.0);
    return lg;
}

double num_assignments(const Histogram& h) {
    std::size_t n = h.total();
    if (n <= 170) {
        // Product of binomials C(c1+..+ck, ck); stays within double range for
        // n <= 170 and is exact while below 2^53.
        double v = 1.0;
        std::size_t placed = 0;
        for (std::size_t c : h.counts) {
            for (std::size_t i = 1; i <= c; ++i) {
                ++placed;
                v *= static_cast<double>(placed) / static_cast<double>(i);
            }
        }
        return v < 9e15 ? std::round(v) : v;
    }
    return std::exp(log_num_assignments(h));
}

// ---------------------------------------------------------------------------
// Parfactor / Model

bool Parfactor::has_logvar(const std::string& v) const { return find_bind(v) != nullptr; }

const LogvarBind* Parfactor::find_bind(const std::string& v) const {
    for (const LogvarBind& b : binds)
        if (b.var == v) return &b;
    return nullptr;
}

std::vector<std::string> Parfactor::logvar_names() const {
    std::vector<std::string> out;
    for (const LogvarBind& b : binds) out.push_back(b.var);
    return out;
}

std::string Parfactor::str() const {
    std::string s = "phi(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) s += ", ";
        s += arg_str(args[i]);
    }
    s += ")";
    bool first = true;
    for (const auto& [a, b] : constraint.var_pairs()) {
        s += first ? " | " : ", ";
        s += a + "!=" + b;
        first = false;
    }
    for (const LogvarBind& lb : binds)
        for (const std::string& c : constraint.excluded(lb.var)) {
            s += first ? " | " : ", ";
            s += lb.var + "!=" + c;
            first = false;
        }
    if (!exponent.is_one())
        s += " ^ " + std::to_string(exponent.num) + "/" + std::to_string(exponent.den);
    return s;
}

const std::vector<std::string>& Model::domain(const std::string& name) const {
    if (const auto* d = find_domain(name)) return *d;
    throw ModelError("undeclared domain '" + name + "'");
}

const std::vector<std::string>* Model::find_domain(const std::string& name) const {
    for (const auto& [n, cs] : domains)
        if (n == name) return &cs;
    return nullptr;
}

const Predicate& Model::predicate(const std::string& name) const {
    if (const Predicate* p = find_predicate(name)) return *p;
    throw ModelError("undeclared predicate '" + name + "'");
}

const Predicate* Model::find_predicate(const std::string& name) const {
    for (const Predicate& p : predicates)
        if (p.name == name) return &p;
    return nullptr;
}

void Model::add_domain(const std::string& name, std::vector<std::string> constants) {
    if (find_domain(name)) throw ModelError("duplicate domain declaration '" + name + "'");
    domains.emplace_back(name, std::move(constants));
}

void Model::add_predicate(Predicate p) {
    if (find_predicate(p.name)) throw ModelError("duplicate predicate declaration '" + p.name + "'");
    predicates.push_back(std::move(p));
}

std::size_t formula_group_size(const Model& m, const CountingFormula& cf) {
    const auto& dom = m.domain(cf.domain);
    std::size_t excluded = 0;
    for (const std::string& c : cf.excluded)
        if (std::find(dom.begin(), dom.end(), c) != dom.end()) ++excluded;
    if (dom.size() <= excluded)
        throw ModelError("counting formula over an empty member group");
    return dom.size() - excluded;
}

std::size_t arg_range_size(const Model& m, const Arg& a) {
    if (is_atom(a)) return m.predicate(as_atom(a).pred).range.size();
    const CountingFormula& cf = as_formula(a);
    std::size_t r = m.predicate(cf.atom.pred).range.size();
    return histogram_count(formula_group_size(m, cf), r);
}

namespace {

struct PositionDomains {
    // predicate name -> per-position domain name ("" = undecided)
    std::map<std::string, std::vector<std::string>> pos;

    void note(const Model& m, const std::string& pred, std::size_t position,
              const std::string& domain_name) {
        auto& v = pos[pred];
        if (v.empty()) v.assign(m.predicate(pred).arity, "");
        if (v[position].empty())
            v[position] = domain_name;
        else if (v[position] != domain_name) {
            // Two names may still denote the same constant set; require identical sets.
            if (m.domain(v[position]) != m.domain(domain_name))
                throw ModelError("predicate " + pred + " position " + std::to_string(position) +
                                 " bound to incompatible domains '" + v[position] + "' and '" +
                                 domain_name + "'");
        }
    }
};

void validate_atom(const Model& m, const Atom& a,
                   const std::map<std::string, std::string>& var_domains, PositionDomains& pd) {
    const Predicate& p = m.predicate(a.pred);
    if (a.args.size() != p.arity)
        throw ModelError("atom " + a.pred + " has " + std::to_string(a.args.size()) +
                         " arguments, expected " + std::to_string(p.arity));
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        const Term& t = a.args[i];
        if (t.is_var) {
            auto it = var_domains.find(t.name);
            if (it == var_domains.end())
                throw ModelError("logvar " + t.name + " in atom " + a.pred + " has no binding");
            pd.note(m, a.pred, i, it->second);
        }
    }
}

}  // namespace

void Model::validate() const {
    std::set<std::string> domain_names;
    for (const auto& [name, cs] : domains) {
        if (!domain_names.insert(name).second) throw ModelError("duplicate domain '" + name + "'");
        if (cs.empty()) throw ModelError("domain '" + name + "' is empty");
        std::set<std::string> uniq(cs.begin(), cs.end());
        if (uniq.size() != cs.size()) throw ModelError("domain '" + name + "' repeats a constant");
    }
    std::set<std::string> pred_names;
    for (const Predicate& p : predicates) {
        if (!pred_names.insert(p.name).second) throw ModelError("duplicate predicate '" + p.name + "'");
        if (p.range.size() < 2) throw ModelError("predicate '" + p.name + "' needs a range of size >= 2");
        std::set<std::string> uniq(p.range.begin(), p.range.end());
        if (uniq.size() != p.range.size())
            throw ModelError("predicate '" + p.name + "' repeats a range element");
    }

    PositionDomains pd;
    for (const Parfactor& g : parfactors) {
        std::map<std::string, std::string> var_domains;
        for (const LogvarBind& b : g.binds) {
            domain(b.domain);
            if (!var_domains.emplace(b.var, b.domain).second)
                throw ModelError("logvar " + b.var + " bound twice in one parfactor");
        }

        std::size_t cells = 1;
        std::vector<const Atom*> counted_patterns;
        for (const Arg& a : g.args) {
            if (is_atom(a)) {
                validate_atom(*this, as_atom(a), var_domains, pd);
                for (const std::string& v : as_atom(a).logvars())
                    if (!g.has_logvar(v))
                        throw ModelError("free logvar " + v + " of an argument is not bound");
            } else {
                const CountingFormula& cf = as_formula(a);
                if (g.has_logvar(cf.counted))
                    throw ModelError("counted logvar " + cf.counted +
                                     " collides with a free logvar of the parfactor");
                const auto& dom = domain(cf.domain);
                for (const std::string& c : cf.excluded)
                    if (std::find(dom.begin(), dom.end(), c) == dom.end())
                        throw ModelError("counting formula excludes '" + c +
                                         "' outside domain '" + cf.domain + "'");
                bool counted_occurs = false;
                for (const Term& t : cf.atom.args)
                    if (t.is_var && t.name == cf.counted) counted_occurs = true;
                if (!counted_occurs)
                    throw ModelError("counted logvar " + cf.counted + " does not occur in " +
                                     cf.atom.pred);
                auto vd = var_domains;
                vd[cf.counted] = cf.domain;
                validate_atom(*this, cf.atom, vd, pd);
                for (const std::string& v : cf.free_logvars())
                    if (!g.has_logvar(v))
                        throw ModelError("free logvar " + v + " of a counting formula is not bound");
                for (const Atom* prev : counted_patterns)
                    if (prev->pred == cf.atom.pred)
                        throw ModelError("atom " + cf.atom.pred +
                                         " appears in two counting formulas of one parfactor");
                counted_patterns.push_back(&cf.atom);
            }
            cells *= arg_range_size(*this, a);
        }
        if (g.potential.size() != cells)
            throw ModelError("potential has " + std::to_string(g.potential.size()) +
                             " cells, arguments require " + std::to_string(cells));
        for (double v : g.potential.values())
            if (!(v >= 0.0) || !std::isfinite(v))
                throw ModelError("potential values must be finite and non-negative");
        if (g.exponent.num <= 0 || g.exponent.den <= 0)
            throw ModelError("exponent scale must be positive");

        for (const std::string& v : g.constraint.vars())
            if (!var_domains.count(v))
                throw ModelError("constraint mentions unbound logvar " + v);
        for (const auto& [a, b] : g.constraint.var_pairs())
            if (domain(var_domains.at(a)) != domain(var_domains.at(b)))
                throw ModelError("inequality " + a + " != " + b + " links different domains");
        for (const LogvarBind& b : g.binds) {
            const auto& dom = domain(b.domain);
            for (const std::string& c : g.constraint.excluded(b.var))
                if (std::find(dom.begin(), dom.end(), c) == dom.end())
                    throw ModelError("constraint excludes constant '" + c + "' outside domain of " +
                                     b.var);
        }
    }

    // Constants occurring at predicate positions must live in that position's
    // domain, once one is known from a logvar occurrence.
    for (const Parfactor& g : parfactors) {
        auto check_constants = [&](const Atom& a) {
            auto it = pd.pos.find(a.pred);
            for (std::size_t i = 0; i < a.args.size(); ++i) {
                if (a.args[i].is_var) continue;
                if (it == pd.pos.end() || it->second[i].empty()) continue;
                const auto& dom = domain(it->second[i]);
                if (std::find(dom.begin(), dom.end(), a.args[i].name) == dom.end())
                    throw ModelError("constant '" + a.args[i].name + "' outside the domain of " +
                                     a.pred + " position " + std::to_string(i));
            }
        };
        for (const Arg& a : g.args) {
            if (is_atom(a))
                check_constants(as_atom(a));
            else
                check_constants(as_formula(a).atom);
        }
    }
}

std::vector<GroundAtom> Model::randvars() const {
    std::set<GroundAtom> out;
    for (const Parfactor& g : parfactors) {
        for (const Arg& a : g.args) {
            if (is_atom(a)) {
                for (GroundAtom& ga : rv_set(*this, as_atom(a), g.binds, g.constraint))
                    out.insert(std::move(ga));
            } else {
                const CountingFormula& cf = as_formula(a);
                for (const Substitution& theta : gr_substitutions(*this, g.binds, g.constraint))
                    for (GroundAtom& ga : formula_members(*this, cf, theta))
                        out.insert(std::move(ga));
            }
        }
    }
    return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Core symbolic operations

std::vector<Substitution> gr_substitutions(const Model& m, const std::vector<LogvarBind>& binds,
                                           const Constraint& c) {
    for (const std::string& v : c.vars()) {
        bool bound = false;
        for (const LogvarBind& b : binds) bound |= b.var == v;
        if (!bound) throw ModelError("constraint mentions undeclared logvar " + v);
    }
    std::vector<const std::vector<std::string>*> doms;
    doms.reserve(binds.size());
    for (const LogvarBind& b : binds) doms.push_back(&m.domain(b.domain));

    std::vector<Substitution> out;
    std::vector<std::size_t> shape;
    for (const auto* d : doms) shape.push_back(d->size());
    for (Odometer od(shape); !od.done(); od.next()) {
        Substitution theta;
        bool ok = true;
        for (std::size_t k = 0; k < binds.size() && ok; ++k) {
            const std::string& value = (*doms[k])[od.index()[k]];
            if (c.neq_const(binds[k].var, value)) {
                ok = false;
                break;
            }
            for (std::size_t j = 0; j < k; ++j) {
                if (c.neq_vars(binds[k].var, binds[j].var) &&
                    theta.map.at(binds[j].var).name == value) {
                    ok = false;
                    break;
                }
            }
            theta.map[binds[k].var] = Term::cst(value);
        }
        if (ok) out.push_back(std::move(theta));
    }
    return out;
}

std::size_t count_substitutions(const Model& m, const std::vector<LogvarBind>& binds,
                                const Constraint& c, std::size_t cap) {
    if (binds.empty()) return 1;
    bool any_pairs = !c.var_pairs().empty();
    if (!any_pairs) {
        std::size_t n = 1;
        for (const LogvarBind& b : binds) {
            const auto& dom = m.domain(b.domain);
            std::size_t excl = 0;
            for (const std::string& x : c.excluded(b.var))
                if (std::find(dom.begin(), dom.end(), x) != dom.end()) ++excl;
            if (dom.size() <= excl) return 0;
            n *= dom.size() - excl;
        }
        return n;
    }
    // All-pairs clique with identical domains and exclusion sets: falling factorial.
    bool clique = true;
    for (std::size_t i = 0; i < binds.size() && clique; ++i)
        for (std::size_t j = i + 1; j < binds.size() && clique; ++j)
            clique = c.neq_vars(binds[i].var, binds[j].var);
    if (clique) {
        bool uniform = true;
        for (std::size_t i = 1; i < binds.size() && uniform; ++i)
            uniform = m.domain(binds[i].domain) == m.domain(binds[0].domain) &&
                      c.excluded(binds[i].var) == c.excluded(binds[0].var);
        if (uniform) {
            const auto& dom = m.domain(binds[0].domain);
            std::size_t excl = 0;
            for (const std::string& x : c.excluded(binds[0].var))
                if (std::find(dom.begin(), dom.end(), x) != dom.end()) ++excl;
            std::size_t avail = dom.size() > excl ? dom.size() - excl : 0;
            std::size_t n = 1;
            for (std::size_t k = 0; k < binds.size(); ++k) {
                if (avail < k + 1) return 0;
                n *= avail - k;
            }
            return n;
        }
    }
    std::size_t total = 1;
    for (const LogvarBind& b : binds) {
        std::size_t d = m.domain(b.domain).size();
        if (total > cap / d) throw CapacityError("substitution enumeration exceeds cap");
        total *= d;
    }
    return gr_substitutions(m, binds, c).size();
}

bool constraint_satisfiable(const Model& m, const std::vector<LogvarBind>& binds,
                            const Constraint& c) {
    // Quick decisions first: per-var availability, then a sequential-choice
    // bound on the inequality graph; enumeration settles the rest.
    std::map<std::string, std::size_t> avail;
    for (const LogvarBind& b : binds) {
        const auto& dom = m.domain(b.domain);
        std::size_t excl = 0;
        for (const std::string& x : c.excluded(b.var))
            if (std::find(dom.begin(), dom.end(), x) != dom.end()) ++excl;
        if (dom.size() <= excl) return false;
        avail[b.var] = dom.size() - excl;
    }
    if (c.var_pairs().empty()) return true;
    bool greedy_ok = true;
    for (const LogvarBind& b : binds)
        greedy_ok &= avail[b.var] > c.neighbors(b.var).size();
    if (greedy_ok) return true;
    return !gr_substitutions(m, binds, c).empty();
}

std::vector<GroundAtom> rv_set(const Model& m, const Atom& prv,
                               const std::vector<LogvarBind>& binds, const Constraint& c) {
    std::set<GroundAtom> out;
    for (const Substitution& theta : gr_substitutions(m, binds, c))
        out.insert(to_ground(apply_substitution(prv, theta)));
    return {out.begin(), out.end()};
}

std::vector<GroundAtom> formula_members(const Model& m, const CountingFormula& cf,
                                        const Substitution& theta) {
    Atom grounded_frees = apply_substitution(cf.atom, theta);
    std::vector<GroundAtom> out;
    for (const std::string& v : m.domain(cf.domain)) {
        if (std::find(cf.excluded.begin(), cf.excluded.end(), v) != cf.excluded.end()) continue;
        Substitution s;
        s.map[cf.counted] = Term::cst(v);
        out.push_back(to_ground(apply_substitution(grounded_frees, s)));
    }
    return out;
}

double relative_gap(double a, double b) {
    if (a == b) return 0.0;
    double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

bool nearly_equal(double a, double b, double rel_tol) {
    return relative_gap(a, b) <= rel_tol;
}

}  // namespace lve
