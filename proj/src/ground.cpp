#include "lve/ground.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lve {

std::string GroundFactor::str() const {
    std::string s = "f(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) s += ", ";
        s += args[i].str();
    }
    return s + ")";
}

std::vector<GroundAtom> GroundModel::randvar_list() const {
    std::vector<GroundAtom> out;
    out.reserve(ranges.size());
    for (const auto& [ga, _] : ranges) out.push_back(ga);
    return out;
}

void GroundModel::add_factor(GroundFactor f) {
    for (std::size_t i = 0; i < f.args.size(); ++i) {
        auto [it, fresh] = ranges.emplace(f.args[i], f.potential.shape()[i]);
        if (!fresh && it->second != f.potential.shape()[i])
            throw ModelError("randvar " + f.args[i].str() + " used with two range sizes");
    }
    factors.push_back(std::move(f));
}

namespace {

// Collapses duplicate args left to right: the table is restricted to entries
// where the duplicated axes agree.
GroundFactor collapse_duplicates(GroundFactor f) {
    for (std::size_t i = 0; i < f.args.size(); ++i) {
        for (std::size_t j = i + 1; j < f.args.size();) {
            if (f.args[j] == f.args[i]) {
                f.potential = f.potential.diagonal(i, j);
                f.args.erase(f.args.begin() + static_cast<std::ptrdiff_t>(j));
            } else {
                ++j;
            }
        }
    }
    return f;
}

}  // namespace

std::vector<GroundFactor> ground_parfactor(const Model& m, const Parfactor& g) {
    for (const Arg& a : g.args)
        if (!is_atom(a))
            throw OperatorError("ground_parfactor cannot ground counting formulas; use expand_crv");
    Potential table = g.potential.pow_elem(g.exponent.value());
    std::vector<GroundFactor> out;
    for (const Substitution& theta : gr_substitutions(m, g.binds, g.constraint)) {
        GroundFactor f;
        for (const Arg& a : g.args) f.args.push_back(to_ground(apply_substitution(as_atom(a), theta)));
        f.potential = table;
        out.push_back(collapse_duplicates(std::move(f)));
    }
    return out;
}

std::vector<GroundFactor> expand_crv(const Model& m, const Parfactor& g, std::uint64_t cap) {
    bool has_formula = false;
    for (const Arg& a : g.args) has_formula |= !is_atom(a);
    if (!has_formula) return ground_parfactor(m, g);

    double scale = g.exponent.value();
    std::vector<GroundFactor> out;
    for (const Substitution& theta : gr_substitutions(m, g.binds, g.constraint)) {
        // Axes: members of each formula (in member order), then plain args.
        std::vector<GroundAtom> axes;
        struct FormulaSlot {
            std::size_t first_member;
            std::size_t member_count;
            std::size_t range_size;
        };
        std::vector<std::optional<FormulaSlot>> slots(g.args.size());
        for (std::size_t k = 0; k < g.args.size(); ++k) {
            if (is_atom(g.args[k])) continue;
            const CountingFormula& cf = as_formula(g.args[k]);
            std::vector<GroundAtom> members = formula_members(m, cf, theta);
            slots[k] = FormulaSlot{axes.size(), members.size(),
                                   m.predicate(cf.atom.pred).range.size()};
            for (GroundAtom& ga : members) axes.push_back(std::move(ga));
        }
        std::vector<std::size_t> plain_axis(g.args.size(), 0);
        for (std::size_t k = 0; k < g.args.size(); ++k) {
            if (!is_atom(g.args[k])) continue;
            plain_axis[k] = axes.size();
            axes.push_back(to_ground(apply_substitution(as_atom(g.args[k]), theta)));
        }

        std::vector<std::size_t> shape;
        std::uint64_t cells = 1;
        for (std::size_t k = 0; k < axes.size(); ++k) {
            std::size_t r = 0;
            // Range of each axis: member axes use the member predicate's range.
            for (std::size_t q = 0; q < g.args.size(); ++q) {
                if (slots[q] && k >= slots[q]->first_member &&
                    k < slots[q]->first_member + slots[q]->member_count)
                    r = slots[q]->range_size;
                else if (is_atom(g.args[q]) && plain_axis[q] == k)
                    r = m.predicate(as_atom(g.args[q]).pred).range.size();
            }
            shape.push_back(r);
            cells *= r;
            if (cells > cap)
                throw CapacityError("counting-formula expansion exceeds the assignment cap");
        }

        GroundFactor f;
        f.args = axes;
        f.potential = Potential(shape, 0.0);
        std::vector<std::size_t> arg_index(g.args.size(), 0);
        std::size_t flat = 0;
        for (Odometer od(shape); !od.done(); od.next(), ++flat) {
            for (std::size_t k = 0; k < g.args.size(); ++k) {
                if (slots[k]) {
                    Histogram h;
                    h.counts.assign(slots[k]->range_size, 0);
                    for (std::size_t j = 0; j < slots[k]->member_count; ++j)
                        ++h.counts[od.index()[slots[k]->first_member + j]];
                    arg_index[k] = histogram_index(h, slots[k]->range_size);
                } else {
                    arg_index[k] = od.index()[plain_axis[k]];
                }
            }
            double v = g.potential.at(arg_index);
            f.potential[flat] = v == 0.0 ? 0.0 : std::exp(scale * std::log(v));
        }
        out.push_back(collapse_duplicates(std::move(f)));
    }
    return out;
}

GroundModel ground_model(const Model& m, std::uint64_t cap) {
    GroundModel gm;
    for (const Parfactor& g : m.parfactors)
        for (GroundFactor& f : expand_crv(m, g, cap)) gm.add_factor(std::move(f));
    return gm;
}

namespace {

struct Enumerator {
    std::vector<GroundAtom> randvars;
    std::map<GroundAtom, std::size_t> position;
    std::vector<std::size_t> shape;
    // Per factor: positions of its args in the joint assignment.
    std::vector<std::vector<std::size_t>> factor_vars;

    explicit Enumerator(const GroundModel& gm) {
        randvars = gm.randvar_list();
        for (std::size_t i = 0; i < randvars.size(); ++i) position[randvars[i]] = i;
        for (const GroundAtom& ga : randvars) shape.push_back(gm.ranges.at(ga));
        for (const GroundFactor& f : gm.factors) {
            std::vector<std::size_t> vars;
            for (const GroundAtom& ga : f.args) vars.push_back(position.at(ga));
            factor_vars.push_back(std::move(vars));
        }
    }

    std::uint64_t joint_count() const {
        std::uint64_t n = 1;
        for (std::size_t s : shape) {
            if (n > (std::uint64_t(1) << 62) / s) return std::uint64_t(1) << 62;
            n *= s;
        }
        return n;
    }

    double product_at(const GroundModel& gm, const std::vector<std::size_t>& joint) const {
        double p = 1.0;
        std::vector<std::size_t> idx;
        for (std::size_t fi = 0; fi < gm.factors.size(); ++fi) {
            idx.clear();
            for (std::size_t v : factor_vars[fi]) idx.push_back(joint[v]);
            p *= gm.factors[fi].potential.at(idx);
            if (p == 0.0) return 0.0;
        }
        return p;
    }
};

}  // namespace

double brute_force_partition(const GroundModel& gm, std::uint64_t cap, bool log_space) {
    if (log_space) return std::exp(log_brute_force_partition(gm, cap));
    Enumerator en(gm);
    if (en.joint_count() > cap)
        throw CapacityError("brute-force enumeration of " + std::to_string(en.joint_count()) +
                            " assignments exceeds the cap");
    double z = 0.0;
    for (Odometer od(en.shape); !od.done(); od.next()) z += en.product_at(gm, od.index());
    return z;
}

double log_brute_force_partition(const GroundModel& gm, std::uint64_t cap) {
    Enumerator en(gm);
    if (en.joint_count() > cap)
        throw CapacityError("brute-force enumeration exceeds the cap");
    // log-sum-exp with a running maximum.
    double max_log = -std::numeric_limits<double>::infinity();
    std::vector<double> logs;
    for (Odometer od(en.shape); !od.done(); od.next()) {
        double log_p = 0.0;
        bool zero = false;
        std::vector<std::size_t> idx;
        for (std::size_t fi = 0; fi < gm.factors.size() && !zero; ++fi) {
            idx.clear();
            for (std::size_t v : en.factor_vars[fi]) idx.push_back(od.index()[v]);
            double val = gm.factors[fi].potential.at(idx);
            if (val == 0.0)
                zero = true;
            else
                log_p += std::log(val);
        }
        if (zero) continue;
        logs.push_back(log_p);
        max_log = std::max(max_log, log_p);
    }
    if (logs.empty()) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (double lp : logs) acc += std::exp(lp - max_log);
    return max_log + std::log(acc);
}

GroundFactor factor_multiply(const GroundFactor& f1, const GroundFactor& f2) {
    GroundFactor out;
    out.args = f1.args;
    for (const GroundAtom& a : f2.args)
        if (std::find(out.args.begin(), out.args.end(), a) == out.args.end()) out.args.push_back(a);
    std::vector<std::size_t> shape;
    std::vector<int> amap(out.args.size(), -1), bmap(out.args.size(), -1);
    for (std::size_t k = 0; k < out.args.size(); ++k) {
        auto i1 = std::find(f1.args.begin(), f1.args.end(), out.args[k]);
        auto i2 = std::find(f2.args.begin(), f2.args.end(), out.args[k]);
        if (i1 != f1.args.end()) {
            amap[k] = static_cast<int>(i1 - f1.args.begin());
            shape.push_back(f1.potential.shape()[static_cast<std::size_t>(amap[k])]);
        }
        if (i2 != f2.args.end()) {
            bmap[k] = static_cast<int>(i2 - f2.args.begin());
            if (i1 == f1.args.end())
                shape.push_back(f2.potential.shape()[static_cast<std::size_t>(bmap[k])]);
            else if (shape[k] != f2.potential.shape()[static_cast<std::size_t>(bmap[k])])
                throw ModelError("randvar " + out.args[k].str() + " has mismatched ranges");
        }
    }
    out.potential = join_tables(f1.potential, f2.potential, shape, amap, bmap);
    return out;
}

GroundFactor factor_sum_out(const GroundFactor& f, const GroundAtom& randvar) {
    auto it = std::find(f.args.begin(), f.args.end(), randvar);
    if (it == f.args.end()) throw ModelError("randvar " + randvar.str() + " not in factor");
    std::size_t axis = static_cast<std::size_t>(it - f.args.begin());
    GroundFactor out;
    out.args = f.args;
    out.args.erase(out.args.begin() + static_cast<std::ptrdiff_t>(axis));
    out.potential = f.potential.sum_axis(axis);
    return out;
}

GroundFactor ground_ve(const GroundModel& gm, const std::vector<GroundAtom>& keep) {
    std::set<GroundAtom> keep_set(keep.begin(), keep.end());
    for (const GroundAtom& ga : keep)
        if (!gm.ranges.count(ga))
            throw ModelError("keep set mentions unknown randvar " + ga.str());

    std::vector<GroundFactor> work = gm.factors;
    std::set<GroundAtom> to_eliminate;
    for (const auto& [ga, _] : gm.ranges)
        if (!keep_set.count(ga)) to_eliminate.insert(ga);

    while (!to_eliminate.empty()) {
        // Min-degree: fewest distinct neighbours in the current factor set;
        // ties broken lexicographically (the set iterates in sorted order).
        const GroundAtom* best = nullptr;
        std::size_t best_degree = 0;
        for (const GroundAtom& v : to_eliminate) {
            std::set<GroundAtom> nb;
            for (const GroundFactor& f : work)
                if (std::find(f.args.begin(), f.args.end(), v) != f.args.end())
                    nb.insert(f.args.begin(), f.args.end());
            nb.erase(v);
            if (!best || nb.size() < best_degree) {
                best = &v;
                best_degree = nb.size();
            }
        }
        GroundAtom v = *best;
        to_eliminate.erase(v);

        GroundFactor merged;
        merged.potential = Potential::scalar(1.0);
        bool touched = false;
        std::vector<GroundFactor> rest;
        for (GroundFactor& f : work) {
            if (std::find(f.args.begin(), f.args.end(), v) != f.args.end()) {
                merged = touched ? factor_multiply(merged, f) : std::move(f);
                touched = true;
            } else {
                rest.push_back(std::move(f));
            }
        }
        if (touched) {
            rest.push_back(factor_sum_out(merged, v));
        } else {
            // Randvar in no factor: summing it out multiplies by its range size.
            GroundFactor unit;
            unit.potential = Potential::scalar(static_cast<double>(gm.ranges.at(v)));
            rest.push_back(std::move(unit));
        }
        work = std::move(rest);
    }

    GroundFactor result;
    result.potential = Potential::scalar(1.0);
    for (const GroundFactor& f : work) result = factor_multiply(result, f);
    // Canonical arg order.
    std::vector<GroundAtom> sorted_args = result.args;
    std::sort(sorted_args.begin(), sorted_args.end());
    if (sorted_args != result.args) {
        std::vector<std::size_t> perm;
        for (const GroundAtom& ga : sorted_args) {
            auto it = std::find(result.args.begin(), result.args.end(), ga);
            perm.push_back(static_cast<std::size_t>(it - result.args.begin()));
        }
        std::vector<std::size_t> shape;
        for (std::size_t p : perm) shape.push_back(result.potential.shape()[p]);
        Potential reordered(shape, 0.0);
        for (Odometer od(shape); !od.done(); od.next()) {
            std::vector<std::size_t> src(perm.size());
            for (std::size_t k = 0; k < perm.size(); ++k) src[perm[k]] = od.index()[k];
            reordered.at(od.index()) = result.potential.at(src);
        }
        result.args = sorted_args;
        result.potential = std::move(reordered);
    }
    // Keep-set randvars untouched by any factor still need an axis.
    for (const GroundAtom& ga : keep) {
        if (std::find(result.args.begin(), result.args.end(), ga) == result.args.end()) {
            GroundFactor unit;
            unit.args = {ga};
            unit.potential = Potential({gm.ranges.at(ga)}, 1.0);
            result = factor_multiply(result, unit);
        }
    }
    return result;
}

GroundFactor brute_force_marginal(const GroundModel& gm, const std::vector<GroundAtom>& keep,
                                  std::uint64_t cap) {
    Enumerator en(gm);
    if (en.joint_count() > cap) throw CapacityError("brute-force marginal exceeds the cap");
    std::vector<GroundAtom> kept = keep;
    std::sort(kept.begin(), kept.end());
    std::vector<std::size_t> kshape;
    std::vector<std::size_t> kpos;
    for (const GroundAtom& ga : kept) {
        kshape.push_back(gm.ranges.at(ga));
        kpos.push_back(en.position.at(ga));
    }
    GroundFactor out;
    out.args = kept;
    out.potential = Potential(kshape, 0.0);
    for (Odometer od(en.shape); !od.done(); od.next()) {
        std::vector<std::size_t> kidx;
        for (std::size_t p : kpos) kidx.push_back(od.index()[p]);
        out.potential.at(kidx) += en.product_at(gm, od.index());
    }
    return out;
}

}  // namespace lve
