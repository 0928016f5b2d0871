#pragma once

#include <cstddef>
#include <cstdint>

namespace lve::cost {

// Scalar work done inside potential-table operations. The planner installs a
// meter around each pipeline step; table code records into whichever meter is
// active. Wall time is not tracked here (machine-independent metric).
struct Meter {
    std::uint64_t muladds = 0;
    std::size_t max_cells = 0;

    void add_muladds(std::uint64_t n) { muladds += n; }
    void note_table(std::size_t cells) {
        if (cells > max_cells) max_cells = cells;
    }
};

Meter*& active_meter();

inline void add_muladds(std::uint64_t n) {
    if (Meter* m = active_meter()) m->add_muladds(n);
}
inline void note_table(std::size_t cells) {
    if (Meter* m = active_meter()) m->note_table(cells);
}

// RAII installer; restores the previous meter on exit.
class Scope {
public:
    explicit Scope(Meter& m) : prev_(active_meter()) { active_meter() = &m; }
    ~Scope() { active_meter() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

private:
    Meter* prev_;
};

}  // namespace lve::cost
