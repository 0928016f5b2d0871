#include "lve/cost.hpp"

namespace lve::cost {

Meter*& active_meter() {
    thread_local Meter* meter = nullptr;
    return meter;
}

}  // namespace lve::cost
