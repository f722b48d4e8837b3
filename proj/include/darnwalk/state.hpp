#pragma once

#include <utility>

#include "darnwalk/vecmath.hpp"

namespace darnwalk {

/// A point of the darned space X0 = {x0} + (X \ K): either the darned point
/// itself or a position in one Euclidean component.
class DarnedState {
public:
    /// The darned point.
    DarnedState() = default;

    static DarnedState darned() { return DarnedState(); }
    static DarnedState at(int component, Vec position)
    {
        DarnedState s;
        s.darned_ = false;
        s.component_ = component;
        s.position_ = std::move(position);
        return s;
    }

    bool is_darned() const { return darned_; }
    /// -1 for the darned point.
    int component() const { return darned_ ? -1 : component_; }
    const Vec& position() const { return position_; }

    friend bool operator==(const DarnedState&, const DarnedState&) = default;

private:
    bool darned_ = true;
    int component_ = -1;
    Vec position_;
};

}  // namespace darnwalk
