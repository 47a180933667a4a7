#include "swarmnet/well.hpp"

#include <cmath>

#include "swarmnet/errors.hpp"

namespace swarmnet {

std::string_view to_string(Label label) noexcept {
    switch (label) {
    case Label::positive: return "positive";
    case Label::negative: return "negative";
    case Label::unknown: break;
    }
    return "unknown";
}

Label label_from_string(std::string_view text) {
    if (text == "positive" || text == "swarming") return Label::positive;
    if (text == "negative" || text == "planktonic") return Label::negative;
    if (text == "unknown") return Label::unknown;
    throw ValidationError("unknown label '" + std::string(text) + "'");
}

void WellRecord::validate() const {
    if (!(radius_px > 0.0) || !std::isfinite(radius_px))
        throw InvalidWellError("well '" + well_id + "': radius_px must be positive");
    if (!std::isfinite(centroid_x_px) || !std::isfinite(centroid_y_px))
        throw InvalidWellError("well '" + well_id + "': centroid must be finite");
}

} // namespace swarmnet
