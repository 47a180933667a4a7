#pragma once

#include <string>
#include <string_view>

namespace swarmnet {

enum class Label { negative, positive, unknown };

std::string_view to_string(Label label) noexcept;
// Accepts "positive"/"swarming" and "negative"/"planktonic" as well as "unknown".
Label label_from_string(std::string_view text);

// One circular confinement located in a field of view.
struct WellRecord {
    std::string well_id;
    std::string source_id;
    double centroid_x_px = 0.0;
    double centroid_y_px = 0.0;
    double radius_px = 0.0;
    Label label = Label::unknown;

    // Throws InvalidWellError on non-positive radius or non-finite centroid.
    void validate() const;
};

} // namespace swarmnet
