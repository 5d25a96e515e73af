#include "hicom/types.hpp"

namespace hicom {

std::string to_string(AgeClass a) {
    switch (a) {
        case AgeClass::child: return "child";
        case AgeClass::middle: return "middle";
        case AgeClass::senior: return "senior";
    }
    return "?";
}

std::string to_string(GenderClass g) {
    return g == GenderClass::male ? "male" : "female";
}

std::optional<AgeClass> age_from_string(const std::string& s) {
    if (s == "child") return AgeClass::child;
    if (s == "middle") return AgeClass::middle;
    if (s == "senior") return AgeClass::senior;
    return std::nullopt;
}

std::optional<GenderClass> gender_from_string(const std::string& s) {
    if (s == "male") return GenderClass::male;
    if (s == "female") return GenderClass::female;
    return std::nullopt;
}

}  // namespace hicom
