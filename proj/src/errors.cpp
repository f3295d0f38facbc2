#include "poqd/errors.hpp"

namespace poqd {

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e) != nullptr) return 1;
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const IoError*>(&e) != nullptr) return 3;
    if (dynamic_cast<const TransportError*>(&e) != nullptr) return 4;
    if (dynamic_cast<const InvariantError*>(&e) != nullptr) return 5;
    return 5;
}

} // namespace poqd
