#pragma once

#include <stdexcept>
#include <string>

namespace cage {

// All library failures surface as cage::Error with a human-readable message
// naming the offending variable/column/path.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cage
